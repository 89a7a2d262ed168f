import pytest

from pcfp._lib.errors import LabelNotExcludedError
from pcfp._lib.errors import ResetValueError
from pcfp.frontend import parse
from pcfp.frontend import parse_expr
from pcfp.frontend import print_program
from pcfp.harness import GenParams
from pcfp.harness import generate
from pcfp.interference import build_ig
from pcfp.liveness import ControlFlow
from pcfp.liveness import lra
from pcfp.liveness import reads
from pcfp.models import BSP_RAO_SOURCE
from pcfp.models import BSP_SOURCE
from pcfp.program import Program
from pcfp.program import rename_vars
from pcfp.program import well_formed
from pcfp.reduce import Reduction
from pcfp.reduce import RvoMode
from pcfp.reduce import default_exclude
from pcfp.reduce import rao
from pcfp.reduce import reduce
from pcfp.reduce import rvo
from pcfp.reduce import simplify_duplicate_conjuncts

BSP_RVO_AGGRESSIVE = """\
dtmc

module bsp
	cf : [0..3] init 0;
	x : [0..1] init 1;
	y : [0..1] init 1;

	[] cf=0 & x=1 -> 1:(cf'=1)&(x'=0)&(y'=1);
	[] cf=1 & x=0 -> 0.5:(cf'=2)&(y'=1)&(x'=1) + 0.5:(cf'=3)&(y'=1)&(x'=1);
	[] cf=2 -> 1:(cf'=0)&(x'=1)&(y'=1);
	[] cf=3 -> 0.3:(cf'=0)&(x'=0)&(y'=1) + 0.7:(cf'=1)&(x'=0)&(y'=1);
endmodule
"""

DEAD_STORE = """\
dtmc

module deadstore
	cf : [0..1] init 0;
	x : [0..1] init 0;
	j : [0..1] init 0;

	[] cf=0 -> 1:(cf'=1)&(j'=1);
	[] cf=1 & x=0 -> 1:(cf'=0)&(x'=1);
	[] cf=1 & x=1 -> 1:(cf'=0)&(x'=0);
endmodule
"""
"""`j` is written but never read; merging it with `x` must not clobber `x`."""


CHAINED_COPY = """\
dtmc

module chain
	cf : [0..1] init 0;
	v : [0..1] init 0;
	tmp : [0..1] init 0;

	[] cf=0 -> 1:(cf'=1)&(tmp'=v);
	[] cf=1 -> 1:(cf'=0);
endmodule
"""
"""`v` is only read to be copied into the dead `tmp`; once that copy is reset, `v` is dead too."""

CLIQUE = """\
dtmc

module clique
	cf : [0..1] init 0;
	x : [0..1] init 0;
	y : [0..2] init 1;
	z : [0..1] init 1;

	[] cf=0 & x=y & z=1 -> 1:(cf'=1)&(x'=1-x);
	[] cf=1 -> 0.5:(cf'=0)&(y'=z) + 0.5:(cf'=0)&(z'=x);
endmodule
"""
"""Every variable is read at location 0, so the interference graph is complete."""


def _generated(seed: int) -> Program:
    return generate(GenParams(seed=seed, num_vars=1 + seed % 4, num_locations=1 + seed % 5))


def test_rvo_as_written(bsp: Program) -> None:
    reduced = rvo(bsp, mode=RvoMode.AS_WRITTEN)

    # only c1 has a variable live at itself but dead at its targets
    assert print_program(reduced) == BSP_SOURCE.replace(
        "0.5:(cf'=2)&(y'=0) + 0.5:(cf'=3)&(y'=0)",
        "0.5:(cf'=2)&(y'=0)&(x'=1) + 0.5:(cf'=3)&(y'=0)&(x'=1)",
    )


def test_rvo_aggressive(bsp: Program) -> None:
    assert print_program(rvo(bsp)) == BSP_RVO_AGGRESSIVE
    assert rvo(bsp) == rvo(bsp, mode=RvoMode.AGGRESSIVE)


@pytest.mark.parametrize("mode", list(RvoMode))
def test_rvo_is_idempotent_on_bsp(bsp: Program, mode: RvoMode) -> None:
    once = rvo(bsp, mode=mode)
    assert rvo(once, mode=mode) == once


def test_rvo_keeps_structure(bsp: Program) -> None:
    reduced = rvo(bsp)

    assert reduced.decls == bsp.decls
    for before, after in zip(bsp.commands, reduced.commands, strict=False):
        assert after.location == before.location
        assert after.guard == before.guard
        assert [u.prob for u in after.updates] == [u.prob for u in before.updates]
        assert [u.target for u in after.updates] == [u.target for u in before.updates]


def test_rvo_with_reset_values(bsp: Program) -> None:
    reduced = rvo(bsp, reset={"x": 0, "y": 0}, mode=RvoMode.AS_WRITTEN)

    assert "0.5:(cf'=2)&(y'=0)&(x'=0)" in print_program(reduced)


def test_rvo_respects_exclude(bsp: Program) -> None:
    assert rvo(bsp, exclude={"x"}, mode=RvoMode.AS_WRITTEN) == bsp
    assert rvo(bsp, exclude={"y"}) == rvo(bsp, mode=RvoMode.AS_WRITTEN)


@pytest.mark.parametrize(
    "reset,message",
    [
        ({"x": 2, "y": 0}, r"Reset value 2 of x outside \[0..1\]"),
        ({"x": 0}, "No reset value for: y"),
        ({"x": 0, "y": 0, "q": 1}, "undeclared variables: q"),
    ],
)
def test_rvo_raises_on_invalid_reset(bsp: Program, reset: dict[str, int], message: str) -> None:
    with pytest.raises(ResetValueError, match=message):
        rvo(bsp, reset=reset)


def test_rvo_raises_on_unknown_excluded_variable(bsp: Program) -> None:
    with pytest.raises(ValueError, match="excluded variables are not declared in module bsp: z"):
        rvo(bsp, exclude={"z"})


def test_rao(bsp: Program) -> None:
    reduced = rao(bsp)

    assert reduced == rename_vars(parse(BSP_RAO_SOURCE), {"xy": "m1"})
    assert [(d.name, d.lo, d.hi, d.init) for d in reduced.decls] == [("m1", 0, 1, 1)]
    assert well_formed(reduced) == []


@pytest.mark.parametrize("exclude", [{"x", "y"}, {"x"}, {"y"}])
def test_rao_with_excluded_variables_is_identity_on_bsp(
    bsp: Program,
    exclude: set[str],
) -> None:
    # with one of two variables excluded, no class has two members left
    assert rao(bsp, exclude=exclude) == bsp


def test_rao_raises_if_label_variable_is_not_excluded(bsp_labelled: Program) -> None:
    with pytest.raises(LabelNotExcludedError, match="label 'fail' refers to x"):
        rao(bsp_labelled)

    assert rao(bsp_labelled, exclude=default_exclude(bsp_labelled)).labels == bsp_labelled.labels


def test_rao_drops_dead_stores_of_merged_variables() -> None:
    program = parse(DEAD_STORE)
    reduced = rao(program)

    assert [(d.name, d.init) for d in reduced.decls] == [("m1", 0)]
    assert reduced.commands[0].updates[0].assigns == ()
    assert "(cf'=0)&(m1'=1)" in print_program(reduced)


def test_rao_avoids_taken_names() -> None:
    y_decl = "\ty : [0..1] init 1;"
    program = parse(BSP_SOURCE.replace(y_decl, y_decl + "\n\tm1 : [0..1] init 0;"))
    reduced = rao(program, exclude={"m1"})

    assert reduced.variables == ("m1_", "m1")
    assert reduced.decl("m1") == program.decl("m1")


def test_rao_merges_domains_into_their_hull() -> None:
    program = parse(DEAD_STORE.replace("j : [0..1] init 0;", "j : [0..3] init 2;"))

    assert [(d.name, d.lo, d.hi, d.init) for d in rao(program).decls] == [("m1", 0, 3, 0)]


def test_simplify_duplicate_conjuncts(bsp: Program) -> None:
    expr = parse_expr("x=1 & y=0 & x=1", bsp)

    assert simplify_duplicate_conjuncts(expr) == parse_expr("x=1 & y=0", bsp)
    assert simplify_duplicate_conjuncts(parse_expr("x=1 & x=1", bsp)) == parse_expr("x=1", bsp)

    unchanged = parse_expr("x=1 | x=1", bsp)
    assert simplify_duplicate_conjuncts(unchanged) is unchanged


@pytest.mark.parametrize(
    "pass_name,mode,expected",
    [
        ("identity", RvoMode.AGGRESSIVE, Reduction.IDENTITY),
        ("rvo", RvoMode.AGGRESSIVE, Reduction.RVO_AGGRESSIVE),
        ("rvo", RvoMode.AS_WRITTEN, Reduction.RVO_AS_WRITTEN),
        ("rao", RvoMode.AS_WRITTEN, Reduction.RAO),
        ("rvo+rao", RvoMode.AGGRESSIVE, Reduction.RVO_RAO),
        ("rvo+rao", RvoMode.AS_WRITTEN, Reduction.RVO_AS_WRITTEN_RAO),
        ("rvo-as-written", RvoMode.AGGRESSIVE, Reduction.RVO_AS_WRITTEN),
    ],
)
def test_reduction_of(pass_name: str, mode: RvoMode, expected: Reduction) -> None:
    assert Reduction.of(pass_name, mode) is expected


def test_reduction_of_raises_on_unknown_pass() -> None:
    with pytest.raises(ValueError, match="Unknown pass 'bogus'"):
        Reduction.of("bogus")


def test_reduction_members() -> None:
    assert Reduction("rvo+rao") is Reduction.RVO_RAO
    assert Reduction.RVO_RAO.rvo_mode is RvoMode.AGGRESSIVE
    assert Reduction.RVO_RAO.rao
    assert Reduction.IDENTITY.rvo_mode is None
    assert not Reduction.IDENTITY.rao


def test_reduce(bsp: Program) -> None:
    assert reduce(bsp, Reduction.IDENTITY) == bsp
    assert reduce(bsp, Reduction.RVO_AGGRESSIVE) == rvo(bsp)
    assert reduce(bsp, Reduction.RAO) == rao(bsp)
    assert reduce(bsp, Reduction.RVO_RAO) == rao(rvo(bsp))
    assert reduce(bsp, Reduction.RVO_AS_WRITTEN_RAO) == rao(rvo(bsp, mode=RvoMode.AS_WRITTEN))


def test_default_exclude(bsp: Program, bsp_labelled: Program) -> None:
    assert default_exclude(bsp) == set()
    assert default_exclude(bsp_labelled) == {"x"}
    assert default_exclude(bsp, extra={"y"}) == {"y"}


@pytest.mark.parametrize("seed", range(50))
@pytest.mark.parametrize("reduction", list(Reduction))
def test_reductions_keep_generated_programs_well_formed(seed: int, reduction: Reduction) -> None:
    program = _generated(seed)
    reduced = reduce(program, reduction, exclude=default_exclude(program))

    assert well_formed(reduced) == []
    assert len(reduced.decls) <= len(program.decls)
    assert reduced.labels == program.labels
    assert parse(print_program(reduced)) == reduced


def test_rvo_repeats_until_stable() -> None:
    program = parse(CHAINED_COPY)
    reduced = rvo(program)

    assert print_program(reduced) == CHAINED_COPY.replace(
        "1:(cf'=1)&(tmp'=v);", "1:(cf'=1)&(tmp'=0)&(v'=0);"
    ).replace("1:(cf'=0);", "1:(cf'=0)&(tmp'=0)&(v'=0);")
    assert rvo(reduced) == reduced


@pytest.mark.parametrize("seed", range(50))
@pytest.mark.parametrize("mode", list(RvoMode))
def test_rvo_is_idempotent_on_generated_programs(seed: int, mode: RvoMode) -> None:
    program = _generated(seed)
    exclude = default_exclude(program)
    once = rvo(program, exclude=exclude, mode=mode)

    assert rvo(once, exclude=exclude, mode=mode) == once


@pytest.mark.parametrize("seed", range(50))
@pytest.mark.parametrize("mode", list(RvoMode))
def test_rvo_never_resets_a_variable_read_at_the_target(seed: int, mode: RvoMode) -> None:
    program = _generated(seed)
    reduced = rvo(program, exclude=default_exclude(program), mode=mode)
    flow = ControlFlow(reduced)

    for before, after in zip(program.commands, reduced.commands, strict=True):
        for original, update in zip(before.updates, after.updates, strict=True):
            resets = {a.target for a in update.assigns if a not in original.assigns}
            for s in flow.at(update.target):
                assert resets.isdisjoint(reads(s)), (before.id, update.target, s.id)


@pytest.mark.parametrize("seed", range(50))
@pytest.mark.parametrize("mode", list(RvoMode))
def test_rvo_excluding_every_variable_is_identity(seed: int, mode: RvoMode) -> None:
    program = _generated(seed)

    assert rvo(program, exclude=set(program.variables), mode=mode) == program


def test_rao_makes_no_merges_on_a_complete_interference_graph() -> None:
    program = parse(CLIQUE)
    graph = build_ig(program, lra(program))

    assert graph.number_of_edges() == 3
    assert rao(program) == program
