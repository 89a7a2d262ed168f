"""
Source-to-source reductions: reset value optimization (RVO) and register allocation
optimization (RAO).

Both passes leave every variable in `exclude` untouched, so that properties over those variables
(and the control-flow variable) keep their probabilities.
"""

import logging
from dataclasses import replace
from enum import Enum
from enum import unique
from typing import AbstractSet
from typing import Mapping
from typing import TypeAlias

from pcfp._lib.assertions import assert_labels_are_excluded
from pcfp._lib.assertions import assert_reset_is_valid
from pcfp._lib.assertions import assert_variables_are_declared
from pcfp.interference import build_ig
from pcfp.interference import welsh_powell
from pcfp.liveness import ControlFlow
from pcfp.liveness import LivenessMap
from pcfp.liveness import lra
from pcfp.program import Assignment
from pcfp.program import Command
from pcfp.program import Expr
from pcfp.program import IntLit
from pcfp.program import Program
from pcfp.program import StochUpdate
from pcfp.program import VarDecl
from pcfp.program import conjoin
from pcfp.program import conjuncts
from pcfp.program import initial_guard
from pcfp.program import rename_vars
from pcfp.program import substitute
from pcfp.program import variables_of

logger = logging.getLogger(__name__)

ResetEvaluation: TypeAlias = Mapping[str, int]
"""Reset target value per variable."""

ExcludeSet: TypeAlias = AbstractSet[str]
"""Variables exempt from reduction."""


@unique
class RvoMode(Enum):
    """
    How RVO chooses the reset candidates of an update.

    Attributes:
        AS_WRITTEN: Variables live at the command itself but dead at every command of the
            update's target location.
        AGGRESSIVE: Every variable dead at every command of the update's target location.
    """

    AS_WRITTEN = "as-written"
    AGGRESSIVE = "aggressive"


@unique
class Reduction(Enum):
    """
    A reduction pipeline.

    Attributes:
        value: The name of the pipeline, as accepted on the command line.
        rvo_mode: The RVO mode of the pipeline, or None if it performs no RVO.
        rao: True if the pipeline ends with RAO.
    """

    value: str
    rvo_mode: RvoMode | None
    rao: bool

    def __new__(cls, value: str, rvo_mode: RvoMode | None, rao: bool) -> "Reduction":
        enum = object.__new__(cls)
        enum._value_ = value

        return enum

    # NB: The extra fields are assigned in `__init__` rather than `__new__` so that members can be
    # looked up from their value alone (e.g. `Reduction("rao")`).
    def __init__(self, _: str, rvo_mode: RvoMode | None = None, rao: bool = False) -> None:
        self.rvo_mode = rvo_mode
        self.rao = rao

    IDENTITY = "identity", None, False
    """Leave the program unchanged."""

    RVO_AS_WRITTEN = "rvo-as-written", RvoMode.AS_WRITTEN, False
    """RVO with live-at-command reset candidates."""

    RVO_AGGRESSIVE = "rvo-aggressive", RvoMode.AGGRESSIVE, False
    """RVO resetting every variable dead at the update's target."""

    RAO = "rao", None, True
    """Merge non-interfering variables."""

    RVO_RAO = "rvo+rao", RvoMode.AGGRESSIVE, True
    """Aggressive RVO followed by RAO."""

    RVO_AS_WRITTEN_RAO = "rvo-as-written+rao", RvoMode.AS_WRITTEN, True
    """As-written RVO followed by RAO."""

    @classmethod
    def of(cls, pass_name: str, rvo_mode: RvoMode = RvoMode.AGGRESSIVE) -> "Reduction":
        """
        Resolve a command-line pass name and an RVO mode into a pipeline.

        Args:
            pass_name: `identity`, `rvo`, `rao` or `rvo+rao`, or the value of any member.
            rvo_mode: The RVO mode used by `rvo` and `rvo+rao`.

        Raises:
            ValueError: If the pass name is unknown.
        """
        shorthands = {
            "rvo": (rvo_mode, False),
            "rvo+rao": (rvo_mode, True),
        }
        if pass_name in shorthands:
            mode, with_rao = shorthands[pass_name]
            return next(m for m in cls if m.rvo_mode is mode and m.rao == with_rao)

        try:
            return cls(pass_name)
        except ValueError:
            names = ", ".join(["rvo", "rvo+rao"] + [m.value for m in cls])
            raise ValueError(f"Unknown pass {pass_name!r}; expected one of: {names}") from None


def live_at(flow: ControlFlow, live: LivenessMap, location: int) -> frozenset[str]:
    """The variables live at some command enabled at `location`."""
    return live.union(flow.at(location))


def _reset_update(
    update: StochUpdate,
    candidates: list[str],
    reset: ResetEvaluation,
) -> StochUpdate:
    assigns = list(update.assigns)
    for name in candidates:
        value = IntLit(reset[name])
        for i, a in enumerate(assigns):
            if a.target == name:
                assigns[i] = replace(a, expr=value)
                break
        else:
            assigns.append(Assignment(target=name, expr=value))
    return replace(update, assigns=tuple(assigns))


def _rvo_pass(
    program: Program,
    reset: ResetEvaluation,
    exclude: ExcludeSet,
    mode: RvoMode,
) -> Program:
    live = lra(program)
    flow = ControlFlow(program)
    order = program.variables

    commands: list[Command] = []
    resets = 0
    for c in program.commands:
        eligible = live[c.id] if mode is RvoMode.AS_WRITTEN else frozenset(order)
        updates: list[StochUpdate] = []
        for u in c.updates:
            dead = eligible - exclude - live_at(flow, live, u.target)
            candidates = [v for v in order if v in dead]
            if candidates:
                logger.debug(
                    "command %d -> %d: resetting %s", c.id, u.target, ", ".join(candidates)
                )
                resets += len(candidates)
            updates.append(_reset_update(u, candidates, reset))
        commands.append(replace(c, updates=tuple(updates)))

    logger.debug("RVO (%s): %d resets over %d commands", mode.value, resets, len(commands))
    return replace(program, commands=tuple(commands))


def rvo(
    program: Program,
    reset: ResetEvaluation | None = None,
    exclude: ExcludeSet = frozenset(),
    mode: RvoMode = RvoMode.AGGRESSIVE,
) -> Program:
    """
    Reset value optimization.

    For every stochastic update `u` of a command `c` with control-flow target `l`, the reset
    candidates `L` are the non-excluded variables that are dead at every command enabled at `l`
    (restricted to `live(c)` in `AS_WRITTEN` mode). Each candidate `x` is then assigned the
    constant `reset[x]` in `u`: an existing assignment to `x` has its right-hand side replaced,
    otherwise `x := reset[x]` is appended.

    Replacing `x := y` by a constant can remove the last read of `y`, so the pass is repeated on
    its own output until nothing changes. Passes only add resets, hence this terminates, and
    `rvo` applied to its own result returns it unchanged.

    Args:
        program: A well-formed program.
        reset: The reset value of every declared variable. Defaults to the initial values.
        exclude: Variables that are never reset.
        mode: How reset candidates are chosen.

    Returns:
        A program with the same variables, locations, guards and probabilities.

    Raises:
        ResetValueError: If a reset value is missing or outside its variable's domain.
        UndeclaredVariableError: If `exclude` names an undeclared variable.
    """
    reset = program.initial_eval if reset is None else dict(reset)
    assert_reset_is_valid(program, reset)
    assert_variables_are_declared(program, exclude, what="excluded")

    result = program
    passes = 1
    while (reduced := _rvo_pass(result, reset, exclude, mode)) != result:
        result = reduced
        passes += 1

    logger.info("RVO (%s): stable after %d passes", mode.value, passes)
    return result


def simplify_duplicate_conjuncts(expr: Expr) -> Expr:
    """Drop syntactically repeated top-level conjuncts, keeping first occurrences in order."""
    parts = conjuncts(expr)
    if len(parts) == 1:
        return expr

    unique_parts = tuple(dict.fromkeys(parts))
    if len(unique_parts) == len(parts):
        return expr
    return conjoin(unique_parts)


def _merged_name(color: int, taken: set[str]) -> str:
    name = f"m{color}"
    while name in taken:
        name += "_"
    return name


def _prune_class_writes(
    command: Command,
    live_after: frozenset[str],
    classes: list[list[str]],
) -> Command:
    """
    Keep at most one assignment per merge class in every update of a command.

    The kept assignment belongs to the class member live after the command (the interference graph
    admits at most one); if no member is live there, the first assigned member in declaration order
    is kept. Assignments to the other members are dead stores and are dropped.
    """
    updates: list[StochUpdate] = []
    for u in command.updates:
        dropped: set[str] = set()
        for members in classes:
            assigned = [m for m in members if m in u.assigned]
            survivor = next((m for m in members if m in live_after), None)
            keep = survivor if survivor is not None else next(iter(assigned), None)
            dropped.update(m for m in assigned if m != keep)
        if dropped:
            logger.debug("command %d: dropping dead stores to %s", command.id, sorted(dropped))
            u = replace(u, assigns=tuple(a for a in u.assigns if a.target not in dropped))
        updates.append(u)

    return replace(command, updates=tuple(updates))


def rao(program: Program, exclude: ExcludeSet = frozenset()) -> Program:
    """
    Register allocation optimization.

    The interference graph of the program is colored with Welsh-Powell; all non-excluded variables
    of one color are merged into a single variable. A merged variable is named `m<color>`, ranges
    over the hull of its members' domains and starts at the initial value of the member live at
    location 0 (or of the first member, if none is). Classes with a single non-excluded member keep
    that member's name and declaration. Labels are not rewritten.

    Args:
        program: A well-formed program.
        exclude: Variables that keep their own name and declaration.

    Raises:
        LabelNotExcludedError: If a label refers to a variable that is not excluded.
        UndeclaredVariableError: If `exclude` names an undeclared variable.
    """
    assert_variables_are_declared(program, exclude, what="excluded")
    assert_labels_are_excluded(program, exclude)

    live = lra(program)
    flow = ControlFlow(program)
    coloring = welsh_powell(build_ig(program, live))
    at_start = live_at(flow, live, 0)

    classes: dict[int, list[str]] = {}
    for color, members in coloring.classes().items():
        kept = [m for m in members if m not in exclude]
        if kept:
            classes[color] = kept

    taken = set(program.variables) - {m for ms in classes.values() if len(ms) > 1 for m in ms}
    taken.add(program.cf_var)

    mapping: dict[str, str] = {}
    merged: dict[str, VarDecl] = {}
    for color, members in classes.items():
        if len(members) < 2:
            continue
        name = _merged_name(color, taken)
        taken.add(name)
        decls = [program.decl(m) for m in members]
        source = next((d for d in decls if d.name in at_start), decls[0])
        merged_decl = VarDecl(
            name=name,
            lo=min(d.lo for d in decls),
            hi=max(d.hi for d in decls),
            init=source.init,
        )
        for m in members:
            mapping[m] = name
            merged[m] = merged_decl
        logger.debug("merging %s into %s", ", ".join(members), name)

    new_decls: list[VarDecl] = []
    for d in program.decls:
        decl = merged.get(d.name, d)
        if decl not in new_decls:
            new_decls.append(decl)

    multi = [ms for ms in classes.values() if len(ms) > 1]
    pruned = replace(
        program,
        commands=tuple(
            _prune_class_writes(c, live.union(flow.succ(c)), multi) for c in program.commands
        ),
    )
    result = rename_vars(pruned, mapping, decls=tuple(new_decls))
    result = replace(
        result,
        commands=tuple(
            replace(c, guard=simplify_duplicate_conjuncts(c.guard)) for c in result.commands
        ),
    )

    logger.info(
        "RAO: %d variables -> %d (%d colors); initial guard %s",
        len(program.decls),
        len(result.decls),
        coloring.color_count,
        simplify_duplicate_conjuncts(substitute(initial_guard(program), mapping)),
    )
    return result


def default_exclude(program: Program, extra: ExcludeSet = frozenset()) -> frozenset[str]:
    """The variables referenced by any label of the program, together with `extra`."""
    in_labels = {
        name
        for lab in program.labels
        for name in variables_of(lab.expr)
        if name != program.cf_var
    }
    return frozenset(in_labels | set(extra))


def reduce(
    program: Program,
    reduction: Reduction,
    exclude: ExcludeSet = frozenset(),
    reset: ResetEvaluation | None = None,
) -> Program:
    """
    Apply a reduction pipeline: RVO (if the pipeline has an RVO mode), then RAO (if requested).
    """
    if reduction.rvo_mode is not None:
        program = rvo(program, reset=reset, exclude=exclude, mode=reduction.rvo_mode)
    if reduction.rao:
        program = rao(program, exclude=exclude)
    return program
