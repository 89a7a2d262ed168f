"""
Random program generation and batch equivalence campaigns.

A campaign generates one program per seed, applies each requested reduction, and checks exactly
that the probability of the label `"fail"` within `k` rounds is unchanged and that the two DTMCs
are bisimilar.
"""

import logging
import random
from dataclasses import dataclass
from dataclasses import field
from typing import Iterable
from typing import Sequence

from joblib import Parallel
from joblib import delayed
from pydantic import Field
from pydantic import model_validator

from pcfp._lib.errors import PcfpError
from pcfp._lib.records import Record
from pcfp.dtmc import Dtmc
from pcfp.dtmc import build_dtmc
from pcfp.dtmc import check_bisimilar
from pcfp.dtmc import make_labeling
from pcfp.dtmc import reach_probabilities
from pcfp.frontend import print_program
from pcfp.models import FAIL_LABEL
from pcfp.program import TRUE
from pcfp.program import And
from pcfp.program import ArithOp
from pcfp.program import Assignment
from pcfp.program import BinOp
from pcfp.program import Command
from pcfp.program import Compare
from pcfp.program import CompareOp
from pcfp.program import Expr
from pcfp.program import IntLit
from pcfp.program import Label
from pcfp.program import Program
from pcfp.program import Ratio
from pcfp.program import StochUpdate
from pcfp.program import Var
from pcfp.program import VarDecl
from pcfp.reduce import Reduction
from pcfp.reduce import default_exclude
from pcfp.reduce import reduce

logger = logging.getLogger(__name__)

JUNK_VAR = "junk"
"""Assigned by some updates, never read."""

TMP_VAR = "tmp"
"""Assigned by every update, so each read sees the value written by the preceding command."""

FLAG_VAR = "flag"
"""The variable of the label `"fail"`."""


class GenParams(Record):
    """
    Parameters of the random program generator.

    Attributes:
        seed: The seed; generation is deterministic in all parameters.
        num_locations: The number of control-flow locations.
        num_vars: The number of data variables, besides `junk`, `tmp` and `flag`.
        commands_per_location: The maximal number of commands per location.
        max_branching: The maximal number of stochastic updates per command.
        granularity: The common denominator of constant probabilities.
    """

    seed: int = Field(ge=-(2**63), lt=2**63)
    num_locations: int = Field(default=4, ge=1)
    num_vars: int = Field(default=3, ge=1)
    commands_per_location: int = Field(default=2, ge=1)
    max_branching: int = Field(default=2, ge=1)
    granularity: int = Field(default=4, ge=1)

    @model_validator(mode="after")
    def _branching_fits_granularity(self) -> "GenParams":
        if self.max_branching > self.granularity:
            raise ValueError(
                f"max_branching ({self.max_branching}) cannot exceed granularity "
                f"({self.granularity}): every branch needs a probability of at least 1/granularity"
            )
        return self


class _Generator:
    """One generation run; all randomness is drawn from a single seeded `random.Random`."""

    def __init__(self, params: GenParams) -> None:
        self._params = params
        self._rng = random.Random(params.seed)
        self._data: list[VarDecl] = []

    def program(self) -> Program:
        p = self._params
        rng = self._rng
        for i in range(p.num_vars):
            hi = rng.randint(1, 2)
            self._data.append(VarDecl(name=f"v{i}", lo=0, hi=hi, init=rng.randint(0, hi)))
        decls = (
            *self._data,
            VarDecl(name=JUNK_VAR, lo=0, hi=1, init=0),
            VarDecl(name=TMP_VAR, lo=0, hi=1, init=0),
            VarDecl(name=FLAG_VAR, lo=0, hi=1, init=0),
        )

        commands: list[Command] = []
        for location in range(p.num_locations):
            for _ in range(rng.randint(1, p.commands_per_location)):
                commands.append(self._command(len(commands), location))

        return Program(
            name=f"gen{p.seed}".replace("-", "m"),
            cf_max=p.num_locations - 1,
            decls=decls,
            commands=tuple(commands),
            labels=(
                Label(name=FAIL_LABEL, expr=Compare(CompareOp.EQ, Var(FLAG_VAR), IntLit(1))),
            ),
        )

    def _command(self, command_id: int, location: int) -> Command:
        rng = self._rng
        readable = [*self._data, VarDecl(name=TMP_VAR, lo=0, hi=1, init=0)]
        tests = rng.sample(readable, k=rng.randint(0, min(2, len(readable))))
        pinned = {d.name: rng.randint(d.lo, d.hi) for d in tests}
        atoms: list[Expr] = [
            Compare(CompareOp.EQ, Var(name), IntLit(value)) for name, value in pinned.items()
        ]
        guard: Expr = TRUE if not atoms else atoms[0] if len(atoms) == 1 else And(tuple(atoms))

        probs = self._probabilities()
        updates = tuple(
            StochUpdate(
                prob=prob,
                target=rng.randrange(self._params.num_locations),
                assigns=self._assignments(pinned),
            )
            for prob in probs
        )
        return Command(id=command_id, location=location, guard=guard, updates=updates)

    def _probabilities(self) -> list[Expr]:
        rng = self._rng
        d = self._params.granularity
        branches = rng.randint(1, self._params.max_branching)

        if branches == 2 and rng.random() < 0.2:
            # x/(1+x) and 1/(1+x): state-dependent, and zero on one side when x=0
            x = Var(rng.choice(self._data).name)
            one_plus_x = BinOp(ArithOp.ADD, IntLit(1), x)
            return [Ratio(x, one_plus_x), Ratio(IntLit(1), one_plus_x)]

        cuts = sorted(rng.sample(range(1, d), k=branches - 1))
        bounds = [0, *cuts, d]
        return [
            Ratio(IntLit(hi - lo), IntLit(d)) for lo, hi in zip(bounds, bounds[1:], strict=False)
        ]

    def _assignments(self, pinned: dict[str, int]) -> tuple[Assignment, ...]:
        rng = self._rng
        assigns: list[Assignment] = []
        for decl in self._data:
            if rng.random() < 0.5:
                continue
            assigns.append(Assignment(target=decl.name, expr=self._value(decl, pinned)))

        sources = [d for d in self._data if d.hi <= 1]
        if sources and rng.random() < 0.5:
            tmp_value: Expr = Var(rng.choice(sources).name)
        else:
            tmp_value = IntLit(rng.randint(0, 1))
        assigns.append(Assignment(target=TMP_VAR, expr=tmp_value))

        if rng.random() < 0.3:
            assigns.append(Assignment(target=JUNK_VAR, expr=IntLit(rng.randint(0, 1))))
        if rng.random() < 0.1:
            assigns.append(Assignment(target=FLAG_VAR, expr=IntLit(1)))
        return tuple(assigns)

    def _value(self, decl: VarDecl, pinned: dict[str, int]) -> Expr:
        """An in-range right-hand side for `decl`."""
        rng = self._rng
        choice = rng.randrange(4)
        if choice == 1:
            # reflection stays within [0..hi]
            return BinOp(ArithOp.SUB, IntLit(decl.hi), Var(decl.name))
        if choice == 2:
            copies = [d for d in self._data if d.hi <= decl.hi and d.name != decl.name]
            if copies:
                return Var(rng.choice(copies).name)
        if choice == 3 and pinned.get(decl.name, decl.hi) < decl.hi:
            # increment, guarded by the pinned value
            return BinOp(ArithOp.ADD, Var(decl.name), IntLit(1))
        return IntLit(rng.randint(decl.lo, decl.hi))


def generate(params: GenParams) -> Program:
    """
    Generate a random well-formed program.

    Data variables `v0, v1, ...` range over `[0..1]` or `[0..2]`. Guards are conjunctions of up to
    two equality tests; probabilities are ratios `i/granularity`, or occasionally `x/(1+x)` paired
    with `1/(1+x)`; right-hand sides are in-range constants, reflections `hi-x`, copies of
    variables with a smaller domain, or increments of a variable the guard pins below its upper
    bound. Besides the data variables, every program declares `junk` (never read), `tmp` (written
    by every update) and `flag`, the variable of the label `"fail"`.
    """
    return _Generator(params).program()


class CaseResult(Record):
    """
    The outcome of one reduction of one generated program.

    Attributes:
        seed: The generator seed.
        reduction: The reduction pipeline.
        preserved: True if `Pr[◇^{<k} fail]` is unchanged for every `k`.
        bisimilar: True if the original and reduced DTMCs are bisimilar.
        original_states: The number of reachable states of the original program.
        reduced_states: The number of reachable states of the reduced program.
        factor: `original_states / reduced_states`.
        error: The error that aborted the case, if any.
        program: The generated program text, recorded for failing cases only.
    """

    seed: int
    reduction: str
    preserved: bool = False
    bisimilar: bool = False
    original_states: int = 0
    reduced_states: int = 0
    factor: float = 0.0
    error: str | None = None
    program: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and self.preserved and self.bisimilar


class ReductionSummary(Record):
    cases: int
    preservation_failures: int
    bisimulation_failures: int
    errors: int
    mean_factor: float


class CampaignReport(Record):
    """
    The aggregated results of a campaign, with cases sorted by seed and then by reduction.

    Attributes:
        params: The generator parameters of every case, sorted by seed.
        ks: The round bounds checked.
        cases: One result per seed and reduction.
        summary: Counts per reduction.
    """

    params: list[GenParams]
    ks: list[int]
    cases: list[CaseResult]
    summary: dict[str, ReductionSummary]

    @property
    def failures(self) -> int:
        return sum(not c.passed for c in self.cases)

    @property
    def passed(self) -> bool:
        return self.failures == 0


@dataclass(frozen=True)
class _Task:
    params: GenParams
    reductions: tuple[Reduction, ...]
    ks: tuple[int, ...]
    max_states: int | None = field(default=None)


def run_case(
    program: Program,
    original: Dtmc,
    reduction: Reduction,
    ks: Sequence[int],
    seed: int,
    max_states: int | None = None,
) -> CaseResult:
    """Reduce a program and check its reduction against the already built original DTMC."""
    label = program.label(FAIL_LABEL)
    try:
        reduced_program = reduce(program, reduction, exclude=default_exclude(program))
        reduced = build_dtmc(reduced_program, max_states)
        before = reach_probabilities(original, label, ks)
        after = reach_probabilities(reduced, reduced_program.label(FAIL_LABEL), ks)
        labeling = make_labeling({FAIL_LABEL: label}, program.cf_var)
        result = CaseResult(
            seed=seed,
            reduction=reduction.value,
            preserved=before == after,
            bisimilar=check_bisimilar(original, reduced, labeling),
            original_states=len(original),
            reduced_states=len(reduced),
            factor=len(original) / len(reduced),
        )
    except PcfpError as error:
        result = CaseResult(seed=seed, reduction=reduction.value, error=str(error))

    if not result.passed:
        logger.warning("seed %d, %s: case failed", seed, reduction.value)
        result = result.model_copy(update={"program": print_program(program)})
    return result


def _run_task(task: _Task) -> list[CaseResult]:
    seed = task.params.seed
    program = generate(task.params)
    try:
        original = build_dtmc(program, task.max_states)
    except PcfpError as error:
        logger.warning("seed %d: %s", seed, error)
        return [
            CaseResult(
                seed=seed, reduction=r.value, error=str(error), program=print_program(program)
            )
            for r in task.reductions
        ]

    logger.debug("seed %d: %d states", seed, len(original))
    return [
        run_case(program, original, r, task.ks, seed, task.max_states) for r in task.reductions
    ]


def _summarize(
    cases: list[CaseResult],
    reductions: Sequence[Reduction],
) -> dict[str, ReductionSummary]:
    summary = {}
    for r in reductions:
        mine = [c for c in cases if c.reduction == r.value]
        ok = [c for c in mine if c.error is None]
        summary[r.value] = ReductionSummary(
            cases=len(mine),
            preservation_failures=sum(not c.preserved for c in ok),
            bisimulation_failures=sum(not c.bisimilar for c in ok),
            errors=len(mine) - len(ok),
            mean_factor=sum(c.factor for c in ok) / len(ok) if ok else 0.0,
        )
    return summary


def campaign(
    batch: Iterable[GenParams],
    reductions: Sequence[Reduction],
    ks: Iterable[int],
    jobs: int = 1,
    max_states: int | None = None,
) -> CampaignReport:
    """
    Run every reduction on the program generated from every parameter set.

    A failing case (a probability mismatch, a failed bisimulation check, or an error while
    reducing or exploring) is recorded in the report together with the program text, and does not
    stop the campaign.

    Args:
        batch: The generator parameters, one program each.
        reductions: The reduction pipelines to check.
        ks: The round bounds.
        jobs: The number of worker processes; 1 runs the campaign in-process.
        max_states: The state cap of every exploration.
    """
    params = sorted(batch, key=lambda p: p.seed)
    bounds = tuple(sorted(set(ks)))
    tasks = [_Task(p, tuple(reductions), bounds, max_states) for p in params]

    if jobs > 1:
        results = Parallel(n_jobs=jobs)(delayed(_run_task)(t) for t in tasks)
    else:
        results = [_run_task(t) for t in tasks]

    order = {r.value: i for i, r in enumerate(reductions)}
    cases = sorted(
        (c for rs in results for c in rs), key=lambda c: (c.seed, order[c.reduction])
    )
    report = CampaignReport(
        params=params,
        ks=list(bounds),
        cases=cases,
        summary=_summarize(cases, reductions),
    )
    logger.info(
        "Campaign: %d programs, %d cases, %d failures", len(params), len(cases), report.failures
    )
    return report
