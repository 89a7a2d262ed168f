"""
Explicit-state DTMC semantics of programs and exact round-bounded reachability.

In a state, the commands whose location and guard hold are enabled; one of them is selected
uniformly, then one of its stochastic updates fires with its probability. All probabilities are
exact rationals.

A *round* ends whenever control returns to location 0. The round counter starts at 0 in the
initial state and is incremented by every transition entering location 0; the initial visit
itself does not count as a return. `◇^{<k} label` holds on executions that visit a
label state while the counter is still below `k`.
"""

import logging
import os
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable
from typing import Iterable
from typing import Sequence
from typing import TypeAlias

import graphviz
from pydantic import Field

from pcfp._lib.errors import CapacityError
from pcfp._lib.errors import DistributionError
from pcfp._lib.errors import OutOfRangeError
from pcfp._lib.linalg import solve
from pcfp._lib.rationals import format_rational
from pcfp._lib.records import Rational
from pcfp._lib.records import Record
from pcfp.frontend import format_expr
from pcfp.liveness import ControlFlow
from pcfp.program import Command
from pcfp.program import Expr
from pcfp.program import Program
from pcfp.program import eval_bool
from pcfp.program import eval_int
from pcfp.program import eval_prob

logger = logging.getLogger(__name__)

MAX_STATES_ENV = "PCFP_MAX_STATES"
DEFAULT_MAX_STATES = 10_000_000

RoundBound: TypeAlias = int
"""The bound `k` of `◇^{<k}`; non-negative."""


def default_max_states() -> int:
    """The state cap: `PCFP_MAX_STATES` from the environment, or 10,000,000."""
    return int(os.environ.get(MAX_STATES_ENV, DEFAULT_MAX_STATES))


@dataclass(frozen=True, kw_only=True)
class State:
    """
    A DTMC state: a control-flow location together with a variable evaluation.

    Attributes:
        location: The value of the control-flow variable.
        names: The declared variables, in declaration order.
        values: The value of each declared variable, aligned with `names`.
    """

    location: int
    names: tuple[str, ...]
    values: tuple[int, ...]

    @property
    def eval(self) -> dict[str, int]:
        return dict(zip(self.names, self.values, strict=True))

    def __str__(self) -> str:
        assignments = ", ".join(f"{n}={v}" for n, v in zip(self.names, self.values, strict=True))
        return f"(location {self.location}" + (f": {assignments})" if assignments else ")")


Transition: TypeAlias = tuple[int, Fraction]


@dataclass(frozen=True, kw_only=True)
class Dtmc:
    """
    The reachable fragment of a program's DTMC.

    Attributes:
        cf_var: The name of the control-flow variable of the program.
        states: The reachable states, indexed in breadth-first discovery order.
        initial: The index of the initial state (always 0).
        transitions: Per state, its successors with their probabilities, in discovery order.
        deadlocks: The indices of states without enabled commands.
    """

    cf_var: str
    states: tuple[State, ...]
    initial: int
    transitions: tuple[tuple[Transition, ...], ...]
    deadlocks: frozenset[int]

    def __len__(self) -> int:
        return len(self.states)


def _successors(
    program: Program,
    state: State,
    enabled: Sequence[Command],
) -> dict[tuple[int, tuple[int, ...]], Fraction]:
    env = state.eval
    choice = Fraction(1, len(enabled))
    decls = program.decls
    position = {d.name: i for i, d in enumerate(decls)}
    result: dict[tuple[int, tuple[int, ...]], Fraction] = {}

    for command in enabled:
        total = Fraction(0)
        for update in command.updates:
            prob = eval_prob(update.prob, env)
            total += prob
            if prob == 0:
                continue
            values = list(state.values)
            for a in update.assigns:
                value = eval_int(a.expr, env)
                decl = decls[position[a.target]]
                if not decl.contains(value):
                    raise OutOfRangeError(
                        f"command {command.id} assigns {a.target}={value} outside "
                        f"[{decl.lo}..{decl.hi}] in state {state}"
                    )
                values[position[a.target]] = value
            key = (update.target, tuple(values))
            result[key] = result.get(key, Fraction(0)) + choice * prob

        if total != 1:
            raise DistributionError(
                f"probabilities of command {command.id} sum to {format_rational(total)} "
                f"in state {state}"
            )

    return result


def build_dtmc(program: Program, max_states: int | None = None) -> Dtmc:
    """
    Explore the reachable states of a program breadth-first from its initial state.

    Args:
        program: A well-formed program.
        max_states: The maximal number of states to explore. Defaults to `default_max_states()`.

    Raises:
        OutOfRangeError: If an assignment leaves its target's domain.
        DistributionError: If the probabilities of an enabled command do not sum to one.
        CapacityError: If more than `max_states` states are reachable.
    """
    limit = default_max_states() if max_states is None else max_states
    flow = ControlFlow(program)
    names = program.variables

    initial = State(location=0, names=names, values=tuple(d.init for d in program.decls))
    index: dict[tuple[int, tuple[int, ...]], int] = {(0, initial.values): 0}
    states = [initial]
    transitions: list[tuple[Transition, ...]] = []
    deadlocks: set[int] = set()

    queue = deque([0])
    while queue:
        current = queue.popleft()
        state = states[current]
        env = state.eval
        enabled = [c for c in flow.at(state.location) if eval_bool(c.guard, env)]
        if not enabled:
            deadlocks.add(current)
            transitions.append(())
            continue

        row: list[Transition] = []
        for key, prob in _successors(program, state, enabled).items():
            target = index.get(key)
            if target is None:
                if len(states) >= limit:
                    raise CapacityError(f"More than {limit} reachable states")
                target = len(states)
                index[key] = target
                states.append(State(location=key[0], names=names, values=key[1]))
                queue.append(target)
            row.append((target, prob))
        transitions.append(tuple(row))

    logger.debug("Explored %d states, %d deadlocks", len(states), len(deadlocks))
    return Dtmc(
        cf_var=program.cf_var,
        states=tuple(states),
        initial=0,
        transitions=tuple(transitions),
        deadlocks=frozenset(deadlocks),
    )


class DtmcStats(Record):
    states: int
    transitions: int
    deadlocks: int
    program_size: int | None = None


def stats(dtmc: Dtmc) -> DtmcStats:
    """Number of states, transitions and deadlock states of a DTMC."""
    return DtmcStats(
        states=len(dtmc.states),
        transitions=sum(len(row) for row in dtmc.transitions),
        deadlocks=len(dtmc.deadlocks),
    )


class ReductionStats(Record):
    reduction_pass: str = Field(serialization_alias="pass")
    original_states: int
    reduced_states: int
    factor: float


class ReducedDtmcStats(DtmcStats):
    """The statistics of a reduced DTMC, with the state reduction relative to its original."""

    reduction: ReductionStats


def reduction_stats(reduction_pass: str, original: Dtmc, reduced: Dtmc) -> ReducedDtmcStats:
    """The statistics of `reduced`, with the reduction factor `|original| / |reduced|`."""
    return ReducedDtmcStats(
        **stats(reduced).model_dump(),
        reduction=ReductionStats(
            reduction_pass=reduction_pass,
            original_states=len(original),
            reduced_states=len(reduced),
            factor=len(original) / len(reduced),
        ),
    )


def satisfying(dtmc: Dtmc, label: Expr) -> frozenset[int]:
    """The indices of the states fulfilling a label expression."""
    return frozenset(
        i
        for i, s in enumerate(dtmc.states)
        if eval_bool(label, s.eval, cf_value=s.location, cf_var=dtmc.cf_var)
    )


def reach_probabilities(dtmc: Dtmc, label: Expr, ks: Iterable[RoundBound]) -> dict[int, Fraction]:
    """
    `Pr[◇^{<k} label]` from the initial state of a DTMC, for every requested `k`.

    With `y_j(s)` the probability of reaching a label state from `s` with `j` rounds left,
    `y_0 = 0` and, for `j >= 1`, `y_j(s) = 1` on label states and otherwise

        y_j(s) = Σ_{t not at location 0} P(s,t)·y_j(t) + Σ_{t at location 0} P(s,t)·y_{j-1}(t).

    Each layer is a linear system solved exactly, after fixing to zero every state that cannot
    reach a label state or a positive exit within the layer.

    Raises:
        ValueError: If some `k` is negative.
    """
    bounds = sorted(set(ks))
    if bounds and bounds[0] < 0:
        raise ValueError(f"Round bounds must be non-negative: {bounds[0]}")

    target = satisfying(dtmc, label)
    at_start = [s.location == 0 for s in dtmc.states]
    inner_pred: dict[int, list[int]] = {i: [] for i in range(len(dtmc))}
    for s, row in enumerate(dtmc.transitions):
        for t, _ in row:
            if not at_start[t]:
                inner_pred[t].append(s)

    values: list[dict[int, Fraction]] = [{}]
    for _ in range(max(bounds, default=0)):
        previous = values[-1]
        layer = _solve_layer(dtmc, target, at_start, inner_pred, previous)
        values.append(layer)
        if layer == previous:
            break

    result = {}
    for k in bounds:
        layer = values[min(k, len(values) - 1)]
        result[k] = layer.get(dtmc.initial, Fraction(0))
    return result


def _solve_layer(
    dtmc: Dtmc,
    target: frozenset[int],
    at_start: list[bool],
    inner_pred: dict[int, list[int]],
    previous: dict[int, Fraction],
) -> dict[int, Fraction]:
    exits: dict[int, Fraction] = {}
    for s, row in enumerate(dtmc.transitions):
        if s in target:
            continue
        value = sum((p * previous.get(t, 0) for t, p in row if at_start[t]), Fraction(0))
        if value:
            exits[s] = value

    # states with a positive probability of reaching `target` or a positive exit in this layer
    positive = set(target) | set(exits)
    frontier = deque(positive)
    while frontier:
        t = frontier.popleft()
        for s in inner_pred[t]:
            if s not in positive and s not in target:
                positive.add(s)
                frontier.append(s)

    unknown = positive - target
    rows: dict[int, dict[int, Fraction]] = {}
    rhs: dict[int, Fraction] = {}
    for s in unknown:
        coeffs: dict[int, Fraction] = {s: Fraction(1)}
        constant = exits.get(s, Fraction(0))
        for t, p in dtmc.transitions[s]:
            if at_start[t]:
                continue
            if t in target:
                constant += p
            elif t in unknown:
                coeffs[t] = coeffs.get(t, Fraction(0)) - p
        rows[s] = coeffs
        rhs[s] = constant

    layer = {s: v for s, v in solve(rows, rhs).items() if v != 0}
    layer.update((t, Fraction(1)) for t in target)
    return layer


def bounded_reach(
    program: Program,
    label: Expr,
    bound: RoundBound,
    max_states: int | None = None,
) -> Fraction:
    """
    The exact probability that the program visits a state fulfilling `label` before completing
    `bound` rounds.

    Raises:
        OutOfRangeError, DistributionError, CapacityError: As for `build_dtmc`.
    """
    return reach_probabilities(build_dtmc(program, max_states), label, [bound])[bound]


class RoundResult(Record):
    k: int
    original: Rational
    reduced: Rational

    @property
    def equal(self) -> bool:
        return self.original == self.reduced


class PreservationReport(Record):
    label: str
    results: list[RoundResult]

    @property
    def passed(self) -> bool:
        return all(r.equal for r in self.results)


def check_preservation(
    original: Program,
    reduced: Program,
    label: Expr,
    ks: Iterable[RoundBound],
    reduced_label: Expr | None = None,
    max_states: int | None = None,
) -> PreservationReport:
    """
    Compare `Pr[◇^{<k} label]` between a program and its reduction, exactly, for every `k`.

    Args:
        original: The input program.
        reduced: The reduced program.
        label: The label expression, over variables present in both programs and `cf`.
        ks: The round bounds.
        reduced_label: The label to evaluate on the reduced program, if it differs (e.g. rewritten
            over merged variable names).
        max_states: The state cap of both explorations.
    """
    bounds = sorted(set(ks))
    before = reach_probabilities(build_dtmc(original, max_states), label, bounds)
    after = reach_probabilities(
        build_dtmc(reduced, max_states), label if reduced_label is None else reduced_label, bounds
    )
    report = PreservationReport(
        label=format_expr(label),
        results=[RoundResult(k=k, original=before[k], reduced=after[k]) for k in bounds],
    )
    for r in report.results:
        if not r.equal:
            logger.warning(
                "k=%d: %s != %s", r.k, format_rational(r.original), format_rational(r.reduced)
            )
    return report


Labeling: TypeAlias = Callable[[State], frozenset[str]]


def make_labeling(labels: dict[str, Expr], cf_var: str) -> Labeling:
    """
    Label each state with the names of the label expressions it fulfils, plus `"<cf>=0"` when it
    is at location 0 (round boundaries must be matched for round-bounded properties).
    """
    start = f"{cf_var}=0"

    def labeling(state: State) -> frozenset[str]:
        env = state.eval
        names = {
            name
            for name, expr in labels.items()
            if eval_bool(expr, env, cf_value=state.location, cf_var=cf_var)
        }
        if state.location == 0:
            names.add(start)
        return frozenset(names)

    return labeling


def check_bisimilar(
    d1: Dtmc,
    d2: Dtmc,
    labeling: Labeling,
    other_labeling: Labeling | None = None,
) -> bool:
    """
    Decide whether the initial states of two DTMCs are probabilistically bisimilar.

    Partition refinement on the disjoint union of both chains: states start out grouped by their
    label sets and blocks are split by the total probability of moving into each block, until no
    block splits any more.

    Args:
        d1: The first chain.
        d2: The second chain.
        labeling: The labeling of the states of `d1`, and of `d2` unless `other_labeling`
            is given.
        other_labeling: The labeling of the states of `d2`.
    """
    offset = len(d1)
    labels = [labeling(s) for s in d1.states]
    labels += [(other_labeling or labeling)(s) for s in d2.states]
    successors = list(d1.transitions) + [
        tuple((t + offset, p) for t, p in row) for row in d2.transitions
    ]

    block = _renumber(labels)
    while True:
        signatures = []
        for i, row in enumerate(successors):
            mass: dict[int, Fraction] = {}
            for t, p in row:
                mass[block[t]] = mass.get(block[t], Fraction(0)) + p
            signatures.append((block[i], frozenset(mass.items())))
        refined = _renumber(signatures)
        if max(refined, default=-1) == max(block, default=-1):
            break
        block = refined

    return block[d1.initial] == block[offset + d2.initial]


def _renumber(keys: Sequence[object]) -> list[int]:
    ids: dict[object, int] = {}
    return [ids.setdefault(key, len(ids)) for key in keys]


def to_dot(dtmc: Dtmc) -> str:
    """DOT source of a DTMC; the initial state is filled blue, deadlocks are drawn as boxes."""
    dot = graphviz.Digraph(name="dtmc")
    for i, state in enumerate(dtmc.states):
        text = ", ".join([f"{dtmc.cf_var}={state.location}"] + [
            f"{n}={v}" for n, v in zip(state.names, state.values, strict=True)
        ])
        attrs = {"label": text}
        if i == dtmc.initial:
            attrs.update(style="filled", fillcolor="lightblue")
        if i in dtmc.deadlocks:
            attrs["shape"] = "box"
        dot.node(str(i), **attrs)
    for i, row in enumerate(dtmc.transitions):
        for t, p in row:
            dot.edge(str(i), str(t), label=format_rational(p))
    return str(dot.source)
