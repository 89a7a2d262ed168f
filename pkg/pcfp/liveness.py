"""
Syntactic read/write sets, control-flow successors and the live range analysis of commands.
"""

import logging
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable
from typing import Iterator
from typing import Mapping

from pcfp.program import Command
from pcfp.program import Program
from pcfp.program import variables_of

logger = logging.getLogger(__name__)


def reads(command: Command) -> frozenset[str]:
    """Variables read by a command: in its guard, any probability, or any assigned expression."""
    read = set(variables_of(command.guard))
    for update in command.updates:
        read |= variables_of(update.prob)
        for assignment in update.assigns:
            read |= variables_of(assignment.expr)
    return frozenset(read)


def writes(command: Command) -> frozenset[str]:
    """Variables written in *every* stochastic update of a command."""
    written = [frozenset(update.assigned) for update in command.updates]
    return frozenset.intersection(*written) if written else frozenset()


def cf_of(command: Command) -> int:
    """The control-flow location in which a command is enabled."""
    return command.location


class ControlFlow:
    """
    The command-level control-flow graph of a program.

    `succ(c)` holds the commands enabled at some control-flow target of `c`; `pred(c)` holds the
    commands having some control-flow target equal to the location of `c`. Both are returned in
    command order.
    """

    def __init__(self, program: Program) -> None:
        self.program = program
        self._at: dict[int, list[Command]] = {}
        for c in program.commands:
            self._at.setdefault(c.location, []).append(c)

    def at(self, location: int) -> tuple[Command, ...]:
        """The commands enabled at a location."""
        return tuple(self._at.get(location, ()))

    @cached_property
    def _succ(self) -> dict[int, tuple[Command, ...]]:
        result: dict[int, tuple[Command, ...]] = {}
        for c in self.program.commands:
            targets = {u.target for u in c.updates}
            result[c.id] = tuple(s for s in self.program.commands if s.location in targets)
        return result

    @cached_property
    def _pred(self) -> dict[int, tuple[Command, ...]]:
        result: dict[int, list[Command]] = {c.id: [] for c in self.program.commands}
        for c in self.program.commands:
            for s in self._succ[c.id]:
                result[s.id].append(c)
        return {cid: tuple(ps) for cid, ps in result.items()}

    def succ(self, command: Command) -> tuple[Command, ...]:
        return self._succ[command.id]

    def pred(self, command: Command) -> tuple[Command, ...]:
        return self._pred[command.id]


def succ(program: Program, command: Command) -> tuple[Command, ...]:
    return ControlFlow(program).succ(command)


def pred(program: Program, command: Command) -> tuple[Command, ...]:
    return ControlFlow(program).pred(command)


@dataclass(frozen=True)
class LivenessMap(Mapping[int, frozenset[str]]):
    """
    The live variables of every command, keyed by command id.

    Sets of commands are mapped to the union of their members' live sets.
    """

    live: Mapping[int, frozenset[str]]

    def __getitem__(self, command_id: int) -> frozenset[str]:
        return self.live[command_id]

    def __iter__(self) -> Iterator[int]:
        return iter(self.live)

    def __len__(self) -> int:
        return len(self.live)

    def union(self, commands: Iterable[Command]) -> frozenset[str]:
        """The variables live at some command in `commands`."""
        return frozenset[str]().union(*(self.live[c.id] for c in commands))

    def to_json(self, program: Program) -> dict[str, list[str]]:
        """`{commandId: [vars...]}` with variables in declaration order."""
        return {
            str(c.id): [v for v in program.variables if v in self.live[c.id]]
            for c in program.commands
        }


def lra(program: Program) -> LivenessMap:
    """
    Live range analysis.

    Computes the least fixpoint of

        live(c) = r(c) ∪ ⋃_{c' ∈ succ(c)} (live(c') \\ w(c))

    with a worklist: `live` starts at the read sets, and each command taken from the worklist pushes
    its live variables backwards to its predecessors; a predecessor whose set grows is put back on
    the worklist. The worklist is processed first-in first-out, seeded in command order.
    """
    flow = ControlFlow(program)
    live = {c.id: reads(c) for c in program.commands}
    written = {c.id: writes(c) for c in program.commands}

    worklist = deque(program.commands)
    pending = {c.id for c in program.commands}
    steps = 0

    while worklist:
        current = worklist.popleft()
        pending.discard(current.id)
        steps += 1
        for c in flow.pred(current):
            grown = live[c.id] | (live[current.id] - written[c.id])
            if grown != live[c.id]:
                live[c.id] = grown
                if c.id not in pending:
                    worklist.append(c)
                    pending.add(c.id)

    logger.debug("Live range analysis stabilised after %d worklist steps", steps)
    return LivenessMap(live)
