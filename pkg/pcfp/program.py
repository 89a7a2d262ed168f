"""
In-memory representation of probabilistic control-flow programs.

A program is a single guarded-command module over bounded integer variables plus a dedicated
control-flow variable. Every command is enabled at exactly one control-flow location and every
stochastic update jumps to a literal location. All values defined here are immutable.
"""

import operator
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace
from enum import Enum
from enum import unique
from fractions import Fraction
from typing import Callable
from typing import Iterator
from typing import Mapping
from typing import TypeAlias
from typing import Union

from pcfp._lib.errors import EvaluationError
from pcfp._lib.errors import ProbabilityError
from pcfp._lib.errors import RenameError
from pcfp._lib.rationals import format_decimal

DEFAULT_CF_VAR = "cf"

VarEval: TypeAlias = Mapping[str, int]
"""A variable evaluation: variable name -> value."""


@unique
class ArithOp(Enum):
    """Integer arithmetic operators."""

    ADD = "+"
    SUB = "-"
    MUL = "*"

    @property
    def apply(self) -> Callable[[int, int], int]:
        return _ARITH[self]


@unique
class CompareOp(Enum):
    """Integer comparison operators."""

    EQ = "="
    NE = "!="
    LT = "<"
    LE = "<="
    GT = ">"
    GE = ">="

    @property
    def apply(self) -> Callable[[int, int], bool]:
        return _COMPARE[self]


_ARITH: dict[ArithOp, Callable[[int, int], int]] = {
    ArithOp.ADD: operator.add,
    ArithOp.SUB: operator.sub,
    ArithOp.MUL: operator.mul,
}

_COMPARE: dict[CompareOp, Callable[[int, int], bool]] = {
    CompareOp.EQ: operator.eq,
    CompareOp.NE: operator.ne,
    CompareOp.LT: operator.lt,
    CompareOp.LE: operator.le,
    CompareOp.GT: operator.gt,
    CompareOp.GE: operator.ge,
}


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class DecimalLit:
    """A decimal probability literal, held as an exact rational."""

    value: Fraction


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: ArithOp
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Compare:
    op: CompareOp
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class And:
    operands: tuple["Expr", ...]


@dataclass(frozen=True)
class Or:
    operands: tuple["Expr", ...]


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class Ratio:
    """A probability of the form `numerator / denominator` over integer expressions."""

    numerator: "Expr"
    denominator: "Expr"


Expr: TypeAlias = Union[IntLit, BoolLit, DecimalLit, Var, Neg, BinOp, Compare, And, Or, Not, Ratio]

TRUE = BoolLit(True)


@dataclass(frozen=True, kw_only=True)
class VarDecl:
    """
    Declaration of a bounded integer variable.

    Attributes:
        name: The variable name.
        lo: The lower bound of the domain (inclusive).
        hi: The upper bound of the domain (inclusive).
        init: The initial value.
    """

    name: str
    lo: int
    hi: int
    init: int

    def contains(self, value: int) -> bool:
        return self.lo <= value <= self.hi


@dataclass(frozen=True, kw_only=True)
class Assignment:
    target: str
    expr: Expr


@dataclass(frozen=True, kw_only=True)
class StochUpdate:
    """
    One branch `p : (cf'=target) & (x'=e) & ...` of a command.

    Attributes:
        prob: A `DecimalLit` or a `Ratio`.
        target: The control-flow location jumped to.
        assigns: The simultaneous assignments, in textual order.
    """

    prob: Expr
    target: int
    assigns: tuple[Assignment, ...] = ()

    @property
    def assigned(self) -> tuple[str, ...]:
        return tuple(a.target for a in self.assigns)


@dataclass(frozen=True, kw_only=True)
class Command:
    """
    A guarded command `cf=location & guard -> updates`.

    Attributes:
        id: The 0-based textual position of the command in its program.
        location: The control-flow location in which the command may be enabled.
        guard: The remaining guard, without the control-flow conjunct.
        updates: The stochastic updates.
    """

    id: int
    location: int
    guard: Expr
    updates: tuple[StochUpdate, ...]


@dataclass(frozen=True, kw_only=True)
class Label:
    name: str
    expr: Expr


@dataclass(frozen=True, kw_only=True)
class Program:
    """
    A probabilistic control-flow program.

    Attributes:
        name: The module name.
        cf_var: The name of the control-flow variable.
        cf_max: The upper bound of the control-flow domain `[0..cf_max]`.
        decls: The declared (non control-flow) variables, in declaration order.
        commands: The commands, in textual order.
        labels: The label definitions, over declared variables and the control-flow variable.
    """

    name: str = "main"
    cf_var: str = DEFAULT_CF_VAR
    cf_max: int
    decls: tuple[VarDecl, ...]
    commands: tuple[Command, ...]
    labels: tuple[Label, ...] = field(default=())

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.decls)

    def decl(self, name: str) -> VarDecl:
        for d in self.decls:
            if d.name == name:
                return d
        raise KeyError(f"Variable is not declared: {name}")

    def label(self, name: str) -> Expr:
        for lab in self.labels:
            if lab.name == name:
                return lab.expr
        raise KeyError(f"Label is not defined: {name}")

    @property
    def initial_eval(self) -> dict[str, int]:
        return {d.name: d.init for d in self.decls}


@dataclass(frozen=True, kw_only=True)
class Diagnostic:
    """A violated well-formedness condition, optionally attributed to a command."""

    message: str
    command_id: int | None = None

    def __str__(self) -> str:
        if self.command_id is None:
            return self.message
        return f"command {self.command_id}: {self.message}"


def is_bool(expr: Expr) -> bool:
    """True if the expression is boolean-typed (by its root constructor)."""
    return isinstance(expr, (BoolLit, Compare, And, Or, Not))


def is_prob(expr: Expr) -> bool:
    """True if the expression may stand in a probability position."""
    return isinstance(expr, (DecimalLit, Ratio))


def children(expr: Expr) -> tuple[Expr, ...]:
    match expr:
        case Neg(operand) | Not(operand):
            return (operand,)
        case BinOp(_, left, right) | Compare(_, left, right):
            return (left, right)
        case And(operands) | Or(operands):
            return operands
        case Ratio(numerator, denominator):
            return (numerator, denominator)
        case _:
            return ()


def walk(expr: Expr) -> Iterator[Expr]:
    """Pre-order traversal of an expression tree."""
    yield expr
    for child in children(expr):
        yield from walk(child)


def variables_of(expr: Expr) -> frozenset[str]:
    """The names of all variables referenced in an expression."""
    return frozenset(node.name for node in walk(expr) if isinstance(node, Var))


def _lookup(name: str, evaluation: VarEval, cf_value: int | None, cf_var: str) -> int:
    if name in evaluation:
        return evaluation[name]
    if name == cf_var and cf_value is not None:
        return cf_value
    raise EvaluationError(f"Unbound variable: {name}")


def eval_int(
    expr: Expr,
    evaluation: VarEval,
    cf_value: int | None = None,
    cf_var: str = DEFAULT_CF_VAR,
) -> int:
    """
    Evaluate an integer-typed expression.

    Args:
        expr: The expression.
        evaluation: Values of the declared variables.
        cf_value: The value of the control-flow variable, if it may be referenced.
        cf_var: The name of the control-flow variable.

    Raises:
        EvaluationError: If a referenced variable is unbound or the expression is not integer-typed.
    """
    match expr:
        case IntLit(value):
            return value
        case Var(name):
            return _lookup(name, evaluation, cf_value, cf_var)
        case Neg(operand):
            return -eval_int(operand, evaluation, cf_value, cf_var)
        case BinOp(op, left, right):
            return op.apply(
                eval_int(left, evaluation, cf_value, cf_var),
                eval_int(right, evaluation, cf_value, cf_var),
            )
        case _:
            raise EvaluationError(f"Not an integer expression: {expr}")


def eval_bool(
    expr: Expr,
    evaluation: VarEval,
    cf_value: int | None = None,
    cf_var: str = DEFAULT_CF_VAR,
) -> bool:
    """
    Evaluate a boolean-typed expression: true iff `evaluation` fulfils `expr`.

    Raises:
        EvaluationError: If a referenced variable is unbound or the expression is not boolean-typed.
    """
    match expr:
        case BoolLit(value):
            return value
        case Compare(op, left, right):
            return op.apply(
                eval_int(left, evaluation, cf_value, cf_var),
                eval_int(right, evaluation, cf_value, cf_var),
            )
        case And(operands):
            return all(eval_bool(e, evaluation, cf_value, cf_var) for e in operands)
        case Or(operands):
            return any(eval_bool(e, evaluation, cf_value, cf_var) for e in operands)
        case Not(operand):
            return not eval_bool(operand, evaluation, cf_value, cf_var)
        case _:
            raise EvaluationError(f"Not a boolean expression: {expr}")


def eval_prob(expr: Expr, evaluation: VarEval) -> Fraction:
    """
    Evaluate a probability expression to an exact rational.

    Raises:
        EvaluationError: If the expression is not a decimal literal or ratio, a referenced variable
            is unbound, or the denominator of a ratio evaluates to zero.
        ProbabilityError: If the value lies outside of [0, 1].
    """
    match expr:
        case DecimalLit(value):
            result = value
        case IntLit(value):
            result = Fraction(value)
        case Ratio(numerator, denominator):
            den = eval_int(denominator, evaluation)
            if den == 0:
                raise EvaluationError(f"Zero denominator in probability {expr}")
            result = Fraction(eval_int(numerator, evaluation), den)
        case _:
            raise EvaluationError(f"Not a probability expression: {expr}")

    if not 0 <= result <= 1:
        raise ProbabilityError(f"Probability {result} outside of [0, 1] in {expr}")

    return result


def substitute(expr: Expr, mapping: Mapping[str, str]) -> Expr:
    """Rename variable references in an expression; names outside `mapping` are kept."""
    match expr:
        case Var(name):
            return Var(mapping.get(name, name))
        case Neg(operand):
            return Neg(substitute(operand, mapping))
        case Not(operand):
            return Not(substitute(operand, mapping))
        case BinOp(op, left, right):
            return BinOp(op, substitute(left, mapping), substitute(right, mapping))
        case Compare(op, left, right):
            return Compare(op, substitute(left, mapping), substitute(right, mapping))
        case And(operands):
            return And(tuple(substitute(e, mapping) for e in operands))
        case Or(operands):
            return Or(tuple(substitute(e, mapping) for e in operands))
        case Ratio(numerator, denominator):
            return Ratio(substitute(numerator, mapping), substitute(denominator, mapping))
        case _:
            return expr


def conjuncts(expr: Expr) -> tuple[Expr, ...]:
    """The top-level conjuncts of an expression (flattening nested conjunctions)."""
    if isinstance(expr, And):
        return tuple(c for operand in expr.operands for c in conjuncts(operand))
    return (expr,)


def conjoin(operands: tuple[Expr, ...]) -> Expr:
    """Build a conjunction, collapsing the empty and singleton cases."""
    if not operands:
        return TRUE
    if len(operands) == 1:
        return operands[0]
    return And(operands)


def initial_guard(program: Program) -> Expr:
    """The initial guard, as the conjunction of `name = init` over all declarations."""
    return conjoin(
        tuple(Compare(CompareOp.EQ, Var(d.name), IntLit(d.init)) for d in program.decls)
    )


def _rename_update(update: StochUpdate, mapping: Mapping[str, str]) -> StochUpdate:
    return replace(
        update,
        prob=substitute(update.prob, mapping),
        assigns=tuple(
            Assignment(target=mapping.get(a.target, a.target), expr=substitute(a.expr, mapping))
            for a in update.assigns
        ),
    )


def rename_vars(
    program: Program,
    mapping: Mapping[str, str],
    decls: tuple[VarDecl, ...] | None = None,
) -> Program:
    """
    Rename variables throughout the commands of a program.

    Guards, probability expressions, assignment targets and right-hand sides are rewritten. Labels
    are left untouched.

    Args:
        program: The program to rewrite.
        mapping: Old name -> new name, defined on a subset of the declared variables.
        decls: The declarations of the result. If omitted, every declaration is renamed in place,
            which is only meaningful for an injective mapping; callers that merge variables pass
            the merged declarations.

    Raises:
        RenameError: If the mapping renames an undeclared variable or targets the control-flow
            variable.
    """
    declared = set(program.variables)
    for old, new in mapping.items():
        if old not in declared:
            raise RenameError(f"Cannot rename undeclared variable: {old}")
        if new == program.cf_var:
            raise RenameError(
                f"Cannot rename {old} to the control-flow variable {program.cf_var}"
            )

    if decls is None:
        decls = tuple(replace(d, name=mapping.get(d.name, d.name)) for d in program.decls)

    commands = tuple(
        replace(
            c,
            guard=substitute(c.guard, mapping),
            updates=tuple(_rename_update(u, mapping) for u in c.updates),
        )
        for c in program.commands
    )

    return replace(program, decls=decls, commands=commands)


def _expr_diagnostics(
    expr: Expr,
    known: set[str],
    what: str,
    command_id: int | None,
) -> list[Diagnostic]:
    return [
        Diagnostic(message=f"{what} references unknown variable {name}", command_id=command_id)
        for name in sorted(variables_of(expr) - known)
    ]


def _decl_diagnostics(program: Program) -> list[Diagnostic]:
    diagnostics: list[Diagnostic] = []
    seen: set[str] = set()

    if program.cf_max < 0:
        diagnostics.append(Diagnostic(message=f"empty control-flow domain [0..{program.cf_max}]"))

    for d in program.decls:
        if d.name == program.cf_var:
            diagnostics.append(
                Diagnostic(message=f"control-flow variable {d.name} declared as a variable")
            )
        if d.name in seen:
            diagnostics.append(Diagnostic(message=f"variable {d.name} declared twice"))
        seen.add(d.name)
        if not d.lo <= d.init <= d.hi:
            diagnostics.append(
                Diagnostic(message=f"initial value {d.init} of {d.name} outside [{d.lo}..{d.hi}]")
            )

    return diagnostics


def _update_diagnostics(
    program: Program,
    command: Command,
    update: StochUpdate,
) -> list[Diagnostic]:
    cid = command.id
    declared = set(program.variables)
    diagnostics: list[Diagnostic] = []

    if not 0 <= update.target <= program.cf_max:
        diagnostics.append(
            Diagnostic(
                message=f"cf target {update.target} outside [0..{program.cf_max}]", command_id=cid
            )
        )
    if not is_prob(update.prob):
        diagnostics.append(
            Diagnostic(message="probability must be a decimal literal or a ratio", command_id=cid)
        )
    if isinstance(update.prob, DecimalLit) and format_decimal(update.prob.value) is None:
        value = update.prob.value
        diagnostics.append(
            Diagnostic(
                message=f"decimal probability {value} has no finite decimal form",
                command_id=cid,
            )
        )
    diagnostics.extend(_expr_diagnostics(update.prob, declared, "probability", cid))

    targets: set[str] = set()
    for a in update.assigns:
        if a.target not in declared:
            diagnostics.append(
                Diagnostic(message=f"assignment to undeclared variable {a.target}", command_id=cid)
            )
        if a.target in targets:
            diagnostics.append(
                Diagnostic(message=f"variable {a.target} assigned twice", command_id=cid)
            )
        targets.add(a.target)
        if is_bool(a.expr) or is_prob(a.expr):
            diagnostics.append(
                Diagnostic(message=f"assignment to {a.target} is not integer-typed", command_id=cid)
            )
        diagnostics.extend(_expr_diagnostics(a.expr, declared, "assignment", cid))

    return diagnostics


def well_formed(program: Program) -> list[Diagnostic]:
    """
    Check the side conditions of a program.

    Returns:
        An empty list if the program is well-formed, otherwise one diagnostic per violation.
    """
    diagnostics = _decl_diagnostics(program)
    declared = set(program.variables)

    ids = [c.id for c in program.commands]
    if len(set(ids)) != len(ids):
        diagnostics.append(Diagnostic(message="command ids are not unique"))
    if not any(c.location == 0 for c in program.commands):
        diagnostics.append(Diagnostic(message="no command at location 0"))

    for c in program.commands:
        if not 0 <= c.location <= program.cf_max:
            diagnostics.append(
                Diagnostic(
                    message=f"location {c.location} outside [0..{program.cf_max}]",
                    command_id=c.id,
                )
            )
        if not is_bool(c.guard):
            diagnostics.append(Diagnostic(message="guard is not boolean", command_id=c.id))
        diagnostics.extend(_expr_diagnostics(c.guard, declared, "guard", c.id))
        if not c.updates:
            diagnostics.append(Diagnostic(message="command has no updates", command_id=c.id))
        for u in c.updates:
            diagnostics.extend(_update_diagnostics(program, c, u))

    for lab in program.labels:
        if not is_bool(lab.expr):
            diagnostics.append(Diagnostic(message=f"label {lab.name} is not boolean"))
        diagnostics.extend(
            _expr_diagnostics(lab.expr, declared | {program.cf_var}, f"label {lab.name}", None)
        )

    return diagnostics
