"""
Reading and writing the textual model format.

The format is the single-module DTMC fragment of the PRISM language:

```
dtmc

module main
    cf : [0..3] init 0;
    x : [0..1] init 1;

    [] cf=0 & x=1 -> 1:(cf'=1)&(x'=0);
    [] cf=1 -> 0.5:(cf'=2) + 1/2:(cf'=3)&(x'=x+1);
endmodule

label "fail" = cf=0 & x=0;
```

Every guard must carry a top-level conjunct `cf=<int>` and every update must assign `cf'=<int>`;
both are stripped into `Command.location` and `StochUpdate.target`. Probabilities are decimal
literals or ratios `<intExpr>/<intExpr>` and are read as exact rationals.
"""

from dataclasses import dataclass
from typing import Any
from typing import Iterable

from lark import Lark
from lark import Token
from lark import Transformer
from lark import Tree
from lark import v_args
from lark.exceptions import UnexpectedCharacters
from lark.exceptions import UnexpectedEOF
from lark.exceptions import UnexpectedInput
from lark.exceptions import UnexpectedToken
from lark.exceptions import VisitError
from lark.tree import Meta

from pcfp._lib.errors import ParseError
from pcfp._lib.errors import SourceSpan
from pcfp._lib.rationals import format_decimal
from pcfp._lib.rationals import parse_decimal
from pcfp.program import DEFAULT_CF_VAR
from pcfp.program import TRUE
from pcfp.program import And
from pcfp.program import ArithOp
from pcfp.program import Assignment
from pcfp.program import BinOp
from pcfp.program import BoolLit
from pcfp.program import Command
from pcfp.program import Compare
from pcfp.program import CompareOp
from pcfp.program import DecimalLit
from pcfp.program import Expr
from pcfp.program import IntLit
from pcfp.program import Label
from pcfp.program import Neg
from pcfp.program import Not
from pcfp.program import Or
from pcfp.program import Program
from pcfp.program import Ratio
from pcfp.program import StochUpdate
from pcfp.program import Var
from pcfp.program import VarDecl
from pcfp.program import conjoin
from pcfp.program import is_bool
from pcfp.program import variables_of
from pcfp.program import well_formed

KEYWORDS = frozenset({"dtmc", "module", "endmodule", "init", "label", "true", "false"})

GRAMMAR = r"""
    program: "dtmc" "module" NAME declarations command* ENDMODULE label*
    declarations: decl*
    decl: NAME ":" "[" integer ".." integer "]" ("init" integer)? ";"
    integer: NUMBER | NEG_INT

    command: "[" "]" guard "->" update ("+" update)* ";"
    guard: expr
    update: (probability ":")? assignment ("&" assignment)*
    ?probability: NUMBER -> decimal_prob
        | term "/" unary -> ratio_prob
    assignment: "(" NAME "'" "=" rhs ")"
    rhs: expr

    label: "label" STRING "=" guard ";"
    label_expr: guard

    ?expr: disj
    ?disj: conj ("|" conj)*
    ?conj: neg ("&" neg)*
    ?neg: "!" neg -> not_
        | rel
    ?rel: sum (compare_op sum)?
    !compare_op: "=" | "!=" | "<" | "<=" | ">" | ">="
    ?sum: term
        | sum add_op term -> arith
    ?term: unary
        | term mul_op unary -> arith
    !add_op: "+" | "-"
    !mul_op: "*"
    ?unary: atom
        | "-" unary -> negate
    ?atom: NUMBER -> int_lit
        | NEG_INT -> int_lit
        | NAME -> var
        | "true" -> bool_true
        | "false" -> bool_false
        | "(" expr ")"

    ENDMODULE: "endmodule"
    NAME: /[A-Za-z_][A-Za-z0-9_]*/
    NUMBER: /\d+(\.\d+)?/
    NEG_INT: /-\d+/
    STRING: /"[^"\n]*"/
    COMMENT: /\/\/[^\n]*/

    %ignore /[ \t\r\n]+/
    %ignore COMMENT
"""

_PARSER = Lark(GRAMMAR, start=["program", "label_expr"], parser="lalr", propagate_positions=True)

_COMPARE_OPS = {op.value: op for op in CompareOp}


def _meta_span(meta: Meta) -> SourceSpan:
    return SourceSpan(line=meta.line, column=meta.column, offset=meta.start_pos)


def _token_span(token: Token) -> SourceSpan:
    return SourceSpan(line=token.line, column=token.column, offset=token.start_pos)


@dataclass(frozen=True, kw_only=True)
class _Assign:
    target: Token
    expr: Expr
    span: SourceSpan


@v_args(meta=True)
class _ModelBuilder(Transformer[Token, Any]):
    """Builds the program IR from a parse tree, checking types, names and control-flow form."""

    def __init__(self, cf_var: str, declared: Iterable[str] = ()) -> None:
        super().__init__()
        self._cf_var = cf_var
        self._declared: set[str] = set(declared)
        self.command_spans: dict[int, SourceSpan] = {}

    # -- program structure ---------------------------------------------------------------------

    def program(self, meta: Meta, children: list[Any]) -> Program:
        name, (cf_max, decls), *rest = children
        end = next(c for c in rest if isinstance(c, Token))
        commands = [c for c in rest if isinstance(c, Command)]
        if not any(c.location == 0 for c in commands):
            raise ParseError("no command at location 0", _token_span(end))

        return Program(
            name=str(name),
            cf_var=self._cf_var,
            cf_max=cf_max,
            decls=tuple(decls),
            commands=tuple(commands),
            labels=tuple(c for c in rest if isinstance(c, Label)),
        )

    def declarations(self, meta: Meta, children: list[VarDecl]) -> tuple[int, list[VarDecl]]:
        cf_decl = next((d for d in children if d.name == self._cf_var), None)
        if cf_decl is None:
            span = None if meta.empty else _meta_span(meta)
            raise ParseError(f"control-flow variable {self._cf_var} is not declared", span)
        return cf_decl.hi, [d for d in children if d.name != self._cf_var]

    def decl(self, meta: Meta, children: list[Any]) -> VarDecl:
        name, lo, hi, *init = children
        span = _token_span(name)
        if name in KEYWORDS:
            raise ParseError(f"{name} is a reserved word", span)
        if name in self._declared:
            raise ParseError(f"variable {name} declared twice", span)
        self._declared.add(str(name))

        decl = VarDecl(name=str(name), lo=lo, hi=hi, init=init[0] if init else lo)
        if not lo <= decl.init <= hi:
            raise ParseError(f"initial value {decl.init} of {name} outside [{lo}..{hi}]", span)
        if decl.name == self._cf_var and (lo != 0 or decl.init != 0):
            raise ParseError(
                f"control-flow variable {self._cf_var} must range over [0..L] and start at 0", span
            )
        return decl

    def integer(self, meta: Meta, children: list[Token]) -> int:
        (token,) = children
        if "." in token:
            raise ParseError(f"expected an integer, found {str(token)!r}", _token_span(token))
        return int(token)

    def command(self, meta: Meta, children: list[Any]) -> Command:
        (guard, guard_span), *updates = children
        command_id = len(self.command_spans)
        self.command_spans[command_id] = _meta_span(meta)
        location, guard = self._split_location(guard, guard_span)
        return Command(id=command_id, location=location, guard=guard, updates=tuple(updates))

    def _split_location(self, guard: Expr, span: SourceSpan) -> tuple[int, Expr]:
        # NB: only the operands of the outermost conjunction are inspected, so that a
        # parenthesised inner conjunction survives a print/parse round trip unchanged.
        location: int | None = None
        rest: list[Expr] = []
        for conjunct in guard.operands if isinstance(guard, And) else (guard,):
            value = self._cf_literal(conjunct)
            if value is None:
                rest.append(conjunct)
            elif location is not None:
                raise ParseError(f"more than one {self._cf_var} conjunct in guard", span)
            else:
                location = value

        if location is None:
            raise ParseError(
                f"non-control-flow command: guard lacks a top-level conjunct {self._cf_var}=<int>",
                span,
            )
        remainder = conjoin(tuple(rest))
        if self._cf_var in variables_of(remainder):
            raise ParseError(
                f"{self._cf_var} may only appear in the location conjunct of a guard", span
            )
        return location, remainder

    def _cf_literal(self, expr: Expr) -> int | None:
        match expr:
            case Compare(CompareOp.EQ, Var(name), IntLit(value)) if name == self._cf_var:
                return value
            case Compare(CompareOp.EQ, IntLit(value), Var(name)) if name == self._cf_var:
                return value
            case _:
                return None

    def guard(self, meta: Meta, children: list[Expr]) -> tuple[Expr, SourceSpan]:
        (expr,) = children
        if not is_bool(expr):
            raise ParseError("expected a boolean expression", _meta_span(meta))
        return expr, _meta_span(meta)

    def update(self, meta: Meta, children: list[Any]) -> StochUpdate:
        prob: Expr = DecimalLit(parse_decimal("1"))
        if not isinstance(children[0], _Assign):
            prob, *children = children

        target: int | None = None
        assigns: list[Assignment] = []
        for assign in children:
            if assign.target != self._cf_var:
                assigns.append(Assignment(target=str(assign.target), expr=assign.expr))
            elif target is not None:
                raise ParseError(f"{self._cf_var} assigned twice", _token_span(assign.target))
            elif not isinstance(assign.expr, IntLit):
                raise ParseError(
                    f"control-flow target must be an integer literal ({self._cf_var}'=<int>)",
                    assign.span,
                )
            else:
                target = assign.expr.value

        if target is None:
            raise ParseError(
                f"update lacks a control-flow target ({self._cf_var}'=<int>)", _meta_span(meta)
            )
        return StochUpdate(prob=prob, target=target, assigns=tuple(assigns))

    def assignment(self, meta: Meta, children: list[Any]) -> _Assign:
        name, (expr, span) = children
        if name != self._cf_var:
            self._check_declared(name)
        return _Assign(target=name, expr=expr, span=span)

    def rhs(self, meta: Meta, children: list[Expr]) -> tuple[Expr, SourceSpan]:
        (expr,) = children
        span = _meta_span(meta)
        if is_bool(expr):
            raise ParseError("expected an integer expression", span)
        self._forbid_cf(expr, span)
        return expr, span

    def decimal_prob(self, meta: Meta, children: list[Token]) -> DecimalLit:
        (token,) = children
        return DecimalLit(parse_decimal(str(token)))

    def ratio_prob(self, meta: Meta, children: list[Expr]) -> Ratio:
        numerator, denominator = children
        self._require_int(children, "/", meta)
        self._forbid_cf(numerator, _meta_span(meta))
        self._forbid_cf(denominator, _meta_span(meta))
        return Ratio(numerator, denominator)

    def label(self, meta: Meta, children: list[Any]) -> Label:
        name, (expr, _) = children
        return Label(name=name.strip('"'), expr=expr)

    def label_expr(self, meta: Meta, children: list[Any]) -> Expr:
        ((expr, _),) = children
        return expr  # type: ignore[no-any-return]

    # -- expressions ---------------------------------------------------------------------------

    def _check_declared(self, token: Token) -> None:
        if token not in self._declared:
            raise ParseError(f"unknown variable {token}", _token_span(token))

    def _forbid_cf(self, expr: Expr, span: SourceSpan) -> None:
        if self._cf_var in variables_of(expr):
            raise ParseError(f"{self._cf_var} may only appear in guards and labels", span)

    def disj(self, meta: Meta, children: list[Expr]) -> Expr:
        self._require_bool(children, "|", meta)
        return Or(tuple(children))

    def conj(self, meta: Meta, children: list[Expr]) -> Expr:
        self._require_bool(children, "&", meta)
        return And(tuple(children))

    def not_(self, meta: Meta, children: list[Expr]) -> Expr:
        self._require_bool(children, "!", meta)
        return Not(children[0])

    def rel(self, meta: Meta, children: list[Any]) -> Expr:
        left, op, right = children
        self._require_int([left, right], op, meta)
        return Compare(_COMPARE_OPS[op], left, right)

    def arith(self, meta: Meta, children: list[Any]) -> Expr:
        left, op, right = children
        self._require_int([left, right], op, meta)
        return BinOp(ArithOp(str(op)), left, right)

    def compare_op(self, meta: Meta, children: list[Token]) -> str:
        return str(children[0])

    add_op = compare_op
    mul_op = compare_op

    def negate(self, meta: Meta, children: list[Expr]) -> Expr:
        self._require_int(children, "-", meta)
        return Neg(children[0])

    def int_lit(self, meta: Meta, children: list[Token]) -> Expr:
        (token,) = children
        if "." in token:
            raise ParseError(f"decimal literal {token} in integer expression", _token_span(token))
        return IntLit(int(token))

    def var(self, meta: Meta, children: list[Token]) -> Expr:
        (token,) = children
        self._check_declared(token)
        return Var(str(token))

    def bool_true(self, meta: Meta, children: list[Token]) -> Expr:
        return BoolLit(True)

    def bool_false(self, meta: Meta, children: list[Token]) -> Expr:
        return BoolLit(False)

    @staticmethod
    def _require_bool(operands: list[Expr], op: str, meta: Meta) -> None:
        if not all(is_bool(e) for e in operands):
            raise ParseError(f"operator {op!r} expects boolean operands", _meta_span(meta))

    @staticmethod
    def _require_int(operands: list[Expr], op: str, meta: Meta) -> None:
        if any(is_bool(e) for e in operands):
            raise ParseError(f"operator {op!r} expects integer operands", _meta_span(meta))


def _input_span(error: UnexpectedInput) -> SourceSpan | None:
    if not isinstance(error.line, int) or error.line < 1:
        return None
    return SourceSpan(line=error.line, column=error.column, offset=error.pos_in_stream or 0)


def _build(text: str, start: str, builder: _ModelBuilder) -> Any:
    """Parse `text` from the rule `start` and run `builder` over the tree."""
    try:
        tree: Tree[Token] = _PARSER.parse(text, start=start)
    except UnexpectedCharacters as error:
        raise ParseError(f"unexpected character {error.char!r}", _input_span(error)) from None
    except UnexpectedToken as error:
        found = "end of input" if error.token.type == "$END" else repr(str(error.token))
        raise ParseError(f"unexpected {found}", _input_span(error)) from None
    except UnexpectedEOF:
        raise ParseError("unexpected end of input") from None

    try:
        return builder.transform(tree)
    except VisitError as error:
        if isinstance(error.orig_exc, ParseError):
            raise error.orig_exc from None
        raise


def parse(text: str, cf_var: str = DEFAULT_CF_VAR) -> Program:
    """
    Parse a model text into a `Program`.

    Args:
        text: The model source. LF and CRLF line endings are accepted.
        cf_var: The name of the control-flow variable.

    Returns:
        The parsed program. Locations and control-flow targets are taken verbatim from the text.

    Raises:
        ParseError: On a syntax error, a guard without control-flow conjunct, a non-literal
            control-flow target, an unknown variable, or a violated well-formedness condition. The
            error carries the position of the offending construct.
    """
    builder = _ModelBuilder(cf_var)
    program: Program = _build(text, "program", builder)

    diagnostics = well_formed(program)
    if diagnostics:
        first = diagnostics[0]
        span = builder.command_spans.get(first.command_id) if first.command_id is not None else None
        raise ParseError(str(first), span)

    return program


def parse_expr(text: str, program: Program) -> Expr:
    """
    Parse a standalone boolean expression over the variables of a program and its control-flow
    variable, as written on the right-hand side of a label definition.

    Raises:
        ParseError: On a syntax error, a non-boolean expression, or an unknown variable.
    """
    builder = _ModelBuilder(program.cf_var, (*program.variables, program.cf_var))
    expr: Expr = _build(text, "label_expr", builder)
    return expr


# -- printing ----------------------------------------------------------------------------------

_PREC_OR = 1
_PREC_AND = 2
_PREC_NOT = 3
_PREC_REL = 4
_PREC_ADD = 5
_PREC_MUL = 6
_PREC_UNARY = 7
_PREC_ATOM = 8


def _precedence(expr: Expr) -> int:
    match expr:
        case Or():
            return _PREC_OR
        case And():
            return _PREC_AND
        case Not():
            return _PREC_NOT
        case Compare():
            return _PREC_REL
        case BinOp(op=ArithOp.MUL):
            return _PREC_MUL
        case BinOp():
            return _PREC_ADD
        case Neg():
            return _PREC_UNARY
        case IntLit(value) if value < 0:
            return _PREC_UNARY
        case _:
            return _PREC_ATOM


def _wrap(expr: Expr, min_prec: int) -> str:
    text = format_expr(expr)
    return f"({text})" if _precedence(expr) < min_prec else text


def format_expr(expr: Expr) -> str:
    """Render an expression in model syntax, parenthesising only where re-parsing requires it."""
    match expr:
        case IntLit(value):
            return str(value)
        case BoolLit(value):
            return "true" if value else "false"
        case DecimalLit(value):
            decimal = format_decimal(value)
            return decimal if decimal is not None else f"{value.numerator}/{value.denominator}"
        case Var(name):
            return name
        case Neg(IntLit() as operand):
            # `-3` would read back as the literal -3
            return f"-({format_expr(operand)})"
        case Neg(operand):
            return f"-{_wrap(operand, _PREC_ATOM)}"
        case BinOp(op, left, right):
            prec = _precedence(expr)
            return f"{_wrap(left, prec)}{op.value}{_wrap(right, prec + 1)}"
        case Compare(op, left, right):
            return f"{_wrap(left, _PREC_ADD)}{op.value}{_wrap(right, _PREC_ADD)}"
        case And(operands):
            return " & ".join(_wrap(e, _PREC_NOT) for e in operands)
        case Or(operands):
            return " | ".join(_wrap(e, _PREC_AND) for e in operands)
        case Not(operand):
            return f"!{_wrap(operand, _PREC_ATOM)}"
        case Ratio(numerator, denominator):
            return f"{_wrap(numerator, _PREC_MUL)}/{_wrap(denominator, _PREC_ATOM)}"


def _format_update(update: StochUpdate, cf_var: str) -> str:
    parts = [f"({cf_var}'={update.target})"]
    parts.extend(f"({a.target}'={format_expr(a.expr)})" for a in update.assigns)
    return f"{format_expr(update.prob)}:{'&'.join(parts)}"


def format_command(command: Command, cf_var: str = DEFAULT_CF_VAR) -> str:
    guard = f"{cf_var}={command.location}"
    if isinstance(command.guard, And):
        guard += "".join(f" & {_wrap(e, _PREC_NOT)}" for e in command.guard.operands)
    elif command.guard != TRUE:
        guard += f" & {_wrap(command.guard, _PREC_NOT)}"
    updates = " + ".join(_format_update(u, cf_var) for u in command.updates)
    return f"[] {guard} -> {updates};"


def print_program(program: Program) -> str:
    """
    Render a program in model syntax.

    The output is deterministic, uses LF line endings and re-parses to a structurally equal
    program.
    """
    lines = ["dtmc", "", f"module {program.name}"]
    lines.append(f"\t{program.cf_var} : [0..{program.cf_max}] init 0;")
    lines.extend(f"\t{d.name} : [{d.lo}..{d.hi}] init {d.init};" for d in program.decls)
    lines.append("")
    lines.extend(f"\t{format_command(c, program.cf_var)}" for c in program.commands)
    lines.append("endmodule")

    if program.labels:
        lines.append("")
        lines.extend(f'label "{lab.name}" = {format_expr(lab.expr)};' for lab in program.labels)

    return "\n".join(lines) + "\n"


def program_size(program: Program) -> int:
    """The size of a program: the length of its printed text."""
    return len(print_program(program))
