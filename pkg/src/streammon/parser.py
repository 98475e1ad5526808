"""Recursive-descent parser for the monitoring specification language.

The surface syntax is line-comment (`#`) based and otherwise newline
insensitive; declarations start with `input`, `output`, or `trigger`, so
expressions simply end where the next declaration or clause keyword begins.

All window spellings are normalized while parsing: a window carries a
duration and an aggregation, and an inline default value in any position
becomes an explicit `?default` wrapper. Durations are kept as exact rational
seconds.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .ast import (
    AGG_BY_NAME,
    BUILTIN_FNS,
    Binary,
    Const,
    Default,
    DiscreteOffset,
    Expr,
    FnCall,
    IfThenElse,
    InputDecl,
    Param,
    ParamRef,
    RealTimeOffset,
    Specification,
    StreamAccess,
    StreamTemplate,
    TriggerDecl,
    TriggerKind,
    TupleExpr,
    Unary,
    ValueType,
    WindowAccess,
)
from .diagnostics import Diagnostic, ParseError, SourceSpan, format_diagnostics

__all__ = ["parse", "format_spec", "format_diagnostics", "parse_frequency"]

KEYWORDS = frozenset(
    [
        "input",
        "output",
        "trigger",
        "invoke",
        "extend",
        "terminate",
        "if",
        "then",
        "else",
        "true",
        "false",
        "any",
        "count",
        "time",
        "bool",
        "int",
        "double",
    ]
)

DECL_KEYWORDS = frozenset(["input", "output", "trigger", "time"])
CLAUSE_KEYWORDS = frozenset(["invoke", "extend", "terminate"])

TIME_UNITS = {
    "ms": Fraction(1, 1000),
    "s": Fraction(1),
    "sec": Fraction(1),
    "min": Fraction(60),
    "h": Fraction(3600),
}

TYPE_NAMES = {"bool": ValueType.BOOL, "int": ValueType.INT, "double": ValueType.DOUBLE}

COMPARISONS = ("=", "!=", "<", "<=", ">", ">=")

_DIGITS = frozenset("0123456789")


@dataclass
class Token:
    kind: str  # IDENT KEYWORD INT FLOAT NUMUNIT STRING OP EOF
    value: object
    line: int
    col: int
    length: int

    @property
    def span(self) -> SourceSpan:
        return SourceSpan(self.line, self.col, self.length)


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.lines = text.split("\n")
        self.pos = 0
        self.line = 1
        self.col = 1
        self.tokens: list[Token] = []
        self.diagnostics: list[Diagnostic] = []

    def line_text(self, line: int) -> Optional[str]:
        if 1 <= line <= len(self.lines):
            return self.lines[line - 1]
        return None

    def error(self, message: str, line: int, col: int, length: int = 1) -> None:
        self.diagnostics.append(
            Diagnostic(message, SourceSpan(line, col, length), self.line_text(line))
        )

    def _advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.pos < len(self.text) and self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def run(self) -> list[Token]:
        text = self.text
        ops2 = (":=", "<=", ">=", "!=", "==")
        single = "()[]<>,?:=!&|+-*/%"
        while self.pos < len(text):
            ch = text[self.pos]
            if ch in " \t\r\n":
                self._advance()
                continue
            if ch == "#":
                while self.pos < len(text) and text[self.pos] != "\n":
                    self._advance()
                continue
            line, col = self.line, self.col
            if ch in _DIGITS or (ch == "." and self._peek_digit(1)):
                self._lex_number(line, col)
                continue
            if ch.isalpha() or ch == "_":
                start = self.pos
                while self.pos < len(text) and (
                    text[self.pos].isalnum() or text[self.pos] == "_"
                ):
                    self._advance()
                word = text[start : self.pos]
                kind = "KEYWORD" if word in KEYWORDS else "IDENT"
                self.tokens.append(Token(kind, word, line, col, len(word)))
                continue
            if ch == '"':
                self._lex_string(line, col)
                continue
            two = text[self.pos : self.pos + 2]
            if two in ops2:
                self._advance(2)
                value = "=" if two == "==" else two
                self.tokens.append(Token("OP", value, line, col, 2))
                continue
            if ch in single:
                self._advance()
                self.tokens.append(Token("OP", ch, line, col, 1))
                continue
            self.error(f"unexpected character {ch!r}", line, col)
            self._advance()
        self.tokens.append(Token("EOF", None, self.line, self.col, 1))
        return self.tokens

    def _peek_digit(self, ahead: int) -> bool:
        i = self.pos + ahead
        return i < len(self.text) and self.text[i] in _DIGITS

    def _lex_number(self, line: int, col: int) -> None:
        text = self.text
        start = self.pos
        while self.pos < len(text) and text[self.pos] in _DIGITS:
            self._advance()
        is_float = False
        if (
            self.pos < len(text)
            and text[self.pos] == "."
            and self._peek_digit(1)
        ):
            is_float = True
            self._advance()
            while self.pos < len(text) and text[self.pos] in _DIGITS:
                self._advance()
        # exponent only when followed by digits (so `2sec` stays a unit suffix)
        if self.pos < len(text) and text[self.pos] in "eE":
            j = self.pos + 1
            if j < len(text) and text[j] in "+-":
                j += 1
            if j < len(text) and text[j] in _DIGITS:
                is_float = True
                self._advance(j - self.pos)
                while self.pos < len(text) and text[self.pos] in _DIGITS:
                    self._advance()
        digits = text[start : self.pos]
        if self.pos < len(text) and (text[self.pos].isalpha() or text[self.pos] == "_"):
            ustart = self.pos
            while self.pos < len(text) and (
                text[self.pos].isalnum() or text[self.pos] == "_"
            ):
                self._advance()
            unit = text[ustart : self.pos]
            self.tokens.append(
                Token("NUMUNIT", (Fraction(digits), unit), line, col, self.pos - start)
            )
            return
        if is_float:
            self.tokens.append(Token("FLOAT", float(digits), line, col, len(digits)))
        else:
            self.tokens.append(Token("INT", int(digits), line, col, len(digits)))

    def _lex_string(self, line: int, col: int) -> None:
        text = self.text
        self._advance()  # opening quote
        out = []
        while self.pos < len(text):
            ch = text[self.pos]
            if ch == "\n":
                break
            if ch == '"':
                self._advance()
                self.tokens.append(
                    Token("STRING", "".join(out), line, col, self.col - col)
                )
                return
            if ch == "\\" and self.pos + 1 < len(text):
                nxt = text[self.pos + 1]
                out.append({"n": "\n", "t": "\t"}.get(nxt, nxt))
                self._advance(2)
                continue
            out.append(ch)
            self._advance()
        self.error("unterminated string literal", line, col)


class _Unexpected(Exception):
    def __init__(self, diagnostic: Diagnostic):
        self.diagnostic = diagnostic
        super().__init__(diagnostic.message)


class _Parser:
    def __init__(self, text: str):
        lexer = _Lexer(text)
        self.tokens = lexer.run()
        self.lines = lexer.lines
        self.diagnostics = lexer.diagnostics
        self.i = 0

    # -- token helpers ----------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def at(self, kind: str, value: object = None) -> bool:
        t = self.tok
        return t.kind == kind and (value is None or t.value == value)

    def at_op(self, *ops: str) -> bool:
        t = self.tok
        return t.kind == "OP" and t.value in ops

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "EOF":
            self.i += 1
        return t

    def _describe(self, t: Token) -> str:
        if t.kind == "EOF":
            return "end of input"
        if t.kind == "NUMUNIT":
            num, unit = t.value
            return f"'{_frac_str(num)}{unit}'"
        return f"'{t.value}'"

    def fail(self, expected: str, tok: Optional[Token] = None) -> _Unexpected:
        t = tok or self.tok
        diag = Diagnostic(
            f"expected {expected}, found {self._describe(t)}",
            t.span,
            self.lines[t.line - 1] if 1 <= t.line <= len(self.lines) else None,
        )
        return _Unexpected(diag)

    def expect_op(self, op: str) -> Token:
        if not self.at_op(op):
            raise self.fail(f"'{op}'")
        return self.advance()

    def expect_ident(self, what: str = "identifier") -> Token:
        if not self.at("IDENT"):
            raise self.fail(what)
        return self.advance()

    # -- declarations ------------------------------------------------------

    def parse_spec(self) -> Specification:
        spec = Specification()
        while not self.at("EOF"):
            try:
                self.parse_decl(spec)
            except _Unexpected as exc:
                self.diagnostics.append(exc.diagnostic)
                self._sync()
        self._check_names(spec)
        return spec

    def _sync(self) -> None:
        while not self.at("EOF"):
            if self.tok.kind == "KEYWORD" and self.tok.value in DECL_KEYWORDS:
                return
            self.advance()

    def parse_decl(self, spec: Specification) -> None:
        if self.at("KEYWORD", "time"):
            self.advance()
            if not self.at("KEYWORD", "input"):
                raise self.fail("'input' after 'time'")
            self._parse_input(spec, is_time=True)
        elif self.at("KEYWORD", "input"):
            self._parse_input(spec, is_time=False)
        elif self.at("KEYWORD", "output"):
            self._parse_output(spec)
        elif self.at("KEYWORD", "trigger"):
            self._parse_trigger(spec)
        else:
            raise self.fail("'input', 'output', or 'trigger'")

    def _parse_type(self) -> ValueType:
        if self.tok.kind == "KEYWORD" and self.tok.value in TYPE_NAMES:
            return TYPE_NAMES[self.advance().value]
        raise self.fail("type ('bool', 'int', or 'double')")

    def _parse_input(self, spec: Specification, is_time: bool) -> None:
        kw = self.advance()  # 'input'
        ty = self._parse_type()
        name = self.expect_ident("input stream name")
        spec.inputs.append(InputDecl(name.value, ty, is_time, span=kw.span))

    def _parse_output(self, spec: Specification) -> None:
        kw = self.advance()  # 'output'
        ty = self._parse_type()
        name = self.expect_ident("output stream name")
        params: list[Param] = []
        if self.at_op("<"):
            self.advance()
            while True:
                pty = self._parse_type()
                pname = self.expect_ident("parameter name")
                params.append(Param(pname.value, pty))
                if self.at_op(","):
                    self.advance()
                    continue
                break
            self.expect_op(">")
        clock: Optional[Fraction] = None
        if self.at_op(":"):
            self.advance()
            clock = self._parse_frequency()
        invoke = extend = terminate = None
        seen_clause = False
        while self.tok.kind == "KEYWORD" and self.tok.value in CLAUSE_KEYWORDS:
            clause = self.advance()
            self.expect_op(":")
            expr = self._parse_clause_expr(clause.value)
            if clause.value == "invoke":
                if invoke is not None:
                    raise self.fail("only one 'invoke' clause", clause)
                invoke = expr
            elif clause.value == "extend":
                if extend is not None:
                    raise self.fail("only one 'extend' clause", clause)
                extend = expr
            else:
                if terminate is not None:
                    raise self.fail("only one 'terminate' clause", clause)
                terminate = expr
            seen_clause = True
        if self.at_op(":="):
            self.advance()
        elif self.at_op("=") and not seen_clause:
            # bare `=` is accepted as the definition separator in the
            # clause-free form only; after clauses it would be ambiguous
            # with an equality comparison inside the clause expression
            self.advance()
        else:
            raise self.fail("':='")
        expr = self.parse_expr()
        spec.outputs.append(
            StreamTemplate(
                name.value,
                ty,
                params,
                clock,
                invoke,
                extend,
                terminate,
                expr,
                span=kw.span,
            )
        )

    def _parse_frequency(self) -> Fraction:
        if not self.at("NUMUNIT"):
            raise self.fail("frequency such as '1Hz'")
        tok = self.advance()
        value, unit = tok.value
        if unit not in ("Hz", "hz"):
            raise self.fail("frequency unit 'Hz'", tok)
        if value <= 0:
            raise self.fail("positive frequency", tok)
        return value

    def _parse_clause_expr(self, clause: str) -> Expr:
        if clause == "invoke" and self.at_op("("):
            # a parenthesized, comma-separated invoke expression is a tuple
            open_tok = self.advance()
            items = [self.parse_expr()]
            while self.at_op(","):
                self.advance()
                items.append(self.parse_expr())
            self.expect_op(")")
            if len(items) == 1:
                return items[0]
            return TupleExpr(items, span=open_tok.span)
        return self.parse_expr()

    def _parse_trigger(self, spec: Specification) -> None:
        kw = self.advance()
        if self.at("KEYWORD", "any"):
            self.advance()
            self.expect_op("(")
            cond = self.parse_expr()
            self.expect_op(")")
            decl = TriggerDecl(TriggerKind.ANY, condition=cond, span=kw.span)
        elif self.at("KEYWORD", "count"):
            self.advance()
            self.expect_op("(")
            stream = self.expect_ident("stream name")
            self.expect_op(")")
            if not self.at_op(*COMPARISONS):
                raise self.fail("comparison operator")
            cmp_tok = self.advance()
            neg = False
            if self.at_op("-"):
                self.advance()
                neg = True
            if not self.at("INT"):
                raise self.fail("integer constant")
            value = self.advance().value
            decl = TriggerDecl(
                TriggerKind.COUNT,
                count_stream=stream.value,
                count_cmp=cmp_tok.value,
                count_value=-value if neg else value,
                span=kw.span,
            )
        else:
            cond = self.parse_expr()
            decl = TriggerDecl(TriggerKind.PLAIN, condition=cond, span=kw.span)
        if self.at("STRING"):
            decl.message = self.advance().value
        spec.triggers.append(decl)

    def _check_names(self, spec: Specification) -> None:
        seen: dict[str, SourceSpan] = {}

        def check(name: str, span: SourceSpan) -> None:
            if name in AGG_BY_NAME or name in BUILTIN_FNS:
                self.diagnostics.append(
                    Diagnostic(
                        f"'{name}' is a reserved function name",
                        span,
                        self.lines[span.line - 1] if span.line else None,
                    )
                )
            elif name in seen:
                self.diagnostics.append(
                    Diagnostic(
                        f"duplicate declaration of '{name}' "
                        f"(first declared at {seen[name]})",
                        span,
                        self.lines[span.line - 1] if span.line else None,
                    )
                )
            else:
                seen[name] = span

        for decl in spec.inputs:
            check(decl.name, decl.span)
        for tpl in spec.outputs:
            check(tpl.name, tpl.span)

    # -- expressions -------------------------------------------------------

    def parse_expr(self) -> Expr:
        return self._parse_or()

    def _parse_or(self) -> Expr:
        left = self._parse_and()
        while self.at_op("|"):
            op = self.advance()
            right = self._parse_and()
            left = Binary("|", left, right, span=op.span)
        return left

    def _parse_and(self) -> Expr:
        left = self._parse_cmp()
        while self.at_op("&"):
            op = self.advance()
            right = self._parse_cmp()
            left = Binary("&", left, right, span=op.span)
        return left

    def _parse_cmp(self) -> Expr:
        left = self._parse_add()
        if self.at_op(*COMPARISONS):
            op = self.advance()
            right = self._parse_add()
            return Binary(op.value, left, right, span=op.span)
        return left

    def _parse_add(self) -> Expr:
        left = self._parse_mul()
        while self.at_op("+", "-"):
            op = self.advance()
            right = self._parse_mul()
            left = Binary(op.value, left, right, span=op.span)
        return left

    def _parse_mul(self) -> Expr:
        left = self._parse_unary()
        while self.at_op("*", "/", "%"):
            op = self.advance()
            right = self._parse_unary()
            left = Binary(op.value, left, right, span=op.span)
        return left

    def _parse_unary(self) -> Expr:
        if self.at_op("-", "!"):
            op = self.advance()
            operand = self._parse_unary()
            if op.value == "-" and isinstance(operand, Const) and not isinstance(
                operand.value, bool
            ):
                return Const(-operand.value, span=op.span)
            return Unary(op.value, operand, span=op.span)
        return self._parse_postfix()

    def _parse_postfix(self) -> Expr:
        expr = self._parse_primary()
        while True:
            if self.at_op("["):
                if not isinstance(expr, StreamAccess) or not isinstance(
                    expr.offset, DiscreteOffset
                ) or expr.offset.steps != 0:
                    raise self.fail("no second window or offset on this access")
                expr = self._parse_bracket(expr)
            elif self.at_op("?"):
                q = self.advance()
                fallback = self._parse_unary()
                expr = Default(expr, fallback, span=q.span)
            else:
                return expr

    def _parse_primary(self) -> Expr:
        t = self.tok
        if t.kind == "INT" or t.kind == "FLOAT":
            self.advance()
            return Const(t.value, span=t.span)
        if t.kind == "KEYWORD" and t.value in ("true", "false"):
            self.advance()
            return Const(t.value == "true", span=t.span)
        if t.kind == "KEYWORD" and t.value == "if":
            self.advance()
            cond = self.parse_expr()
            if not self.at("KEYWORD", "then"):
                raise self.fail("'then'")
            self.advance()
            then_branch = self.parse_expr()
            if not self.at("KEYWORD", "else"):
                raise self.fail("'else'")
            self.advance()
            else_branch = self.parse_expr()
            return IfThenElse(cond, then_branch, else_branch, span=t.span)
        if t.kind == "IDENT":
            self.advance()
            args: list[Expr] = []
            if self.at_op("("):
                self.advance()
                if not self.at_op(")"):
                    args.append(self.parse_expr())
                    while self.at_op(","):
                        self.advance()
                        args.append(self.parse_expr())
                self.expect_op(")")
                if t.value in BUILTIN_FNS:
                    return FnCall(t.value, args, span=t.span)
            return StreamAccess(t.value, args, DiscreteOffset(0), span=t.span)
        if self.at_op("("):
            self.advance()
            inner = self.parse_expr()
            self.expect_op(")")
            return inner
        raise self.fail("an expression")

    def _parse_bracket(self, access: StreamAccess) -> Expr:
        """`s[...]` suffix: a past offset or a sliding window, with all
        accepted orderings of duration / aggregation / inline default."""
        open_tok = self.advance()  # '['
        # first item decides between offset and window
        if self.at_op("-"):
            self.advance()
            if self.at("INT"):
                steps = self.advance().value
                offset: object = DiscreteOffset(-steps)
            elif self.at("NUMUNIT"):
                tok = self.advance()
                seconds = self._to_seconds(tok)
                offset = RealTimeOffset(-seconds)
            else:
                raise self.fail("offset count or duration after '-'")
            access.offset = offset  # type: ignore[assignment]
            expr: Expr = access
            if self.at_op(","):
                self.advance()
                fallback = self.parse_expr()
                expr = Default(access, fallback, span=open_tok.span)
            self.expect_op("]")
            return expr
        if self.at("INT") and self.tok.value == 0:
            zero = self.advance()
            access.offset = DiscreteOffset(0)
            expr = access
            if self.at_op(","):
                self.advance()
                fallback = self.parse_expr()
                expr = Default(access, fallback, span=zero.span)
            self.expect_op("]")
            return expr
        if not self.at("NUMUNIT"):
            raise self.fail("window duration (like '10sec') or negative offset")
        dur_tok = self.advance()
        duration = self._to_seconds(dur_tok)
        if duration <= 0:
            raise self.fail("positive window duration", dur_tok)
        agg = None
        fallback = None
        while self.at_op(","):
            self.advance()
            item_tok = self.tok
            if agg is None and self._at_agg_name():
                agg = AGG_BY_NAME[self.advance().value]
                if self.at_op("("):
                    # `count(cid)` style: the argument list belongs to the
                    # target stream, not to the aggregation
                    self.advance()
                    inner_args: list[Expr] = []
                    if not self.at_op(")"):
                        inner_args.append(self.parse_expr())
                        while self.at_op(","):
                            self.advance()
                            inner_args.append(self.parse_expr())
                    self.expect_op(")")
                    if access.args:
                        raise self.fail(
                            "instance arguments given twice", item_tok
                        )
                    access.args = inner_args
            elif fallback is None:
                fallback = self.parse_expr()
            else:
                raise self.fail("']'", item_tok)
        self.expect_op("]")
        if agg is None:
            raise self.fail("an aggregation function in the window", dur_tok)
        window = WindowAccess(
            access.stream, access.args, duration, agg, span=access.span
        )
        if fallback is not None:
            return Default(window, fallback, span=open_tok.span)
        return window

    def _at_agg_name(self) -> bool:
        t = self.tok
        if t.kind == "IDENT" and t.value in AGG_BY_NAME:
            return True
        return t.kind == "KEYWORD" and t.value == "count"

    def _to_seconds(self, tok: Token) -> Fraction:
        value, unit = tok.value
        if unit not in TIME_UNITS:
            raise self.fail(
                f"a known duration unit (ms, s, sec, min, h), found unknown "
                f"duration unit '{unit}'",
                tok,
            )
        return value * TIME_UNITS[unit]


def parse(text: str) -> Specification:
    """Parse specification source text.

    Raises ParseError carrying every collected diagnostic; parsing recovers at
    declaration boundaries so several errors can be reported at once.
    """
    parser = _Parser(text)
    spec = parser.parse_spec()
    if parser.diagnostics:
        raise ParseError(parser.diagnostics)
    return spec


def parse_frequency(text: str) -> Fraction:
    """Parse a standalone frequency literal such as '1Hz' or '0.1Hz'."""
    parser = _Parser(text)
    freq = parser._parse_frequency()
    if not parser.at("EOF"):
        raise ParseError([Diagnostic(f"trailing input after frequency: {text!r}")])
    return freq


# -- pretty printer ---------------------------------------------------------

_PREC = {
    "|": 1,
    "&": 2,
    "=": 3,
    "!=": 3,
    "<": 3,
    "<=": 3,
    ">": 3,
    ">=": 3,
    "+": 4,
    "-": 4,
    "*": 5,
    "/": 5,
    "%": 5,
}
_UNARY_PREC = 6
_POSTFIX_PREC = 7


def _frac_str(value: Fraction) -> str:
    """Exact decimal rendering; only terminating fractions are printable."""
    num, den = value.numerator, value.denominator
    scale = 0
    while den % 2 == 0:
        den //= 2
        num *= 5
        scale += 1
    while den % 5 == 0:
        den //= 5
        num *= 2
        scale += 1
    if den != 1:
        raise ValueError(f"{value} has no exact decimal form")
    if scale == 0:
        return str(num)
    text = str(abs(num)).rjust(scale + 1, "0")
    sign = "-" if num < 0 else ""
    return f"{sign}{text[:-scale]}.{text[-scale:]}".rstrip("0").rstrip(".") or "0"


def _duration_str(seconds: Fraction) -> str:
    try:
        return _frac_str(seconds) + "s"
    except ValueError:
        return _frac_str(seconds * 1000) + "ms"


def _const_str(value: object) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value)


def _expr_str(expr: Expr, parent_prec: int = 0) -> str:
    match expr:
        case Const(value=v):
            text, prec = _const_str(v), _POSTFIX_PREC
            if isinstance(v, (int, float)) and not isinstance(v, bool) and v < 0:
                prec = _UNARY_PREC
        case ParamRef(name=name):
            text, prec = name, _POSTFIX_PREC
        case StreamAccess(stream=s, args=args, offset=off):
            text = s
            if args:
                text += "(" + ", ".join(_expr_str(a) for a in args) + ")"
            match off:
                case DiscreteOffset(steps=0):
                    pass
                case DiscreteOffset(steps=n):
                    text += f"[{n}]"
                case RealTimeOffset(seconds=d):
                    text += f"[-{_duration_str(-d)}]"
            prec = _POSTFIX_PREC
        case WindowAccess(stream=s, args=args, duration=r, agg=agg):
            text = s
            if args:
                text += "(" + ", ".join(_expr_str(a) for a in args) + ")"
            text += f"[{_duration_str(r)}, {agg}]"
            prec = _POSTFIX_PREC
        case Default(inner=inner, fallback=fb):
            inner_text = _expr_str(inner, _POSTFIX_PREC)
            if isinstance(inner, Default):
                inner_text = f"({inner_text})"  # `a?b?c` reparses as `a?(b?c)`
            text = inner_text + "?" + _expr_str(fb, _UNARY_PREC)
            prec = _POSTFIX_PREC
        case Unary(op=op, operand=operand):
            text = op + _expr_str(operand, _UNARY_PREC)
            prec = _UNARY_PREC
        case Binary(op=op, left=l, right=r):
            prec = _PREC[op]
            left_prec = prec + 1 if op in COMPARISONS else prec  # non-assoc
            text = f"{_expr_str(l, left_prec)} {op} {_expr_str(r, prec + 1)}"
        case IfThenElse(cond=c, then_branch=t, else_branch=e):
            text = f"if {_expr_str(c)} then {_expr_str(t)} else {_expr_str(e)}"
            prec = 0
        case FnCall(fn=fn, args=args):
            text = fn + "(" + ", ".join(_expr_str(a) for a in args) + ")"
            prec = _POSTFIX_PREC
        case TupleExpr(items=items):
            return "(" + ", ".join(_expr_str(i) for i in items) + ")"
        case _:
            raise TypeError(f"cannot print {expr!r}")
    if prec < parent_prec:
        return f"({text})"
    return text


def format_spec(spec: Specification) -> str:
    """Canonical textual form; parsing it back yields a structurally
    identical specification."""
    out: list[str] = []
    for decl in spec.inputs:
        prefix = "time input" if decl.is_time else "input"
        out.append(f"{prefix} {decl.ty} {decl.name}")
    for tpl in spec.outputs:
        head = f"output {tpl.ty} {tpl.name}"
        if tpl.params:
            head += "<" + ", ".join(f"{p.ty} {p.name}" for p in tpl.params) + ">"
        if tpl.clock is not None:
            head += f": {_frac_str(tpl.clock)}Hz"
        clauses = []
        for label, e in (
            ("invoke", tpl.invoke),
            ("extend", tpl.extend),
            ("terminate", tpl.terminate),
        ):
            if e is not None:
                clauses.append(f"  {label}: {_expr_str(e)}")
        body = f":= {_expr_str(tpl.expr)}"
        if clauses:
            out.append(head)
            out.extend(clauses)
            out.append(f"  {body}")
        else:
            out.append(f"{head} {body}")
    for trig in spec.triggers:
        if trig.kind is TriggerKind.ANY:
            line = f"trigger any({_expr_str(trig.condition)})"
        elif trig.kind is TriggerKind.COUNT:
            line = (
                f"trigger count({trig.count_stream}) "
                f"{trig.count_cmp} {trig.count_value}"
            )
        else:
            line = f"trigger {_expr_str(trig.condition)}"
        if trig.message is not None:
            escaped = trig.message.replace("\\", "\\\\").replace('"', '\\"')
            line += f' "{escaped}"'
        out.append(line)
    return "\n".join(out) + ("\n" if out else "")
