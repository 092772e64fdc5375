"""Lexer and recursive-descent parser for ``.ppl`` source text.

The grammar is ML-flavoured; see ``docs/language.md``.  Parsing yields the
surface tree in :mod:`tracesmc.syntax`; :func:`tracesmc.desugar.desugar`
lowers it to core terms.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .distributions import Dist
from .prims import BINARY_OPS, NAMED, PRIMS
from .syntax import (SApp, SConst, SFun, SIf, SLet, SLetRec, SList, SLogWeight, SMatch, SPrim,
                     SProj, SRecord, SResample, SSample, SSeq, SVar, SWeight)
from . import core as C


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {msg}")
        self.msg = msg
        self.line = line
        self.col = col


KEYWORDS = {"let", "rec", "in", "fun", "if", "then", "else", "match", "with", "true", "false",
            "resample", "weight", "logweight", "sample"}

DIST_NAMES = {
    "bernoulli": Dist.BERNOULLI, "uniform": Dist.UNIFORM, "normal": Dist.NORMAL,
    "gaussian": Dist.NORMAL, "exponential": Dist.EXPONENTIAL, "beta": Dist.BETA,
}
SAMPLE_NAMES = {
    "sample_Bern": Dist.BERNOULLI, "sample_Bernoulli": Dist.BERNOULLI,
    "sample_U": Dist.UNIFORM, "sample_Uniform": Dist.UNIFORM,
    "sample_N": Dist.NORMAL, "sample_Normal": Dist.NORMAL,
    "sample_Exp": Dist.EXPONENTIAL, "sample_Exponential": Dist.EXPONENTIAL,
    "sample_Beta": Dist.BETA,
}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[^\W\d]\w*'*)
  | (?P<sym>->|::|\|\||&&|<=|>=|==|!=|<>|[()\[\]{},;|:.\\λ<>=+\-*/!])
""", re.VERBOSE)


@dataclass
class Tok:
    kind: str   # num, ident, kw, sym, eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    toks = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        s = m.group()
        if kind != "ws":
            if kind == "ident" and s in KEYWORDS:
                kind = "kw"
            if s == "λ":
                s = "\\"
            toks.append(Tok(kind, s, line, pos - line_start + 1))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rindex("\n") + 1
        pos = m.end()
    toks.append(Tok("eof", "", line, pos - line_start + 1))
    return toks


@dataclass(frozen=True)
class _Tuple:
    """Parenthesised comma list; only legal as the argument list of a primitive."""
    items: tuple
    span: tuple = None


@dataclass(frozen=True)
class _DistApp:
    dist: Dist
    args: tuple
    span: tuple = None


_BIN_LEVELS = [
    ({"||"}, "right"),
    ({"&&"}, "right"),
    ({"<", "<=", ">", ">=", "==", "=", "!=", "<>"}, "left"),
    ({"::"}, "right"),
    ({"+", "-"}, "left"),
    ({"*", "/"}, "left"),
]

_ATOM_START_KW = {"true", "false", "resample"}


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # token helpers
    @property
    def tok(self) -> Tok:
        return self.toks[self.i]

    def peek(self, k=1) -> Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text, kind=None) -> bool:
        t = self.tok
        return t.text == text and t.kind != "num" and (kind is None or t.kind == kind)

    def advance(self) -> Tok:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text) -> Tok:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.advance()

    def error(self, msg, tok=None):
        tok = tok or self.tok
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        raise ParseError(f"{msg}, found {found}", tok.line, tok.col)

    def span(self, tok=None):
        tok = tok or self.tok
        return (tok.line, tok.col)

    # grammar
    def program(self):
        if self.tok.kind == "eof":
            self.error("empty program")
        e = self.seq()
        if self.tok.kind != "eof":
            self.error("unexpected token")
        return e

    def seq(self):
        start = self.tok
        e = self.expr()
        if self.at(";", "sym"):
            self.advance()
            rest = self.seq()
            return SSeq(e, rest, span=self.span(start))
        return e

    def expr(self):
        t = self.tok
        if t.kind == "kw":
            if t.text == "let":
                return self.let_expr()
            if t.text == "fun":
                self.advance()
                params = self.params()
                self.expect("->")
                return SFun(params, self.seq(), span=self.span(t))
            if t.text == "if":
                self.advance()
                c = self.seq()
                self.expect("then")
                a = self.seq()
                self.expect("else")
                b = self.expr()
                return SIf(c, a, b, span=self.span(t))
            if t.text == "match":
                return self.match_expr()
        if t.kind == "sym" and t.text == "\\":
            self.advance()
            params = self.params()
            if not (self.at(".") or self.at("->")):
                self.error("expected '.' or '->' after lambda parameters")
            self.advance()
            return SFun(params, self.seq(), span=self.span(t))
        return self.binary(0)

    def let_expr(self):
        t = self.advance()
        rec = False
        if self.at("rec", "kw"):
            self.advance()
            rec = True
        name = self.ident()
        params = self.params(allow_empty=True)
        self.expect("=")
        value = self.seq()
        self.expect("in")
        body = self.seq()
        if rec:
            if not params:
                raise ParseError("'let rec' must bind a function", t.line, t.col)
            return SLetRec(name, params, value, body, span=self.span(t))
        return SLet(name, params, value, body, span=self.span(t))

    def ident(self) -> str:
        t = self.tok
        if t.kind != "ident":
            self.error("expected an identifier")
        if t.text in NAMED or t.text in SAMPLE_NAMES:
            self.error(f"{t.text!r} is a reserved primitive name")
        self.advance()
        return t.text

    def params(self, allow_empty=False) -> tuple:
        ps = []
        while True:
            t = self.tok
            if t.kind == "ident" and t.text == "_":
                self.advance()
                ps.append(C.UNIT_VAR)
            elif t.kind == "ident":
                ps.append(self.ident())
            elif self.at("(") and self.peek().text == ")":
                self.advance()
                self.advance()
                ps.append(C.UNIT_VAR)
            else:
                break
        if not ps and not allow_empty:
            self.error("expected a parameter")
        return tuple(ps)

    def match_expr(self):
        t = self.advance()
        scrut = self.seq()
        self.expect("with")
        if self.at("|", "sym"):
            self.advance()
        cases = []
        while True:
            p = self.pattern()
            self.expect("->")
            body = self.seq()
            cases.append((p, body))
            if self.at("|", "sym"):
                self.advance()
                continue
            break
        return SMatch(scrut, tuple(cases), span=self.span(t))

    # patterns
    def pattern(self):
        p = self.pattern_atom()
        if self.at("::", "sym"):
            self.advance()
            return C.PCons(p, self.pattern())
        return p

    def pattern_atom(self):
        t = self.tok
        if t.kind == "ident":
            self.advance()
            return C.PWild() if t.text == "_" else C.PVar(self._check_binder(t))
        if t.kind == "num":
            self.advance()
            return C.PConst(float(t.text))
        if self.at("-", "sym") and self.peek().kind == "num":
            self.advance()
            return C.PConst(-float(self.advance().text))
        if self.at("true", "kw") or self.at("false", "kw"):
            self.advance()
            return C.PConst(1.0 if t.text == "true" else 0.0)
        if self.at("("):
            self.advance()
            if self.at(")"):
                self.advance()
                return C.PConst(0.0)
            p = self.pattern()
            self.expect(")")
            return p
        if self.at("["):
            self.advance()
            items = []
            if not self.at("]"):
                items.append(self.pattern())
                while self.at(","):
                    self.advance()
                    items.append(self.pattern())
            self.expect("]")
            return C.PList(tuple(items))
        if self.at("{"):
            self.advance()
            fields = []
            while True:
                ft = self.tok
                name = self.field_name()
                if self.at(":", "sym"):
                    self.advance()
                    fields.append((name, self.pattern()))
                else:
                    fields.append((name, C.PVar(self._check_binder(ft))))
                if self.at(","):
                    self.advance()
                    continue
                break
            self.expect("}")
            names = [n for n, _ in fields]
            if len(set(names)) != len(names):
                raise ParseError("duplicate field in record pattern", t.line, t.col)
            return C.PRecord(tuple(fields))
        self.error("expected a pattern")

    def _check_binder(self, t):
        if t.text in NAMED or t.text in SAMPLE_NAMES:
            raise ParseError(f"{t.text!r} is a reserved primitive name", t.line, t.col)
        return t.text

    def field_name(self) -> str:
        t = self.tok
        if t.kind not in ("ident", "kw"):
            self.error("expected a field name")
        self.advance()
        return t.text

    # operators
    def binary(self, level):
        if level == len(_BIN_LEVELS):
            return self.unary()
        ops, assoc = _BIN_LEVELS[level]
        start = self.tok
        lhs = self.binary(level + 1)
        while self.tok.kind == "sym" and self.tok.text in ops:
            op = self.advance().text
            if assoc == "right":
                rhs = self.binary(level)
                return SPrim(BINARY_OPS[op], (lhs, rhs), span=self.span(start))
            rhs = self.binary(level + 1)
            lhs = SPrim(BINARY_OPS[op], (lhs, rhs), span=self.span(start))
        return lhs

    def unary(self):
        t = self.tok
        if t.kind == "sym" and t.text == "-":
            self.advance()
            if self.tok.kind == "num":
                n = self.advance()
                lit = SConst(-float(n.text), span=self.span(t))
                return self.application(lit)
            return SPrim("neg", (self.unary(),), span=self.span(t))
        if t.kind == "sym" and t.text == "!":
            self.advance()
            return SPrim("not", (self.unary(),), span=self.span(t))
        return self.application()

    def _starts_atom(self) -> bool:
        t = self.tok
        if t.kind in ("num", "ident"):
            return True
        if t.kind == "kw":
            return t.text in _ATOM_START_KW or t.text in ("weight", "logweight", "sample")
        return t.kind == "sym" and t.text in ("(", "[", "{")

    def application(self, head=None):
        if head is None:
            head = self.head()
        while self._starts_atom():
            arg = self.postfix()
            if isinstance(arg, _Tuple):
                self.error("argument tuples are only allowed for primitives and distributions")
            head = SApp(head, arg, span=getattr(head, "span", None))
        return head

    def head(self):
        t = self.tok
        if t.kind == "kw" and t.text in ("weight", "logweight"):
            self.advance()
            arg = self.postfix()
            self._no_tuple(arg)
            node = SWeight if t.text == "weight" else SLogWeight
            return node(arg, span=self.span(t))
        if t.kind == "kw" and t.text == "sample":
            self.advance()
            return self.sample_arg(t)
        if t.kind == "ident" and t.text in SAMPLE_NAMES:
            self.advance()
            d = SAMPLE_NAMES[t.text]
            args = self.fixed_args(d.arity, t, t.text)
            return SSample(d, args, span=self.span(t))
        if t.kind == "ident" and t.text in NAMED:
            self.advance()
            op = NAMED[t.text]
            args = self.fixed_args(PRIMS[op][0], t, t.text)
            return SPrim(op, args, span=self.span(t))
        e = self.postfix()
        if isinstance(e, _Tuple):
            raise ParseError("argument tuple without a primitive", t.line, t.col)
        return e

    def sample_arg(self, t):
        # sample (dist a b)  |  sample dist a b
        if self.at("(") and self.peek().kind == "ident" and self.peek().text in DIST_NAMES:
            self.advance()
            da = self.dist_app()
            self.expect(")")
        elif self.tok.kind == "ident" and self.tok.text in DIST_NAMES:
            da = self.dist_app()
        else:
            self.error("expected a distribution after 'sample'")
        return SSample(da.dist, da.args, span=self.span(t))

    def dist_app(self):
        t = self.advance()
        d = DIST_NAMES[t.text]
        return _DistApp(d, self.fixed_args(d.arity, t, t.text))

    def fixed_args(self, arity, t, name) -> tuple:
        if self.at("(") and arity > 1:
            save = self.i
            arg = self.postfix()
            if isinstance(arg, _Tuple):
                if len(arg.items) != arity:
                    raise ParseError(f"{name} expects {arity} arguments, got {len(arg.items)}",
                                     t.line, t.col)
                return arg.items
            self.i = save
        args = []
        for _ in range(arity):
            if not self._starts_atom():
                raise ParseError(f"{name} expects {arity} argument(s)", t.line, t.col)
            a = self.postfix()
            if isinstance(a, _Tuple):
                raise ParseError(f"{name} expects {arity} arguments, got {len(a.items)}",
                                 t.line, t.col)
            args.append(a)
        return tuple(args)

    def _no_tuple(self, e):
        if isinstance(e, _Tuple):
            self.error("unexpected argument tuple")

    def postfix(self):
        e = self.atom()
        while self.at(".", "sym") and self.peek().kind in ("ident", "kw"):
            start = self.advance()
            name = self.field_name()
            e = SProj(e, name, span=self.span(start))
        return e

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.advance()
            return SConst(float(t.text), span=self.span(t))
        if t.kind == "ident":
            if t.text in NAMED or t.text in SAMPLE_NAMES:
                # a primitive used as an argument must be fully applied in parens
                self.error(f"primitive {t.text!r} must be applied to its arguments")
            if t.text == "_":
                self.error("'_' cannot be used as an expression")
            self.advance()
            return SVar(t.text, span=self.span(t))
        if t.kind == "kw":
            if t.text in ("true", "false"):
                self.advance()
                return SConst(1.0 if t.text == "true" else 0.0, span=self.span(t))
            if t.text == "resample":
                self.advance()
                return SResample(span=self.span(t))
            if t.text in ("weight", "logweight", "sample"):
                return self.head()
            self.error("unexpected keyword")
        if self.at("("):
            self.advance()
            if self.at(")"):
                self.advance()
                return SConst(0.0, span=self.span(t))
            e = self.seq()
            if self.at(","):
                items = [e]
                while self.at(","):
                    self.advance()
                    items.append(self.seq())
                self.expect(")")
                return _Tuple(tuple(items), span=self.span(t))
            self.expect(")")
            return e
        if self.at("["):
            self.advance()
            items = []
            if not self.at("]"):
                items.append(self.seq())
                while self.at(","):
                    self.advance()
                    items.append(self.seq())
            self.expect("]")
            return SList(tuple(items), span=self.span(t))
        if self.at("{"):
            self.advance()
            fields = []
            while True:
                ft = self.tok
                name = self.field_name()
                if self.at(":", "sym"):
                    self.advance()
                    fields.append((name, self.seq()))
                else:
                    fields.append((name, SVar(name, span=self.span(ft))))
                if self.at(","):
                    self.advance()
                    continue
                break
            self.expect("}")
            names = [n for n, _ in fields]
            if len(set(names)) != len(names):
                raise ParseError("duplicate field in record", t.line, t.col)
            return SRecord(tuple(fields), span=self.span(t))
        self.error("expected an expression")


def parse(text: str):
    """Parse source text into a surface term; raises :class:`ParseError`."""
    return Parser(text).program()
