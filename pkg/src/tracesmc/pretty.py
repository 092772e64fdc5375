"""Pretty-printer for surface and core terms.

Output re-parses to the same tree; parentheses are added only where the
grammar needs them.
"""

from __future__ import annotations

import math

from . import core as C
from . import syntax as S
from .prims import INFIX

SEQ, EXPR, OR, AND, CMP, CONS, ADD, MUL, UNARY, APP, POSTFIX, ATOM = range(12)

_OP_LEVEL = {"or": (OR, "right"), "and": (AND, "right"),
             "lt": (CMP, "left"), "le": (CMP, "left"), "gt": (CMP, "left"), "ge": (CMP, "left"),
             "eq": (CMP, "left"), "ne": (CMP, "left"), "cons": (CONS, "right"),
             "add": (ADD, "left"), "sub": (ADD, "left"), "mul": (MUL, "left"), "div": (MUL, "left")}

_SAMPLE_NAME = {0: "sample_Bern", 1: "sample_U", 2: "sample_N", 3: "sample_Exp", 4: "sample_Beta"}


def pretty(t) -> str:
    return _pp(t, SEQ)


def _num(x: float) -> str:
    if math.isnan(x):
        return "(0.0 / 0.0)"
    if math.isinf(x):
        return "(1.0 / 0.0)" if x > 0 else "(-1.0 / 0.0)"
    s = repr(float(x))
    return f"({s})" if s.startswith("-") else s


def _wrap(s, level, ctx):
    return f"({s})" if level < ctx else s


def _params(ps):
    return " ".join("_" if p == C.UNIT_VAR else p for p in ps)


def _unlam(t):
    ps = []
    while isinstance(t, C.Lam):
        ps.append(t.param)
        t = t.body
    return ps, t


def _pp(t, ctx) -> str:
    # ---- core-only shapes
    if isinstance(t, C.App) and isinstance(t.fn, C.Lam):
        lam = t.fn
        if lam.param == C.UNIT_VAR:
            return _wrap(f"{_pp(t.arg, OR)}; {_pp(lam.body, SEQ)}", SEQ, ctx)
        return _wrap(f"let {lam.param} = {_pp(t.arg, SEQ)} in {_pp(lam.body, SEQ)}", EXPR, ctx)
    if isinstance(t, C.Lam):
        ps, body = _unlam(t)
        return _wrap(f"fun {_params(ps)} -> {_pp(body, SEQ)}", EXPR, ctx)
    if isinstance(t, C.LetRec):
        ps, body = _unlam(t.fn)
        value = _rebuild(ps[1:], body)
        return _wrap(f"let rec {t.name} {_params(ps[:1])} = {_pp(value, SEQ)} in "
                     f"{_pp(t.body, SEQ)}", EXPR, ctx)

    # ---- shared shapes (surface class or core class)
    if isinstance(t, (C.Const, S.SConst)):
        return _num(t.value)
    if isinstance(t, (C.Var, S.SVar)):
        return t.name
    if isinstance(t, (C.App, S.SApp)):
        return _wrap(f"{_pp(t.fn, APP)} {_pp(t.arg, POSTFIX)}", APP, ctx)
    if isinstance(t, (C.If, S.SIf)):
        return _wrap(f"if {_pp(t.cond, SEQ)} then {_pp(t.then, SEQ)} else {_pp(t.else_, EXPR)}",
                     EXPR, ctx)
    if isinstance(t, (C.Prim, S.SPrim)):
        return _prim(t, ctx)
    if isinstance(t, (C.Sample, S.SSample)):
        return _wrap(f"{_SAMPLE_NAME[int(t.dist)]}{_arglist(t.args)}", APP, ctx)
    if isinstance(t, (C.Weight, S.SWeight)):
        return _wrap(f"weight({_pp(t.arg, SEQ)})", APP, ctx)
    if isinstance(t, S.SLogWeight):
        return _wrap(f"logweight({_pp(t.arg, SEQ)})", APP, ctx)
    if isinstance(t, (C.Resample, S.SResample)):
        return "resample"
    if isinstance(t, (C.ListLit, S.SList)):
        return "[" + ", ".join(_pp(x, SEQ) for x in t.items) + "]"
    if isinstance(t, (C.RecordLit, S.SRecord)):
        return "{" + ", ".join(f"{n}: {_pp(v, SEQ)}" for n, v in t.fields) + "}"
    if isinstance(t, (C.Proj, S.SProj)):
        return _wrap(f"{_pp(t.term, POSTFIX)}.{t.field}", POSTFIX, ctx)
    if isinstance(t, (C.Match, S.SMatch)):
        cases = " ".join(f"| {_pat(p, False)} -> {_pp(b, OR)}" for p, b in t.cases)
        return _wrap(f"match {_pp(t.scrutinee, SEQ)} with {cases}", EXPR, ctx)

    # ---- surface-only shapes
    if isinstance(t, S.SFun):
        return _wrap(f"fun {_params(t.params)} -> {_pp(t.body, SEQ)}", EXPR, ctx)
    if isinstance(t, S.SLet):
        head = f"let {t.name}" + (f" {_params(t.params)}" if t.params else "")
        return _wrap(f"{head} = {_pp(t.value, SEQ)} in {_pp(t.body, SEQ)}", EXPR, ctx)
    if isinstance(t, S.SLetRec):
        return _wrap(f"let rec {t.name} {_params(t.params)} = {_pp(t.value, SEQ)} in "
                     f"{_pp(t.body, SEQ)}", EXPR, ctx)
    if isinstance(t, S.SSeq):
        return _wrap(f"{_pp(t.first, OR)}; {_pp(t.second, SEQ)}", SEQ, ctx)
    raise TypeError(f"cannot print {t!r}")


def _rebuild(params, body):
    for p in reversed(params):
        body = C.Lam(p, body)
    return body


def _arglist(args) -> str:
    return "(" + ", ".join(_pp(a, SEQ) for a in args) + ")"


def _prim(t, ctx) -> str:
    op, args = t.op, t.args
    if op in _OP_LEVEL:
        level, assoc = _OP_LEVEL[op]
        lctx, rctx = (level + 1, level) if assoc == "right" else (level, level + 1)
        return _wrap(f"{_pp(args[0], lctx)} {INFIX[op]} {_pp(args[1], rctx)}", level, ctx)
    if op == "neg" or op == "not":
        a = args[0]
        inner = f"({_pp(a, SEQ)})" if isinstance(a, (C.Const, S.SConst)) else _pp(a, UNARY)
        return _wrap(("-" if op == "neg" else "!") + inner, UNARY, ctx)
    return _wrap(f"{op}{_arglist(args)}", APP, ctx)


def _pat(p, nested) -> str:
    if isinstance(p, C.PVar):
        return p.name
    if isinstance(p, C.PWild):
        return "_"
    if isinstance(p, C.PConst):
        s = repr(float(p.value))
        return s
    if isinstance(p, C.PList):
        return "[" + ", ".join(_pat(q, False) for q in p.items) + "]"
    if isinstance(p, C.PCons):
        s = f"{_pat(p.head, True)} :: {_pat(p.tail, False)}"
        return f"({s})" if nested else s
    if isinstance(p, C.PRecord):
        parts = []
        for n, q in p.fields:
            parts.append(n if isinstance(q, C.PVar) and q.name == n else f"{n}: {_pat(q, False)}")
        return "{" + ", ".join(parts) + "}"
    raise TypeError(f"cannot print pattern {p!r}")
