"""Lowering of surface syntax to core terms, plus the list prelude."""

from __future__ import annotations

from . import core as C
from . import syntax as S


class ScopeError(Exception):
    def __init__(self, name, span=None):
        where = f"{span[0]}:{span[1]}: " if span else ""
        super().__init__(f"{where}unbound variable {name!r}")
        self.name = name
        self.span = span


# Library functions available to every program; bound only when used.
PRELUDE_SOURCE = {
    "iter": "let rec iter f xs = match xs with | [] -> () | x :: rest -> f x; iter f rest in iter",
    "foldl": "let rec foldl f acc xs = match xs with | [] -> acc "
             "| x :: rest -> foldl f (f acc x) rest in foldl",
    "foldr": "let rec foldr f xs acc = match xs with | [] -> acc "
             "| x :: rest -> f x (foldr f rest acc) in foldr",
    "map": "let rec map f xs = match xs with | [] -> [] | x :: rest -> f x :: map f rest in map",
    "length": "let rec length xs = match xs with | [] -> 0 | _ :: rest -> 1 + length rest in length",
}
PRELUDE_ORDER = tuple(PRELUDE_SOURCE)
_prelude_cache: dict = {}


def prelude_binding(name) -> C.LetRec:
    if name not in _prelude_cache:
        from .parser import parse
        _prelude_cache[name] = _lower(parse(PRELUDE_SOURCE[name]), frozenset(), set())
    return _prelude_cache[name]


def desugar(surface, prelude: bool = True):
    """Surface term -> closed core term.

    Free occurrences of prelude names are closed by wrapping the program in
    the corresponding recursive bindings (outermost, in a fixed order).
    """
    used: set = set()
    term = _lower(surface, frozenset(), used if prelude else None)
    for name in reversed(PRELUDE_ORDER):
        if name in used:
            lr = prelude_binding(name)
            term = C.LetRec(lr.name, lr.fn, term)
    return term


def _lams(params, body):
    for p in reversed(params):
        body = C.Lam(p, body)
    return body


def _lower(t, scope, used):
    if isinstance(t, S.SConst):
        return C.Const(float(t.value))
    if isinstance(t, S.SVar):
        if t.name not in scope:
            if used is not None and t.name in PRELUDE_SOURCE:
                used.add(t.name)
            else:
                raise ScopeError(t.name, t.span)
        return C.Var(t.name)
    if isinstance(t, S.SFun):
        return _lams(t.params, _lower(t.body, scope | set(t.params), used))
    if isinstance(t, S.SApp):
        return C.App(_lower(t.fn, scope, used), _lower(t.arg, scope, used))
    if isinstance(t, S.SIf):
        return C.If(*(_lower(x, scope, used) for x in (t.cond, t.then, t.else_)))
    if isinstance(t, S.SPrim):
        return C.Prim(t.op, tuple(_lower(a, scope, used) for a in t.args))
    if isinstance(t, S.SSample):
        return C.Sample(t.dist, tuple(_lower(a, scope, used) for a in t.args))
    if isinstance(t, S.SWeight):
        return C.Weight(_lower(t.arg, scope, used))
    if isinstance(t, S.SLogWeight):
        return C.Weight(C.Prim("exp", (_lower(t.arg, scope, used),)))
    if isinstance(t, S.SResample):
        return C.Resample()
    if isinstance(t, S.SList):
        return C.ListLit(tuple(_lower(a, scope, used) for a in t.items))
    if isinstance(t, S.SRecord):
        return C.RecordLit(tuple((n, _lower(v, scope, used)) for n, v in t.fields))
    if isinstance(t, S.SProj):
        return C.Proj(_lower(t.term, scope, used), t.field)
    if isinstance(t, S.SMatch):
        return C.Match(_lower(t.scrutinee, scope, used), tuple(
            (p, _lower(b, scope | set(C.pattern_vars(p)), used)) for p, b in t.cases))
    if isinstance(t, S.SLet):
        value = _lams(t.params, _lower(t.value, scope | set(t.params), used))
        body = _lower(t.body, scope | {t.name}, used)
        return C.App(C.Lam(t.name, body), value)
    if isinstance(t, S.SLetRec):
        inner = scope | {t.name}
        fn = _lams(t.params, _lower(t.value, inner | set(t.params), used))
        return C.LetRec(t.name, fn, _lower(t.body, inner, used))
    if isinstance(t, S.SSeq):
        return C.seq(_lower(t.first, scope, used), _lower(t.second, scope, used))
    raise TypeError(f"not a surface term: {t!r}")
