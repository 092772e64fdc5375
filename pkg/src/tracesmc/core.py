"""Core terms of the calculus and transformations over them.

The core language is the untyped call-by-value lambda calculus with
constants, primitives, ``if``, ``sample``, ``weight`` and ``resample``,
extended natively with lists, records, ``match`` and recursive bindings.
Booleans and unit are the reals 1.0 / 0.0.

Node paths (used to place resamples) are tuples of child indices taken in
the order returned by :func:`children`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Union

from .distributions import Dist

UNIT_VAR = "_"


# -- terms -------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Lam:
    param: str
    body: "Term"


@dataclass(frozen=True)
class App:
    fn: "Term"
    arg: "Term"


@dataclass(frozen=True)
class If:
    cond: "Term"
    then: "Term"
    else_: "Term"


@dataclass(frozen=True)
class Prim:
    op: str
    args: tuple


@dataclass(frozen=True)
class Sample:
    dist: Dist
    args: tuple


@dataclass(frozen=True)
class Weight:
    arg: "Term"


@dataclass(frozen=True)
class Resample:
    pass


@dataclass(frozen=True)
class ListLit:
    items: tuple


@dataclass(frozen=True)
class RecordLit:
    fields: tuple  # ((name, term), ...)


@dataclass(frozen=True)
class Proj:
    term: "Term"
    field: str


@dataclass(frozen=True)
class Match:
    scrutinee: "Term"
    cases: tuple  # ((pattern, term), ...)


@dataclass(frozen=True)
class LetRec:
    name: str
    fn: Lam
    body: "Term"


Term = Union[Const, Var, Lam, App, If, Prim, Sample, Weight, Resample,
             ListLit, RecordLit, Proj, Match, LetRec]


# -- patterns ----------------------------------------------------------------

@dataclass(frozen=True)
class PVar:
    name: str


@dataclass(frozen=True)
class PWild:
    pass


@dataclass(frozen=True)
class PConst:
    value: float


@dataclass(frozen=True)
class PList:
    items: tuple


@dataclass(frozen=True)
class PCons:
    head: "Pattern"
    tail: "Pattern"


@dataclass(frozen=True)
class PRecord:
    fields: tuple  # ((name, pattern), ...); other fields may be present


Pattern = Union[PVar, PWild, PConst, PList, PCons, PRecord]


def pattern_vars(p) -> list:
    if isinstance(p, PVar):
        return [p.name]
    if isinstance(p, PList):
        return [v for q in p.items for v in pattern_vars(q)]
    if isinstance(p, PCons):
        return pattern_vars(p.head) + pattern_vars(p.tail)
    if isinstance(p, PRecord):
        return [v for _, q in p.fields for v in pattern_vars(q)]
    return []


# -- sugar helpers -------------------------------------------------------------

def seq(a, b):
    return App(Lam(UNIT_VAR, b), a)


def let(name, value, body):
    return App(Lam(name, body), value)


UNIT = Const(0.0)
TRUE = Const(1.0)
FALSE = Const(0.0)


# -- traversal -----------------------------------------------------------------

def children(t) -> tuple:
    if isinstance(t, Lam):
        return (t.body,)
    if isinstance(t, App):
        return (t.fn, t.arg)
    if isinstance(t, If):
        return (t.cond, t.then, t.else_)
    if isinstance(t, (Prim, Sample)):
        return t.args
    if isinstance(t, Weight):
        return (t.arg,)
    if isinstance(t, ListLit):
        return t.items
    if isinstance(t, RecordLit):
        return tuple(v for _, v in t.fields)
    if isinstance(t, Proj):
        return (t.term,)
    if isinstance(t, Match):
        return (t.scrutinee,) + tuple(b for _, b in t.cases)
    if isinstance(t, LetRec):
        return (t.fn, t.body)
    return ()


def with_children(t, kids):
    kids = tuple(kids)
    if isinstance(t, Lam):
        return Lam(t.param, kids[0])
    if isinstance(t, App):
        return App(kids[0], kids[1])
    if isinstance(t, If):
        return If(*kids)
    if isinstance(t, Prim):
        return Prim(t.op, kids)
    if isinstance(t, Sample):
        return Sample(t.dist, kids)
    if isinstance(t, Weight):
        return Weight(kids[0])
    if isinstance(t, ListLit):
        return ListLit(kids)
    if isinstance(t, RecordLit):
        return RecordLit(tuple((n, v) for (n, _), v in zip(t.fields, kids)))
    if isinstance(t, Proj):
        return Proj(kids[0], t.field)
    if isinstance(t, Match):
        return Match(kids[0], tuple((p, b) for (p, _), b in zip(t.cases, kids[1:])))
    if isinstance(t, LetRec):
        if not isinstance(kids[0], Lam):
            raise PlacementError("the function of a recursive binding must stay a lambda")
        return LetRec(t.name, kids[0], kids[1])
    return t


def subterm(t, path):
    for i in path:
        kids = children(t)
        if not 0 <= i < len(kids):
            raise PlacementError(f"invalid node path {tuple(path)}")
        t = kids[i]
    return t


def iter_paths(t, prefix=()):
    """Yield ``(path, node)`` in preorder."""
    stack = [(prefix, t)]
    while stack:
        path, node = stack.pop()
        yield path, node
        kids = children(node)
        for i in range(len(kids) - 1, -1, -1):
            stack.append((path + (i,), kids[i]))


def size(t) -> int:
    return sum(1 for _ in iter_paths(t))


def count_resamples(t) -> int:
    return sum(1 for _, n in iter_paths(t) if isinstance(n, Resample))


def free_vars(t, bound=frozenset()) -> set:
    if isinstance(t, Var):
        return set() if t.name in bound else {t.name}
    if isinstance(t, Lam):
        return free_vars(t.body, bound | {t.param})
    if isinstance(t, LetRec):
        inner = bound | {t.name}
        return free_vars(t.fn, inner) | free_vars(t.body, inner)
    if isinstance(t, Match):
        out = free_vars(t.scrutinee, bound)
        for p, b in t.cases:
            out |= free_vars(b, bound | set(pattern_vars(p)))
        return out
    out = set()
    for c in children(t):
        out |= free_vars(c, bound)
    return out


def subst(t, mapping: dict):
    """Substitute closed terms for free variables (no capture is possible)."""
    if not mapping:
        return t
    if isinstance(t, Var):
        return mapping.get(t.name, t)
    if isinstance(t, Lam):
        return Lam(t.param, subst(t.body, _drop(mapping, (t.param,))))
    if isinstance(t, LetRec):
        m = _drop(mapping, (t.name,))
        return LetRec(t.name, subst(t.fn, m), subst(t.body, m))
    if isinstance(t, Match):
        return Match(subst(t.scrutinee, mapping),
                     tuple((p, subst(b, _drop(mapping, pattern_vars(p)))) for p, b in t.cases))
    kids = children(t)
    if not kids:
        return t
    return with_children(t, [subst(c, mapping) for c in kids])


def _drop(mapping, names):
    if any(n in mapping for n in names):
        mapping = {k: v for k, v in mapping.items() if k not in names}
    return mapping


# -- resample placement ------------------------------------------------------

class PlacementError(ValueError):
    pass


def insert_resamples(t, spec) -> "Term":
    """Replace the subterm at each path in ``spec`` by ``resample; subterm``.

    Paths refer to the input term.  Deeper paths are rewritten first so the
    paths of their ancestors stay valid.
    """
    paths = sorted({tuple(p) for p in spec}, key=lambda p: (-len(p), p))
    for p in paths:
        subterm(t, p)
    for p in paths:
        t = _rewrite_at(t, p, lambda s: seq(Resample(), s))
    return t


def _rewrite_at(t, path, fn):
    if not path:
        return fn(t)
    kids = list(children(t))
    kids[path[0]] = _rewrite_at(kids[path[0]], path[1:], fn)
    return with_children(t, kids)


def is_seq(t) -> bool:
    return isinstance(t, App) and isinstance(t.fn, Lam) and t.fn.param == UNIT_VAR


def weight_sites(t) -> list:
    """Paths of every ``weight`` node, in preorder."""
    return [p for p, n in iter_paths(t) if isinstance(n, Weight)]


def after_weight_paths(t) -> list:
    """For each ``weight`` that is the first half of a sequence ``weight(e); rest``,
    the path of ``rest``: inserting a resample there resamples right after it."""
    out = []
    for p, n in iter_paths(t):
        if is_seq(n) and _is_weighting(n.arg):
            out.append(p + (0, 0))
    return out


def _is_weighting(t):
    return isinstance(t, Weight)


def sample_sites(t) -> list:
    return [p for p, n in iter_paths(t) if isinstance(n, Sample)]


_SELECTORS = {"after_weight": after_weight_paths, "before_sample": sample_sites}


def resolve_placement(t, selector) -> list:
    """Turn a placement description into node paths.

    ``selector`` maps ``after_weight`` / ``before_sample`` to 1-based site
    numbers (sites counted in preorder) and ``paths`` to explicit node paths.
    """
    if not isinstance(selector, dict):
        raise PlacementError(f"placement must be an object, got {selector!r}")
    out = []
    for key, items in selector.items():
        if key == "paths":
            for p in items:
                p = tuple(int(i) for i in p)
                subterm(t, p)
                out.append(p)
            continue
        if key not in _SELECTORS:
            raise PlacementError(f"unknown placement selector {key!r}")
        sites = _SELECTORS[key](t)
        for k in items:
            if not (isinstance(k, int) and 1 <= k <= len(sites)):
                raise PlacementError(f"{key} site {k!r} does not exist ({len(sites)} sites)")
            out.append(sites[k - 1])
    return out


# -- alpha equivalence ------------------------------------------------------

def alpha_eq(a, b) -> bool:
    return _aeq(a, b, {}, {}, itertools.count())


def _bind(env, names, ids):
    env = dict(env)
    for n, i in zip(names, ids):
        env[n] = i
    return env


def _aeq(a, b, ea, eb, fresh) -> bool:
    if type(a) is not type(b):
        return False
    if isinstance(a, Var):
        ia, ib = ea.get(a.name), eb.get(b.name)
        if ia is None and ib is None:
            return a.name == b.name
        return ia == ib
    if isinstance(a, Const):
        return _same_real(a.value, b.value)
    if isinstance(a, Lam):
        k = next(fresh)
        return _aeq(a.body, b.body, _bind(ea, [a.param], [k]), _bind(eb, [b.param], [k]), fresh)
    if isinstance(a, LetRec):
        k = next(fresh)
        ea2, eb2 = _bind(ea, [a.name], [k]), _bind(eb, [b.name], [k])
        return _aeq(a.fn, b.fn, ea2, eb2, fresh) and _aeq(a.body, b.body, ea2, eb2, fresh)
    if isinstance(a, Match):
        if len(a.cases) != len(b.cases) or not _aeq(a.scrutinee, b.scrutinee, ea, eb, fresh):
            return False
        for (pa, ba), (pb, bb) in zip(a.cases, b.cases):
            if not _pat_shape_eq(pa, pb):
                return False
            va, vb = pattern_vars(pa), pattern_vars(pb)
            ks = [next(fresh) for _ in va]
            if not _aeq(ba, bb, _bind(ea, va, ks), _bind(eb, vb, ks), fresh):
                return False
        return True
    if isinstance(a, (Prim, Sample)) and (a.op if isinstance(a, Prim) else a.dist) != (
            b.op if isinstance(b, Prim) else b.dist):
        return False
    if isinstance(a, Proj) and a.field != b.field:
        return False
    if isinstance(a, RecordLit) and [n for n, _ in a.fields] != [n for n, _ in b.fields]:
        return False
    ka, kb = children(a), children(b)
    return len(ka) == len(kb) and all(_aeq(x, y, ea, eb, fresh) for x, y in zip(ka, kb))


def _same_real(x, y):
    return x == y or (math.isnan(x) and math.isnan(y))


def _pat_shape_eq(p, q) -> bool:
    if type(p) is not type(q):
        return False
    if isinstance(p, PConst):
        return _same_real(p.value, q.value)
    if isinstance(p, PList):
        return len(p.items) == len(q.items) and all(map(_pat_shape_eq, p.items, q.items))
    if isinstance(p, PCons):
        return _pat_shape_eq(p.head, q.head) and _pat_shape_eq(p.tail, q.tail)
    if isinstance(p, PRecord):
        return [n for n, _ in p.fields] == [n for n, _ in q.fields] and all(
            _pat_shape_eq(x, y) for (_, x), (_, y) in zip(p.fields, q.fields))
    return True
