"""Primitive functions: name -> (arity, implementation).

Implementations receive evaluated arguments and either return a value or
raise :class:`PrimError`; a NaN result is also treated as an error by the
evaluator.  Truth values are 1.0 / 0.0.
"""

from __future__ import annotations

import math

from .distributions import DENSITIES, Dist, DistributionError


class PrimError(Exception):
    pass


def _r(x) -> float:
    if type(x) is not float:
        raise PrimError(f"expected a real, got {type(x).__name__}")
    return x


def _truth(x) -> bool:
    if x == 1.0:
        return True
    if x == 0.0:
        return False
    raise PrimError(f"expected a boolean (0 or 1), got {x!r}")


def _add(a, b):
    return _r(a) + _r(b)


def _sub(a, b):
    return _r(a) - _r(b)


def _mul(a, b):
    return _r(a) * _r(b)


def _div(a, b):
    a, b = _r(a), _r(b)
    if b == 0.0:
        if a == 0.0 or a != a:
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


def _lt(a, b):
    return 1.0 if _r(a) < _r(b) else 0.0


def _le(a, b):
    return 1.0 if _r(a) <= _r(b) else 0.0


def _gt(a, b):
    return 1.0 if _r(a) > _r(b) else 0.0


def _ge(a, b):
    return 1.0 if _r(a) >= _r(b) else 0.0


def _eq(a, b):
    return 1.0 if _r(a) == _r(b) else 0.0


def _ne(a, b):
    return 1.0 if _r(a) != _r(b) else 0.0


def _and(a, b):
    return 1.0 if _truth(a) and _truth(b) else 0.0


def _or(a, b):
    return 1.0 if _truth(a) or _truth(b) else 0.0


def _not(a):
    return 0.0 if _truth(a) else 1.0


def _neg(a):
    return -_r(a)


def _log(a):
    a = _r(a)
    if a == 0.0:
        return -math.inf
    if a < 0.0:
        return math.nan
    return math.log(a)


def _exp(a):
    try:
        return math.exp(_r(a))
    except OverflowError:
        return math.inf


def _sqrt(a):
    a = _r(a)
    return math.sqrt(a) if a >= 0.0 else math.nan


def _pow(a, b):
    try:
        r = math.pow(_r(a), _r(b))
    except OverflowError:
        return math.inf
    except ValueError:
        return math.nan
    return r


def _floor(a):
    a = _r(a)
    return float(math.floor(a)) if math.isfinite(a) else a


def _unary(f):
    def g(a):
        try:
            return f(_r(a))
        except (ValueError, OverflowError):
            return math.nan
    return g


def _cons(h, t):
    if type(t) is not tuple:
        raise PrimError("right operand of :: is not a list")
    return (h,) + t


def _density(d):
    fn = DENSITIES[d]

    def f(*args):
        for a in args:
            if type(a) is not float:
                _r(a)
        try:
            return fn(*args)
        except DistributionError as e:
            raise PrimError(str(e)) from None
    return f


PRIMS = {
    "add": (2, _add), "sub": (2, _sub), "mul": (2, _mul), "div": (2, _div),
    "lt": (2, _lt), "le": (2, _le), "gt": (2, _gt), "ge": (2, _ge),
    "eq": (2, _eq), "ne": (2, _ne), "and": (2, _and), "or": (2, _or),
    "not": (1, _not), "neg": (1, _neg),
    "log": (1, _log), "exp": (1, _exp), "sqrt": (1, _sqrt), "pow": (2, _pow),
    "sin": (1, _unary(math.sin)), "cos": (1, _unary(math.cos)),
    "abs": (1, _unary(abs)), "floor": (1, _floor),
    "min": (2, lambda a, b: min(_r(a), _r(b))), "max": (2, lambda a, b: max(_r(a), _r(b))),
    "cons": (2, _cons),
    "f_Bern": (2, _density(Dist.BERNOULLI)), "f_U": (3, _density(Dist.UNIFORM)),
    "f_N": (3, _density(Dist.NORMAL)), "f_Exp": (2, _density(Dist.EXPONENTIAL)),
    "f_Beta": (3, _density(Dist.BETA)),
}

# Infix spellings.
BINARY_OPS = {
    "+": "add", "-": "sub", "*": "mul", "/": "div",
    "<": "lt", "<=": "le", ">": "gt", ">=": "ge",
    "==": "eq", "=": "eq", "!=": "ne", "<>": "ne",
    "&&": "and", "||": "or", "::": "cons",
}
INFIX = {"add": "+", "sub": "-", "mul": "*", "div": "/", "lt": "<", "le": "<=", "gt": ">",
         "ge": ">=", "eq": "==", "ne": "!=", "and": "&&", "or": "||", "cons": "::"}

# Identifiers that name primitives in source text.
NAMED = {"log": "log", "exp": "exp", "sqrt": "sqrt", "pow": "pow", "sin": "sin", "cos": "cos",
         "abs": "abs", "floor": "floor", "min": "min", "max": "max", "not": "not",
         "f_Bern": "f_Bern", "f_Bernoulli": "f_Bern", "f_U": "f_U", "f_Uniform": "f_U",
         "f_N": "f_N", "f_Normal": "f_N", "f_Exp": "f_Exp", "f_Exponential": "f_Exp",
         "f_Beta": "f_Beta"}
