"""Compiled CEK-style evaluator.

Core terms are compiled once into nested tuples ``(op, ..., src, scope)``
where ``src`` is the originating core term and ``scope`` the variable
layout of the environment at that node.  Environments are flat tuples;
closures capture only their free variables.  The continuation is a linked
chain of immutable tuples, so a paused machine is a plain value that can
be shared between particles without copying.

``execute`` is the single interpreter loop used for replay, recording and
single stepping.  It counts *reductions* (beta steps, primitive calls,
branch selections, matches, projections and the three effects); pure
navigation through evaluation contexts is free.
"""

from __future__ import annotations

import math
from operator import itemgetter

from . import core as C
from .distributions import QUANTILES, DistributionError
from .prims import PRIMS, PrimError

# opcodes
CONST, VAR, LAM, APP, LET, IF, PRIM, SAMPLE, WEIGHT, RESAMPLE, LIST, RECORD, PROJ, MATCH, LETREC = range(15)
# continuation frame tags
K_ARG, K_CALL, K_LET, K_IF, K_ARGS, K_WEIGHT, K_PROJ, K_MATCH, K_PASS = range(9)
# stop kinds
VALUE, AT_RESAMPLE, STUCK, BUDGET, ZERO, STEPPED, EFFECT = range(7)

_LOG = math.log
_NEG_INF = -math.inf
_INF = math.inf


class Clo:
    """A closure: compiled lambda plus captured values."""

    __slots__ = ("code", "env")

    def __init__(self, code, env):
        self.code = code
        self.env = env

    def __repr__(self):
        return f"<closure {self.code[3]}>"


class CompileError(Exception):
    pass


# -- compilation ---------------------------------------------------------------
#
# Besides the generic shape, most nodes carry a ``fast`` slot: for pure,
# effect-free subterms (constants, variables, lambdas, primitive calls and
# literals built from them) a Python closure ``env -> value`` plus the number
# of reductions it stands for.  A fast evaluator that raises means "take the
# generic path", which then reports the failure at the right redex.

class _Bail(Exception):
    pass


def compile_term(t):
    return _comp(t, ())


def _index(scope, name):
    for i in range(len(scope) - 1, -1, -1):
        if scope[i] == name:
            return i
    raise CompileError(f"unbound variable {name!r}")


def _comp(t, scope):
    if isinstance(t, C.Const):
        v = float(t.value)
        if v != v:
            raise CompileError("NaN constant")
        return (CONST, v, t, scope)
    if isinstance(t, C.Var):
        return (VAR, _index(scope, t.name), t, scope)
    if isinstance(t, C.Lam):
        return _comp_lam(t, scope, None)
    if isinstance(t, C.App):
        if isinstance(t.fn, C.Lam):
            lam = t.fn
            val = _comp(t.arg, scope)
            return (LET, val, _comp(lam.body, scope + (lam.param,)), _simple(val), t, scope)
        fc, ac = _comp(t.fn, scope), _comp(t.arg, scope)
        return (APP, fc, ac, _app_fast(fc, ac), t, scope)
    if isinstance(t, C.If):
        c = _comp(t.cond, scope)
        return (IF, c, _comp(t.then, scope), _comp(t.else_, scope), _simple(c), t, scope)
    if isinstance(t, C.Prim):
        if t.op not in PRIMS:
            raise CompileError(f"unknown primitive {t.op!r}")
        arity, fn = PRIMS[t.op]
        if len(t.args) != arity:
            raise CompileError(f"primitive {t.op} expects {arity} arguments")
        args = tuple(_comp(a, scope) for a in t.args)
        return _with_fast((PRIM, fn, args, arity, None, t, scope))
    if isinstance(t, C.Sample):
        if len(t.args) != t.dist.arity:
            raise CompileError(f"{t.dist.name.lower()} expects {t.dist.arity} arguments")
        args = tuple(_comp(a, scope) for a in t.args)
        return (SAMPLE, QUANTILES[t.dist], args, len(args), _simple_args(args), t, scope)
    if isinstance(t, C.Weight):
        a = _comp(t.arg, scope)
        return (WEIGHT, a, _simple(a), t, scope)
    if isinstance(t, C.Resample):
        return (RESAMPLE, t, scope)
    if isinstance(t, C.ListLit):
        args = tuple(_comp(a, scope) for a in t.items)
        return _with_fast((LIST, None, args, len(args), None, t, scope))
    if isinstance(t, C.RecordLit):
        args = tuple(_comp(v, scope) for _, v in t.fields)
        names = tuple(n for n, _ in t.fields)
        return _with_fast((RECORD, names, args, len(args), None, t, scope))
    if isinstance(t, C.Proj):
        return (PROJ, _comp(t.term, scope), t.field, t, scope)
    if isinstance(t, C.Match):
        cases = tuple((_matcher(p), _comp(b, scope + tuple(C.pattern_vars(p)))) for p, b in t.cases)
        s = _comp(t.scrutinee, scope)
        return (MATCH, s, cases, _simple(s), t, scope)
    if isinstance(t, C.LetRec):
        inner = scope + (t.name,)
        return (LETREC, _comp_lam(t.fn, inner, t.name), _comp(t.body, inner), t, scope)
    raise CompileError(f"not a core term: {t!r}")


def _with_fast(code):
    return code[:4] + (_simple(code),) + code[5:]


def _comp_lam(t, scope, recname):
    fv = C.free_vars(t)
    capnames = tuple(n for n in dict.fromkeys(reversed(scope)) if n in fv)[::-1]
    missing = fv - set(capnames)
    if missing:
        raise CompileError(f"unbound variable {sorted(missing)[0]!r}")
    caps = tuple(_index(scope, n) for n in capnames)
    body = _comp(t.body, capnames + (t.param,))
    # (LAM, body, caps, src, scope, capnames, recname)
    return (LAM, body, caps, t, scope, capnames, recname)


def _simple(code):
    """``(evaluator, reductions)`` for a pure subterm, else None."""
    op = code[0]
    if op == CONST:
        v = code[1]
        return (lambda env: v), 0
    if op == VAR:
        return itemgetter(code[1]), 0
    if op == LAM:
        caps = code[2]
        if not caps:
            return (lambda env: Clo(code, ())), 0
        if len(caps) == 1:
            i0 = caps[0]
            return (lambda env: Clo(code, (env[i0],))), 0
        get = itemgetter(*caps)
        return (lambda env: Clo(code, get(env))), 0
    if op == PRIM:
        sub = [_simple(a) for a in code[2]]
        if None in sub:
            return None
        fn = code[1]
        k = 1 + sum(s[1] for s in sub)
        if len(sub) == 1:
            a = sub[0][0]

            def ev1(env):
                r = fn(a(env))
                if r != r:
                    raise _Bail
                return r
            return ev1, k
        if len(sub) == 2:
            a, b = sub[0][0], sub[1][0]

            def ev2(env):
                r = fn(a(env), b(env))
                if r != r:
                    raise _Bail
                return r
            return ev2, k
        args = _simple_args(code[2])[0]

        def evn(env):
            r = fn(*args(env))
            if r != r:
                raise _Bail
            return r
        return evn, k
    if op == LIST or op == RECORD:
        sa = _simple_args(code[2])
        if sa is None:
            return None
        args, k = sa
        if op == LIST:
            return args, k
        names = code[1]
        return (lambda env: dict(zip(names, args(env)))), k
    return None


def _simple_args(codes):
    """``(env -> tuple of values, reductions)`` when every code is pure."""
    sub = [_simple(a) for a in codes]
    if None in sub:
        return None
    k = sum(s[1] for s in sub)
    if all(c[0] == CONST for c in codes):
        consts = tuple(c[1] for c in codes)
        return (lambda env: consts), k
    if all(c[0] == VAR for c in codes):
        if len(codes) == 1:
            i0 = codes[0][1]
            return (lambda env: (env[i0],)), k
        return itemgetter(*(c[1] for c in codes)), k
    fns = tuple(s[0] for s in sub)
    if len(fns) == 0:
        return (lambda env: ()), k
    if len(fns) == 1:
        f0 = fns[0]
        return (lambda env: (f0(env),)), k
    if len(fns) == 2:
        f0, f1 = fns
        return (lambda env: (f0(env), f1(env))), k
    if len(fns) == 3:
        f0, f1, f2 = fns
        return (lambda env: (f0(env), f1(env), f2(env))), k
    return (lambda env: tuple([f(env) for f in fns])), k


def _app_fast(fc, ac):
    """Curried application ``h a1 ... ak`` with pure head and arguments."""
    args = [ac]
    while fc[0] == APP:
        args.append(fc[2])
        fc = fc[1]
    args.reverse()
    head = _simple(fc)
    sa = _simple_args(args)
    if head is None or sa is None:
        return None
    return head[0], sa[0], len(args), head[1] + sa[1]


def _matcher(p):
    """Compile a pattern to ``value -> tuple of bindings | None``."""
    if isinstance(p, C.PVar):
        return lambda v: (v,)
    if isinstance(p, C.PWild):
        return lambda v: ()
    if isinstance(p, C.PConst):
        c = float(p.value)
        return lambda v: () if type(v) is float and v == c else None
    if isinstance(p, C.PList):
        subs = [_matcher(q) for q in p.items]
        n = len(subs)

        def m_list(v):
            if type(v) is not tuple or len(v) != n:
                return None
            out = ()
            for s, x in zip(subs, v):
                r = s(x)
                if r is None:
                    return None
                out += r
            return out
        return m_list
    if isinstance(p, C.PCons):
        mh, mt = _matcher(p.head), _matcher(p.tail)

        def m_cons(v):
            if type(v) is not tuple or not v:
                return None
            a = mh(v[0])
            if a is None:
                return None
            b = mt(v[1:])
            return None if b is None else a + b
        return m_cons
    if isinstance(p, C.PRecord):
        fields = [(n, _matcher(q)) for n, q in p.fields]

        def m_rec(v):
            if type(v) is not dict:
                return None
            out = ()
            for n, s in fields:
                if n not in v:
                    return None
                r = s(v[n])
                if r is None:
                    return None
                out += r
            return out
        return m_rec
    raise CompileError(f"bad pattern {p!r}")


# -- the interpreter loop -----------------------------------------------------------

def execute(code, env, value, kont, logw, n, steps, limit,
            trace, pos, stream, rec, kill_zero, det_only):
    """Run until a stop; returns ``(kind, value, code, env, kont, logw, n, steps, pos, info)``.

    ``code is None`` means return mode: ``value`` is being passed to
    ``kont``.  ``n`` is the number of resamples still allowed to pass
    (``None`` = unlimited).  Exactly one of ``trace`` (replay) and
    ``stream`` (record, draws appended to ``rec``) is used.  With
    ``det_only`` the loop refuses to perform effects and stops after
    ``limit`` reductions with kind ``STEPPED``; otherwise reaching ``limit``
    reductions is ``BUDGET``.
    """
    # opcodes and tags as locals: the loop below is the hot path
    _CONST, _VAR, _LAM, _APP, _LET, _IF, _PRIM, _SAMPLE, _WEIGHT, _RESAMPLE, _LIST, _RECORD, _PROJ, _MATCH, _LETREC = range(15)
    _K_ARG, _K_CALL, _K_LET, _K_IF, _K_ARGS, _K_WEIGHT, _K_PROJ, _K_MATCH, _K_PASS = range(9)
    _VALUE, _AT_RESAMPLE, _STUCK, _BUDGET, _ZERO, _STEPPED, _EFFECT = range(7)
    _Clo, _log, _ninf, _inf = Clo, _LOG, _NEG_INF, _INF

    ntrace = len(trace) if trace is not None else 0
    stop_kind = _STEPPED if det_only else _BUDGET
    while True:
        if code is not None:
            op = code[0]
            if op == _VAR:
                value = env[code[1]]
                code = None
            elif op == _APP:
                fast = code[3]
                if fast is not None and (not det_only or (fast[2] == 1 and fast[3] == 0)):
                    try:
                        f = fast[0](env)
                        args = fast[1](env)
                    except Exception:
                        f = None
                    if type(f) is _Clo:
                        k = fast[2]
                        steps += fast[3] + 1
                        env = f.env + (args[0],)
                        code = f.code[1]
                        i = 1
                        while i < k and code[0] == _LAM:
                            # curried: bind the next argument without building a closure
                            steps += 1
                            env = tuple([env[c] for c in code[2]]) + (args[i],)
                            code = code[1]
                            i += 1
                        for j in range(k - 1, i - 1, -1):
                            kont = (_K_PASS, args[j], kont)
                        if steps >= limit:
                            return (stop_kind, None, code, env, kont, logw, n, steps, pos, None)
                        continue
                kont = (_K_ARG, code, env, kont)
                code = code[1]
            elif op == _LET:
                fast = code[3]
                if fast is not None and (not det_only or fast[1] == 0):
                    try:
                        v = fast[0](env)
                    except Exception:
                        fast = None
                    if fast is not None:
                        steps += fast[1] + 1
                        env = env + (v,)
                        code = code[2]
                        if steps >= limit:
                            return (stop_kind, None, code, env, kont, logw, n, steps, pos, None)
                        continue
                kont = (_K_LET, code, env, kont)
                code = code[1]
            elif op == _CONST:
                value = code[1]
                code = None
            elif op == _PRIM or op == _LIST or op == _RECORD:
                fast = code[4]
                if fast is not None and (not det_only or fast[1] <= 1):
                    try:
                        value = fast[0](env)
                    except Exception:
                        fast = None
                    if fast is not None:
                        steps += fast[1]
                        code = None
                        if steps >= limit:
                            return (stop_kind, value, None, env, kont, logw, n, steps, pos, None)
                        continue
                if code[3] == 0:
                    res = _reduce_args(code, (), env, kont, logw, n, steps, pos, trace, ntrace,
                                       stream, rec, det_only)
                    if res[0] is _SIGNAL:
                        return res[1]
                    value, pos, steps = res
                    code = None
                    if steps >= limit:
                        return (stop_kind, value, None, env, kont, logw, n, steps, pos, None)
                else:
                    kont = (_K_ARGS, code, env, (), kont)
                    code = code[2][0]
            elif op == _SAMPLE:
                fast = code[4]
                if fast is not None and (fast[1] == 0 or not det_only):
                    try:
                        vals = fast[0](env)
                    except Exception:
                        vals = None
                    if vals is not None:
                        # common case inline; any failure is re-diagnosed by _reduce_args
                        if det_only:
                            value = None
                        elif trace is None:
                            u = stream.next()
                            try:
                                value = code[1](*vals, u)
                            except Exception:
                                value = None
                                stream.unread()
                            if value is not None:
                                rec.append(u)
                        elif pos < ntrace:
                            try:
                                value = code[1](*vals, trace[pos])
                            except Exception:
                                value = None
                            if value is not None:
                                pos += 1
                        else:
                            value = None
                        if value is not None:
                            steps += fast[1] + 1
                            code = None
                            if steps >= limit:
                                return (stop_kind, value, None, env, kont, logw, n, steps, pos, None)
                            continue
                        res = _reduce_args(code, vals, env, kont, logw, n, steps + fast[1], pos,
                                           trace, ntrace, stream, rec, det_only)
                        if res[0] is _SIGNAL:
                            return res[1]
                        value, pos, steps = res
                        code = None
                        if steps >= limit:
                            return (stop_kind, value, None, env, kont, logw, n, steps, pos, None)
                        continue
                kont = (_K_ARGS, code, env, (), kont)
                code = code[2][0]
            elif op == _IF:
                fast = code[4]
                if fast is not None and (not det_only or fast[1] == 0):
                    try:
                        v = fast[0](env)
                    except Exception:
                        v = None
                    if v == 1.0 and type(v) is float:
                        code = code[2]
                    elif v == 0.0 and type(v) is float:
                        code = code[3]
                    else:
                        v = None
                    if v is not None:
                        steps += fast[1] + 1
                        if steps >= limit:
                            return (stop_kind, None, code, env, kont, logw, n, steps, pos, None)
                        continue
                kont = (_K_IF, code, env, kont)
                code = code[1]
            elif op == _LAM:
                value = _Clo(code, tuple([env[i] for i in code[2]]))
                code = None
            elif op == _RESAMPLE:
                if det_only:
                    return (_EFFECT, None, code, env, kont, logw, n, steps, pos, "resample")
                steps += 1
                if n is not None:
                    if n <= 0:
                        return (_AT_RESAMPLE, None, code, env, kont, logw, n, steps, pos, None)
                    n -= 1
                value = 0.0
                code = None
                if steps >= limit:
                    return (stop_kind, value, None, env, kont, logw, n, steps, pos, None)
            elif op == _WEIGHT:
                fast = code[2]
                if fast is not None and not det_only:
                    try:
                        value = fast[0](env)
                    except Exception:
                        fast = None
                    if fast is not None:
                        steps += fast[1]
                        kont = (_K_WEIGHT, code, kont)
                        code = None
                        continue
                kont = (_K_WEIGHT, code, kont)
                code = code[1]
            elif op == _MATCH:
                fast = code[3]
                if fast is not None and (not det_only or fast[1] == 0):
                    try:
                        value = fast[0](env)
                    except Exception:
                        fast = None
                    if fast is not None:
                        steps += fast[1]
                        kont = (_K_MATCH, code, env, kont)
                        code = None
                        continue
                kont = (_K_MATCH, code, env, kont)
                code = code[1]
            elif op == _PROJ:
                kont = (_K_PROJ, code, kont)
                code = code[1]
            elif op == _LETREC:
                lam = code[1]
                clo = _Clo(lam, None)
                env = env + (clo,)
                clo.env = tuple([env[i] for i in lam[2]])
                code = code[2]
                steps += 1
                if steps >= limit:
                    return (stop_kind, None, code, env, kont, logw, n, steps, pos, None)
            else:
                raise AssertionError(f"bad opcode {op}")
        else:
            if kont is None:
                return (_VALUE, value, None, env, None, logw, n, steps, pos, None)
            tag = kont[0]
            if tag == _K_ARGS:
                pc = kont[1]
                vals = kont[3] + (value,)
                if len(vals) < pc[3]:
                    kont = (_K_ARGS, pc, kont[2], vals, kont[4])
                    code = pc[2][len(vals)]
                    env = kont[2]
                    continue
                env = kont[2]
                kont = kont[4]
                res = _reduce_args(pc, vals, env, kont, logw, n, steps, pos, trace, ntrace,
                                   stream, rec, det_only)
                if res[0] is _SIGNAL:
                    return res[1]
                value, pos, steps = res
                if steps >= limit:
                    return (stop_kind, value, None, env, kont, logw, n, steps, pos, None)
            elif tag == _K_ARG:
                pc = kont[1]
                env = kont[2]
                kont = (_K_CALL, value, kont[3])
                code = pc[2]
            elif tag == _K_CALL:
                f = kont[1]
                if type(f) is not _Clo:
                    return (_STUCK, None, None, env, kont, logw, n, steps, pos,
                            "application of a non-function")
                steps += 1
                kont = kont[2]
                env = f.env + (value,)
                code = f.code[1]
                if steps >= limit:
                    return (stop_kind, None, code, env, kont, logw, n, steps, pos, None)
            elif tag == _K_PASS:
                if type(value) is not _Clo:
                    return (_STUCK, None, None, env, kont, logw, n, steps, pos,
                            "application of a non-function")
                steps += 1
                env = value.env + (kont[1],)
                code = value.code[1]
                kont = kont[2]
                if steps >= limit:
                    return (stop_kind, None, code, env, kont, logw, n, steps, pos, None)
            elif tag == _K_LET:
                steps += 1
                env = kont[2] + (value,)
                code = kont[1][2]
                kont = kont[3]
                if steps >= limit:
                    return (stop_kind, None, code, env, kont, logw, n, steps, pos, None)
            elif tag == _K_IF:
                pc = kont[1]
                env = kont[2]
                if value == 1.0 and type(value) is float:
                    code = pc[2]
                elif value == 0.0 and type(value) is float:
                    code = pc[3]
                else:
                    return (_STUCK, None, None, env, kont, logw, n, steps, pos,
                            "if condition is not a boolean")
                kont = kont[3]
                steps += 1
                if steps >= limit:
                    return (stop_kind, None, code, env, kont, logw, n, steps, pos, None)
            elif tag == _K_WEIGHT:
                if det_only:
                    return (_EFFECT, value, None, env, kont, logw, n, steps, pos, "weight")
                c = value
                if type(c) is not float or not (0.0 <= c < _inf):
                    return (_STUCK, None, None, env, kont, logw, n, steps, pos,
                            "weight argument is not a finite non-negative real")
                steps += 1
                kont = kont[2]
                if c == 0.0:
                    logw = _ninf
                    if kill_zero:
                        return (_ZERO, None, None, env, kont, logw, n, steps, pos, None)
                else:
                    logw += _log(c)
                value = 0.0
                if steps >= limit:
                    return (stop_kind, value, None, env, kont, logw, n, steps, pos, None)
            elif tag == _K_PROJ:
                field = kont[1][2]
                if type(value) is not dict or field not in value:
                    return (_STUCK, None, None, env, kont, logw, n, steps, pos,
                            f"projection of missing field {field!r}")
                value = value[field]
                kont = kont[2]
                steps += 1
                if steps >= limit:
                    return (stop_kind, value, None, env, kont, logw, n, steps, pos, None)
            elif tag == _K_MATCH:
                pc = kont[1]
                env = kont[2]
                for matcher, body in pc[2]:
                    b = matcher(value)
                    if b is not None:
                        env = env + b
                        code = body
                        break
                else:
                    return (_STUCK, None, None, env, kont, logw, n, steps, pos,
                            "no pattern matches")
                kont = kont[3]
                steps += 1
                if steps >= limit:
                    return (stop_kind, None, code, env, kont, logw, n, steps, pos, None)
            else:
                raise AssertionError(f"bad frame {tag}")


class _Signal:
    pass


_SIGNAL = _Signal()


def _reduce_args(code, vals, env, kont, logw, n, steps, pos, trace, ntrace, stream, rec,
                 det_only):
    """Finish a PRIM / SAMPLE / LIST / RECORD node whose arguments are values.

    Returns ``(value, pos, steps)``, or ``(_SIGNAL, stop_tuple)`` when the
    machine must stop.
    """
    op = code[0]
    if op == PRIM:
        try:
            r = code[1](*vals)
        except (PrimError, TypeError, OverflowError, ZeroDivisionError) as e:
            return _stop(STUCK, code, vals, env, kont, logw, n, steps, pos, f"primitive failed: {e}")
        if r != r:
            return _stop(STUCK, code, vals, env, kont, logw, n, steps, pos, "primitive returned NaN")
        return (r, pos, steps + 1)
    if op == SAMPLE:
        if det_only:
            return _stop(EFFECT, code, vals, env, kont, logw, n, steps, pos, "sample")
        for v in vals:
            if type(v) is not float:
                return _stop(STUCK, code, vals, env, kont, logw, n, steps, pos,
                             "distribution parameter is not a real")
        if trace is not None:
            if pos >= ntrace:
                return _stop(STUCK, code, vals, env, kont, logw, n, steps, pos, "trace exhausted")
            u = trace[pos]
        else:
            u = stream.next()
        try:
            r = code[1](*vals, u)
        except DistributionError as e:
            return _stop(STUCK, code, vals, env, kont, logw, n, steps, pos, f"invalid parameters: {e}")
        if trace is None:
            rec.append(u)
        return (r, pos + 1, steps + 1)
    if op == LIST:
        return (vals, pos, steps)
    return (dict(zip(code[1], vals)), pos, steps)


def _stop(kind, code, vals, env, kont, logw, n, steps, pos, info):
    # The machine stops *at* the redex: rebuild an argument frame so that the
    # state can be read back as E[redex].
    k = (K_ARGS, code, env, vals[:-1], kont) if vals else kont
    pending = vals[-1] if vals else None
    if not vals:
        state = (kind, None, code, env, kont, logw, n, steps, pos, info)
    else:
        state = (kind, pending, None, env, k, logw, n, steps, pos, info)
    return (_SIGNAL, state)
