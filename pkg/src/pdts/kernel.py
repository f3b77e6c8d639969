"""Deterministic kernel: beta reduction, normalization and type inference."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .syntax import (
    BOOL, BOX, EMPTY, FALSE, STAR, TRUE, UNIT, App, Const, Context, Dispatch, Expr,
    If, Lam, Pair, PairSubstitutionViolation, Pi, Proj, Random, Sigma, Sort, Var,
    _pair_mentions, alpha_eq, fresh_name, is_value, substitute,
)

__all__ = [
    "NotTypable", "UnboundVariable", "FuelExhausted", "Judgment", "step_beta",
    "normalize", "nf", "infer_type", "beta_equiv", "check_judgment", "judge",
    "check_context", "size", "contract", "find_redex", "replace_at",
    "DEFAULT_FUEL",
]

DEFAULT_FUEL = 100_000


class NotTypable(Exception):
    def __init__(self, rule: str, msg: str):
        super().__init__(f"[{rule}] {msg}")
        self.rule = rule


class UnboundVariable(NotTypable):
    def __init__(self, name: str):
        super().__init__("start", f"unbound variable {name}")
        self.name = name


class FuelExhausted(RuntimeError):
    pass


@dataclass(frozen=True)
class Judgment:
    ctx: Context
    term: Expr
    ty: Expr


def size(e: Expr) -> int:
    n = 1
    if isinstance(e, Dispatch):
        n += sum(size(t) + size(b) for t, b in e.cases)
    return n + sum(size(c) for c in e.children())


# ---------------------------------------------------------------------------
# Redexes and positions


def contract(e: Expr) -> Expr | None:
    """Contract ``e`` if it is a redex of the deterministic rules, else None.

    A lambda application only fires when the argument is pure and, if the body
    pairs the bound variable, already a value.
    """
    match e:
        case Proj(i, Pair(l, r, _)):
            return l if i == 1 else r
        case If(Const("true"), t, _):
            return t
        case If(Const("false"), _, f):
            return f
        case App(Lam(x, _, b), a) if a.pure:
            if not is_value(a) and _pair_mentions(b, x):
                return None
            return substitute(b, x, a)
    return None


def _search_children(e: Expr, bound: frozenset):
    """Yield (index, child, bound) for the positions visited by redex search."""
    match e:
        case Lam(x, d, b) | Pi(x, d, b) | Sigma(x, d, b):
            yield 0, d, bound
            yield 1, b, bound | {x}
        case Dispatch(_, _, a):
            yield 0, a, bound
        case _:
            for i, c in enumerate(e.children()):
                yield i, c, bound


def find_redex(e: Expr, pred: Callable[[Expr], object], bound: frozenset = frozenset(),
               strong: bool = False, prune: Callable[[Expr], bool] | None = None):
    """Leftmost-outermost position whose node satisfies ``pred``.

    Unless ``strong`` is set, only free sub-expressions qualify: none of their
    free variables may be bound above them.  Returns (path, node, result).
    """
    stack = [((), e, bound)]
    while stack:
        path, node, bnd = stack.pop()
        if prune is not None and prune(node):
            continue
        if strong or not (node.fv & bnd):
            res = pred(node)
            if res is not None and res is not False:
                return path, node, res
        kids = list(_search_children(node, bnd))
        for i, c, b2 in reversed(kids):
            stack.append((path + (i,), c, b2))
    return None


def _with_child(e: Expr, i: int, new: Expr) -> Expr:
    match e:
        case Pair(l, r, t):
            return Pair(*[new if j == i else c for j, c in enumerate((l, r, t))])
        case App(f, a):
            return App(new, a) if i == 0 else App(f, new)
        case Lam(x, d, b) | Pi(x, d, b) | Sigma(x, d, b):
            return type(e)(x, new, b) if i == 0 else type(e)(x, d, new)
        case If(c, t, f):
            return If(*[new if j == i else k for j, k in enumerate((c, t, f))])
        case Proj(k, _):
            return Proj(k, new)
        case Random(rho, _):
            return Random(rho, new)
        case Dispatch(x, cases, _):
            return Dispatch(x, cases, new)
    raise ValueError("no such child")


def replace_at(e: Expr, path: tuple, new: Expr) -> Expr:
    if not path:
        return new
    kids = e.children()
    return _with_child(e, path[0], replace_at(kids[path[0]], path[1:], new))


def step_beta(e: Expr, *, strong: bool = False, bound: frozenset = frozenset()) -> Expr | None:
    """One leftmost-outermost beta step, or None if ``e`` is in normal form."""
    hit = find_redex(e, contract, bound, strong)
    if hit is None:
        return None
    path, _, new = hit
    return replace_at(e, path, new)


def normalize(e: Expr, fuel: int = DEFAULT_FUEL, *, strong: bool = False,
              locked: frozenset = frozenset()) -> Expr:
    """Iterate ``step_beta`` to a normal form.

    ``locked`` names variables treated as bound by an enclosing binder, so
    redexes mentioning them are not free.
    """
    if fuel <= 0:
        raise ValueError("fuel must be positive")
    for _ in range(fuel):
        nxt = step_beta(e, strong=strong, bound=locked)
        if nxt is None:
            return e
        e = nxt
    if step_beta(e, strong=strong, bound=locked) is None:
        return e
    raise FuelExhausted(f"no normal form within {fuel} steps")


# ---------------------------------------------------------------------------
# Full normalization used for type conversion


class _Budget:
    __slots__ = ("left",)

    def __init__(self, n):
        self.left = n

    def spend(self):
        self.left -= 1
        if self.left < 0:
            raise FuelExhausted("normalization budget exhausted")


_NF_CACHE: dict = {}


def nf(e: Expr, fuel: int = DEFAULT_FUEL) -> Expr:
    """Full beta normal form (reducing under binders).  Used for conversion."""
    hit = _NF_CACHE.get(e)
    if hit is not None:
        return hit
    out = _nf(e, _Budget(fuel))
    if len(_NF_CACHE) > 200_000:
        _NF_CACHE.clear()
    _NF_CACHE[e] = out
    return out


def _nf(e: Expr, budget: _Budget) -> Expr:
    match e:
        case Var(_) | Const(_) | Sort(_):
            return e
        case Pair(l, r, t):
            return Pair(_nf(l, budget), _nf(r, budget), _nf(t, budget))
        case App(f, a):
            f2, a2 = _nf(f, budget), _nf(a, budget)
            if isinstance(f2, Lam) and a2.pure and (
                    is_value(a2) or not _pair_mentions(f2.body, f2.var)):
                budget.spend()
                return _nf(substitute(f2.body, f2.var, a2), budget)
            return App(f2, a2)
        case Lam(x, d, b) | Pi(x, d, b) | Sigma(x, d, b):
            return type(e)(x, _nf(d, budget), _nf(b, budget))
        case If(c, t, f):
            c2 = _nf(c, budget)
            if c2 == TRUE:
                return _nf(t, budget)
            if c2 == FALSE:
                return _nf(f, budget)
            return If(c2, _nf(t, budget), _nf(f, budget))
        case Proj(i, t):
            t2 = _nf(t, budget)
            if isinstance(t2, Pair):
                return t2.left if i == 1 else t2.right
            return Proj(i, t2)
        case Random(rho, t):
            return Random(rho, _nf(t, budget))
        case Dispatch(x, cases, a):
            return Dispatch(x, cases, _nf(a, budget))
    raise TypeError(f"not an expression: {e!r}")


def beta_equiv(a: Expr, b: Expr, fuel: int = DEFAULT_FUEL) -> bool:
    return alpha_eq(nf(a, fuel), nf(b, fuel))


# ---------------------------------------------------------------------------
# Type inference

_CONST_TYPES = {"true": BOOL, "false": BOOL, "1": UNIT, "Bool": STAR, "Unit": STAR}
_INFER_CACHE: dict = {}


def infer_type(ctx: Context, e: Expr) -> Expr:
    """Infer the (fully normalized) type of ``e`` in ``ctx``.

    Raises NotTypable naming the first rule that fails.
    """
    key = (ctx, e)
    hit = _INFER_CACHE.get(key)
    if hit is not None:
        return hit
    try:
        ty = _infer(ctx, e)
    except PairSubstitutionViolation as exc:
        raise NotTypable("application", str(exc)) from None
    except RecursionError:
        raise FuelExhausted("expression too deep to type") from None
    if len(_INFER_CACHE) > 200_000:
        _INFER_CACHE.clear()
    _INFER_CACHE[key] = ty
    return ty


def _sort_of(ctx: Context, ty: Expr, rule: str) -> Sort:
    s = _infer(ctx, ty)
    if not isinstance(s, Sort):
        raise NotTypable(rule, f"{ty} is not a type (it has type {s})")
    return s


def _enter(ctx: Context, x: str, dom: Expr, body: Expr) -> tuple[Context, str, Expr]:
    """Extend ``ctx`` with ``x : dom``, renaming ``x`` if already declared."""
    if x in ctx:
        x2 = fresh_name(x, ctx.names() | body.fv)
        body = substitute(body, x, Var(x2))
        x = x2
    return ctx.extend(x, nf(dom)), x, body


def if_type(ctx: Context, cond: Expr, t1: Expr, t2: Expr) -> Expr:
    """Type of ``if cond then _ else _`` whose branches have types t1, t2.

    Identical branch types need no dependent motive; otherwise the motive is
    ``if z then t1 else t2`` instantiated at ``cond``.
    """
    if alpha_eq(t1, t2):
        return t1
    s1, s2 = _sort_of(ctx, t1, "if"), _sort_of(ctx, t2, "if")
    if s1 != s2:
        raise NotTypable("if", f"branch types {t1} and {t2} live in different sorts")
    return nf(If(cond, t1, t2))


def _infer(ctx: Context, e: Expr) -> Expr:
    hit = _INFER_CACHE.get((ctx, e))
    if hit is not None:
        return hit
    match e:
        case Sort("*"):
            return BOX
        case Sort(_):
            raise NotTypable("axioms", "Box has no type")
        case Const(name):
            return _CONST_TYPES[name]
        case Var(name):
            ty = ctx.lookup(name)
            if ty is None:
                raise UnboundVariable(name)
            return nf(ty)
        case Pi(x, a, b) | Sigma(x, a, b):
            if _infer(ctx, a) != STAR:
                raise NotTypable("type/kind formation", f"domain {a} is not of type *")
            inner, x2, b2 = _enter(ctx, x, a, b)
            return _sort_of(inner, b2, "type/kind formation")
        case Lam(x, a, b):
            _sort_of(ctx, a, "abstraction")
            inner, x2, b2 = _enter(ctx, x, a, b)
            ty = Pi(x2, nf(a), _infer(inner, b2))
            _sort_of(ctx, ty, "abstraction")
            return ty
        case App(f, a):
            tf = _infer(ctx, f)
            if not isinstance(tf, Pi):
                raise NotTypable("application", f"{f} has non-function type {tf}")
            ta = _infer(ctx, a)
            if not alpha_eq(ta, tf.domain):
                raise NotTypable("application",
                                 f"argument {a} has type {ta}, expected {tf.domain}")
            return nf(substitute(tf.body, tf.var, a))
        case If(c, t, f):
            tc = _infer(ctx, c)
            if tc != BOOL:
                raise NotTypable("if", f"condition {c} has type {tc}, expected Bool")
            return if_type(ctx, c, _infer(ctx, t), _infer(ctx, f))
        case Proj(i, c):
            tc = _infer(ctx, c)
            if not isinstance(tc, Sigma):
                raise NotTypable("products (2)", f"{c} has non-product type {tc}")
            if i == 1:
                return tc.domain
            return nf(substitute(tc.body, tc.var, Proj(1, c)))
        case Pair(l, r, tag):
            tagn = nf(tag)
            if not isinstance(tagn, Sigma):
                raise NotTypable("products (1)", f"pair tag {tag} is not a Sigma type")
            _sort_of(ctx, tagn, "products (1)")
            tl = _infer(ctx, l)
            if not alpha_eq(tl, tagn.domain):
                raise NotTypable("products (1)",
                                 f"first component has type {tl}, expected {tagn.domain}")
            want = nf(substitute(tagn.body, tagn.var, l))
            tr = _infer(ctx, r)
            if not alpha_eq(tr, want):
                raise NotTypable("products (1)",
                                 f"second component has type {tr}, expected {want}")
            return tagn
        case Random(_, _) | Dispatch(_, _, _):
            raise NotTypable("axioms", "probabilistic constructs have no deterministic type")
    raise TypeError(f"not an expression: {e!r}")


def judge(ctx: Context, e: Expr) -> Judgment:
    return Judgment(ctx, e, infer_type(ctx, e))


def check_judgment(ctx: Context, e: Expr, ty: Expr) -> bool:
    try:
        return beta_equiv(infer_type(ctx, e), ty)
    except (NotTypable, FuelExhausted, PairSubstitutionViolation):
        return False


def check_context(ctx: Context) -> None:
    """Raise NotTypable unless every declared type is well-sorted in its prefix."""
    prefix = EMPTY
    for name, ty in ctx:
        _sort_of(prefix, ty, "start")
        prefix = prefix.extend(name, ty)
