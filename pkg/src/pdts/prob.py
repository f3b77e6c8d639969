"""Probabilistic reduction: weighted steps, reduction trees and the TYPES /
REDUCTIONS operators that decide which pseudo-expressions are legal."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product as cartesian

from .kernel import (
    DEFAULT_FUEL, FuelExhausted, NotTypable, contract, find_redex, if_type,
    infer_type, nf, normalize, replace_at,
)
from .syntax import (
    BOOL, EMPTY, FALSE, STAR, TRUE, App, Context, Dispatch, Expr, If,
    Lam, PairSubstitutionViolation, Pi, Proj, Random, Sigma, Sort, Var,
    alpha_eq, alpha_key, fresh_name, pretty, substitute,
)

__all__ = [
    "NOTYPE", "WeightedStep", "Redex", "TreeNode", "ReductionTree",
    "DispatchNoMatch", "DispatchAmbiguous", "LeafCapExceeded", "StuckTerm",
    "select_redex", "step_rho", "enumerate_tree", "types_of", "reductions_of",
    "types_and_reductions", "is_legal", "judge_prob", "exact_distribution",
    "desugar_let", "in_T_x", "match_case",
]


class _NoType:
    """Marker for pseudo-expressions no rule assigns a type to."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "NOTYPE"

    def __reduce__(self):
        return (_NoType, ())


NOTYPE = _NoType()


class DispatchNoMatch(Exception):
    pass


class DispatchAmbiguous(Exception):
    pass


class LeafCapExceeded(Exception):
    pass


class StuckTerm(Exception):
    """A pseudo-expression outside the deterministic fragment with no permitted step."""


@dataclass(frozen=True)
class WeightedStep:
    probability: float
    result: Expr
    kind: str = "beta"
    rho: float | None = None


@dataclass(frozen=True)
class Redex:
    path: tuple
    kind: str
    node: Expr


# ---------------------------------------------------------------------------
# One step


def _class_i(node: Expr):
    if isinstance(node, Random):
        return "random"
    if isinstance(node, Dispatch) and node.arg.pure:
        return "dispatch"
    return None


def select_redex(e: Expr) -> Redex | None:
    """The unique position a probabilistic step may contract, if any.

    Random nodes and dispatches with a deterministic argument take priority;
    otherwise the leftmost-outermost free deterministic redex is chosen.
    """
    if not e.pure:
        hit = find_redex(e, _class_i, prune=lambda n: n.pure)
        if hit is not None:
            return Redex(hit[0], hit[2], hit[1])
    hit = find_redex(e, contract)
    if hit is not None:
        return Redex(hit[0], "beta", hit[1])
    return None


def _case_index(d: Dispatch) -> dict:
    idx = d.__dict__.get("_case_index")
    if idx is None:
        idx = {}
        for t, b in d.cases:
            idx.setdefault(alpha_key(nf(t)), []).append((t, b))
        object.__setattr__(d, "_case_index", idx)
    return idx


def match_case(ctx: Context, d: Dispatch, arg_type: Expr) -> tuple[Expr, Expr]:
    """The (type, body) case of ``d`` selected by an argument of ``arg_type``."""
    found = _case_index(d).get(alpha_key(arg_type))
    if not found:
        raise DispatchNoMatch(f"no case of {pretty(d)} accepts type {pretty(arg_type)}")
    t0, b0 = found[0]
    for _, b in found[1:]:
        if not alpha_eq(b, b0):
            raise DispatchAmbiguous(f"several cases accept type {pretty(arg_type)}")
    return t0, b0


def step_rho(e: Expr, ctx: Context = EMPTY) -> list[WeightedStep]:
    """All weighted one-step reducts of ``e``; empty iff no step is permitted.

    ``ctx`` types the free variables of dispatch arguments.
    """
    r = select_redex(e)
    if r is None:
        return []
    node = r.node
    match r.kind:
        case "random":
            return [
                WeightedStep(node.rho, replace_at(e, r.path, App(node.target, TRUE)),
                             "random", node.rho),
                WeightedStep(1.0 - node.rho, replace_at(e, r.path, App(node.target, FALSE)),
                             "random", node.rho),
            ]
        case "dispatch":
            t, b = match_case(ctx, node, infer_type(ctx, node.arg))
            new = App(Lam(node.var, t, b), node.arg)
            return [WeightedStep(1.0, replace_at(e, r.path, new), "dispatch")]
    new = contract(node)
    return [WeightedStep(1.0, replace_at(e, r.path, new), "beta")]


# ---------------------------------------------------------------------------
# Reduction trees


@dataclass(eq=False)
class TreeNode:
    expr: Expr
    children: list = field(default_factory=list)  # [(probability, TreeNode)]
    kind: str | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class ReductionTree:
    """Exhaustive tree of weighted reductions.

    Identical sub-trees are shared in memory, so traversals that walk paths
    are exponential only in the branching actually present.
    """

    root: TreeNode
    n_leaves: int
    depth: int

    def nodes(self) -> list[TreeNode]:
        """Distinct nodes, parents before children."""
        order, seen, stack = [], set(), [(self.root, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for _, c in node.children:
                stack.append((c, False))
        order.reverse()
        return order

    def node_weights(self) -> dict:
        """Total path probability reaching each distinct expression.

        Keyed by alpha-equivalence class; values are (expr, weight).
        """
        reach: dict[int, list] = {id(self.root): [1.0]}
        out: dict = {}
        for node in self.nodes():
            w = math.fsum(reach.pop(id(node), [0.0]))
            k = alpha_key(node.expr)
            prev = out.get(k)
            out[k] = (node.expr, w if prev is None else prev[1] + w)
            for p, c in node.children:
                reach.setdefault(id(c), []).append(w * p)
        return out

    def leaf_distribution(self) -> dict:
        """Aggregated probability per distinct normal form (alpha classes)."""
        reach: dict[int, list] = {id(self.root): [1.0]}
        acc: dict = {}
        for node in self.nodes():
            w = math.fsum(reach.pop(id(node), [0.0]))
            if node.is_leaf:
                acc.setdefault(alpha_key(node.expr), [node.expr, []])[1].append(w)
            for p, c in node.children:
                reach.setdefault(id(c), []).append(w * p)
        return {k: (v[0], math.fsum(v[1])) for k, v in acc.items()}

    def leaves(self) -> list[tuple[Expr, float]]:
        """Every root-to-leaf path as (normal form, path probability)."""
        out, stack = [], [(self.root, 1.0)]
        while stack:
            node, w = stack.pop()
            if node.is_leaf:
                out.append((node.expr, w))
            for p, c in reversed(node.children):
                stack.append((c, w * p))
        return out

    def to_record(self) -> dict:
        def rec(node):
            return {
                "expr": pretty(node.expr),
                "children": [{"p": p, "node": rec(c)} for p, c in node.children],
            }
        return rec(self.root)


def enumerate_tree(e: Expr, ctx: Context = EMPTY, fuel: int = DEFAULT_FUEL,
                   leaf_cap: int = 100_000) -> ReductionTree:
    """Expand every weighted reduction of ``e`` down to normal forms."""
    memo: dict[Expr, tuple[TreeNode, int, int]] = {}
    stack = [(e, False)]
    steps_cache: dict[Expr, list[WeightedStep]] = {}
    while stack:
        x, ready = stack.pop()
        if x in memo:
            continue
        steps = steps_cache.get(x)
        if steps is None:
            steps = steps_cache[x] = step_rho(x, ctx)
        if not steps:
            if not x.pure:
                raise StuckTerm(f"no permitted step for {pretty(x)}")
            memo[x] = (TreeNode(x), 1, 0)
            continue
        if not ready:
            stack.append((x, True))
            for s in steps:
                if s.result not in memo:
                    stack.append((s.result, False))
            if len(stack) > fuel * 4 + 64:
                raise FuelExhausted("reduction tree too deep")
            continue
        kids = [(s.probability, memo[s.result]) for s in steps]
        leaves = sum(k[1][1] for k in kids)
        depth = 1 + max(k[1][2] for k in kids)
        if leaves > leaf_cap:
            raise LeafCapExceeded(f"more than {leaf_cap} leaves")
        if depth > fuel:
            raise FuelExhausted(f"a reduction path exceeds {fuel} steps")
        memo[x] = (TreeNode(x, [(p, k[0]) for p, k in kids], steps[0].kind), leaves, depth)
    node, leaves, depth = memo[e]
    return ReductionTree(node, leaves, depth)


def exact_distribution(e: Expr, ctx: Context = EMPTY, fuel: int = DEFAULT_FUEL) -> dict:
    """Normal-form distribution by dynamic programming over shared sub-terms.

    Returns {alpha_key: (normal form, probability)}.  Unlike
    ``enumerate_tree`` there is no leaf cap, only the size of the reachable
    expression graph matters.
    """
    return enumerate_tree(e, ctx, fuel, leaf_cap=math.inf).leaf_distribution()


# ---------------------------------------------------------------------------
# TYPES and REDUCTIONS


def _reducible_shape(e: Expr) -> bool:
    if isinstance(e, (Random, Dispatch)):
        return True
    return contract(e) is not None


def in_T_x(e: Expr, x: str) -> bool:
    """No reducible sub-expression of ``e`` (dispatch cases included) mentions ``x``."""
    stack = [e]
    while stack:
        s = stack.pop()
        if x not in s.fv:
            continue
        if _reducible_shape(s):
            return False
        match s:
            case Lam(y, d, b) | Pi(y, d, b) | Sigma(y, d, b):
                stack.append(d)
                if y != x:
                    stack.append(b)
            case Dispatch(y, cases, a):
                stack.append(a)
                for t, b in cases:
                    stack.append(t)
                    if y != x:
                        stack.append(b)
            case _:
                stack.extend(s.children())
    return True


class _Illegal(Exception):
    pass


def _norm(e: Expr, locked: frozenset, fuel: int) -> Expr:
    try:
        return normalize(e, fuel, locked=locked)
    except PairSubstitutionViolation:
        raise _Illegal() from None


def _ty(e: Expr, fuel: int) -> Expr:
    try:
        return nf(e, fuel)
    except PairSubstitutionViolation:
        raise _Illegal() from None


def _keyed(items) -> dict:
    out = {}
    for it in items:
        out.setdefault(alpha_key(it), it)
    return out


def _bind(ctx: Context, x: str, dom: Expr, body: Expr) -> tuple[Context, str, Expr]:
    if x in ctx:
        x2 = fresh_name(x, ctx.names() | body.fv)
        body = substitute(body, x, Var(x2))
        x = x2
    return ctx.extend(x, dom), x, body


class _TR:
    """Memoized evaluator for the TYPES/REDUCTIONS rules."""

    def __init__(self, fuel: int):
        self.fuel = fuel
        self.memo: dict = {}

    def run(self, ctx: Context, locked: frozenset, e: Expr) -> tuple[dict, dict]:
        key = (ctx, locked, e)
        hit = self.memo.get(key)
        if hit is None:
            try:
                hit = self._rule(ctx, locked, e)
            except (_Illegal, NotTypable, DispatchNoMatch, DispatchAmbiguous):
                hit = None
            self.memo[key] = hit
        if hit is None:
            raise _Illegal()
        return hit

    def _rule(self, ctx: Context, locked: frozenset, e: Expr) -> tuple[dict, dict]:
        fuel = self.fuel
        if e.pure:
            ty = infer_type(ctx, e)
            return _keyed([ty]), _keyed([_norm(e, locked, fuel)])
        match e:
            case Random(_, f):
                ftys, freds = self.run(ctx, locked, f)
                types, reds = [], []
                for t in ftys.values():
                    if not (isinstance(t, Pi) and t.domain == BOOL):
                        raise _Illegal()
                    for b in (TRUE, FALSE):
                        types.append(_ty(substitute(t.body, t.var, b), fuel))
                for r in freds.values():
                    for b in (TRUE, FALSE):
                        reds.append(_norm(App(r, b), locked, fuel))
                return _keyed(types), _keyed(reds)
            case If(c, a1, a2):
                if not c.pure or infer_type(ctx, c) != BOOL:
                    raise _Illegal()
                t1, r1 = self.run(ctx, locked, a1)
                t2, r2 = self.run(ctx, locked, a2)
                cn = nf(c)
                types = []
                for x, y in cartesian(t1.values(), t2.values()):
                    if cn == TRUE:
                        types.append(x)
                    elif cn == FALSE:
                        types.append(y)
                    else:
                        types.append(if_type(ctx, c, x, y))
                reds = [_norm(If(c, x, y), locked, fuel)
                        for x, y in cartesian(r1.values(), r2.values())]
                return _keyed(types), _keyed(reds)
            case Lam(x, a, b):
                if not a.pure:
                    raise _Illegal()
                if not isinstance(infer_type(ctx, a), Sort):
                    raise _Illegal()
                inner, x2, b2 = _bind(ctx, x, nf(a), b)
                if not in_T_x(b2, x2):
                    raise _Illegal()
                bt, br = self.run(inner, locked | {x2}, b2)
                an = nf(a)
                types = [Pi(x2, an, t) for t in bt.values()]
                for t in types:
                    if not isinstance(infer_type(ctx, t), Sort):
                        raise _Illegal()
                reds = [_norm(Lam(x2, a, r), locked, fuel) for r in br.values()]
                return _keyed(types), _keyed(reds)
            case Pi(x, a, b) | Sigma(x, a, b):
                if not a.pure or infer_type(ctx, a) != STAR:
                    raise _Illegal()
                inner, x2, b2 = _bind(ctx, x, nf(a), b)
                if not in_T_x(b2, x2):
                    raise _Illegal()
                bt, br = self.run(inner, locked | {x2}, b2)
                sorts = list(bt.values())
                if len(sorts) != 1 or not isinstance(sorts[0], Sort):
                    raise _Illegal()
                reds = [_norm(type(e)(x2, a, r), locked, fuel) for r in br.values()]
                return _keyed(sorts), _keyed(reds)
            case App(f, a):
                at, ar = self.run(ctx, locked, a)
                if len(at) != 1:
                    raise _Illegal()
                (atype,) = at.values()
                ft, fr = self.run(ctx, locked, f)
                types, reds = [], []
                for t in ft.values():
                    if not (isinstance(t, Pi) and alpha_eq(t.domain, atype)):
                        raise _Illegal()
                    for a2 in ar.values():
                        types.append(_ty(substitute(t.body, t.var, a2), fuel))
                for r in fr.values():
                    for a2 in ar.values():
                        reds.append(_norm(App(r, a2), locked, fuel))
                return _keyed(types), _keyed(reds)
            case Dispatch(x, _, a):
                at, ar = self.run(ctx, locked, a)
                for t in at.values():
                    if infer_type(ctx, t) != STAR:
                        raise _Illegal()
                types, reds = [], []
                chosen: dict = {}
                for a2 in ar.values():
                    t2 = infer_type(ctx, a2)
                    k = alpha_key(t2)
                    if k not in chosen:
                        ct, body = match_case(ctx, e, t2)
                        inner, x2, b2 = _bind(ctx, x, t2, body)
                        if not in_T_x(b2, x2):
                            raise _Illegal()
                        chosen[k] = (x2, t2, self.run(inner, locked | {x2}, b2))
                    x2, t2, (bt, br) = chosen[k]
                    for bty in bt.values():
                        ty = _ty(substitute(bty, x2, a2), fuel)
                        if not isinstance(infer_type(ctx, ty), Sort):
                            raise _Illegal()
                        types.append(ty)
                    for r in br.values():
                        reds.append(_norm(App(Lam(x2, t2, r), a2), locked, fuel))
                return _keyed(types), _keyed(reds)
            case Proj(i, a):
                at, ar = self.run(ctx, locked, a)
                if len(at) != 1:
                    raise _Illegal()
                (t,) = at.values()
                if not isinstance(t, Sigma):
                    raise _Illegal()
                if i == 1:
                    types = [t.domain]
                else:
                    types = [_ty(substitute(t.body, t.var, Proj(1, a2)), fuel)
                             for a2 in ar.values()]
                reds = [_norm(Proj(i, a2), locked, fuel) for a2 in ar.values()]
                return _keyed(types), _keyed(reds)
        raise _Illegal()


def types_and_reductions(ctx: Context, e: Expr, fuel: int = DEFAULT_FUEL) -> tuple[list, list]:
    """(TYPES(e), REDUCTIONS(e)) as lists of distinct alpha classes.

    Expressions no rule covers get ``[NOTYPE]`` and ``[]``.
    """
    try:
        t, r = _TR(fuel).run(ctx, frozenset(), e)
    except (_Illegal, FuelExhausted, RecursionError):
        return [NOTYPE], []
    return list(t.values()), list(r.values())


def types_of(ctx: Context, e: Expr, fuel: int = DEFAULT_FUEL) -> list:
    return types_and_reductions(ctx, e, fuel)[0]


def reductions_of(ctx: Context, e: Expr, fuel: int = DEFAULT_FUEL) -> list:
    return types_and_reductions(ctx, e, fuel)[1]


def _sort_of(ctx: Context, t: Expr):
    try:
        s = infer_type(ctx, t)
    except (NotTypable, FuelExhausted):
        return None
    return s if isinstance(s, Sort) else None


def is_legal(ctx: Context, e: Expr, fuel: int = DEFAULT_FUEL) -> bool:
    """NOTYPE is not among the types and a single sort classifies them all."""
    types = types_of(ctx, e, fuel)
    if not types or any(t is NOTYPE for t in types):
        return False
    sorts = {_sort_of(ctx, t) for t in types}
    return len(sorts) == 1 and None not in sorts


def judge_prob(ctx: Context, e: Expr, ty: Expr, mode: str = "exact",
               n_samples: int = 100_000, seed: int = 0,
               fuel: int = DEFAULT_FUEL) -> float:
    """Probability mass of reductions of ``e`` landing in type ``ty``."""
    from .kernel import check_judgment

    if mode == "exact":
        dist = exact_distribution(e, ctx, fuel)
        return math.fsum(p for leaf, p in dist.values() if check_judgment(ctx, leaf, ty))
    if mode == "sampled":
        from .sampler import sample_counts

        counts = sample_counts(e, n_samples, seed, ctx=ctx, fuel=fuel)
        hits = sum(n for leaf, n in counts.values() if check_judgment(ctx, leaf, ty))
        return hits / n_samples
    raise ValueError(f"unknown mode {mode!r}")


def desugar_let(ctx: Context, x: str, bound: Expr, body: Expr) -> Expr:
    """``let x = bound in body`` without an annotation.

    A deterministic ``bound`` is typed and becomes an ordinary redex; a
    probabilistic one dispatches on every type it may reduce to.
    """
    if bound.pure:
        return App(Lam(x, infer_type(ctx, bound), body), bound)
    types = types_of(ctx, bound)
    if any(t is NOTYPE for t in types):
        raise NotTypable("let", f"bound expression {pretty(bound)} is not legal")
    return Dispatch(x, [(t, body) for t in types], bound)
