"""A small, independent derivation checker used as a test oracle.

It shares only the term representation and substitution with the package.
Type checking runs in checking mode where possible, and every rule
application is recorded so tests can inspect the derivation.
"""

from __future__ import annotations

from pdts.syntax import (
    BOOL, BOX, FALSE, STAR, TRUE, UNIT, App, Const, If, Lam, Pair, Pi, Proj,
    Sigma, Sort, Var, alpha_eq, free_vars, fresh_name, substitute,
)


class Rejected(Exception):
    pass


def norm(e):
    """Innermost full beta normalization (only for small test terms)."""
    match e:
        case App(f, a):
            f2, a2 = norm(f), norm(a)
            if isinstance(f2, Lam):
                return norm(substitute(f2.body, f2.var, a2))
            return App(f2, a2)
        case If(c, t, u):
            c2 = norm(c)
            if c2 == TRUE:
                return norm(t)
            if c2 == FALSE:
                return norm(u)
            return If(c2, norm(t), norm(u))
        case Proj(i, t):
            t2 = norm(t)
            if isinstance(t2, Pair):
                return t2.left if i == 1 else t2.right
            return Proj(i, t2)
        case Lam(x, a, b) | Pi(x, a, b) | Sigma(x, a, b):
            return type(e)(x, norm(a), norm(b))
        case Pair(l, r, t):
            return Pair(norm(l), norm(r), norm(t))
    return e


def conv(a, b) -> bool:
    return alpha_eq(norm(a), norm(b))


class Checker:
    def __init__(self):
        self.rules: list[str] = []

    def _use(self, rule):
        self.rules.append(rule)

    def _lookup(self, ctx, x):
        for n, t in reversed(ctx):
            if n == x:
                return t
        raise Rejected(f"unbound {x}")

    def sort(self, ctx, t):
        s = norm(self.synth(ctx, t))
        if not isinstance(s, Sort):
            raise Rejected("not a type")
        return s

    def synth(self, ctx, e):
        match e:
            case Sort("*"):
                self._use("axiom *")
                return BOX
            case Const("true") | Const("false"):
                self._use("axiom bool")
                return BOOL
            case Const("1"):
                self._use("axiom unit")
                return UNIT
            case Const("Bool") | Const("Unit"):
                self._use("axiom type")
                return STAR
            case Var(x):
                self._use("start")
                return self._lookup(ctx, x)
            case Pi(x, a, b) | Sigma(x, a, b):
                self.sort(ctx, a)
                s2 = self.sort(ctx + ((x, a),), b)
                self._use("formation")
                return s2
            case Lam(x, a, b):
                self.sort(ctx, a)
                bt = self.synth(ctx + ((x, a),), b)
                self.sort(ctx, Pi(x, a, bt))
                self._use("abstraction")
                return Pi(x, a, bt)
            case App(f, a):
                ft = norm(self.synth(ctx, f))
                if not isinstance(ft, Pi):
                    raise Rejected("applying a non-function")
                self.check(ctx, a, ft.domain)
                self._use("application")
                return substitute(ft.body, ft.var, a)
            case Pair(l, r, tag):
                s = norm(tag)
                if not isinstance(s, Sigma):
                    raise Rejected("pair tag is not a sum")
                self.sort(ctx, s)
                self.check(ctx, l, s.domain)
                self.check(ctx, r, substitute(s.body, s.var, l))
                self._use("pair")
                return tag
            case Proj(i, t):
                s = norm(self.synth(ctx, t))
                if not isinstance(s, Sigma):
                    raise Rejected("projection from a non-pair")
                self._use("projection")
                return s.domain if i == 1 else substitute(s.body, s.var, Proj(1, t))
            case If(c, t, u):
                self.check(ctx, c, BOOL)
                t1, t2 = self.synth(ctx, t), self.synth(ctx, u)
                self._use("if")
                if conv(t1, t2):
                    return t1
                z = fresh_name("z", {n for n, _ in ctx} | free_vars(t1) | free_vars(t2))
                self.sort(ctx + ((z, BOOL),), If(Var(z), t1, t2))
                return If(c, t1, t2)
        raise Rejected(f"no synthesis rule for {e!r}")

    def check(self, ctx, e, ty):
        """Derive ``ctx |- e : ty``, using conversion at the end."""
        if isinstance(e, If):
            return self.check_if(ctx, e, ty)
        if isinstance(e, Lam):
            t = norm(ty)
            if isinstance(t, Pi) and conv(t.domain, e.domain):
                self.sort(ctx, e.domain)
                body_ty = substitute(t.body, t.var, Var(e.var))
                self.check(ctx + ((e.var, e.domain),), e.body, body_ty)
                self.sort(ctx, t)
                self._use("abstraction")
                return
        got = self.synth(ctx, e)
        if not conv(got, ty):
            raise Rejected("conversion fails")
        self._use("conversion")

    def check_if(self, ctx, e, ty):
        """The if rule: find a motive B with B[z := cond] equal to ``ty``."""
        self.check(ctx, e.cond, BOOL)
        names = {n for n, _ in ctx} | free_vars(ty) | free_vars(e)
        z = fresh_name("z", names)
        if isinstance(e.cond, Var):
            motive = substitute(ty, e.cond.name, Var(z))
        else:
            motive = ty
        self.sort(ctx + ((z, BOOL),), motive)
        self.check(ctx, e.then, substitute(motive, z, TRUE))
        self.check(ctx, e.else_, substitute(motive, z, FALSE))
        if not conv(substitute(motive, z, e.cond), ty):
            raise Rejected("motive does not match")
        self._use("if")


def derives(ctx, e, ty) -> list[str] | None:
    """The rules of a derivation of ``ctx |- e : ty``, or None."""
    c = Checker()
    try:
        c.sort(ctx, ty) if not isinstance(ty, Sort) else None
        c.check(ctx, e, ty)
    except Rejected:
        return None
    return c.rules


__all__ = ["derives", "norm", "conv", "Rejected"]
