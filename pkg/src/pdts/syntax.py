"""Abstract syntax for the probabilistic dependent calculus.

Expressions are immutable trees.  Every node caches its free variables,
whether it is *pure* (contains no ``Random`` or ``Dispatch`` node) and its
hash, so large shared DAGs (such as generated query programs) stay cheap to
compare and traverse.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator

__all__ = [
    "Expr", "Const", "Sort", "Var", "Pair", "App", "Lam", "If", "Proj", "Pi",
    "Sigma", "Random", "Dispatch", "Context", "PairSubstitutionViolation",
    "ParseError", "TRUE", "FALSE", "UNIT", "BOOL", "ONE", "STAR", "BOX",
    "free_vars", "alpha_eq", "alpha_key", "substitute", "is_value",
    "fresh_name", "parse", "pretty", "arrow", "product", "tuple_value",
    "tuple_type", "EMPTY", "parse_program",
]

CONST_NAMES = ("1", "true", "false", "Unit", "Bool")


class PairSubstitutionViolation(ValueError):
    """A non-value would be substituted into a pair component."""


class Expr:
    """Base class of all pseudo-expressions."""

    __slots__ = ()
    _fields: tuple[str, ...] = ()

    def _init_cache(self, fv: frozenset, pure: bool) -> None:
        object.__setattr__(self, "fv", fv)
        object.__setattr__(self, "pure", pure)
        object.__setattr__(
            self, "_hash",
            hash((type(self).__name__,) + tuple(getattr(self, f) for f in self._fields)),
        )

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if type(self) is not type(other) or self._hash != other._hash:
            return False
        return all(getattr(self, f) == getattr(other, f) for f in self._fields)

    def __ne__(self, other) -> bool:
        return not self.__eq__(other)

    def __str__(self) -> str:
        return pretty(self)

    def children(self) -> tuple["Expr", ...]:
        return ()


@dataclass(frozen=True, eq=False, repr=False)
class Const(Expr):
    name: str
    fv: frozenset = field(init=False, compare=False)
    pure: bool = field(init=False, compare=False)
    _fields = ("name",)

    def __post_init__(self):
        if self.name not in CONST_NAMES:
            raise ValueError(f"unknown constant {self.name!r}")
        self._init_cache(frozenset(), True)

    def __repr__(self):
        return f"Const({self.name!r})"


@dataclass(frozen=True, eq=False, repr=False)
class Sort(Expr):
    name: str  # "*" or "Box"
    fv: frozenset = field(init=False, compare=False)
    pure: bool = field(init=False, compare=False)
    _fields = ("name",)

    def __post_init__(self):
        if self.name not in ("*", "Box"):
            raise ValueError(f"unknown sort {self.name!r}")
        self._init_cache(frozenset(), True)

    def __repr__(self):
        return f"Sort({self.name!r})"


@dataclass(frozen=True, eq=False, repr=False)
class Var(Expr):
    name: str
    fv: frozenset = field(init=False, compare=False)
    pure: bool = field(init=False, compare=False)
    _fields = ("name",)

    def __post_init__(self):
        self._init_cache(frozenset((self.name,)), True)

    def __repr__(self):
        return f"Var({self.name!r})"


def is_value(e: Expr) -> bool:
    return isinstance(e, (Const, Sort, Var, Pair))


@dataclass(frozen=True, eq=False, repr=False)
class Pair(Expr):
    left: Expr
    right: Expr
    tag: Expr
    fv: frozenset = field(init=False, compare=False)
    pure: bool = field(init=False, compare=False)
    _fields = ("left", "right", "tag")

    def __post_init__(self):
        if not (is_value(self.left) and is_value(self.right)):
            raise PairSubstitutionViolation(
                "pair components must be values (constants, variables or pairs)")
        self._init_cache(self.left.fv | self.right.fv | self.tag.fv, self.tag.pure)

    def children(self):
        return (self.left, self.right, self.tag)

    def __repr__(self):
        return f"Pair({self.left!r}, {self.right!r}, {self.tag!r})"


@dataclass(frozen=True, eq=False, repr=False)
class App(Expr):
    fun: Expr
    arg: Expr
    fv: frozenset = field(init=False, compare=False)
    pure: bool = field(init=False, compare=False)
    _fields = ("fun", "arg")

    def __post_init__(self):
        self._init_cache(self.fun.fv | self.arg.fv, self.fun.pure and self.arg.pure)

    def children(self):
        return (self.fun, self.arg)

    def __repr__(self):
        return f"App({self.fun!r}, {self.arg!r})"


class _Binder(Expr):
    __slots__ = ()
    _fields = ("var", "domain", "body")

    def __post_init__(self):
        self._init_cache(self.domain.fv | (self.body.fv - {self.var}),
                         self.domain.pure and self.body.pure)

    def children(self):
        return (self.domain, self.body)

    def __repr__(self):
        return f"{type(self).__name__}({self.var!r}, {self.domain!r}, {self.body!r})"


@dataclass(frozen=True, eq=False, repr=False)
class Lam(_Binder):
    var: str
    domain: Expr
    body: Expr
    fv: frozenset = field(init=False, compare=False)
    pure: bool = field(init=False, compare=False)


@dataclass(frozen=True, eq=False, repr=False)
class Pi(_Binder):
    var: str
    domain: Expr
    body: Expr
    fv: frozenset = field(init=False, compare=False)
    pure: bool = field(init=False, compare=False)


@dataclass(frozen=True, eq=False, repr=False)
class Sigma(_Binder):
    var: str
    domain: Expr
    body: Expr
    fv: frozenset = field(init=False, compare=False)
    pure: bool = field(init=False, compare=False)


@dataclass(frozen=True, eq=False, repr=False)
class If(Expr):
    cond: Expr
    then: Expr
    else_: Expr
    fv: frozenset = field(init=False, compare=False)
    pure: bool = field(init=False, compare=False)
    _fields = ("cond", "then", "else_")

    def __post_init__(self):
        self._init_cache(self.cond.fv | self.then.fv | self.else_.fv,
                         self.cond.pure and self.then.pure and self.else_.pure)

    def children(self):
        return (self.cond, self.then, self.else_)

    def __repr__(self):
        return f"If({self.cond!r}, {self.then!r}, {self.else_!r})"


@dataclass(frozen=True, eq=False, repr=False)
class Proj(Expr):
    index: int
    target: Expr
    fv: frozenset = field(init=False, compare=False)
    pure: bool = field(init=False, compare=False)
    _fields = ("index", "target")

    def __post_init__(self):
        if self.index not in (1, 2):
            raise ValueError("projection index must be 1 or 2")
        self._init_cache(self.target.fv, self.target.pure)

    def children(self):
        return (self.target,)

    def __repr__(self):
        return f"Proj({self.index}, {self.target!r})"


@dataclass(frozen=True, eq=False, repr=False)
class Random(Expr):
    rho: float
    target: Expr
    fv: frozenset = field(init=False, compare=False)
    pure: bool = field(init=False, compare=False)
    _fields = ("rho", "target")

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"random weight must lie in (0, 1), got {self.rho}")
        self._init_cache(self.target.fv, False)

    def children(self):
        return (self.target,)

    def __repr__(self):
        return f"Random({self.rho!r}, {self.target!r})"


class _Cases(tuple):
    """Case list whose hash is computed once."""

    def __new__(cls, items):
        self = super().__new__(cls, items)
        self._h = tuple.__hash__(self)
        return self

    def __hash__(self):
        return self._h


@dataclass(frozen=True, eq=False, repr=False)
class Dispatch(Expr):
    """``(\\var. Z) arg`` where ``Z`` is an ordered list of (type, body) cases."""

    var: str
    cases: tuple
    arg: Expr
    fv: frozenset = field(init=False, compare=False)
    pure: bool = field(init=False, compare=False)
    _fields = ("var", "cases", "arg")

    def __post_init__(self):
        cases = self.cases if isinstance(self.cases, _Cases) else _Cases(
            (t, b) for t, b in self.cases)
        if not cases:
            raise ValueError("dispatch needs at least one case")
        object.__setattr__(self, "cases", cases)
        fv = set(self.arg.fv)
        for t, b in cases:
            fv |= t.fv
            fv |= b.fv - {self.var}
        self._init_cache(frozenset(fv), False)

    def children(self):
        return (self.arg,)

    def __repr__(self):
        return f"Dispatch({self.var!r}, {self.cases!r}, {self.arg!r})"


TRUE = Const("true")
FALSE = Const("false")
UNIT = Const("Unit")
BOOL = Const("Bool")
ONE = Const("1")
STAR = Sort("*")
BOX = Sort("Box")


def arrow(a: Expr, b: Expr) -> Pi:
    return Pi(fresh_name("_", b.fv), a, b)


def product(a: Expr, b: Expr) -> Sigma:
    return Sigma(fresh_name("_", b.fv), a, b)


def tuple_type(types: list[Expr]) -> Expr:
    """Right-nested non-dependent product ``T1 * (T2 * ...)``."""
    out = types[-1]
    for t in reversed(types[:-1]):
        out = product(t, out)
    return out


def tuple_value(values: list[Expr], types: list[Expr]) -> Expr:
    """Right-nested tagged tuple of values; a single value is returned as is."""
    out, ty = values[-1], types[-1]
    for v, t in zip(reversed(values[:-1]), reversed(types[:-1])):
        ty = product(t, ty)
        out = Pair(v, out, ty)
    return out


# ---------------------------------------------------------------------------
# Contexts


class Context:
    """Ordered list of ``name : type`` statements with distinct names."""

    __slots__ = ("entries", "_map", "_h")

    def __init__(self, entries: Iterable[tuple[str, Expr]] = ()):
        self.entries = tuple(entries)
        self._map = dict(self.entries)
        self._h = hash(self.entries)
        if len(self._map) != len(self.entries):
            raise ValueError("context variable names must be distinct")

    def extend(self, name: str, ty: Expr) -> "Context":
        if name in self._map:
            raise ValueError(f"variable {name!r} already declared in context")
        new = Context.__new__(Context)
        new.entries = self.entries + ((name, ty),)
        new._map = dict(self._map)
        new._map[name] = ty
        new._h = hash(new.entries)
        return new

    def lookup(self, name: str) -> Expr | None:
        return self._map.get(name)

    def names(self) -> frozenset:
        return frozenset(self._map)

    def __contains__(self, name) -> bool:
        return name in self._map

    def __iter__(self) -> Iterator[tuple[str, Expr]]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, Context) and self.entries == other.entries

    def __hash__(self) -> int:
        return self._h

    def __repr__(self) -> str:
        inner = ", ".join(f"{n} : {pretty(t)}" for n, t in self.entries)
        return f"<{inner}>"


EMPTY = Context()


# ---------------------------------------------------------------------------
# Variables, alpha-equivalence, substitution


def free_vars(e: Expr) -> frozenset:
    return e.fv


_TRAILING = re.compile(r"\d+$")


def fresh_name(base: str, avoid) -> str:
    if base not in avoid:
        return base
    stem = _TRAILING.sub("", base) or "x"
    i = 1
    while f"{stem}{i}" in avoid:
        i += 1
    return f"{stem}{i}"


def alpha_key(e: Expr, env: dict | None = None, depth: int = 0):
    """Nameless (de Bruijn level) representation; equal keys iff alpha-equivalent."""
    env = {} if env is None else env
    match e:
        case Var(name):
            lvl = env.get(name)
            return ("v", name) if lvl is None else ("b", depth - lvl)
        case Const(name):
            return ("c", name)
        case Sort(name):
            return ("s", name)
        case Pair(l, r, t):
            return ("pair", alpha_key(l, env, depth), alpha_key(r, env, depth),
                    alpha_key(t, env, depth))
        case App(f, a):
            return ("app", alpha_key(f, env, depth), alpha_key(a, env, depth))
        case Lam(x, d, b) | Pi(x, d, b) | Sigma(x, d, b):
            dom = alpha_key(d, env, depth)
            inner = dict(env)
            inner[x] = depth + 1
            return (type(e).__name__, dom, alpha_key(b, inner, depth + 1))
        case If(c, t, f):
            return ("if", alpha_key(c, env, depth), alpha_key(t, env, depth),
                    alpha_key(f, env, depth))
        case Proj(i, t):
            return ("proj", i, alpha_key(t, env, depth))
        case Random(rho, t):
            return ("random", rho, alpha_key(t, env, depth))
        case Dispatch(x, cases, a):
            inner = dict(env)
            inner[x] = depth + 1
            return ("case",
                    tuple((alpha_key(t, env, depth), alpha_key(b, inner, depth + 1))
                          for t, b in cases),
                    alpha_key(a, env, depth))
    raise TypeError(f"not an expression: {e!r}")


def alpha_eq(a: Expr, b: Expr) -> bool:
    if a is b or a == b:
        return True
    return alpha_key(a) == alpha_key(b)


def _pair_mentions(e: Expr, x: str) -> bool:
    """True if a pair component in ``e`` mentions the free variable ``x``."""
    if x not in e.fv:
        return False
    match e:
        case Pair(l, r, t):
            return x in l.fv or x in r.fv or _pair_mentions(t, x)
        case Lam(y, d, b) | Pi(y, d, b) | Sigma(y, d, b):
            return _pair_mentions(d, x) or (y != x and _pair_mentions(b, x))
        case Dispatch(y, cases, a):
            return (_pair_mentions(a, x)
                    or any(_pair_mentions(t, x) for t, _ in cases)
                    or (y != x and any(_pair_mentions(b, x) for _, b in cases)))
    return any(_pair_mentions(c, x) for c in e.children())


def substitute(e: Expr, x: str, v: Expr) -> Expr:
    """Capture-avoiding ``e[x := v]``.

    Raises PairSubstitutionViolation if ``v`` is not a value and ``e`` has a
    pair component mentioning ``x``.
    """
    if x not in e.fv:
        return e
    if not is_value(v) and _pair_mentions(e, x):
        raise PairSubstitutionViolation(
            f"cannot substitute non-value {pretty(v)} for {x} inside a pair")
    return _subst(e, x, v)


def _rebind(y: str, body: Expr, x: str, v: Expr) -> tuple[str, Expr]:
    if y in v.fv:
        y2 = fresh_name(y, v.fv | body.fv | {x})
        body = _subst(body, y, Var(y2))
        y = y2
    return y, _subst(body, x, v)


def _subst(e: Expr, x: str, v: Expr) -> Expr:
    if x not in e.fv:
        return e
    match e:
        case Var(_):
            return v
        case Pair(l, r, t):
            return Pair(_subst(l, x, v), _subst(r, x, v), _subst(t, x, v))
        case App(f, a):
            return App(_subst(f, x, v), _subst(a, x, v))
        case Lam(y, d, b) | Pi(y, d, b) | Sigma(y, d, b):
            d2 = _subst(d, x, v)
            if y == x:
                return type(e)(y, d2, b)
            y2, b2 = _rebind(y, b, x, v)
            return type(e)(y2, d2, b2)
        case If(c, t, f):
            return If(_subst(c, x, v), _subst(t, x, v), _subst(f, x, v))
        case Proj(i, t):
            return Proj(i, _subst(t, x, v))
        case Random(rho, t):
            return Random(rho, _subst(t, x, v))
        case Dispatch(y, cases, a):
            a2 = _subst(a, x, v)
            if y == x:
                return Dispatch(y, tuple((_subst(t, x, v), b) for t, b in cases), a2)
            if y in v.fv and any(x in b.fv for _, b in cases):
                avoid = set(v.fv) | {x}
                for _, b in cases:
                    avoid |= b.fv
                y2 = fresh_name(y, avoid)
                cases = tuple((t, _subst(b, y, Var(y2))) for t, b in cases)
                y = y2
            return Dispatch(y, tuple((_subst(t, x, v), _subst(b, x, v)) for t, b in cases), a2)
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Printing

_ATOM, _APP, _PROD, _ARROW, _TOP = 4, 3, 2, 1, 0


def pretty(e: Expr, level: int = _TOP) -> str:
    text, own = _pp(e, level)
    return f"({text})" if own < level else text


def _pp(e: Expr, level: int) -> tuple[str, int]:
    match e:
        case Const("1"):
            return "unit", _ATOM
        case Const(name):
            return name, _ATOM
        case Sort("*"):
            # "*" in argument position would read as a product operator
            return ("(*)" if level == _ATOM else "*"), _ATOM
        case Sort(name):
            return name, _ATOM
        case Var(name):
            return name, _ATOM
        case Random(rho, t):
            return f"random[{rho!r}]({pretty(t)})", _ATOM
        case Dispatch(x, cases, a):
            body = "; ".join(f"{pretty(t)} => {pretty(b)}" for t, b in cases)
            return f"case {x} {{{body}}}({pretty(a)})", _ATOM
        case App(f, a):
            return f"{pretty(f, _APP)} {pretty(a, _ATOM)}", _APP
        case Proj(i, t):
            return f"{'fst' if i == 1 else 'snd'} {pretty(t, _ATOM)}", _APP
        # only generated binders print as arrows, so user names survive
        case Pi(x, d, b) if x not in b.fv and x.startswith("_"):
            return f"{pretty(d, _PROD)} -> {pretty(b, _ARROW)}", _ARROW
        case Sigma(x, d, b) if x not in b.fv and x.startswith("_"):
            return f"{pretty(d, _APP)} * {pretty(b, _PROD)}", _PROD
        case Pi(x, d, b):
            return f"Pi {x}:{pretty(d, _ARROW)}. {pretty(b)}", _TOP
        case Sigma(x, d, b):
            return f"Sigma {x}:{pretty(d, _ARROW)}. {pretty(b)}", _TOP
        case Lam(x, d, b):
            return f"\\{x}:{pretty(d, _ARROW)}. {pretty(b)}", _TOP
        case If(c, t, f):
            return f"if {pretty(c)} then {pretty(t)} else {pretty(f)}", _TOP
        case Pair(l, r, t):
            return f"pair({pretty(l)}, {pretty(r)}) : {pretty(t, _PROD)}", _TOP
    raise TypeError(f"not an expression: {e!r}")


# ---------------------------------------------------------------------------
# Parsing


class ParseError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{msg} at line {line}, column {col}")
        self.msg, self.line, self.col = msg, line, col


_TOKEN = re.compile(r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>=>|->|[\\.:()\[\]{},;*=])
""", re.VERBOSE)

_ATOM_START = {"(", "pair", "random", "case", "Bool", "Unit", "unit", "true",
               "false", "Box"}
_KEYWORDS = {"Pi", "Sigma", "if", "then", "else", "fst", "snd", "pair", "random",
             "case", "let", "in", "Bool", "Unit", "unit", "true", "false", "Box"}


def _tokenize(text: str) -> list[tuple[str, str, int, int]]:
    toks, pos, line, col = [], 0, 1, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind, val = m.lastgroup, m.group()
        if kind != "ws":
            if kind == "ident" and val in _KEYWORDS:
                kind = "kw"
            toks.append((kind, val, line, col))
        nl = val.count("\n")
        if nl:
            line += nl
            col = len(val) - val.rfind("\n")
        else:
            col += len(val)
        pos = m.end()
    toks.append(("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, text: str, ctx: Context | None):
        self.toks = _tokenize(text)
        self.i = 0
        self.ctx = ctx

    def peek(self):
        return self.toks[self.i]

    def next(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg, tok=None):
        _, val, line, col = tok or self.peek()
        raise ParseError(f"{msg} (found {val or 'end of input'!r})", line, col)

    def expect(self, val):
        tok = self.next()
        if tok[1] != val:
            self.error(f"expected {val!r}", tok)
        return tok

    def ident(self):
        tok = self.next()
        if tok[0] != "ident":
            self.error("expected identifier", tok)
        return tok[1]

    def expr(self) -> Expr:
        val = self.peek()[1]
        if val == "\\":
            self.next()
            x = self.ident()
            self.expect(":")
            dom = self.arrow()
            self.expect(".")
            return Lam(x, dom, self.expr())
        if val in ("Pi", "Sigma"):
            self.next()
            x = self.ident()
            self.expect(":")
            dom = self.arrow()
            self.expect(".")
            return (Pi if val == "Pi" else Sigma)(x, dom, self.expr())
        if val == "if":
            self.next()
            c = self.expr()
            self.expect("then")
            t = self.expr()
            self.expect("else")
            return If(c, t, self.expr())
        if val == "let":
            return self.let()
        return self.arrow()

    def let(self) -> Expr:
        self.next()
        x = self.ident()
        ann = None
        if self.peek()[1] == ":":
            self.next()
            ann = self.arrow()
        self.expect("=")
        bound = self.expr()
        self.expect("in")
        body = self.expr()
        if ann is not None:
            return App(Lam(x, ann, body), bound)
        from .prob import desugar_let  # local import: typing lives downstream
        return desugar_let(self.ctx or EMPTY, x, bound, body)

    def arrow(self) -> Expr:
        left = self.prod()
        if self.peek()[1] == "->":
            self.next()
            return arrow(left, self.arrow())
        return left

    def prod(self) -> Expr:
        left = self.app()
        if self.peek()[1] == "*":
            self.next()
            return product(left, self.prod())
        return left

    def starts_atom(self) -> bool:
        kind, val, _, _ = self.peek()
        return kind in ("ident", "num") or val in _ATOM_START

    def app(self) -> Expr:
        val = self.peek()[1]
        if val in ("fst", "snd"):
            self.next()
            head = Proj(1 if val == "fst" else 2, self.atom())
        else:
            head = self.atom()
        while self.starts_atom():
            head = App(head, self.atom())
        return head

    def atom(self) -> Expr:
        tok = self.next()
        kind, val = tok[0], tok[1]
        if kind == "ident":
            return Var(val)
        if kind == "num":
            if val == "1":
                return ONE
            self.error("unexpected number", tok)
        if val == "*":
            return STAR
        if val in ("Bool", "Unit", "true", "false"):
            return Const(val)
        if val == "unit":
            return ONE
        if val == "Box":
            return BOX
        if val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if val == "pair":
            self.expect("(")
            left = self.expr()
            self.expect(",")
            right = self.expr()
            self.expect(")")
            self.expect(":")
            tag = self.prod()
            try:
                return Pair(left, right, tag)
            except PairSubstitutionViolation as exc:
                self.error(str(exc), tok)
        if val == "random":
            self.expect("[")
            num = self.next()
            if num[0] != "num":
                self.error("expected a real number", num)
            rho = float(num[1])
            if not 0.0 < rho < 1.0:
                self.error("random weight must lie strictly between 0 and 1", num)
            self.expect("]")
            self.expect("(")
            t = self.expr()
            self.expect(")")
            return Random(rho, t)
        if val == "case":
            x = self.ident()
            self.expect("{")
            cases = []
            while True:
                ty = self.expr()
                self.expect("=>")
                cases.append((ty, self.expr()))
                if self.peek()[1] == ";":
                    self.next()
                if self.peek()[1] == "}":
                    break
            self.expect("}")
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Dispatch(x, tuple(cases), arg)
        self.error("expected an expression", tok)


def parse(text: str, ctx: Context | None = None) -> Expr:
    """Parse surface syntax.  ``ctx`` is only consulted to type unannotated lets."""
    p = _Parser(text, ctx)
    e = p.expr()
    if p.peek()[0] != "eof":
        p.error("unexpected trailing input")
    return e


def parse_program(text: str) -> tuple[Context, Expr]:
    """A term file: leading ``assume name : type`` lines build the context,
    the remaining text is the term."""
    ctx = EMPTY
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        line = lines[i].split("#", 1)[0].strip()
        if not line:
            i += 1
            continue
        m = re.fullmatch(r"assume\s+([A-Za-z_][A-Za-z0-9_]*)\s*:\s*(.+)", line)
        if not m:
            break
        try:
            ty = parse(m.group(2), ctx)
        except ParseError as exc:
            raise ParseError(exc.msg, i + 1, exc.col) from None
        if m.group(1) in ctx:
            raise ParseError(f"{m.group(1)} is assumed twice", i + 1, 1)
        ctx = ctx.extend(m.group(1), ty)
        i += 1
    body = "\n".join(lines[i:])
    if not body.strip():
        raise ParseError("no term after the assumptions", len(lines), 1)
    try:
        return ctx, parse(body, ctx)
    except ParseError as exc:
        raise ParseError(exc.msg, exc.line + i, exc.col) from None
