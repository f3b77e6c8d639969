"""First-order formulas over a finite domain: syntax, parsing, grounding and
compilation to postfix programs for the world-enumeration kernels."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from itertools import product as cartesian

import numpy as np

from ._pykernels import OP_AND, OP_ATOM, OP_FALSE, OP_IMPLIES, OP_NOT, OP_OR, OP_TRUE

__all__ = [
    "Term", "TVar", "TConst", "TFun", "Formula", "Atom", "Not", "And", "Or",
    "Implies", "Forall", "Exists", "Top", "Bottom", "Signature", "AtomIndex",
    "UnknownSymbol", "MissingFunctionTable", "FormulaSyntaxError",
    "parse_formula", "show", "formula_free_vars", "instantiate", "groundings",
    "expand", "evaluate", "compile_formulas", "atoms_of",
]


class UnknownSymbol(ValueError):
    pass


class MissingFunctionTable(ValueError):
    pass


class FormulaSyntaxError(ValueError):
    def __init__(self, msg: str, col: int | None = None):
        super().__init__(msg if col is None else f"{msg} (column {col})")
        self.col = col


# ---------------------------------------------------------------------------
# Syntax


@dataclass(frozen=True)
class TVar:
    name: str


@dataclass(frozen=True)
class TConst:
    name: str


@dataclass(frozen=True)
class TFun:
    name: str
    args: tuple


Term = TVar | TConst | TFun


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple = ()


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Forall:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Exists:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Bottom:
    pass


Formula = Atom | Not | And | Or | Implies | Forall | Exists | Top | Bottom


@dataclass
class Signature:
    """Predicates with arities, constants, and tabulated functions."""

    predicates: dict = field(default_factory=dict)   # name -> arity
    constants: list = field(default_factory=list)
    functions: dict = field(default_factory=dict)    # name -> (arity, {args: const})

    def add_predicate(self, name: str, arity: int) -> None:
        if name in self.predicates or name in self.functions:
            raise ValueError(f"duplicate symbol {name}")
        self.predicates[name] = arity

    def add_constant(self, name: str) -> None:
        if name in self.constants:
            raise ValueError(f"duplicate constant {name}")
        self.constants.append(name)

    def add_function(self, name: str, arity: int, table: dict) -> None:
        if name in self.functions or name in self.predicates:
            raise ValueError(f"duplicate symbol {name}")
        self.functions[name] = (arity, dict(table))


# ---------------------------------------------------------------------------
# Printing


_PREC = {Implies: 1, Or: 2, And: 3}


def _show_term(t) -> str:
    match t:
        case TVar(n) | TConst(n):
            return n
        case TFun(n, args):
            return f"{n}({', '.join(_show_term(a) for a in args)})"
    raise TypeError(t)


def show(f, prec: int = 0) -> str:
    """Render in the concrete syntax accepted by ``parse_formula``."""
    match f:
        case Atom(p, ()):
            s, mine = p, 5
        case Atom(p, args):
            s, mine = f"{p}({', '.join(_show_term(a) for a in args)})", 5
        case Top():
            s, mine = "true", 5
        case Bottom():
            s, mine = "false", 5
        case Not(b):
            s, mine = "~" + show(b, 4), 4
        case And(l, r) | Or(l, r):
            op = " & " if isinstance(f, And) else " | "
            mine = _PREC[type(f)]
            s = show(l, mine) + op + show(r, mine + 1)
        case Implies(l, r):
            s, mine = show(l, 2) + " -> " + show(r, 1), 1
        case Forall(v, b) | Exists(v, b):
            q = "forall" if isinstance(f, Forall) else "exists"
            s, mine = f"{q} {v}. {show(b, 0)}", 0
        case _:
            raise TypeError(f)
    return f"({s})" if mine < prec else s


# ---------------------------------------------------------------------------
# Parsing

_KEYWORDS = frozenset({"forall", "exists", "true", "false"})
_TOK = re.compile(r"\s*(?:(->|[~&|().,!])|([A-Za-z_][A-Za-z0-9_]*))")


def _tokens(text: str):
    pos, out = 0, []
    text = text.rstrip()
    while pos < len(text):
        m = _TOK.match(text, pos)
        if not m or m.end() == pos:
            raise FormulaSyntaxError(f"unexpected character {text[pos:].strip()[:1]!r}", pos + 1)
        out.append((m.group(1) or m.group(2), m.start(1) if m.group(1) else m.start(2)))
        pos = m.end()
    return out


class _FParser:
    def __init__(self, text: str, sig: Signature | None):
        self.toks = _tokens(text)
        self.i = 0
        self.sig = sig

    def peek(self):
        return self.toks[self.i][0] if self.i < len(self.toks) else None

    def take(self, want=None):
        if self.i >= len(self.toks):
            raise FormulaSyntaxError("unexpected end of formula")
        tok, col = self.toks[self.i]
        if want is not None and tok != want:
            raise FormulaSyntaxError(f"expected {want!r}, found {tok!r}", col + 1)
        self.i += 1
        return tok

    def formula(self):
        if self.peek() in ("forall", "exists"):
            q = self.take()
            v = self.take()
            if not v.isidentifier() or v in _KEYWORDS:
                raise FormulaSyntaxError(f"expected a variable after {q}, found {v!r}")
            if self.peek() == ".":
                self.take()
            body = self.formula()
            return Forall(v, body) if q == "forall" else Exists(v, body)
        left = self.disj()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.formula())
        return left

    def disj(self):
        f = self.conj()
        while self.peek() == "|":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self):
        f = self.unary()
        while self.peek() == "&":
            self.take()
            f = And(f, self.unary())
        return f

    def unary(self):
        tok = self.peek()
        if tok in ("~", "!"):
            self.take()
            return Not(self.unary())
        if tok in ("forall", "exists"):
            return self.formula()
        if tok == "(":
            self.take()
            f = self.formula()
            self.take(")")
            return f
        if tok == "true":
            self.take()
            return Top()
        if tok == "false":
            self.take()
            return Bottom()
        if tok is None or not re.match(r"[A-Za-z_]", tok):
            col = self.toks[self.i][1] + 1 if tok is not None else None
            raise FormulaSyntaxError(f"expected an atom, found {tok!r}", col)
        name = self.take()
        args = ()
        if self.peek() == "(":
            self.take()
            args = [self.term()]
            while self.peek() == ",":
                self.take()
                args.append(self.term())
            self.take(")")
            args = tuple(args)
        if self.sig is not None:
            ar = self.sig.predicates.get(name)
            if ar is None:
                raise UnknownSymbol(f"unknown predicate {name}")
            if ar != len(args):
                raise UnknownSymbol(f"predicate {name} expects {ar} arguments, got {len(args)}")
        return Atom(name, args)

    def term(self):
        name = self.take()
        if not re.match(r"[A-Za-z_]", name):
            raise FormulaSyntaxError(f"expected a term, found {name!r}")
        if self.peek() == "(":
            self.take()
            args = [self.term()]
            while self.peek() == ",":
                self.take()
                args.append(self.term())
            self.take(")")
            if self.sig is not None:
                fn = self.sig.functions.get(name)
                if fn is None:
                    raise UnknownSymbol(f"unknown function {name}")
                if fn[0] != len(args):
                    raise UnknownSymbol(f"function {name} expects {fn[0]} arguments")
            return TFun(name, tuple(args))
        if self.sig is not None and name in self.sig.constants:
            return TConst(name)
        return TVar(name)


def parse_formula(text: str, sig: Signature | None = None):
    """Parse a formula; identifiers that are not declared constants are variables."""
    p = _FParser(text, sig)
    f = p.formula()
    if p.peek() is not None:
        raise FormulaSyntaxError(f"trailing input {p.peek()!r}", p.toks[p.i][1] + 1)
    return f


# ---------------------------------------------------------------------------
# Variables and grounding


def _term_vars(t) -> set:
    match t:
        case TVar(n):
            return {n}
        case TConst(_):
            return set()
        case TFun(_, args):
            return set().union(*(_term_vars(a) for a in args))
    raise TypeError(t)


def formula_free_vars(f) -> list:
    """Free variables in order of first occurrence."""
    out: list = []

    def go(g, bound):
        match g:
            case Atom(_, args):
                for a in args:
                    for v in sorted(_term_vars(a)):
                        if v not in bound and v not in out:
                            out.append(v)
            case Not(b):
                go(b, bound)
            case And(l, r) | Or(l, r) | Implies(l, r):
                go(l, bound)
                go(r, bound)
            case Forall(v, b) | Exists(v, b):
                go(b, bound | {v})
    go(f, frozenset())
    return out


def _subst_term(t, env: dict):
    match t:
        case TVar(n):
            return env.get(n, t)
        case TConst(_):
            return t
        case TFun(n, args):
            return TFun(n, tuple(_subst_term(a, env) for a in args))
    raise TypeError(t)


def instantiate(f, env: dict):
    """Replace free variables by the terms in ``env``."""
    match f:
        case Atom(p, args):
            return Atom(p, tuple(_subst_term(a, env) for a in args))
        case Not(b):
            return Not(instantiate(b, env))
        case And(l, r) | Or(l, r) | Implies(l, r):
            return type(f)(instantiate(l, env), instantiate(r, env))
        case Forall(v, b) | Exists(v, b):
            inner = {k: t for k, t in env.items() if k != v}
            return type(f)(v, instantiate(b, inner))
    return f


def groundings(f, sig: Signature) -> list:
    """One formula per assignment of constants to the free variables."""
    fv = formula_free_vars(f)
    if not fv:
        return [f]
    return [instantiate(f, {v: TConst(c) for v, c in zip(fv, combo)})
            for combo in cartesian(sig.constants, repeat=len(fv))]


def _eval_term(t, sig: Signature) -> str:
    match t:
        case TConst(n):
            if n not in sig.constants:
                raise UnknownSymbol(f"unknown constant {n}")
            return n
        case TVar(n):
            raise UnknownSymbol(f"variable {n} is not bound")
        case TFun(n, args):
            fn = sig.functions.get(n)
            if fn is None:
                raise UnknownSymbol(f"unknown function {n}")
            vals = tuple(_eval_term(a, sig) for a in args)
            table = fn[1]
            if vals not in table:
                raise MissingFunctionTable(f"no table entry for {n}{vals}")
            return table[vals]
    raise TypeError(t)


def _fold(op, parts, empty):
    if not parts:
        return empty
    out = parts[0]
    for p in parts[1:]:
        out = op(out, p)
    return out


def expand(f, sig: Signature):
    """Quantifier-free ground formula: quantifiers become finite conjunctions or
    disjunctions over the constants and function terms are looked up."""
    match f:
        case Atom(p, args):
            if p not in sig.predicates:
                raise UnknownSymbol(f"unknown predicate {p}")
            if sig.predicates[p] != len(args):
                raise UnknownSymbol(f"predicate {p} expects {sig.predicates[p]} arguments")
            return Atom(p, tuple(TConst(_eval_term(a, sig)) for a in args))
        case Not(b):
            return Not(expand(b, sig))
        case And(l, r) | Or(l, r) | Implies(l, r):
            return type(f)(expand(l, sig), expand(r, sig))
        case Forall(v, b):
            return _fold(And, [expand(instantiate(b, {v: TConst(c)}), sig)
                               for c in sig.constants], Top())
        case Exists(v, b):
            return _fold(Or, [expand(instantiate(b, {v: TConst(c)}), sig)
                              for c in sig.constants], Bottom())
    return f


def atoms_of(f) -> list:
    out: list = []

    def go(g):
        match g:
            case Atom():
                if g not in out:
                    out.append(g)
            case Not(b) | Forall(_, b) | Exists(_, b):
                go(b)
            case And(l, r) | Or(l, r) | Implies(l, r):
                go(l)
                go(r)
    go(f)
    return out


class AtomIndex:
    """Ordered ground atoms: predicates in the given order, arguments row-major."""

    def __init__(self, sig: Signature, predicates: list | None = None):
        preds = list(sig.predicates) if predicates is None else predicates
        self.atoms: list[Atom] = []
        for p in preds:
            for args in cartesian(sig.constants, repeat=sig.predicates[p]):
                self.atoms.append(Atom(p, tuple(TConst(c) for c in args)))
        self.pos = {a: i for i, a in enumerate(self.atoms)}

    def __len__(self):
        return len(self.atoms)

    def __getitem__(self, atom: Atom) -> int:
        try:
            return self.pos[atom]
        except KeyError:
            raise UnknownSymbol(f"ground atom {show(atom)} is not in the index") from None

    def names(self) -> list[str]:
        return [show(a) for a in self.atoms]


def evaluate(f, world, index: AtomIndex | None = None, sig: Signature | None = None) -> bool:
    """Classical truth value.  ``world`` maps atoms to booleans, or is a bit
    sequence addressed through ``index``.  Quantifiers need ``sig``."""
    def val(a):
        if index is None:
            return bool(world[a])
        return bool(world[index[a]])

    match f:
        case Atom():
            if sig is not None and any(not isinstance(t, TConst) for t in f.args):
                f = expand(f, sig)
            return val(f)
        case Top():
            return True
        case Bottom():
            return False
        case Not(b):
            return not evaluate(b, world, index, sig)
        case And(l, r):
            return evaluate(l, world, index, sig) and evaluate(r, world, index, sig)
        case Or(l, r):
            return evaluate(l, world, index, sig) or evaluate(r, world, index, sig)
        case Implies(l, r):
            return (not evaluate(l, world, index, sig)) or evaluate(r, world, index, sig)
        case Forall() | Exists():
            if sig is None:
                raise ValueError("quantified formula needs a signature")
            return evaluate(expand(f, sig), world, index, sig)
    raise TypeError(f)


def compile_formulas(formulas: list, index: AtomIndex) -> tuple[np.ndarray, np.ndarray]:
    """Postfix programs for quantifier-free ground formulas.

    Returns ``code`` of shape (n, 2) holding (opcode, atom) and ``offsets``
    delimiting each formula.
    """
    code: list = []
    offsets = [0]

    def emit(g):
        match g:
            case Atom():
                code.append((OP_ATOM, index[g]))
            case Top():
                code.append((OP_TRUE, 0))
            case Bottom():
                code.append((OP_FALSE, 0))
            case Not(b):
                emit(b)
                code.append((OP_NOT, 0))
            case And(l, r) | Or(l, r) | Implies(l, r):
                emit(l)
                emit(r)
                op = {And: OP_AND, Or: OP_OR, Implies: OP_IMPLIES}[type(g)]
                code.append((op, 0))
            case _:
                raise ValueError(f"compile needs a quantifier-free formula: {show(g)}")

    for f in formulas:
        emit(f)
        offsets.append(len(code))
    arr = np.array(code, dtype=np.int32).reshape(-1, 2)
    return arr, np.array(offsets, dtype=np.int64)
