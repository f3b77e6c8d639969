"""Translations between Markov Logic Networks and Dependent Type Networks."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dtn import DtnFormula, DtnSpec, atom_index, world_probs
from .logic import And, Atom, Bottom, Implies, Not, Or, Signature, TConst, expand, groundings
from .mln import Mln, ground, world_distribution

__all__ = [
    "DimensionMismatch", "ZeroWeight", "WorldTable", "TranslationReport",
    "mln_to_dtn", "dtn_to_mln", "verify_translation", "mln_table", "dtn_table",
    "canonical_mln", "simplify",
]


class DimensionMismatch(ValueError):
    pass


class ZeroWeight(UserWarning):
    """A zero-weight formula was dropped; it does not affect the distribution."""


@dataclass
class WorldTable:
    atoms: list          # ground atom names, most significant first
    probs: np.ndarray    # probability per world, lexicographic order


@dataclass
class TranslationReport:
    source: WorldTable
    target: WorldTable
    max_dev: float

    def to_record(self) -> dict:
        return {"value": self.max_dev, "atoms": self.source.atoms,
                "source": self.source.probs.tolist(), "target": self.target.probs.tolist()}


def simplify(f):
    """Rewrite ``X -> false`` as ``~X`` and drop double negations."""
    match f:
        case Implies(l, Bottom()):
            return simplify(Not(l))
        case Not(Not(b)):
            return simplify(b)
        case Not(b):
            inner = simplify(b)
            return inner.body if isinstance(inner, Not) else Not(inner)
        case And(l, r) | Or(l, r) | Implies(l, r):
            return type(f)(simplify(l), simplify(r))
    return f


def _dtn_signature(sig: Signature) -> tuple[list, list]:
    unary, binary = [], []
    for p, a in sig.predicates.items():
        if a == 1:
            unary.append(p)
        elif a == 2:
            binary.append(p)
        else:
            raise ValueError(f"predicate {p} has arity {a}; networks of types need arity 1 or 2")
    return unary, binary


def mln_to_dtn(m: Mln, simplified: bool = False) -> DtnSpec:
    """Ground ``m``, flip the sign of positive weights by negating the formula,
    and emit ``F' -> false`` with probability ``1 - exp(w')``."""
    unary, binary = _dtn_signature(m.sig)
    sig = Signature(dict(m.sig.predicates), list(m.sig.constants), dict(m.sig.functions))
    spec = DtnSpec(sig, unary, binary)
    k = 0
    for f, w in m.weighted:
        for g in groundings(f, m.sig):
            g = expand(g, m.sig)
            if w == 0:
                warnings.warn("dropping zero-weight formula", ZeroWeight, stacklevel=2)
                continue
            f1, w1 = (g, w) if w <= 0 else (Not(g), -w)
            f2 = Implies(f1, Bottom())
            if simplified:
                f2 = simplify(f2)
            p = -math.expm1(w1)
            if not 0.0 < p < 1.0:
                raise ValueError(f"weight {w} is too large in magnitude to represent")
            k += 1
            spec.formulas.append(DtnFormula(f"f{k}", f2, p))
    return spec


def dtn_to_mln(d: DtnSpec) -> Mln:
    """One weighted formula ``(~F, log(1 - p))`` per network formula."""
    sig = Signature(dict(d.sig.predicates), list(d.sig.constants), dict(d.sig.functions))
    return Mln(sig, [(Not(f.formula), math.log1p(-f.p)) for f in d.formulas])


def mln_table(m: Mln, order: list | None = None) -> WorldTable:
    """World distribution of ``m`` with atoms ordered like a type network
    (unary predicates first) unless ``order`` says otherwise."""
    if order is None:
        try:
            u, b = _dtn_signature(m.sig)
            order = u + b
        except ValueError:
            order = None
    n = ground(m, order)
    return WorldTable(n.index.names(), world_distribution(n))


def dtn_table(d: DtnSpec) -> WorldTable:
    return WorldTable(atom_index(d).names(), world_probs(d))


def _permute(t: WorldTable, atoms: list) -> np.ndarray:
    n = len(atoms)
    pos = [t.atoms.index(a) for a in atoms]
    worlds = np.arange(1 << n, dtype=np.int64)
    src = np.zeros_like(worlds)
    for i, j in enumerate(pos):
        bit = (worlds >> (n - 1 - i)) & 1
        src |= bit << (n - 1 - j)
    return t.probs[src]


def verify_translation(src: WorldTable, dst: WorldTable) -> TranslationReport:
    """Largest absolute difference between two world tables.

    Tables over the same atoms in a different order are aligned first.
    """
    if sorted(src.atoms) != sorted(dst.atoms) or len(src.probs) != len(dst.probs):
        raise DimensionMismatch(f"atoms {src.atoms} and {dst.atoms} differ")
    other = dst.probs if src.atoms == dst.atoms else _permute(dst, src.atoms)
    dev = float(np.max(np.abs(src.probs - other))) if len(other) else 0.0
    return TranslationReport(src, WorldTable(src.atoms, other), dev)


def canonical_mln(probs, names: list | None = None) -> Mln:
    """An MLN reproducing a strictly positive distribution over n binary atoms.

    Atom ``i`` is the unary predicate ``P{i+1}`` applied to the single
    constant ``c1``; world ``x`` gets the conjunction of its literals with
    weight ``log p(x)``.
    """
    probs = np.asarray(probs, dtype=np.float64)
    n = int(round(math.log2(len(probs))))
    if len(probs) != 1 << n:
        raise ValueError("need 2**n probabilities")
    if np.any(probs <= 0):
        raise ValueError("the distribution must be strictly positive")
    names = names or [f"P{i + 1}" for i in range(n)]
    sig = Signature({p: 1 for p in names}, ["c1"], {})
    weighted = []
    for w, p in enumerate(probs):
        lits = []
        for i, name in enumerate(names):
            a = Atom(name, (TConst("c1"),))
            lits.append(a if (w >> (n - 1 - i)) & 1 else Not(a))
        conj = lits[0]
        for lit in lits[1:]:
            conj = And(conj, lit)
        weighted.append((conj, math.log(p)))
    return Mln(sig, weighted)
