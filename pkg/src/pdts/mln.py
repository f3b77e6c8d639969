"""Markov Logic Networks: grounding and exact inference by world enumeration."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .logic import (
    AtomIndex, FormulaSyntaxError, Signature, Top, compile_formulas, evaluate, expand,
    groundings, parse_formula, show,
)

__all__ = [
    "Mln", "GroundNetwork", "TooManyWorlds", "MlnSyntaxError", "parse_mln",
    "format_mln", "ground", "eval_formula", "world_weight", "world_log_weights",
    "world_distribution", "query_prob", "logsumexp", "DEFAULT_WORLD_CAP",
]

DEFAULT_WORLD_CAP = 24


class TooManyWorlds(ValueError):
    pass


class MlnSyntaxError(ValueError):
    def __init__(self, msg: str, line: int):
        super().__init__(f"line {line}: {msg}")
        self.line = line


@dataclass
class Mln:
    """Weighted first-order formulas over a finite signature."""

    sig: Signature
    weighted: list = field(default_factory=list)   # [(formula, weight)]

    def __post_init__(self):
        for _, w in self.weighted:
            if not math.isfinite(w):
                raise ValueError("weights must be finite")


@dataclass
class GroundNetwork:
    sig: Signature
    index: AtomIndex
    formulas: list          # quantifier-free ground formulas
    weights: np.ndarray
    sources: list           # index of the weighted formula each grounding came from
    code: np.ndarray
    offsets: np.ndarray

    @property
    def n_atoms(self) -> int:
        return len(self.index)


def logsumexp(a: np.ndarray) -> float:
    m = float(np.max(a))
    if not math.isfinite(m):
        return m
    return m + math.log(math.fsum(np.exp(a - m)))


# ---------------------------------------------------------------------------
# Files

_FUNC = re.compile(r"function\s+(\w+)\s*/\s*(\d+)\s*\{(.*)\}\s*$")


def parse_function_table(m: re.Match, sig_constants: list) -> tuple[str, int, dict]:
    name, arity, body = m.group(1), int(m.group(2)), m.group(3)
    table = {}
    for entry in filter(None, (e.strip() for e in body.split(";"))):
        if "->" not in entry:
            raise ValueError(f"bad table entry {entry!r}")
        lhs, rhs = (s.strip() for s in entry.split("->", 1))
        args = tuple(a.strip() for a in lhs.split(","))
        if len(args) != arity:
            raise ValueError(f"entry {entry!r} does not have {arity} arguments")
        for c in args + (rhs,):
            if c not in sig_constants:
                raise ValueError(f"unknown constant {c!r} in function table")
        table[args] = rhs
    return name, arity, table


def parse_mln(text: str) -> Mln:
    """Parse the line-oriented MLN format (see README)."""
    sig = Signature()
    pending: list = []
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            if line.startswith("predicate "):
                m = re.fullmatch(r"predicate\s+(\w+)\s*/\s*(\d+)", line)
                if not m:
                    raise ValueError("expected 'predicate Name/arity'")
                sig.add_predicate(m.group(1), int(m.group(2)))
            elif line.startswith("constant "):
                for c in line.split()[1:]:
                    sig.add_constant(c.strip(","))
            elif line.startswith("function "):
                m = _FUNC.fullmatch(line)
                if not m:
                    raise ValueError("expected 'function g/n { c1 -> c2; ... }'")
                name, arity, table = parse_function_table(m, sig.constants)
                sig.add_function(name, arity, table)
            elif "::" in line:
                w, f = line.split("::", 1)
                pending.append((no, float(w), f.strip()))
            else:
                raise ValueError(f"unrecognised line {line!r}")
        except (ValueError, FormulaSyntaxError) as exc:
            raise MlnSyntaxError(str(exc), no) from None
    if not sig.constants:
        raise MlnSyntaxError("at least one constant is required", 0)
    weighted = []
    for no, w, f in pending:
        try:
            weighted.append((parse_formula(f, sig), w))
        except ValueError as exc:
            raise MlnSyntaxError(str(exc), no) from None
    return Mln(sig, weighted)


def format_mln(m: Mln) -> str:
    lines = [f"predicate {p}/{a}" for p, a in m.sig.predicates.items()]
    lines += [f"constant {c}" for c in m.sig.constants]
    for name, (arity, table) in m.sig.functions.items():
        body = "; ".join(f"{', '.join(k)} -> {v}" for k, v in table.items())
        lines.append(f"function {name}/{arity} {{ {body} }}")
    lines += [f"{w!r} :: {show(f)}" for f, w in m.weighted]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Grounding and inference


def ground(m: Mln, predicate_order: list | None = None) -> GroundNetwork:
    """One ground formula per substitution of constants for free variables."""
    index = AtomIndex(m.sig, predicate_order)
    formulas, weights, sources = [], [], []
    for i, (f, w) in enumerate(m.weighted):
        for g in groundings(f, m.sig):
            formulas.append(expand(g, m.sig))
            weights.append(w)
            sources.append(i)
    code, offsets = compile_formulas(formulas, index)
    return GroundNetwork(m.sig, index, formulas, np.array(weights, dtype=np.float64),
                         sources, code, offsets)


def eval_formula(g, world, index: AtomIndex | None = None) -> bool:
    return evaluate(g, world, index)


def world_weight(n: GroundNetwork, world) -> float:
    """Unnormalized weight: product over satisfied ground formulas of exp(w)."""
    s = math.fsum(w for f, w in zip(n.formulas, n.weights) if evaluate(f, world, n.index))
    return math.exp(s)


def _check_cap(n_atoms: int, cap: int) -> None:
    if n_atoms > cap:
        raise TooManyWorlds(f"{n_atoms} ground atoms exceed the cap of {cap}")


def world_log_weights(n: GroundNetwork, cap: int = DEFAULT_WORLD_CAP) -> np.ndarray:
    _check_cap(n.n_atoms, cap)
    zeros = np.zeros_like(n.weights)
    return kernels.world_log_weights(n.code, n.offsets, n.weights, zeros, n.n_atoms)


def _truth(n: GroundNetwork, formula) -> np.ndarray:
    g = expand(formula, n.sig)
    code, offsets = compile_formulas([g], n.index)
    return kernels.eval_all(code, offsets, n.n_atoms)[0].astype(bool)


def world_distribution(n: GroundNetwork, evidence=None, cap: int = DEFAULT_WORLD_CAP) -> np.ndarray:
    """Normalized probability of every world (lexicographic order).

    ``evidence`` is a formula held with certainty: worlds violating it get
    probability zero, the limit of conditioning on a formula of infinite weight.
    """
    lw = world_log_weights(n, cap)
    if evidence is not None:
        mask = _truth(n, evidence)
        if not mask.any():
            raise ValueError("evidence is unsatisfiable")
        lw = np.where(mask, lw, -np.inf)
    return np.exp(lw - logsumexp(lw))


def query_prob(n: GroundNetwork, q, evidence=None, cap: int = DEFAULT_WORLD_CAP) -> float:
    """P(q) summed over the worlds satisfying ``q``."""
    if isinstance(q, str):
        q = parse_formula(q, n.sig)
    if isinstance(evidence, str):
        evidence = parse_formula(evidence, n.sig)
    probs = world_distribution(n, evidence, cap)
    if isinstance(q, Top):
        return 1.0
    return math.fsum(probs[_truth(n, q)])
