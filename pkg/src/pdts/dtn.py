"""Dependent Type Networks: language contexts, formulas as types, the canonical
query program, and exact and sampled query probabilities."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from itertools import product as cartesian

import numpy as np

from . import kernels
from .kernel import DEFAULT_FUEL, infer_type, nf
from .logic import (
    And, Atom, AtomIndex, Bottom, Exists, Forall, FormulaSyntaxError, Implies, Not,
    Or, Signature, TConst, TFun, Top, TVar, UnknownSymbol, _eval_term,
    compile_formulas, evaluate, expand, formula_free_vars, parse_formula, show,
)
from .mln import parse_function_table
from .syntax import (
    BOOL, ONE, STAR, UNIT, App, Context, Dispatch, Expr, If, Lam, Pair, Pi, Random, Sigma,
    Var, alpha_key, arrow, fresh_name, product, tuple_type, tuple_value,
)

__all__ = [
    "DtnSpec", "DtnFormula", "QueryProgram", "TooManyAtoms", "AllSamplesRejected",
    "DuplicateName", "DtnSyntaxError", "SampledQuery", "parse_dtn", "format_dtn",
    "atom_index", "build_language_context", "formula_to_type", "build_query_program",
    "consistent", "consistency_table", "world_probs", "world_prob", "query_exact",
    "query_sampled", "program_outcomes", "DEFAULT_ATOM_CAP",
]

DEFAULT_ATOM_CAP = 20
_RESERVED = {"Bool", "Unit", "true", "false", "unit", "Pi", "Sigma",
             "if", "then", "else", "fst", "snd", "pair", "random", "case", "let",
             "in", "Box"}
WITNESS = {"yes": "r_Q", "no": "s_Q", "bot": "k_Q"}


class TooManyAtoms(ValueError):
    pass


class AllSamplesRejected(RuntimeError):
    pass


class DuplicateName(ValueError):
    pass


class DtnSyntaxError(ValueError):
    def __init__(self, msg: str, line: int):
        super().__init__(f"line {line}: {msg}")
        self.line = line


@dataclass(frozen=True)
class DtnFormula:
    name: str
    formula: object
    p: float

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise ValueError(f"formula {self.name}: weight {self.p} must lie in (0, 1)")


@dataclass
class DtnSpec:
    sig: Signature
    unary: list = field(default_factory=list)
    binary: list = field(default_factory=list)
    formulas: list = field(default_factory=list)   # [DtnFormula]

    @property
    def n_atoms(self) -> int:
        n = len(self.sig.constants)
        return len(self.unary) * n + len(self.binary) * n * n

    def _taken(self) -> set:
        names = set(self.sig.constants) | set(self.sig.predicates) | set(self.sig.functions)
        for f in self.formulas:
            names.add(f.name)
            names |= _bound_names(f.formula)
        return names

    @property
    def domain(self) -> Var:
        """The domain type, ``A`` unless a symbol already uses that name."""
        return Var(fresh_name("A", self._taken()))

    @property
    def bot(self) -> Var:
        """The contradiction type, ``Bot`` unless that name is taken."""
        return Var(fresh_name("Bot", self._taken() | {self.domain.name}))


def _bound_names(f) -> set:
    match f:
        case Forall(v, b) | Exists(v, b):
            return {v} | _bound_names(b)
        case Not(b):
            return _bound_names(b)
        case And(l, r) | Or(l, r) | Implies(l, r):
            return _bound_names(l) | _bound_names(r)
    return set()


# ---------------------------------------------------------------------------
# Files


def parse_dtn(text: str) -> DtnSpec:
    """Parse the line-oriented DTN format (see README)."""
    sig = Signature()
    spec = DtnSpec(sig)
    pending = []
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, _, rest = line.partition(" ")
        try:
            match head:
                case "domain":
                    for i in range(1, int(rest) + 1):
                        sig.add_constant(f"c{i}")
                case "constants" | "constant":
                    for c in rest.replace(",", " ").split():
                        sig.add_constant(c)
                case "unary":
                    for p in rest.replace(",", " ").split():
                        sig.add_predicate(p, 1)
                        spec.unary.append(p)
                case "binary":
                    for p in rest.replace(",", " ").split():
                        sig.add_predicate(p, 2)
                        spec.binary.append(p)
                case "function":
                    m = re.fullmatch(r"function\s+(\w+)\s*/\s*(\d+)\s*\{(.*)\}\s*", line)
                    if not m:
                        raise ValueError("expected 'function g/n { c1 -> c2; ... }'")
                    name, arity, table = parse_function_table(m, sig.constants)
                    if arity not in (1, 2):
                        raise ValueError("only unary and binary functions are supported")
                    sig.add_function(name, arity, table)
                case "formula":
                    m = re.fullmatch(r"(\w+)\s*:\s*(.+?)\s*@\s*(w\s+)?([-+0-9.eE]+)", rest)
                    if not m:
                        raise ValueError("expected 'formula name : F @ p' or '@w w'")
                    val = float(m.group(4))
                    if m.group(3):
                        if val <= 0:
                            raise ValueError("an MLN-style weight must be positive")
                        p = -math.expm1(-val)
                    else:
                        p = val
                    pending.append((no, m.group(1), m.group(2), p))
                case _:
                    raise ValueError(f"unrecognised line {line!r}")
        except (ValueError, FormulaSyntaxError) as exc:
            raise DtnSyntaxError(str(exc), no) from None
    if not sig.constants:
        raise DtnSyntaxError("a domain or constant list is required", 0)
    taken = build_language_context(spec).names() | set(WITNESS.values())
    names = set()
    for no, name, text_f, p in pending:
        if name in names:
            raise DtnSyntaxError(f"duplicate formula name {name}", no)
        if name in taken:
            raise DuplicateName(f"line {no}: formula name {name} clashes with the language")
        names.add(name)
        try:
            f = parse_formula(text_f, sig)
            if formula_free_vars(f):
                raise ValueError(f"formula {name} has free variables")
            spec.formulas.append(DtnFormula(name, f, p))
        except ValueError as exc:
            raise DtnSyntaxError(str(exc), no) from None
    return spec


def format_dtn(spec: DtnSpec) -> str:
    lines = ["constants " + " ".join(spec.sig.constants)]
    if spec.unary:
        lines.append("unary " + " ".join(spec.unary))
    if spec.binary:
        lines.append("binary " + " ".join(spec.binary))
    for name, (arity, table) in spec.sig.functions.items():
        body = "; ".join(f"{', '.join(k)} -> {v}" for k, v in table.items())
        lines.append(f"function {name}/{arity} {{ {body} }}")
    for f in spec.formulas:
        lines.append(f"formula {f.name} : {show(f.formula)} @ {f.p!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Language context and formulas as types


def atom_index(spec: DtnSpec) -> AtomIndex:
    """Ground atoms, unary predicates first, arguments row-major."""
    return AtomIndex(spec.sig, spec.unary + spec.binary)


def _atom_type(spec: DtnSpec, pred: str, args: list[Expr]) -> Expr:
    if len(args) == 1:
        return App(Var(pred), args[0])
    d = spec.domain
    return App(Var(pred), Pair(args[0], args[1], product(d, d)))


def _proof_name(atom: Atom, polarity: int) -> str:
    return "b_" + "_".join([atom.pred] + [a.name for a in atom.args] + [str(polarity)])


def build_language_context(spec: DtnSpec) -> Context:
    """The language context: domain, contradiction, constants, predicates,
    functions, then proof constants for both polarities of every ground atom."""
    d, bot = spec.domain, spec.bot
    entries = [(d.name, STAR), (bot.name, STAR)]
    entries += [(c, d) for c in spec.sig.constants]
    entries += [(p, arrow(d, STAR)) for p in spec.unary]
    entries += [(p, arrow(product(d, d), STAR)) for p in spec.binary]
    for g, (arity, _) in spec.sig.functions.items():
        dom = d if arity == 1 else product(d, d)
        entries.append((g, arrow(dom, d)))
    for atom in atom_index(spec).atoms:
        t = _atom_type(spec, atom.pred, [Var(a.name) for a in atom.args])
        entries.append((_proof_name(atom, 1), t))
        entries.append((_proof_name(atom, 0), arrow(t, bot)))
    ctx = Context()
    for name, ty in entries:
        if name in _RESERVED:
            raise DuplicateName(f"{name} is reserved")
        if name in ctx:
            raise DuplicateName(f"{name} is declared twice")
        ctx = ctx.extend(name, ty)
    return ctx


def _term_expr(spec: DtnSpec, t) -> Expr:
    match t:
        case TVar(n):
            return Var(n)
        case TConst(n):
            return Var(n)
        case TFun(_, args) if all(isinstance(a, TConst) for a in args):
            # known functions: the table gives the denoted constant
            return Var(_eval_term(t, spec.sig))
        case TFun(g, (a,)):
            return App(Var(g), _term_expr(spec, a))
        case TFun(g, (_, _)):
            raise UnknownSymbol(f"binary function {g} applied to a variable is unsupported")
    raise TypeError(t)


def formula_to_type(spec: DtnSpec, f) -> Expr:
    """Formulas as types: conjunction is a product, disjunction a Bool-indexed
    sum, implication a function type, negation a map into ``Bot`` and the
    quantifiers dependent products and sums over the domain."""
    match f:
        case Atom(p, args):
            if p not in spec.sig.predicates:
                raise UnknownSymbol(f"unknown predicate {p}")
            return _atom_type(spec, p, [_term_expr(spec, a) for a in args])
        case Top():
            return UNIT
        case Bottom():
            return spec.bot
        case Not(b):
            return arrow(formula_to_type(spec, b), spec.bot)
        case And(l, r):
            return product(formula_to_type(spec, l), formula_to_type(spec, r))
        case Or(l, r):
            x, y = formula_to_type(spec, l), formula_to_type(spec, r)
            z = "z"
            while z in x.fv or z in y.fv:
                z += "_"
            return Sigma(z, BOOL, If(Var(z), x, y))
        case Implies(l, r):
            return arrow(formula_to_type(spec, l), formula_to_type(spec, r))
        case Forall(v, b):
            return Pi(v, spec.domain, formula_to_type(spec, b))
        case Exists(v, b):
            return Sigma(v, spec.domain, formula_to_type(spec, b))
    raise TypeError(f)


# ---------------------------------------------------------------------------
# The query program


@dataclass
class QueryProgram:
    ctx: Context
    program: Expr
    q_type: Expr
    outcome_types: dict   # "yes" / "no" / "bot" -> type
    n_levels: int


def consistent(spec: DtnSpec, world, j: int, index: AtomIndex | None = None) -> bool:
    """Whether formula ``j`` holds classically in ``world`` (a bit sequence)."""
    idx = index if index is not None else atom_index(spec)
    return evaluate(spec.formulas[j].formula, world, idx, spec.sig)


def build_query_program(spec: DtnSpec, q, cap: int = DEFAULT_ATOM_CAP) -> QueryProgram:
    """The canonical program whose reductions prove Q, refute Q, or hit ``Bot``.

    Each formula is kept (``f_i``) with its weight or dropped (``1``), every
    ground atom is proved or refuted with probability 1/2, and the resulting
    tuple is dispatched on its type to a witness of Q, of Q -> Bot, or of Bot.
    The per-case answer is decided by classical evaluation in the world the
    tuple type describes.
    """
    if spec.n_atoms > cap:
        raise TooManyAtoms(f"{spec.n_atoms} ground atoms exceed the cap of {cap}")
    index = atom_index(spec)
    base = build_language_context(spec)
    if _bound_names(q) & {spec.domain.name, spec.bot.name}:
        raise DuplicateName("a query variable clashes with the domain or contradiction type")
    q_type = formula_to_type(spec, q)
    ctx = base
    for f in spec.formulas:
        if f.name in ctx:
            raise DuplicateName(f"formula name {f.name} clashes with the language")
        ctx = ctx.extend(f.name, formula_to_type(spec, f.formula))
    bot = spec.bot
    outcome = {"yes": q_type, "no": arrow(q_type, bot), "bot": bot}
    for key, name in WITNESS.items():
        if name in ctx:
            raise DuplicateName(f"{name} is reserved for query witnesses")
        ctx = ctx.extend(name, outcome[key])
    if infer_type(base, q_type) != STAR:
        raise ValueError("query is not a proposition of the language")

    # one level per formula, then one per ground atom
    levels = []
    for f in spec.formulas:
        ft = nf(formula_to_type(spec, f.formula))
        levels.append((f.p, [(Var(f.name), ft), (ONE, UNIT)]))
    for atom in index.atoms:
        t = nf(_atom_type(spec, atom.pred, [Var(a.name) for a in atom.args]))
        levels.append((0.5, [(Var(_proof_name(atom, 1)), t),
                             (Var(_proof_name(atom, 0)), nf(arrow(t, bot)))]))

    n_f = len(spec.formulas)
    formulas = [expand(f.formula, spec.sig) for f in spec.formulas]
    q_ground = expand(q, spec.sig)
    code, offsets = compile_formulas(formulas + [q_ground], index)
    table = kernels.eval_all(code, offsets, len(index)).astype(bool)

    def build(level: int, vals: list, tys: list) -> Expr:
        if level == len(levels):
            return tuple_value(vals, tys)
        p, ((v1, t1), (v0, t0)) = levels[level]
        x = f"x{level + 1}"
        chooser = Random(p, Lam("y", BOOL, If(Var("y"), v1, v0)))
        return Dispatch(x, [(t1, build(level + 1, vals + [v1], tys + [t1])),
                            (t0, build(level + 1, vals + [v0], tys + [t0]))], chooser)

    cases = []
    for bits in cartesian((1, 0), repeat=len(levels)):
        tys = [levels[k][1][1 - b][1] for k, b in enumerate(bits)]
        world = 0
        for b in bits[n_f:]:
            world = (world << 1) | b
        kept = [j for j in range(n_f) if bits[j]]
        if any(not table[j, world] for j in kept):
            body = WITNESS["bot"]
        elif table[n_f, world]:
            body = WITNESS["yes"]
        else:
            body = WITNESS["no"]
        cases.append((tuple_type(tys), Var(body)))
    program = Dispatch("x", cases, build(0, [], []))
    return QueryProgram(ctx, program, q_type, outcome, len(levels))


def program_outcomes(qp: QueryProgram, leaves) -> dict:
    """Tally normal forms of the query program by outcome.

    ``leaves`` yields (normal form, weight); returns weights per outcome.
    """
    keys = {alpha_key(nf(t)): k for k, t in qp.outcome_types.items()}
    out = {"yes": 0.0, "no": 0.0, "bot": 0.0}
    for leaf, w in leaves:
        k = keys.get(alpha_key(infer_type(qp.ctx, leaf)))
        if k is None:
            raise RuntimeError(f"query program produced an unexpected normal form {leaf}")
        out[k] += w
    return out


# ---------------------------------------------------------------------------
# Exact inference


def consistency_table(spec: DtnSpec, cap: int = DEFAULT_ATOM_CAP) -> np.ndarray:
    """Bool array (n_formulas, 2**n_atoms): formula j holds in world w."""
    if spec.n_atoms > cap:
        raise TooManyAtoms(f"{spec.n_atoms} ground atoms exceed the cap of {cap}")
    index = atom_index(spec)
    formulas = [expand(f.formula, spec.sig) for f in spec.formulas]
    if not formulas:
        return np.zeros((0, 1 << len(index)), dtype=bool)
    code, offsets = compile_formulas(formulas, index)
    return kernels.eval_all(code, offsets, len(index)).astype(bool)


_BRUTE_LIMIT = 1 << 24


def _subset_sum(p: np.ndarray, patterns: np.ndarray) -> np.ndarray:
    """For each consistency bitmask, sum over subsets H of the formulas of
    P(exactly H kept), restricted to H inside the mask."""
    n = len(p)
    masks = np.arange(1 << n, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)
    prob_h = np.prod(np.where(bits, p[None, :], 1.0 - p[None, :]), axis=1)
    uniq, inv = np.unique(patterns, return_inverse=True)
    sums = np.array([math.fsum(prob_h[(masks & ~u) == 0]) for u in uniq])
    return sums[inv]


def world_probs(spec: DtnSpec, cap: int = DEFAULT_ATOM_CAP, method: str = "auto") -> np.ndarray:
    """Normalized distribution over worlds (lexicographic, unary atoms first).

    ``method`` is "subsets" (sum over every subset of formulas), "factor"
    (the per-formula product form) or "auto".
    """
    table = consistency_table(spec, cap)
    p = np.array([f.p for f in spec.formulas], dtype=np.float64)
    n_f = len(p)
    if method == "auto":
        n_patterns = len(np.unique(table, axis=1).T) if n_f else 1
        method = "subsets" if n_f <= 20 and (n_patterns << n_f) <= _BRUTE_LIMIT else "factor"
    if method == "subsets":
        patterns = np.zeros(table.shape[1], dtype=np.int64)
        for j in range(n_f):
            patterns |= table[j].astype(np.int64) << j
        w = _subset_sum(p, patterns)
    elif method == "factor":
        logw = np.zeros(table.shape[1])
        for j in range(n_f):
            logw += np.where(table[j], 0.0, math.log1p(-p[j]))
        w = np.exp(logw)
    else:
        raise ValueError(f"unknown method {method!r}")
    return w / math.fsum(w)


def world_prob(spec: DtnSpec, world, cap: int = DEFAULT_ATOM_CAP) -> float:
    """Probability of one world given as a bit sequence."""
    idx = 0
    for b in world:
        idx = (idx << 1) | int(bool(b))
    return float(world_probs(spec, cap)[idx])


def query_exact(spec: DtnSpec, q, cap: int = DEFAULT_ATOM_CAP) -> float:
    if isinstance(q, str):
        q = parse_formula(q, spec.sig)
    probs = world_probs(spec, cap)
    code, offsets = compile_formulas([expand(q, spec.sig)], atom_index(spec))
    mask = kernels.eval_all(code, offsets, spec.n_atoms)[0].astype(bool)
    return math.fsum(probs[mask])


# ---------------------------------------------------------------------------
# Sampling


@dataclass
class SampledQuery:
    estimate: float
    stderr: float
    n_samples: int
    n_rejected: int
    n_yes: int
    n_no: int


def query_sampled(spec: DtnSpec, q, n_samples: int, seed: int = 0, workers: int = 1,
                  cap: int = DEFAULT_ATOM_CAP, fuel: int = DEFAULT_FUEL) -> SampledQuery:
    """Monte Carlo estimate by reducing the query program and rejecting
    samples that land in ``Bot``."""
    from .sampler import compile_graph, run_chunks

    if isinstance(q, str):
        q = parse_formula(q, spec.sig)
    qp = build_query_program(spec, q, cap)
    g = compile_graph(qp.program, qp.ctx, fuel)
    counts = run_chunks(g, n_samples, seed, workers)
    tally = program_outcomes(qp, zip(g.leaves, counts.tolist()))
    yes, no, bot = int(tally["yes"]), int(tally["no"]), int(tally["bot"])
    kept = yes + no
    if kept == 0:
        raise AllSamplesRejected(f"all {n_samples} samples reduced to a contradiction")
    est = yes / kept
    return SampledQuery(est, math.sqrt(est * (1 - est) / kept), n_samples, bot, yes, no)
