"""The compiled and the pure numeric kernels must agree exactly."""

import random
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdts import kernels
from pdts.logic import AtomIndex, Signature, compile_formulas, parse_formula
from pdts.mln import ground, parse_mln
from pdts.sampler import compile_graph

from corpus import legal_corpus

needs_compiled = pytest.mark.skipif(kernels.compiled is None, reason="extension not built")


def _network(seed):
    rng = random.Random(seed)
    preds = ["P", "Q", "R"]
    lines = [f"predicate {p}/1" for p in preds] + ["predicate S/2", "constant a b"]
    lits = ["P(x)", "Q(a)", "R(b)", "S(x, a)", "S(b, b)", "P(b)"]
    for _ in range(rng.randint(0, 6)):
        x, y = rng.sample(lits, 2)
        op = rng.choice(["->", "&", "|"])
        lines.append(f"{rng.uniform(-2, 2)!r} :: {rng.choice(['', '~'])}{x} {op} {y}")
    return ground(parse_mln("\n".join(lines)))


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_eval_all_agree(seed):
    n = _network(seed)
    if not len(n.formulas):
        return
    a = kernels.pure.eval_all(n.code, n.offsets, n.n_atoms)
    b = kernels.compiled.eval_all(n.code, n.offsets, n.n_atoms)
    assert np.array_equal(a, b)


@needs_compiled
@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32))
def test_world_log_weights_agree(seed):
    n = _network(seed)
    z = np.zeros_like(n.weights)
    a = kernels.pure.world_log_weights(n.code, n.offsets, n.weights, z, n.n_atoms)
    b = kernels.compiled.world_log_weights(n.code, n.offsets, n.weights, z, n.n_atoms)
    assert np.allclose(a, b, atol=1e-12, rtol=0)


@needs_compiled
def test_walk_agrees():
    for e in legal_corpus(30, seed=8):
        g = compile_graph(e)
        u = np.random.default_rng(0).random((3000, max(g.depth, 1)))
        a = kernels.pure.walk(g.offsets, g.cum, g.targets, g.leaf_of, g.root, u)
        b = kernels.compiled.walk(g.offsets, g.cum, g.targets, g.leaf_of, g.root, u)
        assert np.array_equal(a, b)


def test_constant_formulas():
    sig = Signature({"A": 1}, ["c"], {})
    idx = AtomIndex(sig)
    code, off = compile_formulas([parse_formula(s, sig) for s in ("true", "false", "A(c)")], idx)
    table = kernels.eval_all(code, off, 1)
    assert table.tolist() == [[1, 1], [0, 0], [0, 1]]


def test_pure_backend_by_environment():
    out = subprocess.run([sys.executable, "-c", "from pdts import kernels; print(kernels.BACKEND)"],
                         env={"PDTS_PURE": "1", "PATH": ""}, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
