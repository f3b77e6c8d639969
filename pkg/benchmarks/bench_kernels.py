"""Compare the compiled kernels with the pure fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Each row reports the best wall time over the repeats for both backends and
checks that they return the same answer.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from pdts import kernels
from pdts.dtn import build_query_program, parse_dtn
from pdts.logic import parse_formula
from pdts.mln import ground, parse_mln
from pdts.sampler import compile_graph


def best_of(fn, repeat: int) -> tuple[float, object]:
    best, out = float("inf"), None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def mln_case(n_const: int, cancer: bool):
    consts = " ".join(f"c{i}" for i in range(1, n_const + 1))
    src = f"predicate Smokes/1\npredicate Friends/2\nconstant {consts}\n"
    src += "1.1 :: Friends(x, y) & Smokes(x) -> Smokes(y)\n0.4 :: Friends(x, y) -> Friends(y, x)\n"
    if cancer:
        src += "predicate Cancer/1\n1.5 :: Smokes(x) -> Cancer(x)\n"
    return ground(parse_mln(src))


def walk_case(n_samples: int):
    ln2 = 0.6931471805599453
    spec = parse_dtn("domain 2\nunary B1 B2\n"
                     f"formula f1 : B1(c1) -> B2(c1) @w {ln2!r}\n"
                     f"formula f2 : B1(c2) @w {ln2!r}\n"
                     f"formula f3 : B2(c2) | B1(c1) @w {ln2!r}\n")
    qp = build_query_program(spec, parse_formula("B2(c1)", spec.sig))
    g = compile_graph(qp.program, qp.ctx)
    u = np.random.default_rng(0).random((n_samples, max(g.depth, 1)))
    return g, u


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.compiled is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    impls = {"cython": kernels.compiled, "python": kernels.pure}
    rows = []

    for net in (mln_case(3, True), mln_case(4, False)):
        z = np.zeros_like(net.weights)
        size = f"{net.n_atoms} atoms, {len(net.formulas)} formulas"
        for name, run in [
            (f"eval_all ({size})", lambda k: k.eval_all(net.code, net.offsets, net.n_atoms)),
            (f"world_log_weights ({size})",
             lambda k: k.world_log_weights(net.code, net.offsets, net.weights, z, net.n_atoms)),
        ]:
            res = {b: best_of(lambda k=k: run(k), args.repeat) for b, k in impls.items()}
            same = np.allclose(res["cython"][1], res["python"][1], atol=1e-9, rtol=0)
            rows.append((name, res["cython"][0], res["python"][0], same))

    g, u = walk_case(200_000)
    res = {b: best_of(lambda k=k: k.walk(g.offsets, g.cum, g.targets, g.leaf_of, g.root, u),
                      args.repeat) for b, k in impls.items()}
    rows.append((f"walk ({len(u)} samples, {len(g.offsets) - 1} nodes)", res["cython"][0],
                 res["python"][0], np.array_equal(res["cython"][1], res["python"][1])))

    print(f"{'kernel':44} {'cython ms':>10} {'python ms':>10} {'speedup':>8}  agree")
    for name, tc, tp, same in rows:
        print(f"{name:44} {tc * 1e3:10.2f} {tp * 1e3:10.2f} {tp / tc:8.1f}x  {same}")


if __name__ == "__main__":
    main()
