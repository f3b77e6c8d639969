"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 input error (unreadable file,
syntax error, ill-typed term), 3 a computation cap was exceeded.
``--json`` prints one flat record with sorted keys; ``elapsed_ms`` is only
added with ``--timing`` so seeded runs stay byte-identical.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
import warnings

from . import bridge, dtn, mln, prob
from .kernel import DEFAULT_FUEL, FuelExhausted, NotTypable, check_judgment, infer_type, nf
from .logic import FormulaSyntaxError, parse_formula
from .prob import NOTYPE, DispatchAmbiguous, DispatchNoMatch, LeafCapExceeded, StuckTerm
from .sampler import GraphTooLarge, sample_counts
from .syntax import ParseError, parse, parse_program, pretty

__all__ = ["main", "run", "build_parser"]


class UsageError(Exception):
    pass


CAP_ERRORS = (mln.TooManyWorlds, dtn.TooManyAtoms, LeafCapExceeded, FuelExhausted, GraphTooLarge)
INPUT_ERRORS = (
    OSError, ParseError, NotTypable, FormulaSyntaxError, mln.MlnSyntaxError, dtn.DtnSyntaxError,
    dtn.DuplicateName, DispatchNoMatch, DispatchAmbiguous, StuckTerm, bridge.DimensionMismatch,
    dtn.AllSamplesRejected, ValueError,
)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _term(path: str):
    return parse_program(_read(path))


def _show_type(t) -> str:
    return "NOTYPE" if t is NOTYPE else pretty(t)


# ---------------------------------------------------------------------------
# Subcommands; each returns (record, text)


def cmd_check(a):
    ctx, e = _term(a.file)
    t = infer_type(ctx, e)
    return {"value": pretty(t)}, pretty(t)


def cmd_norm(a):
    ctx, e = _term(a.file)
    infer_type(ctx, e)
    v = nf(e, a.fuel)
    return {"value": pretty(v)}, pretty(v)


def cmd_types(a):
    ctx, e = _term(a.file)
    ts, rs = prob.types_and_reductions(ctx, e, a.fuel)
    types = sorted(_show_type(t) for t in ts)
    reds = sorted(pretty(r) for r in rs)
    legal = prob.is_legal(ctx, e, a.fuel)
    text = "\n".join(["TYPES: {" + ", ".join(types) + "}",
                      "REDUCTIONS: {" + ", ".join(reds) + "}",
                      f"legal: {str(legal).lower()}"])
    return {"value": types, "reductions": reds, "legal": legal}, text


def _dist_lines(dist: dict) -> list[tuple[str, float]]:
    return sorted((pretty(leaf), p) for leaf, p in dist.values())


def cmd_enumerate(a):
    ctx, e = _term(a.file)
    tree = prob.enumerate_tree(e, ctx, a.fuel, leaf_cap=a.cap_leaves)
    dist = _dist_lines(tree.leaf_distribution())
    rec = {"value": {k: p for k, p in dist}, "n_leaves": tree.n_leaves, "depth": tree.depth}
    if a.tree:
        rec["tree"] = tree.to_record()
    text = "\n".join(f"{p!r}\t{k}" for k, p in dist)
    return rec, text


def cmd_sample(a):
    ctx, e = _term(a.file)
    counts = sample_counts(e, a.samples, a.seed, ctx=ctx, fuel=a.fuel, workers=a.workers)
    rows = sorted((pretty(leaf), n) for leaf, n in counts.values())
    rec = {"value": {k: n / a.samples for k, n in rows}, "n_samples": a.samples}
    text = "\n".join(f"{n / a.samples!r}\t{k}" for k, n in rows)
    return rec, text


def cmd_judge(a):
    ctx, e = _term(a.file)
    ty = parse(a.type, ctx)
    infer_type(ctx, ty)
    if a.exact or not a.samples:
        v = prob.judge_prob(ctx, e, ty, "exact", fuel=a.fuel)
        return {"value": v}, repr(v)
    counts = sample_counts(e, a.samples, a.seed, ctx=ctx, fuel=a.fuel, workers=a.workers)
    hits = sum(n for leaf, n in counts.values() if check_judgment(ctx, leaf, ty))
    v = hits / a.samples
    se = math.sqrt(v * (1 - v) / a.samples)
    rec = {"value": v, "stderr_estimate": se, "n_samples": a.samples}
    return rec, f"{v!r} +/- {se!r}"


def cmd_mln_query(a):
    m = mln.parse_mln(_read(a.file))
    if not a.query:
        raise UsageError("--query is required")
    n = mln.ground(m)
    q = parse_formula(a.query, m.sig)
    ev = parse_formula(a.evidence, m.sig) if a.evidence else None
    v = mln.query_prob(n, q, ev, a.cap)
    return {"value": v}, repr(v)


def cmd_dtn_query(a):
    spec = dtn.parse_dtn(_read(a.file))
    if not a.query:
        raise UsageError("--query is required")
    q = parse_formula(a.query, spec.sig)
    exact = dtn.query_exact(spec, q, a.cap)
    if a.exact or not a.samples:
        return {"value": exact, "exact": exact}, repr(exact)
    s = dtn.query_sampled(spec, q, a.samples, a.seed, a.workers, a.cap, a.fuel)
    rec = {"value": s.estimate, "exact": exact, "stderr_estimate": s.stderr,
           "n_samples": s.n_samples, "n_rejected": s.n_rejected,
           "rejection_rate": s.n_rejected / s.n_samples}
    text = (f"estimate {s.estimate!r} +/- {s.stderr!r} (exact {exact!r}, "
            f"{s.n_rejected} of {s.n_samples} rejected)")
    return rec, text


def _report(a, src, dst, out_text):
    rep = bridge.verify_translation(src, dst)
    rec = {"value": out_text, "max_dev": rep.max_dev}
    if a.report:
        out_text += f"# max world-table deviation {rep.max_dev!r}\n"
    return rec, out_text.rstrip("\n")


def cmd_mln2dtn(a):
    m = mln.parse_mln(_read(a.file))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", bridge.ZeroWeight)
        spec = bridge.mln_to_dtn(m, simplified=a.simplify)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return _report(a, bridge.mln_table(m), bridge.dtn_table(spec), dtn.format_dtn(spec))


def cmd_dtn2mln(a):
    spec = dtn.parse_dtn(_read(a.file))
    m = bridge.dtn_to_mln(spec)
    return _report(a, bridge.dtn_table(spec), bridge.mln_table(m), mln.format_mln(m))


def cmd_verify(a):
    path = a.file
    if path.endswith(".mln"):
        m = mln.parse_mln(_read(path))
        spec = bridge.mln_to_dtn(m, simplified=a.simplify)
        src, dst = bridge.mln_table(m), bridge.dtn_table(spec)
    elif path.endswith(".dtn"):
        spec = dtn.parse_dtn(_read(path))
        src, dst = bridge.dtn_table(spec), bridge.mln_table(bridge.dtn_to_mln(spec))
    else:
        raise UsageError("verify expects a .mln or .dtn file")
    rep = bridge.verify_translation(src, dst)
    rec = {"value": rep.max_dev, "atoms": rep.source.atoms,
           "source": rep.source.probs.tolist(), "target": rep.target.probs.tolist()}
    lines = ["\t".join(["world", "source", "target"])]
    n = len(rep.source.atoms)
    for w, (p, q) in enumerate(zip(rep.source.probs.tolist(), rep.target.probs.tolist())):
        lines.append(f"{w:0{n}b}\t{p!r}\t{q!r}")
    lines.append(f"max deviation {rep.max_dev!r}")
    return rec, "\n".join(lines)


COMMANDS = {
    "check": (cmd_check, "type-check a deterministic term and print its type"),
    "norm": (cmd_norm, "print the normal form of a deterministic term"),
    "types": (cmd_types, "print the possible types and normal forms of a term"),
    "sample": (cmd_sample, "sample normal forms of a probabilistic term"),
    "enumerate": (cmd_enumerate, "exact distribution over normal forms"),
    "judge": (cmd_judge, "probability that a term reduces to an inhabitant of --type"),
    "mln-query": (cmd_mln_query, "exact query probability in a Markov logic network"),
    "dtn-query": (cmd_dtn_query, "query probability in a network of types"),
    "mln2dtn": (cmd_mln2dtn, "translate a Markov logic network into a network of types"),
    "dtn2mln": (cmd_dtn2mln, "translate a network of types into a Markov logic network"),
    "verify": (cmd_verify, "compare world tables before and after translation"),
}


def _positive(kind):
    def conv(s):
        v = kind(s)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"expected a positive value, got {s}")
        return v
    return conv


def _seed(s):
    v = int(s, 0)
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="pdts", description="Probabilistic dependent types and networks of types.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_) in COMMANDS.items():
        s = sub.add_parser(name, help=help_, description=help_)
        s.add_argument("file")
        s.add_argument("--json", action="store_true", help="print one flat JSON record")
        s.add_argument("--timing", action="store_true", help="add elapsed_ms to the output")
        s.add_argument("--fuel", type=_positive(int), default=DEFAULT_FUEL)
        if name in ("sample", "judge", "dtn-query"):
            s.add_argument("--seed", type=_seed, default=0)
            s.add_argument("--samples", type=_positive(int),
                           default=100_000 if name == "sample" else None)
            s.add_argument("--workers", type=_positive(int), default=1)
        if name in ("judge", "dtn-query"):
            s.add_argument("--exact", action="store_true", help="exact answer, no sampling")
        if name == "judge":
            s.add_argument("--type", required=True, help="the type to judge against")
        if name == "enumerate":
            s.add_argument("--cap-leaves", type=_positive(int), default=100_000)
            s.add_argument("--tree", action="store_true", help="include the tree in --json output")
        if name in ("mln-query", "dtn-query"):
            s.add_argument("--query", help="query formula")
        if name == "mln-query":
            s.add_argument("--evidence", help="formula held true")
            s.add_argument("--cap", type=_positive(int), default=mln.DEFAULT_WORLD_CAP,
                           help="maximum number of ground atoms")
        if name == "dtn-query":
            s.add_argument("--cap", type=_positive(int), default=dtn.DEFAULT_ATOM_CAP,
                           help="maximum number of ground atoms")
        if name in ("mln2dtn", "verify"):
            s.add_argument("--simplify", action="store_true",
                           help="write X -> false as ~X and drop double negations")
        if name in ("mln2dtn", "dtn2mln"):
            s.add_argument("--report", action="store_true",
                           help="append the world-table deviation as a comment")
    return p


def run(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"pdts: usage error: {exc}", file=err)
        return 1
    except SystemExit as exc:      # --help
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        rec, text = COMMANDS[args.command][0](args)
    except UsageError as exc:
        print(f"pdts: usage error: {exc}", file=err)
        return 1
    except CAP_ERRORS as exc:
        print(f"pdts: cap exceeded: {exc}", file=err)
        return 3
    except RecursionError:
        print("pdts: cap exceeded: expression nests too deeply", file=err)
        return 3
    except INPUT_ERRORS as exc:
        print(f"pdts: input error: {exc}", file=err)
        return 2
    elapsed = (time.perf_counter() - start) * 1000.0
    if args.json:
        if args.timing:
            rec["elapsed_ms"] = elapsed
        print(json.dumps(rec, sort_keys=True), file=out)
    else:
        print(text, file=out)
        if args.timing:
            print(f"elapsed_ms {elapsed:.3f}", file=err)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
