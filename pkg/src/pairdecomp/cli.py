"""Command-line harness: generate inputs, run constructions, check oracles, report.

Reports are JSON lines with a fixed field order (see ``REPORT_FIELDS``)
plus a CSV projection of the scalar columns.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .geometry import GeometryError, PointSet, read_points, write_points
from .pairs import (ORACLE_LIMIT, DecompositionError, decomposition_stats, failing_pairs,
                    verify_coverage, write_decomposition)
from .quadtree import wspd_general
from .separator import separator_spanner_build, verify_separator, write_certificate
from .spanner import graph_stats, spanner_from_sspd, stretch_factor, write_graph
from .sspd import SspdConfig, sspd_optimal, sspd_simple

GENERATORS = ("uniform", "lattice", "clustered", "expspread")
COMMANDS = ("wspd", "sspd-simple", "sspd-opt", "sspd-opt-reduced", "spanner", "sep-spanner")
STRETCH_GUARD = 2048
SCHEMA_VERSION = 1

REPORT_FIELDS = (
    "schema", "command", "generator", "input", "n", "d", "seed",
    "eps", "t", "psi", "rho",
    "pair_count", "weight", "max_pairs_per_point",
    "edges", "max_degree", "separator_size", "stretch",
    "verdicts", "witness", "status", "error", "artifacts", "durations",
)
CSV_FIELDS = (
    "command", "generator", "n", "d", "seed", "eps", "pair_count", "weight",
    "max_pairs_per_point", "edges", "max_degree", "separator_size", "stretch",
    "status", "build_s", "verify_s",
)

EXIT_OK, EXIT_ORACLE, EXIT_USAGE = 0, 1, 2


def generate_points(kind: str, n: int, d: int, seed: int = 1) -> PointSet:
    """Synthetic inputs. ``lattice`` and ``expspread`` ignore the seed."""
    if kind not in GENERATORS:
        raise ValueError(f"unknown generator {kind!r}")
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 1 <= d <= 8:
        raise ValueError("dimension must lie in 1..8")
    rng = np.random.default_rng(seed)
    if kind == "uniform":
        return PointSet(rng.random((n, d)))
    if kind == "lattice":
        k = 1
        while k ** d < n:
            k += 1
        grid = np.indices((k,) * d).reshape(d, -1).T[:n]
        return PointSet(grid.astype(np.float64))
    if kind == "clustered":
        m = math.isqrt(n - 1) + 1
        centers = rng.random((m, d))
        labels = np.arange(n) % m
        return PointSet(centers[labels] + 0.02 * rng.standard_normal((n, d)))
    if n > 500:
        raise ValueError("expspread supports n <= 500 (coordinates must stay below 2^500)")
    coords = np.zeros((n, d))
    coords[:, 0] = 2.0 ** np.arange(n)
    i = np.arange(1, n + 1)
    for j in range(1, d):
        # fractional parts of a Weyl sequence: tiny, deterministic, distinct
        coords[:, j] = 1e-3 * np.modf(i * (math.sqrt(2) * j + 0.5))[0]
    return PointSet(coords)


@dataclass
class RunReport:
    command: str
    generator: Optional[str] = None
    input: Optional[str] = None
    n: Optional[int] = None
    d: Optional[int] = None
    seed: Optional[int] = None
    eps: Optional[float] = None
    t: Optional[int] = None
    psi: Optional[float] = None
    rho: Optional[float] = None
    pair_count: Optional[int] = None
    weight: Optional[int] = None
    max_pairs_per_point: Optional[int] = None
    edges: Optional[int] = None
    max_degree: Optional[int] = None
    separator_size: Optional[int] = None
    stretch: Optional[float] = None
    verdicts: dict = field(default_factory=dict)
    witness: Optional[str] = None
    status: str = "ok"
    error: Optional[str] = None
    artifacts: list = field(default_factory=list)
    durations: dict = field(default_factory=dict)
    schema: int = SCHEMA_VERSION

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.status == "ok" else EXIT_ORACLE

    def to_dict(self) -> dict:
        return {k: _json_value(getattr(self, k)) for k in REPORT_FIELDS}

    def fail(self, oracle: str, witness: str) -> None:
        self.verdicts[oracle] = False
        if self.status == "ok":
            self.status = "oracle-failure"
            self.witness = f"{oracle}: {witness}"


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return _json_value(float(v))
    return v


def _check_decomposition(rep: RunReport, W, P: PointSet, exactly_once: bool) -> None:
    if P.n > ORACLE_LIMIT:
        return
    cov = verify_coverage(W, P, exactly_once=exactly_once)
    rep.verdicts["coverage"] = bool(cov.ok)
    if not cov.ok:
        if len(cov.missing_pairs):
            i, j = cov.missing_pairs[0]
            rep.fail("coverage", f"pair ({int(i)}, {int(j)}) not covered")
        else:
            rep.fail("coverage", "a point pair is covered more than once")
    bad = failing_pairs(W, P)
    rep.verdicts["separation"] = not bad
    if bad:
        pr = bad[0]
        rep.fail("separation", f"{pr.tag} pair {pr.left.tolist()} | {pr.right.tolist()}")


def _check_stretch(rep: RunReport, G, P: PointSet, eps: float) -> None:
    if P.n > STRETCH_GUARD:
        return
    value, wit = stretch_factor(G, P, return_witness=True)
    rep.stretch = value
    ok = value <= 1 + eps + 1e-9
    rep.verdicts["stretch"] = ok
    if not ok:
        rep.fail("stretch", f"stretch {value!r} at pair {wit}")


def run_pipeline(cmd: str, input_path, params: Optional[dict] = None, verify: bool = False,
                 out_dir=None, descriptor: Optional[dict] = None) -> RunReport:
    """Run one construction on a point file and return its report.

    ``params`` holds ``eps`` and ``seed``. Artifacts go to ``out_dir``
    (default: the input's directory) under the input's stem.
    """
    if cmd not in COMMANDS:
        raise ValueError(f"unknown command {cmd!r}")
    params = dict(params or {})
    eps = float(params.get("eps", 0.5))
    seed = int(params.get("seed", 1))
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    input_path = Path(input_path)
    with open(input_path) as fh:
        P = read_points(fh)
    out_dir = Path(out_dir) if out_dir is not None else input_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"{input_path.stem}.{cmd}"
    desc = descriptor or {}
    rep = RunReport(cmd, generator=desc.get("generator", "file"), input=input_path.name,
                    n=P.n, d=P.dim, seed=seed, eps=eps)
    X = P.all_indices()

    def dump(suffix, writer, obj):
        path = out_dir / f"{stem}.{suffix}"
        with open(path, "w") as fh:
            writer(obj, fh)
        rep.artifacts.append(path.name)

    t0 = time.perf_counter()
    try:
        W = G = cert = None
        if cmd == "wspd":
            W, _, _ = wspd_general(X, P, eps)
        elif cmd == "sspd-simple":
            W = sspd_simple(X, P, eps, seed)
        elif cmd in ("sspd-opt", "sspd-opt-reduced"):
            cfg = SspdConfig(eps=eps, seed=seed, reduce=cmd == "sspd-opt-reduced")
            W, _ = sspd_optimal(X, P, cfg)
            rep.rho = cfg.rho
        elif cmd == "spanner":
            cfg = SspdConfig(eps=eps / 16, seed=seed)
            W, _ = sspd_optimal(X, P, cfg)
            G, _ = spanner_from_sspd(W, P, eps)
            rep.rho = cfg.rho
        else:
            build = separator_spanner_build(X, P, eps, seed)
            W, G, cert = build.sspd, build.graph, build.certificate
            rep.t = build.record.t
            rep.separator_size = int(len(cert.separator))
    except (GeometryError, DecompositionError) as exc:
        rep.status, rep.error = "error", str(exc)
        rep.durations["build_s"] = time.perf_counter() - t0
        return rep
    rep.durations["build_s"] = time.perf_counter() - t0

    st = decomposition_stats(W, P)
    rep.pair_count, rep.weight, rep.max_pairs_per_point = st.pair_count, st.weight, st.max_pairs_per_point
    dump("pairs", write_decomposition, W)
    if G is not None:
        gs = graph_stats(G)
        rep.edges, rep.max_degree = gs.edges, gs.max_degree
        rep.psi = G.cones.psi
        dump("graph", write_graph, G)
    if cert is not None:
        dump("cert", write_certificate, cert)

    if verify:
        t1 = time.perf_counter()
        _check_decomposition(rep, W, P, exactly_once=cmd == "wspd")
        if G is not None:
            _check_stretch(rep, G, P, eps)
            if cmd == "spanner":
                ok = G.m <= len(W) * G.cones.count
                rep.verdicts["edge_bound"] = ok
                if not ok:
                    rep.fail("edge_bound", f"{G.m} edges > {len(W)} pairs x {G.cones.count} cones")
        if cert is not None:
            sr = verify_separator(G, cert)
            rep.verdicts["separator"] = sr.ok
            if not sr.ok:
                rep.fail("separator", sr.crossing_edges[0] if sr.crossing_edges else sr.reason)
        rep.durations["verify_s"] = time.perf_counter() - t1
    return rep


def emit_report(reports, fh=None) -> str:
    """One JSON object per report, fields in ``REPORT_FIELDS`` order."""
    text = "".join(json.dumps(r.to_dict(), allow_nan=False) + "\n" for r in reports)
    if fh is not None:
        fh.write(text)
    return text


def emit_csv(reports, fh=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in reports:
        row = r.to_dict()
        row.update(build_s=r.durations.get("build_s"), verify_s=r.durations.get("verify_s"))
        w.writerow(["" if row[k] is None else row[k] for k in CSV_FIELDS])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pairdecomp", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=("gen",) + COMMANDS)
    ap.add_argument("input", nargs="?", help="point file (omit to generate with --gen)")
    ap.add_argument("--eps", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--n", default="100", help="point count, or a comma list for a sweep")
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--gen", choices=GENERATORS, default="uniform")
    ap.add_argument("--verify", action="store_true")
    ap.add_argument("--out", default=None,
                    help="output directory (file or stdout for 'gen')")
    ap.add_argument("--jobs", type=int, default=1, help="parallel workers for sweeps")
    return ap


def _run_job(job):
    cmd, path, params, verify, out, desc = job
    return run_pipeline(cmd, path, params, verify, out, desc)


def main(argv=None) -> int:
    ap = _parser()
    args = ap.parse_args(argv)
    try:
        sizes = [int(x) for x in str(args.n).split(",") if x.strip()]
    except ValueError:
        ap.error("--n must be an integer or a comma list of integers")
    if not 0 < args.eps <= 1:
        ap.error("--eps must lie in (0, 1]")
    if args.jobs < 1:
        ap.error("--jobs must be positive")

    if args.command == "gen":
        if len(sizes) != 1:
            ap.error("gen takes a single --n")
        try:
            P = generate_points(args.gen, sizes[0], args.dim, args.seed)
        except ValueError as exc:
            ap.error(str(exc))
        if args.out:
            with open(args.out, "w") as fh:
                write_points(P, fh)
        else:
            write_points(P, sys.stdout)
        return EXIT_OK

    out = Path(args.out or "pairdecomp-out")
    out.mkdir(parents=True, exist_ok=True)
    params = {"eps": args.eps, "seed": args.seed}
    jobs = []
    if args.input:
        if not Path(args.input).is_file():
            ap.error(f"no such point file: {args.input}")
        jobs.append((args.command, args.input, params, args.verify, out, None))
    else:
        for n in sizes:
            try:
                P = generate_points(args.gen, n, args.dim, args.seed)
            except ValueError as exc:
                ap.error(str(exc))
            path = out / f"{args.gen}-n{n}-d{args.dim}-s{args.seed}.pts"
            with open(path, "w") as fh:
                write_points(P, fh)
            desc = {"generator": args.gen}
            jobs.append((args.command, path, params, args.verify, out, desc))
    try:
        if args.jobs > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                reports = list(pool.map(_run_job, jobs))
        else:
            reports = [_run_job(j) for j in jobs]
    except ValueError as exc:
        print(f"pairdecomp: {exc}", file=sys.stderr)
        return EXIT_USAGE
    with open(out / "report.jsonl", "w") as fh:
        emit_report(reports, fh)
    with open(out / "report.csv", "w") as fh:
        emit_csv(reports, fh)
    code = EXIT_OK
    for r in reports:
        line = f"{r.command} n={r.n} status={r.status}"
        if r.witness:
            line += f" witness={r.witness}"
        if r.error:
            line += f" error={r.error}"
        print(line)
        code = max(code, r.exit_code)
    return code


if __name__ == "__main__":
    sys.exit(main())
