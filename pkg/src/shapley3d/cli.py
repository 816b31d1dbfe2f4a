"""
Command line front end.

    shapley3d shapley points.txt [--algo fast|exact|mc] [--format csv|json]
    shapley3d meanwidth points.txt [--method edges|mc]
    shapley3d gen --n 50 --dist sphere --seed 1
    shapley3d selftest [--trials 20]
    shapley3d bench [--n 50 --n 100]

Exit status: 0 success, 1 usage / I/O / size errors, 2 degenerate input.
"""

import argparse
import io
import json
import math
import sys
import time
from typing import Iterable, Optional, Sequence

import numpy as np

from .dynconv import DynamicConvolution, KernelFn, naive_replay, random_oplog
from .errors import DegenerateInput, EmptyInputError, ParseError, Shapley3DError, SizeLimitError
from .geometry import as_points, check_general_position
from .oracle import exact_shapley, mc_mean_width, mc_shapley, mean_width_exact
from .shapley import ShapleyResult, shapley_mean_width

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE = 0, 1, 2

FIELDS = ("index", "x", "y", "z", "phi") + ShapleyResult.BREAKDOWN


class UsageError(Shapley3DError):
    pass


def fmt(x: float) -> str:
    """17 significant digits: parses back to the same double."""
    return format(float(x), ".17g")


def parse_points(text: str) -> np.ndarray:
    """One point per line as three reals; blank lines and '#' comments are skipped."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split()
        if len(parts) != 3:
            raise ParseError(lineno, f"expected 3 coordinates, got {len(parts)}")
        try:
            xyz = [float(v) for v in parts]
        except ValueError:
            raise ParseError(lineno, f"not a number in {s!r}") from None
        if not all(math.isfinite(v) for v in xyz):
            raise ParseError(lineno, "coordinates must be finite")
        rows.append(xyz)
    if not rows:
        raise EmptyInputError("no points in input")
    return np.array(rows, dtype=np.float64)


def format_points(points) -> str:
    return "".join(" ".join(fmt(v) for v in p) + "\n" for p in as_points(points))


def read_points(path: str) -> np.ndarray:
    if path == "-":
        return parse_points(sys.stdin.read())
    with open(path, encoding="utf-8") as fh:
        return parse_points(fh.read())


def _emit(text: str, out: Optional[str]):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


# -- shapley -------------------------------------------------------------

def result_records(points, res: ShapleyResult):
    pts = as_points(points)
    for i in range(res.n):
        rec = {"index": i, "x": pts[i, 0], "y": pts[i, 1], "z": pts[i, 2], "phi": res.phi[i]}
        for name in ShapleyResult.BREAKDOWN:
            rec[name] = getattr(res, name)[i]
        if res.stderr is not None:
            rec["stderr"] = res.stderr[i]
        yield rec


def render_csv(points, res: ShapleyResult, mean_width: float) -> str:
    buf = io.StringIO()
    cols = FIELDS + (("stderr",) if res.stderr is not None else ())
    buf.write(",".join(cols) + "\n")
    for rec in result_records(points, res):
        buf.write(",".join(str(rec[c]) if c == "index" else fmt(rec[c]) for c in cols) + "\n")
    buf.write(f"# algorithm={res.algorithm}\n")
    if res.seed is not None:
        buf.write(f"# seed={res.seed}\n# samples={res.extra.get('samples')}\n")
    buf.write(f"# sum_phi={fmt(math.fsum(res.phi))}\n")
    buf.write(f"# mean_width={fmt(mean_width)}\n")
    return buf.getvalue()


def render_json(points, res: ShapleyResult, mean_width: float) -> str:
    # floats are written through fmt so both formats carry the same digits
    def num(x):
        return json.loads(fmt(x)) if math.isfinite(x) else None

    doc = {
        "algorithm": res.algorithm,
        "points": [{k: (v if k == "index" else num(v)) for k, v in rec.items()} for rec in result_records(points, res)],
        "sum_phi": num(math.fsum(res.phi)),
        "mean_width": num(mean_width),
    }
    if res.seed is not None:
        doc["seed"] = res.seed
        doc["samples"] = res.extra.get("samples")
    return json.dumps(doc, indent=1) + "\n"


def _seed(args) -> int:
    if args.seed is None:
        args.seed = int(np.random.SeedSequence().entropy % (1 << 63))
    return args.seed


def cmd_shapley(args) -> int:
    pts = read_points(args.input)
    if args.algo == "fast":
        res = shapley_mean_width(pts, threads=args.threads)
    elif args.algo == "exact":
        res = exact_shapley(pts)
    else:
        res = mc_shapley(pts, args.samples, _seed(args))
    mw = mean_width_exact(pts)
    render = render_json if args.format == "json" else render_csv
    _emit(render(pts, res, mw), args.out)
    return EXIT_OK


def cmd_meanwidth(args) -> int:
    pts = read_points(args.input)
    if args.method == "edges":
        _emit(fmt(mean_width_exact(pts)) + "\n", args.out)
    else:
        est = mc_mean_width(pts, args.samples, _seed(args))
        _emit(f"{fmt(est.value)} +- {fmt(est.stderr)}\n# seed={est.seed}\n# samples={est.samples}\n", args.out)
    return EXIT_OK


# -- gen -----------------------------------------------------------------

def generate(n: int, dist: str, seed: int) -> np.ndarray:
    """Seeded random points, redrawn until they are in general position."""
    rng = np.random.default_rng(seed)
    while True:
        if dist == "cube":
            pts = rng.uniform(-1.0, 1.0, (n, 3))
        else:
            z = rng.standard_normal((n, 3))
            pts = z / np.linalg.norm(z, axis=1)[:, None]
            if dist == "ball":
                pts *= rng.uniform(0.0, 1.0, (n, 1)) ** (1.0 / 3.0)
        if check_general_position(pts) is None:
            return pts


def cmd_gen(args) -> int:
    if args.n is None or len(args.n) != 1 or args.n[0] < 1:
        raise UsageError("gen needs exactly one --n >= 1")
    if args.seed is None:
        raise UsageError("gen needs --seed")
    _emit(format_points(generate(args.n[0], args.dist, args.seed)), args.out)
    return EXIT_OK


# -- selftest ------------------------------------------------------------

def _max_rel(a, b, floor=1e-300):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), floor))) if a.size else 0.0


def selftest_suites(trials: int, tol: float, seed: int = 2024):
    """Yield (name, worst error, tolerance) rows; each suite is seeded."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for t in range(trials):
        n = 4 + t % 5
        pts = generate(n, "sphere", int(rng.integers(1 << 31)))
        worst = max(worst, _max_rel(shapley_mean_width(pts).phi, exact_shapley(pts).phi))
    yield "fast vs exact, n=4..8", worst, tol

    worst = 0.0
    for t in range(trials):
        g = KernelFn(rng.uniform(-1, 1, 65), -32)
        kinds, steps, vals = random_oplog(20000, rng)
        dc = DynamicConvolution(g, check_window=False)
        got = dc.replay(kinds, steps, vals, check=True)
        ref, scale = naive_replay(kinds, steps, vals, g)
        worst = max(worst, float(np.max(np.abs(got - ref) / np.maximum(scale, 1.0))) if len(ref) else 0.0)
    yield "dynamic convolution vs naive", worst, tol

    worst = 0.0
    for t in range(trials):
        pts = generate(12 + t % 9, "ball", int(rng.integers(1 << 31)))
        mw = mean_width_exact(pts)
        worst = max(worst, abs(shapley_mean_width(pts).total - mw) / mw)
    yield "efficiency", worst, tol


def cmd_selftest(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    tol = 1e-9 if args.tol is None else args.tol
    ok = True
    lines = [f"{'suite':32s} {'worst':>10s} {'tol':>10s}  result"]
    for name, worst, limit in selftest_suites(args.trials, tol):
        passed = worst <= limit
        ok &= passed
        lines.append(f"{name:32s} {worst:10.3g} {limit:10.3g}  {'PASS' if passed else 'FAIL'}")
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if ok else EXIT_USAGE


# -- bench ---------------------------------------------------------------

def dynconv_scaling(
    ks: Iterable[int] = range(14, 21), seed: int = 0, build: str = "transform", repeats: int = 3, min_time: float = 1.0
):
    """
    Replay n = 2**k random mixed operations for each k and return one dict
    per k with the best wall time, the transform sample count,
    C = count / (n log2^2 n) and ``ratio``, the wall-time ratio to the
    previous k (NaN for the first).

    Sizes are timed in ascending order in each of ``repeats`` rounds; small
    sizes are repeated within a round until about ``min_time`` seconds are
    spent on them overall, keeping the fastest run. ``ratio`` is the median
    over rounds of the ratio between neighbours timed back to back, which
    cancels the slow spells a shared machine goes through.
    """
    rng = np.random.default_rng(seed)
    g = KernelFn(rng.uniform(-1, 1, 257), -128)
    ks = list(ks)
    logs = {k: random_oplog(1 << k, np.random.default_rng([seed, k])) for k in ks}
    # one structure per size, reset between runs, so repeated timings do
    # not depend on where the allocator happens to place fresh scratch
    structs = {}

    def timed(k):
        dc = structs.get(k)
        if dc is None:
            dc = structs[k] = DynamicConvolution(g, check_window=False, build=build)
        dc.reset()
        t0 = time.perf_counter()
        dc.replay(*logs[k])
        return time.perf_counter() - t0, dc.stats["transform_samples"]

    # compile outside the timed region
    DynamicConvolution(g, check_window=False, build=build).replay(*random_oplog(64, rng))
    best, count, inner = {}, {}, {}
    for k in ks:
        best[k], count[k] = timed(k)
        inner[k] = max(1, math.ceil(min_time / (repeats * best[k])))
    rounds = []
    for _ in range(repeats):
        this = {k: min(timed(k)[0] for _ in range(inner[k])) for k in ks}
        rounds.append(this)
        for k in ks:
            best[k] = min(best[k], this[k])
    rows = []
    for i, k in enumerate(ks):
        n = 1 << k
        ratio = float(np.median([r[k] / r[ks[i - 1]] for r in rounds])) if i else math.nan
        rows.append(
            {"k": k, "ops": n, "seconds": best[k], "ratio": ratio, "transform_samples": count[k], "C": count[k] / (n * k * k)}
        )
    return rows


def cmd_bench(args) -> int:
    sizes = args.n or [50, 100, 150]
    buf = io.StringIO()
    buf.write("kind,size,seconds,time_ratio,transform_samples,C\n")
    for row in dynconv_scaling(range(14, args.kmax + 1), seed=0 if args.seed is None else args.seed):
        buf.write(
            f"dynconv,{row['ops']},{row['seconds']:.6f},{row['ratio']:.4f},{row['transform_samples']},{row['C']:.6f}\n"
        )
    shapley_mean_width(generate(8, "sphere", 0))
    for n in sizes:
        pts = generate(n, "sphere", n if args.seed is None else args.seed)
        t0 = time.perf_counter()
        shapley_mean_width(pts, threads=args.threads)
        buf.write(f"shapley,{n},{time.perf_counter() - t0:.6f},,,\n")
    _emit(buf.getvalue(), args.out)
    return EXIT_OK


# -- entry point ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shapley3d", description="Shapley values for the mean width of a 3-D point set.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("shapley", help="per-point Shapley values")
    p.add_argument("input", help="point file, '-' for stdin")
    p.add_argument("--algo", choices=("fast", "exact", "mc"), default="fast")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--threads", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_shapley)

    p = sub.add_parser("meanwidth", help="mean width of the hull")
    p.add_argument("input")
    p.add_argument("--method", choices=("edges", "mc"), default="edges")
    p.add_argument("--samples", type=int, default=100000)
    common(p)
    p.set_defaults(func=cmd_meanwidth)

    p = sub.add_parser("gen", help="random points in general position")
    p.add_argument("--n", type=int, action="append")
    p.add_argument("--dist", choices=("sphere", "ball", "cube"), default="sphere")
    common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("selftest", help="oracle comparisons on seeded instances")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--tol", type=float, help="override the pass tolerance")
    common(p)
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("bench", help="scaling table (CSV)")
    p.add_argument("--n", type=int, action="append", help="point-set size (repeatable)")
    p.add_argument("--kmax", type=int, default=20, help="largest dynconv run is 2**kmax operations")
    p.add_argument("--threads", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # usage errors and --help; report the code instead of exiting
        return exc.code
    if getattr(args, "samples", 1) < 1:
        print("shapley3d: error: --samples must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "threads", 1) < 1:
        print("shapley3d: error: --threads must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except DegenerateInput as exc:
        print(f"shapley3d: degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (ParseError, EmptyInputError, SizeLimitError, UsageError, OSError) as exc:
        print(f"shapley3d: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
