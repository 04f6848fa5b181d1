"""Command-line interface.

Machine-readable results (JSON, CSV, plain values) go to stdout; warnings
and errors go to stderr.  Exit status is 0 exactly when no error occurred.

Breaks are specified as a comma list (``0,1,2,4``), as ``lin:start:stop:n``
for n equal bins, or as ``log2:kmin:kmax`` for power-of-two edges
2**kmin .. 2**kmax.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import wire
from .bounds import (
    bounds_mean,
    bounds_mean_var,
    bounds_no_moment,
    bounds_pth_moment,
    emdcc_histogram,
    information_gain,
)
from .core import Histogram, build_histogram
from .errors import DomainError, HistkitError
from .ingest import BucketScheme, parse_dtrace, simulate_mapreduce

# The synthetic gain study works on log2(read size) with unit-width integer
# buckets covering 1 byte .. 16 MiB.
STUDY_BINS = 24


def parse_breaks_spec(spec: str) -> np.ndarray:
    parts = spec.split(":")
    try:
        if parts[0] == "lin" and len(parts) == 4:
            start, stop, n = float(parts[1]), float(parts[2]), int(parts[3])
            if n < 1 or stop <= start:
                raise ValueError("need stop > start and at least one bin")
            return np.linspace(start, stop, n + 1)
        if parts[0] == "log2" and len(parts) == 3:
            kmin, kmax = int(parts[1]), int(parts[2])
            if kmax <= kmin:
                raise ValueError("need kmax > kmin")
            return 2.0 ** np.arange(kmin, kmax + 1)
        if len(parts) == 1:
            values = [float(tok) for tok in spec.split(",")]
            if len(values) < 2:
                raise ValueError("need at least two break values")
            return np.asarray(values)
    except ValueError as exc:
        raise DomainError(f"bad breaks spec {spec!r}: {exc}") from None
    raise DomainError(f"bad breaks spec {spec!r}: unknown form")


def _read_samples(path: str) -> np.ndarray:
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            token = line.strip()
            if not token:
                continue
            try:
                values.append(float(token))
            except ValueError:
                raise DomainError(f"{path}:{lineno}: not a number: {token!r}") from None
    return np.asarray(values, dtype=np.float64)


def _load_histogram(path: str) -> Histogram:
    with open(path, "rb") as fh:
        return wire.decode(fh.read())


def _write_histogram(h: Histogram, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(wire.encode(h))


def _summary(h: Histogram) -> dict:
    total = h.count()
    return {
        "bins": h.bin_count,
        "count": total,
        "mean": h.approx_mean() if total > 0 else None,
    }


# --- subcommands ------------------------------------------------------------


def cmd_build(args: argparse.Namespace) -> int:
    samples = _read_samples(args.input)
    breaks = parse_breaks_spec(args.breaks)
    h = build_histogram(samples, breaks, moment_order=args.moments, name=args.name)
    _write_histogram(h, args.out)
    print(json.dumps(_summary(h)))
    return 0


def cmd_merge(args: argparse.Namespace) -> int:
    merged = _load_histogram(args.files[0])
    for path in args.files[1:]:
        nxt = _load_histogram(path)
        try:
            merged = merged.merge(nxt)
        except HistkitError as exc:
            raise HistkitError(f"cannot merge {args.files[0]!r} with {path!r}: {exc}") from exc
    _write_histogram(merged, args.out)
    print(json.dumps(_summary(merged)))
    return 0


def cmd_trim(args: argparse.Namespace) -> int:
    h = _load_histogram(args.file)
    if h.count() == 0:
        print("warning: all counts are zero; trimming to a single empty bin",
              file=sys.stderr)
    trimmed = h.trim()
    _write_histogram(trimmed, args.out)
    print(json.dumps(_summary(trimmed)))
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    h = _load_histogram(args.file)
    qs = [float(tok) for tok in args.quantiles.split(",")] if args.quantiles else []
    out = {"count": h.count(), "mean": h.approx_mean()}
    if qs:
        values = h.approx_quantile(qs)
        out["quantiles"] = {str(q): float(v) for q, v in zip(qs, values)}
    print(json.dumps(out))
    return 0


def cmd_emdcc(args: argparse.Namespace) -> int:
    h = _load_histogram(args.file)
    norm_range = None
    if args.range:
        lo, hi = (float(tok) for tok in args.range.split(","))
        norm_range = (lo, hi)
    report = emdcc_histogram(h, range=norm_range)
    print(json.dumps({
        "total": report.total,
        "method": report.method,
        "per_bin": [
            {"bin": e.index, "weight": e.weight, "gap": e.gap,
             "contribution": e.contribution, "regime": e.regime}
            for e in report.per_bin
        ],
    }))
    return 0


def cmd_gain(args: argparse.Namespace) -> int:
    h = _load_histogram(args.file)
    print(information_gain(h))
    return 0


def cmd_bounds(args: argparse.Namespace) -> int:
    if args.var is not None and args.p is not None:
        raise DomainError("--var and --p are mutually exclusive")
    if args.m1 is None:
        if args.var is not None or args.p is not None:
            raise DomainError("--var/--p require --m1")
        b = bounds_no_moment()
    elif args.p is not None:
        b = bounds_pth_moment(args.m1, args.p)
    elif args.var is not None:
        b = bounds_mean_var(args.m1, args.var)
    else:
        b = bounds_mean(args.m1)
    xs = np.linspace(0.0, 1.0, args.grid)
    lows = b.lower(xs)
    ups = b.upper(xs)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "lower", "upper", "regime"])
    for x, lo, up in zip(xs, lows, ups):
        writer.writerow([repr(float(x)), repr(float(lo)), repr(float(up)), b.regime_at(x)])
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_dtrace(args: argparse.Namespace) -> int:
    with open(args.file, "r", encoding="utf-8") as fh:
        text = fh.read()
    for _, hist in parse_dtrace(text):
        print(wire.to_json(hist))
    return 0


def cmd_mapreduce_demo(args: argparse.Namespace) -> int:
    rng = np.random.default_rng(args.seed)
    scheme = BucketScheme.fixed_width(0.0, 1.0, 32)
    samples = rng.uniform(0.0, 32.0, size=args.samples)
    moment_order = 1 if args.method == 1 else 0
    direct = build_histogram(samples, scheme.expand(), moment_order)
    simulated = simulate_mapreduce(samples, scheme, args.shards, args.method, moment_order)
    ok = np.array_equal(direct.counts, simulated.counts)
    if ok and moment_order:
        ok = np.allclose(direct.moments.sums, simulated.moments.sums, rtol=1e-12, atol=0.0)
    if ok:
        print("PASS")
        return 0
    print("FAIL")
    print(f"shard-invariance check failed for shards={args.shards} method={args.method}",
          file=sys.stderr)
    return 1


# --- synthetic gain study ---------------------------------------------------


def synthesize_user_log_sizes(rng: np.random.Generator) -> np.ndarray:
    """One synthetic user's log2 read sizes on [0, 24].

    Real storage users read heavily at fixed block sizes, so each user mixes
    spikes at exact powers of two (integers in log2 space, i.e. bucket
    edges) with a smooth Beta-shaped blob spanning a few octaves.  A quarter
    of users are mostly smooth.
    """
    n = int(rng.integers(300, 3000))
    if rng.random() < 0.25:
        spike_weight = rng.uniform(0.0, 0.15)
    else:
        spike_weight = rng.beta(2.2, 1.1)
    k = int(rng.integers(1, 5))
    spike_positions = rng.choice(np.arange(1, STUDY_BINS + 1), size=k, replace=False)
    spike_share = rng.dirichlet(np.ones(k)) * spike_weight
    lo = rng.uniform(0.0, STUDY_BINS - 6.0)
    span = rng.uniform(2.0, 6.0)
    shape_a, shape_b = rng.uniform(0.8, 5.0, size=2)
    counts = rng.multinomial(n, np.append(spike_share, 1.0 - spike_share.sum()))
    parts = [np.full(c, float(pos)) for pos, c in zip(spike_positions, counts[:-1])]
    parts.append(lo + span * rng.beta(shape_a, shape_b, size=counts[-1]))
    return np.clip(np.concatenate(parts), 0.0, float(STUDY_BINS))


def run_gain_study(users: int, seed: int) -> tuple[list[dict], dict]:
    """Per-user EMDCC and information gain for mean-annotated log2 buckets.

    Each user's samples land in 24 unit-width bins annotated with the bin
    means; the gain compares that against unannotated bins at equal storage
    (48 plain buckets).  Deterministic for a given seed.
    """
    rng = np.random.default_rng(seed)
    breaks = np.arange(STUDY_BINS + 1, dtype=np.float64)
    rows = []
    gains = []
    for user in range(users):
        samples = synthesize_user_log_sizes(rng)
        h = build_histogram(samples, breaks, moment_order=1)
        emdcc = emdcc_histogram(h, range=(0.0, float(STUDY_BINS))).total
        gain = information_gain(h)
        rows.append({"user": user, "count": h.count(), "emdcc": emdcc, "gain": gain})
        gains.append(gain)
    arr = np.asarray(gains)
    finite = arr[np.isfinite(arr)]

    def _num(x: float):
        return float(x) if math.isfinite(x) else "inf"

    summary = {
        "users": users,
        "seed": seed,
        "min_gain": _num(arr.min()),
        "q25_gain": _num(float(np.quantile(arr, 0.25))),
        "median_gain": _num(float(np.median(arr))),
        "q75_gain": _num(float(np.quantile(arr, 0.75))),
        "max_gain": _num(arr.max()),
        "frac_gain_above_2.5": float((arr > 2.5).mean()),
        "frac_loss": float((arr < 1.0).mean()),
        "max_finite_gain": _num(finite.max()) if finite.size else "inf",
    }
    return rows, summary


def cmd_gain_study(args: argparse.Namespace) -> int:
    rows, summary = run_gain_study(args.users, args.seed)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["user", "count", "emdcc", "gain"])
    for row in rows:
        writer.writerow([row["user"], row["count"], repr(row["emdcc"]), repr(row["gain"])])
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(buf.getvalue())
        print(json.dumps(summary))
    else:
        sys.stdout.write(buf.getvalue())
        print(json.dumps(summary), file=sys.stderr)
    return 0


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="histkit",
                                     description="histogram analytics toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build a histogram from a sample file")
    p.add_argument("--input", required=True, help="text file, one number per line")
    p.add_argument("--breaks", required=True, help="comma list, lin:start:stop:n, or log2:kmin:kmax")
    p.add_argument("--moments", type=int, default=0, help="moment order p (default 0)")
    p.add_argument("--name", default=None, help="metric name to embed")
    p.add_argument("--out", required=True, help="output .hgt path")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("merge", help="merge histograms left to right")
    p.add_argument("files", nargs="+", help="input .hgt files")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("trim", help="drop leading/trailing empty bins")
    p.add_argument("file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_trim)

    p = sub.add_parser("stats", help="count, mean, and quantiles as JSON")
    p.add_argument("file")
    p.add_argument("--quantiles", default="", help="comma list of probabilities")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("emdcc", help="information-loss report as JSON")
    p.add_argument("file")
    p.add_argument("--range", default=None, help="lo,hi normalization override")
    p.set_defaults(func=cmd_emdcc)

    p = sub.add_parser("gain", help="information gain of a moment-annotated histogram")
    p.add_argument("file")
    p.set_defaults(func=cmd_gain)

    p = sub.add_parser("bounds", help="CDF envelope curves as CSV")
    p.add_argument("--m1", type=float, default=None, help="normalized mean (or p-th moment root)")
    p.add_argument("--var", type=float, default=None, help="normalized variance")
    p.add_argument("--p", type=int, default=None, help="single-moment order")
    p.add_argument("--grid", type=int, default=101, help="number of grid rows")
    p.add_argument("--out", default=None, help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("dtrace", help="parse DTrace aggregate output to JSON histograms")
    p.add_argument("file")
    p.set_defaults(func=cmd_dtrace)

    p = sub.add_parser("mapreduce-demo", help="check shard invariance of the MapReduce harness")
    p.add_argument("--shards", type=int, default=4)
    p.add_argument("--method", type=int, choices=(1, 2), default=1)
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mapreduce_demo)

    p = sub.add_parser("gain-study", help="synthetic per-user information-gain study")
    p.add_argument("--users", type=int, default=315)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", default=None, help="CSV path (default: CSV to stdout)")
    p.set_defaults(func=cmd_gain_study)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HistkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
