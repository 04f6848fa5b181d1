"""Bring external data into histogram form.

Two sources are covered: the ASCII aggregation blocks printed by DTrace
(``value |@@@@ count`` rows under a ``value ... Distribution ... count``
header), and an in-process harness for the two standard ways of building
histograms under MapReduce — per-mapper partial histograms merged by the
reducer, or per-sample (bucket, 1) emissions summed by key.  Both MapReduce
methods require every producer to share one bucket scheme.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import Histogram, _locate_bins, build_histogram
from .errors import (
    DomainError,
    DtraceParseError,
    HistkitError,
    OutOfRangeError,
    ShapeError,
    UnsupportedCombinationError,
)

__all__ = [
    "BucketScheme",
    "DtraceAggregation",
    "MapEmission",
    "map_emit",
    "parse_dtrace",
    "reduce_pairs",
    "simulate_mapreduce",
]


@dataclass(frozen=True)
class BucketScheme:
    """Bin-boundary rule shared by all producers of mergeable histograms.

    Construct through :meth:`explicit`, :meth:`fixed_width`, or
    :meth:`power_of_two`; every form expands to strictly increasing breaks.
    """

    kind: str
    breaks: tuple[float, ...] | None = None
    start: float | None = None
    width: float | None = None
    count: int | None = None
    min_exponent: int | None = None
    max_exponent: int | None = None

    @classmethod
    def explicit(cls, breaks: Sequence[float]) -> "BucketScheme":
        b = tuple(float(x) for x in breaks)
        if len(b) < 2 or any(y <= x for x, y in zip(b, b[1:])):
            raise DomainError("explicit breaks must be at least two strictly increasing values")
        return cls(kind="explicit", breaks=b)

    @classmethod
    def fixed_width(cls, start: float, width: float, count: int) -> "BucketScheme":
        if not np.isfinite(start) or not np.isfinite(width) or width <= 0:
            raise DomainError(f"bucket width must be positive and finite, got {width!r}")
        if not isinstance(count, (int, np.integer)) or isinstance(count, bool) or count < 1:
            raise DomainError(f"bucket count must be an integer >= 1, got {count!r}")
        return cls(kind="fixed_width", start=float(start), width=float(width), count=int(count))

    @classmethod
    def power_of_two(cls, min_exponent: int, max_exponent: int) -> "BucketScheme":
        if max_exponent <= min_exponent:
            raise DomainError(
                f"need max_exponent > min_exponent, got {min_exponent}..{max_exponent}"
            )
        return cls(kind="power_of_two", min_exponent=int(min_exponent),
                   max_exponent=int(max_exponent))

    def expand(self) -> np.ndarray:
        """The scheme's break sequence."""
        if self.kind == "explicit":
            return np.asarray(self.breaks, dtype=np.float64)
        if self.kind == "fixed_width":
            return self.start + self.width * np.arange(self.count + 1)
        return 2.0 ** np.arange(self.min_exponent, self.max_exponent + 1)

    @property
    def bin_count(self) -> int:
        return self.expand().size - 1


@dataclass(frozen=True)
class DtraceAggregation:
    """One parsed distribution block: optional key plus (value, count) rows."""

    key: str | None
    rows: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        values = [v for v, _ in self.rows]
        if any(b <= a for a, b in zip(values, values[1:])):
            raise DomainError("row values must be strictly increasing")
        if any(c < 0 for _, c in self.rows):
            raise DomainError("row counts must be nonnegative")

    def breaks(self) -> np.ndarray:
        """Reconstructed bin edges: row value v closes the bin (prev, v].

        The first row's left edge mirrors the gap to the following row (the
        printed leftmost bucket sits one bucket below the minimum datum); a
        single-row block falls back to unit width.
        """
        values = np.asarray([v for v, _ in self.rows], dtype=np.float64)
        first_gap = values[1] - values[0] if values.size > 1 else 1.0
        return np.concatenate([[values[0] - first_gap], values])

    def to_histogram(self) -> Histogram:
        counts = [c for _, c in self.rows]
        return Histogram(self.breaks(), counts, name=self.key)


_ROW_RE = re.compile(r"^\s*(-?\d+)\s*\|([@ ]*)\s*(\d+)\s*$")
_ROW_INTENT_RE = re.compile(r"^\s*-?\d+\s*\|")


def _is_header(line: str) -> bool:
    return "value" in line and "Distribution" in line and "count" in line


def parse_dtrace(text: str) -> list[tuple[str | None, Histogram]]:
    """Parse DTrace aggregate output into named histograms, in input order.

    A block is an optional key line, a header line containing the tokens
    ``value``, ``Distribution`` and ``count``, then data rows.  Zero-count
    rows at the edges are kept; trimming is the caller's choice.  Text that
    is not part of any block is skipped; a header with no rows is skipped
    with a warning; a broken data row raises :class:`DtraceParseError` with
    its line number.
    """
    results: list[tuple[str | None, Histogram]] = []
    pending_key: str | None = None
    in_block = False
    block_key: str | None = None
    block_start = 0
    rows: list[tuple[int, int]] = []
    row_lines: list[int] = []

    def finish_block() -> None:
        nonlocal in_block, rows, row_lines
        if in_block:
            if not rows:
                warnings.warn(
                    f"distribution header at line {block_start} has no data rows; block skipped",
                    stacklevel=3,
                )
            else:
                for j in range(1, len(rows)):
                    if rows[j][0] <= rows[j - 1][0]:
                        raise DtraceParseError(
                            f"row value {rows[j][0]} does not increase past {rows[j - 1][0]}",
                            line_number=row_lines[j],
                        )
                try:
                    agg = DtraceAggregation(block_key, tuple(rows))
                    results.append((agg.key, agg.to_histogram()))
                except HistkitError as exc:
                    raise DtraceParseError(
                        f"block starting at line {block_start} is unusable: {exc}",
                        line_number=block_start,
                    ) from exc
        in_block = False
        rows = []
        row_lines = []

    for lineno, line in enumerate(text.splitlines(), start=1):
        if in_block:
            m = _ROW_RE.match(line)
            if m:
                rows.append((int(m.group(1)), int(m.group(3))))
                row_lines.append(lineno)
                continue
            if _ROW_INTENT_RE.match(line):
                raise DtraceParseError("malformed distribution row", line_number=lineno)
            finish_block()
            # fall through: this line may open or label the next block
        if _is_header(line):
            in_block = True
            block_key = pending_key
            block_start = lineno
            pending_key = None
        elif not line.strip():
            pending_key = None
        else:
            pending_key = line.strip()
    finish_block()
    return results


@dataclass(frozen=True)
class MapEmission:
    """Mapper output: one (bucket_index, 1) pair per in-range sample.

    Out-of-range samples are never dropped silently; they are routed to the
    overflow side and surfaced for the reducer to report.
    """

    pairs: tuple[tuple[int, int], ...]
    overflow: tuple[float, ...]


def map_emit(samples: Iterable[float], scheme: BucketScheme) -> MapEmission:
    """Emit (bucket_index, 1) per sample under the scheme's breaks."""
    breaks = scheme.expand()
    xs = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples,
                    dtype=np.float64)
    xs = xs.reshape(-1)
    if xs.size == 0:
        return MapEmission(pairs=(), overflow=())
    in_range = np.isfinite(xs) & (xs >= breaks[0]) & (xs <= breaks[-1])
    idx = _locate_bins(breaks, xs[in_range])
    pairs = tuple((int(i), 1) for i in idx)
    overflow = tuple(float(x) for x in xs[~in_range])
    return MapEmission(pairs=pairs, overflow=overflow)


def reduce_pairs(pairs: Iterable[tuple[int, int]], scheme: BucketScheme) -> Histogram:
    """Sum (bucket_index, count) pairs into a histogram over the scheme."""
    breaks = scheme.expand()
    nbins = breaks.size - 1
    counts = np.zeros(nbins, dtype=np.int64)
    for pos, (idx, value) in enumerate(pairs):
        if not isinstance(idx, (int, np.integer)) or not 0 <= idx < nbins:
            raise ShapeError(f"pair {pos}: bucket index {idx!r} outside 0..{nbins - 1}")
        if not isinstance(value, (int, np.integer)) or value < 0:
            raise ShapeError(f"pair {pos}: count {value!r} must be a nonnegative integer")
        counts[idx] += value
    return Histogram(breaks, counts)


def simulate_mapreduce(samples: Sequence[float], scheme: BucketScheme, shards: int,
                       method: int, moment_order: int = 0) -> Histogram:
    """Run the distributed histogram build in-process and return the result.

    Method 1 builds one partial histogram per contiguous shard and folds
    them with merge; method 2 emits (bucket, 1) pairs per shard and reduces
    the concatenation.  Key-value emission carries no moment information, so
    method 2 rejects ``moment_order`` >= 1.  Either way the output equals a
    direct build over all samples, independent of the shard count.
    """
    if not isinstance(shards, (int, np.integer)) or isinstance(shards, bool) or shards < 1:
        raise DomainError(f"shards must be an integer >= 1, got {shards!r}")
    if method not in (1, 2):
        raise DomainError(f"method must be 1 or 2, got {method!r}")
    breaks = scheme.expand()
    xs = np.asarray(samples, dtype=np.float64).reshape(-1)
    chunks = np.array_split(xs, shards)
    if method == 1:
        partials = [build_histogram(chunk, breaks, moment_order) for chunk in chunks]
        merged = partials[0]
        for part in partials[1:]:
            merged = merged.merge(part)
        return merged
    if moment_order >= 1:
        raise UnsupportedCombinationError(
            "method 2 emits (bucket, 1) pairs and cannot carry moment annotations"
        )
    all_pairs: list[tuple[int, int]] = []
    for chunk in chunks:
        emission = map_emit(chunk, scheme)
        if emission.overflow:
            raise OutOfRangeError(
                f"sample {emission.overflow[0]!r} outside scheme range "
                f"[{breaks[0]!r}, {breaks[-1]!r}]"
            )
        all_pairs.extend(emission.pairs)
    return reduce_pairs(all_pairs, scheme)
