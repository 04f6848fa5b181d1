"""Histogram value type: construction, merging, trimming, and statistics.

Bins follow the half-open convention (a, b] with the first bin closed at its
left edge, so a sample equal to the lowest break lands in bin 0.  Optional
per-bin annotations store the raw power sums S_k = sum(x**k) for k = 1..p,
which makes merging exact elementwise addition.

All types are immutable once constructed; every operation returns a new
value, so instances can be shared freely across threads.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DomainError,
    EmptyHistogramError,
    IncompatibleAnnotationError,
    IncompatibleBreaksError,
    InvalidBreaksError,
    OutOfRangeError,
    ShapeError,
)

__all__ = ["BinMoments", "Ecdf", "Histogram", "build_histogram"]

# Wire format caps the metric-name field at an unsigned 16-bit byte length.
MAX_NAME_BYTES = 65535

# Slack used when checking power sums against their attainable per-bin range;
# scaled by magnitude so histograms built from real samples never trip it.
_MOMENT_RTOL = 1e-9


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _validate_breaks(breaks) -> np.ndarray:
    b = np.array(breaks, dtype=np.float64)
    if b.ndim != 1 or b.size < 2:
        raise InvalidBreaksError("breaks must be a 1-D sequence of at least two values")
    if not np.all(np.isfinite(b)):
        raise InvalidBreaksError("breaks must be finite")
    if not np.all(np.diff(b) > 0.0):
        i = int(np.flatnonzero(np.diff(b) <= 0.0)[0])
        raise InvalidBreaksError(
            f"breaks must be strictly increasing; breaks[{i}]={b[i]!r} >= breaks[{i + 1}]={b[i + 1]!r}"
        )
    return b


def _locate_bins(breaks: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Bin index for each value under the (a, b] convention, first bin closed.

    Values must already be inside [breaks[0], breaks[-1]].
    """
    idx = np.searchsorted(breaks, values, side="left") - 1
    return np.maximum(idx, 0)


class BinMoments:
    """Per-bin raw power sums S_k = sum(x_i**k) for k = 1..order.

    ``sums`` has shape (order, bins); row k-1 holds S_k for every bin.
    """

    __slots__ = ("_order", "_sums")

    def __init__(self, order: int, sums) -> None:
        if isinstance(order, bool) or not isinstance(order, (int, np.integer)) or order < 1:
            raise DomainError(f"moment order must be an integer >= 1, got {order!r}")
        s = np.array(sums, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] != order:
            raise ShapeError(
                f"moment sums must have shape (order, bins) with order={order}, got {s.shape}"
            )
        if not np.all(np.isfinite(s)):
            raise DomainError("moment sums must be finite")
        self._order = int(order)
        self._sums = _readonly(s)

    @classmethod
    def zeros(cls, order: int, bins: int) -> "BinMoments":
        return cls(order, np.zeros((order, bins)))

    @property
    def order(self) -> int:
        return self._order

    @property
    def sums(self) -> np.ndarray:
        return self._sums

    @property
    def bin_count(self) -> int:
        return self._sums.shape[1]

    def power_sum(self, k: int) -> np.ndarray:
        """S_k for every bin (k in 1..order)."""
        if not 1 <= k <= self._order:
            raise DomainError(f"power sum order {k} outside tracked range 1..{self._order}")
        return self._sums[k - 1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinMoments):
            return NotImplemented
        return self._order == other._order and np.array_equal(self._sums, other._sums)

    def __repr__(self) -> str:
        return f"BinMoments(order={self._order}, bins={self.bin_count})"


def _check_moment_consistency(breaks: np.ndarray, counts: np.ndarray, moments: BinMoments) -> None:
    a = breaks[:-1]
    b = breaks[1:]
    n = counts.astype(np.float64)
    sums = moments.sums
    zero = counts == 0
    if np.any(sums[:, zero] != 0.0):
        raise IncompatibleAnnotationError("bins with zero count must have all power sums equal to 0")
    for k in range(1, moments.order + 1):
        pa = a**k
        pb = b**k
        lo = np.minimum(pa, pb)
        hi = np.maximum(pa, pb)
        if k % 2 == 0:
            # x**k over an interval spanning zero attains 0, not min(a**k, b**k)
            lo = np.where((a < 0.0) & (b > 0.0), 0.0, lo)
        sk = sums[k - 1]
        slack = _MOMENT_RTOL * (1.0 + n * np.maximum(np.abs(pa), np.abs(pb)))
        bad = (sk < n * lo - slack) | (sk > n * hi + slack)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise IncompatibleAnnotationError(
                f"power sum S_{k}={sk[i]!r} impossible for bin {i} "
                f"({a[i]!r}, {b[i]!r}] with count {counts[i]}"
            )
    if moments.order >= 2:
        pos = counts > 0
        if np.any(pos):
            np_ = n[pos]
            mu = sums[0, pos] / np_
            m2 = sums[1, pos] / np_
            var = m2 - mu * mu
            box = (mu - a[pos]) * (b[pos] - mu)
            slack = _MOMENT_RTOL * (1.0 + np.abs(m2))
            bad = (var < -slack) | (var > box + slack)
            if np.any(bad):
                i = int(np.flatnonzero(pos)[np.flatnonzero(bad)[0]])
                raise IncompatibleAnnotationError(
                    f"bin {i} variance {var[np.flatnonzero(bad)[0]]!r} outside the attainable "
                    f"box for its support and mean"
                )


class Histogram:
    """Binned observation counts over strictly increasing breaks.

    Parameters
    ----------
    breaks : array_like
        B+1 finite, strictly increasing bin edges.
    counts : array_like
        B nonnegative integer counts.
    moments : BinMoments or None
        Optional per-bin power sums; must cover exactly B bins and be
        consistent with each bin's support.
    name : str or None
        Optional metric label, carried through merge and serialization.
    """

    __slots__ = ("_breaks", "_counts", "_moments", "_name")

    def __init__(self, breaks, counts, moments: BinMoments | None = None,
                 name: str | None = None) -> None:
        b = _validate_breaks(breaks)
        c_in = np.asarray(counts)
        if c_in.ndim != 1 or c_in.size != b.size - 1:
            raise ShapeError(f"expected {b.size - 1} counts for {b.size} breaks, got {c_in.size}")
        if c_in.dtype.kind == "f":
            if not np.all(np.isfinite(c_in)) or np.any(c_in != np.trunc(c_in)):
                raise ShapeError("counts must be whole numbers")
        try:
            c = c_in.astype(np.int64)
        except (OverflowError, TypeError, ValueError) as exc:
            raise ShapeError(f"counts not representable as 64-bit integers: {exc}") from None
        if np.any(c < 0):
            i = int(np.flatnonzero(c < 0)[0])
            raise ShapeError(f"counts must be nonnegative; counts[{i}]={c[i]}")
        if moments is not None:
            if moments.bin_count != c.size:
                raise ShapeError(
                    f"moments cover {moments.bin_count} bins but histogram has {c.size}"
                )
            _check_moment_consistency(b, c, moments)
        if name is not None:
            if not isinstance(name, str):
                raise DomainError(f"metric name must be a string, got {type(name).__name__}")
            if len(name.encode("utf-8")) > MAX_NAME_BYTES:
                raise DomainError(f"metric name exceeds {MAX_NAME_BYTES} UTF-8 bytes")
        self._breaks = _readonly(b)
        self._counts = _readonly(c)
        self._moments = moments
        self._name = name

    # --- accessors --------------------------------------------------------

    @property
    def breaks(self) -> np.ndarray:
        return self._breaks

    @property
    def counts(self) -> np.ndarray:
        return self._counts

    @property
    def moments(self) -> BinMoments | None:
        return self._moments

    @property
    def name(self) -> str | None:
        return self._name

    @property
    def bin_count(self) -> int:
        return self._counts.size

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self._breaks)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self._breaks[:-1] + self._breaks[1:])

    def count(self) -> int:
        """Total number of observations."""
        return int(self._counts.sum())

    # --- lifecycle --------------------------------------------------------

    def merge(self, other: "Histogram") -> "Histogram":
        """Add another histogram with identical breaks and annotation order.

        Counts and power sums add elementwise (self's sums first, so repeated
        left-to-right folds are bit-reproducible).  The metric name survives
        only when both operands agree.
        """
        if not isinstance(other, Histogram):
            raise TypeError(f"cannot merge Histogram with {type(other).__name__}")
        if self._breaks.size != other._breaks.size:
            raise IncompatibleBreaksError(
                f"break counts differ: {self._breaks.size} vs {other._breaks.size}"
            )
        neq = self._breaks != other._breaks
        if np.any(neq):
            i = int(np.flatnonzero(neq)[0])
            raise IncompatibleBreaksError(
                f"breaks differ at position {i}: {self._breaks[i]!r} vs {other._breaks[i]!r}"
            )
        if (self._moments is None) != (other._moments is None):
            raise IncompatibleAnnotationError(
                "cannot merge annotated histogram with unannotated histogram"
            )
        moments = None
        if self._moments is not None:
            if self._moments.order != other._moments.order:
                raise IncompatibleAnnotationError(
                    f"moment orders differ: {self._moments.order} vs {other._moments.order}"
                )
            moments = BinMoments(self._moments.order, self._moments.sums + other._moments.sums)
        counts = self._counts + other._counts
        name = self._name if self._name == other._name else None
        return Histogram(self._breaks, counts, moments, name)

    def trim(self) -> "Histogram":
        """Drop leading and trailing zero-count bins; keep interior zeros.

        An all-zero histogram collapses to a single empty bin spanning the
        original range.
        """
        nz = np.flatnonzero(self._counts)
        if nz.size == 0:
            moments = None
            if self._moments is not None:
                moments = BinMoments.zeros(self._moments.order, 1)
            return Histogram([self._breaks[0], self._breaks[-1]], [0], moments, self._name)
        lo, hi = int(nz[0]), int(nz[-1])
        moments = None
        if self._moments is not None:
            moments = BinMoments(self._moments.order, self._moments.sums[:, lo:hi + 1])
        return Histogram(self._breaks[lo:hi + 2], self._counts[lo:hi + 1], moments, self._name)

    def coalesce(self, factor: int) -> "Histogram":
        """Merge every run of ``factor`` adjacent bins into one."""
        if isinstance(factor, bool) or not isinstance(factor, (int, np.integer)) or factor < 2:
            raise DomainError(f"coalesce factor must be an integer >= 2, got {factor!r}")
        if self.bin_count % factor != 0:
            raise ShapeError(
                f"bin count {self.bin_count} is not divisible by factor {factor}"
            )
        counts = self._counts.reshape(-1, factor).sum(axis=1)
        moments = None
        if self._moments is not None:
            sums = self._moments.sums.reshape(self._moments.order, -1, factor).sum(axis=2)
            moments = BinMoments(self._moments.order, sums)
        return Histogram(self._breaks[::factor], counts, moments, self._name)

    # --- statistics -------------------------------------------------------

    def approx_mean(self) -> float:
        """Mean estimate: exact S_1/n when annotated, midpoint-weighted otherwise."""
        total = self.count()
        if total == 0:
            raise EmptyHistogramError("approx_mean of an empty histogram")
        if self._moments is not None:
            return float(self._moments.power_sum(1).sum() / total)
        return float((self.midpoints * self._counts).sum() / total)

    def approx_quantile(self, q):
        """Quantile estimates by linear interpolation within the crossing bin.

        Accepts a scalar or a sequence of probabilities in [0, 1].  q = 0
        returns the first break; q = 1 returns the right edge of the last
        nonzero bin (the tightest upper bound the data supports), which
        differs from conventions that return the global right break.
        """
        total = self.count()
        if total == 0:
            raise EmptyHistogramError("approx_quantile of an empty histogram")
        scalar = np.ndim(q) == 0
        qs = np.atleast_1d(np.asarray(q, dtype=np.float64))
        if np.any(~np.isfinite(qs)) or np.any(qs < 0.0) or np.any(qs > 1.0):
            bad = qs[~np.isfinite(qs) | (qs < 0.0) | (qs > 1.0)][0]
            raise DomainError(f"quantile probability {bad!r} outside [0, 1]")
        cumfrac = np.concatenate([[0.0], np.cumsum(self._counts) / total])
        out = np.empty_like(qs)
        for j, qv in enumerate(qs):
            if qv == 0.0:
                out[j] = self._breaks[0]
                continue
            i = int(np.searchsorted(cumfrac, qv, side="left"))
            frac = (qv - cumfrac[i - 1]) / (cumfrac[i] - cumfrac[i - 1])
            out[j] = self._breaks[i - 1] + frac * (self._breaks[i] - self._breaks[i - 1])
        return float(out[0]) if scalar else out

    def to_ecdf(self) -> "Ecdf":
        """Empirical CDF with knots at the breaks and cumulative fractions."""
        total = self.count()
        if total == 0:
            raise EmptyHistogramError("to_ecdf of an empty histogram")
        probs = np.concatenate([[0.0], np.cumsum(self._counts) / total])
        return Ecdf(self._breaks, probs)

    # --- plumbing ---------------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Histogram):
            return NotImplemented
        return (
            np.array_equal(self._breaks, other._breaks)
            and np.array_equal(self._counts, other._counts)
            and self._moments == other._moments
            and self._name == other._name
        )

    def __repr__(self) -> str:
        ann = f", moments=p{self._moments.order}" if self._moments is not None else ""
        nm = f", name={self._name!r}" if self._name is not None else ""
        return (
            f"Histogram(bins={self.bin_count}, "
            f"range=({self._breaks[0]:g}, {self._breaks[-1]:g}), "
            f"count={self.count()}{ann}{nm})"
        )


class Ecdf:
    """Step-function empirical CDF derived from binned counts.

    ``knots`` are x positions (the histogram breaks) and ``probs`` the
    cumulative fractions reached at each knot, starting at 0.
    """

    __slots__ = ("_knots", "_probs")

    def __init__(self, knots, probs) -> None:
        k = np.array(knots, dtype=np.float64)
        p = np.array(probs, dtype=np.float64)
        if k.ndim != 1 or p.shape != k.shape:
            raise ShapeError("knots and probs must be 1-D sequences of equal length")
        if not np.all(np.isfinite(k)) or not np.all(np.diff(k) > 0.0):
            raise InvalidBreaksError("knots must be finite and strictly increasing")
        if np.any(p < 0.0) or np.any(p > 1.0) or np.any(np.diff(p) < 0.0):
            raise DomainError("probs must be nondecreasing within [0, 1]")
        self._knots = _readonly(k)
        self._probs = _readonly(p)

    @property
    def knots(self) -> np.ndarray:
        return self._knots

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    def step(self, x):
        """Right-continuous step evaluation; 0 left of the first knot."""
        idx = np.searchsorted(self._knots, x, side="right") - 1
        vals = np.where(idx < 0, 0.0, self._probs[np.maximum(idx, 0)])
        return float(vals) if np.ndim(x) == 0 else vals

    def interpolate(self, x):
        """Piecewise-linear evaluation between knots, clamped at the ends."""
        vals = np.interp(x, self._knots, self._probs)
        return float(vals) if np.ndim(x) == 0 else vals

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Ecdf):
            return NotImplemented
        return np.array_equal(self._knots, other._knots) and np.array_equal(
            self._probs, other._probs
        )

    def __repr__(self) -> str:
        return f"Ecdf(knots={self._knots.size})"


def build_histogram(samples: Iterable[float] | Sequence[float], breaks,
                    moment_order: int = 0, name: str | None = None) -> Histogram:
    """Tally samples into a histogram over the given breaks.

    Every sample must lie within [breaks[0], breaks[-1]].  When
    ``moment_order`` >= 1, per-bin power sums are accumulated from the raw
    samples in ascending sample order, making the result independent of the
    input permutation bit for bit.
    """
    if isinstance(moment_order, bool) or not isinstance(moment_order, (int, np.integer)) or moment_order < 0:
        raise DomainError(f"moment order must be an integer >= 0, got {moment_order!r}")
    b = _validate_breaks(breaks)
    xs = np.asarray(samples, dtype=np.float64)
    if xs.ndim != 1:
        xs = xs.reshape(-1)
    nbins = b.size - 1
    if xs.size == 0:
        counts = np.zeros(nbins, dtype=np.int64)
        moments = BinMoments.zeros(moment_order, nbins) if moment_order >= 1 else None
        return Histogram(b, counts, moments, name)
    bad = ~np.isfinite(xs) | (xs < b[0]) | (xs > b[-1])
    if np.any(bad):
        v = xs[bad][0]
        raise OutOfRangeError(
            f"sample {v!r} outside break range [{b[0]!r}, {b[-1]!r}]"
        )
    xs = np.sort(xs)
    idx = _locate_bins(b, xs)
    counts = np.bincount(idx, minlength=nbins).astype(np.int64)
    moments = None
    if moment_order >= 1:
        sums = np.empty((moment_order, nbins))
        for k in range(1, moment_order + 1):
            sums[k - 1] = np.bincount(idx, weights=xs**k, minlength=nbins)
        moments = BinMoments(moment_order, sums)
    return Histogram(b, counts, moments, name)
