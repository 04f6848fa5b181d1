"""Moment-constrained CDF envelopes and the EMDCC information-loss metric.

Given what a histogram records about one bin (its mass, and optionally the
first one or two raw moments of the samples inside it, or a single p-th
moment), there is a tightest pair of curves bracketing every CDF consistent
with that information.  This module builds those envelope pairs, integrates
the area between them (the bin's normalized information loss), and combines
per-bin losses into the whole-histogram EMDCC ("earth mover's distance of
the cumulative curves") and the storage-equivalent information gain.

All per-bin math runs on the bin rescaled to [0, 1]; constraint wrappers map
metric units to the unit interval affinely.  Conventions:

* m1 is the normalized mean, v the normalized variance, m2 = v + m1**2.
* With the mean known, the envelope gap at x is p1 = (1-m1)/(1-x) left of
  the mean and p2 = m1/x right of it; the gap integrates to the natural-log
  binary entropy of m1.
* With mean and variance known there are two regimes split at
  c1 = m1 - v/(1-m1) and c2 = m1 + v/m1: outside [c1, c2] a two-point
  extremal distribution gives gap p3 = v/(v + (x-m1)^2); inside it a
  three-point distribution supported on {0, x, 1} gives
  gap p4 = (m1-m2)/(x-x^2).
* With a single p-th moment (constraint E[X^p] = mu_p^p) the gap is
  (1-mu_p^p)/(1-x^p) left of mu_p and mu_p^p/x^p right of it.

Envelope evaluators pin both curves to 1 at the right support edge: any
distribution on the bin has full mass there, so that value is forced even
where the open-interval formulas approach a smaller limit.  Gap evaluation
(used for integration) sticks to the open-interval formulas, where the
single-point difference has no effect.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from math import comb
from typing import Iterable

import numpy as np
from scipy.integrate import quad

from .core import Histogram
from .errors import (
    DomainError,
    EmptyHistogramError,
    IncompatibleAnnotationError,
    InfeasibleMomentsError,
    UnsupportedLayoutError,
)

__all__ = [
    "BinConstraint",
    "CdfBounds",
    "EmdccReport",
    "PerBinLoss",
    "bounds_mean",
    "bounds_mean_var",
    "bounds_no_moment",
    "bounds_pth_moment",
    "emdcc_histogram",
    "emdcc_mean_closed",
    "emdcc_mean_var_closed",
    "information_gain",
    "mean_loss",
]

# Clamp guard for envelope formulas evaluated within one ulp of a support edge.
_EDGE_EPS = 1e-15
# Absolute tolerance for adaptive quadrature of per-bin gap integrals.
_QUAD_ABS_TOL = 1e-10
# Feasibility slack for the attainable variance box.
_FEAS_ATOL = 1e-12


def _check_unit(value: float, label: str) -> float:
    value = float(value)
    if not np.isfinite(value) or value < 0.0 or value > 1.0:
        raise DomainError(f"{label} must lie in [0, 1], got {value!r}")
    return value


def _check_feasible(m1: float, v: float) -> tuple[float, float]:
    m1 = _check_unit(m1, "normalized mean")
    v = float(v)
    if not np.isfinite(v) or v < -_FEAS_ATOL:
        raise InfeasibleMomentsError(f"variance must be nonnegative, got {v!r}")
    box = m1 * (1.0 - m1)
    if v > box + _FEAS_ATOL:
        raise InfeasibleMomentsError(
            f"variance {v!r} exceeds the attainable box m1*(1-m1) = {box!r} for mean {m1!r}"
        )
    return m1, min(max(v, 0.0), box)


def emdcc_mean_closed(m1: float) -> float:
    """Information loss of one bin known only by its normalized mean.

    Closed form of the envelope-gap integral: the natural-log binary entropy
    -(1-m1)*ln(1-m1) - m1*ln(m1), with the 0*ln(0) = 0 limit at the ends.
    Zero when the mean sits on either bin edge, maximal (ln 2) at the middle.
    """
    m1 = _check_unit(m1, "normalized mean")
    out = 0.0
    if 0.0 < m1 < 1.0:
        out = -(1.0 - m1) * math.log(1.0 - m1) - m1 * math.log(m1)
    return out


# Per-bin loss as a function of where the mean sits within the bin; the two
# quantities coincide by definition, so this is an alias rather than a copy.
mean_loss = emdcc_mean_closed


def emdcc_mean_var_closed(m1: float, v: float) -> float:
    """Information loss of one bin with known normalized mean and variance.

    Antiderivatives of the two gap regimes stitched at c1 and c2:
    sigma*atan((x-m1)/sigma) outside, (m1-m2)*ln(x/(1-x)) inside.  Agrees
    with adaptive quadrature of the envelope gap to better than 1e-8.
    """
    m1, v = _check_feasible(m1, v)
    if v == 0.0 or m1 in (0.0, 1.0):
        return 0.0
    sigma = math.sqrt(v)
    mm2 = max(m1 * (1.0 - m1) - v, 0.0)  # m1 - m2, the three-point-regime numerator
    # Cancellation-free pieces: (c1 - m1)/sigma = -sigma/(1-m1) and
    # (c2 - m1)/sigma = sigma/m1 exactly, and each cut's complement has a
    # direct form, so tiny cuts never collapse to 0 or 1 in float.
    left = sigma * (math.atan(-sigma / (1.0 - m1)) - math.atan(-m1 / sigma))
    right = sigma * (math.atan((1.0 - m1) / sigma) - math.atan(sigma / m1))
    middle = 0.0
    if mm2 > 0.0:
        c1 = mm2 / (1.0 - m1)
        one_minus_c1 = (1.0 - m1) + v / (1.0 - m1)
        c2 = m1 + v / m1
        one_minus_c2 = mm2 / m1
        middle = mm2 * (
            math.log(c2) - math.log(one_minus_c2) - math.log(c1) + math.log(one_minus_c1)
        )
    return left + middle + right


@dataclass(frozen=True)
class CdfBounds:
    """Tightest nondecreasing envelope pair around every CDF consistent with
    one bin's recorded constraints.

    ``lower(x) <= upper(x)`` holds throughout the support, and both curves
    reach 1 at the right edge.  ``regime`` lists (lo, hi, tag) sub-intervals
    recording which extremal construction applies where; tags are "none",
    "F1"/"F2" (mean only), "F3"/"F4" (mean and variance), or "p-moment".
    """

    kind: str
    support: tuple[float, float] = (0.0, 1.0)
    regime: tuple[tuple[float, float, str], ...] = ()
    m1: float | None = None
    v: float | None = None
    mu_p: float | None = None
    p: int | None = None

    # --- evaluation -------------------------------------------------------

    def _normalize(self, x) -> np.ndarray:
        lo, hi = self.support
        return (np.asarray(x, dtype=np.float64) - lo) / (hi - lo)

    def _regime_cuts(self) -> tuple[float, float]:
        # stable forms: c1 via the three-point numerator, c2 as a positive sum
        mm2 = max(self.m1 * (1.0 - self.m1) - self.v, 0.0)
        c1 = mm2 / (1.0 - self.m1) if self.m1 < 1.0 else 0.0
        c2 = min(self.m1 + self.v / self.m1, 1.0) if self.m1 > 0.0 else 1.0
        return c1, c2

    def _envelopes(self, t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        t = np.clip(t, 0.0, 1.0)
        low = np.zeros_like(t)
        up = np.ones_like(t)
        if self.kind == "mean":
            m = self.m1
            left = t <= m
            denom = 1.0 - t[left]
            up[left] = np.where(denom < _EDGE_EPS, 1.0, (1.0 - m) / np.maximum(denom, _EDGE_EPS))
            right = ~left
            low[right] = 1.0 - m / t[right]
        elif self.kind == "pth":
            mp = self.mu_p**self.p
            left = t <= self.mu_p
            denom = 1.0 - t[left] ** self.p
            up[left] = np.where(denom < _EDGE_EPS, 1.0, (1.0 - mp) / np.maximum(denom, _EDGE_EPS))
            right = ~left
            low[right] = 1.0 - mp / t[right] ** self.p
        elif self.kind == "mean_var":
            m, v = self.m1, self.v
            if v <= 0.0:
                step = (t >= m).astype(np.float64)
                low = step
                up = step.copy()
            else:
                c1, c2 = self._regime_cuts()
                mm2 = max(m * (1.0 - m) - v, 0.0)
                two_point = (t < c1) | (t > c2)
                d2 = np.empty_like(t)
                d2[two_point] = (t[two_point] - m) ** 2
                p3 = v / (v + d2[two_point])
                up_tp = np.where(t[two_point] < c1, p3, 1.0)
                low_tp = np.where(t[two_point] < c1, 0.0, 1.0 - p3)
                up[two_point] = up_tp
                low[two_point] = low_tp
                mid = ~two_point
                if mm2 <= 0.0:
                    # maximum variance pins the distribution: mass 1-m at 0, m at 1
                    up[mid] = 1.0 - m
                    low[mid] = 1.0 - m
                else:
                    tm = t[mid]
                    p4 = np.minimum(mm2 / np.maximum(tm * (1.0 - tm), _EDGE_EPS), 1.0)
                    u = np.minimum(1.0 - m + tm * p4, 1.0)
                    up[mid] = u
                    low[mid] = np.maximum(u - p4, 0.0)
        # Full bin mass is reached at the right support edge no matter what.
        pin = t >= 1.0 - _EDGE_EPS
        low[pin] = 1.0
        up[pin] = 1.0
        return low, up

    def _gap_values(self, t: np.ndarray) -> np.ndarray:
        t = np.clip(t, 0.0, 1.0)
        if self.kind == "none":
            return np.ones_like(t)
        out = np.empty_like(t)
        if self.kind == "mean":
            m = self.m1
            left = t <= m
            denom = np.maximum(1.0 - t[left], _EDGE_EPS)
            out[left] = np.minimum((1.0 - m) / denom, 1.0)
            right = ~left
            out[right] = m / t[right]
        elif self.kind == "pth":
            mp = self.mu_p**self.p
            left = t <= self.mu_p
            denom = np.maximum(1.0 - t[left] ** self.p, _EDGE_EPS)
            out[left] = np.minimum((1.0 - mp) / denom, 1.0)
            right = ~left
            out[right] = mp / t[right] ** self.p
        elif self.kind == "mean_var":
            m, v = self.m1, self.v
            if v <= 0.0:
                return np.zeros_like(t)
            c1, c2 = self._regime_cuts()
            mm2 = max(m * (1.0 - m) - v, 0.0)
            two_point = (t < c1) | (t > c2)
            out[two_point] = v / (v + (t[two_point] - m) ** 2)
            mid = ~two_point
            if mm2 <= 0.0:
                out[mid] = 0.0
            else:
                tm = t[mid]
                out[mid] = np.minimum(mm2 / np.maximum(tm * (1.0 - tm), _EDGE_EPS), 1.0)
        return out

    def lower(self, x):
        """Lowest CDF value attainable at x under the constraints."""
        t = self._normalize(x)
        low, _ = self._envelopes(np.atleast_1d(t))
        return float(low[0]) if np.ndim(x) == 0 else low

    def upper(self, x):
        """Highest CDF value attainable at x under the constraints."""
        t = self._normalize(x)
        _, up = self._envelopes(np.atleast_1d(t))
        return float(up[0]) if np.ndim(x) == 0 else up

    def gap(self, x):
        """Envelope width upper - lower from the open-interval formulas."""
        t = self._normalize(x)
        g = self._gap_values(np.atleast_1d(t))
        return float(g[0]) if np.ndim(x) == 0 else g

    def regime_at(self, x) -> str:
        """Construction tag applying at scalar position x (support units)."""
        x = float(x)
        if not self.regime:
            return "none"
        for lo, hi, tag in self.regime:
            if lo <= x <= hi:
                return tag
        return self.regime[0][2] if x < self.regime[0][0] else self.regime[-1][2]

    def gap_integral(self) -> float:
        """Normalized loss: integral of the gap over the unit-rescaled bin."""
        if self.kind == "none":
            return 1.0
        if self.kind == "mean_var" and self.v <= 0.0:
            return 0.0
        if self.kind == "mean":
            hints = [self.m1]
        elif self.kind == "pth":
            hints = [self.mu_p]
        else:
            c1, c2 = self._regime_cuts()
            hints = sorted({min(max(c1, 0.0), 1.0), min(max(c2, 0.0), 1.0)})
        hints = [h for h in hints if 0.0 < h < 1.0]

        def f(t: float) -> float:
            return float(self._gap_values(np.asarray([t]))[0])

        value, _ = quad(f, 0.0, 1.0, points=hints or None, epsabs=_QUAD_ABS_TOL, limit=200)
        return value

    def rescale(self, lo: float, hi: float) -> "CdfBounds":
        """Same constraints expressed over the interval [lo, hi]."""
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
            raise DomainError(f"invalid support [{lo!r}, {hi!r}]")
        width = hi - lo
        regime = tuple((lo + a * width, lo + b * width, tag) for a, b, tag in self.regime)
        return dataclasses.replace(self, support=(float(lo), float(hi)), regime=regime)


def bounds_no_moment() -> CdfBounds:
    """Envelopes for a bin known only by its mass: the full unit square."""
    return CdfBounds(kind="none", regime=((0.0, 1.0, "none"),))


def bounds_mean(m1: float) -> CdfBounds:
    """Envelopes for a bin with known normalized mean."""
    m1 = _check_unit(m1, "normalized mean")
    regime = ((0.0, m1, "F1"), (m1, 1.0, "F2"))
    return CdfBounds(kind="mean", m1=m1, regime=regime)


def bounds_mean_var(m1: float, v: float) -> CdfBounds:
    """Envelopes for a bin with known normalized mean and variance."""
    m1, v = _check_feasible(m1, v)
    if v > 0.0 and (m1 == 0.0 or m1 == 1.0):
        raise InfeasibleMomentsError(f"mean {m1!r} admits no positive variance")
    bounds = CdfBounds(kind="mean_var", m1=m1, v=v)
    c1, c2 = bounds._regime_cuts()
    segs = []
    if c1 > 0.0:
        segs.append((0.0, c1, "F3"))
    segs.append((c1, c2, "F4") if v > 0.0 else (0.0, 1.0, "F3"))
    if v > 0.0 and c2 < 1.0:
        segs.append((c2, 1.0, "F3"))
    return dataclasses.replace(bounds, regime=tuple(segs))


def bounds_pth_moment(mu_p: float, p: int) -> CdfBounds:
    """Envelopes for a bin with one known p-th raw moment E[X^p] = mu_p**p.

    ``mu_p`` is the normalized p-th root of that moment.  For p = 1 this
    reduces exactly to :func:`bounds_mean`.
    """
    if isinstance(p, bool) or not isinstance(p, (int, np.integer)) or p < 1:
        raise DomainError(f"moment order must be an integer >= 1, got {p!r}")
    mu_p = _check_unit(mu_p, "normalized p-th moment root")
    return CdfBounds(kind="pth", mu_p=mu_p, p=int(p),
                     regime=((0.0, 1.0, "p-moment"),))


@dataclass(frozen=True)
class BinConstraint:
    """What a histogram records about one bin: support, mass, raw moments.

    ``mu`` and ``mu2`` are the first and second raw moments of the samples
    in the bin, in metric units; they are normalized to the unit interval
    internally.  ``mu2`` requires ``mu``.
    """

    a: float
    b: float
    mass: float
    mu: float | None = None
    mu2: float | None = None

    def __post_init__(self) -> None:
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.a >= self.b:
            raise DomainError(f"bin endpoints must satisfy a < b, got ({self.a!r}, {self.b!r})")
        _check_unit(self.mass, "bin mass")
        if self.mu2 is not None and self.mu is None:
            raise DomainError("second moment given without the first")
        if self.mu is not None:
            slack = _FEAS_ATOL * (1.0 + abs(self.a) + abs(self.b))
            if not np.isfinite(self.mu) or self.mu < self.a - slack or self.mu > self.b + slack:
                raise InfeasibleMomentsError(
                    f"bin mean {self.mu!r} outside support ({self.a!r}, {self.b!r}]"
                )
        if self.mu2 is not None:
            m1 = self.normalized_mean
            m2 = self._normalized_second_moment()
            var = m2 - m1 * m1
            box = m1 * (1.0 - m1)
            # The normalization (mu2 - 2*a*mu + a^2)/w^2 cancels catastrophically
            # for bins far from the origin; scale the slack to that error model
            # so real samples are never rejected (downstream use clips anyway).
            w = self.width
            cancel = (abs(self.mu2) + 2.0 * abs(self.a * self.mu) + self.a * self.a) / (w * w)
            slack = 1e-9 * (1.0 + cancel)
            if var < -slack or var > box + slack:
                raise InfeasibleMomentsError(
                    f"bin variance {var!r} outside the attainable box [0, {box!r}]"
                )

    @property
    def width(self) -> float:
        return self.b - self.a

    @property
    def normalized_mean(self) -> float | None:
        if self.mu is None:
            return None
        return min(max((self.mu - self.a) / self.width, 0.0), 1.0)

    def _normalized_second_moment(self) -> float:
        w = self.width
        return (self.mu2 - 2.0 * self.a * self.mu + self.a * self.a) / (w * w)

    @property
    def normalized_variance(self) -> float | None:
        """Normalized variance, clipped into the attainable box."""
        if self.mu2 is None:
            return None
        m1 = self.normalized_mean
        var = self._normalized_second_moment() - m1 * m1
        return min(max(var, 0.0), m1 * (1.0 - m1))

    def bounds(self) -> CdfBounds:
        """Envelope pair over (a, b) from the tightest recorded constraint."""
        if self.mu is None:
            base = bounds_no_moment()
        elif self.mu2 is None:
            base = bounds_mean(self.normalized_mean)
        else:
            base = bounds_mean_var(self.normalized_mean, self.normalized_variance)
        return base.rescale(self.a, self.b)

    def gap_integral(self) -> float:
        """Normalized loss for this bin, using closed forms where they exist."""
        if self.mu is None:
            return 1.0
        if self.mu2 is None:
            return mean_loss(self.normalized_mean)
        return emdcc_mean_var_closed(self.normalized_mean, self.normalized_variance)


@dataclass(frozen=True)
class PerBinLoss:
    """One bin's contribution to the histogram EMDCC."""

    index: int
    weight: float       # mass * width / r
    gap: float          # normalized loss g for the bin
    contribution: float  # weight * gap
    regime: str


@dataclass(frozen=True)
class EmdccReport:
    """Whole-histogram information loss and its per-bin decomposition."""

    total: float
    per_bin: tuple[PerBinLoss, ...]
    method: str  # "closed_form", or "quadrature" if any bin needed it


def _normalized_pth_root(a: float, width: float, n: float, sums: np.ndarray, p: int) -> float:
    """p-th root of E[((X-a)/width)**p] from raw power sums S_1..S_p."""
    acc = (-a) ** p  # k = 0 term, S_0/n = 1
    for k in range(1, p + 1):
        acc += comb(p, k) * (-a) ** (p - k) * (sums[k - 1] / n)
    val = acc / width**p
    val = min(max(val, 0.0), 1.0)
    return val ** (1.0 / p)


def emdcc_histogram(h: Histogram, range: tuple[float, float] | None = None) -> EmdccReport:
    """Information loss of a histogram representation, in [0, 1].

    Each nonempty bin contributes mass * width * g, where g is the
    normalized envelope-gap integral under the bin's best available
    constraint: 1 without annotations, the mean-entropy closed form for
    order-1 moments, the mean-plus-variance closed form for order 2, and
    quadrature of the single p-th-moment envelope for higher orders.  The
    sum is normalized by r, the span of the trimmed breaks (overridable via
    ``range``).
    """
    total = h.count()
    if total == 0:
        raise EmptyHistogramError("EMDCC of an empty histogram")
    if range is not None:
        lo, hi = float(range[0]), float(range[1])
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
            raise DomainError(f"invalid normalization range ({lo!r}, {hi!r})")
        r = hi - lo
    else:
        tb = h.trim().breaks
        r = float(tb[-1] - tb[0])

    order = h.moments.order if h.moments is not None else 0
    breaks = h.breaks
    counts = h.counts
    denom = float(total) * r

    entries: list[PerBinLoss] = []
    numer = 0.0
    used_quadrature = False
    for i, n in enumerate(counts):
        n = int(n)
        a = float(breaks[i])
        b = float(breaks[i + 1])
        w = b - a
        if n == 0:
            entries.append(PerBinLoss(i, 0.0, 0.0, 0.0, "empty"))
            continue
        if order == 0:
            g = 1.0
            tag = "none"
        elif order <= 2:
            mu = float(h.moments.sums[0, i]) / n
            mu2 = float(h.moments.sums[1, i]) / n if order == 2 else None
            mu = min(max(mu, a), b)
            constraint = BinConstraint(a, b, n / total, mu=mu, mu2=mu2)
            g = constraint.gap_integral()
            tag = "F1/F2" if order == 1 else "F3/F4"
        else:
            mu_p = _normalized_pth_root(a, w, float(n), h.moments.sums[:, i], order)
            g = bounds_pth_moment(mu_p, order).gap_integral()
            tag = "p-moment"
            used_quadrature = True
        piece = n * w * g
        numer += piece
        entries.append(PerBinLoss(i, (n * w) / denom, g, piece / denom, tag))
    return EmdccReport(
        total=numer / denom,
        per_bin=tuple(entries),
        method="quadrature" if used_quadrature else "closed_form",
    )


def information_gain(h: Histogram) -> float:
    """Storage multiple of plain equal bins needed to match this histogram's loss.

    For K equal-width bins annotated with moments and EMDCC X, plain equal
    bins reach loss X with 1/X bins, costing 1/X units against 2K units
    here, hence 1/(2*K*X).  Requires order >= 1 annotations and an
    equal-width layout; all bin means sitting exactly on bin edges gives
    X = 0 and the gain is reported as positive infinity.  The EMDCC here is
    normalized over the histogram's full break span so K and the
    normalization describe the same layout.
    """
    if h.count() == 0:
        raise EmptyHistogramError("information gain of an empty histogram")
    if h.moments is None:
        raise IncompatibleAnnotationError(
            "information gain requires moment annotations of order >= 1"
        )
    widths = h.widths
    if not np.allclose(widths, widths[0], rtol=1e-9, atol=0.0):
        raise UnsupportedLayoutError("information gain requires equal-width bins")
    x = emdcc_histogram(h, range=(float(h.breaks[0]), float(h.breaks[-1]))).total
    if x == 0.0:
        return math.inf
    return 1.0 / (2.0 * h.bin_count * x)
