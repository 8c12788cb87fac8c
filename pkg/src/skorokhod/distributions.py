"""Target laws, their distribution and quantile functions.

Every law used by the energy pipeline is a frozen value object exposing the
same small surface: ``cdf``, ``quantile()``, ``moments()``, ``support()`` and,
when it exists, ``pdf``.  Quantile functions follow the left-continuous
convention ``Q(u) = inf{x | F(x) >= u}`` and carry the list of points where
they fail to be smooth, which the spectral code uses to place quadrature
panels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .exceptions import InvalidDistributionError, UnboundedSupportError

__all__ = [
    "CdfTable",
    "QuantileFunction",
    "DistributionSpec",
    "Uniform",
    "Arcsine",
    "TwoPoint",
    "Atomic",
    "TabulatedCdf",
    "Empirical",
    "Normal",
    "ValidationReport",
    "validate",
    "require_valid",
    "quantile_from_cdf",
    "empirical_from_samples",
    "moments",
    "CLOSED_FORM_MEAN_TOL",
]

CLOSED_FORM_MEAN_TOL = 1e-9
PROB_SUM_TOL = 1e-12


# ---------------------------------------------------------------------------
# CDF tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CdfTable:
    """Tabulated distribution function.

    ``interpolation="linear"`` joins consecutive breakpoints by straight lines
    (repeated ``x`` values encode atoms); ``"step"`` is a right-continuous
    staircase that jumps to ``F[i]`` at ``x[i]``.  Left of ``x[0]`` the CDF
    is zero, so ``F[0] > 0`` places an atom at ``x[0]``.
    """

    x: np.ndarray
    F: np.ndarray
    interpolation: str = "linear"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        F = np.asarray(self.F, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "F", F)
        if x.ndim != 1 or x.shape != F.shape or x.size == 0:
            raise InvalidDistributionError("CDF table needs matching 1-d x and F arrays")
        if self.interpolation not in ("linear", "step"):
            raise InvalidDistributionError(f"unknown interpolation {self.interpolation!r}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(F))):
            raise InvalidDistributionError("CDF table entries must be finite")
        if np.any(np.diff(x) < 0):
            raise InvalidDistributionError("CDF table breakpoints must be sorted")
        if np.any(np.diff(F) < 0):
            raise InvalidDistributionError("CDF table is not non-decreasing")
        if F[0] < 0:
            raise InvalidDistributionError("CDF table starts below 0")
        if abs(F[-1] - 1.0) > PROB_SUM_TOL:
            raise InvalidDistributionError(f"CDF table ends at {F[-1]!r}, not 1")
        F = F.copy()
        F[-1] = 1.0
        object.__setattr__(self, "F", F)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.F.tolist()))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.interpolation == "step":
            idx = np.searchsorted(self.x, x, side="right") - 1
            return np.where(idx >= 0, self.F[np.clip(idx, 0, None)], 0.0)
        # right-continuous piecewise-linear; a repeated x takes its last F
        idx = np.searchsorted(self.x, x, side="right") - 1
        out = np.zeros_like(x)
        inside = idx >= 0
        i = np.clip(idx, 0, self.x.size - 1)
        j = np.clip(i + 1, 0, self.x.size - 1)
        x0, x1, F0, F1 = self.x[i], self.x[j], self.F[i], self.F[j]
        dx = x1 - x0
        frac = np.where(dx > 0, (x - x0) / np.where(dx > 0, dx, 1.0), 0.0)
        val = np.where(j > i, F0 + frac * (F1 - F0), F0)
        out = np.where(inside, val, out)
        return np.minimum(out, 1.0)

    def cdf_left(self, x):
        """Left limit ``F(x-)``."""
        x = np.asarray(x, dtype=float)
        return self.cdf(np.nextafter(x, -np.inf))

    def quantile_function(self) -> "QuantileFunction":
        x, F = self.x, self.F
        edges, start, end = [0.0], [], []
        if self.interpolation == "step":
            prev = 0.0
            for xi, Fi in zip(x, F):
                if Fi > prev:
                    start.append(xi)
                    end.append(xi)
                    edges.append(Fi)
                    prev = Fi
        else:
            if F[0] > 0:
                start.append(x[0])
                end.append(x[0])
                edges.append(F[0])
            for k in range(x.size - 1):
                if F[k + 1] > F[k]:
                    start.append(x[k])
                    end.append(x[k + 1])
                    edges.append(F[k + 1])
        edges[-1] = 1.0
        return QuantileFunction.piecewise_linear(edges, start, end)


def quantile_from_cdf(table: CdfTable, u: float) -> float:
    """Return ``inf{x | F(x) >= u}`` for a tabulated CDF.

    Evaluated directly from the table rather than through
    :meth:`CdfTable.quantile_function`, so the two can be checked against each
    other.
    """
    u = float(u)
    if not 0.0 < u < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {u!r}")
    x, F = table.x, table.F
    i = int(np.searchsorted(F, u, side="left"))  # first F[i] >= u
    if table.interpolation == "step" or i == 0:
        return float(x[i])
    F0, F1 = F[i - 1], F[i]
    return float(x[i - 1] + (u - F0) / (F1 - F0) * (x[i] - x[i - 1]))


def empirical_from_samples(samples: Sequence[float]) -> CdfTable:
    """Step CDF of the empirical measure of ``samples``."""
    xs = np.sort(np.asarray(samples, dtype=float), kind="stable")
    if xs.size < 2:
        raise InvalidDistributionError("an empirical CDF needs at least 2 samples")
    if not np.all(np.isfinite(xs)):
        raise InvalidDistributionError("samples must be finite")
    values, counts = np.unique(xs, return_counts=True)
    F = np.cumsum(counts) / xs.size
    return CdfTable(values, F, interpolation="step")


# ---------------------------------------------------------------------------
# Quantile functions
# ---------------------------------------------------------------------------


class QuantileFunction:
    """Non-decreasing map ``(0, 1) -> R`` with its non-smooth points.

    Either a vectorised callable or an exact piecewise-linear description
    (``edges``, per-segment ``start``/``end`` values) backs the function; the
    latter lets Fourier coefficients and energies be computed in closed form.
    Jumps are allowed at segment edges.  ``Q(0)`` and ``Q(1)`` evaluate to the
    support bounds.
    """

    def __init__(
        self,
        func: Callable[[np.ndarray], np.ndarray] | None = None,
        *,
        support: tuple[float, float],
        knots: Sequence[float] = (),
        segments: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None,
    ):
        if func is None and segments is None:
            raise ValueError("need a callable or a segment description")
        self._func = func
        self.segments = segments
        self.support = (float(support[0]), float(support[1]))
        k = np.unique(np.asarray(knots, dtype=float))
        self.knots = k[(k > 0) & (k < 1)]

    @classmethod
    def piecewise_linear(cls, edges, start, end) -> "QuantileFunction":
        edges = np.asarray(edges, dtype=float)
        start = np.asarray(start, dtype=float)
        end = np.asarray(end, dtype=float)
        if edges.size != start.size + 1 or start.shape != end.shape:
            raise ValueError("edges must have one more entry than segments")
        if edges[0] != 0.0 or edges[-1] != 1.0 or np.any(np.diff(edges) <= 0):
            raise ValueError("segment edges must increase strictly from 0 to 1")
        if np.any(end < start) or np.any(start[1:] < end[:-1]):
            raise InvalidDistributionError("quantile segments are not non-decreasing")
        return cls(
            support=(start[0], end[-1]),
            knots=edges[1:-1],
            segments=(edges, start, end),
        )

    @property
    def is_piecewise_linear(self) -> bool:
        return self.segments is not None

    @property
    def has_jumps(self) -> bool:
        if self.segments is None:
            return False
        _, start, end = self.segments
        return bool(np.any(start[1:] > end[:-1]))

    def __call__(self, u, side: str = "left"):
        """Evaluate at ``u``.

        ``side="left"`` is ``inf{x | F(x) >= u}``; ``side="right"`` is
        ``inf{x | F(x) > u}``.  They differ only at the levels of jumps.
        """
        u = np.asarray(u, dtype=float)
        if np.any((u < 0) | (u > 1)):
            raise ValueError("quantile level outside [0, 1]")
        if self.segments is None:
            out = np.asarray(self._func(np.clip(u, 0.0, 1.0)), dtype=float)
            out = np.where(u <= 0, self.support[0], out)
            return np.where(u >= 1, self.support[1], out)
        edges, start, end = self.segments
        idx = np.searchsorted(edges, u, side=side) - 1
        idx = np.clip(idx, 0, start.size - 1)
        e0, e1 = edges[idx], edges[idx + 1]
        t = np.clip((u - e0) / (e1 - e0), 0.0, 1.0)
        return start[idx] + t * (end[idx] - start[idx])

    def derivative(self, u):
        """``Q'(u)`` off the knots, from the segments or a central difference."""
        u = np.asarray(u, dtype=float)
        if self.segments is not None:
            edges, start, end = self.segments
            idx = np.clip(np.searchsorted(edges, u, side="right") - 1, 0, start.size - 1)
            return (end[idx] - start[idx]) / (edges[idx + 1] - edges[idx])
        h = 1e-6 * np.minimum(np.minimum(u, 1 - u), 1e-2)
        return (self._func(u + h) - self._func(u - h)) / (2 * h)

    def mean(self) -> float:
        """``∫_0^1 Q(u) du``: exact for segments, Gauss-Legendre otherwise."""
        if self.segments is not None:
            edges, start, end = self.segments
            return float(np.sum(0.5 * (start + end) * np.diff(edges)))
        pts = np.r_[0.0, self.knots, 1.0]
        t, w = np.polynomial.legendre.leggauss(64)
        total = 0.0
        for a, b in zip(pts[:-1], pts[1:]):
            # split each piece so endpoint behaviour is resolved
            sub = np.r_[a, a + (b - a) * np.array([1e-6, 1e-3, 0.05, 0.5, 0.95, 1 - 1e-3, 1 - 1e-6]), b]
            for c, d in zip(sub[:-1], sub[1:]):
                m, h = 0.5 * (c + d), 0.5 * (d - c)
                total += h * float(np.dot(w, self._func(m + h * t)))
        return total


# ---------------------------------------------------------------------------
# Distribution specs
# ---------------------------------------------------------------------------


class DistributionSpec:
    """Base class for target laws.  Subclasses are frozen dataclasses."""

    kind: str = ""
    mean_tolerance: float | None

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def moments(self) -> tuple[float, float]:
        raise NotImplementedError

    def quantile(self) -> QuantileFunction:
        raise NotImplementedError

    def cdf(self, x):
        raise NotImplementedError

    def cdf_left(self, x):
        return self.cdf(np.nextafter(np.asarray(x, dtype=float), -np.inf))

    pdf: Callable | None = None

    @property
    def has_density(self) -> bool:
        return False

    @property
    def bounded(self) -> bool:
        lo, hi = self.support()
        return math.isfinite(lo) and math.isfinite(hi)

    def default_mean_tolerance(self) -> float:
        return CLOSED_FORM_MEAN_TOL

    def effective_mean_tolerance(self) -> float:
        if self.mean_tolerance is not None:
            return float(self.mean_tolerance)
        return self.default_mean_tolerance()

    def shifted(self, dx: float) -> "DistributionSpec":
        raise NotImplementedError

    def centered(self) -> "DistributionSpec":
        """Copy translated so that the mean is zero."""
        return self.shifted(-self.moments()[0])


@dataclass(frozen=True)
class Uniform(DistributionSpec):
    a: float
    b: float
    mean_tolerance: float | None = None
    kind = "uniform"

    def __post_init__(self):
        if not self.b > self.a:
            raise InvalidDistributionError("uniform law needs a < b")

    def support(self):
        return (float(self.a), float(self.b))

    def moments(self):
        return (0.5 * (self.a + self.b), (self.b - self.a) ** 2 / 12.0)

    def quantile(self):
        return QuantileFunction.piecewise_linear([0.0, 1.0], [self.a], [self.b])

    def cdf(self, x):
        return np.clip((np.asarray(x, dtype=float) - self.a) / (self.b - self.a), 0.0, 1.0)

    def cdf_left(self, x):
        return self.cdf(x)

    @property
    def has_density(self):
        return True

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.a) & (x <= self.b), 1.0 / (self.b - self.a), 0.0)

    def shifted(self, dx):
        return Uniform(self.a + dx, self.b + dx, self.mean_tolerance)


@dataclass(frozen=True)
class Arcsine(DistributionSpec):
    """Arcsine law ``dx / (π sqrt(h² - (x - c)²))`` on ``(c - h, c + h)``."""

    center: float
    halfwidth: float
    mean_tolerance: float | None = None
    kind = "arcsine"

    def __post_init__(self):
        if not self.halfwidth > 0:
            raise InvalidDistributionError("arcsine law needs halfwidth > 0")

    def support(self):
        return (self.center - self.halfwidth, self.center + self.halfwidth)

    def moments(self):
        return (float(self.center), 0.5 * self.halfwidth**2)

    def quantile(self):
        c, h = self.center, self.halfwidth
        return QuantileFunction(lambda u: c - h * np.cos(np.pi * u), support=self.support())

    def cdf(self, x):
        t = np.clip((np.asarray(x, dtype=float) - self.center) / self.halfwidth, -1.0, 1.0)
        return np.arccos(-t) / np.pi

    def cdf_left(self, x):
        return self.cdf(x)

    @property
    def has_density(self):
        return True

    def pdf(self, x):
        t = (np.asarray(x, dtype=float) - self.center) / self.halfwidth
        with np.errstate(divide="ignore", invalid="ignore"):
            d = 1.0 / (np.pi * self.halfwidth * np.sqrt(1.0 - t * t))
        return np.where(np.abs(t) < 1, d, 0.0)

    def shifted(self, dx):
        return Arcsine(self.center + dx, self.halfwidth, self.mean_tolerance)


def _atoms_to_quantile(xs: np.ndarray, ps: np.ndarray) -> QuantileFunction:
    order = np.argsort(xs, kind="stable")
    xs, ps = xs[order], ps[order]
    keep = ps > 0
    xs, ps = xs[keep], ps[keep]
    edges = np.r_[0.0, np.cumsum(ps)]
    edges[-1] = 1.0
    return QuantileFunction.piecewise_linear(edges, xs, xs)


class _DiscreteMixin:
    """Shared behaviour of laws that are finite sums of atoms."""

    def _atoms(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def support(self):
        xs, ps = self._atoms()
        xs = xs[ps > 0]
        return (float(xs.min()), float(xs.max()))

    def moments(self):
        xs, ps = self._atoms()
        mean = float(np.dot(ps, xs))
        return (mean, float(np.dot(ps, (xs - mean) ** 2)))

    def quantile(self):
        return _atoms_to_quantile(*self._atoms())

    def cdf(self, x):
        xs, ps = self._atoms()
        x = np.asarray(x, dtype=float)
        return np.minimum((ps[None, :] * (xs[None, :] <= x.reshape(-1, 1))).sum(axis=1).reshape(x.shape), 1.0)

    def cdf_left(self, x):
        xs, ps = self._atoms()
        x = np.asarray(x, dtype=float)
        return (ps[None, :] * (xs[None, :] < x.reshape(-1, 1))).sum(axis=1).reshape(x.shape)


@dataclass(frozen=True)
class TwoPoint(_DiscreteMixin, DistributionSpec):
    x1: float
    p1: float
    x2: float
    mean_tolerance: float | None = None
    kind = "two_point"

    def __post_init__(self):
        if not 0.0 <= self.p1 <= 1.0:
            raise InvalidDistributionError("p1 must be a probability")

    def _atoms(self):
        return np.array([self.x1, self.x2], float), np.array([self.p1, 1.0 - self.p1])

    def shifted(self, dx):
        return TwoPoint(self.x1 + dx, self.p1, self.x2 + dx, self.mean_tolerance)


@dataclass(frozen=True)
class Atomic(_DiscreteMixin, DistributionSpec):
    points: tuple[tuple[float, float], ...]
    mean_tolerance: float | None = None
    kind = "atomic"

    def __post_init__(self):
        pts = tuple((float(x), float(p)) for x, p in self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise InvalidDistributionError("atomic law needs at least one atom")
        ps = np.array([p for _, p in pts])
        if np.any(ps < 0):
            raise InvalidDistributionError("negative atom probability")
        if abs(ps.sum() - 1.0) > PROB_SUM_TOL:
            raise InvalidDistributionError(f"atom probabilities sum to {ps.sum()!r}, not 1")

    def _atoms(self):
        xs = np.array([x for x, _ in self.points])
        ps = np.array([p for _, p in self.points])
        return xs, ps / ps.sum()

    def shifted(self, dx):
        return Atomic(tuple((x + dx, p) for x, p in self.points), self.mean_tolerance)


@dataclass(frozen=True)
class TabulatedCdf(DistributionSpec):
    table: CdfTable
    mean_tolerance: float | None = None
    kind = "cdf_table"

    def support(self):
        return (float(self.table.x[0]), float(self.table.x[-1]))

    def quantile(self):
        return self.table.quantile_function()

    def moments(self):
        edges, start, end = self.quantile().segments
        du = np.diff(edges)
        mean = float(np.sum(du * 0.5 * (start + end)))
        # E[X^2] of a linear piece: du * (s^2 + s e + e^2) / 3
        m2 = float(np.sum(du * (start**2 + start * end + end**2) / 3.0))
        return (mean, max(m2 - mean**2, 0.0))

    def cdf(self, x):
        return self.table.cdf(x)

    def cdf_left(self, x):
        return self.table.cdf_left(x)

    @property
    def has_density(self):
        if self.table.interpolation == "step":
            return False
        q = self.quantile()
        _, start, end = q.segments
        return not q.has_jumps and bool(np.all(end > start))

    def pdf(self, x):
        edges, start, end = self.quantile().segments
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for e0, e1, s, e in zip(edges[:-1], edges[1:], start, end):
            if e > s:
                out = np.where((x >= s) & (x < e), (e1 - e0) / (e - s), out)
        return out

    def shifted(self, dx):
        return TabulatedCdf(CdfTable(self.table.x + dx, self.table.F, self.table.interpolation), self.mean_tolerance)


@dataclass(frozen=True, eq=False)
class Empirical(DistributionSpec):
    """Empirical measure of a finite sample."""

    samples: np.ndarray
    mean_tolerance: float | None = None
    kind = "empirical"

    def __post_init__(self):
        s = np.sort(np.asarray(self.samples, dtype=float).ravel(), kind="stable")
        if s.size < 2:
            raise InvalidDistributionError("an empirical law needs at least 2 samples")
        if not np.all(np.isfinite(s)):
            raise InvalidDistributionError("samples must be finite")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return int(self.samples.size)

    def support(self):
        return (float(self.samples[0]), float(self.samples[-1]))

    def moments(self):
        return (float(np.mean(self.samples)), float(np.var(self.samples)))

    def default_mean_tolerance(self):
        sigma = math.sqrt(self.moments()[1])
        return max(3.0 * sigma / math.sqrt(self.n), CLOSED_FORM_MEAN_TOL)

    def quantile(self):
        # order-statistic staircase: Q(u) = x_(ceil(n u))
        n = self.n
        edges = np.arange(n + 1) / n
        return QuantileFunction.piecewise_linear(edges, self.samples, self.samples)

    def cdf(self, x):
        return np.searchsorted(self.samples, np.asarray(x, dtype=float), side="right") / self.n

    def cdf_left(self, x):
        return np.searchsorted(self.samples, np.asarray(x, dtype=float), side="left") / self.n

    def table(self) -> CdfTable:
        return empirical_from_samples(self.samples)

    def shifted(self, dx):
        return Empirical(self.samples + dx, self.mean_tolerance)


@dataclass(frozen=True)
class Normal(DistributionSpec):
    """Centred Gaussian.  Representable so that it can be refused with a reason."""

    scale: float
    mean_tolerance: float | None = None
    kind = "normal"

    def support(self):
        return (-math.inf, math.inf)

    def moments(self):
        return (0.0, float(self.scale) ** 2)

    def quantile(self):
        s = self.scale
        return QuantileFunction(lambda u: stats.norm.ppf(u, scale=s), support=self.support())

    def cdf(self, x):
        return stats.norm.cdf(x, scale=self.scale)

    @property
    def has_density(self):
        return True

    def pdf(self, x):
        return stats.norm.pdf(x, scale=self.scale)

    def shifted(self, dx):
        raise InvalidDistributionError("only the centred normal law is representable")


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    mean: float
    variance: float
    support: tuple[float, float]
    bounded: bool
    mean_tolerance: float
    reasons: tuple[str, ...] = field(default_factory=tuple)

    def raise_if_invalid(self) -> None:
        if self.passed:
            return
        msg = "; ".join(self.reasons)
        if not self.bounded:
            raise UnboundedSupportError(msg)
        raise InvalidDistributionError(msg)


def validate(spec: DistributionSpec) -> ValidationReport:
    """Check that ``spec`` is centred, non-degenerate and boundedly supported."""
    mean, var = spec.moments()
    lo, hi = spec.support()
    bounded = spec.bounded
    tol = spec.effective_mean_tolerance()
    reasons = []
    if not bounded:
        reasons.append(
            "unbounded support: every domain embedding this law has infinite "
            "perimeter, hence infinite Skorokhod energy"
        )
    if abs(mean) > tol:
        reasons.append(f"mean {mean:.12g} exceeds tolerance {tol:.3g}")
    if not var > 0:
        reasons.append("degenerate law: variance is zero")
    return ValidationReport(
        passed=not reasons,
        mean=mean,
        variance=var,
        support=(lo, hi),
        bounded=bounded,
        mean_tolerance=tol,
        reasons=tuple(reasons),
    )


def require_valid(spec: DistributionSpec) -> ValidationReport:
    report = validate(spec)
    report.raise_if_invalid()
    return report


def moments(spec: DistributionSpec) -> tuple[float, float]:
    """``(mean, variance)`` of ``spec``."""
    return spec.moments()
