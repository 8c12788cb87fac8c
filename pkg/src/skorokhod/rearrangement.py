"""Symmetric decreasing rearrangement and the Pólya–Szegő energy comparison.

Sampled functions live on ``x_j = -L + 2Lj/M`` (``j = 0..M-1``), the same
vertex grid as :class:`~skorokhod.spectral.PeriodicSamples` when ``L = π``.
The grid holds ``x = 0`` and one endpoint ``-L``, so the discrete
rearrangement of an even input is exactly even.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.polynomial import legendre

from .distributions import QuantileFunction
from .spectral import FourierSeries, PeriodicSamples, dft_series, evaluate, kinetic_energy

__all__ = [
    "SampledFunction",
    "rearrange_samples",
    "rearranged_quantile",
    "trace_rearrangement",
    "rearranged_energy",
    "polya_szego_gap",
    "PolyaSzegoResult",
    "equimeasurable",
    "monotone_equal_check",
]


@dataclass(frozen=True, eq=False)
class SampledFunction:
    values: np.ndarray
    L: float = math.pi

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2 or v.size % 2:
            raise ValueError("a sampled function needs an even number of values")
        if not np.all(np.isfinite(v)):
            raise ValueError("sampled values must be finite")
        if not self.L > 0:
            raise ValueError("half-length must be positive")
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return int(self.values.size)

    @property
    def x(self) -> np.ndarray:
        return -self.L + 2.0 * self.L * np.arange(self.M) / self.M

    @classmethod
    def from_function(cls, f, M: int, L: float = math.pi) -> "SampledFunction":
        x = -L + 2.0 * L * np.arange(M) / M
        return cls(f(x), L)


def _center_out_order(M: int) -> np.ndarray:
    """Grid indices by increasing ``|x|``, positive side first on ties."""
    half = M // 2
    k = np.arange(1, half)
    order = np.empty(M, dtype=int)
    order[0] = half
    order[1:-1:2] = half + k
    order[2:-1:2] = half - k
    order[-1] = 0
    return order


def rearrange_samples(f: SampledFunction) -> SampledFunction:
    """Discrete layer cake: largest value at ``x = 0``, then outward, alternating."""
    out = np.empty(f.M)
    out[_center_out_order(f.M)] = np.sort(f.values, kind="stable")[::-1]
    return SampledFunction(out, f.L)


def rearranged_quantile(q: QuantileFunction, x):
    """``Q*(x) = Q(1 - 2|x|)`` on ``(-½, ½)``."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) >= 0.5):
        raise ValueError("rearranged quantile is defined on (-1/2, 1/2)")
    return q(1.0 - 2.0 * np.abs(x))


def trace_rearrangement(q: QuantileFunction, theta):
    """``ψ*(θ) = Q(1 - |θ|/π)``, the rearrangement of any trace with law ``Q``."""
    theta = np.asarray(theta, dtype=float)
    if np.any(np.abs(theta) > math.pi):
        raise ValueError("angle outside [-π, π]")
    return q(1.0 - np.abs(theta) / math.pi)


def equimeasurable(f: SampledFunction, g: SampledFunction, atol: float = 1e-9) -> bool:
    """True iff the two sample multisets agree entrywise after sorting."""
    if f.M != g.M or f.L != g.L:
        raise ValueError("equimeasurability is compared on matching grids only")
    scale = max(1.0, float(np.max(np.abs(f.values))), float(np.max(np.abs(g.values))))
    return bool(np.all(np.abs(np.sort(f.values) - np.sort(g.values)) <= atol * scale))


def monotone_equal_check(f: SampledFunction, g: SampledFunction, max_exceptions: int = 1,
                         atol: float = 1e-12) -> bool:
    """Two non-decreasing samplings with the same law agree off a few points.

    ``max_exceptions`` bounds the mismatches tolerated (the number of jumps
    where left and right conventions may differ).
    """
    if f.M != g.M or f.L != g.L:
        raise ValueError("grids differ")
    for h, name in ((f, "first"), (g, "second")):
        if np.any(np.diff(h.values) < -atol):
            raise ValueError(f"{name} function is not non-decreasing")
    mismatches = int(np.count_nonzero(np.abs(f.values - g.values) > atol))
    return mismatches <= max_exceptions


# ---------------------------------------------------------------------------
# Energy of the rearranged trace
# ---------------------------------------------------------------------------


def _derivative_series(s: FourierSeries) -> FourierSeries:
    n = np.arange(1, s.N + 1)
    return FourierSeries(0.0, n * s.b, -n * s.a)


def _critical_angles(s: FourierSeries) -> np.ndarray:
    """Zeros of ``f'`` on the circle as roots of ``z^K f'(θ)``."""
    nz = np.flatnonzero(np.hypot(s.a, s.b))
    if nz.size == 0:
        return np.empty(0)
    K = int(nz[-1]) + 1
    n = np.arange(1, K + 1)
    d_pos = n * (s.b[:K] + 1j * s.a[:K]) / 2.0
    coeffs = np.concatenate([d_pos[::-1], [0.0], np.conj(d_pos)])  # z^{2K} .. z^0
    roots = np.roots(coeffs)
    on_circle = roots[np.abs(np.abs(roots) - 1.0) < 1e-5]
    theta = np.sort(np.angle(on_circle))
    ds = _derivative_series(s)
    dds = _derivative_series(ds)
    for _ in range(3):
        fpp = evaluate(dds, theta)
        step = np.where(fpp != 0, evaluate(ds, theta) / np.where(fpp != 0, fpp, 1.0), 0.0)
        theta = theta - step
    theta = np.sort(np.mod(theta + math.pi, 2 * math.pi) - math.pi)
    if theta.size:
        keep = np.r_[True, np.diff(theta) > 1e-9]
        theta = theta[keep]
        if theta.size > 1 and theta[0] + 2 * math.pi - theta[-1] <= 1e-9:
            theta = theta[:-1]
    return theta


class _TrigPoly:
    """``f`` and ``f'`` of a real trigonometric polynomial at array arguments."""

    def __init__(self, s: FourierSeries):
        n = np.arange(1, s.N + 1)
        self.a0 = 0.5 * s.a0
        self.c = s.a - 1j * s.b
        self.dc = 1j * n * self.c
        self.n = n

    def __call__(self, th):
        z = np.exp(1j * th)[..., None]
        e = np.cumprod(np.broadcast_to(z, z.shape[:-1] + (self.n.size,)), axis=-1)
        return self.a0 + (e @ self.c).real, (e @ self.dc).real


def _solve_monotone(poly: _TrigPoly, a, b, inc, target, iters: int = 60):
    """Safeguarded Newton for ``f(θ) = target`` with ``f`` monotone on ``[a, b]``.

    Every iterate keeps a bracket; Newton steps that leave it are replaced
    by bisection.
    """
    th = 0.5 * (a + b)
    for _ in range(iters):
        f, df = poly(th)
        r = f - target
        below = (r < 0) == inc  # root lies to the right of th
        a = np.where(below, th, a)
        b = np.where(below, b, th)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = th - r / df
        ok = (newton >= a) & (newton <= b) & np.isfinite(newton)
        # a correction below 1e-9 means Newton is in its quadratic regime,
        # so th is already at rounding level even if the step leaves the bracket
        if np.all(np.abs(newton - th) <= 1e-9):
            return np.where(ok, newton, th)
        th = np.where(ok, newton, 0.5 * (a + b))
    return th


class _InverseTable:
    """Tabulated monotone pieces, clustered at the critical ends, for brackets."""

    def __init__(self, poly: _TrigPoly, starts, ends, K: int = 64):
        t = 0.5 * (1.0 - np.cos(np.pi * np.arange(K + 1) / K))
        self.theta = starts[:, None] + (ends - starts)[:, None] * t
        self.values = poly(self.theta)[0]
        self.inc = self.values[:, -1] > self.values[:, 0]

    def bracket(self, p: int, x):
        th, v = self.theta[p], self.values[p]
        if not self.inc[p]:
            th, v = th[::-1], v[::-1]
        k = np.clip(np.searchsorted(v, x) - 1, 0, v.size - 2)
        return th[k], th[k + 1]


def rearranged_energy(s: FourierSeries, tol: float = 1e-12) -> float:
    """Kinetic energy of the symmetric decreasing rearrangement of a trig polynomial.

    If ``ρ`` is the law of ``f(θ)`` under uniform ``θ`` and ``Q`` its quantile,
    the rearrangement is ``Q(1 - |θ|/π)`` and its energy is
    ``(1/2π²) ∫ Q'² du = (1/π) ∫ dx / Σ_k |f'(θ_k(x))|^{-1}``, the sum running
    over the preimages of ``x``.  The critical points of ``f`` split the range
    into intervals on which the preimages are smooth; each interval is
    integrated by Gauss-Legendre in a cosine-stretched variable that absorbs
    the square-root behaviour at critical values.
    """
    crit = _critical_angles(s)
    if crit.size == 0:
        return 0.0
    poly = _TrigPoly(s)
    starts = crit
    ends = np.r_[crit[1:], crit[0] + 2 * math.pi]
    vstart = poly(starts)[0]
    vend = poly(ends)[0]
    pmin, pmax = np.minimum(vstart, vend), np.maximum(vstart, vend)
    levels = np.unique(np.r_[vstart, vend])
    table = _InverseTable(poly, starts, ends)
    t_nodes, t_w = legendre.leggauss(40)

    def integrand(x0, x1, t):
        # t in (0, 1) -> x in (x0, x1), clustered at both ends
        x = x0 + (x1 - x0) * 0.5 * (1.0 - np.cos(math.pi * t))
        dxdt = (x1 - x0) * 0.5 * math.pi * np.sin(math.pi * t)
        cover = np.flatnonzero((pmin <= x0) & (pmax >= x1))
        shape = (cover.size, x.size)
        lo, hi = np.empty(shape), np.empty(shape)
        for row, p in enumerate(cover):
            lo[row], hi[row] = table.bracket(p, x)
        a, b = np.minimum(lo, hi), np.maximum(lo, hi)
        inc = np.broadcast_to(table.inc[cover, None], shape)
        th = _solve_monotone(poly, a, b, inc, np.broadcast_to(x, shape))
        S = np.sum(1.0 / np.abs(poly(th)[1]), axis=0)
        return dxdt / S

    def gl(x0, x1, t0, t1):
        m, h = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
        return h * float(np.dot(t_w, integrand(x0, x1, m + h * t_nodes)))

    total = 0.0
    for x0, x1 in zip(levels[:-1], levels[1:]):
        if x1 - x0 <= 0:
            continue
        stack = [(0.0, 1.0, gl(x0, x1, 0.0, 1.0), 0)]
        while stack:
            t0, t1, whole, depth = stack.pop()
            tm = 0.5 * (t0 + t1)
            left, right = gl(x0, x1, t0, tm), gl(x0, x1, tm, t1)
            if abs(left + right - whole) <= tol * max(1.0, abs(whole)) or depth >= 12:
                total += left + right
            else:
                stack += [(t0, tm, left, depth + 1), (tm, t1, right, depth + 1)]
    return total / math.pi


class PolyaSzegoResult(NamedTuple):
    energy_rearranged: float
    energy_original: float


def polya_szego_gap(f: SampledFunction, N: int, method: str = "levelset") -> PolyaSzegoResult:
    """Energies of a band-limited trace and of its rearrangement.

    ``f`` must sample a trigonometric polynomial of degree ``≤ N`` on at least
    ``2N + 2`` points, so its energy is spectrally exact.  The rearrangement
    is not band-limited; ``method="levelset"`` computes its energy exactly
    from the recovered polynomial, ``method="samples"`` rearranges the
    samples and reads the energy of the first ``N`` DFT modes (a lower
    bound that ignores the rearrangement's high-frequency tail).
    """
    if abs(f.L - math.pi) > 1e-12:
        raise ValueError("energies are defined for 2π-periodic traces (L = π)")
    series = dft_series(PeriodicSamples(f.values), N)
    recon = evaluate(series, f.x)
    scale = max(1.0, float(np.max(np.abs(f.values))))
    if np.max(np.abs(recon - f.values)) > 1e-9 * scale:
        raise ValueError(f"samples are not a trigonometric polynomial of degree <= {N}")
    e_orig = kinetic_energy(series)
    if method == "levelset":
        e_rearr = rearranged_energy(series)
    elif method == "samples":
        e_rearr = kinetic_energy(dft_series(PeriodicSamples(rearrange_samples(f).values), N))
    else:
        raise ValueError(f"unknown method {method!r}")
    return PolyaSzegoResult(e_rearr, e_orig)
