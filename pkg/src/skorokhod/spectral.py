"""Fourier analysis of 2π-periodic boundary functions.

Conventions: a real series is ``a0/2 + Σ a_n cos(nθ) + b_n sin(nθ)`` and
sampled functions live on the grid ``θ_j = -π + 2πj/M``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft
from numpy.polynomial import legendre
from scipy.special import spherical_jn

from .distributions import QuantileFunction
from .exceptions import AliasingError, QuadratureError

__all__ = [
    "FourierSeries",
    "PeriodicSamples",
    "QuadConfig",
    "ConvergenceDiagnostic",
    "gross_coefficients",
    "kinetic_energy",
    "hilbert_multiplier",
    "dft_series",
    "evaluate",
    "energy_convergence_diagnostic",
    "diagnose_energy_terms",
    "write_series_csv",
    "read_series_csv",
]


@dataclass(frozen=True, eq=False)
class FourierSeries:
    """Real trigonometric coefficients ``a0, a_1..a_N, b_1..b_N``."""

    a0: float
    a: np.ndarray
    b: np.ndarray
    error: float = 0.0  # quadrature error estimate on each coefficient

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).ravel()
        b = np.asarray(self.b, dtype=float).ravel()
        if b.size == 0 and a.size:
            b = np.zeros_like(a)
        if a.shape != b.shape:
            raise ValueError("cosine and sine coefficient arrays differ in length")
        if not (math.isfinite(self.a0) and np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("Fourier coefficients must be finite")
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def N(self) -> int:
        return int(self.a.size)

    @classmethod
    def from_modes(cls, a=(), b=(), a0: float = 0.0) -> "FourierSeries":
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        n = max(a.size, b.size)
        return cls(a0, np.pad(a, (0, n - a.size)), np.pad(b, (0, n - b.size)))

    def l2_norm(self) -> float:
        """``‖f‖_2`` with the normalised measure ``dθ/2π``."""
        return math.sqrt(self.a0**2 / 4 + 0.5 * float(np.sum(self.a**2 + self.b**2)))

    def truncated(self, N: int) -> "FourierSeries":
        return FourierSeries(self.a0, self.a[:N], self.b[:N], self.error)

    def __neg__(self):
        return FourierSeries(-self.a0, -self.a, -self.b, self.error)


@dataclass(frozen=True, eq=False)
class PeriodicSamples:
    """Values on ``θ_j = -π + 2πj/M``; complex values are allowed."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 1:
            raise ValueError("periodic samples must be 1-d")
        if v.size < 4 or v.size % 2:
            raise ValueError("grid size must be even and at least 4")
        if not np.all(np.isfinite(v)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "values", v)

    @property
    def M(self) -> int:
        return int(self.values.size)

    @property
    def theta(self) -> np.ndarray:
        return grid(self.M)

    @classmethod
    def from_function(cls, f, M: int) -> "PeriodicSamples":
        return cls(f(grid(M)))


def grid(M: int) -> np.ndarray:
    return -np.pi + 2.0 * np.pi * np.arange(M) / M


@dataclass(frozen=True)
class QuadConfig:
    """Settings of the panel quadrature used for Gross coefficients.

    ``order`` is the Legendre degree fitted on each panel, ``tol`` the
    accepted L1 fit error per panel, ``max_depth`` the bisection limit.
    """

    order: int = 24
    tol: float = 1e-14
    max_depth: int = 50
    max_panels: int = 20000


# ---------------------------------------------------------------------------
# Gross coefficients
# ---------------------------------------------------------------------------


def gross_coefficients(q: QuantileFunction, N: int, quad: QuadConfig | None = None,
                       center_atol: float | None = None) -> FourierSeries:
    """Cosine coefficients of ``θ ↦ Q(|θ|/π)``: ``a_n = 2∫_0^1 Q(u) cos(nπu) du``.

    Piecewise-linear quantiles are integrated in closed form.  Anything else
    is fitted by Legendre polynomials on adaptively bisected panels between
    the knots and integrated exactly against the cosine, which keeps the cost
    per panel independent of ``n``.

    Raises :class:`QuadratureError` if a panel cannot be resolved, and
    ``ValueError`` if ``a0/2`` (the mean) is not zero within ``center_atol``.
    """
    if N < 1:
        raise ValueError("need at least one mode")
    quad = quad or QuadConfig()
    if q.is_piecewise_linear:
        c = _piecewise_linear_cosine_integrals(*q.segments, N)
        err = 0.0
    else:
        c, err = _filon_cosine_integrals(q, N, quad)
    a = 2.0 * c
    lo, hi = q.support
    if center_atol is None:
        center_atol = 1e-8 * max(1.0, hi - lo)
    if abs(a[0] / 2) > center_atol + err:
        raise ValueError(f"quantile has mean {a[0] / 2:.3e}; the law is not centred")
    return FourierSeries(a[0], a[1:], np.zeros(N), error=2.0 * err)


def _cos_sum_uniform(w: np.ndarray, K: int, N: int) -> np.ndarray:
    """``Σ_{k=0}^{K} w_k cos(π k n / K)`` for ``n = 0..N`` via a DCT-I."""
    if K == 1:
        base = np.array([w[0] + w[1], w[0] - w[1]])
    else:
        y = scipy.fft.dct(w, type=1)  # y_n = w_0 + (-1)^n w_K + 2 Σ_{1..K-1}
        n = np.arange(K + 1)
        base = 0.5 * (y + w[0] + (-1.0) ** n * w[K])
    n = np.arange(N + 1) % (2 * K)
    n = np.where(n > K, 2 * K - n, n)
    return base[n]


def _sin_sum_uniform(J: np.ndarray, K: int, N: int) -> np.ndarray:
    """``Σ_{k=1}^{K-1} J_k sin(π k n / K)`` for ``n = 0..N`` via a DST-I."""
    out_base = np.zeros(2 * K)
    if K > 1:
        y = scipy.fft.dst(J[1:K], type=1)  # y_{n-1} = 2 Σ J_k sin(π k n / K)
        out_base[1:K] = 0.5 * y
        out_base[K + 1:] = -out_base[1:K][::-1]
    return out_base[np.arange(N + 1) % (2 * K)]


def _piecewise_linear_cosine_integrals(edges, start, end, N: int) -> np.ndarray:
    """``∫_0^1 Q(u) cos(nπu) du`` for ``n = 0..N``, exactly.

    Integration by parts turns the integral into sums over slopes and jumps;
    on a uniform edge grid those sums are a DCT-I and a DST-I.
    """
    edges = np.asarray(edges, float)
    K = edges.size - 1
    du = np.diff(edges)
    slope = (end - start) / du
    jumps = np.zeros(K + 1)
    jumps[1:K] = start[1:] - end[:-1]
    # w_k: coefficient of cos(ω e_k) in Σ_seg slope (cos ω e_k - cos ω e_{k+1})
    w = np.zeros(K + 1)
    w[:K] += slope
    w[1:] -= slope
    out = np.empty(N + 1)
    out[0] = float(np.sum(0.5 * (start + end) * du))
    n = np.arange(1, N + 1)
    omega = n * np.pi
    uniform = K > 1 and np.allclose(edges, np.arange(K + 1) / K, rtol=0, atol=1e-15)
    if uniform:
        cs = _cos_sum_uniform(w, K, N)[1:]
        sn = _sin_sum_uniform(jumps, K, N)[1:]
    else:
        cs = np.empty(N)
        sn = np.empty(N)
        nzw = np.flatnonzero(w)
        nzj = np.flatnonzero(jumps)
        chunk = max(1, 2_000_000 // max(1, nzw.size + nzj.size))
        for i in range(0, N, chunk):
            om = omega[i:i + chunk, None]
            cs[i:i + chunk] = np.cos(om * edges[nzw]) @ w[nzw]
            sn[i:i + chunk] = np.sin(om * edges[nzj]) @ jumps[nzj]
    out[1:] = -(cs / omega + sn) / omega
    return out


def _legendre_fit(f, a: float, b: float, order: int):
    t, w = legendre.leggauss(order + 1)
    m, h = 0.5 * (a + b), 0.5 * (b - a)
    y = np.asarray(f(m + h * t), dtype=float)
    V = legendre.legvander(t, order)
    return (V * w[:, None]).T @ y * (2 * np.arange(order + 1) + 1) / 2.0


def _adaptive_panels(q: QuantileFunction, quad: QuadConfig):
    f = q._func
    lo, hi = q.support
    scale = max(1.0, abs(lo), abs(hi))
    stack = []
    pts = np.r_[0.0, q.knots, 1.0]
    for a, b in zip(pts[:-1], pts[1:]):
        stack.append((a, b, 0))
    panels, total_err = [], 0.0
    while stack:
        a, b, depth = stack.pop()
        c = _legendre_fit(f, a, b, quad.order)
        tail = float(np.abs(c[-2:]).sum())
        err = tail * (b - a)
        if err <= quad.tol * scale * max(b - a, 1e-3) or b - a < 1e-15:
            panels.append((a, b, c))
            total_err += err
            continue
        if depth >= quad.max_depth or len(panels) + len(stack) > quad.max_panels:
            raise QuadratureError(
                f"quantile not resolved on [{a:.3g}, {b:.3g}] (fit error {err:.2e}); "
                "check for an unlisted jump or kink"
            )
        mid = 0.5 * (a + b)
        stack.append((mid, b, depth + 1))
        stack.append((a, mid, depth + 1))
    return panels, total_err


def _filon_cosine_integrals(q: QuantileFunction, N: int, quad: QuadConfig):
    """Legendre-Filon rule.  With ``u = m + h t`` on a panel,

    ``∫ P_k(t(u)) cos(ωu) du = 2h j_k(ωh) Re[i^k e^{iωm}]``.
    """
    panels, err = _adaptive_panels(q, quad)
    omega = np.arange(N + 1) * np.pi
    out = np.zeros(N + 1)
    k = np.arange(quad.order + 1)
    for a, b, c in sorted(panels):
        m, h = 0.5 * (a + b), 0.5 * (b - a)
        cs, sn = np.cos(omega * m), np.sin(omega * m)
        acc_even = np.zeros(N + 1)
        acc_odd = np.zeros(N + 1)
        for kk in k:
            if c[kk] == 0.0:
                continue
            jk = spherical_jn(kk, omega * h)
            if kk % 2 == 0:
                acc_even += (-1.0) ** (kk // 2) * c[kk] * jk
            else:
                acc_odd += (-1.0) ** ((kk - 1) // 2) * c[kk] * jk
        out += 2.0 * h * (acc_even * cs - acc_odd * sn)
    return out, err


# ---------------------------------------------------------------------------
# Energy, Hilbert multiplier, DFT, evaluation
# ---------------------------------------------------------------------------


def kinetic_energy(s: FourierSeries) -> float:
    """``¼ Σ n² (a_n² + b_n²)``: half the mean square of the derivative."""
    n = np.arange(1, s.N + 1, dtype=float)
    return 0.25 * float(np.sum(n * n * (s.a * s.a + s.b * s.b)))


def hilbert_multiplier(s: FourierSeries) -> FourierSeries:
    """Conjugate function: ``cos nθ -> sin nθ``, ``sin nθ -> -cos nθ``, constant -> 0."""
    return FourierSeries(0.0, -s.b.copy(), s.a.copy(), s.error)


def dft_series(g: PeriodicSamples, N: int) -> FourierSeries:
    """Trapezoid (DFT) coefficients of real samples, exact for degree ≤ N."""
    M = g.M
    if N > M // 2 - 1:
        raise AliasingError(f"{N} modes need at least {2 * N + 2} samples, got {M}")
    if np.iscomplexobj(g.values):
        raise ValueError("dft_series expects real samples; split real and imaginary parts")
    c = np.fft.rfft(g.values)[: N + 1] / M
    c = c * (-1.0) ** np.arange(N + 1)  # grid starts at -π
    return FourierSeries(2.0 * c[0].real, 2.0 * c[1:].real, -2.0 * c[1:].imag)


def evaluate(s: FourierSeries, theta):
    """Partial sum at ``theta`` (scalar or array)."""
    theta = np.asarray(theta, dtype=float)
    out = np.full(theta.shape, 0.5 * s.a0)
    n = np.arange(1, s.N + 1)
    flat = theta.reshape(-1)
    res = out.reshape(-1)
    chunk = max(1, 4_000_000 // max(1, s.N))
    for i in range(0, flat.size, chunk):
        nt = np.outer(flat[i:i + chunk], n)
        res[i:i + chunk] += np.cos(nt) @ s.a + np.sin(nt) @ s.b
    return res.reshape(theta.shape) if theta.ndim else float(res[0])


# ---------------------------------------------------------------------------
# Convergence diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceDiagnostic:
    verdict: str  # converged | divergent | inconclusive
    tail_exponent: float  # fitted p in n² |c_n|² ~ n^p
    residual: float = 0.0
    tail_bound: float = 0.0  # estimated energy missing beyond the truncation
    blocks: tuple = field(default_factory=tuple)

    @property
    def divergent(self) -> bool:
        return self.verdict == "divergent"


DIVERGENT_SLACK = 0.05
CONVERGED_MARGIN = 0.25
RESIDUAL_LIMIT = 0.35
NOISE_FLOOR = 1e-13


def diagnose_energy_terms(coef_abs: np.ndarray) -> ConvergenceDiagnostic:
    """Classify ``Σ n² |c_n|²`` from ``|c_1|..|c_N|``.

    The terms are summed over dyadic blocks ``[2^k, 2^{k+1})`` and a line is
    fitted to the log block sums; a block slope ``s`` means terms ``~ n^{s-1}``.
    Coefficients below ``NOISE_FLOOR`` times the largest are treated as zero,
    so a series whose top half vanishes is a finite sum.
    """
    c = np.asarray(coef_abs, dtype=float)
    N = c.size
    if N == 0 or not np.any(c):
        return ConvergenceDiagnostic("converged", -math.inf)
    c = np.where(c > NOISE_FLOOR * c.max(), c, 0.0)
    last = int(np.flatnonzero(c)[-1]) + 1
    if last <= N // 2 or N < 8:
        return ConvergenceDiagnostic("converged", -math.inf)
    if N < 64:
        return ConvergenceDiagnostic("inconclusive", math.nan)
    n = np.arange(1, N + 1, dtype=float)
    terms = n * n * c * c
    kmax = int(math.floor(math.log2(N + 1))) - 1  # last full block [2^k, 2^{k+1})
    ks, sums = [], []
    for k in range(2, kmax + 1):
        s = float(terms[2**k - 1: 2 ** (k + 1) - 1].sum())
        ks.append(k)
        sums.append(s)
    ks, sums = np.array(ks, float), np.array(sums)
    use = sums > 0
    ks, sums = ks[use][-6:], sums[use][-6:]
    if ks.size < 4:
        return ConvergenceDiagnostic("inconclusive", math.nan)
    y = np.log2(sums)
    A = np.vstack([ks, np.ones_like(ks)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ np.array([slope, icpt]) - y) ** 2)))
    p = float(slope - 1.0)
    blocks = tuple(zip(ks.astype(int).tolist(), sums.tolist()))
    if resid > RESIDUAL_LIMIT:
        return ConvergenceDiagnostic("inconclusive", p, resid, math.inf, blocks)
    if p >= -1.0 - DIVERGENT_SLACK:
        return ConvergenceDiagnostic("divergent", p, resid, math.inf, blocks)
    if p <= -1.0 - CONVERGED_MARGIN:
        r = 2.0**slope
        tail = 0.25 * sums[-1] * r / (1.0 - r)
        return ConvergenceDiagnostic("converged", p, resid, float(tail), blocks)
    return ConvergenceDiagnostic("inconclusive", p, resid, math.inf, blocks)


def energy_convergence_diagnostic(s: FourierSeries) -> ConvergenceDiagnostic:
    """Diagnose whether the kinetic energy of ``s`` converges as ``N → ∞``."""
    return diagnose_energy_terms(np.hypot(s.a, s.b))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def write_series_csv(s: FourierSeries, path) -> None:
    """Write ``n,a_n,b_n`` rows; row ``n=0`` carries ``a0``."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "a_n", "b_n"])
        w.writerow([0, repr(s.a0), repr(0.0)])
        for n, (a, b) in enumerate(zip(s.a.tolist(), s.b.tolist()), start=1):
            w.writerow([n, repr(a), repr(b)])
    tmp.replace(path)


def read_series_csv(path) -> FourierSeries:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"n", "a_n", "b_n"}:
        raise ValueError(f"{path}: expected header n,a_n,b_n")
    N = max(int(r["n"]) for r in rows)
    a, b, a0 = np.zeros(N), np.zeros(N), 0.0
    for r in rows:
        n = int(r["n"])
        if n == 0:
            a0 = float(r["a_n"])
        else:
            a[n - 1], b[n - 1] = float(r["a_n"]), float(r["b_n"])
    return FourierSeries(a0, a, b)
