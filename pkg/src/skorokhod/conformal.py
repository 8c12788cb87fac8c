"""Power-series maps of the unit disc and their geometric functionals.

A :class:`PowerSeriesMap` stores ``c_1..c_N`` of ``f(z) = Σ c_n z^n`` (the map
fixes the origin).  Functionals:

* Skorokhod energy ``Λ(f) = ¼ Σ n² |c_n|²``, the kinetic energy of
  ``θ ↦ Re f(e^{iθ})``;
* area ``π Σ n |c_n|²``;
* perimeter ``∫ |f'(e^{it})| dt``.

For a univalent ``f`` these satisfy ``area ≤ ℓ²/4π ≤ 4πΛ``.  Univalence is
never checked: maps built by :func:`gross_map` are univalent by
construction, user-supplied maps are taken as given.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.special import beta

from .distributions import DistributionSpec, require_valid
from .exceptions import DivergentEnergyError, NoDensityError, QuadratureError
from .spectral import (
    ConvergenceDiagnostic,
    PeriodicSamples,
    QuadConfig,
    diagnose_energy_terms,
    gross_coefficients,
)

__all__ = [
    "PowerSeriesMap",
    "EnergyEstimate",
    "DomainReport",
    "gross_map",
    "reflect_negate",
    "rotate",
    "boundary_trace",
    "skorokhod_energy",
    "area",
    "perimeter",
    "isoperimetric_report",
    "closed_form_energy",
    "polygon_map",
    "square_map",
    "write_map_csv",
    "read_map_csv",
]


@dataclass(frozen=True, eq=False)
class PowerSeriesMap:
    """Truncated Taylor series ``Σ_{n=1}^{N} c_n z^n``."""

    c: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.c, dtype=complex).ravel()
        if c.size == 0:
            raise ValueError("a map needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise ValueError("map coefficients must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def N(self) -> int:
        return int(self.c.size)

    @property
    def degree(self) -> int:
        nz = np.flatnonzero(self.c)
        return int(nz[-1]) + 1 if nz.size else 0

    @classmethod
    def identity(cls, r: float = 1.0) -> "PowerSeriesMap":
        return cls([r])

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for cn in self.c[::-1]:
            out = (out + cn) * z
        return out

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        n = np.arange(1, self.N + 1)
        out = np.zeros_like(z)
        for k in range(self.N - 1, -1, -1):
            out = out * z + n[k] * self.c[k]
        return out

    def scaled(self, w: complex) -> "PowerSeriesMap":
        return PowerSeriesMap(w * self.c)

    @property
    def has_real_coefficients(self) -> bool:
        return bool(np.all(self.c.imag == 0))


def reflect_negate(m: PowerSeriesMap) -> PowerSeriesMap:
    """``z ↦ f(-z)``: same image domain, same functionals."""
    sign = (-1.0) ** np.arange(1, m.N + 1)
    return PowerSeriesMap(sign * m.c)


def rotate(m: PowerSeriesMap, theta0: float) -> PowerSeriesMap:
    """``z ↦ f(e^{iθ0} z)``, the reparametrisation freedom of a Riemann map."""
    return PowerSeriesMap(np.exp(1j * theta0 * np.arange(1, m.N + 1)) * m.c)


def boundary_trace(m: PowerSeriesMap, M: int) -> PeriodicSamples:
    """``f(e^{iθ_j})`` on ``θ_j = -π + 2πj/M``.

    The truncated series stands in for the radial limit.  Coefficients above
    ``M`` are folded exactly since ``e^{inθ_j}`` is ``M``-periodic in ``n``.
    """
    M = int(M)
    full = np.zeros(M, dtype=complex)
    n = np.arange(1, m.N + 1)
    np.add.at(full, n % M, m.c * (-1.0) ** n)
    return PeriodicSamples(np.fft.ifft(full) * M)


@dataclass(frozen=True)
class EnergyEstimate:
    """Partial-sum energy with its convergence verdict.

    ``error_bar`` is the estimated tail beyond the truncation (infinite unless
    the series was diagnosed convergent).
    """

    value: float
    diagnostic: ConvergenceDiagnostic

    @property
    def error_bar(self) -> float:
        return self.diagnostic.tail_bound

    @property
    def divergent(self) -> bool:
        return self.diagnostic.divergent

    def __float__(self):
        return self.value


def skorokhod_energy(m: PowerSeriesMap) -> EnergyEstimate:
    """``Λ(f) = ¼ Σ n² |c_n|²`` with the tail diagnostic attached."""
    n = np.arange(1, m.N + 1, dtype=float)
    a = np.abs(m.c)
    value = 0.25 * float(np.sum((n * a) ** 2))
    return EnergyEstimate(value, diagnose_energy_terms(a))


def partial_energies(m: PowerSeriesMap) -> list[tuple[int, float]]:
    """Partial sums ``Λ_N`` at ``N = 1, 2, 4, ...`` and at the full length."""
    n = np.arange(1, m.N + 1, dtype=float)
    cum = 0.25 * np.cumsum((n * np.abs(m.c)) ** 2)
    Ns = sorted({2**k for k in range(int(math.log2(m.N)) + 1)} | {m.N})
    return [(N, float(cum[N - 1])) for N in Ns]


def area(m: PowerSeriesMap) -> float:
    n = np.arange(1, m.N + 1, dtype=float)
    return math.pi * float(np.sum(n * np.abs(m.c) ** 2))


def perimeter(m: PowerSeriesMap, rtol: float = 1e-6, max_points: int = 2**20) -> float:
    """Length of ``f(∂D)`` by the trapezoid rule on ``|f'(e^{it})|``.

    The grid doubles until two successive values agree to ``rtol``; a
    ``RuntimeWarning`` is issued if ``max_points`` is reached first.
    """
    deriv = PowerSeriesMap(np.arange(2, m.N + 1) * m.c[1:]) if m.N > 1 else None

    def length(M):
        vals = np.full(M, m.c[0], dtype=complex)
        if deriv is not None:
            vals = vals + boundary_trace(deriv, M).values
        return 2.0 * math.pi * float(np.mean(np.abs(vals)))

    M = 64
    while M < 4 * m.degree + 4:
        M *= 2
    prev = length(M)
    while True:
        M *= 2
        cur = length(M)
        if abs(cur - prev) <= rtol * abs(cur):
            return cur
        if M >= max_points:
            warnings.warn(
                f"perimeter not stabilised at {M} points (relative change "
                f"{abs(cur - prev) / abs(cur):.2e}); the boundary may be rough",
                RuntimeWarning,
                stacklevel=2,
            )
            return cur
        prev = cur


@dataclass(frozen=True)
class DomainReport:
    energy: float
    area: float
    perimeter: float
    chain_ok: bool
    epsilon: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def isoperimetric_ratio(self) -> float:
        return self.perimeter**2 / (4 * math.pi)

    def to_text(self) -> str:
        lines = [
            f"energy = {self.energy!r}",
            f"area = {self.area!r}",
            f"perimeter = {self.perimeter!r}",
            f"chain_ok = {str(self.chain_ok).lower()}",
            f"epsilon = {self.epsilon!r}",
        ]
        for k, v in self.diagnostics.items():
            lines.append(f"diagnostics.{k} = {v!r}" if not isinstance(v, str) else f"diagnostics.{k} = {v}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DomainReport":
        vals, diag = {}, {}
        for line in text.splitlines():
            if "=" not in line or line.lstrip().startswith("#"):
                continue
            k, v = (s.strip() for s in line.split("=", 1))
            if k.startswith("diagnostics."):
                try:
                    diag[k[12:]] = float(v)
                except ValueError:
                    diag[k[12:]] = v
            else:
                vals[k] = v
        return cls(
            energy=float(vals["energy"]),
            area=float(vals["area"]),
            perimeter=float(vals["perimeter"]),
            chain_ok=vals["chain_ok"] == "true",
            epsilon=float(vals["epsilon"]),
            diagnostics=diag,
        )


def isoperimetric_report(m: PowerSeriesMap, eps: float = 1e-8) -> DomainReport:
    """Area, perimeter, energy and the chain ``area ≤ ℓ²/4π ≤ 4πΛ``."""
    est = skorokhod_energy(m)
    if est.divergent:
        raise DivergentEnergyError(
            "energy series diverges: a finite-energy domain has finite perimeter "
            "and area, so the chain is not meaningful here"
        )
    A = area(m)
    ell = perimeter(m)
    iso = ell**2 / (4 * math.pi)
    ok = A <= iso + eps and iso <= 4 * math.pi * est.value + eps
    diag = {
        "energy_verdict": est.diagnostic.verdict,
        "energy_tail_exponent": est.diagnostic.tail_exponent,
        "energy_error_bar": est.error_bar,
    }
    return DomainReport(est.value, A, ell, bool(ok), eps, diag)


def gross_map(spec: DistributionSpec, N: int = 4096, quad: QuadConfig | None = None) -> PowerSeriesMap:
    """Gross map ``Ψ(z) = Σ a_n z^n`` with ``a_n`` the cosine coefficients of ``Q(|θ|/π)``.

    ``Re Ψ(e^{iθ})`` has law ``spec`` when ``θ`` is uniform on ``(-π, π)``.
    """
    report = require_valid(spec)
    s = gross_coefficients(spec.quantile(), N, quad, center_atol=max(report.mean_tolerance, 1e-12))
    return PowerSeriesMap(s.a.astype(complex))


def closed_form_energy(spec: DistributionSpec, quad: QuadConfig | None = None) -> float:
    """``(1/2π²) ∫_0^1 dx / ρ(Q(x))²`` for a law with a density ``ρ``.

    Equivalent to ``(1/2π²) ∫ Q'(x)² dx``; piecewise-linear quantiles are
    summed exactly, other laws go through adaptive quadrature split at the
    quantile knots.
    """
    require_valid(spec)
    if not spec.has_density:
        raise NoDensityError(f"{spec.kind} law has no density; use the series energy")
    q = spec.quantile()
    if q.is_piecewise_linear:
        if q.has_jumps:
            raise NoDensityError("quantile has jumps (gaps in the support)")
        edges, start, end = q.segments
        du = np.diff(edges)
        return float(np.sum((end - start) ** 2 / du)) / (2 * math.pi**2)

    def integrand(x):
        d = spec.pdf(q(x))
        return 1.0 / (d * d) if d > 0 else 0.0

    pts = np.r_[0.0, q.knots, 1.0]
    total, err = 0.0, 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        val, e = integrate.quad(integrand, a, b, epsabs=1e-13, epsrel=1e-12, limit=400)
        total += val
        err += e
    if err > 1e-8 * max(1.0, abs(total)):
        raise QuadratureError(f"energy integral did not converge (error estimate {err:.2e})")
    return total / (2 * math.pi**2)


def polygon_map(m: int, N: int) -> PowerSeriesMap:
    """Map onto the regular ``m``-gon with vertices ``e^{2πik/m}``, truncated at degree ``N``.

    ``f_m(z) = (m / B(1/m, (m-2)/m)) Σ (2/m)_n z^{mn+1} / (n! (mn+1))``.
    """
    if int(m) != m or m < 4 or m % 2:
        raise ValueError("polygon map needs an even number of vertices m >= 4")
    m = int(m)
    K = (N - 1) // m + 1  # terms with mn+1 <= N
    r = np.empty(K)
    r[0] = 1.0
    # (2/m)_n / n! by the ratio recurrence
    for j in range(1, K):
        r[j] = r[j - 1] * (2.0 / m + j - 1) / j
    idx = m * np.arange(K) + 1
    c = np.zeros(N, dtype=complex)
    c[idx - 1] = m / beta(1.0 / m, (m - 2.0) / m) * r / idx
    return PowerSeriesMap(c)


def square_map(half_side: float, N: int) -> PowerSeriesMap:
    """Map onto the square ``(-s, s)²`` by rotating and scaling the 4-gon map."""
    return polygon_map(4, N).scaled(half_side * math.sqrt(2) * np.exp(-1j * math.pi / 4))


def write_map_csv(m: PowerSeriesMap, path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "re_c_n", "im_c_n"])
        for n, cn in enumerate(m.c.tolist(), start=1):
            w.writerow([n, repr(cn.real), repr(cn.imag)])
    tmp.replace(path)


def read_map_csv(path) -> PowerSeriesMap:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) != {"n", "re_c_n", "im_c_n"}:
        raise ValueError(f"{path}: expected header n,re_c_n,im_c_n")
    N = max(int(r["n"]) for r in rows)
    c = np.zeros(N, dtype=complex)
    for r in rows:
        n = int(r["n"])
        if n == 0:
            if float(r["re_c_n"]) or float(r["im_c_n"]):
                raise ValueError(f"{path}: c_0 must be zero (the map fixes the origin)")
            continue
        if n < 0:
            raise ValueError(f"{path}: negative index {n}")
        c[n - 1] = complex(float(r["re_c_n"]), float(r["im_c_n"]))
    return PowerSeriesMap(c)
