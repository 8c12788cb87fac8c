"""Exit laws of planar Brownian motion, sampled two ways, and the dominance check.

Conformal sampling uses that the disc's exit point is uniform on the circle,
so ``Re f(e^{iθ})`` with uniform ``θ`` has the exit law of ``f(D)``.  The
square is also sampled geometrically by walk on spheres, which serves as an
independent check of the polygon map.

Both samplers split the work into fixed-size chunks.  Chunk ``k`` draws from
its own stream ``SeedSequence(seed).spawn(...)[k]`` and results are
concatenated in chunk order, so the output depends only on ``(seed, n)`` and
the configuration, never on the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from .conformal import PowerSeriesMap, boundary_trace, gross_map, skorokhod_energy
from .distributions import CdfTable, DistributionSpec, Empirical
from .exceptions import DivergentEnergyError, InvalidDistributionError

__all__ = [
    "ExitBatch",
    "KsReport",
    "SquareDomain",
    "DominanceResult",
    "sample_exit_conformal",
    "simulate_square_exit",
    "side_fractions",
    "atom_masses",
    "ks_distance",
    "ks_two_sample",
    "ks_threshold",
    "estimate_mu",
    "verify_energy_dominance",
    "dominance_battery",
]

CHUNK = 1 << 14
DIRECT_EVAL_MAX_TERMS = 64
KS_COEFFICIENT = 1.63  # 99% Kolmogorov quantile


@dataclass(frozen=True, eq=False)
class ExitBatch:
    """Sampled real parts of exit points.

    ``config`` holds the scalar settings needed to reproduce the batch (and,
    for the square, side counts and discards); it round-trips through the
    header of the text format.
    """

    values: np.ndarray
    seed: int
    method: str
    config: tuple[tuple[str, object], ...] = ()

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)):
            raise ValueError("exit values must be finite")
        if self.method not in ("conformal", "geometric"):
            raise ValueError(f"unknown method {self.method!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "config", tuple(self.config))

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def info(self) -> dict:
        return dict(self.config)

    def header(self) -> str:
        parts = [f"seed={self.seed}", f"n={self.n}", f"method={self.method}"]
        parts += [f"{k}={_fmt(v)}" for k, v in self.config]
        return "# " + " ".join(parts)

    def to_text(self) -> str:
        return self.header() + "\n" + "".join(f"{x!r}\n" for x in self.values.tolist())

    def write(self, path) -> None:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(self.to_text())
        tmp.replace(path)

    @classmethod
    def read(cls, path) -> "ExitBatch":
        lines = Path(path).read_text().splitlines()
        if not lines or not lines[0].startswith("#"):
            raise ValueError(f"{path}: missing '# seed=... n=... method=...' header")
        fields = dict(tok.split("=", 1) for tok in lines[0][1:].split())
        try:
            seed, n, method = int(fields.pop("seed")), int(fields.pop("n")), fields.pop("method")
        except KeyError as exc:
            raise ValueError(f"{path}: header lacks {exc.args[0]}") from None
        # trailing '#' lines carry appended reports
        values = np.array([float(s) for s in lines[1:] if s.strip() and not s.startswith("#")])
        if values.size != n:
            raise ValueError(f"{path}: header says n={n} but {values.size} values follow")
        config = tuple((k, _parse(v)) for k, v in fields.items())
        return cls(values, seed, method, config)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def _parse(s: str):
    if "," in s:
        return tuple(_parse(x) for x in s.split(","))
    for conv in (int, float):
        try:
            return conv(s)
        except ValueError:
            pass
    return s


@dataclass(frozen=True)
class SquareDomain:
    half_side: float = 1.0

    def __post_init__(self):
        if not self.half_side > 0:
            raise ValueError("half_side must be positive")


class KsReport(NamedTuple):
    statistic: float
    threshold: float
    passed: bool

    def to_text(self) -> str:
        return (f"ks_statistic = {self.statistic!r}\nks_threshold = {self.threshold!r}\n"
                f"ks_pass = {self.passed}\n")


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


def _chunks(n: int) -> list[int]:
    full, rest = divmod(n, CHUNK)
    return [CHUNK] * full + ([rest] if rest else [])


def _run_chunks(fn, n: int, seed: int, workers: int) -> list:
    sizes = _chunks(n)
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    jobs = list(zip(sizes, streams))
    if workers <= 1 or len(jobs) == 1:
        return [fn(size, ss) for size, ss in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: fn(*job), jobs))


def _trace_evaluator(m: PowerSeriesMap) -> Callable[[np.ndarray], np.ndarray]:
    nz = np.flatnonzero(m.c)
    if nz.size <= DIRECT_EVAL_MAX_TERMS:
        k, c = nz + 1, m.c[nz]
        return lambda th: (np.exp(1j * np.outer(th, k)) @ c).real
    # dense series: linear interpolation of the FFT trace on a fine grid
    M = max(1 << 20, 1 << int(math.ceil(math.log2(8 * m.N))))
    trace = boundary_trace(m, M).values.real
    h = 2 * math.pi / M

    def evaluate(th):
        pos = (th + math.pi) / h
        j = np.floor(pos).astype(np.int64)
        w = pos - j
        j %= M
        return (1 - w) * trace[j] + w * trace[(j + 1) % M]

    return evaluate


def sample_exit_conformal(m: PowerSeriesMap, n: int, seed: int = 0, workers: int = 1) -> ExitBatch:
    """``Re m(e^{iθ})`` for ``n`` uniform angles: the exit law of ``m(D)`` from ``m(0)``."""
    if n < 1:
        raise ValueError("n must be positive")
    f = _trace_evaluator(m)

    def chunk(size, ss):
        return f(np.random.default_rng(ss).uniform(-math.pi, math.pi, size))

    values = np.concatenate(_run_chunks(chunk, n, seed, workers))
    return ExitBatch(values, seed, "conformal", (("terms", m.N),))


def simulate_square_exit(d: SquareDomain, n: int, seed: int = 0, step: float | None = None,
                         max_iter: int = 10_000, workers: int = 1) -> ExitBatch:
    """Walk on spheres from the centre of ``(-s, s)²``.

    Each jump lands uniformly on the largest circle inside the square.  A
    walker within ``step`` of the boundary is absorbed and projected onto
    the nearest side.  Walkers still alive after ``max_iter`` jumps are
    dropped and counted in ``config['discarded']``.
    """
    s = float(d.half_side)
    step = 1e-4 * s if step is None else float(step)
    if not 0 < step <= s / 50:
        raise ValueError("step must lie in (0, half_side/50]")
    if n < 1:
        raise ValueError("n must be positive")

    def chunk(size, ss):
        rng = np.random.default_rng(ss)
        x = np.zeros(size)
        y = np.zeros(size)
        alive = np.arange(size)
        for _ in range(max_iter):
            r = s - np.maximum(np.abs(x[alive]), np.abs(y[alive]))
            moving = r >= step
            alive, r = alive[moving], r[moving]
            if alive.size == 0:
                break
            phi = rng.uniform(0.0, 2 * math.pi, alive.size)
            x[alive] += r * np.cos(phi)
            y[alive] += r * np.sin(phi)
        alive = alive[s - np.maximum(np.abs(x[alive]), np.abs(y[alive])) >= step]
        keep = np.ones(size, bool)
        keep[alive] = False
        x, y = x[keep], y[keep]
        vertical = np.abs(x) >= np.abs(y)
        x = np.where(vertical, np.copysign(s, x), x)
        # sides: right, top, left, bottom
        sides = np.where(vertical, np.where(x > 0, 0, 2), np.where(y > 0, 1, 3))
        return x, np.bincount(sides, minlength=4), int(alive.size)

    parts = _run_chunks(chunk, n, seed, workers)
    values = np.concatenate([p[0] for p in parts])
    counts = tuple(int(c) for c in np.sum([p[1] for p in parts], axis=0))
    discarded = sum(p[2] for p in parts)
    config = (("half_side", s), ("step", step), ("max_iter", max_iter),
              ("side_counts", counts), ("discarded", discarded))
    return ExitBatch(values, seed, "geometric", config)


def side_fractions(batch: ExitBatch) -> tuple[float, ...]:
    """Fractions of walkers leaving through the right, top, left and bottom sides."""
    counts = batch.info.get("side_counts")
    if counts is None:
        raise ValueError("batch carries no side counts (not a square simulation)")
    total = sum(counts)
    return tuple(c / total for c in counts)


def atom_masses(batch: ExitBatch, points=(-1.0, 1.0), window: float | None = None) -> tuple[float, ...]:
    """CDF increments over windows of width ``window`` centred at ``points``.

    The default window is ten absorption steps, or ``1e-3`` for batches
    without a step setting.
    """
    if window is None:
        window = 10 * float(batch.info.get("step", 1e-4))
    v = batch.values
    return tuple(float(np.mean(np.abs(v - p) <= window / 2)) for p in points)


# ---------------------------------------------------------------------------
# Goodness of fit
# ---------------------------------------------------------------------------


def ks_threshold(n: int, m: int | None = None) -> float:
    if m is None:
        return KS_COEFFICIENT / math.sqrt(n)
    return KS_COEFFICIENT * math.sqrt((n + m) / (n * m))


def _values(batch) -> np.ndarray:
    return batch.values if isinstance(batch, ExitBatch) else np.asarray(batch, dtype=float).ravel()


def ks_distance(batch, F, threshold: float | None = None) -> KsReport:
    """One-sample Kolmogorov-Smirnov distance ``sup |F_n - F|``.

    ``F`` is a :class:`DistributionSpec`, a :class:`CdfTable` or a callable
    CDF.  Specs and tables also supply left limits, which makes the
    statistic exact for laws with atoms; a bare callable is assumed
    continuous.
    """
    x = np.sort(_values(batch))
    n = x.size
    if n < 10:
        raise ValueError("Kolmogorov-Smirnov needs at least 10 samples")
    if isinstance(F, (DistributionSpec, CdfTable)):
        right, left = F.cdf, F.cdf_left
    elif callable(F):
        right = left = F
    else:
        raise TypeError("F must be a distribution, a CDF table or a callable")
    u, counts = np.unique(x, return_counts=True)
    cum = np.cumsum(counts) / n
    below = cum - counts / n
    D = max(float(np.max(np.abs(cum - right(u)))), float(np.max(np.abs(below - left(u)))))
    thr = ks_threshold(n) if threshold is None else float(threshold)
    return KsReport(D, thr, D <= thr)


def ks_two_sample(a, b, resolution: float | None = None, threshold: float | None = None) -> KsReport:
    """Two-sample Kolmogorov-Smirnov distance.

    ``resolution`` rounds both samples to that grid first, so atoms that one
    sampler places exactly and the other smears over a few ulps of a
    truncated series compare as atoms.
    """
    x, y = np.sort(_values(a)), np.sort(_values(b))
    if resolution:
        x = np.round(x / resolution) * resolution
        y = np.round(y / resolution) * resolution
    grid = np.union1d(x, y)
    Fx = np.searchsorted(x, grid, side="right") / x.size
    Fy = np.searchsorted(y, grid, side="right") / y.size
    D = float(np.max(np.abs(Fx - Fy)))
    thr = ks_threshold(x.size, y.size) if threshold is None else float(threshold)
    return KsReport(D, thr, D <= thr)


def estimate_mu(batch: ExitBatch, center: bool = False) -> Empirical:
    """Empirical law of a batch, optionally shifted to mean zero."""
    if batch.n < 100:
        raise ValueError("need at least 100 samples to estimate a law")
    if np.ptp(batch.values) == 0:
        raise InvalidDistributionError("degenerate batch: all samples are equal")
    emp = Empirical(batch.values)
    return emp.centered() if center else emp


# ---------------------------------------------------------------------------
# Energy dominance
# ---------------------------------------------------------------------------


class DominanceResult(NamedTuple):
    lambda_U: float
    lambda_G: float
    passed: bool
    tol: float

    @property
    def gap(self) -> float:
        return self.lambda_U - self.lambda_G

    def to_text(self) -> str:
        return (f"lambda_U = {self.lambda_U!r}\nlambda_G = {self.lambda_G!r}\n"
                f"gap = {self.gap!r}\ntol = {self.tol!r}\npass = {self.passed}\n")


def verify_energy_dominance(phi: PowerSeriesMap, N: int = 4096, M: int = 1 << 16,
                            tol: float = 1e-3) -> DominanceResult:
    """Compare the energy of ``phi`` with that of the Gross map of its exit law.

    The exit law is read off deterministically: the ``M`` grid values of
    ``Re phi`` on the circle, sorted, are the exact quantile of the law of
    the truncated map under the discrete uniform angle.
    """
    if M < 2 * N + 2:
        raise ValueError("grid must satisfy M >= 2N + 2")
    est = skorokhod_energy(phi)
    if est.divergent:
        raise DivergentEnergyError(
            f"input map has divergent energy (tail exponent {est.diagnostic.tail_exponent:.3g})")
    trace = boundary_trace(phi, M).values.real
    mu = Empirical(trace - trace.mean())
    lam_G = skorokhod_energy(gross_map(mu, N)).value
    return DominanceResult(est.value, lam_G, lam_G <= est.value + tol, tol)


def dominance_battery(seed: int = 0) -> list[tuple[str, PowerSeriesMap]]:
    """25 univalent maps: ``z + c z²`` (|c| ≤ 0.45), ``z + c z³`` (|c| ≤ 0.3) and
    random perturbations ``z + Σ ε_k z^k`` with ``Σ k|ε_k| ≤ 0.9``.

    The first two families are univalent for ``|c| ≤ ½`` and ``|c| ≤ ⅓``;
    the third has ``Re f' > 0`` on the disc.
    """
    maps = []
    for j, r in enumerate(np.linspace(0.05, 0.45, 8)):
        c = 0.2 if j == 3 else r * np.exp(1j * math.pi * j / 4)
        maps.append((f"z+({c:.4g})z^2", PowerSeriesMap([1.0, c])))
    for j, r in enumerate(np.linspace(0.05, 0.3, 7)):
        c = r * np.exp(1j * math.pi * j / 7)
        maps.append((f"z+({c:.4g})z^3", PowerSeriesMap([1.0, 0.0, c])))
    rng = np.random.default_rng(seed)
    for j in range(10):
        deg = int(rng.integers(2, 9))
        eps = rng.normal(size=deg - 1) + 1j * rng.normal(size=deg - 1)
        k = np.arange(2, deg + 1)
        eps *= rng.uniform(0.2, 0.9) / np.sum(k * np.abs(eps))
        maps.append((f"perturbation-{j}", PowerSeriesMap(np.r_[1.0, eps])))
    return maps


def default_workers() -> int:
    return min(8, os.cpu_count() or 1)
