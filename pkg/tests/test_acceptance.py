"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

The lines are printed with the test (visible under ``-s``) and collected in
an "acceptance criteria" section of the terminal summary.
"""

import math
import time

import numpy as np

from skorokhod.conformal import (
    PowerSeriesMap,
    closed_form_energy,
    gross_map,
    isoperimetric_report,
    polygon_map,
    skorokhod_energy,
    square_map,
)
from skorokhod.distributions import Arcsine, TwoPoint, Uniform
from skorokhod.montecarlo import (
    SquareDomain,
    atom_masses,
    dominance_battery,
    ks_distance,
    ks_two_sample,
    sample_exit_conformal,
    side_fractions,
    simulate_square_exit,
    verify_energy_dominance,
)
from skorokhod.rearrangement import (
    SampledFunction,
    polya_szego_gap,
    rearrange_samples,
    rearranged_quantile,
    trace_rearrangement,
)
from skorokhod.spectral import (
    FourierSeries,
    PeriodicSamples,
    dft_series,
    evaluate,
    grid,
    gross_coefficients,
    hilbert_multiplier,
    kinetic_energy,
)

UNIFORM_ENERGY = 2 / math.pi**2


def test_uniform_energy(criterion):
    t0 = time.perf_counter()
    series = kinetic_energy(gross_coefficients(Uniform(-1, 1).quantile(), 100_000))
    integral = closed_form_energy(Uniform(-1, 1))
    elapsed = time.perf_counter() - t0
    err = max(abs(series - UNIFORM_ENERGY), abs(integral - UNIFORM_ENERGY))
    ok = err <= 1e-5 and elapsed < 10
    criterion(1, ok, f"series {series:.9f} integral {integral:.9f} max error {err:.2e} in {elapsed:.2f}s")
    assert ok


def test_arcsine_energy(criterion):
    m = gross_map(Arcsine(0, 1), 4096)
    series = skorokhod_energy(m).value
    integral = closed_form_energy(Arcsine(0, 1))
    support = np.flatnonzero(np.abs(m.c) > 1e-8)
    single = support.tolist() == [0] and abs(m.c[0] + 1) <= 1e-8
    err = max(abs(series - 0.25), abs(integral - 0.25))
    ok = err <= 1e-8 and single
    criterion(2, ok, f"max error {err:.2e}, coefficients above 1e-8 at n = {(support + 1).tolist()}, "
                     f"a_1 = {m.c[0].real:.12f}")
    assert ok


def test_disc_scaling(criterion):
    values = {r: skorokhod_energy(PowerSeriesMap.identity(r)).value for r in (0.5, 1.0, 2.0)}
    ok = all(v == r * r / 4 for r, v in values.items())
    criterion(3, ok, ", ".join(f"r={r}: {v!r}" for r, v in values.items()))
    assert ok


def test_uniform_coefficients(criterion):
    s = gross_coefficients(Uniform(-1, 1).quantile(), 99)
    n = np.arange(1, 100, 2)
    err = float(np.max(np.abs(s.a[n - 1] + 8 / (math.pi**2 * n**2))))
    ok = err < 1e-8
    criterion(4, ok, f"max |a_n + 8/(pi^2 n^2)| over odd n <= 99: {err:.2e}")
    assert ok


def test_pi_squared_over_eight(criterion):
    energy = kinetic_energy(gross_coefficients(Uniform(-1, 1).quantile(), 100_000))
    value = math.pi**4 * energy / 16
    err = abs(value - math.pi**2 / 8)
    ok = err <= 1e-4
    criterion(5, ok, f"pi^4 L_N / 16 = {value:.9f} vs pi^2/8 = {math.pi**2 / 8:.9f}, error {err:.2e}")
    assert ok


def test_isoperimetric_chain(criterion):
    disc = isoperimetric_report(PowerSeriesMap.identity())
    quantities = (disc.area, disc.isoperimetric_ratio, 4 * math.pi * disc.energy)
    disc_err = max(abs(q - math.pi) for q in quantities)
    failed = [name for name, m in dominance_battery() if not isoperimetric_report(m, 1e-8).chain_ok]
    ok = disc_err <= 1e-10 and not failed
    criterion(6, ok, f"disc chain error {disc_err:.2e}; battery failures: {failed or 'none'}")
    assert ok


def test_dominance(criterion):
    t0 = time.perf_counter()
    failed = [name for name, m in dominance_battery() if not verify_energy_dominance(m, tol=1e-3).passed]
    fixed = {
        "identity": verify_energy_dominance(PowerSeriesMap.identity()),
        "alpha": verify_energy_dominance(gross_map(Uniform(-1, 1), 4096)),
    }
    gaps = {k: abs(r.gap) for k, r in fixed.items()}
    elapsed = time.perf_counter() - t0
    ok = not failed and all(g <= 1e-3 for g in gaps.values()) and elapsed < 60
    criterion(7, ok, f"battery failures: {failed or 'none'}; fixed-point gaps "
                     + ", ".join(f"{k} {g:.2e}" for k, g in gaps.items()) + f"; {elapsed:.1f}s")
    assert ok


def test_hilbert(criterion):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        N = int(rng.integers(1, 65))
        s = FourierSeries(0.0, rng.normal(size=N), rng.normal(size=N))
        h = hilbert_multiplier(s)
        hh = hilbert_multiplier(h)
        norm = s.l2_norm()
        worst = max(worst, abs(h.l2_norm() - norm) / norm,
                    float(np.max(np.abs(np.r_[hh.a + s.a, hh.b + s.b]))) / norm)
        # the pointwise conjugate also has the right samples
        th = grid(4 * N + 4)
        conj = np.imag(np.exp(1j * np.outer(th, np.arange(1, N + 1))) @ (s.a - 1j * s.b))
        worst = max(worst, float(np.max(np.abs(evaluate(h, th) - conj))) / norm / math.sqrt(N))
    ok = worst <= 1e-12
    criterion(8, ok, f"worst relative error over 100 polynomials {worst:.2e}")
    assert ok


def test_polya_szego(criterion):
    rng = np.random.default_rng(16)
    worst = -math.inf
    for _ in range(100):
        N = int(rng.integers(1, 17))
        s = FourierSeries(0.0, rng.normal(size=N), rng.normal(size=N))
        r = polya_szego_gap(SampledFunction(evaluate(s, grid(4 * N + 4))), N)
        worst = max(worst, r.energy_rearranged - r.energy_original)
    eq = [polya_szego_gap(SampledFunction.from_function(f, 64, math.pi), 8) for f in (np.cos, np.sin)]
    eq_err = max(abs(r.energy_rearranged - r.energy_original) for r in eq)
    ok = worst <= 1e-8 and eq_err <= 1e-8
    criterion(9, ok, f"max E* - E over 100 polynomials {worst:.3e}; cos/sin equality error {eq_err:.2e}")
    assert ok


def test_rearrangement_identities(criterion):
    M = 1 << 16
    errs = {}
    for name, spec in (("uniform", Uniform(-1, 1)), ("arcsine", Arcsine(0, 1))):
        q = spec.quantile()
        f = SampledFunction.from_function(lambda x: q(2 * np.abs(x)), 4096, 0.5)
        g = rearrange_samples(f)
        inside = np.abs(g.x) < 0.5
        star = float(np.max(np.abs(g.values[inside] - rearranged_quantile(q, g.x[inside]))))
        s = dft_series(PeriodicSamples(trace_rearrangement(q, grid(M))), 100)
        n = np.arange(1, 101)
        flip = float(np.max(np.abs(s.a - (-1.0) ** n * gross_coefficients(q, 100).a)))
        errs[name] = (star, flip)
    ok = all(max(v) <= 1e-8 for v in errs.values())
    criterion(10, ok, "; ".join(f"{k}: Q* {a:.1e}, sign flip {b:.1e}" for k, (a, b) in errs.items()))
    assert ok


def test_exit_law_simulation(criterion):
    t0 = time.perf_counter()
    n = 100_000
    disc = PowerSeriesMap.identity()
    alpha = gross_map(Uniform(-1, 1), 4096)
    disc_pass = sum(ks_distance(sample_exit_conformal(disc, n, seed), Arcsine(0, 1)).passed for seed in range(20))
    alpha_pass = sum(ks_distance(sample_exit_conformal(alpha, n, seed), Uniform(-1, 1)).passed
                     for seed in range(20))
    wos = simulate_square_exit(SquareDomain(1.0), n, seed=0, workers=4)
    conf = sample_exit_conformal(square_map(1.0, 4096), n, seed=1, workers=4)
    ks = ks_two_sample(wos, conf, resolution=1e-3).statistic
    sides = side_fractions(wos)
    jumps = atom_masses(wos)
    elapsed = time.perf_counter() - t0
    ok = (disc_pass >= 18 and alpha_pass >= 18 and ks < 0.01
          and all(abs(f - 0.25) <= 0.01 for f in sides)
          and all(abs(j - 0.25) <= 0.015 for j in jumps) and elapsed < 120)
    criterion(11, ok, f"disc {disc_pass}/20, alpha {alpha_pass}/20, square KS {ks:.4f}, "
                      f"sides {', '.join(f'{f:.4f}' for f in sides)}, "
                      f"jumps {', '.join(f'{j:.4f}' for j in jumps)}; {elapsed:.1f}s")
    assert ok


def test_divergence_detection(criterion):
    two_point = skorokhod_energy(gross_map(TwoPoint(-1, 0.5, 1), 4096))
    verdicts = {m: skorokhod_energy(polygon_map(m, 1 << 16)).diagnostic for m in (4, 6, 8)}
    ok = two_point.divergent and verdicts[4].divergent
    # m >= 6: reported only; the computed coefficient decay gives a finite energy there
    note = ", ".join(f"m={m}: {d.verdict} (tail exponent {d.tail_exponent:.3f})" for m, d in verdicts.items())
    criterion(12, ok, f"two_point: {two_point.diagnostic.verdict}; {note}")
    assert ok
