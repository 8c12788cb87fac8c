"""``skorokhod`` command-line front end.

Exit codes: 0 success, 1 I/O error, 2 invalid spec or input, 3 divergent
energy, 4 a check that ran but failed (dominance or goodness of fit).

Spec files are flat ``key = value`` text with ``#`` comments::

    kind = uniform
    a = -1
    b = 1

Recognised keys: ``kind`` (uniform, arcsine, two_point, atomic, cdf_table,
empirical, normal), ``a``, ``b``, ``center``, ``halfwidth``, ``x1``, ``p1``,
``x2``, ``points`` (``x:p`` pairs separated by commas, used by atomic and
cdf_table), ``interpolation`` (linear or step), ``scale``, ``samples_path``
(one real per line, resolved against the directory of the file naming it), ``mean_tolerance`` and
``auto_center`` (true/false).
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path

import numpy as np

from . import conformal, distributions as dist, montecarlo as mc
from .exceptions import DivergentEnergyError, InvalidDistributionError, SkorokhodError

EXIT_OK, EXIT_IO, EXIT_INVALID, EXIT_DIVERGENT, EXIT_CHECK_FAILED = 0, 1, 2, 3, 4

SPEC_KEYS = {"kind", "a", "b", "center", "halfwidth", "x1", "p1", "x2", "points", "interpolation",
             "scale", "samples_path", "mean_tolerance", "auto_center"}


class UsageError(Exception):
    """Bad input that maps to exit code 2."""


# ---------------------------------------------------------------------------
# Spec files
# ---------------------------------------------------------------------------


def parse_spec_text(text: str, base_dir: Path = Path(".")) -> dist.DistributionSpec:
    fields: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            key, sep, value = line.partition(":")
        key, value = key.strip().lower(), value.strip()
        if not sep or not key:
            raise UsageError(f"line {lineno}: expected 'key = value'")
        if key not in SPEC_KEYS:
            raise UsageError(f"line {lineno}: unknown field {key!r}")
        fields[key] = value
    if "kind" not in fields:
        raise UsageError("spec has no 'kind' field")

    def num(key, default=None):
        if key not in fields:
            if default is None:
                raise UsageError(f"{fields['kind']} spec needs field {key!r}")
            return default
        try:
            return float(fields[key])
        except ValueError:
            raise UsageError(f"field {key!r} is not a number: {fields[key]!r}") from None

    def pairs():
        try:
            return [tuple(float(t) for t in item.split(":")) for item in fields["points"].split(",")]
        except (KeyError, ValueError):
            raise UsageError("'points' must be a comma-separated list of x:p pairs") from None

    tol = num("mean_tolerance", math.nan)
    tol = None if math.isnan(tol) else tol
    kind = fields["kind"].lower()
    if kind == "uniform":
        spec = dist.Uniform(num("a"), num("b"), tol)
    elif kind == "arcsine":
        spec = dist.Arcsine(num("center", 0.0), num("halfwidth"), tol)
    elif kind == "two_point":
        spec = dist.TwoPoint(num("x1"), num("p1"), num("x2"), tol)
    elif kind == "atomic":
        spec = dist.Atomic(tuple(pairs()), tol)
    elif kind == "cdf_table":
        pts = np.array(pairs())
        table = dist.CdfTable(pts[:, 0], pts[:, 1], fields.get("interpolation", "linear"))
        spec = dist.TabulatedCdf(table, tol)
    elif kind == "empirical":
        if "samples_path" not in fields:
            raise UsageError("empirical spec needs 'samples_path'")
        path = Path(fields["samples_path"])
        samples = read_samples(path if path.is_absolute() else base_dir / path)
        spec = dist.Empirical(samples, tol)
    elif kind == "normal":
        spec = dist.Normal(num("scale"), tol)
    else:
        raise UsageError(f"unknown kind {kind!r}")
    if fields.get("auto_center", "false").lower() in ("1", "true", "yes"):
        spec = spec.centered()
    return spec


def read_samples(path: Path) -> np.ndarray:
    text = Path(path).read_text()
    try:
        return np.array([float(s) for s in text.split() if not s.startswith("#")])
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def load_spec(path) -> dist.DistributionSpec:
    path = Path(path)
    return parse_spec_text(path.read_text(), path.parent)


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------


def atomic_write(path, text: str) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def emit(text: str, out) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def kv(**items) -> str:
    lines = []
    for k, v in items.items():
        lines.append(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}")
    return "\n".join(lines) + "\n"


def svg_path(x: np.ndarray, y: np.ndarray, closed: bool) -> str:
    lo_x, hi_x, lo_y, hi_y = (float(v) for v in (x.min(), x.max(), y.min(), y.max()))
    w, h = max(hi_x - lo_x, 1e-12), max(hi_y - lo_y, 1e-12)
    mx, my = 0.05 * w, 0.05 * h
    # SVG's y axis points down
    pts = " L ".join(f"{a!r} {-b!r}" for a, b in zip(x.tolist(), y.tolist()))
    d = f"M {pts}" + (" Z" if closed else "")
    view = f"{lo_x - mx!r} {-hi_y - my!r} {w + 2 * mx!r} {h + 2 * my!r}"
    stroke = 0.005 * max(w, h)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{view}">\n'
            f'<path d="{d}" fill="none" stroke="black" stroke-width="{stroke!r}"/>\n</svg>\n')


def csv_columns(header, *cols) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in zip(*(c.tolist() for c in cols)):
        w.writerow([repr(v) for v in row])
    return buf.getvalue()


def load_map(args) -> conformal.PowerSeriesMap:
    if getattr(args, "map", None):
        return conformal.read_map_csv(args.map)
    if getattr(args, "spec", None):
        return conformal.gross_map(load_spec(args.spec), args.terms)
    raise UsageError("give --map or --spec")


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    spec = load_spec(args.spec)
    r = dist.validate(spec)
    lo, hi = r.support
    emit(kv(kind=spec.kind, passed=r.passed, mean=r.mean, variance=r.variance, support_min=lo,
            support_max=hi, bounded=r.bounded, mean_tolerance=r.mean_tolerance)
         + "".join(f"reason = {why}\n" for why in r.reasons), args.out)
    if not r.passed:
        for why in r.reasons:
            print(f"error: {why}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def _partial_sum_table(m: conformal.PowerSeriesMap) -> str:
    return "N,partial_energy\n" + "".join(f"{N},{v!r}\n" for N, v in conformal.partial_energies(m))


def cmd_energy(args) -> int:
    spec = load_spec(args.spec)
    dist.require_valid(spec)
    out = {}
    if args.method in ("series", "both"):
        m = conformal.gross_map(spec, args.terms)
        est = conformal.skorokhod_energy(m)
        out.update(energy_series=est.value, error_bar=est.error_bar,
                   energy_tail_corrected=est.value + est.error_bar, verdict=est.diagnostic.verdict,
                   tail_exponent=est.diagnostic.tail_exponent, terms=args.terms)
        if est.divergent:
            emit(kv(**out) + _partial_sum_table(m), args.out)
            print("error: energy series diverges", file=sys.stderr)
            return EXIT_DIVERGENT
    if args.method in ("integral", "both"):
        out["energy_integral"] = conformal.closed_form_energy(spec)
    if args.method == "both":
        out["gap"] = abs(out["energy_series"] - out["energy_integral"])
    emit(kv(**out), args.out)
    return EXIT_OK


def cmd_gross(args) -> int:
    m = conformal.gross_map(load_spec(args.spec), args.terms)
    if not args.out:
        raise UsageError("gross needs --out")
    conformal.write_map_csv(m, args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    m = load_map(args)
    emit(conformal.isoperimetric_report(m, args.eps).to_text(), args.out)
    return EXIT_OK


def cmd_plot(args) -> int:
    if args.target == "domain":
        m = load_map(args)
        z = conformal.boundary_trace(m, args.grid).values
        text = (svg_path(z.real, z.imag, closed=True) if args.format == "svg"
                else csv_columns(["x", "y"], z.real, z.imag))
    else:
        if args.batch:
            values = mc.ExitBatch.read(args.batch).values
            law = dist.Empirical(values)
        elif args.spec:
            law = load_spec(args.spec)
        else:
            raise UsageError("plot cdf needs --batch or --spec")
        x, F = _cdf_polyline(law, args.grid)
        text = svg_path(x, F, closed=False) if args.format == "svg" else csv_columns(["x", "F"], x, F)
    if not args.out:
        raise UsageError("plot needs --out")
    atomic_write(args.out, text)
    return EXIT_OK


def _cdf_polyline(law: dist.DistributionSpec, M: int):
    """Vertices of the CDF graph, with vertical segments at atoms."""
    if isinstance(law, dist.Empirical):
        xs = np.unique(law.samples)
        if xs.size > M:
            xs = np.quantile(law.samples, np.linspace(0, 1, M), method="inverted_cdf")
            xs = np.unique(np.r_[xs, law.samples[0], law.samples[-1]])
        lo, hi = xs[0], xs[-1]
    else:
        lo, hi = law.support()
        xs = np.linspace(lo, hi, M)
    pad = 0.05 * (hi - lo)
    xs = np.unique(np.r_[lo - pad, xs, hi + pad])
    left, right = law.cdf_left(xs), law.cdf(xs)
    x = np.repeat(xs, 2)
    F = np.column_stack([left, right]).ravel()
    keep = np.r_[True, (np.diff(x) != 0) | (np.diff(F) != 0)]
    return x[keep], F[keep]


def cmd_verify(args) -> int:
    m = load_map(args)
    r = mc.verify_energy_dominance(m, args.terms, args.grid, args.tol)
    emit(r.to_text(), args.out)
    return EXIT_OK if r.passed else EXIT_CHECK_FAILED


def cmd_simulate(args) -> int:
    if args.square is not None and args.method == "conformal":
        m = conformal.square_map(args.square, args.terms)
        batch = mc.sample_exit_conformal(m, args.samples, args.seed, workers=args.workers)
    elif args.square is not None:
        batch = mc.simulate_square_exit(mc.SquareDomain(args.square), args.samples, args.seed,
                                        step=args.step, workers=args.workers)
    elif args.polygon is not None:
        m = conformal.polygon_map(args.polygon, args.terms)
        batch = mc.sample_exit_conformal(m, args.samples, args.seed, workers=args.workers)
    else:
        batch = mc.sample_exit_conformal(load_map(args), args.samples, args.seed, workers=args.workers)
    text = batch.to_text()
    report = None
    if args.reference:
        report = mc.ks_distance(batch, load_spec(args.reference))
    elif args.reference_batch:
        other = mc.ExitBatch.read(args.reference_batch)
        report = mc.ks_two_sample(batch, other, resolution=args.resolution, threshold=args.ks_threshold)
    if report is not None:
        text += "".join(f"# {line}\n" for line in report.to_text().splitlines())
        sys.stdout.write(report.to_text())
    if batch.method == "geometric":
        info = batch.info
        sys.stdout.write(kv(side_fractions=",".join(repr(f) for f in mc.side_fractions(batch)),
                            discarded=info["discarded"]))
    if args.out:
        atomic_write(args.out, text)
    if report is not None and not report.passed:
        return EXIT_CHECK_FAILED
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _positive_int(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="skorokhod", description="Gross maps, Skorokhod energies and exit-law sampling.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, spec=True, mapping=False):
        if spec:
            sp.add_argument("--spec", help="distribution spec file")
        if mapping:
            sp.add_argument("--map", help="coefficient CSV (n,re_c_n,im_c_n)")
        sp.add_argument("--terms", type=_positive_int, default=4096, help="series length N (default 4096)")
        sp.add_argument("--out", help="output file (default: stdout for reports)")

    sp = sub.add_parser("validate", help="check a spec against the standing hypotheses")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("energy", help="Skorokhod energy of the Gross map of a law")
    common(sp)
    sp.add_argument("--method", choices=("series", "integral", "both"), default="series")
    sp.set_defaults(func=cmd_energy)

    sp = sub.add_parser("gross", help="write Gross map coefficients as CSV")
    common(sp)
    sp.set_defaults(func=cmd_gross)

    sp = sub.add_parser("report", help="energy, area and perimeter of a map")
    common(sp, mapping=True)
    sp.add_argument("--eps", type=float, default=1e-8)
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("plot", help="boundary polyline or CDF staircase as CSV or SVG")
    sp.add_argument("target", choices=("domain", "cdf"))
    common(sp, mapping=True)
    sp.add_argument("--batch", help="exit batch file (cdf target)")
    sp.add_argument("--grid", type=_positive_int, default=1 << 16, help="points M (default 65536)")
    sp.add_argument("--format", choices=("csv", "svg"), default="csv")
    sp.set_defaults(func=cmd_plot)

    sp = sub.add_parser("verify", help="check that the Gross map of a domain's exit law has no more energy")
    common(sp, spec=False, mapping=True)
    sp.add_argument("--grid", type=_positive_int, default=1 << 16)
    sp.add_argument("--tol", type=float, default=1e-3)
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("simulate", help="sample exit points and optionally test them against a law")
    common(sp, mapping=True)
    target = sp.add_mutually_exclusive_group()
    target.add_argument("--square", type=float, metavar="HALF_SIDE", help="walk on spheres in (-s,s)^2")
    target.add_argument("--polygon", type=int, metavar="M", help="conformal sampler of the regular M-gon")
    sp.add_argument("--method", choices=("geometric", "conformal"), default="geometric",
                    help="sampler for --square: walk on spheres or the conformal map")
    sp.add_argument("--samples", type=_positive_int, default=100_000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--workers", type=_positive_int, default=1)
    sp.add_argument("--step", type=float, help="absorption shell for walk on spheres")
    sp.add_argument("--reference", help="spec file to test the batch against")
    sp.add_argument("--reference-batch", help="exit batch for a two-sample test")
    sp.add_argument("--resolution", type=float, help="rounding grid for the two-sample test")
    sp.add_argument("--ks-threshold", type=float, help="override the two-sample threshold")
    sp.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "grid", None) and args.command == "verify" and args.grid < 2 * args.terms + 2:
            raise UsageError("--grid must be at least 2*terms + 2")
        return args.func(args)
    except DivergentEnergyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGENT
    except (UsageError, InvalidDistributionError, ValueError, SkorokhodError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
