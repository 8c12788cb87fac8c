import math
import subprocess
import sys

import numpy as np
import pytest

from skorokhod.cli import UsageError, main, parse_spec_text
from skorokhod.conformal import DomainReport, PowerSeriesMap, write_map_csv
from skorokhod.distributions import Arcsine, Atomic, Empirical, TwoPoint, Uniform
from skorokhod.exceptions import InvalidDistributionError


def parse_kv(text):
    out = {}
    for line in text.splitlines():
        if " = " in line:
            k, v = line.split(" = ", 1)
            out[k] = v
    return out


@pytest.fixture
def specs(tmp_path):
    files = {
        "uniform": "kind = uniform\na = -1\nb = 1\n",
        "shifted": "kind = uniform\na = 0\nb = 2\n",
        "arcsine": "# the unit disc\nkind: arcsine\ncenter: 0\nhalfwidth: 1\n",
        "two_point": "kind = two_point\nx1 = -1\np1 = 0.5\nx2 = 1\n",
        "atomic": "kind = atomic\npoints = -2:0.25, 0:0.5, 2:0.25\n",
    }
    paths = {}
    for name, text in files.items():
        paths[name] = tmp_path / f"{name}.spec"
        paths[name].write_text(text)
    return paths


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


class TestSpecParser:
    def test_kinds(self, tmp_path):
        assert parse_spec_text("kind = uniform\na=-1\nb=1", tmp_path) == Uniform(-1, 1)
        assert parse_spec_text("kind = arcsine\ncenter=0\nhalfwidth=2", tmp_path) == Arcsine(0, 2)
        assert parse_spec_text("kind = two_point\nx1=-1\np1=0.5\nx2=1", tmp_path) == TwoPoint(-1, 0.5, 1)
        assert isinstance(parse_spec_text("kind = atomic\npoints = -1:0.5,1:0.5", tmp_path), Atomic)

    def test_cdf_table(self, tmp_path):
        spec = parse_spec_text("kind = cdf_table\npoints = -1:0, 0:0.5, 1:1\ninterpolation = linear", tmp_path)
        assert spec.moments() == pytest.approx((0.0, 1 / 3))

    def test_empirical_relative_path(self, tmp_path):
        (tmp_path / "s.txt").write_text("-1\n1\n-0.5\n0.5\n")
        spec = parse_spec_text("kind = empirical\nsamples_path = s.txt", tmp_path)
        assert isinstance(spec, Empirical) and spec.moments()[0] == 0.0

    def test_auto_center(self, tmp_path):
        spec = parse_spec_text("kind = uniform\na = 0\nb = 2\nauto_center = true", tmp_path)
        assert spec.support() == (-1.0, 1.0)

    @pytest.mark.parametrize("text", ["kind = cauchy", "a = 1", "kind = uniform\na = x\nb = 1",
                                      "kind = uniform\nwidth = 2", "kind uniform"])
    def test_malformed(self, tmp_path, text):
        with pytest.raises((UsageError, InvalidDistributionError)):
            parse_spec_text(text, tmp_path)


class TestValidate:
    def test_uniform(self, capsys, specs):
        code, out, _ = run(capsys, "validate", "--spec", specs["uniform"])
        assert code == 0
        kv = parse_kv(out)
        assert kv["passed"] == "True" and float(kv["variance"]) == pytest.approx(1 / 3)

    def test_shifted_names_the_mean(self, capsys, specs):
        code, _, err = run(capsys, "validate", "--spec", specs["shifted"])
        assert code == 2
        assert "mean 1" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, _ = run(capsys, "validate", "--spec", tmp_path / "nope.spec")
        assert code == 1

    def test_bad_spec(self, capsys, tmp_path):
        p = tmp_path / "bad.spec"
        p.write_text("kind = uniform\na = 1\nb = -1\n")
        assert run(capsys, "validate", "--spec", p)[0] == 2


class TestEnergy:
    def test_uniform_both(self, capsys, specs):
        code, out, _ = run(capsys, "energy", "--spec", specs["uniform"], "--method", "both")
        assert code == 0
        kv = parse_kv(out)
        assert float(kv["energy_series"]) == pytest.approx(2 / math.pi**2, abs=1e-4)
        assert float(kv["energy_integral"]) == pytest.approx(2 / math.pi**2, abs=1e-12)
        assert float(kv["gap"]) < 1e-4
        assert kv["verdict"] == "converged"

    def test_arcsine_both(self, capsys, specs):
        code, out, _ = run(capsys, "energy", "--spec", specs["arcsine"], "--method", "both")
        kv = parse_kv(out)
        assert code == 0
        assert float(kv["energy_series"]) == pytest.approx(0.25, abs=1e-8)
        assert float(kv["energy_integral"]) == pytest.approx(0.25, abs=1e-8)

    def test_two_point_diverges(self, capsys, specs):
        code, out, err = run(capsys, "energy", "--spec", specs["two_point"])
        assert code == 3
        assert parse_kv(out)["verdict"] == "divergent"
        assert "N,partial_energy" in out
        table = out.split("N,partial_energy\n")[1].splitlines()
        partial = [float(r.split(",")[1]) for r in table]
        # doubling N doubles the partial energy: harmonic growth
        assert len(partial) > 3 and partial[-1] / partial[-2] == pytest.approx(2.0, rel=1e-3)
        assert "diverges" in err

    def test_integral_on_atoms_is_invalid(self, capsys, specs):
        assert run(capsys, "energy", "--spec", specs["atomic"], "--method", "integral")[0] == 2

    def test_invalid_spec(self, capsys, specs):
        assert run(capsys, "energy", "--spec", specs["shifted"])[0] == 2

    def test_output_file(self, capsys, specs, tmp_path):
        out = tmp_path / "e.txt"
        code, stdout, _ = run(capsys, "energy", "--spec", specs["arcsine"], "--terms", "64", "--out", out)
        assert code == 0 and stdout == ""
        assert parse_kv(out.read_text())["terms"] == "64"


class TestGrossAndVerify:
    def test_identity_equality(self, capsys, tmp_path):
        path = tmp_path / "id.csv"
        write_map_csv(PowerSeriesMap.identity(), path)
        code, out, _ = run(capsys, "verify", "--map", path)
        kv = parse_kv(out)
        assert code == 0
        assert float(kv["lambda_U"]) == 0.25
        assert float(kv["lambda_G"]) == pytest.approx(0.25, abs=1e-6)

    def test_quadratic(self, capsys, tmp_path):
        path = tmp_path / "q.csv"
        write_map_csv(PowerSeriesMap([1.0, 0.2]), path)
        code, out, _ = run(capsys, "verify", "--map", path)
        kv = parse_kv(out)
        assert code == 0 and kv["pass"] == "True"
        assert float(kv["lambda_U"]) == pytest.approx(0.29, abs=1e-15)

    def test_two_point_map_is_refused(self, capsys, specs, tmp_path):
        path = tmp_path / "tp.csv"
        assert run(capsys, "gross", "--spec", specs["two_point"], "--out", path)[0] == 0
        assert path.read_text().splitlines()[0] == "n,re_c_n,im_c_n"
        assert run(capsys, "verify", "--map", path)[0] == 3

    def test_uniform_gross_then_verify(self, capsys, specs, tmp_path):
        path = tmp_path / "alpha.csv"
        run(capsys, "gross", "--spec", specs["uniform"], "--out", path)
        code, out, _ = run(capsys, "verify", "--map", path)
        kv = parse_kv(out)
        assert code == 0 and abs(float(kv["gap"])) <= 1e-3

    def test_grid_too_coarse(self, capsys, tmp_path):
        path = tmp_path / "id.csv"
        write_map_csv(PowerSeriesMap.identity(), path)
        assert run(capsys, "verify", "--map", path, "--terms", "64", "--grid", "100")[0] == 2

    def test_gross_needs_out(self, capsys, specs):
        assert run(capsys, "gross", "--spec", specs["uniform"])[0] == 2

    def test_malformed_map(self, capsys, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("n,re_c_n,im_c_n\n1,abc,0\n")
        assert run(capsys, "verify", "--map", path)[0] == 2


class TestReport:
    def test_reparse_is_exact(self, capsys, specs, tmp_path):
        out = tmp_path / "r.txt"
        assert run(capsys, "report", "--spec", specs["uniform"], "--terms", "512", "--out", out)[0] == 0
        text = out.read_text()
        assert DomainReport.from_text(text).to_text() == text

    def test_disc(self, capsys, specs):
        code, out, _ = run(capsys, "report", "--spec", specs["arcsine"], "--terms", "16")
        kv = parse_kv(out)
        assert code == 0
        assert float(kv["area"]) == pytest.approx(math.pi, abs=1e-10)


class TestPlot:
    def test_uniform_domain_is_mirror_symmetric(self, capsys, specs, tmp_path):
        out = tmp_path / "u.csv"
        assert run(capsys, "plot", "domain", "--spec", specs["uniform"], "--grid", "1024", "--out", out)[0] == 0
        xy = np.loadtxt(out, delimiter=",", skiprows=1)
        assert xy.shape == (1024, 2)
        # point j and point M - j are mirror images (θ ↦ -θ on the grid)
        mirrored = np.roll(xy[::-1], 1, axis=0)
        np.testing.assert_allclose(mirrored[:, 0], xy[:, 0], atol=1e-8)
        np.testing.assert_allclose(mirrored[:, 1], -xy[:, 1], atol=1e-8)

    def test_arcsine_domain_is_the_circle(self, capsys, specs, tmp_path):
        out = tmp_path / "d.csv"
        run(capsys, "plot", "domain", "--spec", specs["arcsine"], "--grid", "512", "--out", out)
        xy = np.loadtxt(out, delimiter=",", skiprows=1)
        np.testing.assert_allclose(np.hypot(xy[:, 0], xy[:, 1]), 1.0, atol=1e-6)

    def test_svg(self, capsys, specs, tmp_path):
        out = tmp_path / "d.svg"
        run(capsys, "plot", "domain", "--spec", specs["arcsine"], "--grid", "64", "--format", "svg", "--out", out)
        text = out.read_text()
        assert text.startswith("<svg") and text.count("<path") == 1 and " Z\"" in text
        view = [float(v) for v in text.split('viewBox="')[1].split('"')[0].split()]
        assert view[0] == pytest.approx(-1.1) and view[2] == pytest.approx(2.2)

    def test_cdf_of_spec(self, capsys, specs, tmp_path):
        out = tmp_path / "c.csv"
        run(capsys, "plot", "cdf", "--spec", specs["two_point"], "--grid", "100", "--out", out)
        xF = np.loadtxt(out, delimiter=",", skiprows=1)
        assert xF[0, 1] == 0.0 and xF[-1, 1] == 1.0
        assert np.all(np.diff(xF[:, 1]) >= 0)

    def test_square_batch_cdf_has_jumps(self, capsys, tmp_path):
        batch, out = tmp_path / "sq.txt", tmp_path / "c.csv"
        assert run(capsys, "simulate", "--square", "1", "--samples", "20000", "--out", batch)[0] == 0
        run(capsys, "plot", "cdf", "--batch", batch, "--out", out)
        x, F = np.loadtxt(out, delimiter=",", skiprows=1).T
        near = lambda p: F[np.abs(x - p) < 2e-3]
        assert near(-1).max() - near(-1).min() == pytest.approx(0.25, abs=0.02)
        assert near(1).max() - near(1).min() == pytest.approx(0.25, abs=0.02)

    def test_needs_output(self, capsys, specs):
        assert run(capsys, "plot", "domain", "--spec", specs["arcsine"])[0] == 2

    def test_cdf_needs_input(self, capsys, tmp_path):
        assert run(capsys, "plot", "cdf", "--out", tmp_path / "c.csv")[0] == 2


class TestSimulate:
    def test_disc_against_arcsine(self, capsys, specs, tmp_path):
        disc = tmp_path / "disc.csv"
        write_map_csv(PowerSeriesMap.identity(), disc)
        out = tmp_path / "b.txt"
        code, stdout, _ = run(capsys, "simulate", "--map", disc, "--reference", specs["arcsine"], "--out", out)
        assert code == 0
        assert parse_kv(stdout)["ks_pass"] == "True"
        text = out.read_text()
        assert text.startswith("# seed=0 n=100000 method=conformal")
        assert text.rstrip().endswith("# ks_pass = True")

    def test_failed_check(self, capsys, specs, tmp_path):
        disc = tmp_path / "disc.csv"
        write_map_csv(PowerSeriesMap.identity(), disc)
        assert run(capsys, "simulate", "--map", disc, "--samples", "5000", "--reference", specs["uniform"])[0] == 4

    def test_rerun_is_byte_identical(self, capsys, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        run(capsys, "simulate", "--square", "1", "--samples", "40000", "--seed", "3", "--out", a)
        run(capsys, "simulate", "--square", "1", "--samples", "40000", "--seed", "3", "--workers", "4", "--out", b)
        assert a.read_bytes() == b.read_bytes()

    def test_square_against_conformal_sampler(self, capsys, tmp_path):
        wos, conf = tmp_path / "wos.txt", tmp_path / "conf.txt"
        code, stdout, _ = run(capsys, "simulate", "--square", "1", "--out", wos)
        fractions = [float(f) for f in parse_kv(stdout)["side_fractions"].split(",")]
        assert code == 0 and all(abs(f - 0.25) < 0.01 for f in fractions)
        run(capsys, "simulate", "--square", "1", "--method", "conformal", "--seed", "1", "--out", conf)
        code, stdout, _ = run(capsys, "simulate", "--square", "1", "--method", "conformal", "--seed", "1",
                              "--reference-batch", wos, "--resolution", "1e-3")
        assert code == 0
        assert float(parse_kv(stdout)["ks_statistic"]) < 0.01

    def test_polygon(self, capsys, tmp_path):
        out = tmp_path / "p.txt"
        assert run(capsys, "simulate", "--polygon", "6", "--samples", "1000", "--out", out)[0] == 0
        assert np.all(np.abs(np.loadtxt(out, comments="#")) <= 1.0 + 1e-9)

    def test_bad_step(self, capsys):
        assert run(capsys, "simulate", "--square", "1", "--step", "0.5", "--samples", "10")[0] == 2

    def test_zero_samples_rejected_by_parser(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--square", "1", "--samples", "0"])
        assert exc.value.code == 2


def test_console_script_entry_point(tmp_path):
    spec = tmp_path / "u.spec"
    spec.write_text("kind = uniform\na = -1\nb = 1\n")
    r = subprocess.run([sys.executable, "-m", "skorokhod.cli", "validate", "--spec", str(spec)],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "passed = True" in r.stdout
