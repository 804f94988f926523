import csv
import io
import math
import subprocess
import sys

import numpy as np
import pytest

from t3interferometer.calibration import (
    FieldMapPoint,
    f2_to_f3_transitions,
    synthetic_field_map,
    synthetic_spectrum,
    write_field_map_csv,
    write_spectrum_csv,
)
from t3interferometer.physics import CODATA
from t3interferometer.seqfile import canonical_file_text, natural_file_text, parse_sequence_file


def run(*args, cwd=None):
    return subprocess.run([sys.executable, "-m", "t3interferometer", *map(str, args)],
                          capture_output=True, text=True, cwd=cwd, timeout=300)


def report_lines(stdout):
    out = {}
    for line in stdout.splitlines():
        if line.startswith("engine="):
            fields = dict(item.split("=", 1) for item in line.split())
            out[fields["engine"]] = fields
    return out


def key_values(stdout):
    return dict(line.split("=", 1) for line in stdout.splitlines() if "=" in line and " " not in line)


def read_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    return rows[0], np.array(rows[1:], dtype=float)


@pytest.fixture
def closed_file(tmp_path):
    path = tmp_path / "closed.seq"
    path.write_text(natural_file_text(0.5, 0.3, 1.0))
    return path


@pytest.fixture
def open_file(tmp_path):
    path = tmp_path / "open.seq"
    path.write_text(natural_file_text(0.5, 0.3, 1.0, t21=2.1))
    return path


def test_phase_all_engines_agree(closed_file):
    res = run("phase", closed_file, "--engine", "all")
    assert res.returncode == 0, res.stderr
    reports = report_lines(res.stdout)
    assert set(reports) == {"operator", "phasespace", "oracle"}
    phases = [float(r["phi_i"]) for r in reports.values()]
    # (m/hbar)(a1^2 - a2^2) T^3
    assert phases[0] == pytest.approx(0.16, abs=1e-12)
    assert max(phases) - min(phases) < 1e-3
    assert all(r["closed"] == "true" for r in reports.values())
    assert float(key_values(res.stdout)["max_pairwise_deviation"]) < 1e-3


def test_phase_canonical_si_file(tmp_path):
    path = tmp_path / "si.seq"
    path.write_text(canonical_file_text(1.5e-3))
    res = run("phase", path, "--engine", "all")
    assert res.returncode == 0, res.stderr
    phases = [float(r["phi_i"]) for r in report_lines(res.stdout).values()]
    assert max(phases) - min(phases) < 1e-3


def test_phase_equal_accelerations_vanishes(tmp_path):
    path = tmp_path / "eq.seq"
    path.write_text(natural_file_text(0.5, 0.5, 1.0))
    res = run("phase", path, "--engine", "all")
    assert res.returncode == 0, res.stderr
    for r in report_lines(res.stdout).values():
        assert abs(float(r["phi_i"])) < 1e-12


def test_phase_open_sequence_loses_contrast(open_file):
    res = run("phase", open_file, "--engine", "operator", "--width", "1.0")
    assert res.returncode == 0, res.stderr
    r = report_lines(res.stdout)["operator"]
    assert r["closed"] == "false"
    assert float(r["contrast"]) < 1


def test_phase_reports_laser_phase(tmp_path):
    path = tmp_path / "laser.seq"
    path.write_text(natural_file_text(0.5, 0.3, 1.0, phases=(0.1, 0.2, 0.3, 0.4)))
    r = report_lines(run("phase", path).stdout)["operator"]
    assert float(r["phi_L"]) == pytest.approx(0.1 - 0.4 + 0.6 - 0.4, abs=1e-15)


def test_phase_grid_violation_exits_2(closed_file):
    res = run("phase", closed_file, "--engine", "oracle", "--zmin", "-0.5", "--zmax", "0.5", "--n", "256")
    assert res.returncode == 2
    assert "[oracle]" in res.stderr


def test_fringe_rows_and_cosine(closed_file):
    res = run("fringe", closed_file, "--points", "16")
    assert res.returncode == 0, res.stderr
    header, data = read_csv(res.stdout)
    assert header == ["phi_L", "P_g1", "P_g2"]
    assert len(data) == 16
    phi, p1, p2 = data.T
    assert np.max(np.abs(p1 + p2 - 1)) < 1e-12
    assert np.max(np.abs(p2 - 0.5 * (1 + np.cos(0.16 + phi)))) < 1e-6


def test_fringe_oracle_matches_operator(closed_file):
    _, analytic = read_csv(run("fringe", closed_file, "--points", "12").stdout)
    res = run("fringe", closed_file, "--points", "12", "--engine", "oracle")
    assert res.returncode == 0, res.stderr
    _, numeric = read_csv(res.stdout)
    assert np.max(np.abs(numeric - analytic)) < 1e-3


def test_fringe_to_file_with_hints(closed_file, tmp_path):
    out = tmp_path / "fringe.csv"
    res = run("--gnuplot-hints", "fringe", closed_file, "-o", out, "--points", "8")
    assert res.returncode == 0, res.stderr
    assert res.stdout == ""
    assert "gnuplot" in res.stderr and str(out) in res.stderr
    assert out.read_text().splitlines()[0] == "phi_L,P_g1,P_g2"


def test_fringe_needs_eight_points(closed_file):
    assert run("fringe", closed_file, "--points", "4").returncode == 1


def test_closure_one_millisecond():
    res = run("closure", "--a1", "-9.81", "--a2", "-9.8", "--t10", "1e-3")
    assert res.returncode == 0, res.stderr
    first = res.stdout.splitlines()[0]
    assert first == "t10=0.001 t21=0.002 t32=0.001"


def test_closure_degenerate_exits_2():
    res = run("closure", "--a1", "1", "--a2", "1", "--t10", "1")
    assert res.returncode == 2
    assert "closure degenerate" in res.stderr


def test_closure_write_round_trip(open_file, tmp_path):
    out = tmp_path / "closed.seq"
    res = run("closure", open_file, "--write", out)
    assert res.returncode == 0, res.stderr
    seq = parse_sequence_file(out.read_text()).to_sequence()
    times = [p.time for p in seq.pulses]
    assert np.diff(times).tolist() == [1.0, 2.0, 1.0]
    check = run("phase", out)
    assert report_lines(check.stdout)["operator"]["closed"] == "true"


def test_closure_write_from_accelerations(tmp_path):
    out = tmp_path / "nat.seq"
    assert run("closure", "--a1", "0.5", "--a2", "0.3", "--t10", "2", "--write", out).returncode == 0
    sf = parse_sequence_file(out.read_text())
    assert sf.accelerations() == pytest.approx((0.5, 0.3), abs=1e-15)
    assert [p.time for p in sf.pulses] == [0.0, 2.0, 6.0, 8.0]


def test_closure_missing_arguments():
    assert run("closure", "--a1", "1").returncode == 1


def test_calibrate_map(tmp_path):
    path = tmp_path / "map.csv"
    with path.open("w", newline="") as fh:
        write_field_map_csv(synthetic_field_map(83.5e-6, -587e-6, np.linspace(0, 0.1, 10)), fh)
    out = tmp_path / "fit.csv"
    res = run("calibrate", path, "--output", out)
    assert res.returncode == 0, res.stderr
    kv = key_values(res.stdout)
    assert float(kv["B0_uT"]) == pytest.approx(83.5, abs=1e-9)
    assert float(kv["gradient_uT_per_m"]) == pytest.approx(-587, abs=1e-9)
    header, data = read_csv(out.read_text())
    assert header == ["z_m", "B_uT", "residual_uT"]
    assert np.max(np.abs(data[:, 2])) < 1e-9


def test_calibrate_single_point_is_an_error(tmp_path):
    path = tmp_path / "one.csv"
    with path.open("w", newline="") as fh:
        write_field_map_csv([FieldMapPoint(0.0, 80e-6)], fh)
    res = run("calibrate", path)
    assert res.returncode == 2
    assert "at least two" in res.stderr


def test_calibrate_missing_file(tmp_path):
    res = run("calibrate", tmp_path / "absent.csv")
    assert res.returncode == 1
    assert "absent.csv" in res.stderr


def test_calibrate_montecarlo_is_deterministic():
    args = ("calibrate", "--mode", "montecarlo", "--trials", "300")
    a, b = run("--seed", "7", *args), run("--seed", "7", *args)
    assert a.returncode == 0, a.stderr
    assert a.stdout == b.stdout
    assert run("--seed", "8", *args).stdout != a.stdout
    kv = key_values(a.stdout)
    assert float(kv["slope_mean_uT_per_m"]) == pytest.approx(-587, abs=3)
    sigma_ols = 0.5 / math.sqrt(np.sum((np.linspace(0, 0.1, 10) - 0.05) ** 2))
    assert float(kv["slope_std_uT_per_m"]) == pytest.approx(sigma_ols, rel=0.15)
    lo, hi = map(float, kv["slope_95ci_uT_per_m"].split(","))
    assert lo < -587 < hi


def test_calibrate_spectrum_directory(tmp_path):
    z = [0.0, 0.05, 0.1]
    index = ["file,z_m"]
    for i, zi in enumerate(z):
        B = 83.5e-6 - 587e-6 * zi
        spacing = CODATA.mu_B / CODATA.hbar * B / 3
        x = np.linspace(-6 * 28e-6 * CODATA.mu_B / CODATA.hbar, 6 * 28e-6 * CODATA.mu_B / CODATA.hbar, 6001)
        spec = synthetic_spectrum(B, f2_to_f3_transitions(), x, linewidth=0.08 * spacing)
        with (tmp_path / f"s{i}.csv").open("w", newline="") as fh:
            write_spectrum_csv(spec, fh)
        index.append(f"s{i}.csv,{zi}")
    (tmp_path / "index.csv").write_text("\n".join(index) + "\n")
    res = run("calibrate", tmp_path, "--mode", "spectrum")
    assert res.returncode == 0, res.stderr
    kv = key_values(res.stdout)
    assert float(kv["gradient_uT_per_m"]) == pytest.approx(-587, abs=5)
    assert float(kv["B0_uT"]) == pytest.approx(83.5, abs=0.5)


def test_alpha_table():
    res = run("alpha", "--tau-min", "0", "--tau-max", "1e6", "--points", "9")
    assert res.returncode == 0, res.stderr
    header, data = read_csv(res.stdout)
    assert len(data) == 9
    assert data[0, 1] == pytest.approx(1 / 6, abs=1e-12)
    assert data[-1, 1] == pytest.approx(1 / 24, abs=1e-6)
    assert np.all(np.diff(data[:, 1]) <= 0)


def test_alpha_bad_range():
    assert run("alpha", "--tau-min", "5", "--tau-max", "1").returncode == 1


def test_sweep_cubic(closed_file):
    res = run("sweep", closed_file, "--T-min", "0.1", "--T-max", "10", "--points", "5")
    assert res.returncode == 0, res.stderr
    header, data = read_csv(res.stdout.replace("true", "1").replace("false", "0"))
    assert header == ["T", "a1", "a2", "phi_i", "contrast", "closed"]
    assert np.allclose(data[:, 3], 0.16 * data[:, 0] ** 3, rtol=1e-12)
    assert np.all(data[:, 5] == 1)


def test_usage_errors_exit_1(closed_file, tmp_path):
    assert run().returncode == 1
    assert run("phase").returncode == 1
    assert run("phase", closed_file, "--engine", "bogus").returncode == 1
    bad = tmp_path / "bad.seq"
    bad.write_text("atom mass=heavy\n")
    res = run("phase", bad)
    assert res.returncode == 1
    assert "line 1, column 11" in res.stderr


def test_help_exits_0():
    res = run("--help")
    assert res.returncode == 0
    assert "phase" in res.stdout


def test_phase_is_deterministic(closed_file):
    strip = lambda s: [line.rsplit(" seconds=", 1)[0] for line in s.splitlines()]  # noqa: E731
    a = run("phase", closed_file, "--engine", "all").stdout
    b = run("phase", closed_file, "--engine", "all").stdout
    assert strip(a) == strip(b)
