"""Command-line front end.

Exit codes: 0 success, 1 usage or parse error, 2 physics-domain error
(degenerate closure, grid violation, failed fit).
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import calibration as cal
from .oracle import Grid, GridError, extract_phase_from_fringe, fringe_scan_numeric
from .phasespace import PhaseSpaceVector, phase_shift_general, sequence_profiles
from .propagator import GaussianPacket, alpha_curve, write_alpha_csv
from .seqfile import (SequenceFile, SequenceFileError, format_sequence_file, natural_file_text,
                      parse_sequence_file)
from .sequence import (InterferometerSequence, interferometer_phase, run_state_sequence,
                       sequence_laser_phase, solve_closure)

EXIT_OK, EXIT_USAGE, EXIT_PHYSICS = 0, 1, 2
ENGINES = ("operator", "phasespace", "oracle")


class UsageError(Exception):
    pass


class PhysicsError(Exception):
    pass


@dataclass
class RunReport:
    engine: str
    phi_i: float
    phi_L: float
    contrast: float
    closed: bool
    seconds: float

    def __post_init__(self):
        for name in ("phi_i", "phi_L", "contrast"):
            setattr(self, name, float(getattr(self, name)))
        self.closed = bool(self.closed)

    def line(self) -> str:
        return (f"engine={self.engine} phi_i={self.phi_i!r} phi_L={self.phi_L!r} "
                f"contrast={self.contrast!r} closed={str(self.closed).lower()} "
                f"seconds={self.seconds:.3f}")


def wrap(x: float) -> float:
    """Wrap to (-pi, pi]."""
    y = math.remainder(x, 2 * math.pi)
    return math.pi if y == -math.pi else y


def _load(path: str) -> SequenceFile:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    try:
        return parse_sequence_file(text)
    except SequenceFileError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _packet(args, seq: InterferometerSequence, required: bool) -> GaussianPacket | None:
    if args.width is None and not required:
        return None
    width = args.width
    if width is None:
        # one natural length unit of the first interval
        width = math.sqrt(seq.hbar * (seq.pulses[1].time - seq.pulses[0].time) / seq.mass)
    if not width > 0:
        raise UsageError("--width must be positive")
    return GaussianPacket(center=args.z0, velocity=args.v0, width=width, time=seq.t0)


def _grid(args, sf: SequenceFile) -> Grid | None:
    given = [args.zmin, args.zmax, args.n]
    if all(v is None for v in given):
        return sf.grid
    if any(v is None for v in given):
        raise UsageError("--zmin, --zmax and --n must be given together")
    try:
        return Grid(args.zmin, args.zmax, args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _run_engine(engine: str, sf: SequenceFile, args) -> RunReport:
    seq = sf.to_sequence()
    start = time.perf_counter()
    if engine == "operator":
        res = interferometer_phase(seq, _packet(args, seq, required=False))
        return RunReport(engine, res.interferometer_phase, res.laser_phase_total, res.contrast,
                         res.closed, time.perf_counter() - start)
    if engine == "phasespace":
        upper, lower = sequence_profiles(seq)
        chi0 = PhaseSpaceVector(args.z0, seq.mass * args.v0)
        laser = sequence_laser_phase(seq)
        res = phase_shift_general(upper, lower, laser, seq.mass, seq.hbar, chi0)
        return RunReport(engine, res.phase - laser, laser, math.nan, res.closed,
                         time.perf_counter() - start)
    if not seq.has_canonical_areas():
        raise UsageError("the oracle engine reads phases from fringes of the pi/2-pi-pi-pi/2 sequence")
    scan = fringe_scan_numeric(seq, _packet(args, seq, required=True), grid=_grid(args, sf),
                               split_tol=args.split_tol)
    fit = extract_phase_from_fringe(scan.laser_phase, scan.p_g2)
    laser = sequence_laser_phase(seq)
    closed = interferometer_phase(seq).closed
    return RunReport(engine, fit.phase, laser, fit.visibility, closed, time.perf_counter() - start)


def cmd_phase(args) -> int:
    sf = _load(args.file)
    engines = ENGINES if args.engine == "all" else (args.engine,)
    reports = []
    for engine in engines:
        try:
            reports.append(_run_engine(engine, sf, args))
        except GridError as exc:
            raise PhysicsError(f"[{engine}] {exc}") from None
        except (UsageError, PhysicsError):
            raise
        except ValueError as exc:
            raise PhysicsError(f"[{engine}] {exc}") from None
    for r in reports:
        print(r.line())
    if len(reports) > 1:
        dev = max(abs(wrap(a.phi_i - b.phi_i)) for i, a in enumerate(reports) for b in reports[i + 1:])
        print(f"max_pairwise_deviation={dev!r}")
    return EXIT_OK


def _fringe_rows(sf: SequenceFile, args):
    seq = sf.to_sequence()
    if len(seq.pulses) != 4 or not seq.has_canonical_areas():
        raise UsageError("fringe scans need the pi/2-pi-pi-pi/2 sequence")
    if args.points < 8:
        raise UsageError("--points must be at least 8")
    idx = args.pulse
    if not 0 <= idx < 4:
        raise UsageError("--pulse must be 0..3")
    scan = np.linspace(args.start, args.start + args.span, args.points, endpoint=False)
    packet = _packet(args, seq, required=True)
    if args.engine == "oracle":
        try:
            res = fringe_scan_numeric(seq, packet, pulse_index=idx, scan_phases=scan,
                                      grid=_grid(args, sf), split_tol=args.split_tol)
        except GridError as exc:
            raise PhysicsError(f"[oracle] {exc}") from None
        return list(zip(res.laser_phase, res.p_g1, res.p_g2))
    rows = []
    for ph in scan:
        s = seq.with_laser_phase(idx, float(ph))
        r = run_state_sequence(s, packet=packet)
        rows.append((sequence_laser_phase(s), r.p_g1, r.p_g2))
    return rows


def cmd_fringe(args) -> int:
    sf = _load(args.file)
    rows = _fringe_rows(sf, args)
    out = _open_out(args.output)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["phi_L", "P_g1", "P_g2"])
    for phi, p1, p2 in rows:
        w.writerow([repr(float(phi)), repr(float(p1)), repr(float(p2))])
    _close_out(out)
    if args.gnuplot_hints:
        name = args.output or "fringe.csv"
        print(f"gnuplot -p -e \"set datafile separator ','; set key autotitle columnhead; "
              f"plot '{name}' using 1:3 with linespoints, '' using 1:2 with linespoints\"", file=sys.stderr)
    return EXIT_OK


def cmd_closure(args) -> int:
    sf = None
    if args.file:
        sf = _load(args.file)
        seq = sf.to_sequence()
        a1, a2 = seq.a1, seq.a2
        t10 = args.t10 if args.t10 is not None else seq.pulses[1].time - seq.pulses[0].time
    else:
        if None in (args.a1, args.a2, args.t10):
            raise UsageError("give a sequence file or all of --a1, --a2, --t10")
        a1, a2, t10 = args.a1, args.a2, args.t10
    if a1 == a2:
        raise PhysicsError("closure degenerate: a1 == a2, every timing closes")
    try:
        t21, t32 = solve_closure(a1, a2, t10)
    except ValueError as exc:
        raise PhysicsError(str(exc)) from None
    print(f"t10={t10!r} t21={t21!r} t32={t32!r}")
    print(f"pulses at t0, t0+{t10!r}, t0+{t10 + t21!r}, t0+{t10 + t21 + t32!r}")
    if args.write:
        if sf is not None:
            t0 = sf.pulses[0].time
            times = (t0, t0 + t10, t0 + t10 + t21, t0 + t10 + t21 + t32)
            if len(sf.pulses) != 4:
                raise UsageError("--write with a file needs a four-pulse sequence")
            pulses = tuple(replace(p, time=t) for p, t in zip(sf.pulses, times))
            text = format_sequence_file(replace(sf, pulses=pulses, T=t10))
        else:
            text = natural_file_text(a1, a2, t10, t10=t10, t21=t21, t32=t32)
        Path(args.write).write_text(text, encoding="utf-8")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    if args.mode == "montecarlo":
        return _calibrate_montecarlo(args)
    if args.input is None:
        raise UsageError(f"--mode {args.mode} needs an input path")
    path = Path(args.input)
    try:
        if args.mode == "map":
            with path.open(encoding="utf-8") as fh:
                points = cal.read_field_map_csv(fh)
        else:
            points = _spectrum_dir_points(path, args.prominence)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    try:
        fit = cal.fit_gradient(points)
    except ValueError as exc:
        raise PhysicsError(f"fit failed: {exc}") from None
    print(f"B0_uT={fit.B0 / cal.MICROTESLA!r}")
    print(f"gradient_uT_per_m={fit.gradient / cal.MICROTESLA!r}")
    print(f"gradient_stderr_uT_per_m={fit.gradient_stderr / cal.MICROTESLA!r}")
    print(f"rms_residual_uT={float(np.sqrt(np.mean(fit.residuals**2))) / cal.MICROTESLA!r}")
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            cal.write_field_map_csv(points, fh, residuals=fit.residuals)
    if args.gnuplot_hints:
        name = args.output or "fieldmap.csv"
        print(f"gnuplot -p -e \"set datafile separator ','; set key autotitle columnhead; "
              f"plot '{name}' using 1:2 with points, {fit.B0 / cal.MICROTESLA!r} + "
              f"{fit.gradient / cal.MICROTESLA!r}*x\"", file=sys.stderr)
    return EXIT_OK


def _spectrum_dir_points(path: Path, prominence: float):
    """``index.csv`` in the directory lists ``file,z_m`` for each spectrum."""
    index = path / "index.csv"
    with index.open(encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader, None)
        entries = [(row[0].strip(), float(row[1])) for row in reader if row]
    points = []
    for name, z in entries:
        with (path / name).open(encoding="utf-8") as fh:
            spectrum = cal.read_spectrum_csv(fh)
        try:
            B = cal.field_from_spectrum(spectrum, prominence)
        except ValueError as exc:
            raise ValueError(f"{name}: {exc}") from None
        points.append(cal.FieldMapPoint(z, B))
    return points


def _calibrate_montecarlo(args) -> int:
    if args.trials < 1 or args.points < 2:
        raise UsageError("need --trials >= 1 and --points >= 2")
    rng = np.random.default_rng(args.seed)
    z = np.linspace(0.0, args.span, args.points)
    slopes = np.empty(args.trials)
    for i in range(args.trials):
        pts = cal.synthetic_field_map(args.B0_uT * cal.MICROTESLA, args.gradient_uT_per_m * cal.MICROTESLA,
                                      z, args.noise_uT * cal.MICROTESLA, rng)
        slopes[i] = cal.fit_gradient(pts).gradient / cal.MICROTESLA
    lo, hi = np.percentile(slopes, [2.5, 97.5])
    print(f"trials={args.trials} seed={args.seed}")
    print(f"slope_mean_uT_per_m={float(slopes.mean())!r}")
    print(f"slope_std_uT_per_m={float(slopes.std(ddof=1)) if args.trials > 1 else 0.0!r}")
    print(f"slope_95ci_uT_per_m={float(lo)!r},{float(hi)!r}")
    return EXIT_OK


def cmd_alpha(args) -> int:
    try:
        table = alpha_curve(args.tau_min, args.tau_max, args.points)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = _open_out(args.output)
    write_alpha_csv(table, out)
    _close_out(out)
    if args.gnuplot_hints:
        name = args.output or "alpha.csv"
        print(f"gnuplot -p -e \"set datafile separator ','; set key autotitle columnhead; set logscale x; "
              f"plot '{name}' using 1:2 with lines\"", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    """Operator-engine phase for the canonical timing over log-spaced T."""
    sf = _load(args.file)
    seq = sf.to_sequence()
    if not (0 < args.T_min < args.T_max) or args.points < 2:
        raise UsageError("need 0 < --T-min < --T-max and --points >= 2")
    out = _open_out(args.output)
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["T", "a1", "a2", "phi_i", "contrast", "closed"])
    for T in np.geomspace(args.T_min, args.T_max, args.points):
        s = InterferometerSequence.canonical(float(T), seq.a1, seq.a2, t0=seq.t0,
                                             phases=seq.laser_phases, mass=seq.mass, hbar=seq.hbar)
        r = interferometer_phase(s)
        w.writerow([repr(float(T)), repr(seq.a1), repr(seq.a2), repr(r.interferometer_phase),
                    repr(r.contrast), str(r.closed).lower()])
    _close_out(out)
    return EXIT_OK


def _open_out(path):
    return sys.stdout if path in (None, "-") else open(path, "w", encoding="utf-8", newline="")


def _close_out(fh):
    if fh is not sys.stdout:
        fh.close()


def _add_packet_flags(p):
    p.add_argument("--width", type=float, help="initial packet width (1/sqrt(e) amplitude half-width)")
    p.add_argument("--z0", type=float, default=0.0, help="initial packet center")
    p.add_argument("--v0", type=float, default=0.0, help="initial packet velocity")
    p.add_argument("--zmin", type=float, help="oracle grid lower edge")
    p.add_argument("--zmax", type=float, help="oracle grid upper edge")
    p.add_argument("--n", type=int, help="oracle grid points (power of two)")
    p.add_argument("--split-tol", type=float, default=1e-6,
                   help="oracle splitting-phase budget between paths (rad)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="t3i", description="Four-pulse T^3 interferometer toolkit")
    parser.add_argument("--seed", type=int, default=0, help="seed for Monte Carlo paths")
    parser.add_argument("--gnuplot-hints", action="store_true", help="print a gnuplot command to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("phase", help="interferometer phase from one or all engines")
    p.add_argument("file")
    p.add_argument("--engine", choices=ENGINES + ("all",), default="operator")
    _add_packet_flags(p)
    p.set_defaults(func=cmd_phase)

    p = sub.add_parser("fringe", help="exit-port populations while scanning one pulse phase")
    p.add_argument("file")
    p.add_argument("--engine", choices=("operator", "oracle"), default="operator")
    p.add_argument("--pulse", type=int, default=3, help="index of the scanned pulse")
    p.add_argument("--points", type=int, default=32)
    p.add_argument("--start", type=float, default=0.0)
    p.add_argument("--span", type=float, default=2 * math.pi)
    p.add_argument("--output", "-o")
    _add_packet_flags(p)
    p.set_defaults(func=cmd_fringe)

    p = sub.add_parser("closure", help="pulse intervals closing both branches")
    p.add_argument("file", nargs="?")
    p.add_argument("--a1", type=float)
    p.add_argument("--a2", type=float)
    p.add_argument("--t10", type=float)
    p.add_argument("--write", help="write a sequence file with the closing timings")
    p.set_defaults(func=cmd_closure)

    p = sub.add_parser("calibrate", help="field map and gradient fit")
    p.add_argument("input", nargs="?", help="field-map CSV (map) or spectra directory (spectrum)")
    p.add_argument("--mode", choices=("map", "spectrum", "montecarlo"), default="map")
    p.add_argument("--output", "-o", help="write the field map with residuals as CSV")
    p.add_argument("--prominence", type=float, default=0.05)
    p.add_argument("--B0-uT", type=float, default=83.5)
    p.add_argument("--gradient-uT-per-m", type=float, default=-587.0)
    p.add_argument("--noise-uT", type=float, default=0.5)
    p.add_argument("--points", type=int, default=10)
    p.add_argument("--span", type=float, default=0.1, help="z span of the synthetic map (m)")
    p.add_argument("--trials", type=int, default=1000)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("alpha", help="tabulate the cubic-phase factor alpha(tau)")
    p.add_argument("--tau-min", type=float, default=0.0)
    p.add_argument("--tau-max", type=float, default=100.0)
    p.add_argument("--points", type=int, default=61)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_alpha)

    p = sub.add_parser("sweep", help="phase versus T for the canonical timing (CSV)")
    p.add_argument("file")
    p.add_argument("--T-min", type=float, required=True)
    p.add_argument("--T-max", type=float, required=True)
    p.add_argument("--points", type=int, default=10)
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PhysicsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
