"""Brute-force grid propagation of the two-component wavefunction.

Nothing here calls the analytic engines: the state is sampled on a periodic
grid, free evolution in a uniform acceleration is done by symmetric
split-step Fourier propagation, and pulses are applied pointwise. Runs
driven from an :class:`InterferometerSequence` are carried out in natural
units (hbar = m = 1, unit time = first pulse interval, unit length =
sqrt(hbar T / m)).

For a linear potential one Strang step differs from the exact propagator by
the global phase ``exp(i m a^2 dt^3 / 24 hbar)`` only, so the splitting error
over a segment of duration ``tau`` is the phase ``m a^2 tau dt^2 / 24 hbar``.
Only differences of that phase between interfering paths are observable;
step counts are chosen against that bound.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import fft as sfft
from scipy.integrate import simpson

from .propagator import GaussianPacket, LinearPotentialSpec
from .sequence import InterferometerSequence

#: Per-step phase excursion allowed between neighbouring grid points.
MAX_STEP_PHASE = math.pi / 4
#: Default bound on the splitting phase (between paths, or absolute for a single segment).
SPLIT_TOL = 1e-6
#: Edge clearance, in packet widths (5 widths = 5 sqrt(2) standard deviations).
EDGE_WIDTHS = 5.0
#: Grid half-extent around the classical envelope, in packet widths.
ENVELOPE_WIDTHS = 10.0
MIN_POINTS = 256


class GridError(ValueError):
    """The wavefunction left the region the grid can represent."""


@dataclass(frozen=True)
class Grid:
    z_min: float
    z_max: float
    n_points: int

    def __post_init__(self):
        n = self.n_points
        if n < MIN_POINTS or n & (n - 1):
            raise ValueError(f"n_points must be a power of two >= {MIN_POINTS}, got {n}")
        if not self.z_max > self.z_min:
            raise ValueError("z_max must exceed z_min")

    @property
    def length(self) -> float:
        return self.z_max - self.z_min

    @property
    def dz(self) -> float:
        return self.length / self.n_points

    @property
    def dk(self) -> float:
        return 2 * math.pi / self.length

    @property
    def k_max(self) -> float:
        return math.pi / self.dz

    @property
    def z(self) -> np.ndarray:
        return self.z_min + self.dz * np.arange(self.n_points)

    @property
    def k(self) -> np.ndarray:
        return 2 * math.pi * sfft.fftfreq(self.n_points, self.dz)

    def scaled(self, length_unit: float) -> "Grid":
        return Grid(self.z_min / length_unit, self.z_max / length_unit, self.n_points)


@dataclass(frozen=True)
class GridWavefunction:
    grid: Grid
    amp_g1: np.ndarray
    amp_g2: np.ndarray
    time: float = 0.0
    mass: float = 1.0
    hbar: float = 1.0

    def norm(self) -> float:
        return float((np.sum(np.abs(self.amp_g1) ** 2) + np.sum(np.abs(self.amp_g2) ** 2)) * self.grid.dz)

    def populations(self) -> tuple[float, float]:
        dz = self.grid.dz
        return float(np.sum(np.abs(self.amp_g1) ** 2) * dz), float(np.sum(np.abs(self.amp_g2) ** 2) * dz)

    def position_moments(self) -> tuple[float, float]:
        """Mean and variance of z over both components."""
        rho = np.abs(self.amp_g1) ** 2 + np.abs(self.amp_g2) ** 2
        z = self.grid.z
        total = rho.sum()
        mean = float(rho @ z / total)
        return mean, float(rho @ (z - mean) ** 2 / total)


# -- single-packet primitives -------------------------------------------------

def gaussian_samples(z: np.ndarray, packet: GaussianPacket, mass: float = 1.0,
                     hbar: float = 1.0) -> np.ndarray:
    """``psi(z)`` of a (possibly chirped) Gaussian, with phase ``global_phase`` at z = 0."""
    chi = packet.chirp
    w0 = packet.width / math.sqrt(1.0 + chi * chi)
    q = 1.0 + 1j * chi
    k = mass * packet.velocity / hbar
    dz = z - packet.center
    psi = (math.sqrt(math.pi) * w0) ** -0.5 / np.sqrt(q) * np.exp(-dz**2 / (2 * w0**2 * q) + 1j * k * dz)
    # phase of the expression above at z = 0, taken from the exponent so it never underflows
    ref = (-packet.center**2 / (2 * w0**2 * q) - 1j * k * packet.center).imag - 0.5 * math.atan(chi)
    return psi * np.exp(1j * (packet.global_phase - ref))


def _check_tails(psi: np.ndarray, what: str, tol: float = 1e-12) -> None:
    peak = np.max(np.abs(psi))
    if max(abs(psi[0]), abs(psi[-1])) > tol * peak:
        raise GridError(f"{what} does not decay below {tol:g} of its peak at the sample ends")


def init_gaussian(grid: Grid, packet: GaussianPacket, internal: str = "g1", mass: float = 1.0,
                  hbar: float = 1.0) -> GridWavefunction:
    if internal not in ("g1", "g2"):
        raise ValueError(f"unknown internal state {internal!r}")
    psi = gaussian_samples(grid.z, packet, mass, hbar)
    _check_tails(psi, "initial packet")
    _check_tails(sfft.fftshift(sfft.fft(psi)), "initial packet spectrum")
    zero = np.zeros_like(psi)
    g1, g2 = (psi, zero) if internal == "g1" else (zero, psi)
    return GridWavefunction(grid, g1, g2, packet.time, mass, hbar)


def pulse_matrix_local(area: float, laser_phase: float) -> np.ndarray:
    c, s = math.cos(0.5 * area), math.sin(0.5 * area)
    e = complex(math.cos(laser_phase), math.sin(laser_phase))
    return np.array([[c, -1j * e * s], [-1j * e.conjugate() * s, c]])


def apply_pulse(psi: GridWavefunction, area: float, laser_phase: float) -> GridWavefunction:
    m = pulse_matrix_local(area, laser_phase)
    g1 = m[0, 0] * psi.amp_g1 + m[0, 1] * psi.amp_g2
    g2 = m[1, 0] * psi.amp_g1 + m[1, 1] * psi.amp_g2
    return replace(psi, amp_g1=g1, amp_g2=g2)


# -- split-step core ----------------------------------------------------------------

def step_bound(grid: Grid, accelerations, mass: float = 1.0, hbar: float = 1.0) -> float:
    """Largest dt keeping neighbour-point phase excursions below pi/4 in both domains."""
    amax = max((abs(a) for a in accelerations), default=0.0)
    dt_k = MAX_STEP_PHASE * mass / (hbar * grid.k_max * grid.dk)
    dt_z = MAX_STEP_PHASE * hbar / (mass * amax * grid.dz) if amax > 0 else math.inf
    return min(dt_k, dt_z)


def choose_steps(duration: float, grid: Grid, accelerations, mass: float = 1.0, hbar: float = 1.0,
                 split_tol: float = SPLIT_TOL, dt_max: float | None = None) -> int:
    """Step count for one segment from the excursion bound and the splitting-phase budget."""
    if duration < 0:
        raise ValueError("duration must be non-negative")
    if duration == 0:
        return 0
    dt = step_bound(grid, accelerations, mass, hbar)
    amax = max((abs(a) for a in accelerations), default=0.0)
    if amax > 0:
        dt = min(dt, math.sqrt(24 * hbar * split_tol / (mass * amax**2 * duration)))
    if dt_max is not None:
        dt = min(dt, dt_max)
    return max(1, math.ceil(duration / dt * (1 + 1e-12)))


def _moments_ok(rows: np.ndarray, grid: Grid, hbar: float, mass: float, spectra=None) -> str | None:
    """Return a message if any populated row is within EDGE_WIDTHS of an edge (z or k)."""
    z, dz = grid.z, grid.dz
    rho = np.abs(rows) ** 2
    weight = rho.sum(axis=1)
    live = weight * dz > 1e-12
    if not live.any():
        return None
    rho, weight = rho[live], weight[live]
    mean = rho @ z / weight
    std = np.sqrt(np.maximum(rho @ z**2 / weight - mean**2, 0.0))
    margin = EDGE_WIDTHS * math.sqrt(2.0) * std
    if np.any(mean - margin < grid.z_min) or np.any(mean + margin > grid.z_max):
        return "packet within 5 widths of a position-grid edge"
    if spectra is not None:
        k = grid.k
        sk = np.abs(spectra[live]) ** 2
        wk = sk.sum(axis=1)
        km = sk @ k / wk
        ks = np.sqrt(np.maximum(sk @ k**2 / wk - km**2, 0.0))
        kmargin = EDGE_WIDTHS * math.sqrt(2.0) * ks
        if np.any(np.abs(km) + kmargin > grid.k_max):
            return "momentum distribution within 5 widths of the wavenumber cutoff"
    return None


def strang_evolve(rows: np.ndarray, accelerations: np.ndarray, grid: Grid, dt: float, steps: int,
                  mass: float = 1.0, hbar: float = 1.0, check_every: int = 16) -> np.ndarray:
    """Evolve each row under ``p^2/2m - m a_row z`` for ``steps`` Strang steps of ``dt``."""
    rows = np.array(rows, dtype=complex, copy=True)
    if steps == 0:
        return rows
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > step_bound(grid, accelerations, mass, hbar) * (1 + 1e-9):
        raise ValueError("time step violates the pi/4 phase-excursion bound")
    z, k = grid.z, grid.k
    acc = np.asarray(accelerations, dtype=float)[:, None]
    half = np.exp(0.5j * mass * acc * z * dt / hbar)
    full = half * half
    kinetic = np.exp(-0.5j * hbar * k * k * dt / mass)
    rows *= half
    for s in range(steps):
        spec = sfft.fft(rows, axis=-1)
        if s % check_every == 0:
            msg = _moments_ok(rows, grid, hbar, mass, spec)
            if msg:
                raise GridError(msg)
        rows = sfft.ifft(spec * kinetic, axis=-1)
        rows *= full if s < steps - 1 else half
    msg = _moments_ok(rows, grid, hbar, mass, sfft.fft(rows, axis=-1))
    if msg:
        raise GridError(msg)
    return rows


def evolve_linear(psi: GridWavefunction, a1: float, a2: float, duration: float,
                  steps: int) -> GridWavefunction:
    """Split-step evolution, g1 under acceleration ``a1`` and g2 under ``a2``."""
    if duration < 0:
        raise ValueError("duration must be non-negative")
    if steps < 1 and duration > 0:
        raise ValueError("need at least one step")
    if duration == 0:
        return psi
    rows = strang_evolve(np.stack([psi.amp_g1, psi.amp_g2]), np.array([a1, a2]), psi.grid,
                         duration / steps, steps, psi.mass, psi.hbar)
    return replace(psi, amp_g1=rows[0], amp_g2=rows[1], time=psi.time + duration)


# -- exact grid operators (used to test the splitting against the factorized form) -----

def grid_free_evolution(psi: np.ndarray, grid: Grid, t: float, mass: float = 1.0,
                        hbar: float = 1.0) -> np.ndarray:
    return sfft.ifft(sfft.fft(psi) * np.exp(-0.5j * hbar * grid.k**2 * t / mass))


def grid_displacement(psi: np.ndarray, grid: Grid, Z: float, P: float, hbar: float = 1.0) -> np.ndarray:
    """``exp[-i (Z p - P z) / hbar]``: spectral shift by Z, then momentum kick P."""
    shifted = sfft.ifft(sfft.fft(psi) * np.exp(-1j * grid.k * Z))
    return np.exp(-0.5j * P * Z / hbar) * np.exp(1j * P * grid.z / hbar) * shifted


def l2_distance(a: np.ndarray, b: np.ndarray, grid: Grid) -> float:
    return float(np.sqrt(np.sum(np.abs(a - b) ** 2) * grid.dz))


# -- sequence runs ------------------------------------------------------------------

@dataclass(frozen=True)
class _Problem:
    """A sequence in natural units, time origin at the first pulse."""

    times: tuple[float, ...]
    areas: tuple[float, ...]
    phases: tuple[float, ...]
    a1: float
    a2: float
    packet: GaussianPacket
    grid: Grid
    steps: tuple[int, ...]
    time_unit: float
    length_unit: float


def _natural_problem(seq: InterferometerSequence, packet: GaussianPacket, grid: Grid | None,
                     split_tol: float) -> _Problem:
    if len(seq.pulses) < 2:
        raise ValueError("need at least two pulses")
    tu = seq.pulses[1].time - seq.pulses[0].time
    lu = math.sqrt(seq.hbar * tu / seq.mass)
    au = lu / tu**2
    t0 = seq.pulses[0].time
    times = tuple((p.time - t0) / tu for p in seq.pulses)
    areas = tuple(p.area for p in seq.pulses)
    # a packet given at some other time is taken to be the state at the first pulse
    nat_packet = GaussianPacket(center=packet.center / lu, velocity=packet.velocity * tu / lu,
                                width=packet.width / lu, global_phase=packet.global_phase,
                                time=0.0, chirp=packet.chirp)
    a1, a2 = seq.a1 / au, seq.a2 / au
    if grid is None:
        grid = auto_grid(times, a1, a2, nat_packet, areas=areas)
    else:
        grid = grid.scaled(lu)
    # one dt per unit time, so commensurate segments share it exactly; rounding
    # can leave segments with slightly different dt, so check the actual spread
    dt = step_bound(grid, (a1, a2))
    per_unit = math.ceil(1.0 / dt)
    while True:
        steps = []
        for a, b in zip(times, times[1:]):
            n = max(1, round((b - a) * per_unit))
            if (b - a) / n > dt:
                n = math.ceil((b - a) / dt)
            steps.append(n)
        spread = splitting_phase_spread(times, areas, a1, a2, steps)
        if spread <= split_tol:
            break
        per_unit = math.ceil(per_unit * max(1.1, math.sqrt(spread / split_tol)))
    steps = tuple(steps)
    return _Problem(times, areas, tuple(p.laser_phase for p in seq.pulses),
                    a1, a2, nat_packet, grid, steps, tu, lu)


def splitting_phase_spread(times, areas, a1, a2, steps) -> float:
    """Largest difference of accumulated splitting phase between two reachable paths.

    Each segment adds ``a^2 tau dt^2 / 24`` (natural units) to a path.
    """
    durations = [b - a for a, b in zip(times, times[1:])]
    dts = [d / n for d, n in zip(durations, steps)]
    phases = [sum(a * a * d * h * h / 24 for a, d, h in zip(accs, durations, dts))
              for accs in _paths(times, a1, a2, areas)]
    return max(phases) - min(phases)


def _paths(times, a1, a2, areas=None):
    """Acceleration histories the state can follow, starting in g1.

    A pulse that cannot swap (area 2 pi) or cannot leave the state alone
    (area pi) prunes the histories accordingly; ``areas=None`` allows all.
    """
    nseg = len(times) - 1
    if nseg > 12:
        raise ValueError("too many pulses for path enumeration")
    for states in itertools.product((0, 1), repeat=nseg):
        if areas is not None:
            prev, ok = 0, True
            for area, st in zip(areas, states):
                c, s_ = abs(math.cos(0.5 * area)), abs(math.sin(0.5 * area))
                if (st == prev and c < 1e-12) or (st != prev and s_ < 1e-12):
                    ok = False
                    break
                prev = st
            if not ok:
                continue
        yield tuple(a1 if st == 0 else a2 for st in states)


def classical_envelope(times, a1, a2, packet: GaussianPacket, areas=None, samples: int = 64):
    """(z_lo, z_hi, v_abs_max) over every reachable path, ignoring widths."""
    z_lo = z_hi = packet.center
    vmax = abs(packet.velocity)
    for accs in _paths(times, a1, a2, areas):
        z, v = packet.center, packet.velocity
        for (ta, tb), a in zip(zip(times, times[1:]), accs):
            s = np.linspace(0.0, tb - ta, samples)
            zs = z + v * s + 0.5 * a * s * s
            z_lo, z_hi = min(z_lo, zs.min()), max(z_hi, zs.max())
            if a != 0:
                s_turn = -v / a
                if 0 < s_turn < tb - ta:
                    zt = z + v * s_turn + 0.5 * a * s_turn**2
                    z_lo, z_hi = min(z_lo, zt), max(z_hi, zt)
            z, v = zs[-1], v + a * (tb - ta)
            vmax = max(vmax, abs(v))
    return z_lo, z_hi, vmax


def auto_grid(times, a1: float, a2: float, packet: GaussianPacket, mass: float = 1.0,
              hbar: float = 1.0, areas=None) -> Grid:
    """Grid covering every classical path +- 10 widths, resolving momenta up to 10/w0 past the
    fastest path."""
    z_lo, z_hi, vmax = classical_envelope(times, a1, a2, packet, areas)
    chi = packet.chirp
    w0 = packet.width / math.sqrt(1 + chi * chi)
    t_s = mass * w0**2 / hbar
    span = times[-1] - times[0]
    w_max = w0 * math.sqrt(1 + max(chi**2, (chi + span / t_s) ** 2))
    lo = z_lo - ENVELOPE_WIDTHS * w_max
    hi = z_hi + ENVELOPE_WIDTHS * w_max
    k_need = mass * vmax / hbar + ENVELOPE_WIDTHS / w0
    dz = math.pi / k_need
    n = max(MIN_POINTS, 1 << math.ceil(math.log2((hi - lo) / dz)))
    return Grid(lo, hi, n)


@dataclass(frozen=True)
class NumericResult:
    p_g1: float
    p_g2: float
    overlap: complex
    norm_drift: float
    grid: Grid
    steps: tuple[int, ...]

    @property
    def contrast(self) -> float:
        return abs(self.overlap)

    @property
    def phase(self) -> float:
        return math.atan2(self.overlap.imag, self.overlap.real)


def _segment_accels(a1, a2, branch_states):
    return np.array([a1, a2] + [a1 if s == 0 else a2 for s in branch_states])


def _apply_pulse_rows(rows: np.ndarray, area: float, phase: float) -> np.ndarray:
    m = pulse_matrix_local(area, phase)
    out = rows.copy()
    out[0] = m[0, 0] * rows[0] + m[0, 1] * rows[1]
    out[1] = m[1, 0] * rows[0] + m[1, 1] * rows[1]
    return out


def _norm(rows: np.ndarray, dz: float) -> float:
    return float(np.sum(np.abs(rows[:2]) ** 2) * dz)


def _run(prob: _Problem, stop_before: int | None = None, rows=None, start: int = 0,
         phases=None, with_branches: bool = True):
    """Alternate pulses and evolutions from pulse ``start``; stop before pulse ``stop_before``.

    Rows are (g1, g2[, upper copy, lower copy]). Branch copies leave the
    first pulse in g2 (upper) and g1 (lower) and swap states at every later
    pulse without amplitude factors.
    """
    g = prob.grid
    phases = prob.phases if phases is None else phases
    stop = len(prob.times) if stop_before is None else stop_before
    if rows is None:
        psi = gaussian_samples(g.z, prob.packet)
        _check_tails(psi, "initial packet")
        zero = np.zeros_like(psi)
        rows = np.stack([psi, zero, psi, psi] if with_branches else [psi, zero])
    branch = [1, 0]
    # branch states after pulse i: upper = 1 - (i % 2), lower = i % 2
    drift = 0.0
    for i in range(start, stop):
        rows = _apply_pulse_rows(rows, prob.areas[i], phases[i])
        branch = [1 - i % 2, i % 2]
        drift = max(drift, abs(_norm(rows, g.dz) - 1.0))
        if i + 1 < len(prob.times):
            n = prob.steps[i]
            dt = (prob.times[i + 1] - prob.times[i]) / n
            accs = _segment_accels(prob.a1, prob.a2, branch)[: rows.shape[0]]
            rows = strang_evolve(rows, accs, g, dt, n)
            drift = max(drift, abs(_norm(rows, g.dz) - 1.0))
    return rows, drift


def run_sequence_numeric(seq: InterferometerSequence, packet: GaussianPacket | None = None,
                         grid: Grid | None = None, split_tol: float = SPLIT_TOL) -> NumericResult:
    """Exit populations and the branch overlap ``<psi_upper|psi_lower>``.

    ``grid`` is in the sequence's length units; by default it is sized from
    the classical envelope. The returned grid is in natural units.
    """
    prob = _natural_problem(seq, packet or GaussianPacket(), grid, split_tol)
    rows, drift = _run(prob)
    dz = prob.grid.dz
    p1 = float(np.sum(np.abs(rows[0]) ** 2) * dz)
    p2 = float(np.sum(np.abs(rows[1]) ** 2) * dz)
    overlap = complex(np.sum(np.conj(rows[2]) * rows[3]) * dz)
    return NumericResult(p1, p2, overlap, drift, prob.grid, prob.steps)


# -- fringes ----------------------------------------------------------------------

#: Weights of the pulse phases in the total laser phase of pi/2 - pi - pi - pi/2.
LASER_PHASE_WEIGHTS = (1.0, -2.0, 2.0, -1.0)


@dataclass(frozen=True)
class FringeScan:
    laser_phase: np.ndarray
    p_g1: np.ndarray
    p_g2: np.ndarray


def fringe_scan_numeric(seq: InterferometerSequence, packet: GaussianPacket | None = None,
                        pulse_index: int = 3, scan_phases=None, n_points: int = 16,
                        grid: Grid | None = None, split_tol: float = SPLIT_TOL) -> FringeScan:
    """Populations while one pulse phase is scanned.

    The state just before the scanned pulse is computed once and reused.
    The reported laser phase is the weighted total over all four pulses.
    """
    if len(seq.pulses) != 4:
        raise ValueError("fringe scans need the four-pulse sequence")
    if scan_phases is None:
        scan_phases = np.linspace(0, 2 * math.pi, n_points, endpoint=False)
    scan_phases = np.asarray(scan_phases, dtype=float)
    prob = _natural_problem(seq, packet or GaussianPacket(), grid, split_tol)
    prefix, _ = _run(prob, stop_before=pulse_index, with_branches=False)
    dz = prob.grid.dz
    base = list(prob.phases)
    totals, p1, p2 = [], [], []
    for ph in scan_phases:
        phases = base.copy()
        phases[pulse_index] = float(ph)
        rows, _ = _run(prob, rows=prefix, start=pulse_index, phases=phases, with_branches=False)
        totals.append(sum(w * p for w, p in zip(LASER_PHASE_WEIGHTS, phases)))
        p1.append(float(np.sum(np.abs(rows[0]) ** 2) * dz))
        p2.append(float(np.sum(np.abs(rows[1]) ** 2) * dz))
    return FringeScan(np.array(totals), np.array(p1), np.array(p2))


@dataclass(frozen=True)
class FringeFit:
    phase: float
    visibility: float
    offset: float
    amplitude: float
    rms_residual: float
    degenerate: bool


def extract_phase_from_fringe(laser_phase, p_g2) -> FringeFit:
    """Least-squares fit of ``A + B cos(phi_L + phi)``; phase wrapped to (-pi, pi].

    A fringe with ``B/A < 1e-6`` is flagged degenerate and its phase is NaN.
    """
    x = np.asarray(laser_phase, dtype=float)
    y = np.asarray(p_g2, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("phase and population arrays must be 1-D and equal length")
    if x.size < 8:
        raise ValueError("need at least 8 scan points")
    if x.max() - x.min() < 2 * math.pi * (1 - 1 / x.size) - 1e-12:
        raise ValueError("scan must span a full period")
    design = np.column_stack([np.ones_like(x), np.cos(x), np.sin(x)])
    (A, c, s), *_ = np.linalg.lstsq(design, y, rcond=None)
    B = math.hypot(c, s)
    rms = float(np.sqrt(np.mean((design @ np.array([A, c, s]) - y) ** 2)))
    vis = float(B / A) if A != 0 else math.inf
    if abs(vis) < 1e-6:
        return FringeFit(math.nan, vis, float(A), B, rms, True)
    phi = math.atan2(-s, c)
    if phi <= -math.pi:
        phi += 2 * math.pi
    return FringeFit(phi, vis, float(A), B, rms, False)


# -- propagator quadrature --------------------------------------------------------

def huygens_integral(initial, spec: LinearPotentialSpec, t: float, z_f, hbar: float = 1.0,
                     z_range: tuple[float, float] | None = None, n_samples: int = 20001):
    """``int G(z_f, t | z_i, 0) psi(z_i) dz_i`` by composite Simpson quadrature.

    ``initial`` is either a ``(z, psi)`` pair of samples or a callable
    evaluated on ``n_samples`` points over ``z_range``. The kernel prefactor
    is ``sqrt(m / (2 pi hbar t)) exp(-i pi/4)``, the principal branch of
    ``sqrt(m / (2 i pi hbar t))``, which tends to a delta function as t -> 0+.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if callable(initial):
        if z_range is None:
            raise ValueError("z_range is required for a callable initial state")
        z = np.linspace(z_range[0], z_range[1], n_samples)
        psi = np.asarray(initial(z), dtype=complex)
    else:
        z, psi = (np.asarray(a) for a in initial)
    _check_tails(psi, "initial wavefunction")
    m, F = spec.mass, spec.force
    zf = np.atleast_1d(np.asarray(z_f, dtype=float))
    norm = math.sqrt(m / (2 * math.pi * hbar * t)) * complex(math.cos(math.pi / 4), -math.sin(math.pi / 4))
    dz = zf[:, None] - z[None, :]
    action = m * dz**2 / (2 * t) + 0.5 * F * (zf[:, None] + z[None, :]) * t - F**2 * t**3 / (24 * m)
    out = norm * simpson(np.exp(1j * action / hbar) * psi[None, :], x=z, axis=-1)
    return out[0] if np.ndim(z_f) == 0 else out


def huygens_samples_for(width: float, spec: LinearPotentialSpec, t: float, z_f_max: float,
                        hbar: float = 1.0, points_per_wave: int = 16) -> tuple[np.ndarray, float]:
    """Sample points for :func:`huygens_integral` on a Gaussian of the given width.

    Covers +- 9 widths and resolves the kernel's fastest oscillation.
    """
    half = 9.0 * width
    kmax = spec.mass * (z_f_max + half) / (hbar * t) + 10.0 / width
    n = int(math.ceil(2 * half * kmax * points_per_wave / (2 * math.pi))) | 1
    return np.linspace(-half, half, max(n, 2001)), half


def tracked_center_phase(spec: LinearPotentialSpec, width: float, t: float, hbar: float = 1.0,
                         points_per_wave: int = 16) -> float:
    """Phase of the evolved packet at z = 0 plus the Gouy term ``atan(t/t_s)/2``.

    For a packet starting at rest at the origin this isolates the cubic
    global phase of the propagator.
    """
    z, _ = huygens_samples_for(width, spec, t, 0.0, hbar, points_per_wave)
    psi0 = (math.sqrt(math.pi) * width) ** -0.5 * np.exp(-z**2 / (2 * width**2))
    amp = huygens_integral((z, psi0.astype(complex)), spec, t, 0.0, hbar)
    t_s = spec.mass * width**2 / hbar
    return float(np.angle(amp) + 0.5 * math.atan(t / t_s))

