"""Operator-algebra evaluation of Raman pulse sequences.

Free evolution in a uniform acceleration ``a`` over a time ``T`` factorizes as

    U_a(T) = exp(i m a^2 T^3 / 12 hbar) D(a T^2 / 2, m a T) U_0(T)

with ``D(Z, P) = exp[-i (Z p - P z) / hbar]`` and ``U_0`` the free-particle
propagator. Every branch operator is kept in this ``phase * D * U_0`` normal
form; composition only needs three rewrite rules (push ``U_0`` right,
add free times, fuse displacements with a symplectic phase), so the whole
calculation is exact algebra on four numbers.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np
from scipy.integrate import trapezoid

from .physics import CODATA, AtomConfig, FieldConfig, PhysicalConstants
from .propagator import (
    GaussianPacket,
    LinearPotentialSpec,
    displace_packet,
    gaussian_overlap,
    propagate_gaussian,
    with_phase,
)

Branch = Literal["upper", "lower"]

HALF_PI = 0.5 * math.pi
CLOSURE_RTOL = 1e-12


@dataclass(frozen=True)
class PulseEvent:
    time: float
    area: float
    laser_phase: float = 0.0

    def __post_init__(self):
        if not (0 < self.area <= 2 * math.pi + 1e-12):
            raise ValueError(f"pulse area must lie in (0, 2pi], got {self.area!r}")


@dataclass(frozen=True)
class InterferometerSequence:
    """Time-ordered pulses plus the accelerations of g1 and g2.

    ``mass`` and ``hbar`` fix the unit system; both default to natural units.
    """

    pulses: tuple[PulseEvent, ...]
    a1: float
    a2: float
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))
        times = [p.time for p in self.pulses]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise ValueError(f"pulse times must be strictly increasing: {times}")
        if self.mass <= 0 or self.hbar <= 0:
            raise ValueError("mass and hbar must be positive")

    @classmethod
    def canonical(cls, T: float, a1: float, a2: float, *, t0: float = 0.0,
                  phases: Sequence[float] = (0.0, 0.0, 0.0, 0.0),
                  mass: float = 1.0, hbar: float = 1.0) -> "InterferometerSequence":
        """pi/2 - pi - pi - pi/2 at t0, t0 + T, t0 + 3T, t0 + 4T."""
        times = (t0, t0 + T, t0 + 3 * T, t0 + 4 * T)
        areas = (HALF_PI, math.pi, math.pi, HALF_PI)
        pulses = tuple(PulseEvent(t, a, p) for t, a, p in zip(times, areas, phases))
        return cls(pulses, a1, a2, mass=mass, hbar=hbar)

    @property
    def t0(self) -> float:
        return self.pulses[0].time

    @property
    def intervals(self) -> tuple[float, ...]:
        return tuple(b.time - a.time for a, b in zip(self.pulses, self.pulses[1:]))

    @property
    def duration(self) -> float:
        return self.pulses[-1].time - self.pulses[0].time

    @property
    def laser_phases(self) -> tuple[float, ...]:
        return tuple(p.laser_phase for p in self.pulses)

    def has_canonical_areas(self) -> bool:
        expected = (HALF_PI, math.pi, math.pi, HALF_PI)
        return len(self.pulses) == 4 and all(
            math.isclose(p.area, a, rel_tol=1e-12) for p, a in zip(self.pulses, expected))

    def is_canonical(self) -> bool:
        if not self.has_canonical_areas():
            return False
        t10, t21, t32 = self.intervals
        return math.isclose(t21, 2 * t10, rel_tol=1e-12) and math.isclose(t32, t10, rel_tol=1e-12)

    def with_laser_phase(self, index: int, phase: float) -> "InterferometerSequence":
        pulses = list(self.pulses)
        pulses[index] = replace(pulses[index], laser_phase=phase)
        return replace(self, pulses=tuple(pulses))

    def with_accelerations(self, a1: float, a2: float) -> "InterferometerSequence":
        return replace(self, a1=a1, a2=a2)


@dataclass(frozen=True)
class OperatorNormalForm:
    """``exp(i phase) D(disp_Z, disp_P) U_0(free_time)``.

    Branch operators always have ``free_time >= 0``; adjoints carry a
    negative free time.
    """

    phase: float = 0.0
    disp_Z: float = 0.0
    disp_P: float = 0.0
    free_time: float = 0.0


IDENTITY = OperatorNormalForm()


@dataclass(frozen=True)
class BranchResult:
    contrast: float
    interferometer_phase: float
    laser_phase_total: float
    closed: bool
    residual_Z: float = 0.0
    residual_P: float = 0.0


# -- pulses -----------------------------------------------------------------

def _cos_sin_half(area: float) -> tuple[float, float]:
    c, s = math.cos(0.5 * area), math.sin(0.5 * area)
    # exact zeros for pi and 2pi pulses keep branch bookkeeping clean
    if abs(c) < 1e-15:
        c = 0.0
    if abs(s) < 1e-15:
        s = 0.0
    return c, s


def pulse_matrix(area: float, laser_phase: float) -> np.ndarray:
    """2x2 Raman pulse unitary in the (g1, g2) basis."""
    c, s = _cos_sin_half(area)
    return np.array([
        [c, -1j * cmath.exp(1j * laser_phase) * s],
        [-1j * cmath.exp(-1j * laser_phase) * s, c],
    ])


def pulse_unitary_action(area: float, laser_phase: float,
                         amplitudes: tuple[complex, complex]) -> tuple[complex, complex]:
    c1, c2 = amplitudes
    norm = abs(c1) ** 2 + abs(c2) ** 2
    if abs(norm - 1.0) > 1e-9:
        warnings.warn(f"input amplitudes are not normalized (norm {norm:.6g})", stacklevel=2)
    m = pulse_matrix(area, laser_phase)
    return (complex(m[0, 0] * c1 + m[0, 1] * c2), complex(m[1, 0] * c1 + m[1, 1] * c2))


def pulse_area_from_envelopes(t, rabi1, rabi2, detuning: float, *, edge_tol: float = 1e-6) -> float:
    """Pulse area ``(1 / 2 Delta) * integral(Omega1 Omega2 dt)`` from sampled envelopes.

    Both envelopes must vanish at the first and last sample (to ``edge_tol``
    relative to their peak). Trapezoidal quadrature on the given samples.
    """
    if detuning == 0:
        raise ValueError("single-photon detuning must be nonzero")
    t = np.asarray(t, dtype=float)
    r1 = np.asarray(rabi1, dtype=float)
    r2 = np.asarray(rabi2, dtype=float)
    if not (t.shape == r1.shape == r2.shape) or t.ndim != 1 or t.size < 2:
        raise ValueError("t, rabi1, rabi2 must be 1-d arrays of equal length >= 2")
    for name, r in (("rabi1", r1), ("rabi2", r2)):
        peak = np.max(np.abs(r))
        if peak > 0 and max(abs(r[0]), abs(r[-1])) > edge_tol * peak:
            raise ValueError(f"{name} does not vanish at the pulse edges")
    return float(trapezoid(r1 * r2, t) / (2.0 * detuning))


# -- normal forms -------------------------------------------------------------

def linear_evolution_normal_form(a: float, T: float, mass: float, hbar: float = 1.0) -> OperatorNormalForm:
    if T < 0:
        raise ValueError("evolution time must be non-negative")
    return OperatorNormalForm(
        phase=mass * a * a * T**3 / (12.0 * hbar),
        disp_Z=0.5 * a * T * T,
        disp_P=mass * a * T,
        free_time=T,
    )


def compose_normal_forms(left: OperatorNormalForm, right: OperatorNormalForm,
                         mass: float, hbar: float = 1.0) -> OperatorNormalForm:
    """Normal form of the operator product ``left @ right``."""
    # U0(tL) D(Zr, Pr) = D(Zr + Pr tL / m, Pr) U0(tL)
    z2 = right.disp_Z + right.disp_P * left.free_time / mass
    p2 = right.disp_P
    # D(Z1, P1) D(Z2, P2) = exp(i (P1 Z2 - P2 Z1) / 2hbar) D(Z1 + Z2, P1 + P2)
    fusion = (left.disp_P * z2 - p2 * left.disp_Z) / (2.0 * hbar)
    return OperatorNormalForm(
        phase=left.phase + right.phase + fusion,
        disp_Z=left.disp_Z + z2,
        disp_P=left.disp_P + p2,
        free_time=left.free_time + right.free_time,
    )


def adjoint_normal_form(nf: OperatorNormalForm, mass: float) -> OperatorNormalForm:
    """``(e^{i phi} D(Z, P) U0(t))^dagger = e^{-i phi} D(-Z + P t / m, -P) U0(-t)``."""
    return OperatorNormalForm(
        phase=-nf.phase,
        disp_Z=-nf.disp_Z + nf.disp_P * nf.free_time / mass,
        disp_P=-nf.disp_P,
        free_time=-nf.free_time,
    )


def apply_normal_form(nf: OperatorNormalForm, packet: GaussianPacket, mass: float,
                      hbar: float = 1.0) -> GaussianPacket:
    """Act with a normal form on a Gaussian packet (``free_time >= 0``)."""
    if nf.free_time < 0:
        raise ValueError("cannot apply a normal form with negative free time to a packet")
    free = LinearPotentialSpec(force=0.0, mass=mass)
    moved = propagate_gaussian(packet, free, packet.time + nf.free_time, hbar=hbar)
    return with_phase(displace_packet(moved, nf.disp_Z, nf.disp_P, mass, hbar), nf.phase)


# -- branches ---------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    start: float
    duration: float
    acceleration: float
    state: str


def branch_schedule(seq: InterferometerSequence, branch: Branch) -> tuple[Segment, ...]:
    """Segments of one branch: the lower branch leaves the first pulse in g1,
    the upper in g2, and every intermediate pulse swaps the internal state."""
    if len(seq.pulses) < 2:
        raise ValueError("a branch needs at least two pulses")
    if branch not in ("upper", "lower"):
        raise ValueError(f"unknown branch {branch!r}")
    state = "g1" if branch == "lower" else "g2"
    segments = []
    for p, q in zip(seq.pulses, seq.pulses[1:]):
        a = seq.a1 if state == "g1" else seq.a2
        segments.append(Segment(p.time, q.time - p.time, a, state))
        state = "g2" if state == "g1" else "g1"
    return tuple(segments)


def branch_operator(seq: InterferometerSequence, branch: Branch) -> OperatorNormalForm:
    nf = IDENTITY
    for seg in branch_schedule(seq, branch):
        step = linear_evolution_normal_form(seg.acceleration, seg.duration, seq.mass, seq.hbar)
        nf = compose_normal_forms(step, nf, seq.mass, seq.hbar)
    return nf


def branch_difference(seq: InterferometerSequence) -> OperatorNormalForm:
    """Normal form of ``U_upper^dagger U_lower``."""
    upper = branch_operator(seq, "upper")
    lower = branch_operator(seq, "lower")
    out = compose_normal_forms(adjoint_normal_form(upper, seq.mass), lower, seq.mass, seq.hbar)
    if abs(out.free_time) <= 1e-12 * max(seq.duration, 1e-300):
        out = replace(out, free_time=0.0)
    return out


def _residual_scales(seq: InterferometerSequence) -> tuple[float, float]:
    amax = max(abs(seq.a1), abs(seq.a2))
    return amax * seq.duration**2, seq.mass * amax * seq.duration


def is_closed(nf: OperatorNormalForm, seq: InterferometerSequence, rtol: float = CLOSURE_RTOL) -> bool:
    z_scale, p_scale = _residual_scales(seq)
    return (abs(nf.disp_Z) <= rtol * z_scale and abs(nf.disp_P) <= rtol * p_scale
            and nf.free_time == 0.0)


def _port_coefficients(seq: InterferometerSequence) -> tuple[complex, complex]:
    """Internal-state amplitudes with which the upper and lower branches reach
    the g2 exit port (starting from g1)."""
    pulses = seq.pulses
    coeffs = []
    for start in (1, 0):  # upper leaves the first pulse in g2, lower in g1
        m = pulse_matrix(pulses[0].area, pulses[0].laser_phase)
        amp, state = m[start, 0], start
        for p in pulses[1:-1]:
            m = pulse_matrix(p.area, p.laser_phase)
            amp, state = amp * m[1 - state, state], 1 - state
        m = pulse_matrix(pulses[-1].area, pulses[-1].laser_phase)
        coeffs.append(complex(amp * m[1, state]))
    return coeffs[0], coeffs[1]


def sequence_laser_phase(seq: InterferometerSequence) -> float:
    """Laser phase entering ``P_g2 = 1/2 [1 + C cos(phi_i + phi_L)]``.

    Exact four-pulse combination for the pi/2-pi-pi-pi/2 family; otherwise
    read off the branch amplitudes (wrapped to (-pi, pi]).
    """
    if seq.has_canonical_areas():
        return total_laser_phase(seq.laser_phases)
    c_upper, c_lower = _port_coefficients(seq)
    if c_upper == 0 or c_lower == 0:
        raise ValueError("sequence does not interfere both branches in the g2 port")
    return cmath.phase(c_lower / c_upper)


def interferometer_phase(seq: InterferometerSequence,
                         packet: GaussianPacket | None = None) -> BranchResult:
    """Phase and contrast of ``<psi0| U_u^dagger U_l |psi0>``.

    For a closed geometry the product is a pure phase, so contrast is 1 and
    no packet is needed. For an open one the contrast and the (now
    state-dependent) phase come from the exact Gaussian overlap when a packet
    is given; without one, contrast is NaN and the phase is the operator
    phase alone.
    """
    diff = branch_difference(seq)
    laser = sequence_laser_phase(seq)
    if is_closed(diff, seq):
        return BranchResult(1.0, diff.phase, laser, True, diff.disp_Z, diff.disp_P)
    if packet is None:
        return BranchResult(math.nan, diff.phase, laser, False, diff.disp_Z, diff.disp_P)
    overlap = _difference_overlap(diff, seq, packet)
    return BranchResult(abs(overlap), cmath.phase(overlap), laser, False, diff.disp_Z, diff.disp_P)


def _difference_overlap(diff: OperatorNormalForm, seq: InterferometerSequence,
                        packet: GaussianPacket) -> complex:
    psi0 = replace(packet, time=seq.t0)
    ket = apply_normal_form(diff, psi0, seq.mass, seq.hbar)
    return gaussian_overlap(psi0, ket, seq.mass, seq.hbar)


def gaussian_contrast(seq: InterferometerSequence, packet: GaussianPacket) -> float:
    diff = branch_difference(seq)
    if is_closed(diff, seq):
        return 1.0
    return abs(_difference_overlap(diff, seq, packet))


def interferometer_phase_from_fields(atom: AtomConfig, field: FieldConfig,
                                     consts: PhysicalConstants = CODATA, T: float = 0.0) -> float:
    """Cubic phase written directly in terms of g and the field gradient."""
    g2 = atom.state("g2")
    k = g2.lande_g * g2.m_quantum * field.grad_Bz
    return -(consts.mu_B / consts.hbar) * k * (2 * field.g + consts.mu_B / atom.mass * k) * T**3


def total_laser_phase(pulse_phases: Sequence[float]) -> float:
    """Discrete third difference ``phi0 - 2 phi1 + 2 phi2 - phi3``."""
    if len(pulse_phases) != 4:
        raise ValueError("need exactly four pulse phases")
    p0, p1, p2, p3 = pulse_phases
    return p0 - 2 * p1 + 2 * p2 - p3


def kasevich_chu_laser_phase(pulse_phases: Sequence[float]) -> float:
    """Three-pulse second difference ``phi0 - 2 phi1 + phi2``."""
    if len(pulse_phases) != 3:
        raise ValueError("need exactly three pulse phases")
    p0, p1, p2 = pulse_phases
    return p0 - 2 * p1 + p2


def kasevich_chu_phase(k1: float, k2: float, g: float, T: float) -> tuple[float, int]:
    """``(k1 + k2) g T^2`` and the sign with which its cosine enters P_g2.

    The three-pulse geometry gives ``1/2 [1 - cos(...)]``, hence -1, against
    ``+1`` for the four-pulse interferometer.
    """
    return (k1 + k2) * g * T * T, -1


def solve_closure(a1: float, a2: float, t10: float) -> tuple[float, float]:
    """Intervals ``(t21, t32)`` closing both branches in position and velocity.

    Velocity closure gives ``t21 = t10 + t32``; substituting into the
    position condition leaves ``(t32 - t10)(t32 + t10) ... = 0`` with the
    single positive root ``t32 = t10``.
    """
    if a1 == a2:
        raise ValueError("closure is degenerate for equal accelerations: any timing closes")
    if not t10 > 0:
        raise ValueError("t10 must be positive")
    return 2.0 * t10, t10


def closure_residuals(t10: float, t21: float, t32: float) -> tuple[float, float]:
    """Velocity and position closure conditions (both zero when closed)."""
    velocity = t10 - t21 + t32
    position = t10**2 - t21**2 + t32**2 + 2 * t10 * (t21 + t32) - 2 * t21 * t32
    return velocity, position


# -- explicit state bookkeeping -----------------------------------------------------

@dataclass(frozen=True)
class PortTerm:
    amplitude: complex
    packet: GaussianPacket
    operator: OperatorNormalForm


@dataclass(frozen=True)
class StateSequenceResult:
    p_g1: float
    p_g2: float
    ports: dict = field(default_factory=dict)


def run_state_sequence(seq: InterferometerSequence, initial_internal: str = "g1",
                       packet: GaussianPacket | None = None) -> StateSequenceResult:
    """Thread ``|internal>|packet>`` through the four pulses and three free
    evolutions, keeping every branch as (amplitude, normal form), then
    evaluate exit-port populations with exact Gaussian overlaps."""
    if not seq.has_canonical_areas():
        raise ValueError("state bookkeeping needs the pi/2 - pi - pi - pi/2 sequence")
    if initial_internal not in ("g1", "g2"):
        raise ValueError(f"unknown internal state {initial_internal!r}")
    packet = replace(packet or GaussianPacket(), time=seq.t0)
    accel = (seq.a1, seq.a2)
    terms = [(0 if initial_internal == "g1" else 1, 1.0 + 0j, IDENTITY)]
    for i, pulse in enumerate(seq.pulses):
        m = pulse_matrix(pulse.area, pulse.laser_phase)
        terms = [(j, amp * m[j, s], nf) for s, amp, nf in terms for j in (0, 1) if m[j, s] != 0]
        if i + 1 < len(seq.pulses):
            dt = seq.pulses[i + 1].time - pulse.time
            terms = [
                (s, amp, compose_normal_forms(
                    linear_evolution_normal_form(accel[s], dt, seq.mass, seq.hbar), nf,
                    seq.mass, seq.hbar))
                for s, amp, nf in terms
            ]
    ports: dict[str, list[PortTerm]] = {"g1": [], "g2": []}
    for s, amp, nf in terms:
        ports["g1" if s == 0 else "g2"].append(
            PortTerm(complex(amp), apply_normal_form(nf, packet, seq.mass, seq.hbar), nf))

    def population(port: list[PortTerm]) -> float:
        total = 0j
        for u in port:
            for v in port:
                total += np.conj(u.amplitude) * v.amplitude * gaussian_overlap(
                    u.packet, v.packet, seq.mass, seq.hbar)
        return float(total.real)

    return StateSequenceResult(population(ports["g1"]), population(ports["g2"]), ports)
