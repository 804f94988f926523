"""Phase-space route to the interferometer phase.

Branch trajectories are written as ``chi(t) = T(t, t0) chi0 + (T_ret . G)(t)``
with the free-particle transition matrix ``T``, and the phase difference
between branches is a double time integral of the force difference against
the mean force. With piecewise-constant forces every integral is a
polynomial in segment durations, evaluated here in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sequence import InterferometerSequence, Segment, branch_schedule

#: Symplectic form on (R, P).
J = np.array([[0.0, 1.0], [-1.0, 0.0]])
#: Nilpotent generator of free drift: T(t, t') = 1 + (t - t') N / m.
N = np.array([[0.0, 1.0], [0.0, 0.0]])


@dataclass(frozen=True)
class PhaseSpaceVector:
    R: float
    P: float

    def __post_init__(self):
        if not (math.isfinite(self.R) and math.isfinite(self.P)):
            raise ValueError("phase-space components must be finite")

    def as_array(self) -> np.ndarray:
        return np.array([self.R, self.P])

    @classmethod
    def from_array(cls, v) -> "PhaseSpaceVector":
        return cls(float(v[0]), float(v[1]))


@dataclass(frozen=True)
class BranchForceProfile:
    """Piecewise-constant acceleration schedule of one branch."""

    segments: tuple[Segment, ...]

    @classmethod
    def from_sequence(cls, seq: InterferometerSequence, branch: str) -> "BranchForceProfile":
        return cls(branch_schedule(seq, branch))

    @property
    def t_start(self) -> float:
        return self.segments[0].start

    @property
    def t_end(self) -> float:
        last = self.segments[-1]
        return last.start + last.duration

    def breakpoints(self) -> list[float]:
        return [s.start for s in self.segments] + [self.t_end]

    def acceleration_at(self, t: float) -> float:
        """Right-continuous value of the schedule at ``t``."""
        for seg in self.segments:
            if seg.start <= t < seg.start + seg.duration:
                return seg.acceleration
        if t == self.t_end:
            return self.segments[-1].acceleration
        raise ValueError(f"t = {t} outside [{self.t_start}, {self.t_end}]")

    def dwell_times(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for seg in self.segments:
            out[seg.state] = out.get(seg.state, 0.0) + seg.duration
        return out


def free_transition(t: float, t_prime: float, mass: float) -> np.ndarray:
    if t < t_prime:
        raise ValueError("transition matrix is only defined forward in time (t >= t')")
    return np.array([[1.0, (t - t_prime) / mass], [0.0, 1.0]])


def is_symplectic(M: np.ndarray, tol: float = 1e-12) -> bool:
    return bool(np.allclose(M.T @ J @ M, J, atol=tol, rtol=0))


def classical_solution(chi0: PhaseSpaceVector, profile: BranchForceProfile, t: float,
                       mass: float) -> PhaseSpaceVector:
    """Homogeneous part plus the retarded convolution of the force term.

    For a constant force ``G = (0, m a)`` over ``[s, s + d]`` the convolution
    contributes ``(a d (t - s) - a d^2 / 2, m a d)``.
    """
    t0 = profile.t_start
    if not (t0 <= t <= profile.t_end):
        raise ValueError(f"t = {t} outside [{t0}, {profile.t_end}]")
    chi = free_transition(t, t0, mass) @ chi0.as_array()
    for seg in profile.segments:
        if seg.start >= t:
            break
        d = min(seg.duration, t - seg.start)
        a = seg.acceleration
        # integral over t' in [s, s+d] of T(t, t') (0, m a)
        chi = chi + np.array([a * d * (t - seg.start) - 0.5 * a * d * d, mass * a * d])
    return PhaseSpaceVector.from_array(chi)


def _common_grid(upper: BranchForceProfile, lower: BranchForceProfile) -> list[float]:
    return sorted(set(upper.breakpoints()) | set(lower.breakpoints()))


def _double_integral(upper: BranchForceProfile, lower: BranchForceProfile, mass: float) -> float:
    """``-int dt' int_{t0}^{t'} dt'' dG(t')^T J T(t', t'') Gbar(t'')`` in closed form.

    Returns an action; divide by hbar for a phase.
    """
    grid = _common_grid(upper, lower)
    pieces = []
    for s, e in zip(grid, grid[1:]):
        mid = 0.5 * (s + e)
        al, au = lower.acceleration_at(mid), upper.acceleration_at(mid)
        G_diff = np.array([0.0, mass * (al - au)])
        G_mean = np.array([0.0, mass * 0.5 * (al + au)])
        pieces.append((s, e, G_diff, G_mean))
    total = 0.0
    for i, (s1, e1, dG, _) in enumerate(pieces):
        d1 = e1 - s1
        for j, (s2, e2, _, Gm) in enumerate(pieces[: i + 1]):
            d2 = e2 - s2
            if j < i:
                # t' over [s1, e1], t'' over [s2, e2], fully ordered
                i0 = d1 * d2
                i1 = d1 * d2 * (0.5 * (s1 + e1) - 0.5 * (s2 + e2))
            else:
                # same segment, t'' < t'
                i0 = 0.5 * d1 * d1
                i1 = d1**3 / 6.0
            # T(t', t'') = 1 + (t' - t'') N / m
            total -= dG @ J @ Gm * i0 + dG @ J @ N @ Gm * i1 / mass
    return float(total)


@dataclass(frozen=True)
class PhaseShiftResult:
    phase: float
    closed: bool
    delta_chi: PhaseSpaceVector


def phase_shift_general(upper: BranchForceProfile, lower: BranchForceProfile, laser_total: float,
                        mass: float, hbar: float = 1.0,
                        chi0: PhaseSpaceVector = PhaseSpaceVector(0.0, 0.0),
                        rtol: float = 1e-12) -> PhaseShiftResult:
    """Branch phase difference including the open-interferometer term.

    Internal rest energies are not modelled here (only the linear force
    term), so no dwell-time term appears.
    """
    t0, t = lower.t_start, lower.t_end
    if upper.t_start != t0 or upper.t_end != t:
        raise ValueError("branches must span the same time interval")
    chi_l = classical_solution(chi0, lower, t, mass).as_array()
    chi_u = classical_solution(chi0, upper, t, mass).as_array()
    d_chi = chi_l - chi_u
    amax = max(abs(s.acceleration) for s in upper.segments + lower.segments)
    span = t - t0
    closed = (abs(d_chi[0]) <= rtol * amax * span**2 and abs(d_chi[1]) <= rtol * mass * amax * span)
    phase = laser_total + _double_integral(upper, lower, mass) / hbar
    if not closed:
        phase -= d_chi @ J @ free_transition(t, t0, mass) @ chi0.as_array() / hbar
    return PhaseShiftResult(float(phase), bool(closed), PhaseSpaceVector.from_array(d_chi))


def phase_shift(upper: BranchForceProfile, lower: BranchForceProfile, laser_total: float,
                mass: float, hbar: float = 1.0) -> float:
    """Phase shift of a closed interferometer: laser phase plus the
    force-difference double integral.

    Requires equal dwell times in each internal state, so that any internal
    energy offset cancels between branches.
    """
    _check_dwell(upper, lower)
    result = phase_shift_general(upper, lower, laser_total, mass, hbar)
    if not result.closed:
        raise ValueError(f"branches do not close (delta chi = {result.delta_chi})")
    return result.phase


def _check_dwell(upper: BranchForceProfile, lower: BranchForceProfile) -> None:
    du, dl = upper.dwell_times(), lower.dwell_times()
    for state in set(du) | set(dl):
        a, b = du.get(state, 0.0), dl.get(state, 0.0)
        if not math.isclose(a, b, rel_tol=1e-12, abs_tol=1e-300):
            raise ValueError(f"unequal dwell times in {state}: upper {a}, lower {b}")


def switching_sign(lower: BranchForceProfile, t: float) -> int:
    """+1 while the lower branch is in g1, -1 while it is in g2.

    The difference profile is ``a_lower - a_upper = sign * (a1 - a2)``.
    """
    for seg in lower.segments:
        if seg.start <= t < seg.start + seg.duration:
            return 1 if seg.state == "g1" else -1
    if t == lower.t_end:
        return 1 if lower.segments[-1].state == "g1" else -1
    raise ValueError(f"t = {t} outside [{lower.t_start}, {lower.t_end}]")


def mean_acceleration(upper: BranchForceProfile, lower: BranchForceProfile, t: float) -> float:
    return 0.5 * (upper.acceleration_at(t) + lower.acceleration_at(t))


def difference_acceleration(upper: BranchForceProfile, lower: BranchForceProfile, t: float) -> float:
    return lower.acceleration_at(t) - upper.acceleration_at(t)


def weighted_square_integral(lower: BranchForceProfile) -> float:
    """``int sign(t') (t' - t0)^2 dt'`` over the profile, exactly."""
    t0 = lower.t_start
    total = 0.0
    for seg in lower.segments:
        f = 1 if seg.state == "g1" else -1
        a, b = seg.start - t0, seg.start + seg.duration - t0
        total += f * (b**3 - a**3) / 3.0
    return total


def sequence_profiles(seq: InterferometerSequence) -> tuple[BranchForceProfile, BranchForceProfile]:
    """(upper, lower) force profiles of a sequence."""
    return (BranchForceProfile.from_sequence(seq, "upper"),
            BranchForceProfile.from_sequence(seq, "lower"))


def sequence_phase_shift(seq: InterferometerSequence, laser_total: float | None = None) -> float:
    from .sequence import sequence_laser_phase
    upper, lower = sequence_profiles(seq)
    if laser_total is None:
        laser_total = sequence_laser_phase(seq)
    return phase_shift(upper, lower, laser_total, seq.mass, seq.hbar)
