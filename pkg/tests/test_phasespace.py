import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from t3interferometer.phasespace import (
    J,
    BranchForceProfile,
    PhaseSpaceVector,
    classical_solution,
    difference_acceleration,
    free_transition,
    is_symplectic,
    mean_acceleration,
    phase_shift,
    phase_shift_general,
    sequence_phase_shift,
    sequence_profiles,
    switching_sign,
    weighted_square_integral,
)
from t3interferometer.sequence import (
    InterferometerSequence,
    PulseEvent,
    branch_difference,
    interferometer_phase,
    sequence_laser_phase,
    total_laser_phase,
)

accel = st.floats(-2, 2)
times = st.floats(0.05, 2.0)


def general_sequence(intervals, a1, a2, t0=0.0):
    t = np.concatenate([[t0], t0 + np.cumsum(intervals)])
    areas = [math.pi / 2] + [math.pi] * (len(t) - 2) + [math.pi / 2]
    return InterferometerSequence(tuple(PulseEvent(float(x), a) for x, a in zip(t, areas)), a1, a2)


def nested_quadrature_action(upper, lower, mass):
    """Nested adaptive quadrature of -dG(t')^T J T(t', t'') Gbar(t'') over t0 < t'' < t'."""
    t0, t1 = lower.t_start, lower.t_end
    pts = lower.breakpoints()

    def inner(tp):
        dG = np.array([0.0, mass * difference_acceleration(upper, lower, tp)])

        def integrand(tpp):
            T = free_transition(tp, tpp, mass)
            Gm = np.array([0.0, mass * mean_acceleration(upper, lower, tpp)])
            return dG @ J @ T @ Gm
        inside = [p for p in pts if t0 < p < tp]
        return quad(integrand, t0, tp, points=inside or None, epsabs=1e-13, epsrel=1e-13,
                    limit=200)[0]
    return -quad(inner, t0, t1, points=pts[1:-1], epsabs=1e-12, epsrel=1e-12, limit=200)[0]


def test_free_transition_examples():
    assert np.array_equal(free_transition(1.3, 1.3, 2.0), np.eye(2))
    M = free_transition(3.0, 1.0, 2.0)
    assert np.array_equal(M, [[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        free_transition(0.0, 1.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5), st.floats(0, 5), st.floats(0, 5), st.floats(0.1, 10))
def test_free_transition_group_law_and_symplectic(t0, d1, d2, m):
    a = free_transition(t0 + d1 + d2, t0 + d1, m)
    b = free_transition(t0 + d1, t0, m)
    assert np.allclose(a @ b, free_transition(t0 + d1 + d2, t0, m), rtol=0, atol=1e-12)
    assert np.linalg.det(a @ b) == pytest.approx(1.0, abs=1e-14)
    assert is_symplectic(a) and is_symplectic(a @ b)


def test_non_symplectic_detected():
    assert not is_symplectic(np.array([[2.0, 0.0], [0.0, 1.0]]))


def test_classical_solution_ballistic_and_constant_force():
    seq = InterferometerSequence.canonical(1.0, 0.0, 0.0)
    upper, lower = sequence_profiles(seq)
    chi = classical_solution(PhaseSpaceVector(0.5, 2.0), lower, 3.0, mass=2.0)
    assert (chi.R, chi.P) == (0.5 + 3.0, 2.0)
    prof = BranchForceProfile.from_sequence(InterferometerSequence.canonical(1.0, 1.5, 1.5), "lower")
    chi = classical_solution(PhaseSpaceVector(0.0, 0.0), prof, 0.7, mass=3.0)
    assert chi.R == pytest.approx(1.5 * 0.49 / 2, rel=1e-15)
    assert chi.P == pytest.approx(3.0 * 1.5 * 0.7, rel=1e-15)
    with pytest.raises(ValueError):
        classical_solution(PhaseSpaceVector(0, 0), prof, 4.5, 1.0)


@settings(max_examples=200, deadline=None)
@given(accel, accel, times, st.floats(0.2, 3), st.floats(-1, 1), st.floats(-1, 1))
def test_classical_solution_matches_kinematics(a1, a2, T, m, z0, p0):
    # explicit upper and lower endpoint formulas for the T-2T-T timing
    seq = InterferometerSequence.canonical(T, a1, a2, mass=m)
    upper, lower = sequence_profiles(seq)
    chi0 = PhaseSpaceVector(z0, p0)
    z_l = z0 + p0 / m * 4 * T + 4 * (a1 + a2) * T**2
    v_l = p0 / m + 2 * (a1 + a2) * T
    for prof in (upper, lower):
        chi = classical_solution(chi0, prof, 4 * T, m)
        assert chi.R == pytest.approx(z_l, rel=1e-12, abs=1e-12)
        assert chi.P == pytest.approx(m * v_l, rel=1e-12, abs=1e-12)
    # midpoint of the lower branch after the first two segments
    chi = classical_solution(chi0, lower, 3 * T, m)
    assert chi.R == pytest.approx(z0 + 3 * T * p0 / m + a1 * T**2 / 2 + a1 * T * 2 * T + 2 * a2 * T**2,
                                  rel=1e-12, abs=1e-12)


def test_classical_solution_matches_ode():
    from scipy.integrate import solve_ivp
    seq = general_sequence([0.7, 1.1, 0.4, 0.9], 1.3, -0.6)
    upper, lower = sequence_profiles(seq)
    for prof in (upper, lower):
        sol = solve_ivp(lambda t, y: [y[1], prof.acceleration_at(min(t, prof.t_end))], (0, prof.t_end),
                        [0.2, -0.3], rtol=1e-12, atol=1e-12, max_step=0.01)
        chi = classical_solution(PhaseSpaceVector(0.2, -0.3), prof, prof.t_end, 1.0)
        assert chi.R == pytest.approx(sol.y[0, -1], abs=1e-8)
        assert chi.P == pytest.approx(sol.y[1, -1], abs=1e-8)


def test_switching_sign_and_difference_profile():
    seq = InterferometerSequence.canonical(1.0, 0.5, 2.0)
    upper, lower = sequence_profiles(seq)
    signs = [switching_sign(lower, t) for t in (0.5, 2.0, 3.5, 4.0)]
    assert signs == [1, -1, 1, 1]
    for t in (0.5, 2.0, 3.5):
        assert difference_acceleration(upper, lower, t) == switching_sign(lower, t) * (0.5 - 2.0)
        assert mean_acceleration(upper, lower, t) == 1.25
    with pytest.raises(ValueError):
        switching_sign(lower, 5.0)


@settings(max_examples=100, deadline=None)
@given(times)
def test_weighted_square_integral(T):
    lower = BranchForceProfile.from_sequence(InterferometerSequence.canonical(T, 1.0, 2.0, t0=0.3), "lower")
    assert weighted_square_integral(lower) == pytest.approx(4 * T**3, rel=1e-12)


def test_equal_accelerations_give_laser_phase_only():
    seq = InterferometerSequence.canonical(1.0, 0.8, 0.8, phases=(0.1, 0.2, 0.5, 0.0))
    upper, lower = sequence_profiles(seq)
    assert phase_shift(upper, lower, 0.7, 1.0) == 0.7


def test_reference_phase():
    seq = InterferometerSequence.canonical(1.0, 1.0, 2.0)
    upper, lower = sequence_profiles(seq)
    assert phase_shift(upper, lower, 0.0, 1.0) == pytest.approx(-3.0, abs=1e-14)


@settings(max_examples=300, deadline=None)
@given(accel, accel, times, st.floats(-3, 3), st.floats(0.2, 3),
       st.lists(st.floats(-math.pi, math.pi), min_size=4, max_size=4))
def test_matches_operator_engine(a1, a2, T, t0, m, phases):
    seq = InterferometerSequence.canonical(T, a1, a2, t0=t0, mass=m, phases=tuple(phases))
    op = interferometer_phase(seq)
    total = op.interferometer_phase + total_laser_phase(phases)
    ps = sequence_phase_shift(seq)
    scale = m * (a1 * a1 + a2 * a2) * T**3 + sum(abs(p) for p in phases) + 1e-300
    assert abs(ps - total) <= 1e-12 * scale
    expected = m * (a1 * a1 - a2 * a2) * T**3
    assert abs(ps - total_laser_phase(phases) - expected) <= 1e-12 * scale


@pytest.mark.parametrize("intervals,a1,a2", [([1.0, 2.0, 1.0], 1.0, 2.0),
                                             ([1.0, 2.1, 1.0], 0.7, -0.4),
                                             ([0.6, 1.3, 0.9, 0.5], 1.3, 0.2),
                                             ([0.5, 0.5], -1.0, 1.5)])
def test_double_integral_matches_quadrature(intervals, a1, a2):
    seq = general_sequence(intervals, a1, a2)
    upper, lower = sequence_profiles(seq)
    res = phase_shift_general(upper, lower, 0.0, 1.0)
    assert res.phase == pytest.approx(nested_quadrature_action(upper, lower, 1.0), abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(accel, accel, st.lists(st.floats(0.1, 2.0), min_size=2, max_size=5))
def test_open_phase_matches_operator_engine(a1, a2, intervals):
    # with chi0 = 0 the open term vanishes and both engines give the same phase
    seq = general_sequence(intervals, a1, a2)
    upper, lower = sequence_profiles(seq)
    res = phase_shift_general(upper, lower, 0.0, 1.0)
    op = branch_difference(seq)
    assert res.phase == pytest.approx(op.phase, abs=1e-11 * (1 + abs(op.phase)))
    # the operator displacement acts at t0; drift it to the exit time
    exit_Z = op.disp_Z + op.disp_P * seq.duration
    assert res.delta_chi.R == pytest.approx(exit_Z, abs=1e-11 * (1 + abs(exit_Z)))
    assert res.delta_chi.P == pytest.approx(op.disp_P, abs=1e-11 * (1 + abs(op.disp_P)))


def test_open_term_depends_on_initial_state():
    seq = general_sequence([1.0, 2.2, 1.0], 1.0, 2.0)
    upper, lower = sequence_profiles(seq)
    at_rest = phase_shift_general(upper, lower, 0.0, 1.0)
    moving = phase_shift_general(upper, lower, 0.0, 1.0, chi0=PhaseSpaceVector(0.3, 0.5))
    assert not at_rest.closed
    assert moving.phase != pytest.approx(at_rest.phase)
    d = at_rest.delta_chi.as_array()
    T = free_transition(seq.pulses[-1].time, 0.0, 1.0)
    assert moving.phase - at_rest.phase == pytest.approx(-(d @ J @ T @ np.array([0.3, 0.5])), rel=1e-12)


def test_closed_sequence_independent_of_initial_state():
    seq = InterferometerSequence.canonical(1.0, 1.0, 2.0)
    upper, lower = sequence_profiles(seq)
    ref = phase_shift_general(upper, lower, 0.0, 1.0)
    moved = phase_shift_general(upper, lower, 0.0, 1.0, chi0=PhaseSpaceVector(3.0, -2.0))
    assert ref.closed and moved.closed and ref.phase == moved.phase


def test_strict_path_rejects_open_and_unequal_dwell():
    upper, lower = sequence_profiles(general_sequence([1.0, 2.2, 1.0], 1.0, 2.0))
    with pytest.raises(ValueError, match="dwell"):
        phase_shift(upper, lower, 0.0, 1.0)
    # equal dwell but open in position
    upper, lower = sequence_profiles(general_sequence([1.0, 1.0], 1.0, 2.0))
    with pytest.raises(ValueError, match="close"):
        phase_shift(upper, lower, 0.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(accel, accel, times)
def test_endpoints_coincide_when_closed(a1, a2, T):
    seq = InterferometerSequence.canonical(T, a1, a2)
    upper, lower = sequence_profiles(seq)
    cu = classical_solution(PhaseSpaceVector(0.1, 0.2), upper, 4 * T, 1.0)
    cl = classical_solution(PhaseSpaceVector(0.1, 0.2), lower, 4 * T, 1.0)
    amax = max(abs(a1), abs(a2), 1e-300)
    assert abs(cu.R - cl.R) <= 1e-12 * (amax * 16 * T * T + 1)
    assert abs(cu.P - cl.P) <= 1e-12 * (amax * 4 * T + 1)


def test_laser_phase_passthrough():
    seq = InterferometerSequence.canonical(1.0, 1.0, 2.0, phases=(0.4, 0.1, -0.2, 0.3))
    assert sequence_phase_shift(seq) == pytest.approx(-3.0 + sequence_laser_phase(seq), abs=1e-14)


def test_phase_space_vector_must_be_finite():
    with pytest.raises(ValueError):
        PhaseSpaceVector(math.nan, 0.0)
    assert PhaseSpaceVector.from_array([1, 2]) == PhaseSpaceVector(1.0, 2.0)
