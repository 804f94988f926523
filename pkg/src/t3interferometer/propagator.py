"""Closed-form propagation in a linear potential ``V(z) = -F z``.

Width convention: a packet of width ``w`` has amplitude ``exp(-z**2 / (2 w**2))``,
i.e. ``w`` is the 1/sqrt(e) half-width of |psi| and the position variance of
|psi|**2 is ``w**2 / 2``. Gaussian-sigma conventions differ by sqrt(2).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import IO

import numpy as np

from .physics import HBAR


@dataclass(frozen=True)
class LinearPotentialSpec:
    force: float
    mass: float

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"mass must be positive, got {self.mass!r}")

    @property
    def acceleration(self) -> float:
        return self.force / self.mass


@dataclass(frozen=True)
class GaussianPacket:
    """Gaussian wave packet at a given time.

    ``global_phase`` is the phase of psi at z = 0; ``chirp`` is the
    dimensionless time since the packet's waist in units of its spreading
    time (0 for a freshly prepared, unchirped packet).
    """

    center: float = 0.0
    velocity: float = 0.0
    width: float = 1.0
    global_phase: float = 0.0
    time: float = 0.0
    chirp: float = 0.0

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"width must be positive, got {self.width!r}")

    @property
    def waist(self) -> float:
        return self.width / math.sqrt(1.0 + self.chirp**2)

    def spreading_time(self, mass: float, hbar: float = HBAR) -> float:
        return mass * self.waist**2 / hbar


def classical_action(z_i, t_i, z_f, t_f, spec: LinearPotentialSpec):
    if not t_f > t_i:
        raise ValueError("classical action needs t_f > t_i")
    dt = t_f - t_i
    m, F = spec.mass, spec.force
    return m * (z_f - z_i) ** 2 / (2 * dt) + 0.5 * F * (z_f + z_i) * dt - F**2 * dt**3 / (24 * m)


def classical_trajectory(z_i, t_i, z_f, t_f, spec: LinearPotentialSpec, t):
    """Position and velocity of the classical path joining (z_i, t_i) to (z_f, t_f)."""
    if not t_f > t_i:
        raise ValueError("classical trajectory needs t_f > t_i")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < t_i) or np.any(t_arr > t_f):
        raise ValueError(f"t must lie in [{t_i}, {t_f}]")
    dt = t_f - t_i
    a = spec.acceleration
    z = z_i + (z_f - z_i) / dt * (t - t_i) + 0.5 * a * (t - t_i) * (t - t_f)
    v = (z_f - z_i) / dt + a * (t - 0.5 * (t_i + t_f))
    return z, v


def cubic_phase(spec: LinearPotentialSpec, t, hbar: float = HBAR):
    """Position-independent propagator phase ``-F^2 t^3 / (24 hbar m)``."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("t must be non-negative")
    return -(spec.force**2) * t**3 / (24 * hbar * spec.mass)


def alpha_factor(tau):
    """``(tau^2 + 4) / (24 (tau^2 + 1))``: 1/6 for plane waves, 1/24 for point sources."""
    arr = np.asarray(tau, dtype=float)
    if np.any(arr < 0):
        raise ValueError("tau must be non-negative")
    # 1/24 + 1/(8 (tau^2 + 1)) is the same rational function, finite at tau = inf
    with np.errstate(over="ignore"):
        out = 1.0 / 24.0 + 1.0 / (8.0 * (arr * arr + 1.0))
    return float(out) if out.ndim == 0 else out


def total_global_phase(spec: LinearPotentialSpec, width0: float, t, hbar: float = HBAR):
    if not width0 > 0:
        raise ValueError("width0 must be positive")
    t_s = spec.mass * width0**2 / hbar
    return -alpha_factor(np.asarray(t) / t_s) * spec.force**2 * np.asarray(t) ** 3 / (hbar * spec.mass)


def alpha_curve(tau_min: float, tau_max: float, n_points: int) -> np.ndarray:
    """Rows of (tau, alpha) at log-spaced tau.

    A zero lower bound is kept as the first row; the remaining rows are
    log-spaced over six decades below ``tau_max``.
    """
    if not (0 <= tau_min < tau_max):
        raise ValueError("need 0 <= tau_min < tau_max")
    if n_points < 2:
        raise ValueError("need at least two points")
    if tau_min > 0:
        taus = np.geomspace(tau_min, tau_max, n_points)
    elif n_points == 2:
        taus = np.array([0.0, tau_max])
    else:
        taus = np.concatenate([[0.0], np.geomspace(tau_max * 1e-6, tau_max, n_points - 1)])
    return np.column_stack([taus, alpha_factor(taus)])


def write_alpha_csv(table: np.ndarray, stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["tau", "alpha"])
    for tau, alpha in table:
        writer.writerow([repr(float(tau)), repr(float(alpha))])


def _centroid_phase(packet: GaussianPacket, mass: float, hbar: float) -> float:
    """Phase at the packet center with the chirp-dependent Gouy term removed."""
    k = mass * packet.velocity / hbar
    zc, chi = packet.center, packet.chirp
    return (packet.global_phase + k * zc - chi * zc**2 / (2 * packet.width**2)
            + 0.5 * math.atan(chi))


def _from_centroid_phase(center, velocity, waist, chirp, gamma, time, mass, hbar) -> GaussianPacket:
    width = waist * math.sqrt(1.0 + chirp**2)
    k = mass * velocity / hbar
    phase0 = gamma - k * center + chirp * center**2 / (2 * width**2) - 0.5 * math.atan(chirp)
    return GaussianPacket(center=center, velocity=velocity, width=width,
                          global_phase=phase0, time=time, chirp=chirp)


def packet_phase(packet: GaussianPacket, z, mass: float, hbar: float = HBAR):
    """Unwrapped phase of psi(z)."""
    gamma = _centroid_phase(packet, mass, hbar)
    k = mass * packet.velocity / hbar
    dz = np.asarray(z, dtype=float) - packet.center
    return gamma + k * dz + packet.chirp * dz**2 / (2 * packet.width**2) - 0.5 * math.atan(packet.chirp)


def packet_wavefunction(packet: GaussianPacket, z, mass: float, hbar: float = HBAR):
    z = np.asarray(z, dtype=float)
    w0, chi = packet.waist, packet.chirp
    gamma = _centroid_phase(packet, mass, hbar)
    k = mass * packet.velocity / hbar
    dz = z - packet.center
    q = 1.0 + 1j * chi
    return ((math.sqrt(math.pi) * w0) ** -0.5 / np.sqrt(q)
            * np.exp(-dz**2 / (2 * w0**2 * q) + 1j * k * dz + 1j * gamma))


def propagate_gaussian(initial: GaussianPacket, spec: LinearPotentialSpec, t_f: float,
                       hbar: float = HBAR) -> GaussianPacket:
    """Exact evolution of a Gaussian packet under ``p^2/2m - F z`` up to ``t_f``.

    Starting from an unchirped packet at rest at the origin this is the
    textbook result: center ``F t^2 / 2m``, width ``w0 sqrt(1 + (t/t_s)^2)``
    with ``t_s = m w0^2 / hbar``, and ``global_phase`` equal to the
    z-independent part of the phase. Any other start (moving, displaced,
    chirped) is handled too, which is what makes propagation compose.
    """
    dt = t_f - initial.time
    if dt < 0:
        raise ValueError("cannot propagate backwards")
    if dt == 0:
        return initial
    m, F = spec.mass, spec.force
    w0 = initial.waist
    t_s = m * w0**2 / hbar
    z0, v0 = initial.center, initial.velocity
    gamma = _centroid_phase(initial, m, hbar)
    # centroid phase advances by the classical Lagrangian integral / hbar
    int_v2 = v0**2 * dt + v0 * F * dt**2 / m + F**2 * dt**3 / (3 * m**2)
    int_z = z0 * dt + v0 * dt**2 / 2 + F * dt**3 / (6 * m)
    gamma += (0.5 * m * int_v2 + F * int_z) / hbar
    return _from_centroid_phase(
        center=z0 + v0 * dt + 0.5 * F * dt**2 / m,
        velocity=v0 + F * dt / m,
        waist=w0,
        chirp=initial.chirp + dt / t_s,
        gamma=gamma,
        time=t_f,
        mass=m,
        hbar=hbar,
    )


def displace_packet(packet: GaussianPacket, Z: float, P: float, mass: float,
                    hbar: float = HBAR) -> GaussianPacket:
    """Apply ``D(Z, P) = exp[-i (Z p - P z) / hbar]``: shift by Z, kick by P."""
    # D psi(z) = exp(-i P Z / 2hbar) exp(i P z / hbar) psi(z - Z)
    gamma = _centroid_phase(packet, mass, hbar)
    zc_new = packet.center + Z
    gamma_new = gamma - P * Z / (2 * hbar) + P * zc_new / hbar
    return _from_centroid_phase(zc_new, packet.velocity + P / mass, packet.waist, packet.chirp,
                                gamma_new, packet.time, mass, hbar)


def with_phase(packet: GaussianPacket, extra: float) -> GaussianPacket:
    return replace(packet, global_phase=packet.global_phase + extra)


def gaussian_overlap(bra: GaussianPacket, ket: GaussianPacket, mass: float,
                     hbar: float = HBAR) -> complex:
    """Exact ``<bra|ket>`` for two Gaussian packets."""

    def coeffs(p: GaussianPacket):
        # psi = exp(-A z^2 + B z + C)
        w0, q = p.waist, 1.0 + 1j * p.chirp
        k = mass * p.velocity / hbar
        gamma = _centroid_phase(p, mass, hbar)
        zc = p.center
        A = 1.0 / (2 * w0**2 * q)
        B = 2 * A * zc + 1j * k
        C = -A * zc**2 - 1j * k * zc + 1j * gamma - 0.5 * np.log(q) - 0.25 * math.log(math.pi) - 0.5 * math.log(w0)
        return A, B, C

    A1, B1, C1 = coeffs(bra)
    A2, B2, C2 = coeffs(ket)
    A = np.conj(A1) + A2
    B = np.conj(B1) + B2
    C = np.conj(C1) + C2
    return complex(np.sqrt(np.pi / A) * np.exp(B**2 / (4 * A) + C))
