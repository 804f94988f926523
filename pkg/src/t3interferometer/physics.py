"""Physical constants, atom and field configuration, and the Zeeman map.

Everything here is SI in and SI out. A natural-unit constant set
(hbar = mu_B = 1) is available for well-conditioned test fixtures; the
conversion between the two lives in :func:`natural_scales`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import constants as _sc

HBAR = _sc.hbar
MU_B = _sc.physical_constants["Bohr magneton"][0]
G_STD = 9.81

#: Mass of a 85Rb atom in kg.
RB85_MASS = 1.40999e-25


@dataclass(frozen=True)
class PhysicalConstants:
    hbar: float = HBAR
    mu_B: float = MU_B
    g_std: float = G_STD

    def __post_init__(self):
        for name in ("hbar", "mu_B", "g_std"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and positive, got {value!r}")

    @classmethod
    def natural(cls) -> "PhysicalConstants":
        """hbar = mu_B = 1 (mass is carried by the atom)."""
        return cls(hbar=1.0, mu_B=1.0, g_std=1.0)


CODATA = PhysicalConstants()


@dataclass(frozen=True)
class InternalState:
    label: str
    lande_g: float
    m_quantum: int
    rest_energy_offset: float = 0.0

    @property
    def magnetically_insensitive(self) -> bool:
        return self.m_quantum == 0


@dataclass(frozen=True)
class AtomConfig:
    mass: float
    states: tuple[InternalState, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise ValueError(f"mass must be positive, got {self.mass!r}")
        object.__setattr__(self, "states", tuple(self.states))
        labels = [s.label for s in self.states]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate state labels in {labels}")

    def state(self, label: str) -> InternalState:
        for s in self.states:
            if s.label == label:
                return s
        raise KeyError(f"atom has no state labelled {label!r}")


@dataclass(frozen=True)
class FieldConfig:
    """Gravity magnitude ``g`` (acting toward -z), bias ``B0`` and gradient ``grad_Bz``."""

    g: float
    B0: float
    grad_Bz: float

    def field_at(self, z):
        return self.B0 + z * self.grad_Bz

    def is_valid_for_length(self, length: float, ratio: float = 0.1) -> bool:
        """Check ``length * |grad_Bz| << |B0|``, read as ``<= ratio * |B0|``.

        Not enforced anywhere; callers decide what to do with a ``False``.
        """
        return length * abs(self.grad_Bz) <= ratio * abs(self.B0)


def zeeman_shift(state: InternalState, field: FieldConfig, z, consts: PhysicalConstants = CODATA):
    """Linear Zeeman energy ``mu_B g m B(z)`` in J; exactly zero for ``m = 0``."""
    if state.m_quantum == 0:
        return 0.0 * z
    return consts.mu_B * state.lande_g * state.m_quantum * field.field_at(z)


def _check_pair(atom: AtomConfig) -> tuple[InternalState, InternalState]:
    g1 = atom.state("g1")
    g2 = atom.state("g2")
    if g1.m_quantum != 0:
        raise ValueError("state g1 must be magnetically insensitive (m_quantum = 0)")
    return g1, g2


def accelerations(atom: AtomConfig, field: FieldConfig,
                  consts: PhysicalConstants = CODATA) -> tuple[float, float]:
    """Center-of-mass accelerations ``(a1, a2)`` of g1 and g2, z-axis pointing up."""
    _, g2 = _check_pair(atom)
    a1 = -field.g
    a2 = -field.g - (consts.mu_B / atom.mass) * g2.lande_g * g2.m_quantum * field.grad_Bz
    return a1, a2


def frequency_offset_omega0(atom: AtomConfig, field: FieldConfig,
                            consts: PhysicalConstants = CODATA) -> float:
    """Bias-field energy shift of g2 expressed as an angular frequency (rad/s)."""
    g2 = atom.state("g2")
    return consts.mu_B * g2.lande_g * g2.m_quantum * field.B0 / consts.hbar


def rb85_atom(lande_g: float = 1.0 / 3.0, m_quantum: int = 1) -> AtomConfig:
    """85Rb with a clock-like g1 and a magnetically sensitive g2."""
    return AtomConfig(
        mass=RB85_MASS,
        states=(InternalState("g1", -1.0 / 3.0, 0), InternalState("g2", lande_g, m_quantum)),
    )


@dataclass(frozen=True)
class NaturalScales:
    """Conversion factors between SI and hbar = m = 1 units."""

    time: float
    length: float
    mass: float
    hbar: float

    @property
    def velocity(self) -> float:
        return self.length / self.time

    @property
    def acceleration(self) -> float:
        return self.length / self.time**2

    @property
    def momentum(self) -> float:
        return self.mass * self.velocity


def natural_scales(mass: float, hbar: float, time_scale: float) -> NaturalScales:
    """Scales with ``time_scale`` as unit time and ``sqrt(hbar t / m)`` as unit length."""
    if time_scale <= 0:
        raise ValueError("time scale must be positive")
    return NaturalScales(time=time_scale, length=math.sqrt(hbar * time_scale / mass),
                         mass=mass, hbar=hbar)

