"""Phase, contrast and calibration tools for the four-pulse T^3 atom interferometer.

Three independent routes to the interferometer phase are provided: exact
operator algebra (:mod:`.sequence`), the phase-space double integral
(:mod:`.phasespace`) and grid propagation of the wavefunction
(:mod:`.oracle`).
"""
from .physics import (CODATA, AtomConfig, FieldConfig, InternalState, PhysicalConstants,
                      accelerations, frequency_offset_omega0, rb85_atom, zeeman_shift)
from .propagator import (GaussianPacket, LinearPotentialSpec, alpha_factor, cubic_phase,
                         propagate_gaussian, total_global_phase)
from .sequence import (BranchResult, InterferometerSequence, OperatorNormalForm, PulseEvent,
                       gaussian_contrast, interferometer_phase, solve_closure, total_laser_phase)

__all__ = [
    "CODATA", "AtomConfig", "FieldConfig", "InternalState", "PhysicalConstants", "accelerations",
    "frequency_offset_omega0", "rb85_atom", "zeeman_shift", "GaussianPacket", "LinearPotentialSpec",
    "alpha_factor", "cubic_phase", "propagate_gaussian", "total_global_phase", "BranchResult",
    "InterferometerSequence", "OperatorNormalForm", "PulseEvent", "gaussian_contrast",
    "interferometer_phase", "solve_closure", "total_laser_phase",
]
__version__ = "0.1.0"
