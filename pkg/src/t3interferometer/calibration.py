"""Zeeman spectroscopy: Raman peak positions, field values and gradient fits.

Detunings are angular frequencies (rad/s) everywhere in this module except
the CSV boundary, which uses kHz of ordinary frequency. Fields are tesla
internally and microtesla in CSV files.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np
from scipy import signal, stats

from .physics import CODATA, AtomConfig, FieldConfig, PhysicalConstants, accelerations

KHZ = 2 * math.pi * 1e3  # rad/s per kHz
MICROTESLA = 1e-6


@dataclass(frozen=True)
class RamanTransition:
    F1: int
    m_F1: int
    F2: int
    m_F2: int
    g_F1: float
    g_F2: float

    def __post_init__(self):
        if abs(self.m_F1) > self.F1 or abs(self.m_F2) > self.F2:
            raise ValueError("|m_F| must not exceed F")
        if abs(self.m_F2 - self.m_F1) > 1:
            raise ValueError("transitions with |delta m_F| > 1 are not supported")

    @property
    def sensitivity(self) -> float:
        """``g_F2 m_F2 - g_F1 m_F1``."""
        return self.g_F2 * self.m_F2 - self.g_F1 * self.m_F1

    @property
    def is_clock(self) -> bool:
        return self.m_F1 == 0 and self.m_F2 == 0


#: Rb-85 hyperfine g-factors of the F = 2 and F = 3 ground states.
G_F2_RB85 = -1.0 / 3.0
G_F3_RB85 = 1.0 / 3.0

#: The m = 1 -> m = 1 line used for field mapping (two lines above the clock line).
PLUS_TWO = RamanTransition(2, 1, 3, 1, G_F2_RB85, G_F3_RB85)
CLOCK = RamanTransition(2, 0, 3, 0, G_F2_RB85, G_F3_RB85)


@dataclass(frozen=True)
class SpectrumSample:
    detuning: float
    population: float


@dataclass(frozen=True)
class FieldMapPoint:
    z: float
    B: float
    uncertainty: float | None = None


def zeeman_detuning(transition: RamanTransition, B, consts: PhysicalConstants = CODATA):
    return consts.mu_B / consts.hbar * transition.sensitivity * B


def field_from_detuning(transition: RamanTransition, detuning, consts: PhysicalConstants = CODATA):
    if transition.sensitivity == 0:
        raise ValueError("transition is magnetically insensitive; no field can be inferred")
    return detuning * consts.hbar / (consts.mu_B * transition.sensitivity)


def microtesla_per_khz(transition: RamanTransition = PLUS_TWO,
                       consts: PhysicalConstants = CODATA) -> float:
    """Field per kHz of (ordinary-frequency) detuning, in microtesla."""
    return field_from_detuning(transition, KHZ, consts) / MICROTESLA


def f2_to_f3_transitions() -> list[RamanTransition]:
    """All |delta m_F| <= 1 lines from F = 2 to F = 3 in Rb-85."""
    out = []
    for m1 in range(-2, 3):
        for m2 in (m1 - 1, m1, m1 + 1):
            if abs(m2) <= 3:
                out.append(RamanTransition(2, m1, 3, m2, G_F2_RB85, G_F3_RB85))
    return out


def synthetic_spectrum(B: float, transitions: Iterable[RamanTransition], detunings,
                       linewidth: float, amplitude: float = 0.5, offset_drift: float = 0.0,
                       noise: float = 0.0, rng: np.random.Generator | None = None,
                       consts: PhysicalConstants = CODATA) -> list[SpectrumSample]:
    """Sum of unit-height Lorentzians (half-width ``linewidth``) at each distinct line position.

    Lines falling at the same detuning are drawn once. ``offset_drift``
    shifts every line, e.g. to mimic a light shift.
    """
    x = np.asarray(detunings, dtype=float)
    centers = sorted({round(float(zeeman_detuning(t, B, consts)), 6) for t in transitions})
    y = np.zeros_like(x)
    for c in centers:
        y += amplitude / (1 + ((x - c - offset_drift) / linewidth) ** 2)
    if noise:
        rng = rng or np.random.default_rng(0)
        y = y + rng.uniform(-noise, noise, size=y.shape)
    y = np.clip(y, 0.0, 1.0)
    return [SpectrumSample(float(a), float(b)) for a, b in zip(x, y)]


@dataclass(frozen=True)
class Peak:
    detuning: float
    height: float


def find_peaks(spectrum: Sequence[SpectrumSample], min_prominence: float = 0.05,
               clock_reference: bool = False, clock_guess: float = 0.0) -> list[Peak]:
    """Prominent local maxima sorted by detuning.

    Each maximum is refined by a least-squares parabola through the samples
    above its half-prominence level, which averages out sample noise for
    symmetric lines. With ``clock_reference`` every detuning is measured
    from the peak closest to ``clock_guess``, which removes any common drift.
    """
    if len(spectrum) < 16:
        raise ValueError("need at least 16 spectrum samples")
    x = np.array([s.detuning for s in spectrum])
    y = np.array([s.population for s in spectrum])
    if np.any(np.diff(x) <= 0):
        raise ValueError("spectrum must be sorted by strictly increasing detuning")
    idx, _ = signal.find_peaks(y, prominence=min_prominence)
    _, _, left, right = signal.peak_widths(y, idx, rel_height=0.5)
    peaks = []
    for i, lo, hi in zip(idx, left, right):
        xc, yc = x[i], y[i]
        # keep the window symmetric about the sample maximum
        half = int(min(i - math.ceil(lo), math.floor(hi) - i))
        if half >= 1:
            sl = slice(i - half, i + half + 1)
            u = x[sl] - x[i]
            c2, c1, c0 = np.polyfit(u, y[sl], 2)
            if c2 < 0 and abs(c1 / (2 * c2)) <= u[-1]:
                xc = x[i] - c1 / (2 * c2)
                yc = c0 - c1 * c1 / (4 * c2)
        peaks.append(Peak(float(xc), float(yc)))
    if clock_reference and peaks:
        ref = min(peaks, key=lambda p: abs(p.detuning - clock_guess)).detuning
        peaks = [Peak(p.detuning - ref, p.height) for p in peaks]
    return peaks


def field_from_spectrum(spectrum: Sequence[SpectrumSample], min_prominence: float = 0.05,
                        transition: RamanTransition = PLUS_TWO, line_offset: int = 2,
                        consts: PhysicalConstants = CODATA) -> float:
    """Field from the line ``line_offset`` positions above the clock line, clock-differenced."""
    peaks = find_peaks(spectrum, min_prominence, clock_reference=True)
    if not peaks:
        raise ValueError("no peaks found")
    clock = min(range(len(peaks)), key=lambda i: abs(peaks[i].detuning))
    j = clock + line_offset
    if not 0 <= j < len(peaks):
        raise ValueError(f"spectrum has no line {line_offset} positions from the clock line")
    return float(field_from_detuning(transition, peaks[j].detuning, consts))


@dataclass(frozen=True)
class GradientFit:
    B0: float
    gradient: float
    residuals: np.ndarray
    B0_stderr: float
    gradient_stderr: float


def fit_gradient(points: Sequence[FieldMapPoint]) -> GradientFit:
    """Ordinary least-squares line ``B(z) = B0 + gradient * z``.

    Two points are interpolated exactly (standard errors are NaN).
    """
    if len(points) < 2:
        raise ValueError(f"need at least two field-map points, got {len(points)}")
    z = np.array([p.z for p in points], dtype=float)
    B = np.array([p.B for p in points], dtype=float)
    if len(np.unique(z)) < 2:
        raise ValueError("field-map positions are degenerate (need two distinct z)")
    if len(points) == 2:
        slope = (B[1] - B[0]) / (z[1] - z[0])
        intercept = B[0] - slope * z[0]
        return GradientFit(float(intercept), float(slope), B - (intercept + slope * z),
                           math.nan, math.nan)
    res = stats.linregress(z, B)
    resid = B - (res.intercept + res.slope * z)
    return GradientFit(float(res.intercept), float(res.slope), resid,
                       float(res.intercept_stderr), float(res.stderr))


def required_T_for_phase(atom: AtomConfig, field: FieldConfig, target_phase: float,
                         consts: PhysicalConstants = CODATA) -> float:
    """Pulse separation at which the cubic phase reaches ``target_phase``."""
    if field.grad_Bz == 0:
        raise ValueError("zero field gradient: the cubic phase vanishes for every T")
    if not target_phase > 0:
        raise ValueError("target phase must be positive")
    a1, a2 = accelerations(atom, field, consts)
    coeff = abs(atom.mass / consts.hbar * (a1 * a1 - a2 * a2))
    if coeff == 0:
        raise ValueError("accelerations have equal magnitude: the cubic phase vanishes")
    return (target_phase / coeff) ** (1.0 / 3.0)


# -- CSV boundary --------------------------------------------------------------------

def read_spectrum_csv(stream: IO[str]) -> list[SpectrumSample]:
    """Two columns ``detuning_kHz,population`` with one header row."""
    rows = _data_rows(stream, 2)
    return [SpectrumSample(float(r[0]) * KHZ, float(r[1])) for r in rows]


def write_spectrum_csv(samples: Sequence[SpectrumSample], stream: IO[str]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["detuning_kHz", "population"])
    for s in samples:
        w.writerow([repr(s.detuning / KHZ), repr(s.population)])


def read_field_map_csv(stream: IO[str]) -> list[FieldMapPoint]:
    """``z_m,B_uT[,sigma_uT]`` with one header row."""
    out = []
    for r in _data_rows(stream, 2, 3):
        sigma = float(r[2]) * MICROTESLA if len(r) == 3 and r[2].strip() else None
        out.append(FieldMapPoint(float(r[0]), float(r[1]) * MICROTESLA, sigma))
    return out


def write_field_map_csv(points: Sequence[FieldMapPoint], stream: IO[str],
                        residuals: Sequence[float] | None = None) -> None:
    w = csv.writer(stream, lineterminator="\n")
    header = ["z_m", "B_uT"]
    has_sigma = any(p.uncertainty is not None for p in points)
    if has_sigma:
        header.append("sigma_uT")
    if residuals is not None:
        header.append("residual_uT")
    w.writerow(header)
    for i, p in enumerate(points):
        row = [repr(p.z), repr(p.B / MICROTESLA)]
        if has_sigma:
            row.append("" if p.uncertainty is None else repr(p.uncertainty / MICROTESLA))
        if residuals is not None:
            row.append(repr(float(residuals[i]) / MICROTESLA))
        w.writerow(row)


def _data_rows(stream: IO[str], min_cols: int, max_cols: int | None = None) -> list[list[str]]:
    max_cols = max_cols or min_cols
    reader = csv.reader(stream)
    try:
        next(reader)
    except StopIteration:
        raise ValueError("empty CSV input") from None
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if not min_cols <= len(row) <= max_cols:
            raise ValueError(f"line {lineno}: expected {min_cols}-{max_cols} columns, got {len(row)}")
        try:
            [float(c) for c in row if c.strip()]
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric value in {row}") from None
        rows.append(row)
    return rows


def synthetic_field_map(B0: float, gradient: float, z, noise: float = 0.0,
                        rng: np.random.Generator | None = None) -> list[FieldMapPoint]:
    z = np.asarray(z, dtype=float)
    B = B0 + gradient * z
    if noise:
        rng = rng or np.random.default_rng(0)
        B = B + rng.normal(0.0, noise, size=B.shape)
    return [FieldMapPoint(float(a), float(b), noise or None) for a, b in zip(z, B)]
