"""Line-oriented sequence files.

::

    # comments run to end of line
    units=natural                      # optional; hbar = mu_B = 1
    atom mass=1.40999e-25
    field g=9.81 B0=8.35e-5 gradBz=6e-4
    state g1 gF=-0.333333 mF=0
    state g2 gF=0.333333 mF=1
    param T=1.5e-3
    pulse t=0 area=pi/2 phase=0
    pulse t=T area=pi phase=0
    pulse t=3T area=pi phase=0
    pulse t=4T area=pi/2 phase=0
    grid zmin=-1e-3 zmax=1e-3 n=4096    # optional

Pulse times are decimal numbers or integer/rational multiples of ``T``
(``T``, ``3T``, ``3*T``, ``3/2T``, ``3/2*T``).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from .oracle import Grid
from .physics import CODATA, AtomConfig, FieldConfig, InternalState, PhysicalConstants, accelerations
from .sequence import InterferometerSequence, PulseEvent

_NUMBER = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_NUMBER_RE = re.compile(rf"^{_NUMBER}$")
_INT_RE = re.compile(r"^[+-]?\d+$")
_TIME_EXPR_RE = re.compile(r"^(?:(?P<num>\d+)(?:/(?P<den>\d+))?\*?)?T$")
_AREA_WORDS = {"pi/2": math.pi / 2, "pi": math.pi, "2pi": 2 * math.pi, "2*pi": 2 * math.pi}


class SequenceFileError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line, self.column, self.message = line, column, message
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


@dataclass(frozen=True)
class PulseSpec:
    time: float
    area: float
    phase: float
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class SequenceFile:
    atom: AtomConfig
    field: FieldConfig
    pulses: tuple[PulseSpec, ...]
    natural_units: bool = False
    T: float | None = None
    grid: Grid | None = None

    @property
    def constants(self) -> PhysicalConstants:
        return PhysicalConstants.natural() if self.natural_units else CODATA

    def accelerations(self) -> tuple[float, float]:
        return accelerations(self.atom, self.field, self.constants)

    def to_sequence(self) -> InterferometerSequence:
        a1, a2 = self.accelerations()
        return InterferometerSequence(
            tuple(PulseEvent(p.time, p.area, p.phase) for p in self.pulses), a1, a2,
            mass=self.atom.mass, hbar=self.constants.hbar)


def _tokens(line: str):
    """(column, text) of whitespace-separated tokens, 1-based columns."""
    return [(m.start() + 1, m.group()) for m in re.finditer(r"\S+", line)]


def _keyvals(tokens, lineno: int, allowed: tuple[str, ...]) -> dict[str, tuple[int, str]]:
    out: dict[str, tuple[int, str]] = {}
    for col, tok in tokens:
        if "=" not in tok:
            raise SequenceFileError(f"expected key=value, got {tok!r}", lineno, col)
        key, _, val = tok.partition("=")
        if key not in allowed:
            raise SequenceFileError(f"unknown key {key!r} (allowed: {', '.join(allowed)})", lineno, col)
        if key in out:
            raise SequenceFileError(f"duplicate key {key!r}", lineno, col)
        if not val:
            raise SequenceFileError(f"missing value for {key!r}", lineno, col)
        out[key] = (col + len(key) + 1, val)
    missing = [k for k in allowed if k not in out]
    if missing:
        raise SequenceFileError(f"missing key(s): {', '.join(missing)}", lineno)
    return out


def _number(text: str, lineno: int, col: int) -> float:
    if not _NUMBER_RE.match(text):
        raise SequenceFileError(f"not a decimal number: {text!r}", lineno, col)
    return float(text)


def _integer(text: str, lineno: int, col: int) -> int:
    if not _INT_RE.match(text):
        raise SequenceFileError(f"not an integer: {text!r}", lineno, col)
    return int(text)


def _area(text: str, lineno: int, col: int) -> float:
    if text in _AREA_WORDS:
        return _AREA_WORDS[text]
    value = _number(text, lineno, col)
    if not 0 < value <= 2 * math.pi + 1e-12:
        raise SequenceFileError(f"pulse area must lie in (0, 2pi], got {text}", lineno, col)
    return value


def _time(text: str, T: float | None, lineno: int, col: int) -> float:
    if _NUMBER_RE.match(text):
        return float(text)
    m = _TIME_EXPR_RE.match(text)
    if not m:
        raise SequenceFileError(f"bad pulse time {text!r}: use a number or a multiple of T", lineno, col)
    if T is None:
        raise SequenceFileError("pulse time uses T but no 'param T=' line precedes it", lineno, col)
    num = int(m.group("num")) if m.group("num") else 1
    den = int(m.group("den")) if m.group("den") else 1
    if den == 0:
        raise SequenceFileError("zero denominator in pulse time", lineno, col)
    return num * T / den


def parse_sequence_file(text: str) -> SequenceFile:
    atom_mass = field_vals = grid = T = None
    natural = False
    states: dict[str, InternalState] = {}
    pulses: list[PulseSpec] = []
    seen_line: dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        toks = _tokens(line)
        if not toks:
            continue
        col, head = toks[0]
        rest = toks[1:]
        if head.startswith("units="):
            if rest:
                raise SequenceFileError("unexpected text after units flag", lineno, rest[0][0])
            if head != "units=natural":
                raise SequenceFileError(f"unknown units {head[6:]!r} (only 'natural')", lineno, col + 6)
            natural = True
            continue
        if head in ("atom", "field", "grid"):
            if head in seen_line:
                raise SequenceFileError(f"duplicate {head} block (first on line {seen_line[head]})", lineno, col)
            seen_line[head] = lineno
        if head == "atom":
            kv = _keyvals(rest, lineno, ("mass",))
            atom_mass = _number(kv["mass"][1], lineno, kv["mass"][0])
            if not atom_mass > 0:
                raise SequenceFileError("mass must be positive", lineno, kv["mass"][0])
        elif head == "field":
            kv = _keyvals(rest, lineno, ("g", "B0", "gradBz"))
            field_vals = {k: _number(v, lineno, c) for k, (c, v) in kv.items()}
        elif head == "state":
            if not rest or "=" in rest[0][1]:
                raise SequenceFileError("state needs a label", lineno, col)
            lcol, label = rest[0]
            if label in states:
                raise SequenceFileError(f"duplicate state {label!r}", lineno, lcol)
            kv = _keyvals(rest[1:], lineno, ("gF", "mF"))
            states[label] = InternalState(label, _number(kv["gF"][1], lineno, kv["gF"][0]),
                                          _integer(kv["mF"][1], lineno, kv["mF"][0]))
        elif head == "param":
            kv = _keyvals(rest, lineno, ("T",))
            if T is not None:
                raise SequenceFileError("duplicate param T", lineno, col)
            T = _number(kv["T"][1], lineno, kv["T"][0])
            if not T > 0:
                raise SequenceFileError("T must be positive", lineno, kv["T"][0])
        elif head == "pulse":
            kv = _keyvals(rest, lineno, ("t", "area", "phase"))
            t = _time(kv["t"][1], T, lineno, kv["t"][0])
            if pulses and t <= pulses[-1].time:
                raise SequenceFileError(
                    f"pulse times must increase: t={t!r} after t={pulses[-1].time!r} (line {pulses[-1].line})",
                    lineno, kv["t"][0])
            pulses.append(PulseSpec(t, _area(kv["area"][1], lineno, kv["area"][0]),
                                    _number(kv["phase"][1], lineno, kv["phase"][0]), lineno))
        elif head == "grid":
            kv = _keyvals(rest, lineno, ("zmin", "zmax", "n"))
            try:
                grid = Grid(_number(kv["zmin"][1], lineno, kv["zmin"][0]),
                            _number(kv["zmax"][1], lineno, kv["zmax"][0]),
                            _integer(kv["n"][1], lineno, kv["n"][0]))
            except SequenceFileError:
                raise
            except ValueError as exc:
                raise SequenceFileError(str(exc), lineno, col) from None
        else:
            raise SequenceFileError(f"unknown directive {head!r}", lineno, col)

    if atom_mass is None:
        raise SequenceFileError("missing atom block")
    if field_vals is None:
        raise SequenceFileError("missing field block")
    for label in ("g1", "g2"):
        if label not in states:
            raise SequenceFileError(f"missing state {label}")
    if states["g1"].m_quantum != 0:
        raise SequenceFileError("state g1 must have mF=0")
    if len(pulses) < 2:
        raise SequenceFileError("need at least two pulses")
    atom = AtomConfig(atom_mass, tuple(states.values()))
    fld = FieldConfig(field_vals["g"], field_vals["B0"], field_vals["gradBz"])
    return SequenceFile(atom, fld, tuple(pulses), natural, T, grid)


def _area_text(area: float) -> str:
    for word, value in _AREA_WORDS.items():
        if area == value:
            return word
    return repr(area)


def format_sequence_file(sf: SequenceFile) -> str:
    """Text that parses back to an equal :class:`SequenceFile`; pulse times are written as numbers."""
    lines = []
    if sf.natural_units:
        lines.append("units=natural")
    lines.append(f"atom mass={sf.atom.mass!r}")
    f = sf.field
    lines.append(f"field g={f.g!r} B0={f.B0!r} gradBz={f.grad_Bz!r}")
    for s in sf.atom.states:
        lines.append(f"state {s.label} gF={s.lande_g!r} mF={s.m_quantum}")
    if sf.T is not None:
        lines.append(f"param T={sf.T!r}")
    for p in sf.pulses:
        lines.append(f"pulse t={p.time!r} area={_area_text(p.area)} phase={p.phase!r}")
    if sf.grid is not None:
        g = sf.grid
        lines.append(f"grid zmin={g.z_min!r} zmax={g.z_max!r} n={g.n_points}")
    return "\n".join(lines) + "\n"


def canonical_file_text(T: float, *, natural: bool = False, mass: float | None = None,
                        g: float = 9.81, B0: float = 8.35e-5, grad_Bz: float = 6e-4,
                        g2_lande: float = 1.0 / 3.0, g2_m: int = 1,
                        phases=(0.0, 0.0, 0.0, 0.0), t10: float | None = None,
                        t21: float | None = None, t32: float | None = None) -> str:
    """A pi/2 - pi - pi - pi/2 file; intervals default to T, 2T, T."""
    from .physics import RB85_MASS
    t10 = T if t10 is None else t10
    t21 = 2 * T if t21 is None else t21
    t32 = T if t32 is None else t32
    mass = (1.0 if natural else RB85_MASS) if mass is None else mass
    times = (0.0, t10, t10 + t21, t10 + t21 + t32)
    areas = ("pi/2", "pi", "pi", "pi/2")
    lines = ["units=natural"] if natural else []
    lines += [f"atom mass={mass!r}", f"field g={g!r} B0={B0!r} gradBz={grad_Bz!r}",
              "state g1 gF=-0.3333333333333333 mF=0", f"state g2 gF={g2_lande!r} mF={g2_m}",
              f"param T={T!r}"]
    lines += [f"pulse t={t!r} area={a} phase={p!r}" for t, a, p in zip(times, areas, phases)]
    return "\n".join(lines) + "\n"


def natural_file_text(a1: float, a2: float, T: float, *, phases=(0.0, 0.0, 0.0, 0.0),
                      t10: float | None = None, t21: float | None = None,
                      t32: float | None = None) -> str:
    """Natural-unit file (hbar = m = mu_B = 1) realizing accelerations ``a1`` and ``a2``.

    Uses ``g = -a1`` and a g2 state with ``gF = mF = 1`` in a gradient ``a1 - a2``.
    """
    return canonical_file_text(T, natural=True, mass=1.0, g=-a1, B0=1.0, grad_Bz=a1 - a2,
                               g2_lande=1.0, g2_m=1, phases=phases, t10=t10, t21=t21, t32=t32)
