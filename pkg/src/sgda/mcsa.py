"""Characteristic fault frequencies of induction motors.

Maps motor parameters and a fault type to the set of stator-current
frequencies where that fault is expected to leave a signature:

* rotor bar defect:        f1 * (1 +/- 2 n s)
* inter-turn short circuit: k f1 -/+ m fr   (k odd)
* bearing outer race:       (n/2) fr (1 - (Db/Dp) cos b)
* bearing inner race:       (n/2) fr (1 + (Db/Dp) cos b)
* rolling element (spin):   (Dp / 2Db) fr (1 - ((Db/Dp) cos b)^2)

All functions are pure. Frequencies outside ``(0, fs/2)`` are dropped and
counted in the returned :class:`FrequencySet` rather than raised.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from sgda.errors import FaultFrequencyError

logger = logging.getLogger(__name__)

DEDUP_TOL_HZ = 1e-9


class FaultType(str, Enum):
    ROTOR_BAR = "RBD"
    ITSC = "ITSC"
    BEARING_OUTER = "BPFO"
    BEARING_INNER = "BPFI"
    BEARING_BALL = "BSF"

    @classmethod
    def parse(cls, value: "str | FaultType") -> "FaultType":
        """Accept either the short tag (``"RBD"``) or the member name (``"ROTOR_BAR"``)."""
        if isinstance(value, FaultType):
            return value
        text = str(value).strip()
        for member in cls:
            if text.upper() in (member.value.upper(), member.name):
                return member
        aliases = {
            "ROTORBARDEFECT": cls.ROTOR_BAR,
            "INTERTURNSHORTCIRCUIT": cls.ITSC,
            "BEARINGOUTERRACE": cls.BEARING_OUTER,
            "BEARINGINNERRACE": cls.BEARING_INNER,
            "BEARINGROLLINGELEMENT": cls.BEARING_BALL,
        }
        key = text.replace("_", "").replace(" ", "").upper()
        if key in aliases:
            return aliases[key]
        raise ValueError(f"unknown fault type {value!r}; expected one of {[m.value for m in cls]}")

    @property
    def is_bearing(self) -> bool:
        return self in _BEARING_FAULTS


_BEARING_FAULTS = frozenset(
    {FaultType.BEARING_OUTER, FaultType.BEARING_INNER, FaultType.BEARING_BALL}
)


@dataclass(frozen=True)
class BearingGeometry:
    """Rolling-element bearing geometry.

    Attributes:
        n_elements: Number of rolling elements.
        ball_diameter_m: Rolling element diameter.
        pitch_diameter_m: Pitch (mean) diameter.
        contact_angle_rad: Contact angle, in ``[0, pi/2)``.
    """

    n_elements: int
    ball_diameter_m: float
    pitch_diameter_m: float
    contact_angle_rad: float = 0.0

    def __post_init__(self):
        if int(self.n_elements) != self.n_elements or self.n_elements < 1:
            raise ValueError(f"n_elements must be a positive integer, got {self.n_elements}")
        if not self.ball_diameter_m > 0:
            raise ValueError(f"ball_diameter_m must be > 0, got {self.ball_diameter_m}")
        if not self.pitch_diameter_m > 0:
            raise ValueError(f"pitch_diameter_m must be > 0, got {self.pitch_diameter_m}")
        if not self.ball_diameter_m < self.pitch_diameter_m:
            raise ValueError(
                f"ball diameter ({self.ball_diameter_m}) must be smaller than pitch "
                f"diameter ({self.pitch_diameter_m})"
            )
        if not 0.0 <= self.contact_angle_rad < math.pi / 2:
            raise ValueError(
                f"contact_angle_rad must lie in [0, pi/2), got {self.contact_angle_rad}"
            )
        if not self.diameter_ratio * math.cos(self.contact_angle_rad) < 1.0:
            raise ValueError("(D_ball/D_pit)*cos(beta) must be < 1")

    @property
    def diameter_ratio(self) -> float:
        return self.ball_diameter_m / self.pitch_diameter_m


@dataclass(frozen=True)
class MotorParams:
    """Operating parameters of one induction motor.

    ``rotor_frequency_hz`` may be omitted; it is then derived as
    ``f1 * (1 - s) / p``.
    """

    supply_frequency_hz: float
    slip: float
    pole_pairs: int
    sampling_rate_hz: float
    rotor_frequency_hz: float | None = None
    bearing: BearingGeometry | None = None
    name: str = ""
    rotor_bars: int | None = None  # stored only; no formula uses it

    def __post_init__(self):
        if not (math.isfinite(self.supply_frequency_hz) and self.supply_frequency_hz > 0):
            raise ValueError(f"supply_frequency_hz must be > 0, got {self.supply_frequency_hz}")
        if not 0.0 <= self.slip < 1.0:
            raise ValueError(f"slip must lie in [0, 1), got {self.slip}")
        if int(self.pole_pairs) != self.pole_pairs or self.pole_pairs < 1:
            raise ValueError(f"pole_pairs must be a positive integer, got {self.pole_pairs}")
        if not (
            math.isfinite(self.sampling_rate_hz)
            and self.sampling_rate_hz > 2 * self.supply_frequency_hz
        ):
            raise ValueError(
                f"sampling_rate_hz ({self.sampling_rate_hz}) must exceed twice the "
                f"supply frequency ({self.supply_frequency_hz})"
            )
        if self.rotor_frequency_hz is not None and not self.rotor_frequency_hz > 0:
            raise ValueError(f"rotor_frequency_hz must be > 0, got {self.rotor_frequency_hz}")

    @property
    def nyquist_hz(self) -> float:
        return self.sampling_rate_hz / 2.0

    @property
    def shaft_frequency_hz(self) -> float:
        """Rotor frequency, falling back to ``f1 (1 - s) / p`` when not given."""
        if self.rotor_frequency_hz is not None:
            return float(self.rotor_frequency_hz)
        return self.supply_frequency_hz * (1.0 - self.slip) / self.pole_pairs

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "MotorParams":
        data = dict(data)
        bearing = data.pop("bearing", None)
        if bearing is not None and not isinstance(bearing, BearingGeometry):
            bearing = BearingGeometry(**bearing)
        return cls(bearing=bearing, **data)


def _positive_ints(values: Iterable[int], what: str) -> tuple[int, ...]:
    out = tuple(values)
    if not out:
        raise ValueError(f"{what} must be non-empty")
    for v in out:
        if isinstance(v, bool) or int(v) != v or v < 1:
            raise ValueError(f"{what} entries must be positive integers, got {v!r}")
    return tuple(int(v) for v in out)


@dataclass(frozen=True)
class HarmonicOrders:
    """Harmonic/sideband orders used by the rotor-bar and ITSC formulas."""

    rotor_orders: tuple[int, ...] = (1, 2, 3)
    itsc_k: tuple[int, ...] = (1, 3)
    itsc_m: tuple[int, ...] = (1, 2, 3)

    def __post_init__(self):
        object.__setattr__(self, "rotor_orders", _positive_ints(self.rotor_orders, "rotor_orders"))
        object.__setattr__(self, "itsc_k", _positive_ints(self.itsc_k, "itsc_k"))
        object.__setattr__(self, "itsc_m", _positive_ints(self.itsc_m, "itsc_m"))
        even = [k for k in self.itsc_k if k % 2 == 0]
        if even:
            raise ValueError(f"itsc_k entries must be odd, got {even}")

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in asdict(self).items()}


@dataclass(frozen=True)
class FrequencySet:
    """Sorted, de-duplicated in-band fault frequencies for one fault type."""

    fault: FaultType
    frequencies_hz: tuple[float, ...]
    dropped_nonpositive: int = 0
    dropped_above_nyquist: int = 0
    notes: tuple[str, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.frequencies_hz)

    def __iter__(self):
        return iter(self.frequencies_hz)

    @property
    def empty(self) -> bool:
        return not self.frequencies_hz


def _make_set(fault: FaultType, raw: Sequence[float], nyquist: float) -> FrequencySet:
    nonpositive = sum(1 for f in raw if f <= 0)
    above = sum(1 for f in raw if f >= nyquist)
    kept: list[float] = []
    for f in sorted(f for f in raw if 0 < f < nyquist):
        if not kept or f - kept[-1] > DEDUP_TOL_HZ:
            kept.append(float(f))
    notes = []
    if nonpositive:
        notes.append(f"{nonpositive} non-positive frequencies dropped")
    if above:
        notes.append(f"{above} frequencies at or above Nyquist ({nyquist:g} Hz) dropped")
    if not kept:
        notes.append("no in-band frequencies")
    return FrequencySet(fault, tuple(kept), nonpositive, above, tuple(notes))


def rotor_bar_frequencies(params: MotorParams, orders: HarmonicOrders = HarmonicOrders()) -> FrequencySet:
    """Broken-rotor-bar sidebands ``f1 (1 +/- 2 n s)`` for each ``n`` in ``orders.rotor_orders``."""
    if params.slip == 0:
        raise FaultFrequencyError(FaultType.ROTOR_BAR, "zero slip: sidebands degenerate onto f1")
    f1, s = params.supply_frequency_hz, params.slip
    raw = []
    for n in orders.rotor_orders:
        raw.append(f1 * (1.0 - 2.0 * n * s))
        raw.append(f1 * (1.0 + 2.0 * n * s))
    return _make_set(FaultType.ROTOR_BAR, raw, params.nyquist_hz)


def itsc_frequencies(params: MotorParams, orders: HarmonicOrders = HarmonicOrders()) -> FrequencySet:
    """Inter-turn short-circuit components ``k f1 -/+ m fr`` over the (k, m) grid."""
    f1, fr = params.supply_frequency_hz, params.shaft_frequency_hz
    raw = []
    for k in orders.itsc_k:
        for m in orders.itsc_m:
            raw.append(k * f1 - m * fr)
            raw.append(k * f1 + m * fr)
    return _make_set(FaultType.ITSC, raw, params.nyquist_hz)


def bearing_frequencies(params: MotorParams, fault: FaultType) -> FrequencySet:
    """Single characteristic frequency of a bearing defect."""
    fault = FaultType.parse(fault)
    if not fault.is_bearing:
        raise FaultFrequencyError(fault, "not a bearing fault type")
    if params.bearing is None:
        raise FaultFrequencyError(fault, "bearing geometry missing from motor parameters")
    geo = params.bearing
    fr = params.shaft_frequency_hz
    ratio_cos = geo.diameter_ratio * math.cos(geo.contact_angle_rad)
    if fault is FaultType.BEARING_OUTER:
        f = geo.n_elements / 2.0 * fr * (1.0 - ratio_cos)
    elif fault is FaultType.BEARING_INNER:
        f = geo.n_elements / 2.0 * fr * (1.0 + ratio_cos)
    else:
        f = geo.pitch_diameter_m / (2.0 * geo.ball_diameter_m) * fr * (1.0 - ratio_cos**2)
    return _make_set(fault, [f], params.nyquist_hz)


def fault_frequencies(
    params: MotorParams, fault: FaultType, orders: HarmonicOrders = HarmonicOrders()
) -> FrequencySet:
    fault = FaultType.parse(fault)
    if fault is FaultType.ROTOR_BAR:
        return rotor_bar_frequencies(params, orders)
    if fault is FaultType.ITSC:
        return itsc_frequencies(params, orders)
    return bearing_frequencies(params, fault)


def fault_frequency_map(
    params: MotorParams,
    faults: Sequence[FaultType | str],
    orders: HarmonicOrders = HarmonicOrders(),
) -> dict[FaultType, FrequencySet]:
    """Evaluate the fault-to-frequencies mapping for every requested fault.

    Faults whose set comes back empty stay in the result with the note
    ``"no in-band frequencies"``.

    Raises:
        ValueError: ``faults`` is empty.
        FaultFrequencyError: a single fault failed; ``err.fault`` names it.
    """
    if not faults:
        raise ValueError("at least one fault type is required")
    out: dict[FaultType, FrequencySet] = {}
    for raw in faults:
        fault = FaultType.parse(raw)
        try:
            fs = fault_frequencies(params, fault, orders)
        except FaultFrequencyError:
            raise
        except ValueError as exc:
            raise FaultFrequencyError(fault, str(exc)) from exc
        if fs.empty:
            logger.info("%s: no in-band frequencies", fault.value)
        out[fault] = fs
    return out
