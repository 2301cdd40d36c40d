"""Behavioral models of the on-chip analog blocks.

Sigmoid driver, 1/3-gain level-shifting voltage buffer, two-trigger analog
current memory, transimpedance amplifier, and threshold comparator. All are
pure functions except the memory cell, which is an explicit immutable value.
Temperature enters only through preset parameters, never through physics.
"""

import math
from dataclasses import dataclass, replace
from typing import Optional

from . import _kernels
from .errors import ParameterError, ProtocolError, RangeError, TimeOrderingError

V_RAIL_1V8 = 1.8
V_RAIL_3V3 = 3.3
BUFFER_OFFSET = 1.2   # volts; buffer output floor, equals the crossbar clamp
BUFFER_GAIN = 3.0     # buffer divides by this


@dataclass(frozen=True)
class SigmoidParams:
    """Logistic transfer from summed input current to output voltage.

    v = v_max / (1 + exp(-(i - i_mid - i_offset) / i_scale)). i_offset models
    a fabrication-corner shift of the whole curve.
    """

    v_max: float = V_RAIL_1V8
    i_mid: float = 0.0
    i_scale: float = 100e-6
    i_offset: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.v_max) and self.v_max > 0.0):
            raise ParameterError(f"v_max must be > 0, got {self.v_max}")
        if not (math.isfinite(self.i_scale) and self.i_scale > 0.0):
            raise ParameterError(f"i_scale must be > 0, got {self.i_scale}")
        if not (math.isfinite(self.i_mid) and math.isfinite(self.i_offset)):
            raise ParameterError("i_mid and i_offset must be finite")

    @property
    def midpoint_slope(self):
        """Transfer slope at the logistic midpoint, volts per ampere."""
        return self.v_max / (4.0 * self.i_scale)


@dataclass(frozen=True)
class TemperaturePreset:
    """One cryostat operating point: sigmoid shape, timing, supply powers.

    Powers are None for operating points characterized without a power
    measurement; the power table simply has no row for them.
    """

    name: str
    temperature: float
    sigmoid: SigmoidParams
    delay: float = 100e-9
    tau_rise: float = 50e-9
    tau_fall: float = 50e-9
    power_1v8: Optional[float] = None
    power_3v3: Optional[float] = None

    def __post_init__(self):
        if min(self.delay, self.tau_rise, self.tau_fall) < 0.0:
            raise ParameterError(f"preset {self.name}: timing values must be >= 0")
        for p in (self.power_1v8, self.power_3v3):
            if p is not None and (not math.isfinite(p) or p < 0.0):
                raise ParameterError(f"preset {self.name}: powers must be >= 0")
        if (self.power_1v8 is None) != (self.power_3v3 is None):
            raise ParameterError(f"preset {self.name}: give both supply powers or neither")


def sigmoid_v(i, params):
    """Sigmoid circuit output voltage for a summed input current."""
    if not math.isfinite(i):
        raise ParameterError(f"sigmoid input current must be finite, got {i}")
    return _kernels.sigmoid_scalar(i, params.v_max, params.i_mid, params.i_scale, params.i_offset)


def voltage_buffer(v):
    """Level-shifting buffer: 0..1.8 V in, 1.2 + v/3 out (1.2..1.8 V)."""
    if not (0.0 <= v <= V_RAIL_1V8):
        raise RangeError(f"buffer input {v} V outside [0, {V_RAIL_1V8}] V")
    return BUFFER_OFFSET + v / BUFFER_GAIN


@dataclass(frozen=True)
class CurrentMemoryCell:
    """Two-trigger analog current memory (sample on latch, emit on release).

    stored is signed; droop_rate is a first-order leak constant in 1/s
    applied over the latch-to-release interval (0 = ideal hold).
    """

    stored: float = 0.0
    latched: bool = False
    latch_time: float = 0.0
    droop_rate: float = 0.0


def mem_latch(cell, i, t):
    """First trigger: capture the current value at time t."""
    if not math.isfinite(i):
        raise ParameterError(f"latched current must be finite, got {i}")
    return replace(cell, stored=i, latched=True, latch_time=t)


def mem_release(cell, t):
    """Second trigger: emit the held current at time t and clear the latch."""
    if not cell.latched:
        raise ProtocolError("release triggered on an unlatched memory cell")
    if t < cell.latch_time:
        raise TimeOrderingError(
            f"release at t = {t} s precedes latch at t = {cell.latch_time} s"
        )
    released = cell.stored * math.exp(-cell.droop_rate * (t - cell.latch_time))
    return released, replace(cell, latched=False)


def tia(i, r_f, v_ref):
    """Transimpedance amplifier: v_ref + i*r_f, clipped to the 3.3 V rails."""
    if not (math.isfinite(r_f) and r_f > 0.0):
        raise ParameterError(f"feedback resistance must be > 0, got {r_f}")
    v = v_ref + i * r_f
    if v < 0.0:
        return 0.0
    if v > V_RAIL_3V3:
        return V_RAIL_3V3
    return v


def comparator(v, v_th):
    """Threshold comparator; ties resolve to 0."""
    return 1 if v > v_th else 0
