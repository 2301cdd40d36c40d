"""Stochastic behavioral model of a voltage-pulse-programmed metal-oxide memristor.

Update law is a multiplicative window function: programming steps shrink as
the conductance approaches either bound, which reproduces the saturating
pulse-train trajectories of real devices. Pulses below the switching
threshold leave the device untouched; reads are non-destructive and carry
multiplicative Gaussian noise.

Random-draw protocol (kept identical across backends): one standard normal
per effective pulse, one per verify read. Sub-threshold pulses draw nothing.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .errors import (
    ConvergenceError,
    DestructiveReadError,
    ParameterError,
    RangeError,
)

POLARITY_POT = "+"
POLARITY_DEP = "-"


@dataclass(frozen=True)
class MemristorParams:
    """Device parameter block. Conductances in siemens, voltages in volts.

    a_pot/a_dep are the dimensionless per-pulse step fractions of the
    remaining window; sigma_c2c and sigma_read are relative (dimensionless)
    noise standard deviations.
    """

    g_min: float = 10e-6
    g_max: float = 100e-6
    a_pot: float = 0.02
    a_dep: float = 0.02
    v_switch: float = 1.0
    sigma_c2c: float = 0.05
    sigma_read: float = 0.01

    def __post_init__(self):
        values = (self.g_min, self.g_max, self.a_pot, self.a_dep,
                  self.v_switch, self.sigma_c2c, self.sigma_read)
        if not all(math.isfinite(v) for v in values):
            raise ParameterError(f"non-finite memristor parameter in {self}")
        if not 0.0 < self.g_min < self.g_max:
            raise ParameterError(f"need 0 < g_min < g_max, got {self.g_min}, {self.g_max}")
        if not (0.0 <= self.a_pot <= 1.0 and 0.0 <= self.a_dep <= 1.0):
            raise ParameterError(f"step fractions must lie in [0, 1]: {self.a_pot}, {self.a_dep}")
        if self.sigma_c2c < 0.0 or self.sigma_read < 0.0:
            raise ParameterError("noise sigmas must be >= 0")
        if self.v_switch <= 0.0:
            raise ParameterError("v_switch must be > 0")

    def noise_free(self):
        return replace(self, sigma_c2c=0.0, sigma_read=0.0)


@dataclass(frozen=True)
class MemristorState:
    """One device: conductance in siemens plus a lifetime pulse counter."""

    g: float
    pulses_applied: int = 0


def _check_pulse_args(amplitude, width, params):
    if not isinstance(params, MemristorParams):
        raise ParameterError(f"params must be MemristorParams, got {type(params).__name__}")
    if not (math.isfinite(amplitude) and amplitude >= 0.0):
        raise ParameterError(f"pulse amplitude must be finite and >= 0, got {amplitude}")
    if not (math.isfinite(width) and width > 0.0):
        raise ParameterError(f"pulse width must be finite and > 0, got {width}")


def _potentiate(polarity):
    if polarity == POLARITY_POT:
        return True
    if polarity == POLARITY_DEP:
        return False
    raise ParameterError(f"polarity must be '+' or '-', got {polarity!r}")


def apply_pulse(state, polarity, amplitude, width, params, rng):
    """One programming pulse. Positive polarity potentiates, negative depresses.

    Below v_switch the state is returned unchanged. Otherwise the window
    update g += a*(bound - g)*(1 + eta) runs with eta ~ N(0, sigma_c2c) and
    the result is clamped to [g_min, g_max].
    """
    pot = _potentiate(polarity)
    _check_pulse_args(amplitude, width, params)
    if amplitude < params.v_switch:
        return state
    eta = params.sigma_c2c * rng.standard_normal()
    if pot:
        g = state.g + params.a_pot * (params.g_max - state.g) * (1.0 + eta)
    else:
        g = state.g - params.a_dep * (state.g - params.g_min) * (1.0 + eta)
    g = min(max(g, params.g_min), params.g_max)
    return MemristorState(g=g, pulses_applied=state.pulses_applied + 1)


def apply_pulse_train(state, n, polarity, amplitude, width, params, rng):
    """n identical pulses; returns (state, conductance trajectory after each pulse)."""
    pot = _potentiate(polarity)
    _check_pulse_args(amplitude, width, params)
    if n < 0:
        raise ParameterError(f"pulse count must be >= 0, got {n}")
    effective = amplitude >= params.v_switch
    g, traj = _kernels.pulse_train(
        state.g, int(n), pot, effective,
        params.g_min, params.g_max, params.a_pot, params.a_dep,
        params.sigma_c2c, rng,
    )
    applied = state.pulses_applied + (int(n) if effective else 0)
    return MemristorState(g=g, pulses_applied=applied), traj


def read_conductance(state, v_read, params, rng):
    """Non-destructive readout: returns g*(1 + nu), nu ~ N(0, sigma_read)."""
    if not isinstance(params, MemristorParams):
        raise ParameterError(f"params must be MemristorParams, got {type(params).__name__}")
    if not (math.isfinite(v_read) and v_read > 0.0):
        raise ParameterError(f"read voltage must be finite and > 0, got {v_read}")
    if v_read >= params.v_switch:
        raise DestructiveReadError(
            f"v_read = {v_read} V would disturb the device (v_switch = {params.v_switch} V)"
        )
    return state.g * (1.0 + params.sigma_read * rng.standard_normal())


def program_target(state, g_target, tolerance, max_pulses, params, rng):
    """Closed-loop write-verify to a target conductance.

    Alternates a verify read with one corrective pulse (potentiation when the
    read is low, depression when high) until the read lands within
    tolerance*g_target. The true post-state error is bounded by the tolerance
    plus a ~3*sigma_read*g_target read-noise margin.

    Corrective pulses are driven at v_switch. Raises ConvergenceError (with
    the final state attached) once max_pulses corrective pulses are spent.
    """
    if not isinstance(params, MemristorParams):
        raise ParameterError(f"params must be MemristorParams, got {type(params).__name__}")
    if not (math.isfinite(g_target) and params.g_min <= g_target <= params.g_max):
        raise RangeError(
            f"target {g_target} S outside programmable range "
            f"[{params.g_min}, {params.g_max}] S"
        )
    if not (math.isfinite(tolerance) and tolerance > 0.0):
        raise ParameterError(f"tolerance must be > 0, got {tolerance}")
    if max_pulses < 0:
        raise ParameterError(f"max_pulses must be >= 0, got {max_pulses}")

    g, pulses, converged = _kernels.program_target(
        state.g, g_target, tolerance, int(max_pulses),
        params.g_min, params.g_max, params.a_pot, params.a_dep,
        params.sigma_c2c, params.sigma_read, rng,
    )
    new_state = MemristorState(g=g, pulses_applied=state.pulses_applied + pulses)
    if not converged:
        raise ConvergenceError(
            f"write-verify did not reach {g_target} S within {max_pulses} pulses "
            f"(stopped at {g} S)",
            state=new_state,
            pulses_used=pulses,
        )
    return new_state, pulses


def fresh_state(params, g0=None):
    """New device at g0 (default: the low-conductance bound)."""
    g = params.g_min if g0 is None else float(g0)
    if not params.g_min <= g <= params.g_max:
        raise RangeError(f"initial conductance {g} S outside [{params.g_min}, {params.g_max}] S")
    return MemristorState(g=g)


def hysteresis_sweep(params, n_down, n_up, amplitude, width, rng, g0=None):
    """Depression train then potentiation train from g0 (default g_max).

    Returns the concatenated conductance trajectory, length n_down + n_up.
    This is the classic pulse-programming characterization sweep.
    """
    state = fresh_state(params, params.g_max if g0 is None else g0)
    state, down = apply_pulse_train(state, n_down, POLARITY_DEP, amplitude, width, params, rng)
    state, up = apply_pulse_train(state, n_up, POLARITY_POT, amplitude, width, params, rng)
    return np.concatenate([down, up])
