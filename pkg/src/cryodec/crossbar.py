"""Differential memristor crossbar: signed weights as conductance pairs.

Each weight w_ij lives in two devices (G+, G-); a column's output current is
the plain conductance-weighted sum of the row drive voltages, and the signed
result is the difference of the paired column currents. Drive voltages here
are the voltages ACROSS the devices, i.e. pad voltage minus the 1.2 V column
clamp, and are capped at 0.6 V so inference can never reprogram a device.
"""

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels, device
from .device import MemristorParams, MemristorState
from .errors import (
    ConvergenceError,
    OverdriveError,
    ParameterError,
    RangeError,
    ShapeError,
)

V_CLAMP_DEFAULT = 1.2     # volts, shared column bias that suppresses sneak paths
V_DRIVE_MAX = 0.6         # volts, safe inference window across a device
_DRIVE_SLACK = 1e-9       # absorbs float round-off at the window edge

SCHEME_ONE_SIDED = "one-sided"
SCHEME_BALANCED = "balanced"


@dataclass
class DifferentialCrossbar:
    """Paired conductance matrices of shape (n_in, n_out), plus pulse counters."""

    params: MemristorParams
    g_plus: np.ndarray
    g_minus: np.ndarray
    v_clamp: float = V_CLAMP_DEFAULT
    pulses_plus: np.ndarray = field(default=None)
    pulses_minus: np.ndarray = field(default=None)

    def __post_init__(self):
        self.g_plus = np.ascontiguousarray(self.g_plus, dtype=np.float64)
        self.g_minus = np.ascontiguousarray(self.g_minus, dtype=np.float64)
        if self.g_plus.ndim != 2 or self.g_plus.shape != self.g_minus.shape:
            raise ShapeError(
                f"paired matrices must share one 2-D shape, got "
                f"{self.g_plus.shape} and {self.g_minus.shape}"
            )
        if self.pulses_plus is None:
            self.pulses_plus = np.zeros(self.g_plus.shape, dtype=np.int64)
        if self.pulses_minus is None:
            self.pulses_minus = np.zeros(self.g_minus.shape, dtype=np.int64)
        for name, g in (("g_plus", self.g_plus), ("g_minus", self.g_minus)):
            if not np.all(np.isfinite(g)):
                raise ParameterError(f"{name} contains non-finite conductances")
            if np.any(g < self.params.g_min) or np.any(g > self.params.g_max):
                raise RangeError(
                    f"{name} outside [{self.params.g_min}, {self.params.g_max}] S"
                )

    @property
    def n_in(self):
        return self.g_plus.shape[0]

    @property
    def n_out(self):
        return self.g_plus.shape[1]

    @classmethod
    def uniform(cls, params, n_in, n_out, g0=None, v_clamp=V_CLAMP_DEFAULT):
        """All devices at one conductance (default: the low bound)."""
        g = params.g_min if g0 is None else float(g0)
        shape = (int(n_in), int(n_out))
        return cls(params=params,
                   g_plus=np.full(shape, g),
                   g_minus=np.full(shape, g),
                   v_clamp=v_clamp)

    def device_state(self, row, col, polarity):
        """View one device as a MemristorState value."""
        if polarity == device.POLARITY_POT:
            return MemristorState(g=float(self.g_plus[row, col]),
                                  pulses_applied=int(self.pulses_plus[row, col]))
        if polarity == device.POLARITY_DEP:
            return MemristorState(g=float(self.g_minus[row, col]),
                                  pulses_applied=int(self.pulses_minus[row, col]))
        raise ParameterError(f"polarity must be '+' or '-', got {polarity!r}")


def vmm(xbar, drive, read_noise=False, rng=None):
    """Column currents (i_plus, i_minus) for a row drive-voltage vector.

    Drives are voltages across the devices (pad minus clamp) and must stay
    within the +-0.6 V safe window. With read_noise=True every device
    conductance is perturbed by its read-noise law for this evaluation only
    (two standard-normal draws per device, plus matrix then minus matrix,
    row-major).
    """
    drive = np.ascontiguousarray(drive, dtype=np.float64)
    if drive.ndim != 1 or drive.shape[0] != xbar.n_in:
        raise ShapeError(f"drive length {drive.shape} does not match n_in = {xbar.n_in}")
    if not np.all(np.isfinite(drive)):
        raise ParameterError("drive vector contains non-finite entries")
    if np.any(np.abs(drive) > V_DRIVE_MAX + _DRIVE_SLACK):
        worst = float(np.max(np.abs(drive)))
        raise OverdriveError(
            f"|drive| up to {worst} V exceeds the {V_DRIVE_MAX} V safe window"
        )
    gp, gm = xbar.g_plus, xbar.g_minus
    if read_noise:
        if rng is None:
            raise ParameterError("read_noise=True requires an rng")
        s = xbar.params.sigma_read
        gp = gp * (1.0 + s * rng.standard_normal(gp.shape))
        gm = gm * (1.0 + s * rng.standard_normal(gm.shape))
        gp = np.ascontiguousarray(gp)
        gm = np.ascontiguousarray(gm)
    return _kernels.vmm(gp, drive), _kernels.vmm(gm, drive)


def differential_current(i_plus, i_minus):
    """Signed column currents: element-wise i_plus - i_minus."""
    i_plus = np.asarray(i_plus, dtype=np.float64)
    i_minus = np.asarray(i_minus, dtype=np.float64)
    if i_plus.shape != i_minus.shape:
        raise ShapeError(f"current vectors differ in shape: {i_plus.shape} vs {i_minus.shape}")
    return i_plus - i_minus


@dataclass(frozen=True)
class WeightSpec:
    """Dimensionless weight matrix plus the conductance-per-weight scale k."""

    w: np.ndarray
    k: float
    scheme: str = SCHEME_ONE_SIDED

    def __post_init__(self):
        object.__setattr__(self, "w", np.asarray(self.w, dtype=np.float64))
        if self.w.ndim != 2:
            raise ShapeError(f"weights must be a 2-D matrix, got ndim = {self.w.ndim}")
        if not (np.all(np.isfinite(self.w)) and np.isfinite(self.k) and self.k > 0.0):
            raise ParameterError("weights must be finite and k > 0")
        if self.scheme not in (SCHEME_ONE_SIDED, SCHEME_BALANCED):
            raise ParameterError(f"unknown weight scheme {self.scheme!r}")


def compile_weights(spec, params):
    """Map a signed weight matrix onto (targets_plus, targets_minus) in siemens.

    one-sided: positive weights raise G+, negative raise G-, the other side
    parks at g_min (lowest total conductance). balanced: both sides move
    symmetrically about the mid conductance. Either way the decode identity
    (G+ - G-)/k == w holds exactly.
    """
    span = params.g_max - params.g_min
    mag = np.abs(spec.w) * spec.k
    bad = np.argwhere(mag > span + 1e-18)
    if bad.size:
        i, j = bad[0]
        raise RangeError(
            f"weight at cell ({i}, {j}) = {spec.w[i, j]} needs {mag[i, j]} S of "
            f"conductance span but only {span} S is available"
        )
    if spec.scheme == SCHEME_ONE_SIDED:
        tp = params.g_min + spec.k * np.maximum(spec.w, 0.0)
        tm = params.g_min + spec.k * np.maximum(-spec.w, 0.0)
    else:
        g_mid = (params.g_min + params.g_max) / 2.0
        tp = g_mid + spec.k * spec.w / 2.0
        tm = g_mid - spec.k * spec.w / 2.0
        if np.any(tp > params.g_max) or np.any(tp < params.g_min) \
                or np.any(tm > params.g_max) or np.any(tm < params.g_min):
            raise RangeError("balanced scheme pushes a target outside the device range")
    return tp, tm


def decode_weights(targets_plus, targets_minus, k):
    """Inverse of compile_weights: (G+ - G-)/k."""
    return (np.asarray(targets_plus) - np.asarray(targets_minus)) / k


@dataclass(frozen=True)
class CellReport:
    row: int
    col: int
    polarity: str
    target: float
    achieved: float
    pulses: int
    rel_error: float
    converged: bool


@dataclass
class ProgrammingReport:
    """Per-cell write-verify outcome for a whole crossbar."""

    cells: list
    tolerance: float

    @property
    def ok(self):
        return all(c.converged for c in self.cells)

    @property
    def failed_cells(self):
        return [(c.row, c.col, c.polarity) for c in self.cells if not c.converged]

    @property
    def total_pulses(self):
        return sum(c.pulses for c in self.cells)

    @property
    def max_rel_error(self):
        return max((c.rel_error for c in self.cells), default=0.0)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["row", "col", "polarity", "conductance_S", "pulses", "error"])
            for c in self.cells:
                w.writerow([c.row, c.col, c.polarity, repr(c.achieved),
                            c.pulses, repr(c.rel_error)])


def program_crossbar(xbar, targets_plus, targets_minus, tolerance, max_pulses, rng):
    """Write-verify every device toward its target; mutates xbar in place.

    Cells are visited plus matrix first, then minus, row-major; each consumes
    the shared random stream in that order. Non-converging cells are recorded
    in the report rather than raised, so callers can retry or accept.
    """
    targets_plus = np.asarray(targets_plus, dtype=np.float64)
    targets_minus = np.asarray(targets_minus, dtype=np.float64)
    if targets_plus.shape != (xbar.n_in, xbar.n_out) or targets_minus.shape != targets_plus.shape:
        raise ShapeError("target matrices must match the crossbar shape")
    p = xbar.params
    for name, t in (("plus", targets_plus), ("minus", targets_minus)):
        if np.any(t < p.g_min) or np.any(t > p.g_max):
            raise RangeError(f"{name} targets outside [{p.g_min}, {p.g_max}] S")

    cells = []
    for polarity, g_mat, pulse_mat, targets in (
        (device.POLARITY_POT, xbar.g_plus, xbar.pulses_plus, targets_plus),
        (device.POLARITY_DEP, xbar.g_minus, xbar.pulses_minus, targets_minus),
    ):
        for i in range(xbar.n_in):
            for j in range(xbar.n_out):
                state = MemristorState(g=float(g_mat[i, j]))
                target = float(targets[i, j])
                try:
                    state, pulses = device.program_target(
                        state, target, tolerance, max_pulses, p, rng)
                    converged = True
                except ConvergenceError as exc:
                    state = exc.state
                    pulses = exc.pulses_used
                    converged = False
                g_mat[i, j] = state.g
                pulse_mat[i, j] += pulses
                cells.append(CellReport(
                    row=i, col=j, polarity=polarity, target=target,
                    achieved=state.g, pulses=pulses,
                    rel_error=abs(state.g - target) / target,
                    converged=converged,
                ))
    return ProgrammingReport(cells=cells, tolerance=tolerance)


def from_weights(weights, k, scheme, params, v_clamp=V_CLAMP_DEFAULT,
                 rng=None, tolerance=None, max_pulses=None):
    """Build a crossbar that realizes a weight matrix.

    With rng=None the devices are set to the exact compiled targets (the
    fixed-resistor emulation mode used for circuit characterization).
    Otherwise every device starts at g_min and is write-verify programmed;
    returns (crossbar, ProgrammingReport or None).
    """
    spec = WeightSpec(w=weights, k=k, scheme=scheme)
    tp, tm = compile_weights(spec, params)
    if rng is None:
        xbar = DifferentialCrossbar(params=params, g_plus=tp.copy(), g_minus=tm.copy(),
                                    v_clamp=v_clamp)
        return xbar, None
    if tolerance is None or max_pulses is None:
        raise ParameterError("programmed mode needs tolerance and max_pulses")
    xbar = DifferentialCrossbar.uniform(params, tp.shape[0], tp.shape[1], v_clamp=v_clamp)
    report = program_crossbar(xbar, tp, tm, tolerance, max_pulses, rng)
    return xbar, report


def write_snapshot_csv(xbar, path):
    """Dump every device as (row, col, polarity, conductance_S, pulses, error).

    The error column is empty in a plain snapshot (no target to compare to).
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "polarity", "conductance_S", "pulses", "error"])
        for polarity, g_mat, pulse_mat in (
            (device.POLARITY_POT, xbar.g_plus, xbar.pulses_plus),
            (device.POLARITY_DEP, xbar.g_minus, xbar.pulses_minus),
        ):
            for i in range(xbar.n_in):
                for j in range(xbar.n_out):
                    w.writerow([i, j, polarity, repr(float(g_mat[i, j])),
                                int(pulse_mat[i, j]), ""])
