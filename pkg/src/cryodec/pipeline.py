"""The full recurrent decoder pipeline, executed round by round.

A round is two-phase: compute (input currents, sigmoid, buffer, output stage)
then latch (hold the pre-computed recurrent currents for the next round).
Round 0 always sees zero recurrent current because the memory cells start
unlatched. Waveform rendering is a post-processing view that turns per-round
values into delay-shifted, edge-shaped pulses.
"""

import csv
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import _kernels
from .analog import (
    CurrentMemoryCell,
    TemperaturePreset,
    comparator,
    mem_latch,
    mem_release,
    sigmoid_v,
    tia,
    voltage_buffer,
)
from .crossbar import (
    V_CLAMP_DEFAULT,
    V_DRIVE_MAX,
    DifferentialCrossbar,
    differential_current,
    vmm,
)
from .errors import ParameterError, ShapeError

V_LOGIC_HIGH_DEFAULT = 1.8
PULSE_WIDTH_DEFAULT = 1e-6

# Trace signals in canonical serialization order.
TRACE_SIGNALS = (
    "input_bit",
    "i_input_layer_A",
    "i_recurrent_in_A",
    "v_sigmoid_V",
    "v_buffered_V",
    "i_recurrent_latched_A",
    "v_tia_V",
    "out_bit",
)


@dataclass
class DecoderConfig:
    """Static description of one decoder instance.

    Crossbars carry one extra bias row each (driven at the logic-high level
    every round): input is (n_in+1) x n_hidden, recurrent (n_hidden+1) x
    n_hidden, output (n_hidden+1) x n_out.
    """

    input_xbar: DifferentialCrossbar
    recurrent_xbar: DifferentialCrossbar
    output_xbar: DifferentialCrossbar
    preset: TemperaturePreset
    v_th: float
    tia_r_f: float = 10e3
    tia_v_ref: float = 1.65
    v_logic_high: float = V_LOGIC_HIGH_DEFAULT
    pulse_width: float = PULSE_WIDTH_DEFAULT
    recurrence_enabled: bool = True
    droop_rate: float = 0.0
    read_noise: bool = False

    def __post_init__(self):
        n_in = self.input_xbar.n_in - 1
        n_hidden = self.input_xbar.n_out
        n_out = self.output_xbar.n_out
        if n_in < 1 or n_hidden < 1 or n_out < 1:
            raise ShapeError("decoder needs at least one input, hidden, and output node")
        if self.recurrent_xbar.n_in != n_hidden + 1 or self.recurrent_xbar.n_out != n_hidden:
            raise ShapeError(
                f"recurrent crossbar must be {n_hidden + 1} x {n_hidden}, got "
                f"{self.recurrent_xbar.n_in} x {self.recurrent_xbar.n_out}"
            )
        if self.output_xbar.n_in != n_hidden + 1:
            raise ShapeError(
                f"output crossbar must have {n_hidden + 1} rows, got {self.output_xbar.n_in}"
            )
        if self.pulse_width <= 0.0:
            raise ParameterError(f"pulse width must be > 0, got {self.pulse_width}")
        for xb in (self.input_xbar, self.recurrent_xbar, self.output_xbar):
            # the buffer floor must sit exactly at the clamp level, otherwise
            # hidden drives are not v_buffered - clamp
            if xb.v_clamp != V_CLAMP_DEFAULT:
                raise ParameterError(
                    f"column clamp must equal the {V_CLAMP_DEFAULT} V buffer floor, "
                    f"got {xb.v_clamp} V"
                )

    @property
    def n_in(self):
        return self.input_xbar.n_in - 1

    @property
    def n_hidden(self):
        return self.input_xbar.n_out

    @property
    def n_out(self):
        return self.output_xbar.n_out

    @property
    def drive_high(self):
        """Logic-high drive across a device: pad level minus the column clamp."""
        return self.v_logic_high - V_CLAMP_DEFAULT

    @property
    def round_duration(self):
        """One computing round for energy accounting: pulse plus settling delay."""
        return self.pulse_width + self.preset.delay


@dataclass
class DecoderState:
    """Per-run mutable state threaded through decoder_step."""

    memory: List[CurrentMemoryCell]
    round_index: int = 0
    clock: float = 0.0

    @classmethod
    def fresh(cls, cfg):
        cells = [CurrentMemoryCell(droop_rate=cfg.droop_rate) for _ in range(cfg.n_hidden)]
        return cls(memory=cells)


@dataclass
class RoundTrace:
    """Every internal analog signal plus the digital output of one round."""

    round: int
    input_bits: np.ndarray
    i_input_layer: np.ndarray
    i_recurrent_in: np.ndarray
    v_sigmoid: np.ndarray
    v_buffered: np.ndarray
    i_recurrent_latched: np.ndarray
    v_tia: np.ndarray
    out_bits: np.ndarray


def trace_equal(a, b):
    """Exact (bit-level) equality of two round traces."""
    return (
        a.round == b.round
        and np.array_equal(a.input_bits, b.input_bits)
        and np.array_equal(a.i_input_layer, b.i_input_layer)
        and np.array_equal(a.i_recurrent_in, b.i_recurrent_in)
        and np.array_equal(a.v_sigmoid, b.v_sigmoid)
        and np.array_equal(a.v_buffered, b.v_buffered)
        and np.array_equal(a.i_recurrent_latched, b.i_recurrent_latched)
        and np.array_equal(a.v_tia, b.v_tia)
        and np.array_equal(a.out_bits, b.out_bits)
    )


def _as_bits(bits, n):
    arr = np.asarray(bits, dtype=np.int64)
    if arr.ndim != 1 or arr.shape[0] != n:
        raise ShapeError(f"expected {n} input bits, got shape {arr.shape}")
    if np.any((arr != 0) & (arr != 1)):
        raise ParameterError(f"input bits must be 0 or 1, got {arr}")
    return arr


def decoder_step(state, bits, cfg, rng=None):
    """One computing round; returns (out_bits, new state, RoundTrace).

    Logical 1 drives 0.6 V across the input devices, logical 0 drives 0 V;
    the bias row is always driven high. Recurrent currents released by the
    memory cells sum with the input-layer currents at the sigmoid input, and
    the freshly buffered hidden voltages are pre-multiplied through the
    recurrent crossbar and latched for the next round.
    """
    bits = _as_bits(bits, cfg.n_in)
    sig = cfg.preset.sigmoid
    t_now = state.clock

    drives = np.empty(cfg.n_in + 1, dtype=np.float64)
    drives[: cfg.n_in] = cfg.drive_high * bits
    drives[cfg.n_in] = cfg.drive_high

    i_input = differential_current(
        *vmm(cfg.input_xbar, drives, read_noise=cfg.read_noise, rng=rng))

    memory = list(state.memory)
    i_rec_in = np.empty(cfg.n_hidden, dtype=np.float64)
    for j in range(cfg.n_hidden):
        if memory[j].latched:
            i_rec_in[j], memory[j] = mem_release(memory[j], t_now)
        else:
            i_rec_in[j] = 0.0

    v_sig = np.empty(cfg.n_hidden, dtype=np.float64)
    v_buf = np.empty(cfg.n_hidden, dtype=np.float64)
    hidden_drives = np.empty(cfg.n_hidden + 1, dtype=np.float64)
    for j in range(cfg.n_hidden):
        v_sig[j] = sigmoid_v(i_input[j] + i_rec_in[j], sig)
        v_buf[j] = voltage_buffer(v_sig[j])
        hidden_drives[j] = v_buf[j] - V_CLAMP_DEFAULT
    hidden_drives[cfg.n_hidden] = cfg.drive_high

    if cfg.recurrence_enabled:
        i_latch = differential_current(
            *vmm(cfg.recurrent_xbar, hidden_drives, read_noise=cfg.read_noise, rng=rng))
        for j in range(cfg.n_hidden):
            memory[j] = mem_latch(memory[j], i_latch[j], t_now)
    else:
        i_latch = np.zeros(cfg.n_hidden, dtype=np.float64)

    i_out = differential_current(
        *vmm(cfg.output_xbar, hidden_drives, read_noise=cfg.read_noise, rng=rng))
    v_tia = np.empty(cfg.n_out, dtype=np.float64)
    out_bits = np.empty(cfg.n_out, dtype=np.int64)
    for m in range(cfg.n_out):
        v_tia[m] = tia(i_out[m], cfg.tia_r_f, cfg.tia_v_ref)
        out_bits[m] = comparator(v_tia[m], cfg.v_th)

    trace = RoundTrace(
        round=state.round_index,
        input_bits=bits,
        i_input_layer=i_input,
        i_recurrent_in=i_rec_in,
        v_sigmoid=v_sig,
        v_buffered=v_buf,
        i_recurrent_latched=i_latch,
        v_tia=v_tia,
        out_bits=out_bits,
    )
    new_state = DecoderState(
        memory=memory,
        round_index=state.round_index + 1,
        clock=t_now + cfg.round_duration,
    )
    return out_bits, new_state, trace


def run(cfg, input_sequence, rng=None):
    """Fold decoder_step over a bit sequence from a fresh state.

    Returns (outputs, traces), one entry per round. With read noise off this
    dispatches to the selected kernel backend; results are identical to the
    step-by-step fold either way.
    """
    seq = [_as_bits(b, cfg.n_in) for b in input_sequence]
    if not seq:
        return [], []

    if cfg.read_noise:
        state = DecoderState.fresh(cfg)
        outputs, traces = [], []
        for bits in seq:
            out, state, trace = decoder_step(state, bits, cfg, rng=rng)
            outputs.append(out)
            traces.append(trace)
        return outputs, traces

    bits_arr = np.ascontiguousarray(np.stack(seq), dtype=np.int64)
    sig = cfg.preset.sigmoid
    res = _kernels.run_rounds(
        bits_arr,
        cfg.input_xbar.g_plus, cfg.input_xbar.g_minus,
        cfg.recurrent_xbar.g_plus, cfg.recurrent_xbar.g_minus,
        cfg.output_xbar.g_plus, cfg.output_xbar.g_minus,
        cfg.drive_high, sig.v_max, sig.i_mid, sig.i_scale, sig.i_offset,
        cfg.tia_r_f, cfg.tia_v_ref, cfg.v_th,
        cfg.recurrence_enabled, cfg.droop_rate, cfg.round_duration,
    )
    i_input, i_rec_in, v_sig, v_buf, i_latch, v_tia, out_bits = res
    outputs, traces = [], []
    for r in range(bits_arr.shape[0]):
        buffered = v_buf[r]
        # buffer range contract also holds on the kernel path
        if np.any(buffered < V_CLAMP_DEFAULT - 1e-12) or np.any(buffered > 1.8 + 1e-12):
            raise ParameterError(f"buffered voltage escaped [1.2, 1.8] V at round {r}")
        outputs.append(out_bits[r].copy())
        traces.append(RoundTrace(
            round=r,
            input_bits=bits_arr[r].copy(),
            i_input_layer=i_input[r].copy(),
            i_recurrent_in=i_rec_in[r].copy(),
            v_sigmoid=v_sig[r].copy(),
            v_buffered=buffered.copy(),
            i_recurrent_latched=i_latch[r].copy(),
            v_tia=v_tia[r].copy(),
            out_bits=out_bits[r].copy(),
        ))
    return outputs, traces


def traces_to_rows(traces):
    """Flatten traces to (round, signal, node, value) rows in canonical order."""
    rows = []
    for t in traces:
        per_signal = (
            ("input_bit", t.input_bits),
            ("i_input_layer_A", t.i_input_layer),
            ("i_recurrent_in_A", t.i_recurrent_in),
            ("v_sigmoid_V", t.v_sigmoid),
            ("v_buffered_V", t.v_buffered),
            ("i_recurrent_latched_A", t.i_recurrent_latched),
            ("v_tia_V", t.v_tia),
            ("out_bit", t.out_bits),
        )
        for name, values in per_signal:
            for node, value in enumerate(np.asarray(values).tolist()):
                rows.append((t.round, name, node, value))
    return rows


def write_trace_csv(traces, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["round", "signal", "node", "value"])
        for rnd, name, node, value in traces_to_rows(traces):
            w.writerow([rnd, name, node, repr(value)])


@dataclass
class Waveform:
    """Sampled multi-signal time series."""

    times: np.ndarray
    signals: dict

    def series(self, name):
        return self.signals[name]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "signal", "value"])
            for name in self.signals:
                values = self.signals[name]
                for t, v in zip(self.times.tolist(), values.tolist()):
                    w.writerow([repr(t), name, repr(v)])


def _shape_series(times, edges, tau_rise, tau_fall):
    """First-order tracking of a piecewise-constant target given (time, target) edges.

    edges must start at t = 0 and be time-sorted; each segment relaxes from
    the carried value toward its target with tau_rise (upward) or tau_fall
    (downward). tau = 0 reproduces the ideal square exactly.
    """
    values = np.empty_like(times)
    y = 0.0
    bounds = [e[0] for e in edges] + [np.inf]
    for seg, (t0, target) in enumerate(edges):
        t1 = bounds[seg + 1]
        lo = int(np.searchsorted(times, t0, side="left"))
        hi = int(np.searchsorted(times, t1, side="left"))
        tau = tau_rise if target > y else tau_fall
        if tau == 0.0:
            values[lo:hi] = target
            y = target
        else:
            values[lo:hi] = target + (y - target) * np.exp(-(times[lo:hi] - t0) / tau)
            if np.isfinite(t1):
                y = target + (y - target) * float(np.exp(-(t1 - t0) / tau))
            else:
                y = target
    return values


def render_waveform(traces, preset, sample_period, pulse_width=PULSE_WIDTH_DEFAULT,
                    v_logic_high=V_LOGIC_HIGH_DEFAULT):
    """Render per-round values as shaped pulses on a shared time base.

    Inputs are ideal squares starting at each round boundary; every on-chip
    signal is shifted by the propagation delay and shaped with first-order
    rise/fall edges. Rounds repeat every pulse_width + delay seconds, and all
    signals return to a 0 baseline between pulses.
    """
    if sample_period <= 0.0:
        raise ParameterError(f"sample period must be > 0, got {sample_period}")
    if not traces:
        return Waveform(times=np.empty(0), signals={})

    n_rounds = len(traces)
    period = pulse_width + preset.delay
    t_end = n_rounds * period + preset.delay + 5.0 * max(preset.tau_rise, preset.tau_fall)
    n_samples = int(np.floor(t_end / sample_period)) + 1
    times = np.arange(n_samples, dtype=np.float64) * sample_period

    n_in = traces[0].input_bits.shape[0]
    n_hidden = traces[0].v_sigmoid.shape[0]
    n_out = traces[0].v_tia.shape[0]

    def pulse_edges(values, t_offset):
        edges = [(0.0, 0.0)] if t_offset > 0.0 else []
        for r, v in enumerate(values):
            edges.append((r * period + t_offset, float(v)))
            edges.append((r * period + t_offset + pulse_width, 0.0))
        return edges

    signals = {}
    for k in range(n_in):
        levels = [v_logic_high * t.input_bits[k] for t in traces]
        signals[f"in{k + 1}"] = _shape_series(times, pulse_edges(levels, 0.0), 0.0, 0.0)
    delay = preset.delay
    for j in range(n_hidden):
        levels = [t.v_sigmoid[j] for t in traces]
        signals[f"sigmoid{j + 1}"] = _shape_series(
            times, pulse_edges(levels, delay), preset.tau_rise, preset.tau_fall)
    for m in range(n_out):
        levels = [t.v_tia[m] for t in traces]
        signals[f"out{m + 1}"] = _shape_series(
            times, pulse_edges(levels, delay), preset.tau_rise, preset.tau_fall)
        digital = [3.3 * t.out_bits[m] for t in traces]
        signals[f"digital{m + 1}"] = _shape_series(
            times, pulse_edges(digital, delay), preset.tau_rise, preset.tau_fall)
    return Waveform(times=times, signals=signals)
