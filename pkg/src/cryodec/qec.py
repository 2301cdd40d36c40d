"""Repetition-code error-correction harness for the simulated decoder.

Covers the full desk-scale loop: phenomenological syndrome sampling for a
distance-d bit-flip repetition code, an exact maximum-likelihood lookup
baseline, training of a hardware-mirroring recurrent surrogate (with
multiplicative weight noise for hardware-aware robustness), compilation of
the trained weights onto simulated crossbars, and Monte Carlo logical-error
rate estimation with Wilson confidence intervals.

Monte Carlo trials draw from independent counter-derived streams
(SeedSequence(master_seed, spawn_key=(trial,))), so results do not depend on
evaluation order or parallelism.
"""

import csv
import math
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import expit

from . import crossbar, pipeline
from .analog import SigmoidParams
from .errors import (
    CapacityError,
    ConfigError,
    DivergenceError,
    ParameterError,
    ShapeError,
)

Z95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class RepetitionCode:
    """Bit-flip repetition code: d data qubits, d-1 pairwise parity checks."""

    distance: int = 3

    def __post_init__(self):
        if self.distance < 3 or self.distance % 2 == 0:
            raise ParameterError(f"distance must be odd and >= 3, got {self.distance}")

    @property
    def n_stabilizers(self):
        return self.distance - 1


@dataclass(frozen=True)
class NoiseModel:
    """Independent bit flips per data qubit per round, plus measurement flips."""

    p_data: float
    q_meas: float

    def __post_init__(self):
        for name, v in (("p_data", self.p_data), ("q_meas", self.q_meas)):
            if not (0.0 <= v <= 0.5):
                raise ParameterError(f"{name} must lie in [0, 0.5], got {v}")


@dataclass(frozen=True)
class SyndromeTrace:
    """Observed syndromes over a decoding window plus the hidden truth label.

    The label is the accumulated flip parity of the first data qubit; it is
    bookkept from the hidden error history, never inferred from syndromes.
    """

    rounds: int
    syndromes: np.ndarray  # (rounds, distance-1) uint8
    label: int

    def __post_init__(self):
        syn = np.ascontiguousarray(self.syndromes, dtype=np.uint8)
        if syn.ndim != 2 or syn.shape[0] != self.rounds:
            raise ShapeError(f"syndromes must be (rounds, d-1), got {syn.shape}")
        if np.any(syn > 1):
            raise ParameterError("syndrome bits must be 0/1")
        object.__setattr__(self, "syndromes", syn)
        if self.label not in (0, 1):
            raise ParameterError(f"label must be 0/1, got {self.label}")


def trial_rng(seed, trial):
    """Independent per-trial stream, order-insensitive by construction."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(trial,)))


def sample_trace(code, noise, rounds, rng):
    """Sample one decoding window.

    Per round: each data qubit flips with p_data (d uniforms, qubit order),
    the true syndrome is the pairwise parity of adjacent qubits, and each
    reported bit is flipped with q_meas (d-1 uniforms). Draw order is part of
    the reproducibility contract.
    """
    if rounds < 1:
        raise ParameterError(f"rounds must be >= 1, got {rounds}")
    d = code.distance
    err = np.zeros(d, dtype=np.uint8)
    syn = np.empty((rounds, d - 1), dtype=np.uint8)
    for r in range(rounds):
        err ^= rng.random(d) < noise.p_data
        true_syn = err[:-1] ^ err[1:]
        meas_flip = rng.random(d - 1) < noise.q_meas
        syn[r] = true_syn ^ meas_flip
    return SyndromeTrace(rounds=rounds, syndromes=syn, label=int(err[0]))


def sample_dataset(code, noise, n, rounds, seed):
    """n traces on the documented per-trial streams."""
    return [sample_trace(code, noise, rounds, trial_rng(seed, t)) for t in range(n)]


# ---------------------------------------------------------------------------
# Exact maximum-likelihood lookup decoding

_ENUM_BIT_CAP = 20  # total enumeration bits; 2^20 joint table is the limit


class LookupDecoder:
    """Exact posterior argmax over all error histories, precomputed as a table.

    For every possible observed syndrome window the label posteriors are
    accumulated by enumerating all 2^(d*rounds) data-flip histories; the
    measurement-flip pattern consistent with an observation is unique given a
    history, so its probability weight is q^hamming * (1-q)^rest. Ties
    resolve to 0.
    """

    def __init__(self, code, noise, rounds):
        d = code.distance
        n_f = d * rounds
        n_s = (d - 1) * rounds
        if n_f + n_s > _ENUM_BIT_CAP:
            raise CapacityError(
                f"instance too large to enumerate: {n_f + n_s} history bits "
                f"(cap {_ENUM_BIT_CAP}); reduce distance or rounds"
            )
        self.code = code
        self.noise = noise
        self.rounds = rounds

        f_idx = np.arange(2 ** n_f, dtype=np.uint64)
        flips = ((f_idx[:, None] >> np.arange(n_f, dtype=np.uint64)) & 1).astype(np.uint8)
        flips = flips.reshape(-1, rounds, d)
        err = np.bitwise_xor.accumulate(flips, axis=1)
        syn = err[:, :, :-1] ^ err[:, :, 1:]
        shifts = np.arange(n_s, dtype=np.uint64)
        keys = (syn.reshape(-1, n_s).astype(np.uint64) << shifts).sum(axis=1)
        labels = err[:, rounds - 1, 0].astype(np.float64)

        n_flips = np.bitwise_count(f_idx).astype(np.float64)
        p = noise.p_data
        p_hist = p ** n_flips * (1.0 - p) ** (n_f - n_flips)

        obs = np.arange(2 ** n_s, dtype=np.uint64)
        ham = np.bitwise_count(obs[:, None] ^ keys[None, :]).astype(np.float64)
        q = noise.q_meas
        joint = (q ** ham) * ((1.0 - q) ** (n_s - ham)) * p_hist[None, :]

        self.posterior_1 = joint @ labels
        self.posterior_0 = joint.sum(axis=1) - self.posterior_1
        self.table = (self.posterior_1 > self.posterior_0).astype(np.uint8)
        self._shifts = shifts

    def key(self, trace):
        bits = trace.syndromes.reshape(-1).astype(np.uint64)
        return int((bits << self._shifts).sum())

    def decode(self, trace):
        if trace.rounds != self.rounds or trace.syndromes.shape[1] != self.code.distance - 1:
            raise ShapeError("trace does not match this decoder's code/rounds")
        return int(self.table[self.key(trace)])

    __call__ = decode


_lookup_cache: Dict[Tuple[int, int, float, float], LookupDecoder] = {}


def ml_lookup_decoder(trace, code, noise):
    """Exact ML label for one trace (table cached per (code, rounds, noise))."""
    key = (code.distance, trace.rounds, noise.p_data, noise.q_meas)
    dec = _lookup_cache.get(key)
    if dec is None:
        dec = LookupDecoder(code, noise, trace.rounds)
        _lookup_cache[key] = dec
    return dec.decode(trace)


# ---------------------------------------------------------------------------
# Hardware-mirroring recurrent surrogate

@dataclass(frozen=True)
class SurrogateSpec:
    """Everything the surrogate shares with the hardware it will compile to.

    The forward pass reproduces the analog signal path in weight space:
    drives of drive_high volts, conductances k*w siemens, the preset's
    logistic activation, the 1/3 buffer gain feeding the next crossbar, and a
    current threshold i_threshold = (v_th - v_ref) / r_f at the output.
    """

    n_in: int
    n_hidden: int
    n_out: int
    drive_high: float
    k: float
    i_threshold: float
    sigmoid: SigmoidParams
    loss_scale: float = 5e-6


@dataclass(frozen=True)
class SurrogateWeights:
    """Dimensionless weight matrices, bias row last in each."""

    w_in: np.ndarray
    w_rec: np.ndarray
    w_out: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "w_in", np.asarray(self.w_in, dtype=np.float64))
        object.__setattr__(self, "w_rec", np.asarray(self.w_rec, dtype=np.float64))
        object.__setattr__(self, "w_out", np.asarray(self.w_out, dtype=np.float64))


@dataclass(frozen=True)
class TrainConfig:
    spec: SurrogateSpec
    learning_rate: float = 0.01
    epochs: int = 2000
    weight_noise_sigma: float = 0.0
    seed: int = 0
    w_clip: float = 1.0
    init_scale: float = 0.3
    restarts: int = 3
    threshold_slack: float = 0.01


def dataset_arrays(dataset):
    """Stack traces into network inputs X (N, R, n_in) and labels y (N,)."""
    if not dataset:
        raise ParameterError("dataset must be non-empty")
    rounds = dataset[0].rounds
    X = np.stack([t.syndromes for t in dataset]).astype(np.float64)
    y = np.array([t.label for t in dataset], dtype=np.float64)
    if X.shape[1] != rounds:
        raise ShapeError("traces disagree on round count")
    return X, y


def _forward(weights, X, spec, keep=False):
    """Batched unrolled forward pass; returns output currents (N,) and
    per-round intermediates when keep=True."""
    n, rounds, n_in = X.shape
    sig = spec.sigmoid
    g_in = spec.k * weights.w_in
    g_rec = spec.k * weights.w_rec
    g_out = spec.k * weights.w_out

    m = np.zeros((n, spec.n_hidden))
    cache = []
    h_cur = None
    for r in range(rounds):
        d_r = np.empty((n, n_in + 1))
        d_r[:, :n_in] = spec.drive_high * X[:, r, :]
        d_r[:, n_in] = spec.drive_high
        s_r = d_r @ g_in + m
        e_r = expit((s_r - sig.i_mid - sig.i_offset) / sig.i_scale)
        v_r = sig.v_max * e_r
        u_r = v_r / 3.0
        h_cur = np.empty((n, spec.n_hidden + 1))
        h_cur[:, : spec.n_hidden] = u_r
        h_cur[:, spec.n_hidden] = spec.drive_high
        if keep:
            cache.append((d_r, e_r, v_r, h_cur))
        m = h_cur @ g_rec
    z = (h_cur @ g_out)[:, 0]
    return z, cache


def surrogate_predict(weights, X, spec):
    """Thresholded decoder decisions for a batch of syndrome windows."""
    z, _ = _forward(weights, X, spec)
    return (z > spec.i_threshold).astype(np.int64)


def surrogate_decoder(weights, spec, i_threshold=None):
    """Per-trace decoder callable; i_threshold overrides the spec default."""
    th = spec.i_threshold if i_threshold is None else float(i_threshold)

    def decode(trace):
        X = trace.syndromes.astype(np.float64)[None, :, :]
        z, _ = _forward(weights, X, spec)
        return int(z[0] > th)

    return decode


def loss_and_grad(weights, X, y, spec, noise_eps=None):
    """Mean logistic loss of the unrolled surrogate and its weight gradients.

    noise_eps, when given, is a (eps_in, eps_rec, eps_out) triple of standard
    normal draws applied as multiplicative weight perturbations
    w * (1 + sigma*eps); gradients are returned w.r.t. the clean weights.
    """
    used = weights
    scale_in = scale_rec = scale_out = None
    if noise_eps is not None:
        sigma, eps_in, eps_rec, eps_out = noise_eps
        scale_in = 1.0 + sigma * eps_in
        scale_rec = 1.0 + sigma * eps_rec
        scale_out = 1.0 + sigma * eps_out
        used = SurrogateWeights(
            w_in=weights.w_in * scale_in,
            w_rec=weights.w_rec * scale_rec,
            w_out=weights.w_out * scale_out,
        )

    n, rounds, _ = X.shape
    sig = spec.sigmoid
    z, cache = _forward(used, X, spec, keep=True)

    logit = (z - spec.i_threshold) / spec.loss_scale
    # softplus(t) - y*t is the numerically stable binary cross-entropy
    loss = float(np.mean(np.logaddexp(0.0, logit) - y * logit))

    g_rec = spec.k * used.w_rec
    g_out = spec.k * used.w_out

    d_logit = (expit(logit) - y) / n
    d_z = (d_logit / spec.loss_scale)[:, None]

    grad_g_in = np.zeros_like(used.w_in)
    grad_g_rec = np.zeros_like(used.w_rec)
    grad_g_out = cache[rounds - 1][3].T @ d_z

    d_h = d_z @ g_out.T
    for r in range(rounds - 1, -1, -1):
        d_r, e_r, v_r, _ = cache[r]
        d_u = d_h[:, : spec.n_hidden]
        d_s = (d_u / 3.0) * (v_r * (1.0 - e_r)) / sig.i_scale
        grad_g_in += d_r.T @ d_s
        if r > 0:
            h_prev = cache[r - 1][3]
            grad_g_rec += h_prev.T @ d_s
            d_h = d_s @ g_rec.T

    gw_in = spec.k * grad_g_in
    gw_rec = spec.k * grad_g_rec
    gw_out = spec.k * grad_g_out
    if noise_eps is not None:
        gw_in = gw_in * scale_in
        gw_rec = gw_rec * scale_rec
        gw_out = gw_out * scale_out
    return loss, SurrogateWeights(w_in=gw_in, w_rec=gw_rec, w_out=gw_out)


def _restart_rng(seed, restart):
    # distinct namespace from the (trial,) evaluation streams
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(restart, 1)))


def init_weights(cfg, restart=0):
    """Seeded random initial weights (draw order: w_in, w_rec, w_out)."""
    rng = _restart_rng(cfg.seed, restart)
    s = cfg.spec
    return SurrogateWeights(
        w_in=cfg.init_scale * rng.standard_normal((s.n_in + 1, s.n_hidden)),
        w_rec=cfg.init_scale * rng.standard_normal((s.n_hidden + 1, s.n_hidden)),
        w_out=cfg.init_scale * rng.standard_normal((s.n_hidden + 1, s.n_out)),
    ), rng


def select_threshold(scores, labels, slack_frac=0.01):
    """Decision threshold for 'predict 1 when score > threshold'.

    Scans every cut of the sorted scores and, among cuts whose training error
    is within slack_frac of the minimum, returns the midpoint of the widest
    score gap. The margin matters more than the last fraction of a percent:
    conductance programming errors shift the hardware's scores slightly, and
    a threshold in a wide gap keeps the compiled decoder's decisions aligned
    with the surrogate's.

    Returns (threshold, gap, errors_at_cut).
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n = scores.shape[0]
    if n == 0 or scores.shape != labels.shape:
        raise ShapeError("scores and labels must be equal-length 1-D arrays")
    order = np.argsort(scores, kind="stable")
    zs = scores[order]
    ys = labels[order]
    # cut k predicts 1 for the top n-k scores
    ones_below = np.concatenate([[0], np.cumsum(ys == 1)])
    zeros_above = np.concatenate([np.cumsum((ys == 0)[::-1])[::-1], [0]])
    errs = ones_below + zeros_above
    allowed = errs.min() + max(1, int(round(slack_frac * n)))
    best_th, best_gap, best_err = 0.0, -1.0, None
    for k in np.flatnonzero(errs <= allowed):
        lo = zs[k - 1] if k > 0 else zs[0] - 1e-6
        hi = zs[k] if k < n else zs[-1] + 1e-6
        gap = hi - lo
        if gap > best_gap:
            best_gap, best_th, best_err = gap, (lo + hi) / 2.0, int(errs[k])
    return float(best_th), float(best_gap), best_err


@dataclass(frozen=True)
class TrainResult:
    """Trained weights plus the calibrated external comparator threshold."""

    weights: SurrogateWeights
    i_threshold: float       # amperes, decision is i_out > i_threshold
    margin: float            # width of the score gap around the threshold
    train_error: float       # 0/1 error on the training set
    restart: int
    history: list            # per-epoch loss of the selected restart


def _train_once(X, y, cfg, restart):
    weights, rng = init_weights(cfg, restart)
    history = []
    for epoch in range(cfg.epochs):
        eps = None
        if cfg.weight_noise_sigma > 0.0:
            eps = (
                cfg.weight_noise_sigma,
                rng.standard_normal(weights.w_in.shape),
                rng.standard_normal(weights.w_rec.shape),
                rng.standard_normal(weights.w_out.shape),
            )
        loss, grads = loss_and_grad(weights, X, y, cfg.spec, noise_eps=eps)
        if not math.isfinite(loss):
            raise DivergenceError(f"training loss became non-finite at epoch {epoch}",
                                  epoch=epoch)
        history.append(loss)
        lr = cfg.learning_rate
        weights = SurrogateWeights(
            w_in=np.clip(weights.w_in - lr * grads.w_in, -cfg.w_clip, cfg.w_clip),
            w_rec=np.clip(weights.w_rec - lr * grads.w_rec, -cfg.w_clip, cfg.w_clip),
            w_out=np.clip(weights.w_out - lr * grads.w_out, -cfg.w_clip, cfg.w_clip),
        )
    return weights, history


def train_surrogate(dataset, cfg):
    """Projected full-batch gradient descent on the unrolled surrogate.

    Each epoch draws fresh multiplicative weight noise (the hardware-aware
    regularizer), takes one step, and clips weights to +-w_clip so they stay
    representable as conductance pairs. Several deterministic restarts are
    trained; the winner is the restart with the widest decision margin among
    those within threshold_slack of the best training error. The comparator
    threshold is calibrated on the training scores afterwards, which is what
    the external-threshold pin is for.

    Deterministic for a fixed seed. With epochs = 0 the result carries the
    seeded initial weights of restart 0 unchanged.
    """
    X, y = dataset_arrays(dataset)
    if X.shape[2] != cfg.spec.n_in:
        raise ShapeError(
            f"dataset has {X.shape[2]} syndrome bits per round, surrogate wants {cfg.spec.n_in}"
        )
    if cfg.epochs < 0:
        raise ParameterError(f"epochs must be >= 0, got {cfg.epochs}")
    if cfg.restarts < 1:
        raise ParameterError(f"restarts must be >= 1, got {cfg.restarts}")

    candidates = []
    n = len(y)
    for restart in range(cfg.restarts if cfg.epochs > 0 else 1):
        weights, history = _train_once(X, y, cfg, restart)
        z, _ = _forward(weights, X, cfg.spec)
        th, gap, errors = select_threshold(z, y, cfg.threshold_slack)
        candidates.append(TrainResult(
            weights=weights, i_threshold=th, margin=gap,
            train_error=errors / n, restart=restart, history=history))

    slack = max(1, int(round(cfg.threshold_slack * n))) / n
    best_err = min(c.train_error for c in candidates)
    eligible = [c for c in candidates if c.train_error <= best_err + slack]
    eligible.sort(key=lambda c: (-c.margin, c.restart))
    return eligible[0]


# ---------------------------------------------------------------------------
# Hardware compilation and Monte Carlo evaluation

def hardware_decoder(decoder_cfg):
    """Decoder callable that runs each trace through the simulated pipeline.

    The window's final-round output bit is the logical-flip verdict.
    """
    def decode(trace):
        outputs, _ = pipeline.run(decoder_cfg, trace.syndromes.astype(np.int64))
        return int(outputs[-1][0])

    return decode


def constant_decoder(bit):
    bit = int(bit)

    def decode(trace):
        return bit

    return decode


def oracle_decoder(trace):
    """Reads the hidden truth label; the zero-error reference."""
    return trace.label


def wilson_interval(errors, n, z=Z95):
    """95% Wilson score interval for a binomial rate."""
    if n < 1:
        raise ParameterError("need at least one trial")
    phat = errors / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (phat + z2 / (2.0 * n)) / denom
    half = z * math.sqrt(phat * (1.0 - phat) / n + z2 / (4.0 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class EvalResult:
    decoder: str
    p_data: float
    q_meas: float
    rounds: int
    n_trials: int
    errors: int
    rate: float
    ci_low: float
    ci_high: float

    def overlaps(self, other):
        return not (self.ci_high < other.ci_low or other.ci_high < self.ci_low)


def evaluate_ler(decoder, code, noise, n_trials, seed, rounds, name="decoder"):
    """Monte Carlo logical error rate with a 95% Wilson interval.

    Trials use the counter-derived per-trial streams, so the sampled traces
    are identical for any two decoders evaluated at the same (seed, noise,
    rounds) and independent of evaluation order.
    """
    if n_trials < 1:
        raise ParameterError(f"n_trials must be >= 1, got {n_trials}")
    errors = 0
    for t in range(n_trials):
        trace = sample_trace(code, noise, rounds, trial_rng(seed, t))
        if int(decoder(trace)) != trace.label:
            errors += 1
    rate = errors / n_trials
    lo, hi = wilson_interval(errors, n_trials)
    return EvalResult(decoder=name, p_data=noise.p_data, q_meas=noise.q_meas,
                      rounds=rounds, n_trials=n_trials, errors=errors,
                      rate=rate, ci_low=lo, ci_high=hi)


# ---------------------------------------------------------------------------
# CSV interfaces

def write_dataset_csv(dataset, path):
    """(trial, round, s0..s{d-2}, label); the label repeats on every row of a trial."""
    n_bits = dataset[0].syndromes.shape[1] if dataset else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "round"] + [f"s{k}" for k in range(n_bits)] + ["label"])
        for trial, trace in enumerate(dataset):
            for r in range(trace.rounds):
                w.writerow([trial, r] + trace.syndromes[r].tolist() + [trace.label])


def read_dataset_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        n_bits = len(header) - 3
        if n_bits < 1 or header[:2] != ["trial", "round"] or header[-1] != "label":
            raise ParameterError(f"unrecognized dataset header: {header}")
        per_trial = {}
        labels = {}
        for row in reader:
            trial = int(row[0])
            per_trial.setdefault(trial, []).append([int(b) for b in row[2:2 + n_bits]])
            labels[trial] = int(row[-1])
    dataset = []
    for trial in sorted(per_trial):
        syn = np.array(per_trial[trial], dtype=np.uint8)
        dataset.append(SyndromeTrace(rounds=syn.shape[0], syndromes=syn,
                                     label=labels[trial]))
    return dataset


def write_eval_csv(results, path):
    """(decoder, p, q, trials, ler, ci_low, ci_high), one row per evaluation."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["decoder", "p", "q", "trials", "ler", "ci_low", "ci_high"])
        for r in results:
            w.writerow([r.decoder, repr(r.p_data), repr(r.q_meas), r.n_trials,
                        repr(r.rate), repr(r.ci_low), repr(r.ci_high)])
