"""Structured TOML configuration: parsing, fail-closed validation, defaults.

Every tunable physical value lives in one file with documented keys and SI
units. Unknown sections or keys raise ConfigError so parameter typos cannot
silently fall back to defaults.
"""

import math
from dataclasses import dataclass
from importlib import resources
from typing import Dict, Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .analog import SigmoidParams, TemperaturePreset
from .crossbar import SCHEME_BALANCED, SCHEME_ONE_SIDED
from .device import MemristorParams
from .errors import ConfigError, ParameterError
from .power import PowerTable


@dataclass(frozen=True)
class CrossbarOptions:
    v_clamp: float = 1.2
    drive_high: float = 0.6
    weight_scale: float = 80e-6
    weight_scheme: str = SCHEME_ONE_SIDED
    read_noise: bool = False
    program_tolerance: float = 0.01
    program_max_pulses: int = 10000


@dataclass(frozen=True)
class PipelineOptions:
    n_in: int = 2
    n_hidden: int = 2
    n_out: int = 1
    v_logic_high: float = 1.8
    pulse_width: float = 1e-6
    preset: str = "300K"
    recurrence_enabled: bool = True
    tia_r_f: float = 10e3
    tia_v_ref: float = 1.65
    v_th: float = 1.65
    droop_rate: float = 0.0
    w_in: Optional[np.ndarray] = None
    w_rec: Optional[np.ndarray] = None
    w_out: Optional[np.ndarray] = None


@dataclass(frozen=True)
class QecOptions:
    distance: int = 3
    rounds: int = 3
    p_data: float = 0.05
    q_meas: float = 0.02
    dataset_size: int = 4000
    learning_rate: float = 0.01
    epochs: int = 2000
    weight_noise_sigma: float = 0.02
    loss_scale: float = 2e-6
    w_clip: float = 1.0
    init_scale: float = 0.3
    restarts: int = 3
    threshold_slack: float = 0.01


@dataclass(frozen=True)
class SimConfig:
    device: MemristorParams
    crossbar: CrossbarOptions
    pipeline: PipelineOptions
    presets: Dict[str, TemperaturePreset]
    power: PowerTable
    qec: QecOptions

    def preset(self, name=None):
        name = name or self.pipeline.preset
        if name not in self.presets:
            known = ", ".join(sorted(self.presets))
            raise ConfigError(f"unknown preset {name!r} (known: {known})")
        return self.presets[name]


def _reject_unknown(section, data, allowed):
    unknown = set(data) - set(allowed)
    if unknown:
        name = ", ".join(sorted(f"{section}.{k}" for k in unknown))
        raise ConfigError(f"unknown config key(s): {name}")


def _number(section, data, key, default=None):
    if key not in data:
        if default is None:
            raise ConfigError(f"missing config key {section}.{key}")
        return default
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{section}.{key} must be a number, got {v!r}")
    if not math.isfinite(float(v)):
        raise ConfigError(f"{section}.{key} must be finite, got {v!r}")
    return float(v)


def _integer(section, data, key, default=None):
    if key not in data:
        if default is None:
            raise ConfigError(f"missing config key {section}.{key}")
        return default
    v = data[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{section}.{key} must be an integer, got {v!r}")
    return v


def _boolean(section, data, key, default):
    v = data.get(key, default)
    if not isinstance(v, bool):
        raise ConfigError(f"{section}.{key} must be true/false, got {v!r}")
    return v


def _string(section, data, key, default=None):
    if key not in data:
        if default is None:
            raise ConfigError(f"missing config key {section}.{key}")
        return default
    v = data[key]
    if not isinstance(v, str):
        raise ConfigError(f"{section}.{key} must be a string, got {v!r}")
    return v


def _matrix(section, data, key):
    if key not in data:
        raise ConfigError(f"missing config key {section}.{key}")
    try:
        arr = np.asarray(data[key], dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}.{key} is not a numeric matrix: {exc}") from None
    if arr.ndim != 2:
        raise ConfigError(f"{section}.{key} must be a 2-D matrix")
    return arr


_DEVICE_KEYS = ("g_min_S", "g_max_S", "a_pot", "a_dep", "v_switch_V",
                "sigma_c2c", "sigma_read")
_CROSSBAR_KEYS = ("v_clamp_V", "drive_high_V", "weight_scale_S", "weight_scheme",
                  "read_noise", "program_tolerance", "program_max_pulses")
_PIPELINE_KEYS = ("n_in", "n_hidden", "n_out", "v_logic_high_V", "pulse_width_s",
                  "preset", "recurrence_enabled", "tia_r_f_ohm", "tia_v_ref_V",
                  "v_th_V", "droop_rate_per_s", "demo_weights")
_DEMO_KEYS = ("w_in", "w_rec", "w_out")
_PRESET_KEYS = ("temperature_K", "sigmoid_i_mid_A", "sigmoid_i_scale_A",
                "sigmoid_i_offset_A", "sigmoid_v_max_V", "delay_s",
                "tau_rise_s", "tau_fall_s", "power_1v8_W", "power_3v3_W")
_QEC_KEYS = ("distance", "rounds", "p_data", "q_meas", "dataset_size",
             "learning_rate", "epochs", "weight_noise_sigma", "loss_scale_A",
             "w_clip", "init_scale", "restarts", "threshold_slack")
_TOP_KEYS = ("device", "crossbar", "pipeline", "presets", "qec")


def _parse_device(data):
    _reject_unknown("device", data, _DEVICE_KEYS)
    return MemristorParams(
        g_min=_number("device", data, "g_min_S"),
        g_max=_number("device", data, "g_max_S"),
        a_pot=_number("device", data, "a_pot"),
        a_dep=_number("device", data, "a_dep"),
        v_switch=_number("device", data, "v_switch_V"),
        sigma_c2c=_number("device", data, "sigma_c2c"),
        sigma_read=_number("device", data, "sigma_read"),
    )


def _parse_crossbar(data):
    _reject_unknown("crossbar", data, _CROSSBAR_KEYS)
    scheme = _string("crossbar", data, "weight_scheme", SCHEME_ONE_SIDED)
    if scheme not in (SCHEME_ONE_SIDED, SCHEME_BALANCED):
        raise ConfigError(f"crossbar.weight_scheme must be "
                          f"'{SCHEME_ONE_SIDED}' or '{SCHEME_BALANCED}', got {scheme!r}")
    return CrossbarOptions(
        v_clamp=_number("crossbar", data, "v_clamp_V", 1.2),
        drive_high=_number("crossbar", data, "drive_high_V", 0.6),
        weight_scale=_number("crossbar", data, "weight_scale_S", 80e-6),
        weight_scheme=scheme,
        read_noise=_boolean("crossbar", data, "read_noise", False),
        program_tolerance=_number("crossbar", data, "program_tolerance", 0.01),
        program_max_pulses=_integer("crossbar", data, "program_max_pulses", 10000),
    )


def _parse_pipeline(data):
    _reject_unknown("pipeline", data, _PIPELINE_KEYS)
    demo = data.get("demo_weights", {})
    if not isinstance(demo, dict):
        raise ConfigError("pipeline.demo_weights must be a table")
    _reject_unknown("pipeline.demo_weights", demo, _DEMO_KEYS)
    w_in = _matrix("pipeline.demo_weights", demo, "w_in") if demo else None
    w_rec = _matrix("pipeline.demo_weights", demo, "w_rec") if demo else None
    w_out = _matrix("pipeline.demo_weights", demo, "w_out") if demo else None
    opts = PipelineOptions(
        n_in=_integer("pipeline", data, "n_in", 2),
        n_hidden=_integer("pipeline", data, "n_hidden", 2),
        n_out=_integer("pipeline", data, "n_out", 1),
        v_logic_high=_number("pipeline", data, "v_logic_high_V", 1.8),
        pulse_width=_number("pipeline", data, "pulse_width_s", 1e-6),
        preset=_string("pipeline", data, "preset", "300K"),
        recurrence_enabled=_boolean("pipeline", data, "recurrence_enabled", True),
        tia_r_f=_number("pipeline", data, "tia_r_f_ohm", 10e3),
        tia_v_ref=_number("pipeline", data, "tia_v_ref_V", 1.65),
        v_th=_number("pipeline", data, "v_th_V", 1.65),
        droop_rate=_number("pipeline", data, "droop_rate_per_s", 0.0),
        w_in=w_in, w_rec=w_rec, w_out=w_out,
    )
    if w_in is not None:
        expected = {
            "w_in": (opts.n_in + 1, opts.n_hidden),
            "w_rec": (opts.n_hidden + 1, opts.n_hidden),
            "w_out": (opts.n_hidden + 1, opts.n_out),
        }
        for key, mat in (("w_in", w_in), ("w_rec", w_rec), ("w_out", w_out)):
            if mat.shape != expected[key]:
                raise ConfigError(
                    f"pipeline.demo_weights.{key} must be {expected[key]}, got {mat.shape}"
                )
    return opts


def _parse_preset(name, data):
    section = f"presets.{name}"
    _reject_unknown(section, data, _PRESET_KEYS)
    has_p18 = "power_1v8_W" in data
    has_p33 = "power_3v3_W" in data
    if has_p18 != has_p33:
        raise ConfigError(f"{section}: give both power_1v8_W and power_3v3_W or neither")
    sigmoid = SigmoidParams(
        v_max=_number(section, data, "sigmoid_v_max_V", 1.8),
        i_mid=_number(section, data, "sigmoid_i_mid_A", 0.0),
        i_scale=_number(section, data, "sigmoid_i_scale_A"),
        i_offset=_number(section, data, "sigmoid_i_offset_A", 0.0),
    )
    return TemperaturePreset(
        name=name,
        temperature=_number(section, data, "temperature_K"),
        sigmoid=sigmoid,
        delay=_number(section, data, "delay_s", 100e-9),
        tau_rise=_number(section, data, "tau_rise_s", 50e-9),
        tau_fall=_number(section, data, "tau_fall_s", 50e-9),
        power_1v8=_number(section, data, "power_1v8_W") if has_p18 else None,
        power_3v3=_number(section, data, "power_3v3_W") if has_p33 else None,
    )


def _parse_qec(data):
    _reject_unknown("qec", data, _QEC_KEYS)
    opts = QecOptions(
        distance=_integer("qec", data, "distance", 3),
        rounds=_integer("qec", data, "rounds", 3),
        p_data=_number("qec", data, "p_data", 0.05),
        q_meas=_number("qec", data, "q_meas", 0.02),
        dataset_size=_integer("qec", data, "dataset_size", 4000),
        learning_rate=_number("qec", data, "learning_rate", 0.01),
        epochs=_integer("qec", data, "epochs", 2000),
        weight_noise_sigma=_number("qec", data, "weight_noise_sigma", 0.02),
        loss_scale=_number("qec", data, "loss_scale_A", 2e-6),
        w_clip=_number("qec", data, "w_clip", 1.0),
        init_scale=_number("qec", data, "init_scale", 0.3),
        restarts=_integer("qec", data, "restarts", 3),
        threshold_slack=_number("qec", data, "threshold_slack", 0.01),
    )
    if not (0.0 <= opts.p_data <= 0.5 and 0.0 <= opts.q_meas <= 0.5):
        raise ConfigError("qec.p_data and qec.q_meas must lie in [0, 0.5]")
    return opts


def parse_config(data):
    """Validate a parsed TOML document into a SimConfig."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table")
    _reject_unknown("<root>", data, _TOP_KEYS)
    presets_data = data.get("presets", {})
    if not isinstance(presets_data, dict) or not presets_data:
        raise ConfigError("config needs at least one [presets.<name>] block")
    try:
        presets = {name: _parse_preset(name, block) for name, block in presets_data.items()}
        cfg = SimConfig(
            device=_parse_device(data.get("device", {})),
            crossbar=_parse_crossbar(data.get("crossbar", {})),
            pipeline=_parse_pipeline(data.get("pipeline", {})),
            presets=presets,
            power=PowerTable.from_presets(presets),
            qec=_parse_qec(data.get("qec", {})),
        )
    except ParameterError as exc:
        # physically invalid values are a config problem when they come
        # from the config file
        raise ConfigError(str(exc)) from None
    cfg.preset()  # the pipeline's preset name must resolve
    return cfg


def load_config(path):
    """Read and validate a TOML config file."""
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error in {path}: {exc}") from None
    return parse_config(data)


def default_config():
    """The packaged default configuration."""
    payload = resources.files("cryodec.data").joinpath("default.toml").read_bytes()
    return parse_config(tomllib.loads(payload.decode("utf-8")))


def build_decoder(cfg, w_in=None, w_rec=None, w_out=None, preset_name=None,
                  recurrence=None, rng=None, v_th=None):
    """Assemble a pipeline DecoderConfig from weight matrices.

    Defaults to the configured demo weights. With rng=None every crossbar is
    set to its exact compiled targets (fixed-resistor emulation); with an rng
    the devices are write-verify programmed and the per-layer ProgrammingReport
    dict is returned alongside. v_th overrides the configured comparator
    threshold (trained decoders calibrate it).
    """
    from . import crossbar as xb
    from . import pipeline as pl

    if w_in is None:
        w_in, w_rec, w_out = cfg.pipeline.w_in, cfg.pipeline.w_rec, cfg.pipeline.w_out
        if w_in is None:
            raise ConfigError("config has no [pipeline.demo_weights] and no weights were given")
    reports = {}
    layers = {}
    for name, w in (("input", w_in), ("recurrent", w_rec), ("output", w_out)):
        layers[name], reports[name] = xb.from_weights(
            w, cfg.crossbar.weight_scale, cfg.crossbar.weight_scheme, cfg.device,
            v_clamp=cfg.crossbar.v_clamp, rng=rng,
            tolerance=cfg.crossbar.program_tolerance,
            max_pulses=cfg.crossbar.program_max_pulses,
        )
    decoder_cfg = pl.DecoderConfig(
        input_xbar=layers["input"],
        recurrent_xbar=layers["recurrent"],
        output_xbar=layers["output"],
        preset=cfg.preset(preset_name),
        v_th=cfg.pipeline.v_th if v_th is None else float(v_th),
        tia_r_f=cfg.pipeline.tia_r_f,
        tia_v_ref=cfg.pipeline.tia_v_ref,
        v_logic_high=cfg.pipeline.v_logic_high,
        pulse_width=cfg.pipeline.pulse_width,
        recurrence_enabled=(cfg.pipeline.recurrence_enabled
                            if recurrence is None else recurrence),
        droop_rate=cfg.pipeline.droop_rate,
        read_noise=cfg.crossbar.read_noise,
    )
    return decoder_cfg, (reports if rng is not None else None)


def surrogate_spec(cfg, preset_name=None):
    """SurrogateSpec wired to the same constants the hardware pipeline uses."""
    from .qec import SurrogateSpec

    if cfg.qec.distance - 1 != cfg.pipeline.n_in:
        raise ConfigError(
            f"code distance {cfg.qec.distance} produces {cfg.qec.distance - 1} syndrome "
            f"bits but the pipeline has {cfg.pipeline.n_in} inputs"
        )
    preset = cfg.preset(preset_name)
    i_threshold = (cfg.pipeline.v_th - cfg.pipeline.tia_v_ref) / cfg.pipeline.tia_r_f
    return SurrogateSpec(
        n_in=cfg.pipeline.n_in,
        n_hidden=cfg.pipeline.n_hidden,
        n_out=cfg.pipeline.n_out,
        drive_high=cfg.crossbar.drive_high,
        k=cfg.crossbar.weight_scale,
        i_threshold=i_threshold,
        sigmoid=preset.sigmoid,
        loss_scale=cfg.qec.loss_scale,
    )
