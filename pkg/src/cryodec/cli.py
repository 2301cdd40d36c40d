"""Command-line surface: binds a config file and a seed to experiments and
emits CSV/JSON artifacts with fixed names under the output directory.

Exit codes: 0 success, 1 usage, 2 config, 3 runtime. Errors print a single
machine-parseable line on stderr: ``error: <category>: <message>``.
"""

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import _kernels, config, pipeline, power, qec
from .crossbar import DifferentialCrossbar
from .device import MemristorParams, hysteresis_sweep
from .errors import ConfigError, CryodecError, DependencyError
from .qec import NoiseModel, RepetitionCode, trial_rng

WEIGHTS_FORMAT = "cryodec-weights-v1"
CROSSBARS_FORMAT = "cryodec-crossbars-v1"


def _load(config_path):
    if config_path is None:
        return config.default_config()
    return config.load_config(config_path)


def _outdir(out):
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _parse_pattern(pattern, n_in):
    tokens = [t for t in pattern.split(",")] if pattern else []
    if not tokens or tokens == [""]:
        raise click.BadParameter("pattern is empty", param_hint="--pattern")
    rounds = []
    for tok in tokens:
        if len(tok) != n_in or any(c not in "01" for c in tok):
            raise click.BadParameter(
                f"token {tok!r} is not {n_in} binary digits", param_hint="--pattern")
        rounds.append(np.array([int(c) for c in tok], dtype=np.int64))
    return rounds


config_opt = click.option("--config", "config_path", type=click.Path(), default=None,
                          help="TOML config file (default: built-in defaults)")
seed_opt = click.option("--seed", type=int, default=0, show_default=True,
                        help="master seed; fully determines all randomness")
out_opt = click.option("--out", default="out", show_default=True,
                       help="output directory")


@click.group()
def cli():
    """Desk-scale simulator of a memristor-crossbar recurrent decoder."""


@cli.command("backend")
def cmd_backend():
    """Print which kernel backend is active."""
    click.echo(_kernels.BACKEND)


@cli.command("program-sweep")
@config_opt
@seed_opt
@out_opt
@click.option("--pulses-down", type=int, default=100, show_default=True)
@click.option("--pulses-up", type=int, default=100, show_default=True)
@click.option("--repeats", type=int, default=10, show_default=True,
              help="independent sweeps averaged per pulse index")
@click.option("--noise-off", is_flag=True, help="zero both device noise terms")
def cmd_program_sweep(config_path, seed, out, pulses_down, pulses_up, repeats, noise_off):
    """Depression/potentiation pulse-train characterization sweep.

    Emits program_sweep.csv with the mean and standard deviation of the
    conductance trajectory over the repeats.
    """
    cfg = _load(config_path)
    params = cfg.device.noise_free() if noise_off else cfg.device
    if pulses_down < 0 or pulses_up < 0 or repeats < 1:
        raise click.BadParameter("pulse counts must be >= 0 and repeats >= 1")
    trajs = np.stack([
        hysteresis_sweep(params, pulses_down, pulses_up, params.v_switch, 1e-6,
                         trial_rng(seed, r))
        for r in range(repeats)
    ])
    mean = trajs.mean(axis=0)
    std = trajs.std(axis=0)
    out_path = _outdir(out) / "program_sweep.csv"
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pulse_index", "polarity", "mean_g_S", "std_g_S"])
        for idx in range(pulses_down + pulses_up):
            polarity = "-" if idx < pulses_down else "+"
            w.writerow([idx, polarity, repr(float(mean[idx])), repr(float(std[idx]))])
    click.echo(f"wrote {out_path}")


@cli.command("sigmoid-sweep")
@config_opt
@out_opt
@click.option("--preset", "preset_name", default=None,
              help="temperature preset (default: pipeline preset)")
@click.option("--i-min", type=float, default=-500e-6, show_default=True)
@click.option("--i-max", type=float, default=500e-6, show_default=True)
@click.option("--samples", type=int, default=1001, show_default=True)
def cmd_sigmoid_sweep(config_path, out, preset_name, i_min, i_max, samples):
    """DC transfer curve of the sigmoid circuit over the operating range."""
    cfg = _load(config_path)
    preset = cfg.preset(preset_name)
    from .analog import sigmoid_v

    currents = np.linspace(i_min, i_max, samples)
    out_path = _outdir(out) / f"sigmoid_sweep_{preset.name}.csv"
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["current_A", "voltage_V"])
        for i in currents:
            w.writerow([repr(float(i)), repr(sigmoid_v(float(i), preset.sigmoid))])
    click.echo(f"wrote {out_path}")


@cli.command("pulse-run")
@config_opt
@seed_opt
@out_opt
@click.option("--pattern", required=True,
              help="comma-separated rounds of input bits, e.g. '11,01'")
@click.option("--preset", "preset_name", default=None)
@click.option("--no-recurrence", is_flag=True, help="disable the recurrent latch path")
@click.option("--sample-period", type=float, default=1e-9, show_default=True,
              help="waveform sampling period in seconds")
def cmd_pulse_run(config_path, seed, out, pattern, preset_name, no_recurrence,
                  sample_period):
    """Run the demo decoder on a pulse pattern; emit trace and waveform CSVs."""
    cfg = _load(config_path)
    rounds = _parse_pattern(pattern, cfg.pipeline.n_in)
    decoder_cfg, _ = config.build_decoder(
        cfg, preset_name=preset_name,
        recurrence=False if no_recurrence else None)
    rng = np.random.default_rng(seed) if decoder_cfg.read_noise else None
    _, traces = pipeline.run(decoder_cfg, rounds, rng=rng)
    out_dir = _outdir(out)
    trace_path = out_dir / "pulse_trace.csv"
    wave_path = out_dir / "pulse_waveform.csv"
    pipeline.write_trace_csv(traces, trace_path)
    wave = pipeline.render_waveform(
        traces, decoder_cfg.preset, sample_period,
        pulse_width=decoder_cfg.pulse_width,
        v_logic_high=decoder_cfg.v_logic_high)
    wave.write_csv(wave_path)
    click.echo(f"wrote {trace_path}")
    click.echo(f"wrote {wave_path}")


@cli.command("power-report")
@config_opt
@out_opt
def cmd_power_report(config_path, out):
    """Static power per operating point: supply breakdown and exact total."""
    cfg = _load(config_path)
    out_path = _outdir(out) / "power_report.csv"
    power.write_power_csv(cfg.power, out_path)
    click.echo(f"wrote {out_path}")


@cli.group("qec")
def qec_group():
    """Error-correction chain: gen -> train -> compile -> eval."""


def _qec_noise(cfg, p, q):
    return NoiseModel(p_data=cfg.qec.p_data if p is None else p,
                      q_meas=cfg.qec.q_meas if q is None else q)


@qec_group.command("gen")
@config_opt
@seed_opt
@out_opt
@click.option("--trials", type=int, default=None, help="dataset size (default from config)")
@click.option("--p", type=float, default=None, help="data-qubit flip probability")
@click.option("--q", type=float, default=None, help="measurement flip probability")
def cmd_qec_gen(config_path, seed, out, trials, p, q):
    """Sample a labeled syndrome dataset to qec_dataset.csv."""
    cfg = _load(config_path)
    code = RepetitionCode(distance=cfg.qec.distance)
    noise = _qec_noise(cfg, p, q)
    n = cfg.qec.dataset_size if trials is None else trials
    dataset = qec.sample_dataset(code, noise, n, cfg.qec.rounds, seed)
    out_path = _outdir(out) / "qec_dataset.csv"
    qec.write_dataset_csv(dataset, out_path)
    click.echo(f"wrote {out_path}")


@qec_group.command("train")
@config_opt
@seed_opt
@out_opt
@click.option("--data", "data_path", type=click.Path(), default=None,
              help="dataset CSV (default: sample a fresh dataset from the seed)")
@click.option("--preset", "preset_name", default=None)
@click.option("--epochs", type=int, default=None)
def cmd_qec_train(config_path, seed, out, data_path, preset_name, epochs):
    """Train the hardware-mirroring surrogate; write qec_weights.json."""
    cfg = _load(config_path)
    code = RepetitionCode(distance=cfg.qec.distance)
    if data_path is not None:
        if not Path(data_path).exists():
            raise DependencyError(f"dataset file required but missing: {data_path}")
        dataset = qec.read_dataset_csv(data_path)
    else:
        noise = _qec_noise(cfg, None, None)
        dataset = qec.sample_dataset(code, noise, cfg.qec.dataset_size,
                                     cfg.qec.rounds, seed)
    spec = config.surrogate_spec(cfg, preset_name)
    tcfg = qec.TrainConfig(
        spec=spec,
        learning_rate=cfg.qec.learning_rate,
        epochs=cfg.qec.epochs if epochs is None else epochs,
        weight_noise_sigma=cfg.qec.weight_noise_sigma,
        seed=seed,
        w_clip=cfg.qec.w_clip,
        init_scale=cfg.qec.init_scale,
        restarts=cfg.qec.restarts,
        threshold_slack=cfg.qec.threshold_slack,
    )
    result = qec.train_surrogate(dataset, tcfg)
    preset = cfg.preset(preset_name)
    doc = {
        "format": WEIGHTS_FORMAT,
        "preset": preset.name,
        "k_S": cfg.crossbar.weight_scale,
        "distance": cfg.qec.distance,
        "rounds": cfg.qec.rounds,
        "i_threshold_A": result.i_threshold,
        "threshold_margin_A": result.margin,
        "train_error": result.train_error,
        "final_loss": result.history[-1] if result.history else None,
        "w_in": result.weights.w_in.tolist(),
        "w_rec": result.weights.w_rec.tolist(),
        "w_out": result.weights.w_out.tolist(),
    }
    out_path = _outdir(out) / "qec_weights.json"
    out_path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    click.echo(f"wrote {out_path}")
    click.echo(f"train error {result.train_error:.4f}, "
               f"threshold margin {result.margin:.3e} A")


def _read_weights(path):
    if not Path(path).exists():
        raise DependencyError(f"weights artifact required but missing: {path}")
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != WEIGHTS_FORMAT:
        raise CryodecError(f"{path} is not a {WEIGHTS_FORMAT} artifact")
    weights = qec.SurrogateWeights(
        w_in=np.array(doc["w_in"]), w_rec=np.array(doc["w_rec"]),
        w_out=np.array(doc["w_out"]))
    return weights, doc


@qec_group.command("compile")
@config_opt
@seed_opt
@out_opt
@click.option("--weights", "weights_path", type=click.Path(), default=None,
              help="weights artifact (default: <out>/qec_weights.json)")
@click.option("--exact", is_flag=True,
              help="skip write-verify and set exact conductances")
def cmd_qec_compile(config_path, seed, out, weights_path, exact):
    """Program the trained weights onto crossbars; write the artifact pair."""
    cfg = _load(config_path)
    out_dir = _outdir(out)
    weights_path = weights_path or (out_dir / "qec_weights.json")
    weights, doc = _read_weights(weights_path)
    rng = None if exact else np.random.default_rng(seed)
    v_th = None
    if "i_threshold_A" in doc:
        v_th = cfg.pipeline.tia_v_ref + cfg.pipeline.tia_r_f * doc["i_threshold_A"]
    decoder_cfg, reports = config.build_decoder(
        cfg, w_in=weights.w_in, w_rec=weights.w_rec, w_out=weights.w_out,
        preset_name=doc.get("preset"), rng=rng, v_th=v_th)

    report_path = out_dir / "qec_programming_report.csv"
    with open(report_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["layer", "row", "col", "polarity", "conductance_S", "pulses", "error"])
        if reports:
            for layer in ("input", "recurrent", "output"):
                for c in reports[layer].cells:
                    w.writerow([layer, c.row, c.col, c.polarity, repr(c.achieved),
                                c.pulses, repr(c.rel_error)])

    xdoc = {
        "format": CROSSBARS_FORMAT,
        "preset": decoder_cfg.preset.name,
        "v_th_V": decoder_cfg.v_th,
        "device": {
            "g_min_S": cfg.device.g_min, "g_max_S": cfg.device.g_max,
            "a_pot": cfg.device.a_pot, "a_dep": cfg.device.a_dep,
            "v_switch_V": cfg.device.v_switch,
            "sigma_c2c": cfg.device.sigma_c2c, "sigma_read": cfg.device.sigma_read,
        },
        "layers": {
            name: {"g_plus": xb.g_plus.tolist(), "g_minus": xb.g_minus.tolist()}
            for name, xb in (("input", decoder_cfg.input_xbar),
                             ("recurrent", decoder_cfg.recurrent_xbar),
                             ("output", decoder_cfg.output_xbar))
        },
    }
    xbar_path = out_dir / "qec_crossbars.json"
    xbar_path.write_text(json.dumps(xdoc, indent=2, sort_keys=True) + "\n")
    click.echo(f"wrote {report_path}")
    click.echo(f"wrote {xbar_path}")


def _decoder_from_crossbars(cfg, path):
    if not Path(path).exists():
        raise DependencyError(f"crossbar artifact required but missing: {path}")
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CROSSBARS_FORMAT:
        raise CryodecError(f"{path} is not a {CROSSBARS_FORMAT} artifact")
    dev = doc["device"]
    params = MemristorParams(
        g_min=dev["g_min_S"], g_max=dev["g_max_S"], a_pot=dev["a_pot"],
        a_dep=dev["a_dep"], v_switch=dev["v_switch_V"],
        sigma_c2c=dev["sigma_c2c"], sigma_read=dev["sigma_read"])

    def xb(name):
        layer = doc["layers"][name]
        return DifferentialCrossbar(
            params=params,
            g_plus=np.array(layer["g_plus"]), g_minus=np.array(layer["g_minus"]),
            v_clamp=cfg.crossbar.v_clamp)

    return pipeline.DecoderConfig(
        input_xbar=xb("input"), recurrent_xbar=xb("recurrent"), output_xbar=xb("output"),
        preset=cfg.preset(doc.get("preset")),
        v_th=doc.get("v_th_V", cfg.pipeline.v_th), tia_r_f=cfg.pipeline.tia_r_f,
        tia_v_ref=cfg.pipeline.tia_v_ref, v_logic_high=cfg.pipeline.v_logic_high,
        pulse_width=cfg.pipeline.pulse_width,
        recurrence_enabled=cfg.pipeline.recurrence_enabled,
        droop_rate=cfg.pipeline.droop_rate, read_noise=cfg.crossbar.read_noise)


@qec_group.command("eval")
@config_opt
@seed_opt
@out_opt
@click.option("--decoder", "decoder_kind", required=True,
              type=click.Choice(["lookup", "constant0", "oracle", "surrogate", "hardware"]))
@click.option("--trials", type=int, default=100000, show_default=True)
@click.option("--p", type=float, default=None)
@click.option("--q", type=float, default=None)
@click.option("--rounds", type=int, default=None)
@click.option("--weights", "weights_path", type=click.Path(), default=None)
@click.option("--crossbars", "crossbars_path", type=click.Path(), default=None)
def cmd_qec_eval(config_path, seed, out, decoder_kind, trials, p, q, rounds,
                 weights_path, crossbars_path):
    """Monte Carlo logical error rate; appends one row to qec_eval.csv."""
    cfg = _load(config_path)
    code = RepetitionCode(distance=cfg.qec.distance)
    noise = _qec_noise(cfg, p, q)
    n_rounds = cfg.qec.rounds if rounds is None else rounds
    out_dir = _outdir(out)

    if decoder_kind == "lookup":
        decoder = qec.LookupDecoder(code, noise, n_rounds)
    elif decoder_kind == "constant0":
        decoder = qec.constant_decoder(0)
    elif decoder_kind == "oracle":
        decoder = qec.oracle_decoder
    elif decoder_kind == "surrogate":
        weights, doc = _read_weights(weights_path or (out_dir / "qec_weights.json"))
        spec = config.surrogate_spec(cfg, doc.get("preset"))
        decoder = qec.surrogate_decoder(weights, spec,
                                        i_threshold=doc.get("i_threshold_A"))
    else:
        decoder_cfg = _decoder_from_crossbars(
            cfg, crossbars_path or (out_dir / "qec_crossbars.json"))
        decoder = qec.hardware_decoder(decoder_cfg)

    result = qec.evaluate_ler(decoder, code, noise, trials, seed, n_rounds,
                              name=decoder_kind)
    out_path = out_dir / "qec_eval.csv"
    qec.write_eval_csv([result], out_path)
    click.echo(f"wrote {out_path}")
    click.echo(f"{result.decoder}: ler={result.rate} "
               f"ci=[{result.ci_low}, {result.ci_high}] trials={result.n_trials}")


def main(argv=None):
    """Entry point with the documented exit-code contract."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        print("error: usage: aborted", file=sys.stderr)
        return 1
    except click.UsageError as exc:
        print(f"error: usage: {exc.format_message()}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except DependencyError as exc:
        print(f"error: dependency: {exc}", file=sys.stderr)
        return 3
    except CryodecError as exc:
        print(f"error: runtime: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # pragma: no cover - unexpected
        print(f"error: internal: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
