"""cryodec: behavioral simulator of a cryogenic memristor-crossbar recurrent
neural decoder, plus a repetition-code error-correction harness.

The numerical hot loops run on a compiled extension when available and fall
back to bit-identical pure-Python kernels otherwise; see backend_name().
"""

from . import _kernels
from .analog import (
    CurrentMemoryCell,
    SigmoidParams,
    TemperaturePreset,
    comparator,
    mem_latch,
    mem_release,
    sigmoid_v,
    tia,
    voltage_buffer,
)
from .config import SimConfig, build_decoder, default_config, load_config, surrogate_spec
from .crossbar import (
    DifferentialCrossbar,
    WeightSpec,
    compile_weights,
    decode_weights,
    differential_current,
    program_crossbar,
    vmm,
)
from .device import (
    MemristorParams,
    MemristorState,
    apply_pulse,
    apply_pulse_train,
    program_target,
    read_conductance,
)
from .pipeline import DecoderConfig, DecoderState, RoundTrace, decoder_step, render_waveform, run
from .power import PowerTable, energy_per_round, power_report
from .qec import (
    LookupDecoder,
    NoiseModel,
    RepetitionCode,
    SurrogateSpec,
    SurrogateWeights,
    SyndromeTrace,
    TrainConfig,
    TrainResult,
    evaluate_ler,
    ml_lookup_decoder,
    sample_trace,
    select_threshold,
    train_surrogate,
)

__version__ = "0.1.0"


def backend_name():
    """Which kernel backend this process is running: 'compiled' or 'python'."""
    return _kernels.BACKEND
