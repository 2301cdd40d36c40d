"""Kernel backend selection.

The hot loops (pulse trains, write-verify, crossbar currents, recurrent round
pipeline) exist twice: a compiled Cython core and a pure-Python fallback with
bit-identical semantics. The compiled core is preferred when built; set
``CRYODEC_BACKEND=python`` or ``CRYODEC_BACKEND=compiled`` to force one.
"""

import os

from . import _pykernels

_requested = os.environ.get("CRYODEC_BACKEND", "auto").strip().lower()

if _requested in ("auto", ""):
    try:
        from . import _cykernels as _impl
    except ImportError:
        _impl = _pykernels
elif _requested == "python":
    _impl = _pykernels
elif _requested == "compiled":
    from . import _cykernels as _impl
else:
    raise ValueError(f"unknown CRYODEC_BACKEND value: {_requested!r}")

BACKEND = _impl.BACKEND

pulse_train = _impl.pulse_train
program_target = _impl.program_target
vmm = _impl.vmm
run_rounds = _impl.run_rounds

# Scalar analog-block helper: always the Python version here; the compiled
# twin is exercised indirectly through run_rounds and checked for equality in
# the backend tests.
sigmoid_scalar = _pykernels.sigmoid_scalar
