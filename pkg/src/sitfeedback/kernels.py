"""Backend selection for the integration kernels.

The compiled extension is used when it imports; otherwise, or when
``SITFEEDBACK_PURE_PYTHON=1`` is set, the pure-Python kernels take over.
"""

import os

from . import _pykernels

BACKENDS = {"python": _pykernels}

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None
else:
    BACKENDS["compiled"] = _compiled

if _compiled is not None and os.environ.get("SITFEEDBACK_PURE_PYTHON", "") in ("", "0"):
    active = _compiled
    BACKEND = "compiled"
else:
    active = _pykernels
    BACKEND = "python"

OK = _pykernels.OK
EVENT = _pykernels.EVENT
STEP_UNDERFLOW = _pykernels.STEP_UNDERFLOW
NONFINITE = _pykernels.NONFINITE
NEGATIVE = _pykernels.NEGATIVE
WATCH_K = _pykernels.WATCH_K
WATCH_EXTINCTION = _pykernels.WATCH_EXTINCTION


def get_backend(name=None):
    if name is None:
        return active
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
