"""Select the SA inner-loop implementation at import time.

The compiled extension is used when it was built and ``RRSA_PURE_PYTHON`` is
unset; otherwise everything runs on the numpy fallback.
"""

import os

from . import _pykernels

sa_loop_affine = None
BACKEND = "python"

if not os.environ.get("RRSA_PURE_PYTHON"):
    try:
        from ._ckernels import sa_loop_affine
    except ImportError:  # extension not built
        sa_loop_affine = None
    else:
        BACKEND = "compiled"

sa_loop_python = _pykernels.sa_loop

FIELD_KINDS = {"quantile": 0, "linear": 1}


def available():
    return ("compiled", "python") if sa_loop_affine is not None else ("python",)
