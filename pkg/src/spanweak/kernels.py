"""Kernel selection: compiled Cython core when built, NumPy fallback otherwise.

Set SPANWEAK_PURE=1 to force the fallback (used by the benchmark and tests).
Both backends implement:

    forward_backward(b, mu, T, offsets) -> (gamma, xi_sum, loglik)

over a batch of independent chains delimited by `offsets` (see
spanweak._kernels_py.forward_backward for the full contract).
"""

import os

from . import _kernels_py

if os.environ.get("SPANWEAK_PURE"):
    forward_backward = _kernels_py.forward_backward
    USING_COMPILED = False
else:
    try:
        from ._core import forward_backward  # type: ignore[attr-defined]
        USING_COMPILED = True
    except ImportError:
        forward_backward = _kernels_py.forward_backward
        USING_COMPILED = False
