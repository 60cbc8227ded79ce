"""Backend dispatch for the hot numeric kernels.

``XLFT_BACKEND`` picks the implementation:

* ``auto`` (default) — numba when importable, else numpy
* ``numba`` — require the jit backend
* ``numpy`` — force the pure-numpy fallback

``benchmarks/bench_backends.py`` times the two side by side.
"""

import os

from ..errors import ConfigError

_requested = os.environ.get("XLFT_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ConfigError(f"XLFT_BACKEND must be auto|numba|numpy, got {_requested!r}")

if _requested in ("auto", "numba"):
    try:
        from . import numba_backend as _impl
    except ImportError:
        if _requested == "numba":
            raise ConfigError("XLFT_BACKEND=numba but numba is not importable")
        from . import numpy_backend as _impl
else:
    from . import numpy_backend as _impl

BACKEND = _impl.NAME

softmax_rows = _impl.softmax_rows
softmax_rows_backward = _impl.softmax_rows_backward
log_softmax_rows = _impl.log_softmax_rows
log_softmax_rows_backward = _impl.log_softmax_rows_backward
layernorm_rows = _impl.layernorm_rows
layernorm_rows_backward = _impl.layernorm_rows_backward
adam_update = _impl.adam_update
embedding_grad = _impl.embedding_grad
