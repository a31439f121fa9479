"""Backend selection for the convolution/pooling hot loops.

The ``COLLM_KERNELS`` environment variable picks the implementation:

* ``auto`` (default) - numba @njit kernels when numba imports, else the
  pure-numpy fallback;
* ``numba`` - require the numba kernels, fail loudly if unavailable;
* ``numpy`` - force the pure-numpy fallback.

Both paths satisfy the same contracts and tolerances; floating-point
summation order differs between them, so artifacts are byte-reproducible
per backend, not across backends. ``benchmarks/bench_kernels.py``
compares the two.
"""

from __future__ import annotations

import os

from collm.errors import ConfigError

_choice = os.environ.get("COLLM_KERNELS", "auto").strip().lower()

if _choice not in ("auto", "numba", "numpy"):
    raise ConfigError(
        f"COLLM_KERNELS={_choice!r} is not one of 'auto', 'numba', 'numpy'"
    )

if _choice == "numpy":
    from collm.kernels import numpy_backend as _backend
elif _choice == "numba":
    from collm.kernels import numba_backend as _backend
else:
    try:
        from collm.kernels import numba_backend as _backend
    except ImportError:
        from collm.kernels import numpy_backend as _backend

BACKEND = _backend.NAME

conv1d_forward = _backend.conv1d_forward
conv1d_backward_input = _backend.conv1d_backward_input
conv1d_backward_weight = _backend.conv1d_backward_weight
maxpool1d_forward = _backend.maxpool1d_forward
maxpool1d_backward = _backend.maxpool1d_backward
