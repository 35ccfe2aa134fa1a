"""Hot numeric kernels with twin numba and pure-numpy implementations.

The backend is picked once at import time from the ``HKPROTEST_KERNELS``
environment variable:

* ``auto`` (default): numba when importable, numpy otherwise;
* ``numba``: require the jitted backend, raise if numba is missing;
* ``numpy``: force the pure-numpy reference backend.

Both backends implement the same contracts and are cross-checked in the test
suite; ``benchmarks/bench_kernels.py`` times them side by side.  Within one
backend every kernel is deterministic: accumulations run in a fixed order
(compensated loops under numba, ``math.fsum`` / sequential ufuncs under
numpy), so repeated runs are bit-identical.
"""

import os

_choice = os.environ.get("HKPROTEST_KERNELS", "auto").strip().lower()
if _choice not in {"auto", "numba", "numpy"}:
    raise ValueError(
        f"HKPROTEST_KERNELS must be one of auto|numba|numpy, got {_choice!r}"
    )

if _choice == "numpy":
    from . import numpy_backend as _impl

    BACKEND = "numpy"
else:
    try:
        from . import numba_backend as _impl

        BACKEND = "numba"
    except ImportError:
        if _choice == "numba":
            raise
        from . import numpy_backend as _impl

        BACKEND = "numpy"

stable_sum = _impl.stable_sum
stable_dot = _impl.stable_dot
group_demean = _impl.group_demean
batch_simple_ols = _impl.batch_simple_ols


def load_backend(name):
    """Import a specific backend module (used by tests and benchmarks)."""
    if name == "numpy":
        from . import numpy_backend

        return numpy_backend
    if name == "numba":
        from . import numba_backend

        return numba_backend
    raise ValueError(f"unknown kernel backend {name!r}")
