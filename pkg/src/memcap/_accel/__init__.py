"""Backend selection for the time-stepping hot loops.

The time-domain integrator spends essentially all of its time in two
routines: the exponential-trapezoid sweep of the light field along z at
fixed time, and the RK4 update of the spin field.  Both exist in two
interchangeable implementations:

  numba_kernels  explicit loops compiled by numba (default when available)
  numpy_kernels  the same algorithm in plain numpy

MEMCAP_BACKEND=numpy or MEMCAP_BACKEND=numba forces a choice; unset, numba
is used when importable and numpy otherwise.  Both expose run_storage and
run_retrieval with identical signatures and bit-comparable semantics (the
backends differ only in summation order, at rounding level).
"""

import os

_choice = os.environ.get("MEMCAP_BACKEND", "").strip().lower()
if _choice not in ("", "numba", "numpy"):
    raise RuntimeError(
        f"MEMCAP_BACKEND must be 'numba' or 'numpy', got {_choice!r}"
    )

if _choice == "numpy":
    from . import numpy_kernels as kernels
elif _choice == "numba":
    from . import numba_kernels as kernels
else:
    try:
        from . import numba_kernels as kernels
    except ImportError:
        from . import numpy_kernels as kernels

run_storage = kernels.run_storage
run_retrieval = kernels.run_retrieval


def backend_name() -> str:
    return kernels.__name__.rsplit(".", 1)[-1].replace("_kernels", "")
