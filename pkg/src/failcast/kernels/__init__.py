"""Hot numeric kernels with a selectable backend.

Two interchangeable implementations exist:

* ``numba`` -- ``@njit``-compiled fused loops (default when numba imports)
* ``numpy`` -- pure-numpy reference path

Select with the ``FAILCAST_BACKEND`` environment variable (``numba``,
``numpy`` or ``auto``) before the package is imported. Dense matrix products
are not routed through here; both backends use BLAS via ``@``.
"""

import os

from . import numpy_impl

_requested = os.environ.get("FAILCAST_BACKEND", "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"FAILCAST_BACKEND must be 'auto', 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    _impl = numpy_impl
    BACKEND = "numpy"
else:
    try:
        from . import numba_impl as _impl

        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        _impl = numpy_impl
        BACKEND = "numpy"

leaky_relu_forward = _impl.leaky_relu_forward
leaky_relu_backward = _impl.leaky_relu_backward
batchnorm_train_forward = _impl.batchnorm_train_forward
batchnorm_infer_forward = _impl.batchnorm_infer_forward
batchnorm_backward = _impl.batchnorm_backward
layernorm_forward = _impl.layernorm_forward
layernorm_backward = _impl.layernorm_backward
adam_update = _impl.adam_update
pinball_loss_sum = _impl.pinball_loss_sum
pinball_grad = _impl.pinball_grad
softmax_rows = _impl.softmax_rows
softmax_rows_backward = _impl.softmax_rows_backward
pairwise_sq_dists = _impl.pairwise_sq_dists

KERNEL_NAMES = (
    "leaky_relu_forward",
    "leaky_relu_backward",
    "batchnorm_train_forward",
    "batchnorm_infer_forward",
    "batchnorm_backward",
    "layernorm_forward",
    "layernorm_backward",
    "adam_update",
    "pinball_loss_sum",
    "pinball_grad",
    "softmax_rows",
    "softmax_rows_backward",
    "pairwise_sq_dists",
)


def get_impl(name: str):
    """Return a named implementation module ('numpy' or 'numba').

    Used by the cross-backend tests and the kernel benchmark; raises
    ImportError if the numba path is requested but unavailable.
    """
    if name == "numpy":
        return numpy_impl
    if name == "numba":
        from . import numba_impl

        return numba_impl
    raise ValueError(f"unknown backend {name!r}")
