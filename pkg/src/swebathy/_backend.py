"""Select the time-stepping kernels: compiled core if built, NumPy otherwise.

Set ``SWEBATHY_BACKEND=python`` to force the NumPy fallback.
"""

import os

from . import _kernels_py

try:
    from . import _kernels
except ImportError:  # extension not built
    _kernels = None

HAVE_COMPILED = _kernels is not None

if HAVE_COMPILED and os.environ.get("SWEBATHY_BACKEND", "").lower() != "python":
    BACKEND = "compiled"
    forward_rk4 = _kernels.forward_rk4
    adjoint_rk4 = _kernels.adjoint_rk4
else:
    BACKEND = "python"
    forward_rk4 = _kernels_py.forward_rk4
    adjoint_rk4 = _kernels_py.adjoint_rk4


def get_kernels(name=None):
    """Return ``(forward_rk4, adjoint_rk4)`` for ``name`` in {"python", "compiled"}."""
    if name is None:
        return forward_rk4, adjoint_rk4
    if name == "python":
        return _kernels_py.forward_rk4, _kernels_py.adjoint_rk4
    if name == "compiled":
        if not HAVE_COMPILED:
            raise ImportError("compiled kernels are not built; reinstall with Cython available")
        return _kernels.forward_rk4, _kernels.adjoint_rk4
    raise ValueError(f"unknown backend {name!r}")
