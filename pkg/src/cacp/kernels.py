"""Backend selection for the hot kernels.

The compiled extension is used when it was built and importable; setting
``CACP_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

from cacp import _pykernels

OK = _pykernels.OK
TIE = _pykernels.TIE
NOT_CONVERGED = _pykernels.NOT_CONVERGED

_impl = _pykernels
BACKEND = "python"
if not os.environ.get("CACP_PURE_PYTHON"):
    try:
        from cacp import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels

lagrange_weights = _impl.lagrange_weights
stencil_entries = _impl.stencil_entries
clover_closest = _impl.clover_closest


def available_backends():
    """Return ``{name: module}`` for every importable kernel backend."""
    out = {"python": _pykernels}
    try:
        from cacp import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
