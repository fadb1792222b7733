"""Density kernel backend, chosen at import.

The compiled ``_kernels`` extension is used when it was built; otherwise
(or with ``CURVATURA_BACKEND=python``) the numpy implementation is used.
Both expose ``divergence_density``, ``boundary_density`` and
``nodal_density`` with identical semantics.
"""

import os

from . import _kernels_py

ALGEBRAIC = _kernels_py.ALGEBRAIC
ARCTAN = _kernels_py.ARCTAN
TANH = _kernels_py.TANH
LIPSCHITZ = _kernels_py.LIPSCHITZ

_compiled = None
if os.environ.get("CURVATURA_BACKEND", "").lower() not in ("python", "numpy"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None

BACKENDS = {"python": _kernels_py}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled

BACKEND = "compiled" if _compiled is not None else "python"
_impl = BACKENDS[BACKEND]


def use_backend(name: str) -> None:
    """Switch the active backend ("compiled" or "python")."""
    global BACKEND, _impl
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    BACKEND, _impl = name, BACKENDS[name]


def divergence_density(value, grad, hess, third, level, k):
    return _impl.divergence_density(value, grad, hess, third, float(level), int(k))


def boundary_density(grad, hess, k):
    return _impl.boundary_density(grad, hess, int(k))


def nodal_density(value, grad, hess, variant):
    return _impl.nodal_density(value, grad, hess, int(variant))
