"""Thin adaptive-quadrature wrappers with hard failure semantics.

Gauss-Kronrod adaptive integration from scipy does the work; this module
pins the tolerances used across the package and converts soft convergence
warnings into exceptions, because a silently inaccurate moment integral
poisons every likelihood built on top of it.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy import integrate as _integrate

from .errors import QuadratureError

DEFAULT_REL_TOL = 1e-10
DEFAULT_ABS_TOL = 1e-14
DEFAULT_MAX_SUBDIVISIONS = 4096


def integrate(
    fn,
    a: float,
    b: float,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = DEFAULT_ABS_TOL,
    max_subdivisions: int = DEFAULT_MAX_SUBDIVISIONS,
) -> float:
    """Integrate a scalar function over [a, b] or raise QuadratureError."""
    if not (np.isfinite(a) and np.isfinite(b) and a < b):
        raise QuadratureError("need finite a < b", a, b)
    with warnings.catch_warnings():
        warnings.simplefilter("error", _integrate.IntegrationWarning)
        try:
            value, err = _integrate.quad(
                fn, a, b, epsabs=abs_tol, epsrel=rel_tol, limit=max_subdivisions
            )
        except _integrate.IntegrationWarning as exc:
            raise QuadratureError(f"did not converge: {exc}", a, b) from exc
    if not np.isfinite(value):
        raise QuadratureError(f"non-finite integral value {value!r}", a, b)
    return float(value)


def integrate_vec(
    fn,
    a: float,
    b: float,
    rel_tol: float = DEFAULT_REL_TOL,
    abs_tol: float = DEFAULT_ABS_TOL,
    max_subdivisions: int = DEFAULT_MAX_SUBDIVISIONS,
) -> np.ndarray:
    """Integrate a vector-valued function componentwise over [a, b]."""
    if not (np.isfinite(a) and np.isfinite(b) and a < b):
        raise QuadratureError("need finite a < b", a, b)
    result = _integrate.quad_vec(
        fn, a, b, epsabs=abs_tol, epsrel=rel_tol, limit=max_subdivisions, full_output=True
    )
    value, _err, info = result
    if not info.success:
        raise QuadratureError("vector integrand did not converge", a, b)
    value = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(value)):
        raise QuadratureError("non-finite component in vector integral", a, b)
    return value
