"""Per-interval Gaussian moments of the observed increments.

Over the i-th interval the increment is Gaussian with mean equal to the
drift integral and variance equal to the variance-rate integral:

    mean_i(alpha)     = integral of f(alpha, t)      over [t_{i-1}, t_i]
    var_i(beta)       = integral of sigma2(beta, t)  over [t_{i-1}, t_i]

together with their parameter gradients.  These four arrays are the whole
sufficient description of the experiment, so the cache below is the single
hot path everything else (likelihood, information, estimation, studies)
runs through.

Closed-form routes: a drift that is linear in alpha reduces to a fixed
matrix of basis integrals, and a known or scale-parameterized variance
reduces to a fixed vector of profile integrals, both computed once per
grid.  Families without exact antiderivatives fall back to adaptive
quadrature per interval; ``force_quadrature=True`` forces the fallback on
every family, which is how the two routes are checked against each other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import quadrature
from .errors import EvaluationError, NoiseFloorViolation, QuadratureError
from .model import (
    GeneralNoise,
    GeneralSignal,
    KnownNoise,
    LinearSignal,
    ModelSpec,
    ScaledNoise,
    Theta,
)
from .sampling import TimeGrid

__all__ = ["IncrementMoments", "MomentCache", "increment_moments", "log_variance_terms"]


@dataclass(frozen=True)
class IncrementMoments:
    """Increment means, variances, and their parameter gradients.

    Attributes
    ----------
    mean : ndarray, shape (n,)
    var : ndarray, shape (n,)
        Strictly positive.
    grad_mean : ndarray, shape (n, p)
    grad_var : ndarray, shape (n, q)
    """

    mean: np.ndarray
    var: np.ndarray
    grad_mean: np.ndarray
    grad_var: np.ndarray

    def __post_init__(self):
        n = self.mean.shape[0]
        if self.var.shape != (n,) or self.grad_mean.shape[0] != n or self.grad_var.shape[0] != n:
            raise EvaluationError("inconsistent moment array shapes")
        for arr in (self.mean, self.var, self.grad_mean, self.grad_var):
            arr.flags.writeable = False

    @property
    def n(self) -> int:
        return self.mean.shape[0]


def log_variance_terms(moments: IncrementMoments) -> tuple[np.ndarray, np.ndarray]:
    """Return (ln var_i, grad of ln var_i) with shapes (n,) and (n, q)."""
    ln_var = np.log(moments.var)
    grad_ln = moments.grad_var / moments.var[:, None]
    return ln_var, grad_ln


class MomentCache:
    """Grid-bound moment evaluator for one model.

    Precomputes whatever is parameter-independent for the bound grid (basis
    integrals for linear drifts, profile integrals for known or scaled
    variances) so that ``moments(theta)`` costs a few matrix products.
    """

    def __init__(
        self,
        model: ModelSpec,
        grid: TimeGrid,
        rel_tol: float = quadrature.DEFAULT_REL_TOL,
        abs_tol: float = quadrature.DEFAULT_ABS_TOL,
        force_quadrature: bool = False,
    ):
        self.model = model
        self.grid = grid
        self.rel_tol = rel_tol
        self.abs_tol = abs_tol
        self.force_quadrature = force_quadrature
        self._basis_integrals: np.ndarray | None = None
        self._profile_integrals: np.ndarray | None = None
        if not force_quadrature:
            if isinstance(model.signal, LinearSignal):
                self._basis_integrals = model.signal.basis_integral_matrix(
                    grid.starts, grid.ends
                )
                if not np.all(np.isfinite(self._basis_integrals)):
                    raise EvaluationError("non-finite basis integral on the grid")
            if isinstance(model.noise, (KnownNoise, ScaledNoise)):
                self._profile_integrals = np.asarray(
                    model.noise.profile.integral(grid.starts, grid.ends), dtype=float
                )
                if not np.all(np.isfinite(self._profile_integrals)):
                    raise EvaluationError("non-finite variance profile integral on the grid")

    # -- drift block --------------------------------------------------------

    def signal_basis_integrals(self) -> np.ndarray:
        """Exact basis integrals (n, p); only linear drifts have them."""
        if self._basis_integrals is None:
            raise EvaluationError("drift family has no precomputed basis integrals")
        return self._basis_integrals

    def noise_profile_integrals(self) -> np.ndarray:
        """Exact profile integrals (n,); known/scaled variances only."""
        if self._profile_integrals is None:
            raise EvaluationError("noise family has no precomputed profile integrals")
        return self._profile_integrals

    def _signal_moments(self, alpha: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        model = self.model
        if self._basis_integrals is not None:
            grad = self._basis_integrals
            return grad @ alpha, grad
        sig = model.signal
        if (
            not self.force_quadrature
            and isinstance(sig, GeneralSignal)
            and sig.integral_fn is not None
            and sig.grad_integral_fn is not None
        ):
            mean = np.array(
                [float(sig.integral_fn(alpha, a, b)) for a, b in self._intervals()]
            )
            grad = np.array(
                [
                    np.asarray(sig.grad_integral_fn(alpha, a, b), dtype=float).reshape(-1)
                    for a, b in self._intervals()
                ]
            ).reshape(self.grid.n, model.p)
            return mean, grad
        mean = np.empty(self.grid.n)
        grad = np.empty((self.grid.n, model.p))
        for i, (a, b) in enumerate(self._intervals()):
            try:
                mean[i] = quadrature.integrate(
                    lambda t: sig.value(alpha, t), a, b, self.rel_tol, self.abs_tol
                )
                if model.p:
                    grad[i] = quadrature.integrate_vec(
                        lambda t: sig.grad(alpha, t), a, b, self.rel_tol, self.abs_tol
                    )
            except QuadratureError as exc:
                raise QuadratureError(f"drift moment on interval {i}: {exc}") from exc
        return mean, grad

    # -- noise block --------------------------------------------------------

    def _noise_moments(self, beta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        model = self.model
        if self._profile_integrals is not None:
            g = self._profile_integrals
            if isinstance(model.noise, KnownNoise):
                return g.copy(), np.empty((self.grid.n, 0))
            return float(beta[0]) * g, g[:, None].copy()
        noi = model.noise
        if (
            not self.force_quadrature
            and isinstance(noi, GeneralNoise)
            and noi.integral_fn is not None
            and noi.grad_integral_fn is not None
        ):
            var = np.array([float(noi.integral_fn(beta, a, b)) for a, b in self._intervals()])
            grad = np.array(
                [
                    np.asarray(noi.grad_integral_fn(beta, a, b), dtype=float).reshape(-1)
                    for a, b in self._intervals()
                ]
            ).reshape(self.grid.n, model.q)
            return var, grad
        var = np.empty(self.grid.n)
        grad = np.empty((self.grid.n, model.q))
        for i, (a, b) in enumerate(self._intervals()):
            try:
                var[i] = quadrature.integrate(
                    lambda t: noi.value(beta, t), a, b, self.rel_tol, self.abs_tol
                )
                if model.q:
                    grad[i] = quadrature.integrate_vec(
                        lambda t: noi.grad(beta, t), a, b, self.rel_tol, self.abs_tol
                    )
            except QuadratureError as exc:
                raise QuadratureError(f"variance moment on interval {i}: {exc}") from exc
        return var, grad

    def _intervals(self):
        return zip(self.grid.starts, self.grid.ends)

    # -- public entry -------------------------------------------------------

    def moments(self, theta: Theta) -> IncrementMoments:
        if theta.alpha.size != self.model.p or theta.beta.size != self.model.q:
            raise EvaluationError(
                f"theta dims ({theta.alpha.size}, {theta.beta.size}) do not match the "
                f"model ({self.model.p}, {self.model.q})"
            )
        mean, grad_mean = self._signal_moments(theta.alpha)
        var, grad_var = self._noise_moments(theta.beta)
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(grad_mean))):
            raise EvaluationError("non-finite drift moment")
        if not (np.all(np.isfinite(var)) and np.all(np.isfinite(grad_var))):
            raise EvaluationError("non-finite variance moment")
        floor = self.model.sigma2_floor * self.grid.delays
        if np.any(var <= floor):
            i = int(np.argmax(var <= floor))
            raise NoiseFloorViolation(
                f"increment variance {float(var[i])!r} on interval {i} is at or "
                f"below floor*delay = {float(floor[i])!r}"
            )
        return IncrementMoments(mean, var, grad_mean, grad_var)


def increment_moments(
    model: ModelSpec,
    theta: Theta,
    grid: TimeGrid,
    rel_tol: float = quadrature.DEFAULT_REL_TOL,
    abs_tol: float = quadrature.DEFAULT_ABS_TOL,
    force_quadrature: bool = False,
) -> IncrementMoments:
    """One-shot convenience wrapper around :class:`MomentCache`."""
    cache = MomentCache(model, grid, rel_tol, abs_tol, force_quadrature)
    return cache.moments(theta)
