"""Information matrices, local scalings, and their long-run limits.

The empirical information of a design splits into a drift block scaled by
total observation time and a variance block scaled by the number of
observations; the two blocks converge at different rates, which is why
the local rescaling matrix is block diagonal with distinct factors.

For periodic models two limit regimes have closed expressions: vanishing
step size (integrals over one period) and a repeating offset pattern
(finite sums over one cycle).  Both are provided for cross-checking the
empirical sums.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import quadrature
from .errors import DomainError, PeriodicityError, SingularInformationError
from .increments import IncrementMoments, MomentCache
from .model import ModelSpec, Theta, eval_noise_var, eval_signal, grad_noise_var, grad_signal
from .sampling import TimeGrid, periodic_pattern_grid

__all__ = [
    "InformationBundle",
    "empirical_fisher",
    "separation_gaps",
    "periodic_limit_fisher",
    "periodic_limit_separation",
    "bundle_to_json",
    "bundle_from_json",
]


def _inv_sqrt_spd(matrix: np.ndarray, eig_floor: float, what: str) -> np.ndarray:
    """Inverse symmetric square root of an SPD matrix via eigendecomposition."""
    if matrix.size == 0:
        return np.zeros_like(matrix)
    sym = 0.5 * (matrix + matrix.T)
    eigvals, eigvecs = np.linalg.eigh(sym)
    if eigvals.min() < eig_floor:
        raise SingularInformationError(
            f"{what} has eigenvalue {eigvals.min()!r} below the floor {eig_floor!r}"
        )
    return (eigvecs * eigvals**-0.5) @ eigvecs.T


@dataclass(frozen=True)
class InformationBundle:
    """Per-unit information blocks with optional design size attached.

    ``drift_info`` is the drift block per unit time (p, p); ``var_info``
    is the variance block per observation (q, q).  ``total_time`` and
    ``n`` record the design the bundle was computed on (or attached to,
    for limit bundles) and are needed to form the local scalings.
    """

    drift_info: np.ndarray
    var_info: np.ndarray
    total_time: float | None
    n: int | None
    source: str
    eig_floor: float = 1e-12

    def __post_init__(self):
        jp = np.asarray(self.drift_info, dtype=float)
        jq = np.asarray(self.var_info, dtype=float)
        if jp.ndim != 2 or jp.shape[0] != jp.shape[1]:
            raise DomainError(f"drift_info must be square, got shape {jp.shape}")
        if jq.ndim != 2 or jq.shape[0] != jq.shape[1]:
            raise DomainError(f"var_info must be square, got shape {jq.shape}")
        if not (np.all(np.isfinite(jp)) and np.all(np.isfinite(jq))):
            raise DomainError("information blocks must be finite")
        jp.flags.writeable = False
        jq.flags.writeable = False
        object.__setattr__(self, "drift_info", jp)
        object.__setattr__(self, "var_info", jq)

    @property
    def p(self) -> int:
        return self.drift_info.shape[0]

    @property
    def q(self) -> int:
        return self.var_info.shape[0]

    @property
    def d(self) -> int:
        return self.p + self.q

    @property
    def joint(self) -> np.ndarray:
        """Block-diagonal (d, d) per-unit information matrix."""
        out = np.zeros((self.d, self.d))
        out[: self.p, : self.p] = self.drift_info
        out[self.p :, self.p :] = self.var_info
        return out

    @cached_property
    def joint_inverse(self) -> np.ndarray:
        out = np.zeros((self.d, self.d))
        if self.p:
            out[: self.p, : self.p] = np.linalg.inv(self._checked(self.drift_info, "drift block"))
        if self.q:
            out[self.p :, self.p :] = np.linalg.inv(self._checked(self.var_info, "variance block"))
        return out

    def _checked(self, block: np.ndarray, what: str) -> np.ndarray:
        eigvals = np.linalg.eigvalsh(0.5 * (block + block.T))
        if eigvals.min() < self.eig_floor:
            raise SingularInformationError(
                f"{what} has eigenvalue {eigvals.min()!r} below the floor {self.eig_floor!r}"
            )
        return block

    def _require_design(self) -> tuple[float, int]:
        if self.total_time is None or self.n is None:
            raise DomainError(
                "bundle carries no design size; attach a grid to form local scalings"
            )
        return float(self.total_time), int(self.n)

    @cached_property
    def drift_scaling(self) -> np.ndarray:
        """(T * drift_info)^(-1/2), the drift-block local scale."""
        total_time, _ = self._require_design()
        return _inv_sqrt_spd(total_time * self.drift_info, self.eig_floor, "drift block")

    @cached_property
    def var_scaling(self) -> np.ndarray:
        """(n * var_info)^(-1/2), the variance-block local scale."""
        _, n = self._require_design()
        return _inv_sqrt_spd(n * self.var_info, self.eig_floor, "variance block")

    @cached_property
    def local_scaling(self) -> np.ndarray:
        """Block-diagonal (d, d) matrix combining both block scalings."""
        out = np.zeros((self.d, self.d))
        out[: self.p, : self.p] = self.drift_scaling
        out[self.p :, self.p :] = self.var_scaling
        return out

    def with_design(self, grid: TimeGrid) -> "InformationBundle":
        return InformationBundle(
            self.drift_info, self.var_info, grid.total_time, grid.n, self.source, self.eig_floor
        )


def empirical_fisher(
    moments: IncrementMoments, grid: TimeGrid, eig_floor: float = 1e-12
) -> InformationBundle:
    """Finite-design information sums.

    Drift block:    (1/T) sum_i grad_mean_i grad_mean_i^T / var_i
    Variance block: (1/2n) sum_i grad_ln_var_i grad_ln_var_i^T
    """
    if moments.n != grid.n:
        raise DomainError(f"moments have n={moments.n}, grid has n={grid.n}")
    inv_var = 1.0 / moments.var
    drift = (moments.grad_mean.T * inv_var) @ moments.grad_mean / grid.total_time
    grad_ln = moments.grad_var * inv_var[:, None]
    var = grad_ln.T @ grad_ln / (2.0 * grid.n)
    return InformationBundle(drift, var, grid.total_time, grid.n, "empirical", eig_floor)


def separation_gaps(
    moments_a: IncrementMoments, moments_b: IncrementMoments, grid: TimeGrid
) -> tuple[float, float]:
    """Normalized squared moment gaps between two parameter points.

    Returns (drift_gap, var_gap):

        drift_gap = (1/T) sum_i (mean_i - mean_i')^2 / delay_i
        var_gap   = (1/n) sum_i (var_i  - var_i')^2  / delay_i^2

    Both are zero iff the points are observationally identical on this
    design; bounded-below gaps over separated points are what make the
    parameters identifiable.
    """
    if moments_a.n != grid.n or moments_b.n != grid.n:
        raise DomainError("moment lengths do not match the grid")
    dmean = moments_a.mean - moments_b.mean
    dvar = moments_a.var - moments_b.var
    drift_gap = float(np.sum(dmean * dmean / grid.delays) / grid.total_time)
    var_gap = float(np.sum(dvar * dvar / grid.delays**2) / grid.n)
    return drift_gap, var_gap


def periodic_limit_fisher(
    model: ModelSpec,
    theta: Theta,
    period: float,
    regime: str = "vanishing_step",
    offsets=None,
    grid: TimeGrid | None = None,
    eig_floor: float = 1e-12,
    probe_points: int = 64,
    periodicity_rtol: float = 1e-8,
) -> InformationBundle:
    """Long-run information for periodic models in either limit regime.

    ``vanishing_step``: both blocks as integrals over one period,

        drift block:    (1/P) int_0^P grad_f grad_f^T / sigma2 dt
        variance block: (1/2P) int_0^P grad_ln_sigma2 grad_ln_sigma2^T dt

    ``pattern``: exact finite sums over a single cycle of ``offsets``,
    which requires the within-period offset pattern of the design.

    The drift and variance functions are probed for period-P periodicity
    before anything is computed; non-periodic models are rejected.
    """
    if not (period > 0.0 and np.isfinite(period)):
        raise DomainError(f"period must be positive, got {period!r}")
    _check_periodicity(model, theta, period, probe_points, periodicity_rtol)

    if regime == "vanishing_step":
        p, q = model.p, model.q

        def drift_kernel(t):
            g = grad_signal(model, theta, t)
            return np.outer(g, g).ravel() / eval_noise_var(model, theta, t)

        def var_kernel(t):
            s2 = eval_noise_var(model, theta, t)
            g = grad_noise_var(model, theta, t) / s2
            return np.outer(g, g).ravel()

        drift = (
            quadrature.integrate_vec(drift_kernel, 0.0, period).reshape(p, p) / period
            if p
            else np.zeros((0, 0))
        )
        var = (
            quadrature.integrate_vec(var_kernel, 0.0, period).reshape(q, q) / (2.0 * period)
            if q
            else np.zeros((0, 0))
        )
        bundle = InformationBundle(drift, var, None, None, "limit:vanishing_step", eig_floor)
    elif regime == "pattern":
        if offsets is None:
            raise DomainError("the pattern regime requires the within-period offsets")
        cycle = periodic_pattern_grid(offsets, period, 1)
        m = MomentCache(model, cycle).moments(theta)
        nu = cycle.n
        inv_var = 1.0 / m.var
        drift = (m.grad_mean.T * inv_var) @ m.grad_mean / period
        grad_ln = m.grad_var * inv_var[:, None]
        var = grad_ln.T @ grad_ln / (2.0 * nu)
        bundle = InformationBundle(drift, var, None, None, "limit:pattern", eig_floor)
    else:
        raise DomainError(f"unknown regime {regime!r}")

    if grid is not None:
        bundle = bundle.with_design(grid)
    return bundle


def periodic_limit_separation(
    model: ModelSpec,
    theta_a: Theta,
    theta_b: Theta,
    period: float,
    probe_points: int = 64,
    periodicity_rtol: float = 1e-8,
) -> tuple[float, float]:
    """Vanishing-step limits of the separation gaps for periodic models.

        drift_gap = (1/P) int_0^P (f - f')^2 dt
        var_gap   = (1/P) int_0^P (sigma2 - sigma2')^2 dt
    """
    if not (period > 0.0 and np.isfinite(period)):
        raise DomainError(f"period must be positive, got {period!r}")
    _check_periodicity(model, theta_a, period, probe_points, periodicity_rtol)
    _check_periodicity(model, theta_b, period, probe_points, periodicity_rtol)

    def drift_kernel(t):
        return (eval_signal(model, theta_a, t) - eval_signal(model, theta_b, t)) ** 2

    def var_kernel(t):
        return (eval_noise_var(model, theta_a, t) - eval_noise_var(model, theta_b, t)) ** 2

    drift_gap = quadrature.integrate(drift_kernel, 0.0, period) / period
    var_gap = quadrature.integrate(var_kernel, 0.0, period) / period
    return float(drift_gap), float(var_gap)


def _check_periodicity(
    model: ModelSpec, theta: Theta, period: float, probe_points: int, rtol: float
) -> None:
    ts = np.linspace(0.0, period, probe_points, endpoint=False)
    f0 = np.array([eval_signal(model, theta, t) for t in ts])
    f1 = np.array([eval_signal(model, theta, t + period) for t in ts])
    s0 = np.array([eval_noise_var(model, theta, t) for t in ts])
    s1 = np.array([eval_noise_var(model, theta, t + period) for t in ts])
    scale_f = 1.0 + float(np.abs(f0).max(initial=0.0))
    scale_s = 1.0 + float(np.abs(s0).max(initial=0.0))
    if np.abs(f1 - f0).max(initial=0.0) > rtol * scale_f:
        raise PeriodicityError(
            f"drift is not periodic with period {period!r} on the probe lattice"
        )
    if np.abs(s1 - s0).max(initial=0.0) > rtol * scale_s:
        raise PeriodicityError(
            f"variance rate is not periodic with period {period!r} on the probe lattice"
        )


def bundle_to_json(bundle: InformationBundle) -> str:
    payload = {
        "drift_info": bundle.drift_info.tolist(),
        "var_info": bundle.var_info.tolist(),
        "total_time": bundle.total_time,
        "n": bundle.n,
        "source": bundle.source,
        "eig_floor": bundle.eig_floor,
    }
    return json.dumps(payload, sort_keys=True)


def bundle_from_json(text: str) -> InformationBundle:
    payload = json.loads(text)

    def block(rows):
        if not rows:
            return np.zeros((0, 0))
        return np.asarray(rows, dtype=float)

    return InformationBundle(
        block(payload["drift_info"]),
        block(payload["var_info"]),
        payload["total_time"],
        payload["n"],
        payload["source"],
        float(payload.get("eig_floor", 1e-12)),
    )
