"""Drift and noise parameter families, parameter boxes, and regularity checks.

The observation model is built from two time-varying ingredients: a drift
rate f(alpha, t) and a noise variance rate sigma2(beta, t).  Families bundle
the function with its parameter gradient and, where available, exact
antiderivatives so interval moments never need numerical quadrature.

Built-in families cover drifts that are linear in alpha over a fixed time
basis, and variances that are a known profile or a profile scaled by a
single positive parameter.  Arbitrary callables are admitted through the
general families; those fall back to quadrature for interval moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DomainError,
    EvaluationError,
    NoiseFloorViolation,
    ValidationFailure,
)

__all__ = [
    "ConstantFn",
    "CosineFn",
    "SineFn",
    "PeriodicStepFn",
    "Profile",
    "constant_profile",
    "LinearSignal",
    "GeneralSignal",
    "KnownNoise",
    "ScaledNoise",
    "GeneralNoise",
    "ModelSpec",
    "ParameterSpace",
    "Theta",
    "eval_signal",
    "grad_signal",
    "eval_noise_var",
    "grad_noise_var",
    "hess_noise_var",
    "ValidationConfig",
    "ValidationReport",
    "validate_assumptions",
]

_TWO_PI = 2.0 * math.pi


# ---------------------------------------------------------------------------
# time basis atoms: callables with exact antiderivatives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConstantFn:
    """The constant function 1."""

    def __call__(self, t):
        return np.ones_like(np.asarray(t, dtype=float))

    def integral(self, a, b):
        return np.asarray(b, dtype=float) - np.asarray(a, dtype=float)


@dataclass(frozen=True)
class CosineFn:
    """cos(2*pi*frequency*t + phase)."""

    frequency: float
    phase: float = 0.0

    def __post_init__(self):
        if not (self.frequency > 0.0 and np.isfinite(self.frequency)):
            raise DomainError(f"frequency must be positive, got {self.frequency!r}")

    def __call__(self, t):
        return np.cos(_TWO_PI * self.frequency * np.asarray(t, dtype=float) + self.phase)

    def integral(self, a, b):
        w = _TWO_PI * self.frequency
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return (np.sin(w * b + self.phase) - np.sin(w * a + self.phase)) / w


@dataclass(frozen=True)
class SineFn:
    """sin(2*pi*frequency*t)."""

    frequency: float

    def __post_init__(self):
        if not (self.frequency > 0.0 and np.isfinite(self.frequency)):
            raise DomainError(f"frequency must be positive, got {self.frequency!r}")

    def __call__(self, t):
        return np.sin(_TWO_PI * self.frequency * np.asarray(t, dtype=float))

    def integral(self, a, b):
        w = _TWO_PI * self.frequency
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return (np.cos(w * a) - np.cos(w * b)) / w


@dataclass(frozen=True)
class PeriodicStepFn:
    """Piecewise-constant periodic function.

    One period of length ``period`` is split into ``len(levels)`` equal
    cells; the function takes ``levels[k]`` on cell k.
    """

    levels: tuple[float, ...]
    period: float

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        object.__setattr__(self, "levels", levels)
        if len(levels) == 0:
            raise DomainError("levels must be non-empty")
        if not (self.period > 0.0 and np.isfinite(self.period)):
            raise DomainError(f"period must be positive, got {self.period!r}")
        if not all(np.isfinite(v) for v in levels):
            raise DomainError("levels must be finite")

    def _cell_width(self) -> float:
        return self.period / len(self.levels)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        s = np.mod(t, self.period)
        k = np.minimum((s / self._cell_width()).astype(int), len(self.levels) - 1)
        return np.asarray(self.levels)[k]

    def _antiderivative(self, t):
        t = np.asarray(t, dtype=float)
        w = self._cell_width()
        lv = np.asarray(self.levels)
        per_period = float(lv.sum() * w)
        j = np.floor(t / self.period)
        s = t - j * self.period
        k = np.minimum((s / w).astype(int), len(self.levels) - 1)
        head = np.concatenate(([0.0], np.cumsum(lv) * w))
        return j * per_period + head[k] + lv[k] * (s - k * w)

    def integral(self, a, b):
        return self._antiderivative(b) - self._antiderivative(a)


@dataclass(frozen=True)
class Profile:
    """Affine combination offset + sum_k coefs[k] * atoms[k](t).

    Used for known time weights inside noise variances and as a convenience
    for building test drifts.  Carries exact interval integrals.
    """

    offset: float = 0.0
    coefs: tuple[float, ...] = ()
    atoms: tuple = ()

    def __post_init__(self):
        if len(self.coefs) != len(self.atoms):
            raise DomainError("coefs and atoms must have equal length")
        object.__setattr__(self, "coefs", tuple(float(c) for c in self.coefs))
        object.__setattr__(self, "atoms", tuple(self.atoms))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full_like(t, self.offset, dtype=float)
        for c, atom in zip(self.coefs, self.atoms):
            out = out + c * atom(t)
        return out

    def integral(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        out = self.offset * (b - a)
        for c, atom in zip(self.coefs, self.atoms):
            out = out + c * atom.integral(a, b)
        return out


def constant_profile(value: float) -> Profile:
    return Profile(offset=float(value))


# ---------------------------------------------------------------------------
# drift families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearSignal:
    """Drift linear in its parameters: f(alpha, t) = sum_j alpha_j * basis[j](t).

    The gradient in alpha is the basis vector itself, and interval moments
    reduce to exact basis integrals, so everything downstream is closed
    form for this family.
    """

    basis: tuple

    def __post_init__(self):
        object.__setattr__(self, "basis", tuple(self.basis))
        if len(self.basis) == 0:
            raise DomainError("basis must be non-empty")

    @property
    def p(self) -> int:
        return len(self.basis)

    def value(self, alpha: np.ndarray, t: float) -> float:
        return float(sum(a * float(np.asarray(b(t))) for a, b in zip(alpha, self.basis)))

    def grad(self, alpha: np.ndarray, t: float) -> np.ndarray:
        return np.array([float(np.asarray(b(t))) for b in self.basis])

    def basis_matrix(self, ts: np.ndarray) -> np.ndarray:
        """Basis values at many instants, shape (len(ts), p)."""
        ts = np.asarray(ts, dtype=float)
        return np.column_stack([np.broadcast_to(b(ts), ts.shape) for b in self.basis])

    def basis_integral_matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Exact integrals of each basis atom over intervals, shape (n, p)."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return np.column_stack(
            [np.broadcast_to(atom.integral(a, b), a.shape) for atom in self.basis]
        )


@dataclass(frozen=True)
class GeneralSignal:
    """Drift given by arbitrary callables.

    value_fn(alpha, t) -> float and grad_fn(alpha, t) -> (p,) are required.
    Exact interval integrals may be supplied through integral_fn(alpha, a, b)
    and grad_integral_fn(alpha, a, b); when absent, moments are computed by
    adaptive quadrature.
    """

    p: int
    value_fn: object
    grad_fn: object
    integral_fn: object = None
    grad_integral_fn: object = None

    def __post_init__(self):
        if self.p < 0:
            raise DomainError(f"p must be >= 0, got {self.p}")

    def value(self, alpha, t):
        return float(self.value_fn(alpha, t))

    def grad(self, alpha, t):
        g = np.asarray(self.grad_fn(alpha, t), dtype=float).reshape(-1)
        if g.size != self.p:
            raise EvaluationError(f"drift gradient has size {g.size}, expected {self.p}")
        return g


# ---------------------------------------------------------------------------
# noise families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KnownNoise:
    """Fully known variance rate sigma2(t); no noise parameters (q = 0)."""

    profile: Profile

    @property
    def q(self) -> int:
        return 0

    def value(self, beta, t):
        return float(np.asarray(self.profile(t)))

    def grad(self, beta, t):
        return np.zeros(0)

    def hess(self, beta, t):
        return np.zeros((0, 0))


@dataclass(frozen=True)
class ScaledNoise:
    """Variance rate beta * profile(t) with a single positive scale (q = 1)."""

    profile: Profile

    @property
    def q(self) -> int:
        return 1

    def value(self, beta, t):
        return float(beta[0]) * float(np.asarray(self.profile(t)))

    def grad(self, beta, t):
        return np.array([float(np.asarray(self.profile(t)))])

    def hess(self, beta, t):
        return np.zeros((1, 1))


@dataclass(frozen=True)
class GeneralNoise:
    """Variance rate given by arbitrary callables.

    value_fn(beta, t) -> float and grad_fn(beta, t) -> (q,) are required;
    hess_fn(beta, t) -> (q, q) is optional (finite differences of grad_fn
    otherwise).  integral_fn / grad_integral_fn enable closed-form moments.
    """

    q: int
    value_fn: object
    grad_fn: object
    hess_fn: object = None
    integral_fn: object = None
    grad_integral_fn: object = None

    def __post_init__(self):
        if self.q < 0:
            raise DomainError(f"q must be >= 0, got {self.q}")

    def value(self, beta, t):
        return float(self.value_fn(beta, t))

    def grad(self, beta, t):
        g = np.asarray(self.grad_fn(beta, t), dtype=float).reshape(-1)
        if g.size != self.q:
            raise EvaluationError(f"variance gradient has size {g.size}, expected {self.q}")
        return g

    def hess(self, beta, t):
        if self.hess_fn is not None:
            h = np.asarray(self.hess_fn(beta, t), dtype=float)
            if h.shape != (self.q, self.q):
                raise EvaluationError(
                    f"variance hessian has shape {h.shape}, expected {(self.q, self.q)}"
                )
            return h
        # symmetric finite difference of the gradient
        beta = np.asarray(beta, dtype=float)
        h = np.empty((self.q, self.q))
        for j in range(self.q):
            step = 1e-6 * max(1.0, abs(beta[j]))
            bp = beta.copy()
            bm = beta.copy()
            bp[j] += step
            bm[j] -= step
            h[:, j] = (self.grad(bp, t) - self.grad(bm, t)) / (2.0 * step)
        return 0.5 * (h + h.T)


# ---------------------------------------------------------------------------
# model spec and parameter containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    """A drift family paired with a noise family plus a variance floor.

    ``sigma2_floor`` is the smallest admissible pointwise variance rate;
    evaluations at or below it raise, which keeps logs and divisions safe
    everywhere downstream.
    """

    signal: object
    noise: object
    sigma2_floor: float = 1e-12

    def __post_init__(self):
        if not (self.sigma2_floor > 0.0 and np.isfinite(self.sigma2_floor)):
            raise DomainError(f"sigma2_floor must be positive, got {self.sigma2_floor!r}")

    @property
    def p(self) -> int:
        return self.signal.p

    @property
    def q(self) -> int:
        return self.noise.q

    @property
    def d(self) -> int:
        return self.p + self.q


@dataclass(frozen=True)
class Theta:
    """A parameter point split into drift and noise blocks."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        b = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if a.ndim != 1 or b.ndim != 1:
            raise DomainError("alpha and beta must be 1-d")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise DomainError("parameters must be finite")
        a.flags.writeable = False
        b.flags.writeable = False
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.beta])

    @classmethod
    def from_vector(cls, vector, p: int) -> "Theta":
        v = np.asarray(vector, dtype=float).reshape(-1)
        return cls(v[:p], v[p:])

    def close_to(self, other: "Theta", atol: float = 0.0, rtol: float = 1e-12) -> bool:
        return bool(
            np.allclose(self.alpha, other.alpha, atol=atol, rtol=rtol)
            and np.allclose(self.beta, other.beta, atol=atol, rtol=rtol)
        )


@dataclass(frozen=True)
class ParameterSpace:
    """Axis-aligned open box of admissible (alpha, beta) values.

    Each axis is an open interval (lo, hi).  ``interior_margin`` is the
    clearance used when optimizers need closed bounds strictly inside the
    box; it defaults to 1e-9 times the narrowest axis width.
    """

    alpha_box: tuple[tuple[float, float], ...]
    beta_box: tuple[tuple[float, float], ...]
    interior_margin: float | None = None

    def __post_init__(self):
        abox = tuple((float(lo), float(hi)) for lo, hi in self.alpha_box)
        bbox = tuple((float(lo), float(hi)) for lo, hi in self.beta_box)
        object.__setattr__(self, "alpha_box", abox)
        object.__setattr__(self, "beta_box", bbox)
        if len(abox) + len(bbox) == 0:
            raise DomainError("parameter space must have at least one axis")
        for lo, hi in abox + bbox:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise DomainError(f"invalid axis ({lo!r}, {hi!r})")
        min_width = min(hi - lo for lo, hi in abox + bbox)
        if self.interior_margin is None:
            object.__setattr__(self, "interior_margin", 1e-9 * min_width)
        margin = self.interior_margin
        if not (0.0 < margin < 0.5 * min_width):
            raise DomainError(
                f"interior_margin {margin!r} must lie in (0, half the narrowest width)"
            )

    @property
    def p(self) -> int:
        return len(self.alpha_box)

    @property
    def q(self) -> int:
        return len(self.beta_box)

    @property
    def d(self) -> int:
        return self.p + self.q

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.alpha_box + self.beta_box])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.alpha_box + self.beta_box])

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> Theta:
        mid = 0.5 * (self.lower + self.upper)
        return Theta.from_vector(mid, self.p)

    def contains(self, theta: Theta, margin: float = 0.0) -> bool:
        """Whether theta lies in the open box shrunk by ``margin`` per side."""
        v = theta.vector
        if v.size != self.d:
            raise DomainError(f"dimension mismatch: {v.size} vs {self.d}")
        return bool(np.all(v > self.lower + margin) and np.all(v < self.upper - margin))

    def clip_interior(self, vector: np.ndarray) -> np.ndarray:
        """Clamp a raw vector into the margin-shrunk closed box."""
        return np.clip(vector, self.lower + self.interior_margin, self.upper - self.interior_margin)

    def axis_lattice(self, points_per_axis: int) -> list[np.ndarray]:
        if points_per_axis < 2:
            raise DomainError("points_per_axis must be >= 2")
        m = self.interior_margin
        return [
            np.linspace(lo + m, hi - m, points_per_axis)
            for lo, hi in self.alpha_box + self.beta_box
        ]


# ---------------------------------------------------------------------------
# pointwise evaluation with finiteness and floor checks
# ---------------------------------------------------------------------------


def eval_signal(model: ModelSpec, theta: Theta, t: float) -> float:
    v = model.signal.value(theta.alpha, float(t))
    if not np.isfinite(v):
        raise EvaluationError(f"drift is not finite at t={t!r}")
    return v


def grad_signal(model: ModelSpec, theta: Theta, t: float) -> np.ndarray:
    g = np.asarray(model.signal.grad(theta.alpha, float(t)), dtype=float)
    if g.shape != (model.p,):
        raise EvaluationError(f"drift gradient shape {g.shape}, expected ({model.p},)")
    if not np.all(np.isfinite(g)):
        raise EvaluationError(f"drift gradient not finite at t={t!r}")
    return g


def eval_noise_var(model: ModelSpec, theta: Theta, t: float) -> float:
    v = model.noise.value(theta.beta, float(t))
    if not np.isfinite(v):
        raise EvaluationError(f"variance rate not finite at t={t!r}")
    if v <= model.sigma2_floor:
        raise NoiseFloorViolation(
            f"variance rate {v!r} at t={t!r} is at or below the floor {model.sigma2_floor!r}"
        )
    return v


def grad_noise_var(model: ModelSpec, theta: Theta, t: float) -> np.ndarray:
    g = np.asarray(model.noise.grad(theta.beta, float(t)), dtype=float)
    if g.shape != (model.q,):
        raise EvaluationError(f"variance gradient shape {g.shape}, expected ({model.q},)")
    if not np.all(np.isfinite(g)):
        raise EvaluationError(f"variance gradient not finite at t={t!r}")
    return g


def hess_noise_var(model: ModelSpec, theta: Theta, t: float) -> np.ndarray:
    h = np.asarray(model.noise.hess(theta.beta, float(t)), dtype=float)
    if h.shape != (model.q, model.q):
        raise EvaluationError(
            f"variance hessian shape {h.shape}, expected {(model.q, model.q)}"
        )
    if not np.all(np.isfinite(h)):
        raise EvaluationError(f"variance hessian not finite at t={t!r}")
    return h


# ---------------------------------------------------------------------------
# regularity screen
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationConfig:
    """Knobs for the finite-lattice regularity screen."""

    points_per_axis: int = 32
    time_points: int = 32
    time_max: float = 10.0
    sigma2_ceiling: float = 1e6
    gradient_ceiling: float = 1e6


@dataclass(frozen=True)
class ValidationReport:
    passed: bool
    sigma2_min: float
    sigma2_max: float
    grad_signal_max: float
    grad_noise_max: float
    failures: tuple[str, ...]

    def raise_if_failed(self) -> None:
        if not self.passed:
            raise ValidationFailure("; ".join(self.failures))


def validate_assumptions(
    model: ModelSpec,
    space: ParameterSpace,
    config: ValidationConfig = ValidationConfig(),
    times: np.ndarray | None = None,
) -> ValidationReport:
    """Screen a model/box pair on a finite lattice of parameters and times.

    Checks that the variance rate stays inside (floor, ceiling), that drift
    and variance gradients stay bounded, and that every probed evaluation is
    finite.  A pass is evidence, not proof: the lattice is finite, and
    callers with models varying faster than the lattice resolves should
    supply denser ``times``.
    """
    if model.p != space.p or model.q != space.q:
        raise DomainError(
            f"model dims (p={model.p}, q={model.q}) do not match the box "
            f"(p={space.p}, q={space.q})"
        )
    if times is None:
        times = np.linspace(0.0, config.time_max, config.time_points)
    times = np.asarray(times, dtype=float)

    # probe the closed box: the regularity bounds concern the closure, and
    # every evaluator accepts boundary parameters
    lattice = [
        np.linspace(lo, hi, config.points_per_axis)
        for lo, hi in space.alpha_box + space.beta_box
    ]
    alpha_probes = _axis_sweep(lattice[: space.p], space.center.alpha)
    beta_probes = _axis_sweep(lattice[space.p :], space.center.beta)

    failures: list[str] = []
    s2_min, s2_max = np.inf, -np.inf
    gs_max, gn_max = 0.0, 0.0
    try:
        for beta in beta_probes:
            th = Theta(space.center.alpha, beta)
            for t in times:
                v = eval_noise_var(model, th, t)
                s2_min = min(s2_min, v)
                s2_max = max(s2_max, v)
                g = grad_noise_var(model, th, t)
                gn_max = max(gn_max, float(np.abs(g).max()) if g.size else 0.0)
                hess_noise_var(model, th, t)
        for alpha in alpha_probes:
            th = Theta(alpha, space.center.beta)
            for t in times:
                eval_signal(model, th, t)
                g = grad_signal(model, th, t)
                gs_max = max(gs_max, float(np.abs(g).max()) if g.size else 0.0)
    except EvaluationError as exc:
        failures.append(f"evaluation failed on the lattice: {exc}")
        return ValidationReport(False, s2_min, s2_max, gs_max, gn_max, tuple(failures))

    if not (s2_min > model.sigma2_floor):
        failures.append(
            f"variance rate min {s2_min!r} does not clear the floor {model.sigma2_floor!r}"
        )
    if s2_max > config.sigma2_ceiling:
        failures.append(
            f"variance rate max {s2_max!r} exceeds the ceiling {config.sigma2_ceiling!r}"
        )
    if gs_max > config.gradient_ceiling:
        failures.append(f"drift gradient max {gs_max!r} exceeds the ceiling")
    if gn_max > config.gradient_ceiling:
        failures.append(f"variance gradient max {gn_max!r} exceeds the ceiling")

    return ValidationReport(not failures, s2_min, s2_max, gs_max, gn_max, tuple(failures))


def _axis_sweep(axes: list[np.ndarray], center: np.ndarray) -> list[np.ndarray]:
    """Probe points varying one axis at a time around a central point."""
    if not axes:
        return [np.asarray(center, dtype=float)]
    probes = [np.asarray(center, dtype=float)]
    for j, axis in enumerate(axes):
        for x in axis:
            v = np.array(center, dtype=float)
            v[j] = x
            probes.append(v)
    return probes
