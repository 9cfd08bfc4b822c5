"""Shared model builders for the test suite.

Each builder returns (model, space, theta) for one family used across
many tests.  Kept here so every test file exercises the same objects.
"""

import math

import numpy as np

from signoise import (
    ConstantFn,
    CosineFn,
    GeneralNoise,
    GeneralSignal,
    KnownNoise,
    LinearSignal,
    ModelSpec,
    ParameterSpace,
    ScaledNoise,
    Theta,
    constant_profile,
)


def mean_model():
    """f(a, t) = a, unit known noise: the exactly-Gaussian family."""
    model = ModelSpec(
        LinearSignal((ConstantFn(),)), KnownNoise(constant_profile(1.0))
    )
    space = ParameterSpace(((0.0, 2.0),), ())
    theta = Theta(np.array([1.0]), np.zeros(0))
    return model, space, theta


def trig_known_model():
    """Linear drift on basis (1, cos 2 pi t), unit known noise."""
    model = ModelSpec(
        LinearSignal((ConstantFn(), CosineFn(1.0))),
        KnownNoise(constant_profile(1.0)),
    )
    space = ParameterSpace(((-3.0, 3.0), (-3.0, 3.0)), ())
    theta = Theta(np.array([1.0, 0.5]), np.zeros(0))
    return model, space, theta


def trig_scaled_model():
    """Same trig drift with an unknown noise scale (d = 3)."""
    model = ModelSpec(
        LinearSignal((ConstantFn(), CosineFn(1.0))),
        ScaledNoise(constant_profile(1.0)),
    )
    space = ParameterSpace(((-3.0, 3.0), (-3.0, 3.0)), ((0.1, 4.0),))
    theta = Theta(np.array([1.0, 0.5]), np.array([1.0]))
    return model, space, theta


def curved_model():
    """General closures: f = sin(a) cos(t), sigma2 = exp(b) (2 + sin t).

    Both carry exact antiderivatives so the cache takes the closed-form
    route; dropping them forces quadrature.
    """
    signal = GeneralSignal(
        p=1,
        value_fn=lambda a, t: math.sin(a[0]) * math.cos(t),
        grad_fn=lambda a, t: np.array([math.cos(a[0]) * math.cos(t)]),
        integral_fn=lambda a, lo, hi: math.sin(a[0]) * (math.sin(hi) - math.sin(lo)),
        grad_integral_fn=lambda a, lo, hi: np.array(
            [math.cos(a[0]) * (math.sin(hi) - math.sin(lo))]
        ),
    )

    def s2_int(b, lo, hi):
        return math.exp(b[0]) * (2.0 * (hi - lo) + math.cos(lo) - math.cos(hi))

    noise = GeneralNoise(
        q=1,
        value_fn=lambda b, t: math.exp(b[0]) * (2.0 + math.sin(t)),
        grad_fn=lambda b, t: np.array([math.exp(b[0]) * (2.0 + math.sin(t))]),
        hess_fn=lambda b, t: np.array([[math.exp(b[0]) * (2.0 + math.sin(t))]]),
        integral_fn=s2_int,
        grad_integral_fn=lambda b, lo, hi: np.array([s2_int(b, lo, hi)]),
    )
    model = ModelSpec(signal, noise)
    space = ParameterSpace(((-1.2, 1.2),), ((-1.0, 1.0),))
    theta = Theta(np.array([0.3]), np.array([0.2]))
    return model, space, theta


def sample_interior(space, rng, shrink=0.1):
    """Draw a Theta uniformly from the box shrunk by ``shrink`` per side."""
    lo = space.lower + shrink * space.widths
    hi = space.upper - shrink * space.widths
    return Theta.from_vector(rng.uniform(lo, hi), space.p)


TRIG_KNOWN_CONFIG = {
    "signal": {"kind": "linear", "basis": [{"kind": "const"}, {"kind": "cos", "freq": 1.0}]},
    "noise": {"kind": "known", "profile": {"kind": "const", "value": 1.0}},
}

TRIG_SCALED_CONFIG = {
    "signal": {"kind": "linear", "basis": [{"kind": "const"}, {"kind": "cos", "freq": 1.0}]},
    "noise": {"kind": "scaled", "profile": {"kind": "const", "value": 1.0}},
}

MEAN_CONFIG = {
    "signal": {"kind": "linear", "basis": [{"kind": "const"}]},
    "noise": {"kind": "known", "profile": {"kind": "const", "value": 1.0}},
}
