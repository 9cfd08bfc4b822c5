import numpy as np
import pytest

from signoise import (
    ConstantFn,
    CosineFn,
    GeneralNoise,
    KnownNoise,
    LinearSignal,
    ModelSpec,
    MomentCache,
    NoiseFloorViolation,
    ScaledNoise,
    Theta,
    constant_profile,
    grid_from_instants,
    log_variance_terms,
    uniform_grid,
)

from helpers import curved_model, sample_interior, trig_known_model, trig_scaled_model


def _mean_model():
    signal = LinearSignal((ConstantFn(),))
    noise = KnownNoise(constant_profile(1.0))
    return ModelSpec(signal, noise)


def test_constant_drift_unit_noise_moments():
    model = _mean_model()
    grid = uniform_grid(4, 0.5)
    cache = MomentCache(model, grid)
    m = cache.moments(Theta((2.0,), ()))
    assert np.allclose(m.mean, 1.0, atol=0.0)  # alpha * h = 2 * 0.5
    assert np.allclose(m.var, 0.5, atol=0.0)
    assert np.allclose(m.grad_mean, 0.5, atol=0.0)
    assert m.grad_var.shape == (4, 0)


def test_cosine_drift_integrals():
    signal = LinearSignal((CosineFn(1.0),))
    model = ModelSpec(signal, KnownNoise(constant_profile(1.0)))
    alpha = 0.7

    # one increment covering a half period integrates to zero
    half = grid_from_instants([0.0, 0.5])
    m = MomentCache(model, half).moments(Theta((alpha,), ()))
    assert m.mean[0] == pytest.approx(0.0, abs=1e-15)

    # quarter period: alpha * sin(pi/2) / (2 pi)
    quarter = grid_from_instants([0.0, 0.25])
    m = MomentCache(model, quarter).moments(Theta((alpha,), ()))
    assert m.mean[0] == pytest.approx(alpha / (2.0 * np.pi), rel=1e-12)


def test_quadrature_matches_closed_form_cosine():
    signal = LinearSignal((ConstantFn(), CosineFn(1.0)))
    grid = grid_from_instants([0.0, 0.13, 0.5, 0.77, 1.9])
    theta = Theta((0.4, -1.1), ())
    closed = MomentCache(ModelSpec(signal, KnownNoise(constant_profile(1.0))), grid)
    forced = MomentCache(
        ModelSpec(signal, KnownNoise(constant_profile(1.0))), grid, force_quadrature=True
    )
    a = closed.moments(theta)
    b = forced.moments(theta)
    assert np.allclose(a.mean, b.mean, atol=1e-10)
    assert np.allclose(a.grad_mean, b.grad_mean, atol=1e-10)


def test_scaled_noise_log_moments():
    model = ModelSpec(LinearSignal((ConstantFn(),)), ScaledNoise(constant_profile(1.0)))
    grid = uniform_grid(1, 0.5)
    m = MomentCache(model, grid).moments(Theta((0.0,), (2.0,)))
    assert m.var[0] == pytest.approx(1.0, abs=0.0)
    log_var, grad_log = log_variance_terms(m)
    assert log_var[0] == pytest.approx(0.0, abs=1e-15)
    assert grad_log[0, 0] == pytest.approx(0.5, rel=1e-14)


def test_scaled_noise_log_gradient_is_inverse_scale():
    model = ModelSpec(LinearSignal((ConstantFn(),)), ScaledNoise(constant_profile(1.0)))
    rng = np.random.default_rng(5)
    for _ in range(20):
        beta = float(rng.uniform(0.2, 4.0))
        delays = rng.uniform(0.05, 1.5, 6)
        grid = grid_from_instants(np.concatenate(([0.0], np.cumsum(delays))))
        m = MomentCache(model, grid).moments(Theta((0.0,), (beta,)))
        _, grad_log = log_variance_terms(m)
        assert np.allclose(grad_log, 1.0 / beta, rtol=1e-12)


def test_general_noise_matches_finite_differences():
    def var_fn(beta, t):
        return 2.0 + beta[0] * float(np.sin(t))

    def grad_fn(beta, t):
        return np.array([float(np.sin(t))])

    noise = GeneralNoise(1, var_fn, grad_fn)
    model = ModelSpec(LinearSignal((ConstantFn(),)), noise)
    grid = grid_from_instants([0.0, 1.0])
    cache = MomentCache(model, grid)
    beta = 0.7
    h = 1e-6
    up = cache.moments(Theta((0.0,), (beta + h,))).var[0]
    down = cache.moments(Theta((0.0,), (beta - h,))).var[0]
    fd = (up - down) / (2.0 * h)
    got = cache.moments(Theta((0.0,), (beta,))).grad_var[0, 0]
    assert got == pytest.approx(fd, abs=1e-8)


def test_dual_route_property_over_families():
    rng = np.random.default_rng(41)
    for build in (trig_known_model, trig_scaled_model, curved_model):
        model, space, _ = build()
        for _ in range(10):
            theta = sample_interior(space, rng)
            delays = rng.uniform(0.05, 0.9, 8)
            grid = grid_from_instants(np.concatenate(([0.0], np.cumsum(delays))))
            fast = MomentCache(model, grid).moments(theta)
            slow = MomentCache(model, grid, force_quadrature=True).moments(theta)
            scale = 1.0 + np.abs(fast.mean)
            assert np.all(np.abs(fast.mean - slow.mean) < 1e-9 * scale)
            assert np.all(
                np.abs(fast.var - slow.var) < 1e-9 * (1.0 + np.abs(fast.var))
            )


def test_split_increment_additivity():
    model, space, theta = curved_model()
    whole = grid_from_instants([0.0, 1.3])
    split = grid_from_instants([0.0, 0.45, 1.3])
    mw = MomentCache(model, whole).moments(theta)
    ms = MomentCache(model, split).moments(theta)
    assert mw.mean[0] == pytest.approx(ms.mean.sum(), abs=1e-12)
    assert mw.var[0] == pytest.approx(ms.var.sum(), abs=1e-12)
    assert np.allclose(mw.grad_mean[0], ms.grad_mean.sum(axis=0), atol=1e-12)
    assert np.allclose(mw.grad_var[0], ms.grad_var.sum(axis=0), atol=1e-12)


def test_noise_floor_violation_raised():
    def var_fn(beta, t):
        return 0.0

    def grad_fn(beta, t):
        return np.zeros(0)

    model = ModelSpec(LinearSignal((ConstantFn(),)), GeneralNoise(0, var_fn, grad_fn))
    cache = MomentCache(model, uniform_grid(3, 0.5))
    with pytest.raises(NoiseFloorViolation):
        cache.moments(Theta((1.0,), ()))


def test_basis_integrals_reused_across_theta():
    model, _, _ = trig_known_model()
    grid = uniform_grid(16, 0.25)
    cache = MomentCache(model, grid)
    b = cache.signal_basis_integrals()
    assert b.shape == (16, 2)
    m1 = cache.moments(Theta((1.0, 0.0), ()))
    m2 = cache.moments(Theta((0.0, 1.0), ()))
    assert np.allclose(m1.mean, b[:, 0], atol=0.0)
    assert np.allclose(m2.mean, b[:, 1], atol=0.0)
