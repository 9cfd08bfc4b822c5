import math

import numpy as np
import pytest

from signoise import (
    ConstantFn,
    CosineFn,
    DomainError,
    EvaluationError,
    GeneralNoise,
    KnownNoise,
    LinearSignal,
    ModelSpec,
    NoiseFloorViolation,
    ParameterSpace,
    PeriodicStepFn,
    Profile,
    ScaledNoise,
    SineFn,
    Theta,
    ValidationConfig,
    constant_profile,
    eval_noise_var,
    eval_signal,
    grad_noise_var,
    grad_signal,
    hess_noise_var,
    validate_assumptions,
)

from helpers import curved_model, mean_model, trig_known_model, trig_scaled_model


def test_linear_signal_values():
    model, _, _ = trig_known_model()
    th = Theta(np.array([1.0, 2.0]), np.zeros(0))
    assert eval_signal(model, th, 0.0) == pytest.approx(3.0, abs=1e-15)
    assert eval_signal(model, th, 0.25) == pytest.approx(1.0, abs=1e-15)
    zero = Theta(np.zeros(2), np.zeros(0))
    for t in (0.0, 0.3, 1.7, 12.5):
        assert eval_signal(model, zero, t) == 0.0


def test_linear_signal_gradient_is_basis():
    model, _, _ = trig_known_model()
    for alpha in (np.array([1.0, 2.0]), np.array([-0.4, 0.9])):
        th = Theta(alpha, np.zeros(0))
        assert np.allclose(grad_signal(model, th, 0.0), [1.0, 1.0], atol=1e-15)
        assert np.allclose(grad_signal(model, th, 0.25), [1.0, 0.0], atol=1e-15)


def test_linear_signal_exact_linearity():
    model, _, _ = trig_known_model()
    rng = np.random.default_rng(3)
    for _ in range(50):
        a1 = rng.normal(size=2)
        a2 = rng.normal(size=2)
        ca, cb = rng.normal(size=2)
        t = rng.uniform(0.0, 5.0)
        combo = eval_signal(model, Theta(ca * a1 + cb * a2, np.zeros(0)), t)
        parts = ca * eval_signal(model, Theta(a1, np.zeros(0)), t) + cb * eval_signal(
            model, Theta(a2, np.zeros(0)), t
        )
        assert combo == pytest.approx(parts, rel=1e-14, abs=1e-14)


def test_curved_signal_gradient_matches_finite_differences():
    model, _, _ = curved_model()
    a, t = 0.3, 1.7
    h = 1e-6
    fd = (
        eval_signal(model, Theta(np.array([a + h]), np.array([0.2])), t)
        - eval_signal(model, Theta(np.array([a - h]), np.array([0.2])), t)
    ) / (2.0 * h)
    g = grad_signal(model, Theta(np.array([a]), np.array([0.2])), t)
    assert abs(g[0] - fd) / abs(fd) < 1e-6


def test_scaled_noise_values_and_derivatives():
    model = ModelSpec(LinearSignal((ConstantFn(),)), ScaledNoise(constant_profile(1.0)))
    th = Theta(np.array([0.0]), np.array([2.0]))
    for t in (0.0, 0.7, 3.2):
        assert eval_noise_var(model, th, t) == pytest.approx(2.0, abs=1e-15)
        assert np.allclose(grad_noise_var(model, th, t), [1.0], atol=1e-15)
        assert np.allclose(hess_noise_var(model, th, t), [[0.0]], atol=1e-15)


def test_trig_profile_noise_value():
    # sigma0^2(t) = 2 + cos(2 pi t), beta = 1, t = 0.5 -> 2 - 1 = 1
    profile = Profile(offset=2.0, coefs=(1.0,), atoms=(CosineFn(1.0),))
    model = ModelSpec(LinearSignal((ConstantFn(),)), ScaledNoise(profile))
    th = Theta(np.array([0.0]), np.array([1.0]))
    assert eval_noise_var(model, th, 0.5) == pytest.approx(1.0, abs=1e-14)


def test_curved_noise_gradient_matches_finite_differences():
    model, _, _ = curved_model()
    b, t = 0.2, 1.1
    h = 1e-6
    fd = (
        eval_noise_var(model, Theta(np.array([0.3]), np.array([b + h])), t)
        - eval_noise_var(model, Theta(np.array([0.3]), np.array([b - h])), t)
    ) / (2.0 * h)
    g = grad_noise_var(model, Theta(np.array([0.3]), np.array([b])), t)
    assert abs(g[0] - fd) / abs(fd) < 1e-6


def test_general_noise_hessian_defaults_to_differenced_gradient():
    noise = GeneralNoise(
        q=1,
        value_fn=lambda b, t: math.exp(b[0]) * (2.0 + math.sin(t)),
        grad_fn=lambda b, t: np.array([math.exp(b[0]) * (2.0 + math.sin(t))]),
    )
    model = ModelSpec(LinearSignal((ConstantFn(),)), noise)
    th = Theta(np.array([0.0]), np.array([0.2]))
    hess = hess_noise_var(model, th, 1.1)
    exact = math.exp(0.2) * (2.0 + math.sin(1.1))
    assert hess.shape == (1, 1)
    assert hess[0, 0] == pytest.approx(exact, rel=1e-6)


def test_noise_floor_violation_raised():
    model = ModelSpec(LinearSignal((ConstantFn(),)), KnownNoise(constant_profile(0.0)))
    th = Theta(np.array([0.0]), np.zeros(0))
    with pytest.raises(NoiseFloorViolation):
        eval_noise_var(model, th, 1.0)


def test_builtin_gradients_match_finite_differences_at_random_points():
    rng = np.random.default_rng(11)
    h = 2e-6
    for builder in (trig_known_model, trig_scaled_model, curved_model):
        model, space, _ = builder()
        lo = space.lower + 0.05 * space.widths
        hi = space.upper - 0.05 * space.widths
        for _ in range(100):
            vec = rng.uniform(lo, hi)
            th = Theta(vec[: model.p], vec[model.p :])
            t = rng.uniform(0.0, 4.0)
            g = grad_signal(model, th, t)
            for k in range(model.p):
                e = np.zeros(model.d)
                e[k] = h
                up = Theta(vec[: model.p] + e[: model.p], vec[model.p :])
                dn = Theta(vec[: model.p] - e[: model.p], vec[model.p :])
                fd = (eval_signal(model, up, t) - eval_signal(model, dn, t)) / (2 * h)
                assert abs(g[k] - fd) <= 1e-6 * max(1.0, abs(fd))
            gv = grad_noise_var(model, th, t)
            for k in range(model.q):
                bp = vec[model.p :].copy()
                bm = vec[model.p :].copy()
                bp[k] += h
                bm[k] -= h
                fd = (
                    eval_noise_var(model, Theta(vec[: model.p], bp), t)
                    - eval_noise_var(model, Theta(vec[: model.p], bm), t)
                ) / (2 * h)
                assert abs(gv[k] - fd) <= 1e-6 * max(1.0, abs(fd))


def test_periodic_step_function_values_and_integral():
    atom = PeriodicStepFn((1.0, 3.0), 1.0)
    # levels hold on [0, 0.5) and [0.5, 1), repeating with period 1
    assert atom(0.1) == 1.0
    assert atom(0.6) == 3.0
    assert atom(1.1) == 1.0
    assert atom.integral(0.0, 1.0) == pytest.approx(2.0, abs=1e-14)
    assert atom.integral(0.25, 0.75) == pytest.approx(0.25 * 1.0 + 0.25 * 3.0, abs=1e-14)
    assert atom.integral(0.0, 2.5) == pytest.approx(2.0 * 2.0 + 0.5, abs=1e-13)


def test_sine_atom_and_profile_integral():
    prof = Profile(offset=2.0, coefs=(0.5,), atoms=(SineFn(1.0),))
    val = prof(0.125)
    assert val == pytest.approx(2.0 + 0.5 * math.sin(2.0 * math.pi * 0.125), abs=1e-14)
    exact = 2.0 * 0.5 + 0.5 * (1.0 - math.cos(math.pi)) / (2.0 * math.pi)
    assert prof.integral(0.0, 0.5) == pytest.approx(exact, abs=1e-14)


def test_validation_passes_for_unit_scaled_noise():
    model = ModelSpec(LinearSignal((ConstantFn(),)), ScaledNoise(constant_profile(1.0)))
    space = ParameterSpace(((-1.0, 1.0),), ((0.5, 2.0),))
    report = validate_assumptions(model, space)
    assert report.passed
    assert report.sigma2_min == pytest.approx(0.5, abs=1e-12)
    assert report.sigma2_max == pytest.approx(2.0, abs=1e-12)


def test_validation_bounds_trig_basis_gradient():
    model, space, _ = trig_known_model()
    report = validate_assumptions(model, space)
    assert report.passed
    # each basis atom is bounded by 1, so no per-coordinate slope above 1
    assert report.grad_signal_max <= 1.0 + 1e-12


def test_validation_fails_for_unbounded_variance_probe():
    noise = GeneralNoise(
        q=1,
        value_fn=lambda b, t: b[0] * t,
        grad_fn=lambda b, t: np.array([t]),
        hess_fn=lambda b, t: np.zeros((1, 1)),
    )
    model = ModelSpec(LinearSignal((ConstantFn(),)), noise)
    space = ParameterSpace(((-1.0, 1.0),), ((0.5, 2.0),))
    report = validate_assumptions(
        model,
        space,
        config=ValidationConfig(sigma2_ceiling=1e6),
        times=np.geomspace(1e-3, 1e9, 64),
    )
    assert not report.passed
    assert any("ceiling" in msg for msg in report.failures)


def test_theta_vector_round_trip_and_immutability():
    th = Theta(np.array([1.0, 2.0]), np.array([3.0]))
    back = Theta.from_vector(th.vector, 2)
    assert th.close_to(back)
    with pytest.raises(ValueError):
        th.alpha[0] = 9.0


def test_parameter_space_contains_and_margin():
    space = ParameterSpace(((0.0, 2.0),), ((0.5, 1.5),), interior_margin=0.01)
    inside = Theta(np.array([1.0]), np.array([1.0]))
    edge = Theta(np.array([0.005]), np.array([1.0]))
    outside = Theta(np.array([-0.1]), np.array([1.0]))
    assert space.contains(inside)
    assert space.contains(edge)
    assert not space.contains(edge, margin=0.01)
    assert not space.contains(outside)


def test_parameter_space_rejects_bad_boxes():
    with pytest.raises(DomainError):
        ParameterSpace(((1.0, 1.0),), ())
    with pytest.raises(DomainError):
        ParameterSpace((), ())


def test_evaluation_error_mentions_time():
    signal = LinearSignal((ConstantFn(),))
    noise = GeneralNoise(
        q=1,
        value_fn=lambda b, t: float("nan"),
        grad_fn=lambda b, t: np.array([1.0]),
    )
    model = ModelSpec(signal, noise)
    th = Theta(np.array([0.0]), np.array([1.0]))
    with pytest.raises(EvaluationError):
        eval_noise_var(model, th, 2.5)


def test_mean_model_dimensions():
    model, space, theta = mean_model()
    assert (model.p, model.q, model.d) == (1, 0, 1)
    assert space.contains(theta)
