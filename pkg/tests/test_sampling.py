import math

import numpy as np
import pytest

from signoise import (
    GridError,
    grid_from_delays,
    grid_from_instants,
    load_grid_csv,
    periodic_pattern_grid,
    quantile_grid,
    save_grid_csv,
    uniform_grid,
)


def test_uniform_grid_examples():
    g = uniform_grid(4, 0.5)
    assert np.allclose(g.instants, [0.0, 0.5, 1.0, 1.5, 2.0], atol=0.0)
    assert g.total_time == 2.0
    assert g.max_delay == 0.5

    g1 = uniform_grid(1, 1.0)
    assert np.array_equal(g1.instants, [0.0, 1.0])

    g2 = uniform_grid(1000, 0.01)
    assert g2.total_time == pytest.approx(10.0, rel=1e-15)
    assert np.all(g2.delays == 0.01)


def test_pattern_grid_examples():
    g = periodic_pattern_grid([0.3, 1.0], 1.0, 2)
    assert g.n == 4
    assert np.allclose(g.instants, [0.0, 0.3, 1.0, 1.3, 2.0], atol=1e-15)

    g3 = periodic_pattern_grid([1.0], 1.0, 3)
    u3 = uniform_grid(3, 1.0)
    assert np.array_equal(g3.instants, u3.instants)
    assert np.array_equal(g3.delays, u3.delays)

    g100 = periodic_pattern_grid([0.1, 0.5, 1.0], 1.0, 100)
    assert g100.n == 300
    assert g100.total_time == pytest.approx(100.0, rel=1e-15)
    assert g100.max_delay == pytest.approx(0.5, abs=1e-15)


def test_pattern_grid_rejects_malformed_offsets():
    with pytest.raises(GridError):
        periodic_pattern_grid([0.5, 0.3], 1.0, 2)  # not increasing
    with pytest.raises(GridError):
        periodic_pattern_grid([0.3, 0.9], 1.0, 2)  # last offset != period
    with pytest.raises(GridError):
        periodic_pattern_grid([0.0, 1.0], 1.0, 2)  # zero offset


def test_quantile_grid_examples():
    g = quantile_grid(lambda u: u, 4, 1.0)
    assert np.allclose(g.instants, [0.0, 0.25, 0.5, 0.75, 1.0], atol=1e-15)

    g2 = quantile_grid(lambda u: u * u, 2, 1.0)
    assert np.allclose(g2.instants, [0.0, 0.25, 1.0], atol=1e-15)

    g100 = quantile_grid(lambda u: u * u, 100, 1.0)
    assert np.all(np.diff(g100.delays) > 0.0)
    assert g100.max_delay == pytest.approx(1.0 - 0.99**2, abs=1e-15)
    assert g100.max_delay == g100.delays[-1]


def test_quantile_grid_rejects_non_monotone_map():
    with pytest.raises(GridError):
        quantile_grid(lambda u: math.sin(4.0 * math.pi * u), 10, 1.0)


def test_reconstruction_from_delays_within_one_ulp():
    rng = np.random.default_rng(29)
    for _ in range(25):
        n = int(rng.integers(5, 400))
        delays = rng.uniform(0.01, 2.0, n)
        # correctly rounded running sums are the oracle
        exact = np.array([0.0] + [math.fsum(delays[: i + 1]) for i in range(n)])
        g = grid_from_delays(delays)
        assert np.all(np.abs(g.instants - exact) <= np.spacing(np.abs(exact) + 1e-300))


def test_grid_invariants_rejected():
    with pytest.raises(GridError):
        grid_from_instants([0.0, 1.0, 1.0])  # not strictly increasing
    with pytest.raises(GridError):
        grid_from_instants([0.5, 1.0])  # must start at zero
    with pytest.raises(GridError):
        grid_from_instants([0.0])  # needs at least one increment


def test_max_delay_is_exact_maximum():
    g = periodic_pattern_grid([0.2, 0.5, 1.0], 1.0, 7)
    assert g.max_delay == g.delays.max()


def test_grid_csv_round_trip_preserves_digest(tmp_path):
    g = periodic_pattern_grid([0.3, 1.0], 1.0, 5)
    path = tmp_path / "grid.csv"
    save_grid_csv(g, path)
    back = load_grid_csv(path)
    assert np.array_equal(back.instants, g.instants)
    assert back.digest() == g.digest()


def test_instants_are_read_only():
    g = uniform_grid(4, 0.5)
    with pytest.raises(ValueError):
        g.instants[0] = 1.0
