import numpy as np
import pytest

from hmmdr.exceptions import DomainError
from hmmdr.simgen import (SCENARIO1_MEANS, ScenarioSpec, random_spd, scenario1, scenario2,
                          scenario3, simulate)


def test_scenario1_means_and_covariance():
    d = scenario1(10_000, 0)
    for g in range(3):
        rows = d.x[d.labels == g]
        se = np.sqrt(0.5 / len(rows))
        assert np.all(np.abs(rows.mean(axis=0) - SCENARIO1_MEANS[g]) < 3 * se)
        np.testing.assert_allclose(np.cov(rows.T), 0.5 * np.eye(3), atol=0.05)


def test_scenario1_proportions():
    d = scenario1(10_000, 1)
    frac = np.bincount(d.labels, minlength=3) / 10_000
    se = np.sqrt((1 / 3) * (2 / 3) / 10_000)
    assert np.all(np.abs(frac - 1 / 3) < 4 * se)


def test_scenario2_appends_noise_to_scenario1_stream():
    d = scenario2(500, 2)
    assert d.x.shape == (500, 8)
    base = scenario1(500, 2)
    np.testing.assert_array_equal(d.x[:, :3], base.x)
    np.testing.assert_array_equal(d.labels, base.labels)
    assert abs(d.x[:, 3:].std() - 1) < 0.05


def test_scenario3_shape_and_labels():
    d = scenario3(5, 40, 3)
    assert d.x.shape == (120, 5)
    np.testing.assert_array_equal(np.bincount(d.labels), [40, 40, 40])


def test_truth_labels_are_not_marked_known():
    assert not scenario1(30, 0).known_mask.any()


def test_random_spd():
    s = random_spd(4, np.random.default_rng(0))
    vals = np.linalg.eigvalsh(s)
    assert np.all(vals >= 0.5 - 1e-12) and np.all(vals <= 2.0 + 1e-12)


def test_simulate_is_deterministic():
    a = simulate(ScenarioSpec(1, 200, seed=7))
    b = simulate(ScenarioSpec(1, 200, seed=7))
    np.testing.assert_array_equal(a.x, b.x)
    c = simulate(ScenarioSpec(3, 10, p=4, seed=7))
    assert c.x.shape == (30, 4)


def test_invalid_sizes():
    with pytest.raises(DomainError):
        ScenarioSpec(4, 10)
    with pytest.raises(DomainError):
        ScenarioSpec(1, 0)
    with pytest.raises(DomainError):
        scenario1(2)
    with pytest.raises(DomainError):
        scenario3(1, 10)
    with pytest.warns(UserWarning):
        ScenarioSpec(2, 20)
