import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vodi.game import GameSpec, InfoSpace
from vodi.oracle import (SimConfig, exact_value, finite_difference_alpha, horizon_for,
                         simulate_value, truncation_bias, _cumulative)
from vodi.policies import initial_distribution, solve_joint_best_response
from vodi.series import compute_alpha00, compute_alpha_table

from conftest import constant_reward_game, make_game, random_profile, report_blind_profile


def test_constant_reward_value(rng):
    spec = constant_reward_game(5.0, 0.9)
    prof = random_profile(spec, rng)
    for e in [(0, 0), (0.3, 0.9), (1, 1)]:
        assert np.allclose(exact_value(spec, prof, *e), 50.0)


def test_report_blind_value_independent_of_errors(rng):
    spec = make_game(40)
    prof = report_blind_profile(spec, rng)
    assert np.allclose(exact_value(spec, prof, 0.4, 0.7), exact_value(spec, prof, 0, 0),
                       atol=1e-9, rtol=0)


def test_exact_at_zero_is_alpha00(rng):
    spec = make_game(41)
    prof = random_profile(spec, rng)
    assert np.allclose(exact_value(spec, prof, 0, 0), compute_alpha00(spec, prof), atol=1e-10)


def test_exact_rejects_bad_rate(rng):
    spec = make_game(41)
    with pytest.raises(ValueError):
        exact_value(spec, random_profile(spec, rng), 1.2, 0)


def test_exact_continuous_on_grid(rng):
    spec = make_game(42)
    prof = random_profile(spec, rng)
    grid = np.linspace(0, 1, 41)
    vals = np.array([[exact_value(spec, prof, a, b) for b in grid] for a in grid])
    jump = max(np.abs(np.diff(vals, axis=0)).max(), np.abs(np.diff(vals, axis=1)).max())
    M = np.abs(spec.reward("L")).max()
    # Lipschitz envelope: |dg/d eps| <= 2 beta M / (1 - beta)^2 on each axis
    assert jump <= 2 * 0.9 * M / 0.01 * (grid[1] - grid[0]) + 1e-9


def test_deterministic_simulation_is_exact():
    spec = make_game(43, beta=0.5)
    P = np.zeros_like(spec.transitions)
    nxt = (np.arange(8)[None, :] * 3 + np.arange(4)[:, None]) % 8
    P[np.arange(4)[:, None], np.arange(8)[None, :], nxt] = 1.0
    det = GameSpec(2, 2, 2, 1, 2, 2, P, spec.rewards, 0.5)
    _, prof = solve_joint_best_response(det)
    y0 = initial_distribution(det)
    start = np.zeros_like(y0)
    start[InfoSpace(det).diagonal[3]] = 1.0
    res = simulate_value(det, prof, 0, 0, config=SimConfig(120, 50, 1, start))
    assert res.stderr == 0.0
    assert math.isclose(res.estimate, start @ exact_value(det, prof, 0, 0), rel_tol=1e-12)


def test_simulation_reproducible(rng):
    spec = make_game(44)
    prof = random_profile(spec, rng)
    cfg = SimConfig(50, 5000, 7)
    a = simulate_value(spec, prof, 0.2, 0.1, config=cfg)
    b = simulate_value(spec, prof, 0.2, 0.1, config=cfg)
    assert a.estimate == b.estimate and a.stderr == b.stderr
    c = simulate_value(spec, prof, 0.2, 0.1, config=SimConfig(50, 5000, 8))
    assert c.estimate != a.estimate


def test_simulation_agrees_with_exact():
    spec = make_game(45)
    _, prof = solve_joint_best_response(spec)
    M = np.abs(spec.reward("L")).max()
    T = horizon_for(0.9, M, 1e-3)
    res = simulate_value(spec, prof, 0.1, 0.2, config=SimConfig(T, 100_000, 3))
    exact = initial_distribution(spec) @ exact_value(spec, prof, 0.1, 0.2)
    assert abs(res.estimate - exact) <= 4 * res.stderr + res.bias_bound


def test_horizon_bias():
    T = horizon_for(0.9, 50, 1e-3)
    assert truncation_bias(0.9, 50, T) <= 1e-3 < truncation_bias(0.9, 50, T - 1)
    with pytest.raises(ValueError):
        SimConfig(episodes=0)


def test_cumulative_pins_to_one():
    cum = _cumulative(np.array([[0.2, 0.3, 0.5 - 1e-17, 0.0], [0, 1, 0, 0]]))
    assert cum[0, 2] == 1.0 and cum[0, 3] == 1.0
    assert list(cum[1]) == [0, 1, 1, 1]


def test_difference_quotients_vanish(rng):
    spec = make_game(46)
    prof = report_blind_profile(spec, rng)
    for d in ("eps1", "eps2", "mixed"):
        assert np.abs(finite_difference_alpha(spec, prof, d, 1e-3)).max() < 1e-6
    const = constant_reward_game(4.0)
    for d in ("eps1", "eps2"):
        assert np.abs(finite_difference_alpha(const, random_profile(const, rng), d)).max() < 1e-9
    with pytest.raises(ValueError):
        finite_difference_alpha(spec, prof, "eps1", h=0.0)


def test_difference_error_linear_in_h():
    spec = make_game(47)
    _, prof = solve_joint_best_response(spec)
    table = compute_alpha_table(spec, prof, 1)
    hs = [1e-3, 1e-4, 1e-5]
    errs = [np.abs(finite_difference_alpha(spec, prof, "eps1", h) - table.alpha10).max() for h in hs]
    slope = np.polyfit(np.log10(hs), np.log10(errs), 1)[0]
    assert 0.8 <= slope <= 1.2


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**20))
def test_difference_matches_series(seed):
    spec = make_game(seed)
    _, prof = solve_joint_best_response(spec)
    table = compute_alpha_table(spec, prof, 1)
    for d, a in (("eps1", table.alpha10), ("eps2", table.alpha01)):
        fd = finite_difference_alpha(spec, prof, d, 1e-5)
        assert np.all(np.abs(fd - a) <= 1e-3 * np.abs(a) + 1e-6 * np.abs(a).max() + 1e-12)
