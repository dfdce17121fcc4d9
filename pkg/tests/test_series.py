import itertools
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vodi.game import BeliefVector, InfoSpace, next_state_distribution
from vodi.oracle import exact_value, finite_difference_alpha
from vodi.policies import solve_joint_best_response
from vodi.series import (check_norm_bounds, coefficient_bound, compute_alpha00,
                         compute_alpha_table, compute_source_terms, convergence_radius,
                         evaluate_series, belief_value)
from vodi.specfile import load_spec

from conftest import (brute_kernel, brute_reward, constant_reward_game, info_states, make_game,
                      mirror, random_profile, report_blind_profile)


def literal_sources(spec, profile, x):
    """Delta, DeltaBar and Theta written as explicit sigma-weighted sums over next states."""
    n1, n2, nf = spec.sL1_size, spec.sL2_size, spec.sF_size
    states = info_states(spec)
    where = {z: i for i, z in enumerate(states)}
    T = next_state_distribution(spec, profile)
    b = spec.beta
    out = {k: np.zeros(len(states)) for k in ("Delta", "DeltaBar", "Theta")}
    for i in range(len(states)):
        for t1, t2, tf in itertools.product(range(n1), range(n2), range(nf)):
            p = T[i, (t1 * n2 + t2) * nf + tf]
            acc = x[where[(t1, t2, tf, t2, t1)]]
            d1 = sum(spec.sigma1[t2, y] * x[where[(t1, t2, tf, y, t1)]] for y in range(n2) if y != t2)
            d2 = sum(spec.sigma2[t1, y] * x[where[(t1, t2, tf, t2, y)]] for y in range(n1) if y != t1)
            d12 = sum(spec.sigma1[t2, y1] * spec.sigma2[t1, y2] * x[where[(t1, t2, tf, y1, y2)]]
                      for y1 in range(n2) if y1 != t2 for y2 in range(n1) if y2 != t1)
            out["Delta"][i] += b * p * (d1 - acc)
            out["DeltaBar"][i] += b * p * (d2 - acc)
            out["Theta"][i] += b * p * (d12 - d1 - d2 + acc)
    return out


def test_alpha00_trivial_cases(rng):
    spec = make_game(1)
    prof = random_profile(spec, rng)
    zero = spec.with_rewards(L=np.zeros((8, 4)))
    assert np.all(compute_alpha00(zero, prof) == 0)
    assert np.allclose(compute_alpha00(constant_reward_game(3.0, 0.8), prof), 3.0 / 0.2)


def test_alpha00_dense_oracle_example1():
    spec = load_spec("example1_game1").game.with_beta(0.9)
    _, prof = solve_joint_best_response(spec)
    P = brute_kernel(spec, prof, 0.0, 0.0)
    ref = np.linalg.inv(np.eye(len(P)) - 0.9 * P) @ brute_reward(spec, prof)
    assert np.allclose(compute_alpha00(spec, prof), ref, atol=1e-8, rtol=0)


@pytest.mark.parametrize("order", ["Delta", "DeltaBar", "Theta"])
def test_sources_annihilate_constants(order, rng):
    spec = make_game(2)
    out = compute_source_terms(spec, random_profile(spec, rng), np.full(32, 7.5), order)
    assert np.abs(out).max() < 1e-12


@pytest.mark.parametrize("sizes", [(2, 2, 2), (3, 2, 1), (2, 3, 2)])
def test_sources_match_literal_sums(sizes, rng):
    spec = make_game(3, sizes=sizes, actions=(1, 2, 2))
    prof = random_profile(spec, rng)
    x = rng.normal(size=InfoSpace(spec).size)
    ref = literal_sources(spec, prof, x)
    for order, want in ref.items():
        assert np.allclose(compute_source_terms(spec, prof, x, order), want, atol=1e-12, rtol=0)


def test_report_blind_sources_vanish(rng):
    spec = make_game(4)
    prof = report_blind_profile(spec, rng)
    a00 = compute_alpha00(spec, prof)
    for order in ("Delta", "DeltaBar"):
        assert np.abs(compute_source_terms(spec, prof, a00, order)).max() < 1e-10


def test_constant_reward_table_vanishes(rng):
    spec = constant_reward_game(5.0)
    table = compute_alpha_table(spec, random_profile(spec, rng), K=3)
    for k, l in table.orders():
        if k + l:
            assert np.abs(table[k, l]).max() < 1e-10


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**20))
def test_report_blind_table_vanishes(seed):
    spec = make_game(seed, beta=0.9)
    table = compute_alpha_table(spec, report_blind_profile(spec, np.random.default_rng(seed)), K=3)
    for k, l in table.orders():
        if k + l:
            assert np.abs(table[k, l]).max() <= 1e-9


def test_first_order_matches_difference_quotient():
    spec = make_game(5)
    _, prof = solve_joint_best_response(spec)
    table = compute_alpha_table(spec, prof, 1)
    h = 1e-5
    g0 = exact_value(spec, prof, 0, 0)
    fd = (exact_value(spec, prof, h, 0) - g0) / h
    assert np.allclose(fd, table.alpha10, rtol=1e-3, atol=1e-3 * np.abs(table.alpha10).max())


def test_mixed_derivative_converges():
    spec = make_game(6)
    _, prof = solve_joint_best_response(spec)
    a11 = compute_alpha_table(spec, prof, 1)[1, 1]
    errs = [np.abs(finite_difference_alpha(spec, prof, "mixed", h) - a11).max()
            for h in (1e-2, 1e-3)]
    assert errs[1] < errs[0] / 5


def test_radius_values():
    assert convergence_radius(0.05) == 1.0
    assert math.isclose(convergence_radius(0.5), 0.125)
    assert math.isclose(convergence_radius(1 / 9), 1.0)
    assert math.isclose((1 - 1 / 9) / (8 / 9), 1.0)
    with pytest.raises(ValueError):
        convergence_radius(1.0)


def test_first_order_bound_value():
    assert math.isclose(coefficient_bound(1, 0, 0.5, 10), 40.0)
    assert math.isclose(coefficient_bound(0, 1, 0.5, 10), 40.0)


def test_zero_reward_bounds_hold(rng):
    spec = make_game(7).with_rewards(L=np.zeros((8, 4)))
    recs = check_norm_bounds(compute_alpha_table(spec, random_profile(spec, rng), 3))
    assert all(r.passed and r.norm == 0 for r in recs)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**20), st.sampled_from([0.05, 0.5, 0.9]))
def test_norm_bounds_property(seed, beta):
    spec = make_game(seed, beta=beta)
    _, prof = solve_joint_best_response(spec)
    assert all(r.passed for r in check_norm_bounds(compute_alpha_table(spec, prof, 3), spec, prof))


def test_fixed_point_residuals():
    spec = make_game(8)
    table = compute_alpha_table(spec, solve_joint_best_response(spec)[1], 3)
    assert max(table.residuals.values()) <= 1e-9


def test_series_at_origin_is_alpha00(rng):
    spec = make_game(9)
    table = compute_alpha_table(spec, random_profile(spec, rng), 2)
    res = evaluate_series(table, 0.0, 0.0)
    assert np.array_equal(res.value, table[0, 0])
    assert res.tail_bound == 0.0


def test_series_report_blind_constant(rng):
    spec = make_game(10)
    table = compute_alpha_table(spec, report_blind_profile(spec, rng), 2)
    a = evaluate_series(table, 0.01, 0.0).value
    b = evaluate_series(table, 0.003, 0.012).value
    assert np.allclose(a, b, atol=1e-9)


def test_series_error_order_three():
    spec = make_game(12)
    _, prof = solve_joint_best_response(spec)
    table = compute_alpha_table(spec, prof, 2)
    errs = []
    for eps in (1e-2, 1e-3, 1e-4):
        res = evaluate_series(table, eps, eps)
        err = np.abs(res.value - exact_value(spec, prof, eps, eps)).max()
        errs.append(err)
        if eps <= 1e-3:
            assert err <= res.tail_bound
    slope = np.polyfit(np.log10([1e-2, 1e-3, 1e-4]), np.log10(errs), 1)[0]
    assert slope >= 2.7


def test_series_warns_outside_radius(rng):
    spec = make_game(13, beta=0.5)
    table = compute_alpha_table(spec, random_profile(spec, rng), 1)
    with pytest.warns(RuntimeWarning, match="radius"):
        res = evaluate_series(table, 0.2, 0.0)
    assert res.warning is not None
    with pytest.raises(ValueError):
        evaluate_series(table, -0.1, 0)


def test_channel_symmetry(rng):
    spec = make_game(14, sizes=(2, 3, 2), actions=(1, 2, 3), beta=0.8)
    prof = random_profile(spec, rng)
    mgame, mprof = mirror(spec, prof)
    t = compute_alpha_table(spec, prof, 2)
    tm = compute_alpha_table(mgame, mprof, 2)
    space, mspace = InfoSpace(spec), InfoSpace(mgame)
    perm = np.array([mspace.encode(st.s[1], st.s[0], st.s[2], st.z2, st.z1) for st in space])
    for k, l in t.orders():
        assert np.allclose(tm[l, k][perm], t[k, l], atol=1e-9)


def test_agent_duality(rng):
    spec = make_game(15)
    prof = random_profile(spec, rng)
    t = compute_alpha_table(spec, prof, 2)
    neg = compute_alpha_table(spec.with_rewards(L=-spec.reward("L")), prof, 2)
    for kl in t.orders():
        assert np.allclose(neg[kl], -t[kl])


@pytest.mark.parametrize("name,sign", [("example2_game1", -1), ("example1_game1", 1)])
@pytest.mark.parametrize("beta", [0.5, 0.9, 0.95])
def test_signs_follow_reward_alignment(name, sign, beta):
    spec = load_spec(name).game.with_beta(beta)
    table = compute_alpha_table(spec, solve_joint_best_response(spec)[1], 1)
    for a in (table.alpha10, table.alpha01):
        assert np.all(sign * a >= -1e-9)


def test_belief_value():
    spec = make_game(16)
    table = compute_alpha_table(spec, solve_joint_best_response(spec)[1], 1)
    space = table.space
    g = table[0, 0]
    s = 5
    assert belief_value(g, s, BeliefVector.point(2, 2, 1, 0), space) == g[space.index(s, 1, 0)]
    uni = BeliefVector(np.full((2, 2), 0.25))
    four = g[space.index(s, np.array([0, 0, 1, 1]), np.array([0, 1, 0, 1]))]
    assert math.isclose(belief_value(g, s, uni, space), four.mean())
    b1, b2 = BeliefVector.point(2, 2, 0, 0), BeliefVector.point(2, 2, 1, 1)
    mid = BeliefVector(0.5 * (b1.weights + b2.weights))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        vals = [belief_value(table, s, b, eps1=0.01) for b in (b1, b2, mid)]
    assert math.isclose(vals[2], 0.5 * (vals[0] + vals[1]))
