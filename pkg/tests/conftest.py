"""Shared fixtures and brute-force oracles written independently of the library internals."""
import itertools

import numpy as np
import pytest

from vodi.game import GameSpec, PolicyProfile, build_channel_matrix, Channel
from vodi.randgame import random_game


def make_game(seed, sizes=(2, 2, 2), actions=(1, 2, 2), structure="cooperative", beta=0.9,
              reward_range=(-50, 50)):
    spec, _ = random_game(np.random.default_rng(seed), sizes, actions, reward_range,
                          structure, beta)
    return spec


def constant_reward_game(value=5.0, beta=0.9, seed=0):
    spec = make_game(seed, beta=beta)
    r = np.full((spec.n_states, spec.n_actions), float(value))
    return spec.with_rewards(L=r, F=r)


def random_profile(spec, rng, deterministic=False):
    """Random (possibly randomized) zero-memory profile."""
    def rule(shape, n):
        if deterministic:
            return np.eye(n)[rng.integers(0, n, size=shape)]
        return rng.dirichlet(np.ones(n), size=shape)
    n1, n2, nf = spec.sL1_size, spec.sL2_size, spec.sF_size
    return PolicyProfile(rule((spec.n_states,), spec.aL_size),
                         rule((n1, n2, nf), spec.aF1_size),
                         rule((n1, n2, nf), spec.aF2_size))


def report_blind_profile(spec, rng):
    """Follower rules that ignore the received reports."""
    n1, n2, nf = spec.sL1_size, spec.sL2_size, spec.sF_size
    f1 = rng.dirichlet(np.ones(spec.aF1_size), size=(n1, 1, nf)).repeat(n2, axis=1)
    f2 = rng.dirichlet(np.ones(spec.aF2_size), size=(1, n2, nf)).repeat(n1, axis=0)
    leader = rng.dirichlet(np.ones(spec.aL_size), size=spec.n_states)
    return PolicyProfile(leader, f1, f2)


def info_states(spec):
    """All (s1, s2, sf, z1, z2) tuples with the flat index the tables use."""
    n1, n2, nf = spec.sL1_size, spec.sL2_size, spec.sF_size
    out = []
    for s1, s2, sf in itertools.product(range(n1), range(n2), range(nf)):
        for z2 in range(n1):
            for z1 in range(n2):
                out.append((s1, s2, sf, z1, z2))
    return out


def brute_kernel(spec, profile, eps1, eps2):
    """Information-state kernel by explicit enumeration of actions, next states and reports."""
    n1, n2, nf = spec.sL1_size, spec.sL2_size, spec.sF_size
    states = info_states(spec)
    where = {z: i for i, z in enumerate(states)}
    Q1 = build_channel_matrix(Channel(eps1, spec.sigma1))
    Q2 = build_channel_matrix(Channel(eps2, spec.sigma2))
    N = len(states)
    P = np.zeros((N, N))
    for i, (s1, s2, sf, z1, z2) in enumerate(states):
        s = (s1 * n2 + s2) * nf + sf
        for aL, a1, a2 in itertools.product(range(spec.aL_size), range(spec.aF1_size),
                                            range(spec.aF2_size)):
            pa = (profile.leader[s, aL] * profile.follower1[s1, z1, sf, a1]
                  * profile.follower2[z2, s2, sf, a2])
            if pa == 0:
                continue
            a = (aL * spec.aF1_size + a1) * spec.aF2_size + a2
            for t1, t2, tf in itertools.product(range(n1), range(n2), range(nf)):
                t = (t1 * n2 + t2) * nf + tf
                pt = spec.transitions[a, s, t]
                for y1, y2 in itertools.product(range(n2), range(n1)):
                    P[i, where[(t1, t2, tf, y1, y2)]] += pa * pt * Q1[t2, y1] * Q2[t1, y2]
    return P


def brute_reward(spec, profile, agent="L"):
    n1, n2, nf = spec.sL1_size, spec.sL2_size, spec.sF_size
    r = spec.reward(agent)
    out = []
    for s1, s2, sf, z1, z2 in info_states(spec):
        s = (s1 * n2 + s2) * nf + sf
        v = 0.0
        for aL, a1, a2 in itertools.product(range(spec.aL_size), range(spec.aF1_size),
                                            range(spec.aF2_size)):
            a = (aL * spec.aF1_size + a1) * spec.aF2_size + a2
            v += (profile.leader[s, aL] * profile.follower1[s1, z1, sf, a1]
                  * profile.follower2[z2, s2, sf, a2] * r[s, a])
        out.append(v)
    return np.array(out)


def enumerate_best_value(spec):
    """Optimal shared follower value by solving every deterministic joint rule (aL = 1)."""
    nS, nJ = spec.n_states, spec.aF1_size * spec.aF2_size
    rF = spec.reward("F1")
    rules = np.array(list(itertools.product(range(nJ), repeat=nS)))
    s = np.arange(nS)
    P = spec.transitions[rules, s[None, :], :]  # (n_rules, nS, nS)
    R = rF[s[None, :], rules]
    A = np.eye(nS)[None] - spec.beta * P
    V = np.linalg.solve(A, R[..., None])[..., 0]
    return V.max(axis=0), rules, V


def mirror(spec, profile):
    """Swap the roles of the two channels, leader partial states and followers."""
    n1, n2, nf = spec.sL1_size, spec.sL2_size, spec.sF_size
    a1n, a2n = spec.aF1_size, spec.aF2_size
    nS = spec.n_states

    def s_perm(s):
        s1, rest = divmod(s, n2 * nf)
        s2, sf = divmod(rest, nf)
        return (s2 * n1 + s1) * nf + sf

    def a_perm(a):
        aL, rest = divmod(a, a1n * a2n)
        x1, x2 = divmod(rest, a2n)
        return (aL * a2n + x2) * a1n + x1

    sp = np.array([s_perm(s) for s in range(nS)])
    ap = np.array([a_perm(a) for a in range(spec.n_actions)])
    P = np.zeros_like(spec.transitions)
    P[ap[:, None, None], sp[None, :, None], sp[None, None, :]] = spec.transitions
    rewards = {}
    for k in ("L", "F1"):
        r = np.zeros_like(spec.reward(k))
        r[sp[:, None], ap[None, :]] = spec.reward(k)
        rewards[k] = r
    game = GameSpec(n2, n1, nf, spec.aL_size, a2n, a1n, P, {"L": rewards["L"], "F": rewards["F1"]},
                    spec.beta, spec.sigma2, spec.sigma1)
    leader = np.zeros_like(profile.leader)
    leader[sp] = profile.leader
    f1 = profile.follower2.transpose(1, 0, 2, 3)
    f2 = profile.follower1.transpose(1, 0, 2, 3)
    return game, PolicyProfile(leader, f1, f2)


@pytest.fixture
def game():
    return make_game(11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
