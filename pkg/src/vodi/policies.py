"""Follower response policies, stability thresholds and policy distance.

The followers share one reward, so their best response to a fixed leader rule
is an ordinary MDP over the full state with joint follower actions
``j = a1 * n_af2 + a2``.  Rules are extracted at face value: follower 1
treats its report ``z1`` as if it were ``s2`` and follower 2 treats ``z2``
as if it were ``s1``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .game import (GameSpec, InfoSpace, PolicyProfile, constant_leader,
                   info_transition_kernels, expected_reward_vector,
                   report_maps)

FULL = "full"
SINGLE_DEVIATION = "single"
DEFAULT_BUDGET = 2 ** 20


@dataclass(frozen=True)
class SolveOptions:
    tolerance: float = 1e-10
    max_iterations: int = 100_000
    # relative slack under which two action values count as tied
    tie_tolerance: float = 1e-12
    tie_break: str = "lexicographic"

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.tie_break != "lexicographic":
            raise ValueError(f"unknown tie-break rule {self.tie_break!r}")


class ConvergenceError(RuntimeError):
    pass


def leader_probabilities(spec: GameSpec, leader=None) -> np.ndarray:
    """Normalize a leader rule to an ``(n_states, aL)`` probability array.

    ``None`` means the constant action 0; a 1-d integer array is a
    deterministic rule.
    """
    if leader is None:
        return constant_leader(spec, 0)
    arr = np.asarray(leader)
    if arr.ndim == 1:
        return np.eye(spec.aL_size)[arr.astype(int)]
    if arr.shape != (spec.n_states, spec.aL_size):
        raise ValueError(f"leader rule has shape {arr.shape}")
    return arr.astype(float)


def follower_mdp(spec: GameSpec, leader=None, agent: str = "F1"):
    """Reward ``(nS, nJ)`` and kernel ``(nJ, nS, nS)`` seen by the followers."""
    pl = leader_probabilities(spec, leader)
    nS, nJ = spec.n_states, spec.n_follower_actions
    r = spec.reward(agent).reshape(nS, spec.aL_size, nJ)
    R = np.einsum("sl,slj->sj", pl, r)
    P = spec.transitions.reshape(spec.aL_size, nJ, nS, nS)
    T = np.einsum("sl,ljst->jst", pl, P)
    return R, T


def _require_shared(spec: GameSpec):
    if not spec.shares_follower_reward():
        raise ValueError("followers have different rewards; general-sum follower "
                         "equilibria are not supported")


def _greedy(q: np.ndarray, tie_tolerance: float) -> np.ndarray:
    """Row-wise argmax returning the smallest index within the tie slack."""
    best = q.max(axis=1, keepdims=True)
    slack = tie_tolerance * np.maximum(1.0, np.abs(best))
    return np.argmax(q >= best - slack, axis=1)


def _q_values(R, T, beta, v):
    return R + beta * np.einsum("jst,t->sj", T, v)


def _evaluate(R, T, beta, joint):
    nS = R.shape[0]
    rows = np.arange(nS)
    P = T[joint, rows]
    return np.linalg.solve(np.eye(nS) - beta * P, R[rows, joint])


def profile_from_joint(spec: GameSpec, leader, joint) -> PolicyProfile:
    """Build follower rules from a joint action choice per full state."""
    joint = np.asarray(joint, dtype=int).reshape(spec.sL1_size, spec.sL2_size, spec.sF_size)
    a1, a2 = np.divmod(joint, spec.aF2_size)
    # follower 1 reads z1 as s2: rule[s1, z1, sf] = a1 at state (s1, z1, sf)
    # follower 2 reads z2 as s1: rule[z2, s2, sf] = a2 at state (z2, s2, sf)
    return PolicyProfile(leader_probabilities(spec, leader),
                         np.eye(spec.aF1_size)[a1], np.eye(spec.aF2_size)[a2])


def solve_joint_best_response(spec: GameSpec, leader=None,
                              options: SolveOptions | None = None):
    """Optimal joint follower response to a fixed leader rule.

    Returns ``(v, profile)`` where ``v`` is the follower value over full
    states.  Value iteration brings the greedy rule close to optimal and
    policy iteration with exact evaluation then removes the remaining
    approximation error.
    """
    _require_shared(spec)
    options = options or SolveOptions()
    R, T = follower_mdp(spec, leader)
    beta = spec.beta
    if beta == 0.0:
        joint = _greedy(R, options.tie_tolerance)
        return R[np.arange(len(joint)), joint].copy(), profile_from_joint(spec, leader, joint)

    stop = options.tolerance * (1 - beta) / (2 * beta)
    v = np.zeros(spec.n_states)
    for it in range(options.max_iterations):
        v_new = _q_values(R, T, beta, v).max(axis=1)
        gap = np.abs(v_new - v).max()
        v = v_new
        if gap < stop:
            break
    else:
        raise ConvergenceError(f"value iteration did not converge in "
                               f"{options.max_iterations} iterations (residual {gap:.3e})")

    joint = _greedy(_q_values(R, T, beta, v), options.tie_tolerance)
    for _ in range(100):
        v = _evaluate(R, T, beta, joint)
        new = _greedy(_q_values(R, T, beta, v), options.tie_tolerance)
        if np.array_equal(new, joint):
            break
        joint = new
    return v, profile_from_joint(spec, leader, joint)


def bellman_residual(spec: GameSpec, v, leader=None) -> float:
    """``max |T v - v|`` for the followers' optimality operator."""
    R, T = follower_mdp(spec, leader)
    return float(np.abs(_q_values(R, T, spec.beta, v).max(axis=1) - v).max())


def myopic_policy(spec: GameSpec, leader=None, options: SolveOptions | None = None) -> PolicyProfile:
    """Followers maximize the immediate shared reward at the believed state."""
    _require_shared(spec)
    options = options or SolveOptions()
    R, _ = follower_mdp(spec, leader)
    return profile_from_joint(spec, leader, _greedy(R, options.tie_tolerance))


def k_step_values(spec: GameSpec, k: int, leader=None) -> np.ndarray:
    """Optimal ``k``-stage follower value with zero terminal value."""
    R, T = follower_mdp(spec, leader)
    v = np.zeros(spec.n_states)
    for _ in range(k):
        v = _q_values(R, T, spec.beta, v).max(axis=1)
    return v


def k_step_policy(spec: GameSpec, leader=None, k: int = 1,
                  options: SolveOptions | None = None) -> PolicyProfile:
    """First-stage rule of the depth-``k`` lookahead, used as a stationary rule."""
    if k < 1:
        raise ValueError("k must be at least 1")
    _require_shared(spec)
    options = options or SolveOptions()
    R, T = follower_mdp(spec, leader)
    v = k_step_values(spec, k - 1, leader)
    return profile_from_joint(spec, leader, _greedy(_q_values(R, T, spec.beta, v),
                                                     options.tie_tolerance))


def mix_policies(p: PolicyProfile, q: PolicyProfile, lam: float) -> PolicyProfile:
    """Pointwise convex combination ``(1 - lam) p + lam q``."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    parts = []
    for name in ("leader", "follower1", "follower2"):
        a, b = getattr(p, name), getattr(q, name)
        if a.shape != b.shape:
            raise ValueError(f"{name} shapes differ: {a.shape} vs {b.shape}")
        parts.append(a if lam == 0 else b if lam == 1 else (1 - lam) * a + lam * b)
    return PolicyProfile(*parts)


def mix_rewards(spec: GameSpec, rF_star, rF_other, lam: float) -> GameSpec:
    """Install ``lam * rF_star + (1 - lam) * rF_other`` as the shared follower reward."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must lie in [0, 1]")
    a, b = np.asarray(rF_star, float), np.asarray(rF_other, float)
    if a.shape != b.shape or a.shape != (spec.n_states, spec.n_actions):
        raise ValueError(f"reward shapes {a.shape}, {b.shape} do not match the game")
    mixed = a if lam == 1 else b if lam == 0 else lam * a + (1 - lam) * b
    return spec.with_rewards(F=mixed)


def policy_distance(spec: GameSpec, p: PolicyProfile, q: PolicyProfile) -> float:
    """Max absolute row sum of the difference of the accurate-report kernels."""
    space = InfoSpace(spec)
    diff = info_transition_kernels(spec, p, space).acc - info_transition_kernels(spec, q, space).acc
    return float(np.abs(diff).sum(axis=1).max())


@dataclass(frozen=True)
class StabilityResult:
    c: float
    b: float
    M: float
    mode: str
    candidates: int
    # SINGLE_DEVIATION only sees part of the alternatives, so c may be too large
    upper_bound: bool
    minimizer: np.ndarray | None = None


def initial_distribution(spec: GameSpec, space: InfoSpace | None = None) -> np.ndarray:
    """Uniform distribution over the accurate-diagonal information states."""
    space = space or InfoSpace(spec)
    y = np.zeros(space.size)
    y[space.diagonal] = 1.0 / spec.n_states
    return y


def _follower_rules(spec, follower, mode, current, budget):
    """Yield candidate deterministic rule arrays for one follower."""
    shape = current.shape
    n_actions = spec.aF1_size if follower == "F1" else spec.aF2_size
    n_points = int(np.prod(shape))
    if mode == FULL:
        for combo in itertools.product(range(n_actions), repeat=n_points):
            yield np.array(combo).reshape(shape)
    else:
        flat = current.reshape(-1)
        for point in range(n_points):
            for a in range(n_actions):
                if a != flat[point]:
                    rule = flat.copy()
                    rule[point] = a
                    yield rule.reshape(shape)


def follower_values(spec: GameSpec, profiles, agent: str, eps1: float = 0.0,
                    eps2: float = 0.0, initial=None) -> np.ndarray:
    """``initial . g`` for each profile, where ``g`` is the agent's exact value."""
    space = InfoSpace(spec)
    y = initial_distribution(spec, space) if initial is None else np.asarray(initial, float)
    out = []
    eye = np.eye(space.size)
    maps = report_maps(spec, space)
    for prof in profiles:
        P = info_transition_kernels(spec, prof, space, maps).blend(eps1, eps2)
        R = expected_reward_vector(spec, prof, agent, space)
        out.append(y @ np.linalg.solve(eye - spec.beta * P, R))
    return np.array(out)


def best_rule_by_enumeration(spec: GameSpec, profile: PolicyProfile, follower: str,
                             eps1: float = 0.0, eps2: float = 0.0, initial=None,
                             tie_tolerance: float = 1e-12):
    """Follower rule maximizing its initial-weighted value with the other rule fixed.

    Returns the integer rule array and its value.  Exhaustive over all
    deterministic zero-memory rules; ties go to the first rule in
    lexicographic order.
    """
    current = _rule_argmax(profile, follower)
    rules = list(_follower_rules(spec, follower, FULL, current, None))
    vals = follower_values(spec, [_replace_rule(spec, profile, follower, r) for r in rules],
                           follower, eps1, eps2, initial)
    best = vals.max()
    k = int(np.argmax(vals >= best - tie_tolerance * max(1.0, abs(best))))
    return rules[k], float(vals[k])


def _rule_argmax(profile: PolicyProfile, follower: str) -> np.ndarray:
    arr = profile.follower1 if follower == "F1" else profile.follower2
    return arr.argmax(axis=-1)


def _replace_rule(spec, profile, follower, rule):
    if follower == "F1":
        return PolicyProfile(profile.leader, np.eye(spec.aF1_size)[rule], profile.follower2)
    return PolicyProfile(profile.leader, profile.follower1, np.eye(spec.aF2_size)[rule])


def stability_threshold(spec: GameSpec, profile: PolicyProfile, follower: str = "F1",
                        mode: str | None = None, eps1: float = 0.0, eps2: float = 0.0,
                        initial=None, budget: int = DEFAULT_BUDGET) -> StabilityResult:
    """Channel perturbation below which follower ``follower`` keeps its rule.

    ``b`` is the smallest value gap between the nominal rule and any
    alternative deterministic rule (the other follower's rule held fixed),
    weighted by ``initial`` (default: uniform on the accurate diagonal) at
    the nominal channel.  Then ``c = b (1 - beta)^2 / (4 beta M)`` with
    ``M = max |r^F_i|``.
    """
    if follower not in ("F1", "F2"):
        raise ValueError(f"follower must be 'F1' or 'F2', got {follower!r}")
    rule_arr = profile.follower1 if follower == "F1" else profile.follower2
    n_actions = rule_arr.shape[-1]
    n_points = int(np.prod(rule_arr.shape[:-1]))
    total = n_actions ** n_points
    if mode is None:
        mode = FULL if total <= budget else SINGLE_DEVIATION
    if mode not in (FULL, SINGLE_DEVIATION):
        raise ValueError(f"unknown enumeration mode {mode!r}")
    if mode == FULL and total > budget:
        raise ValueError(f"{total} candidate rules exceed the budget of {budget}")

    deterministic = np.all((rule_arr == 0) | (rule_arr == 1))
    current = rule_arr.argmax(axis=-1)
    rules = [r for r in _follower_rules(spec, follower, mode, current, budget)
             if not (deterministic and np.array_equal(r, current))]
    M = float(np.abs(spec.reward(follower)).max())
    nominal = follower_values(spec, [profile], follower, eps1, eps2, initial)[0]
    alts = follower_values(spec, [_replace_rule(spec, profile, follower, r) for r in rules],
                           follower, eps1, eps2, initial)
    gaps = nominal - alts
    k = int(np.argmin(gaps))
    b = float(gaps[k])
    upper = mode == SINGLE_DEVIATION
    if spec.beta == 0.0:
        return StabilityResult(math.inf, b, M, mode, len(rules), upper, rules[k])
    if b <= 0:
        raise ValueError("nominal profile not strictly best response "
                         f"(smallest gap {b:.3e})")
    if M == 0:
        return StabilityResult(math.inf, b, M, mode, len(rules), upper, rules[k])
    c = b * (1 - spec.beta) ** 2 / (4 * spec.beta * M)
    return StabilityResult(c, b, M, mode, len(rules), upper, rules[k])
