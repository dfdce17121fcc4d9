"""Ground-truth leader values: direct linear solves and Monte Carlo rollouts."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .game import (GameSpec, InfoSpace, PolicyProfile, action_probabilities,
                   build_channel_matrix, Channel, expected_reward_vector,
                   info_transition_kernels)

# episodes sharing one random stream; results do not depend on scheduling
BLOCK_SIZE = 4096


def exact_value(spec: GameSpec, profile: PolicyProfile, eps1: float, eps2: float,
                agent: str = "L") -> np.ndarray:
    """Value over information states for fixed error rates, by one linear solve."""
    for e in (eps1, eps2):
        if not 0.0 <= e <= 1.0:
            raise ValueError(f"error rate {e} outside [0, 1]")
    space = InfoSpace(spec)
    P = info_transition_kernels(spec, profile, space).blend(eps1, eps2)
    R = expected_reward_vector(spec, profile, agent, space)
    return np.linalg.solve(np.eye(space.size) - spec.beta * P, R)


def finite_difference_alpha(spec: GameSpec, profile: PolicyProfile, direction: str = "eps1",
                            h: float = 1e-5, agent: str = "L") -> np.ndarray:
    """Forward difference quotients of :func:`exact_value` at zero error.

    ``direction`` is ``"eps1"``, ``"eps2"`` or ``"mixed"``.  The first-order
    quotients use ``g(h) - g(0) = (I - beta P_h)^-1 beta (P_h - P_0) g(0)``,
    which is the same number as the plain subtraction without its
    cancellation error.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    space = InfoSpace(spec)
    ker = info_transition_kernels(spec, profile, space)
    R = expected_reward_vector(spec, profile, agent, space)
    eye = np.eye(space.size)
    beta = spec.beta

    def g(e1, e2):
        return np.linalg.solve(eye - beta * ker.blend(e1, e2), R)

    if direction == "mixed":
        return (g(h, h) - g(h, 0) - g(0, h) + g(0, 0)) / (h * h)
    g0 = g(0.0, 0.0)
    if direction == "eps1":
        P_h, dP = ker.blend(h, 0.0), ker.e1 - ker.acc
    elif direction == "eps2":
        P_h, dP = ker.blend(0.0, h), ker.e2 - ker.acc
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return np.linalg.solve(eye - beta * P_h, beta * (dP @ g0))


@dataclass(frozen=True)
class SimConfig:
    horizon: int = 200
    episodes: int = 100_000
    seed: int = 0
    # distribution over information states; default uniform on the accurate diagonal
    initial: np.ndarray | None = None

    def __post_init__(self):
        if self.horizon < 1 or self.episodes < 1:
            raise ValueError("horizon and episodes must be positive")


def truncation_bias(beta: float, M: float, horizon: int) -> float:
    """Largest possible discounted reward left out after ``horizon`` epochs."""
    return beta ** horizon * M / (1.0 - beta)


def horizon_for(beta: float, M: float, bias: float) -> int:
    """Smallest horizon whose truncation bias is at most ``bias``."""
    if M == 0 or beta == 0:
        return 1
    return max(1, math.ceil(math.log(bias * (1 - beta) / M) / math.log(beta)))


@dataclass(frozen=True, eq=False)
class SimResult:
    estimate: float
    stderr: float
    bias_bound: float
    episodes: int


def _cumulative(p: np.ndarray) -> np.ndarray:
    """Cumulative sums along the last axis, pinned to 1 from the last positive entry on."""
    p = np.asarray(p, float)
    cum = np.cumsum(p, axis=-1)
    n = p.shape[-1]
    last = n - 1 - np.argmax(p[..., ::-1] > 0, axis=-1)
    cum[np.arange(n) >= last[..., None]] = 1.0
    return cum


def _sample(cum: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Index of the first cumulative entry exceeding ``u``, row by row."""
    out = (cum <= u[:, None]).sum(axis=1)
    return np.minimum(out, cum.shape[1] - 1)


def simulate_value(spec: GameSpec, profile: PolicyProfile, eps1: float, eps2: float,
                   agent: str = "L", config: SimConfig | None = None) -> SimResult:
    """Monte Carlo estimate of the initial-distribution-weighted value.

    Each block of ``BLOCK_SIZE`` episodes draws from its own stream seeded by
    ``(seed, block)``, so the estimate is reproducible bit for bit.
    """
    config = config or SimConfig()
    space = InfoSpace(spec)
    if config.initial is None:
        y0 = np.zeros(space.size)
        y0[space.diagonal] = 1.0 / spec.n_states
    else:
        y0 = np.asarray(config.initial, float)
    init_cum = _cumulative(y0)
    act_cum = _cumulative(action_probabilities(spec, profile, space))
    trans_cum = _cumulative(spec.transitions)  # (nA, nS, nS)
    sig1_cum = _cumulative(spec.sigma1) if spec.sL2_size > 1 else None
    sig2_cum = _cumulative(spec.sigma2) if spec.sL1_size > 1 else None
    reward = spec.reward(agent)
    beta = spec.beta
    n_sf, n_s2 = spec.sF_size, spec.sL2_size

    returns = np.empty(config.episodes)
    n_blocks = -(-config.episodes // BLOCK_SIZE)
    for block in range(n_blocks):
        lo = block * BLOCK_SIZE
        n = min(BLOCK_SIZE, config.episodes - lo)
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, block]))
        zeta = _sample(np.broadcast_to(init_cum, (n, space.size)), rng.random(n))
        s, z1, z2 = space.s[zeta], space.z1[zeta], space.z2[zeta]
        total = np.zeros(n)
        disc = 1.0
        for _ in range(config.horizon):
            zeta = space.index(s, z1, z2)
            a = _sample(act_cum[zeta], rng.random(n))
            total += disc * reward[s, a]
            disc *= beta
            s = _sample(trans_cum[a, s], rng.random(n))
            s12 = s // n_sf
            s1, s2 = np.divmod(s12, n_s2)
            u1, u2 = rng.random(n), rng.random(n)
            z1 = s2.copy()
            z2 = s1.copy()
            if sig1_cum is not None:
                bad = u1 >= 1.0 - eps1
                if bad.any():
                    z1[bad] = _sample(sig1_cum[s2[bad]], rng.random(int(bad.sum())))
            if sig2_cum is not None:
                bad = u2 >= 1.0 - eps2
                if bad.any():
                    z2[bad] = _sample(sig2_cum[s1[bad]], rng.random(int(bad.sum())))
        returns[lo:lo + n] = total

    M = float(np.abs(reward).max())
    stderr = float(returns.std(ddof=1) / math.sqrt(len(returns))) if len(returns) > 1 else 0.0
    return SimResult(float(returns.mean()), stderr, truncation_bias(beta, M, config.horizon),
                     config.episodes)


def channel_matrices(spec: GameSpec, eps1: float, eps2: float):
    """Communication matrices of both channels at the given error rates."""
    return (build_channel_matrix(Channel(eps1, spec.sigma1)),
            build_channel_matrix(Channel(eps2, spec.sigma2)))
