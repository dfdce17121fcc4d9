"""Seeded random games for studies and property tests."""
from __future__ import annotations

import numpy as np

from .game import GameSpec

COOPERATIVE = "cooperative"
ZERO_SUM = "zero-sum"
GENERAL = "general"
INDEPENDENT = "independent"
STRUCTURES = (COOPERATIVE, ZERO_SUM, GENERAL, INDEPENDENT)


def random_transitions(rng: np.random.Generator, n_actions: int, n_states: int) -> np.ndarray:
    """Rows drawn uniformly from the probability simplex."""
    return rng.dirichlet(np.ones(n_states), size=(n_actions, n_states))


def random_game(rng: np.random.Generator, sizes=(2, 2, 2), actions=(1, 2, 2),
                reward_range=(-50, 50), structure: str = COOPERATIVE,
                beta: float = 0.9) -> tuple[GameSpec, str]:
    """Draw a game with integer rewards; returns ``(spec, flavour)``.

    ``cooperative`` sets ``r^F = r^L`` and ``zero-sum`` sets ``r^F = -r^L``.
    ``general`` draws independent magnitudes and then aligns the follower
    reward's signs with the leader's (flavour ``cooperative``) or opposes
    them (flavour ``zero-sum``), each with probability 1/2.
    ``independent`` draws both tables independently (flavour ``general``).
    """
    if structure not in STRUCTURES:
        raise ValueError(f"unknown structure {structure!r}")
    n1, n2, nf = sizes
    aL, a1, a2 = actions
    nS, nA = n1 * n2 * nf, aL * a1 * a2
    lo, hi = reward_range
    rL = rng.integers(lo, hi + 1, size=(nS, nA)).astype(float)
    P = random_transitions(rng, nA, nS)
    if structure == COOPERATIVE:
        rF, flavour = rL.copy(), COOPERATIVE
    elif structure == ZERO_SUM:
        rF, flavour = -rL, ZERO_SUM
    elif structure == INDEPENDENT:
        rF, flavour = rng.integers(lo, hi + 1, size=(nS, nA)).astype(float), GENERAL
    else:
        mag = np.abs(rng.integers(lo, hi + 1, size=(nS, nA))).astype(float)
        flavour = COOPERATIVE if rng.random() < 0.5 else ZERO_SUM
        sign = np.sign(rL) if flavour == COOPERATIVE else -np.sign(rL)
        rF = sign * mag
    spec = GameSpec(n1, n2, nf, aL, a1, a2, P, {"L": rL, "F": rF}, beta)
    return spec, flavour
