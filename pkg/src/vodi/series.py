"""Power-series coefficients of the leader value in the channel error rates.

The exact value at error rates ``(e1, e2)`` solves
``(I - beta P(e1, e2)) g = R`` with ``P`` bilinear in ``(e1, e2)``.
Matching powers gives ``(I - beta P_acc) a[k, l] = D1 a[k-1, l] + D2 a[k, l-1]
+ D12 a[k-1, l-1]`` where ``D1 = beta (P_e1 - P_acc)``,
``D2 = beta (P_e2 - P_acc)`` and ``D12 = beta (P_e12 - P_e1 - P_e2 + P_acc)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .game import (BeliefVector, GameSpec, InfoKernels, InfoSpace, PolicyProfile,
                   expected_reward_vector, info_transition_kernels)

DIRECT_SOLVE_LIMIT = 4096
DELTA, DELTA_BAR, THETA = "Delta", "DeltaBar", "Theta"


class _Resolvent:
    """Applies ``(I - beta P)^-1``: LU for small systems, fixed-point iteration otherwise."""

    def __init__(self, P: np.ndarray, beta: float, tol: float = 1e-13):
        self.P, self.beta, self.tol = P, beta, tol
        n = P.shape[0]
        self.lu = lu_factor(np.eye(n) - beta * P) if n <= DIRECT_SOLVE_LIMIT else None

    def __call__(self, b: np.ndarray) -> np.ndarray:
        if self.lu is not None:
            return lu_solve(self.lu, b)
        x = b.copy()
        scale = max(1.0, np.abs(b).max())
        # the error contracts by beta per sweep
        while True:
            x_new = b + self.beta * (self.P @ x)
            if np.abs(x_new - x).max() * self.beta / (1 - self.beta) <= self.tol * scale:
                return x_new
            x = x_new

    def residual(self, x: np.ndarray, b: np.ndarray) -> float:
        return float(np.abs(x - self.beta * (self.P @ x) - b).max()) if x.size else 0.0


@dataclass(frozen=True, eq=False)
class AlphaTable:
    """Coefficient vectors ``coeffs[(k, l)]`` for ``0 <= k, l <= K``."""

    K: int
    coeffs: dict
    agent: str
    beta: float
    # max |R_delta| of the agent's expected reward; scales every norm bound
    M: float
    space: InfoSpace = field(repr=False)
    residuals: dict = field(default_factory=dict, repr=False)

    def __getitem__(self, kl) -> np.ndarray:
        return self.coeffs[tuple(kl)]

    def __contains__(self, kl) -> bool:
        return tuple(kl) in self.coeffs

    def orders(self):
        return sorted(self.coeffs, key=lambda kl: (kl[0] + kl[1], kl))

    @property
    def alpha10(self) -> np.ndarray:
        return self.coeffs[(1, 0)]

    @property
    def alpha01(self) -> np.ndarray:
        return self.coeffs[(0, 1)]


def _kernels_and_reward(spec, profile, agent, kernels=None):
    space = InfoSpace(spec)
    kernels = kernels or info_transition_kernels(spec, profile, space)
    R = expected_reward_vector(spec, profile, agent, space)
    return space, kernels, R


def compute_alpha00(spec: GameSpec, profile: PolicyProfile, agent: str = "L") -> np.ndarray:
    """Value with accurate reports: solves ``(I - beta P_acc) x = R``."""
    _, kernels, R = _kernels_and_reward(spec, profile, agent)
    return _Resolvent(kernels.acc, spec.beta)(R)


def _source(kernels: InfoKernels, beta: float, x: np.ndarray, order: str) -> np.ndarray:
    if order == DELTA:
        return beta * (kernels.e1 @ x - kernels.acc @ x)
    if order == DELTA_BAR:
        return beta * (kernels.e2 @ x - kernels.acc @ x)
    if order == THETA:
        return beta * (kernels.e12 @ x - kernels.e1 @ x - kernels.e2 @ x + kernels.acc @ x)
    raise ValueError(f"unknown source term {order!r}")


def compute_source_terms(spec: GameSpec, profile: PolicyProfile, alpha_kl,
                         order: str, kernels: InfoKernels | None = None) -> np.ndarray:
    """Apply one of the ``Delta``/``DeltaBar``/``Theta`` operators to a coefficient vector."""
    kernels = kernels or info_transition_kernels(spec, profile)
    return _source(kernels, spec.beta, np.asarray(alpha_kl, float), order)


def compute_alpha_table(spec: GameSpec, profile: PolicyProfile, K: int = 2,
                        agent: str = "L", kernels: InfoKernels | None = None) -> AlphaTable:
    """All coefficients ``alpha[k, l]`` with ``k, l <= K``, lower orders first."""
    if K < 0:
        raise ValueError("K must be non-negative")
    space, kernels, R = _kernels_and_reward(spec, profile, agent, kernels)
    solve = _Resolvent(kernels.acc, spec.beta)
    beta = spec.beta
    coeffs, residuals = {}, {}
    pairs = sorted(((k, l) for k in range(K + 1) for l in range(K + 1)),
                   key=lambda kl: (kl[0] + kl[1], kl))
    for k, l in pairs:
        if k == l == 0:
            src = R
        else:
            src = np.zeros(space.size)
            if k >= 1:
                src = src + _source(kernels, beta, coeffs[(k - 1, l)], DELTA)
            if l >= 1:
                src = src + _source(kernels, beta, coeffs[(k, l - 1)], DELTA_BAR)
            if k >= 1 and l >= 1:
                src = src + _source(kernels, beta, coeffs[(k - 1, l - 1)], THETA)
        x = solve(src)
        coeffs[(k, l)] = x
        residuals[(k, l)] = solve.residual(x, src)
    M = float(np.abs(R).max()) if R.size else 0.0
    return AlphaTable(K, coeffs, agent, beta, M, space, residuals)


def convergence_radius(beta: float) -> float:
    """Radius in each error rate inside which the series is proven to converge."""
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if beta <= 1.0 / 9.0:
        return 1.0
    return (1.0 - beta) / (8.0 * beta)


def coefficient_bound(k: int, l: int, beta: float, M: float) -> float:
    """Envelope on ``||alpha[k, l]||`` (max norm)."""
    base = M / (1.0 - beta)
    if k + l == 0:
        return base
    if k + l == 1:
        return 2.0 * beta * M / (1.0 - beta) ** 2
    c = 8.0 * beta / (1.0 - beta)
    bound = c ** (max(k, l) if beta <= 1.0 / 9.0 else k + l) * base
    if k == 0 or l == 0:
        bound = min(bound, (2.0 * beta / (1.0 - beta)) ** (k + l) * base)
    return bound


@dataclass(frozen=True)
class BoundRecord:
    k: int
    l: int
    norm: float
    bound: float
    passed: bool


def check_norm_bounds(table: AlphaTable, spec: GameSpec | None = None,
                      profile: PolicyProfile | None = None, rtol: float = 1e-12) -> list[BoundRecord]:
    """Compare every coefficient's max norm with its envelope.

    ``spec`` and ``profile`` are optional; when given, ``M`` is recomputed
    from them instead of taken from the table.
    """
    M = table.M
    if spec is not None and profile is not None:
        M = float(np.abs(expected_reward_vector(spec, profile, table.agent)).max())
    out = []
    for k, l in table.orders():
        norm = float(np.abs(table[k, l]).max())
        bound = coefficient_bound(k, l, table.beta, M)
        out.append(BoundRecord(k, l, norm, bound, norm <= bound * (1 + rtol) + 1e-12))
    return out


@dataclass(frozen=True, eq=False)
class SeriesValue:
    value: np.ndarray
    tail_bound: float
    warning: str | None = None


def _geometric_partial(t: float, K: int) -> float:
    return float(K + 1) if t == 1.0 else (1.0 - t ** (K + 1)) / (1.0 - t)


def tail_bound(beta: float, M: float, K: int, eps1: float, eps2: float) -> float:
    """Envelope on the coefficients omitted by the ``k, l <= K`` truncation."""
    if M == 0 or (eps1 == 0 and eps2 == 0):
        return 0.0
    base = M / (1.0 - beta)
    c = 8.0 * beta / (1.0 - beta)
    if beta > 1.0 / 9.0:
        x, y = c * eps1, c * eps2
        if x >= 1 or y >= 1:
            return math.inf
        full = 1.0 / ((1 - x) * (1 - y))
        kept = _geometric_partial(x, K) * _geometric_partial(y, K)
        return base * max(full - kept, 0.0)
    if eps1 >= 1 or eps2 >= 1:
        return math.inf
    # shells of constant max(k, l) = m beyond the truncation
    total, m = 0.0, K + 1
    while m < 100_000:
        shell = (_geometric_partial(eps1, m) * _geometric_partial(eps2, m)
                 - _geometric_partial(eps1, m - 1) * _geometric_partial(eps2, m - 1))
        term = c ** m * shell
        total += term
        if term <= 1e-17 * max(total, 1e-300) or term == 0.0:
            break
        m += 1
    return base * total


def evaluate_series(table: AlphaTable, eps1: float, eps2: float) -> SeriesValue:
    """Truncated series ``sum eps1^k eps2^l alpha[k, l]`` with its tail envelope."""
    if eps1 < 0 or eps2 < 0:
        raise ValueError("error rates must be non-negative")
    g = np.zeros(table.space.size)
    for (k, l), a in table.coeffs.items():
        g = g + (eps1 ** k) * (eps2 ** l) * a
    warning = None
    if table.beta > 0:
        r = convergence_radius(table.beta)
        if eps1 >= r or eps2 >= r:
            warning = f"error rates ({eps1}, {eps2}) outside the convergence radius {r:.6g}"
            warnings.warn(warning, RuntimeWarning, stacklevel=2)
    return SeriesValue(g, tail_bound(table.beta, table.M, table.K, eps1, eps2), warning)


def belief_value(values, s: int, belief: BeliefVector, space: InfoSpace | None = None,
                 eps1: float = 0.0, eps2: float = 0.0) -> float:
    """Leader value at full state ``s`` under a belief over the reports ``(z1, z2)``.

    ``values`` is a vector over information states or an :class:`AlphaTable`,
    which is evaluated at ``(eps1, eps2)``.
    """
    if isinstance(values, AlphaTable):
        space = values.space
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            values = evaluate_series(values, eps1, eps2).value
    if space is None:
        raise ValueError("an InfoSpace is needed to index a plain value vector")
    w = belief.weights
    if w.shape != (space.n_z1, space.n_z2):
        raise ValueError(f"belief shape {w.shape} does not match reports "
                         f"{(space.n_z1, space.n_z2)}")
    z1, z2 = np.meshgrid(np.arange(space.n_z1), np.arange(space.n_z2), indexing="ij")
    idx = space.index(s, z1, z2)
    return float((w * np.asarray(values)[idx]).sum())
