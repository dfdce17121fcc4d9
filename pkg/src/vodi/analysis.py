"""Sign classification, sufficient-condition checkers and random-game studies."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .game import (GameSpec, InfoSpace, PolicyProfile, expected_reward_vector,
                   next_state_distribution)
from .policies import (k_step_policy, mix_policies, mix_rewards, policy_distance,
                       solve_joint_best_response)
from .randgame import COOPERATIVE, ZERO_SUM, random_game
from .series import AlphaTable, compute_alpha_table

NEGATIVE, POSITIVE, UNSIGNED, ZERO = "NEGATIVE", "POSITIVE", "UNSIGNED", "ZERO"
VIOLATION_TOL = 1e-7


@dataclass(frozen=True)
class ChannelVerdict:
    n_negative: int
    n_zero: int
    n_positive: int
    # all components <= tol / >= -tol; both hold for a vanishing vector
    nonpositive: bool
    nonnegative: bool

    @property
    def label(self) -> str:
        if self.nonpositive and self.nonnegative:
            return ZERO
        if self.nonpositive:
            return NEGATIVE
        if self.nonnegative:
            return POSITIVE
        return UNSIGNED

    @property
    def percent_positive(self) -> float:
        n = self.n_negative + self.n_zero + self.n_positive
        return 100.0 * self.n_positive / n if n else 0.0


def classify_vector(alpha: np.ndarray, tolerance: float = 0.0) -> ChannelVerdict:
    alpha = np.asarray(alpha)
    pos = int((alpha > tolerance).sum())
    neg = int((alpha < -tolerance).sum())
    return ChannelVerdict(neg, alpha.size - pos - neg, pos, pos == 0, neg == 0)


@dataclass(frozen=True)
class VodiClassification:
    channel1: ChannelVerdict
    channel2: ChannelVerdict
    tolerance: float


def classify_vodi(table: AlphaTable, tolerance: float = 0.0) -> VodiClassification:
    """Sign verdicts of ``alpha[1, 0]`` (channel 1) and ``alpha[0, 1]`` (channel 2).

    ``NEGATIVE`` means every component is at most ``tolerance``, so more
    error on that channel can only lower the leader's value to first order.
    """
    if tolerance < 0:
        raise ValueError("tolerance must be non-negative")
    return VodiClassification(classify_vector(table.alpha10, tolerance),
                              classify_vector(table.alpha01, tolerance), tolerance)


def check_zero_value(profile: PolicyProfile, atol: float = 0.0) -> bool:
    """True when neither follower's rule depends on its received report."""
    f1 = profile.follower1  # (s1, z1, sf, a1)
    f2 = profile.follower2  # (z2, s2, sf, a2)
    return bool(np.all(np.abs(f1 - f1[:, :1]) <= atol) and np.all(np.abs(f2 - f2[:1]) <= atol))


# -- deviation from a nominal profile -------------------------------------------------

@dataclass(frozen=True)
class DeviationReport:
    eta: tuple[float, float]
    h: tuple[float, float]
    lhs: tuple[float, float]
    rhs: tuple[float, float]
    distance: float
    alpha00_gap: float
    passed: tuple[bool, bool]

    def verdict(self, channel: int) -> str:
        """``pass`` certifies a non-positive first-order coefficient; a failure says nothing."""
        return "pass" if self.passed[channel - 1] else "inconclusive"


def _report_spread(space: InfoSpace, spec: GameSpec, a00: np.ndarray, channel: int) -> np.ndarray:
    """Per next state: sigma-average of ``a00`` over wrong reports minus the accurate entry."""
    s, s2, s1 = space._state_arrays()
    diag = a00[space.diagonal]
    if channel == 1:
        z = np.arange(space.n_z1)
        vals = a00[space.index(s[:, None], z[None, :], s1[:, None])]
        return (spec.sigma1[s2] * vals).sum(axis=1) - diag
    z = np.arange(space.n_z2)
    vals = a00[space.index(s[:, None], s2[:, None], z[None, :])]
    return (spec.sigma2[s1] * vals).sum(axis=1) - diag


def check_deviation_zero_memory(spec: GameSpec, nominal: PolicyProfile, candidate: PolicyProfile,
                                nominal_table: AlphaTable, candidate_alpha00) -> DeviationReport:
    """Sufficient condition for a nearby profile to keep non-positive first-order terms.

    For channel ``i``: ``eta_i * ||P(cand) - P(nom)|| + 2 ||a00_nom - a00_cand||
    <= (1 - beta) / beta * h_i`` with ``h_i = |max alpha_i|`` of the nominal
    table and ``eta_i = ||alpha_i|| + ||u_i||``, where ``u_i`` is the
    sigma-weighted spread of the nominal ``alpha[0, 0]`` over wrong reports.
    """
    a10, a01 = nominal_table.alpha10, nominal_table.alpha01
    if not (a10.max() < 0 and a01.max() < 0):
        raise ValueError("premise violated: nominal first-order coefficients are not "
                         "strictly negative")
    space = nominal_table.space
    a00 = nominal_table[0, 0]
    beta = spec.beta
    dist = policy_distance(spec, nominal, candidate)
    gap = float(np.abs(a00 - np.asarray(candidate_alpha00)).max())
    eta, h, lhs, rhs, ok = [], [], [], [], []
    for ch, a in ((1, a10), (2, a01)):
        e = float(np.abs(a).max() + np.abs(_report_spread(space, spec, a00, ch)).max())
        hi = abs(float(a.max()))
        left = e * dist + 2.0 * gap
        right = (1.0 - beta) / beta * hi
        eta.append(e)
        h.append(hi)
        lhs.append(left)
        rhs.append(right)
        ok.append(bool(left <= right))
    return DeviationReport(tuple(eta), tuple(h), tuple(lhs), tuple(rhs), dist, gap, tuple(ok))


# -- isotonicity ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Ordering:
    """Total order on accurate-diagonal states: ``rank[s]`` is the position of state ``s``."""

    rank: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rank, dtype=int)
        if not np.array_equal(np.sort(r), np.arange(len(r))):
            raise ValueError("ordering is not a bijection onto 0..n-1")
        object.__setattr__(self, "rank", r)

    @classmethod
    def from_sequence(cls, states) -> "Ordering":
        """Ordering that lists ``states`` from lowest to highest."""
        states = np.asarray(states, dtype=int)
        rank = np.empty(len(states), dtype=int)
        rank[states] = np.arange(len(states))
        return cls(rank)

    @property
    def sequence(self) -> np.ndarray:
        return np.argsort(self.rank)


def default_ordering(spec: GameSpec, profile: PolicyProfile, agent: str = "L") -> Ordering:
    """Sort states by accurate-report expected reward, ties by state index."""
    space = InfoSpace(spec)
    R = expected_reward_vector(spec, profile, agent, space)[space.diagonal]
    return Ordering.from_sequence(np.lexsort((np.arange(len(R)), R)))


@dataclass(frozen=True)
class ConditionResult:
    passed: bool
    counterexample: tuple | None = None
    detail: str = ""


@dataclass(frozen=True, eq=False)
class IsotonicityReport:
    conditions: dict
    ordering: Ordering
    all_passed: bool
    # checked only when all four conditions pass
    conclusion_holds: bool | None
    table: AlphaTable | None = field(default=None, repr=False)


def _first_decrease(values: np.ndarray, seq: np.ndarray, tol: float):
    """First adjacent pair along ``seq`` where ``values`` drops by more than ``tol``."""
    v = values[seq]
    bad = np.flatnonzero(v[1:] < v[:-1] - tol)
    if bad.size == 0:
        return None
    i = bad[0]
    return int(seq[i]), int(seq[i + 1])


def check_isotonicity_conditions(spec: GameSpec, profile: PolicyProfile,
                                 ordering: Ordering | None = None, agent: str = "L",
                                 tol: float = 1e-12) -> IsotonicityReport:
    """Evaluate conditions (i)-(iv) that together imply ``alpha[1,0] <= alpha[0,1]``.

    (i) accurate-report reward is isotone under the ordering; (ii) the
    upper-tail mass of the accurate-report transition is isotone for every
    threshold; (iii) the sigma-averaged reward with a wrong channel-1 report
    never exceeds the one with a wrong channel-2 report; (iv) the same
    comparison holds for every upper-tail transition mass.
    """
    space = InfoSpace(spec)
    nS = spec.n_states
    if ordering is None:
        ordering = default_ordering(spec, profile, agent)
    if len(ordering.rank) != nS:
        raise ValueError(f"ordering has {len(ordering.rank)} entries, expected {nS}")
    seq = ordering.sequence
    R = expected_reward_vector(spec, profile, agent, space)
    T = next_state_distribution(spec, profile, space)  # (N, nS)
    scale = max(1.0, float(np.abs(R).max()))
    s, s2, s1 = space._state_arrays()
    # tail[:, k] = mass on next states whose rank is >= k
    ranked = T[:, seq]
    tail = np.cumsum(ranked[:, ::-1], axis=1)[:, ::-1]

    conditions = {}
    diag = space.diagonal
    pair = _first_decrease(R[diag], seq, tol * scale)
    conditions["i"] = ConditionResult(pair is None, None if pair is None else
                                      (int(diag[pair[0]]), int(diag[pair[1]])),
                                      "reward decreases along the ordering" if pair else "")

    bad = None
    for k in range(nS):
        pair = _first_decrease(tail[diag, k], seq, tol)
        if pair is not None:
            bad = (k, int(diag[pair[0]]), int(diag[pair[1]]))
            break
    conditions["ii"] = ConditionResult(bad is None, bad,
                                       "tail mass decreases along the ordering" if bad else "")

    z1 = np.arange(space.n_z1)
    z2 = np.arange(space.n_z2)
    idx1 = space.index(s[:, None], z1[None, :], s1[:, None])  # wrong channel-1 report
    idx2 = space.index(s[:, None], s2[:, None], z2[None, :])  # wrong channel-2 report
    w1, w2 = spec.sigma1[s2], spec.sigma2[s1]
    r1 = (w1 * R[idx1]).sum(axis=1)
    r2 = (w2 * R[idx2]).sum(axis=1)
    viol = np.flatnonzero(r1 > r2 + tol * scale)
    conditions["iii"] = ConditionResult(viol.size == 0, None if viol.size == 0 else (int(viol[0]),),
                                        f"{r1[viol[0]]:.6g} > {r2[viol[0]]:.6g}" if viol.size else "")

    o1 = np.einsum("sz,szk->sk", w1, tail[idx1])
    o2 = np.einsum("sz,szk->sk", w2, tail[idx2])
    viol = np.argwhere(o1 > o2 + tol)
    conditions["iv"] = ConditionResult(viol.size == 0, None if viol.size == 0 else
                                       (int(viol[0][1]), int(viol[0][0])),
                                       "(threshold, state)" if viol.size else "")

    all_passed = all(c.passed for c in conditions.values())
    table = compute_alpha_table(spec, profile, 1, agent)
    holds = bool(np.all(table.alpha10 <= table.alpha01 + 1e-9)) if all_passed else None
    return IsotonicityReport(conditions, ordering, all_passed, holds, table)


# -- garbling -------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GarblingResult:
    status: str  # "exists", "none" or "inconclusive"
    R: np.ndarray | None
    residual: float
    min_entry: float

    @property
    def exists(self) -> bool:
        return self.status == "exists"


def check_garbling(q, q_prime, tolerance: float = 1e-9, max_condition: float = 1e12) -> GarblingResult:
    """Look for a stochastic ``R`` with ``Q R = Q'``.

    With ``Q`` invertible ``R = Q^-1 Q'`` is the only candidate, so the test
    is exact; a singular ``Q`` is reported as inconclusive.
    """
    Q, Qp = np.asarray(q, float), np.asarray(q_prime, float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape != Qp.shape:
        raise ValueError(f"channel matrices must be square and equal-sized, got {Q.shape}, {Qp.shape}")
    if np.linalg.cond(Q) > max_condition:
        return GarblingResult("inconclusive", None, float("nan"), float("nan"))
    R = np.linalg.solve(Q, Qp)
    residual = float(np.abs(Q @ R - Qp).sum(axis=1).max())
    min_entry = float(R.min())
    ok = min_entry >= -tolerance and np.all(np.abs(R.sum(axis=1) - 1.0) <= tolerance)
    return GarblingResult("exists" if ok else "none", R, residual, min_entry)


# -- random study ---------------------------------------------------------------------

@dataclass(frozen=True)
class StudyConfig:
    count: int = 1000
    structure: str = "general"
    seed: int = 0
    beta: float = 0.9
    # inclusive ranges for (s1, s2, sF) sizes and follower action counts
    state_sizes: tuple = ((2, 3), (2, 3), (1, 3))
    action_sizes: tuple = ((2, 3), (2, 3))
    reward_range: tuple = (-50, 50)

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be at least 1")


@dataclass(frozen=True)
class StudyRecord:
    index: int
    sizes: tuple
    flavour: str
    positive10: int
    negative10: int
    positive01: int
    negative01: int
    violation: bool


@dataclass(frozen=True)
class StudyReport:
    config: StudyConfig
    records: list

    @property
    def violations(self) -> int:
        return sum(r.violation for r in self.records)

    @property
    def fraction(self) -> float:
        return self.violations / len(self.records)


def study_game(config: StudyConfig, index: int):
    """The ``index``-th game of a study; its stream is seeded by ``(seed, index)``."""
    rng = np.random.default_rng([config.seed, index])
    n1, n2, nf = (int(rng.integers(lo, hi + 1)) for lo, hi in config.state_sizes)
    a1, a2 = (int(rng.integers(lo, hi + 1)) for lo, hi in config.action_sizes)
    spec, flavour = random_game(rng, (n1, n2, nf), (1, a1, a2), config.reward_range,
                                config.structure, config.beta)
    return spec, flavour


def is_violation(flavour: str, table: AlphaTable, tol: float = VIOLATION_TOL) -> bool:
    """A first-order coefficient with the sign the reward structure argues against."""
    a = np.concatenate([table.alpha10, table.alpha01])
    if flavour == COOPERATIVE:
        return bool(np.any(a > tol))
    if flavour == ZERO_SUM:
        return bool(np.any(a < -tol))
    return False


def random_study(config: StudyConfig) -> StudyReport:
    records = []
    for i in range(config.count):
        spec, flavour = study_game(config, i)
        _, profile = solve_joint_best_response(spec)
        table = compute_alpha_table(spec, profile, 1)
        c = classify_vodi(table, VIOLATION_TOL)
        records.append(StudyRecord(
            i, (spec.sL1_size, spec.sL2_size, spec.sF_size, spec.aF1_size, spec.aF2_size),
            flavour, c.channel1.n_positive, c.channel1.n_negative,
            c.channel2.n_positive, c.channel2.n_negative, is_violation(flavour, table)))
    return StudyReport(config, records)


# -- lambda sweeps --------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRecord:
    lam: float
    percent_positive10: float
    percent_positive01: float
    verdict10: str
    verdict01: str


def sweep_lambda(spec: GameSpec, kind: str, grid, target: str = COOPERATIVE,
                 k: int = 3, tolerance: float = 0.0) -> list[SweepRecord]:
    """Percentage of positive first-order components along a mixing path.

    ``kind="reward"`` mixes ``lam * r_target + (1 - lam) * r^F`` where
    ``r_target`` is ``r^L`` (``target="cooperative"``) or ``-r^L``
    (``"zero-sum"``) and re-solves the followers' best response.
    ``kind="policy"`` mixes ``(1 - lam) * (k-step rule) + lam * (optimal rule)``.
    """
    grid = [float(x) for x in grid]
    if any(not 0.0 <= x <= 1.0 for x in grid):
        raise ValueError("lambda grid must lie in [0, 1]")
    out = []
    if kind == "reward":
        rL = spec.reward("L")
        r_star = rL if target == COOPERATIVE else -rL
        r_other = spec.reward("F1")
        for lam in grid:
            game = mix_rewards(spec, r_star, r_other, lam)
            _, prof = solve_joint_best_response(game)
            out.append(_sweep_record(lam, compute_alpha_table(game, prof, 1), tolerance))
    elif kind == "policy":
        p = k_step_policy(spec, k=k)
        _, q = solve_joint_best_response(spec)
        for lam in grid:
            prof = mix_policies(p, q, lam)
            out.append(_sweep_record(lam, compute_alpha_table(spec, prof, 1), tolerance))
    else:
        raise ValueError(f"unknown sweep kind {kind!r}")
    return out


def _sweep_record(lam, table, tolerance):
    c = classify_vodi(table, tolerance)
    return SweepRecord(lam, c.channel1.percent_positive, c.channel2.percent_positive,
                       c.channel1.label, c.channel2.label)
