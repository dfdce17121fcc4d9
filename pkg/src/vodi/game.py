"""Game description, communication channels and the joint information space.

A state is ``s = (s1, s2, sf)`` where ``s1``/``s2`` are the leader's two
partial states and ``sf`` the joint follower state.  Follower 1 observes
``s1`` directly and receives a report ``z1`` of ``s2`` through channel 1;
follower 2 observes ``s2`` and receives a report ``z2`` of ``s1`` through
channel 2.  Every value computation is indexed by the information state
``zeta = (s, z1, z2)``.

Index conventions
-----------------
* full state ``s``: ``(s1 * n_s2 + s2) * n_sf + sf``
* joint action ``a``: ``(aL * n_af1 + af1) * n_af2 + af2``
* information state: ``(s * n_z2 + z2) * n_z1 + z1`` so that ``z1`` varies
  fastest and rows line up with tables written as
  ``([s1, z1], [z2, s2], sf)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

AGENTS = ("L", "F1", "F2")
STOCHASTIC_TOL = 1e-9


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


def default_sigma(n: int) -> np.ndarray:
    """Uniform redistribution over the wrong symbols (forced when ``n == 2``)."""
    if n < 2:
        return np.zeros((n, n))
    sigma = np.full((n, n), 1.0 / (n - 1))
    np.fill_diagonal(sigma, 0.0)
    return sigma


@dataclass(frozen=True, eq=False)
class Channel:
    """Noisy report channel with error probability ``epsilon``.

    With probability ``1 - epsilon`` the true symbol is reported; otherwise
    symbol ``z`` is reported with probability ``sigma[x, z]``.
    """

    epsilon: float
    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "sigma", _frozen(self.sigma))

    @classmethod
    def symmetric(cls, epsilon: float, n: int = 2) -> "Channel":
        return cls(epsilon, default_sigma(n))

    @property
    def size(self) -> int:
        return self.sigma.shape[0]


def build_channel_matrix(channel: Channel) -> np.ndarray:
    """Row-stochastic communication matrix ``Q`` of a channel."""
    sigma = channel.sigma
    eps = float(channel.epsilon)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError(f"sigma must be square, got shape {sigma.shape}")
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"epsilon must lie in [0, 1], got {eps}")
    n = sigma.shape[0]
    if np.any(sigma < 0):
        raise ValueError("sigma has negative entries")
    if np.any(np.diag(sigma) != 0):
        raise ValueError("sigma must have a zero diagonal")
    if n >= 2:
        sums = sigma.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > STOCHASTIC_TOL)
        if bad.size:
            raise ValueError(f"sigma row {bad[0]} sums to {sums[bad[0]]!r}, expected 1")
    return (1.0 - eps) * np.eye(n) + eps * sigma


@dataclass(frozen=True, eq=False)
class GameSpec:
    """Three-agent game: sizes, dynamics, rewards, discount and channel noise.

    ``transitions`` has shape ``(n_actions, n_states, n_states)`` holding
    ``P[a, s, s']``; each entry of ``rewards`` has shape ``(n_states, n_actions)``.
    ``sigma1`` redistributes channel-1 errors over the ``s2`` alphabet and
    ``sigma2`` redistributes channel-2 errors over the ``s1`` alphabet.
    """

    sL1_size: int
    sL2_size: int
    sF_size: int
    aL_size: int
    aF1_size: int
    aF2_size: int
    transitions: np.ndarray
    rewards: Mapping[str, np.ndarray]
    beta: float
    sigma1: np.ndarray = None
    sigma2: np.ndarray = None

    def __post_init__(self):
        for name in ("sL1_size", "sL2_size", "sF_size", "aL_size", "aF1_size", "aF2_size"):
            object.__setattr__(self, name, int(getattr(self, name)))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "transitions", _frozen(self.transitions))
        rewards = dict(self.rewards)
        if "F" in rewards:
            shared = rewards.pop("F")
            rewards.setdefault("F1", shared)
            rewards.setdefault("F2", shared)
        object.__setattr__(self, "rewards", {k: _frozen(v) for k, v in rewards.items()})
        if self.sigma1 is None:
            object.__setattr__(self, "sigma1", default_sigma(self.sL2_size))
        if self.sigma2 is None:
            object.__setattr__(self, "sigma2", default_sigma(self.sL1_size))
        object.__setattr__(self, "sigma1", _frozen(self.sigma1))
        object.__setattr__(self, "sigma2", _frozen(self.sigma2))

    @property
    def n_states(self) -> int:
        return self.sL1_size * self.sL2_size * self.sF_size

    @property
    def n_actions(self) -> int:
        return self.aL_size * self.aF1_size * self.aF2_size

    @property
    def n_follower_actions(self) -> int:
        return self.aF1_size * self.aF2_size

    def reward(self, agent: str) -> np.ndarray:
        try:
            return self.rewards[agent]
        except KeyError:
            raise KeyError(f"no reward table for agent {agent!r}") from None

    def shares_follower_reward(self) -> bool:
        return np.array_equal(self.reward("F1"), self.reward("F2"))

    def with_rewards(self, **rewards) -> "GameSpec":
        new = dict(self.rewards)
        if "F" in rewards:
            shared = rewards.pop("F")
            new["F1"] = new["F2"] = shared
        new.update(rewards)
        return replace(self, rewards=new)

    def with_beta(self, beta: float) -> "GameSpec":
        return replace(self, beta=beta)

    def state_index(self, s1: int, s2: int, sf: int) -> int:
        return (s1 * self.sL2_size + s2) * self.sF_size + sf

    def state_tuple(self, s: int) -> tuple[int, int, int]:
        s12, sf = divmod(s, self.sF_size)
        s1, s2 = divmod(s12, self.sL2_size)
        return s1, s2, sf

    def action_index(self, aL: int, a1: int, a2: int) -> int:
        return (aL * self.aF1_size + a1) * self.aF2_size + a2


def validate_game(spec: GameSpec) -> list[str]:
    """Return every invariant violation of ``spec``; an empty list means valid."""
    problems: list[str] = []
    for name in ("sL1_size", "sL2_size", "sF_size", "aL_size", "aF1_size", "aF2_size"):
        if getattr(spec, name) < 1:
            problems.append(f"{name} must be a positive integer, got {getattr(spec, name)}")
    if problems:
        return problems

    if not (0.0 <= spec.beta < 1.0):
        problems.append(f"discount factor out of range: beta={spec.beta} (need 0 <= beta < 1)")

    nS, nA = spec.n_states, spec.n_actions
    P = spec.transitions
    if P.shape != (nA, nS, nS):
        problems.append(f"transitions have shape {P.shape}, expected {(nA, nS, nS)}")
    else:
        if not np.all(np.isfinite(P)):
            problems.append("transitions contain non-finite values")
        for a, s, s_next in zip(*np.nonzero((P < 0) | (P > 1))):
            problems.append(
                f"transition P[a={a}, s={s}, s'={s_next}] = {P[a, s, s_next]!r} outside [0, 1]")
        sums = P.sum(axis=2)
        for a, s in zip(*np.nonzero(np.abs(sums - 1.0) > STOCHASTIC_TOL)):
            problems.append(
                f"transition row (s={s}, a={a}) sums to {sums[a, s]:.12g}, expected 1")

    for agent in AGENTS:
        if agent not in spec.rewards:
            problems.append(f"missing reward table for agent {agent}")
            continue
        r = spec.rewards[agent]
        if r.shape != (nS, nA):
            problems.append(f"reward table {agent} has shape {r.shape}, expected {(nS, nA)}")
        elif not np.all(np.isfinite(r)):
            problems.append(f"reward table {agent} contains non-finite values")
    for agent in spec.rewards:
        if agent not in AGENTS:
            problems.append(f"unknown reward agent {agent!r}")

    for name, n in (("sigma1", spec.sL2_size), ("sigma2", spec.sL1_size)):
        sigma = getattr(spec, name)
        if sigma.shape != (n, n):
            problems.append(f"{name} has shape {sigma.shape}, expected {(n, n)}")
            continue
        if np.any(sigma < 0):
            problems.append(f"{name} has negative entries")
        if np.any(np.diag(sigma) != 0):
            problems.append(f"{name} must have a zero diagonal")
        if n >= 2:
            sums = sigma.sum(axis=1)
            for x in np.flatnonzero(np.abs(sums - 1.0) > STOCHASTIC_TOL):
                problems.append(f"{name} row {x} sums to {sums[x]:.12g}, expected 1")
    return problems


def require_valid(spec: GameSpec) -> None:
    problems = validate_game(spec)
    if problems:
        raise ValueError("invalid game: " + "; ".join(problems[:5])
                         + (f" (+{len(problems) - 5} more)" if len(problems) > 5 else ""))


@dataclass(frozen=True)
class InfoState:
    s: tuple[int, int, int]
    z1: int
    z2: int
    index: int

    @property
    def accurate(self) -> bool:
        return self.z1 == self.s[1] and self.z2 == self.s[0]


class InfoSpace:
    """Enumeration of information states ``(s, z1, z2)`` for a game's sizes."""

    def __init__(self, spec: GameSpec):
        self.n_s1, self.n_s2, self.n_sf = spec.sL1_size, spec.sL2_size, spec.sF_size
        self.n_z1, self.n_z2 = self.n_s2, self.n_s1
        self.n_states = spec.n_states
        self.size = self.n_states * self.n_z1 * self.n_z2

        idx = np.arange(self.size)
        rest, self.z1 = np.divmod(idx, self.n_z1)
        self.s, self.z2 = np.divmod(rest, self.n_z2)
        s12, self.sf = np.divmod(self.s, self.n_sf)
        self.s1, self.s2 = np.divmod(s12, self.n_s2)
        self.accurate_mask = (self.z1 == self.s2) & (self.z2 == self.s1)
        # diagonal[s] is the accurate information state of full state s
        self.diagonal = self.index(*self._state_arrays())
        for arr in (self.z1, self.z2, self.s, self.sf, self.s1, self.s2,
                    self.accurate_mask, self.diagonal):
            arr.setflags(write=False)

    def _state_arrays(self):
        s = np.arange(self.n_states)
        s12, sf = np.divmod(s, self.n_sf)
        s1, s2 = np.divmod(s12, self.n_s2)
        return s, s2, s1

    def index(self, s, z1, z2):
        return (np.asarray(s) * self.n_z2 + z2) * self.n_z1 + z1

    def encode(self, s1: int, s2: int, sf: int, z1: int, z2: int) -> int:
        s = (s1 * self.n_s2 + s2) * self.n_sf + sf
        return int(self.index(s, z1, z2))

    def decode(self, index: int) -> InfoState:
        if not 0 <= index < self.size:
            raise IndexError(index)
        return InfoState((int(self.s1[index]), int(self.s2[index]), int(self.sf[index])),
                         int(self.z1[index]), int(self.z2[index]), int(index))

    def __len__(self):
        return self.size

    def __iter__(self):
        return (self.decode(i) for i in range(self.size))

    def label(self, index: int) -> str:
        """Table label ``[s1 z1] [z2 s2] sf``."""
        st = self.decode(index)
        s1, s2, sf = st.s
        return f"[{s1} {st.z1}] [{st.z2} {s2}] {sf}"


@dataclass(frozen=True, eq=False)
class PolicyProfile:
    """Zero-memory decision rules as probability arrays.

    ``leader[s, aL]``, ``follower1[s1, z1, sf, a1]`` and
    ``follower2[z2, s2, sf, a2]``.
    """

    leader: np.ndarray
    follower1: np.ndarray
    follower2: np.ndarray

    def __post_init__(self):
        for name in ("leader", "follower1", "follower2"):
            arr = _frozen(getattr(self, name))
            if np.any(arr < -1e-12):
                raise ValueError(f"{name} has negative probabilities")
            sums = arr.sum(axis=-1)
            if np.any(np.abs(sums - 1.0) > 1e-12):
                raise ValueError(f"{name} probabilities do not sum to 1")
            object.__setattr__(self, name, arr)

    @classmethod
    def deterministic(cls, spec: GameSpec, leader, follower1, follower2) -> "PolicyProfile":
        """Point-mass profile from integer action arrays of the rule shapes."""
        return cls(np.eye(spec.aL_size)[np.asarray(leader, dtype=int)],
                   np.eye(spec.aF1_size)[np.asarray(follower1, dtype=int)],
                   np.eye(spec.aF2_size)[np.asarray(follower2, dtype=int)])

    @classmethod
    def constant(cls, spec: GameSpec, aL: int = 0, a1: int = 0, a2: int = 0) -> "PolicyProfile":
        return cls.deterministic(
            spec,
            np.full(spec.n_states, aL),
            np.full((spec.sL1_size, spec.sL2_size, spec.sF_size), a1),
            np.full((spec.sL1_size, spec.sL2_size, spec.sF_size), a2),
        )

    def check_shapes(self, spec: GameSpec) -> None:
        expected = {
            "leader": (spec.n_states, spec.aL_size),
            "follower1": (spec.sL1_size, spec.sL2_size, spec.sF_size, spec.aF1_size),
            "follower2": (spec.sL1_size, spec.sL2_size, spec.sF_size, spec.aF2_size),
        }
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    def is_deterministic(self) -> bool:
        return all(np.all((arr == 0) | (arr == 1))
                   for arr in (self.leader, self.follower1, self.follower2))


def constant_leader(spec: GameSpec, action: int = 0) -> np.ndarray:
    return np.eye(spec.aL_size)[np.full(spec.n_states, action)]


@dataclass(frozen=True, eq=False)
class BeliefVector:
    """Leader belief over the followers' received reports ``(z1, z2)``."""

    weights: np.ndarray = field()

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 2:
            raise ValueError("belief weights must be indexed by (z1, z2)")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"belief is not normalized (sum={w.sum()!r})")
        object.__setattr__(self, "weights", w)

    @classmethod
    def point(cls, n_z1: int, n_z2: int, z1: int, z2: int) -> "BeliefVector":
        w = np.zeros((n_z1, n_z2))
        w[z1, z2] = 1.0
        return cls(w)


def action_probabilities(spec: GameSpec, profile: PolicyProfile,
                         space: InfoSpace | None = None) -> np.ndarray:
    """``P(a | zeta)`` as an ``(N, n_actions)`` array."""
    space = space or InfoSpace(spec)
    profile.check_shapes(spec)
    pl = profile.leader[space.s]
    p1 = profile.follower1[space.s1, space.z1, space.sf]
    p2 = profile.follower2[space.z2, space.s2, space.sf]
    joint = pl[:, :, None, None] * p1[:, None, :, None] * p2[:, None, None, :]
    return joint.reshape(space.size, spec.n_actions)


def next_state_distribution(spec: GameSpec, profile: PolicyProfile,
                            space: InfoSpace | None = None) -> np.ndarray:
    """``P(s' | zeta)`` under the profile's action choice, shape ``(N, n_states)``."""
    space = space or InfoSpace(spec)
    probs = action_probabilities(spec, profile, space)
    P = spec.transitions[:, space.s, :]  # (nA, N, nS)
    return np.einsum("na,ans->ns", probs, P)


def report_maps(spec: GameSpec, space: InfoSpace | None = None) -> dict[str, np.ndarray]:
    """Maps from a next full state to next information states, per report branch.

    Each map has shape ``(n_states, N)``: ``acc`` puts all mass on the
    accurate information state, ``e1`` distorts the channel-1 report by
    ``sigma1``, ``e2`` the channel-2 report by ``sigma2`` and ``e12`` both.
    """
    space = space or InfoSpace(spec)
    s, s2, s1 = space._state_arrays()
    z1 = np.arange(space.n_z1)
    z2 = np.arange(space.n_z2)
    w1 = spec.sigma1[s2]  # (nS, n_z1)
    w2 = spec.sigma2[s1]  # (nS, n_z2)
    maps = {k: np.zeros((space.n_states, space.size)) for k in ("acc", "e1", "e2", "e12")}
    maps["acc"][s, space.index(s, s2, s1)] = 1.0
    maps["e1"][s[:, None], space.index(s[:, None], z1[None, :], s1[:, None])] = w1
    maps["e2"][s[:, None], space.index(s[:, None], s2[:, None], z2[None, :])] = w2
    idx12 = space.index(s[:, None, None], z1[None, :, None], z2[None, None, :])
    maps["e12"][s[:, None, None], idx12] = w1[:, :, None] * w2[:, None, :]
    return maps


@dataclass(frozen=True, eq=False)
class InfoKernels:
    """Transition kernels over information states for the four report branches."""

    acc: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    e12: np.ndarray
    # P(s' | zeta); acc == next_state @ report_maps["acc"]
    next_state: np.ndarray

    def blend(self, eps1: float, eps2: float) -> np.ndarray:
        """Information-state kernel at channel error probabilities ``(eps1, eps2)``."""
        return ((1 - eps1) * (1 - eps2) * self.acc + eps1 * (1 - eps2) * self.e1
                + (1 - eps1) * eps2 * self.e2 + eps1 * eps2 * self.e12)


def info_transition_kernels(spec: GameSpec, profile: PolicyProfile,
                            space: InfoSpace | None = None, maps=None) -> InfoKernels:
    """Kernels ``P_acc``, ``P_e1``, ``P_e2``, ``P_e12`` over information states.

    ``maps`` may carry precomputed :func:`report_maps` output.
    """
    space = space or InfoSpace(spec)
    T = next_state_distribution(spec, profile, space)
    maps = maps if maps is not None else report_maps(spec, space)
    return InfoKernels(acc=T @ maps["acc"], e1=T @ maps["e1"], e2=T @ maps["e2"],
                       e12=T @ maps["e12"], next_state=T)


def expected_reward_vector(spec: GameSpec, profile: PolicyProfile, agent: str = "L",
                           space: InfoSpace | None = None) -> np.ndarray:
    """Expected one-step reward ``R(zeta) = sum_a P(a|zeta) r(s, a)``."""
    space = space or InfoSpace(spec)
    probs = action_probabilities(spec, profile, space)
    r = spec.reward(agent)[space.s]
    return np.einsum("na,na->n", probs, r)
