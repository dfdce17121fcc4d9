"""JSON game-spec documents: strict parsing with line-located errors, and dumping.

Schema (version 1)::

    {
      "schema_version": 1,
      "game": {
        "sL1_size": 2, "sL2_size": 2, "sF_size": 2,
        "aL_size": 1, "aF1_size": 2, "aF2_size": 2,
        "beta": 0.9,
        "transitions": [action][state][next_state],
        "rewards": {"L": [state][action], "F": [state][action]}
      },
      "channels": {"sigma1": [[...]], "sigma2": [[...]]},
      "policies": {"name": {"leader": ..., "follower1": ..., "follower2": ...}},
      "metadata": {...}
    }

States are indexed ``(s1 * |S2| + s2) * |SF| + sF`` and joint actions
``(aL * |AF1| + a1) * |AF2| + a2``.  ``rewards`` takes either one shared
follower table ``F`` or separate ``F1``/``F2`` tables.  ``channels`` and
``policies`` are optional.  A policy rule is either an integer action per
information point (``leader[s]``, ``follower1[s1][z1][sF]``,
``follower2[z2][s2][sF]``) or a probability vector over actions at each
point.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .game import GameSpec, PolicyProfile, default_sigma, validate_game

SCHEMA_VERSION = 1
BUNDLED = ("example1_game1", "example1_game2", "example2_game1", "example2_game2",
           "example3", "example4", "example_table5")
SIZE_KEYS = ("sL1_size", "sL2_size", "sF_size", "aL_size", "aF1_size", "aF2_size")
_TOP_KEYS = {"schema_version", "game", "channels", "policies", "metadata"}
_GAME_KEYS = set(SIZE_KEYS) | {"beta", "transitions", "rewards"}


class SpecError(ValueError):
    """Parse or validation failure; ``errors`` holds ``(line, message)`` pairs."""

    def __init__(self, errors, source: str = "<spec>"):
        self.errors = list(errors)
        self.source = source
        super().__init__("\n".join(f"{source}:{line}: {msg}" if line else f"{source}: {msg}"
                                   for line, msg in self.errors))


@dataclass(frozen=True, eq=False)
class SpecDocument:
    schema_version: int
    game: GameSpec
    policies: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)


_decoder = json.JSONDecoder()
_WS = re.compile(r"\s*")


def _locate(text: str, path) -> int | None:
    """1-based line of the value at ``path`` (keys and list indices) in JSON ``text``."""
    def ws(p):
        return _WS.match(text, p).end()

    pos = ws(0)
    try:
        for key in path:
            if text[pos] == "{":
                pos = ws(pos + 1)
                while text[pos] != "}":
                    k, pos = _decoder.raw_decode(text, pos)
                    pos = ws(ws(pos) + 1)  # skip ':'
                    if k == key:
                        break
                    _, pos = _decoder.raw_decode(text, pos)
                    pos = ws(pos)
                    if text[pos] == ",":
                        pos = ws(pos + 1)
                else:
                    return None
            elif text[pos] == "[":
                pos = ws(pos + 1)
                for _ in range(int(key)):
                    _, pos = _decoder.raw_decode(text, pos)
                    pos = ws(pos)
                    if text[pos] != ",":
                        return None
                    pos = ws(pos + 1)
            else:
                return None
    except (IndexError, ValueError, TypeError):
        return None
    return text.count("\n", 0, pos) + 1


def _array(value, shape, where, errors, text, integer=False):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        errors.append((_locate(text, where), f"{'.'.join(map(str, where))}: not a numeric array"))
        return None
    if arr.shape != tuple(shape):
        errors.append((_locate(text, where),
                       f"{'.'.join(map(str, where))}: shape {arr.shape}, expected {tuple(shape)}"))
        return None
    if integer and not np.all(arr == np.round(arr)):
        errors.append((_locate(text, where), f"{'.'.join(map(str, where))}: expected integers"))
        return None
    return arr


def _rule(value, point_shape, n_actions, where, errors, text):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        errors.append((_locate(text, where), f"{'.'.join(map(str, where))}: not a numeric array"))
        return None
    if arr.shape == tuple(point_shape):
        if not np.all(arr == np.round(arr)) or arr.min() < 0 or arr.max() >= n_actions:
            errors.append((_locate(text, where),
                           f"{'.'.join(map(str, where))}: actions must be integers in [0, {n_actions})"))
            return None
        return np.eye(n_actions)[arr.astype(int)]
    if arr.shape == tuple(point_shape) + (n_actions,):
        if arr.min() < 0 or np.any(np.abs(arr.sum(axis=-1) - 1) > 1e-12):
            errors.append((_locate(text, where),
                           f"{'.'.join(map(str, where))}: probabilities must be non-negative "
                           "and sum to 1"))
            return None
        return arr
    errors.append((_locate(text, where), f"{'.'.join(map(str, where))}: shape {arr.shape}, "
                   f"expected {tuple(point_shape)} or {tuple(point_shape) + (n_actions,)}"))
    return None


def _unknown(obj, allowed, where, errors, text):
    for k in obj:
        if k not in allowed:
            errors.append((_locate(text, list(where) + [k]), f"unknown field {k!r}"
                           + (f" in {'.'.join(where)}" if where else "")))


def parse_spec(source, name: str | None = None) -> SpecDocument:
    """Parse a spec from a path or JSON text; raises :class:`SpecError`."""
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
        path = Path(source)
        name = name or str(path)
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError) as exc:
            raise SpecError([(None, f"cannot read spec: {exc}")], name) from None
    else:
        text = source
    name = name or "<spec>"
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError([(exc.lineno, f"column {exc.colno}: {exc.msg}")], name) from None

    errors: list = []
    if not isinstance(doc, dict):
        raise SpecError([(1, "top level must be an object")], name)
    _unknown(doc, _TOP_KEYS, [], errors, text)
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        errors.append((_locate(text, ["schema_version"]),
                       f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})"))
    game = doc.get("game")
    if not isinstance(game, dict):
        errors.append((None, "missing 'game' object"))
        raise SpecError(errors, name)
    _unknown(game, _GAME_KEYS, ["game"], errors, text)

    sizes = {}
    for k in SIZE_KEYS:
        v = game.get(k)
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            errors.append((_locate(text, ["game", k]) if k in game else None,
                           f"game.{k} must be a positive integer, got {v!r}"))
        else:
            sizes[k] = v
    beta = game.get("beta")
    if not isinstance(beta, (int, float)) or isinstance(beta, bool):
        errors.append((_locate(text, ["game", "beta"]), "game.beta must be a number"))
    if errors:
        raise SpecError(errors, name)

    nS = sizes["sL1_size"] * sizes["sL2_size"] * sizes["sF_size"]
    nA = sizes["aL_size"] * sizes["aF1_size"] * sizes["aF2_size"]
    P = _array(game.get("transitions"), (nA, nS, nS), ["game", "transitions"], errors, text)
    rewards_doc = game.get("rewards")
    rewards = {}
    if not isinstance(rewards_doc, dict):
        errors.append((_locate(text, ["game", "rewards"]), "game.rewards must be an object"))
    else:
        _unknown(rewards_doc, {"L", "F", "F1", "F2"}, ["game", "rewards"], errors, text)
        if "F" in rewards_doc and ({"F1", "F2"} & set(rewards_doc)):
            errors.append((_locate(text, ["game", "rewards", "F"]),
                           "give either a shared 'F' reward or 'F1'/'F2', not both"))
        for agent, table in rewards_doc.items():
            arr = _array(table, (nS, nA), ["game", "rewards", agent], errors, text)
            if arr is not None:
                rewards[agent] = arr
        for agent in ("L",) + (("F",) if "F" in rewards_doc else ("F1", "F2")):
            if agent not in rewards_doc:
                errors.append((_locate(text, ["game", "rewards"]), f"missing reward table {agent}"))

    sigma = {}
    channels = doc.get("channels", {})
    if not isinstance(channels, dict):
        errors.append((_locate(text, ["channels"]), "channels must be an object"))
        channels = {}
    _unknown(channels, {"sigma1", "sigma2"}, ["channels"], errors, text)
    for key, n in (("sigma1", sizes["sL2_size"]), ("sigma2", sizes["sL1_size"])):
        if key in channels:
            arr = _array(channels[key], (n, n), ["channels", key], errors, text)
            if arr is not None:
                sigma[key] = arr
    if errors:
        raise SpecError(errors, name)

    spec = GameSpec(**sizes, transitions=P, rewards=rewards, beta=float(beta), **sigma)
    problems = validate_game(spec)
    if problems:
        raise SpecError([(_problem_line(text, p), p) for p in problems], name)

    policies = {}
    pol_doc = doc.get("policies", {})
    if not isinstance(pol_doc, dict):
        raise SpecError([(_locate(text, ["policies"]), "policies must be an object")], name)
    rule_shape = (spec.sL1_size, spec.sL2_size, spec.sF_size)
    for pname, block in pol_doc.items():
        where = ["policies", pname]
        if not isinstance(block, dict):
            errors.append((_locate(text, where), f"policy {pname!r} must be an object"))
            continue
        _unknown(block, {"leader", "follower1", "follower2"}, where, errors, text)
        leader = _rule(block.get("leader", [0] * nS), (nS,), spec.aL_size, where + ["leader"],
                       errors, text)
        f1 = _rule(block.get("follower1"), rule_shape, spec.aF1_size, where + ["follower1"],
                   errors, text)
        f2 = _rule(block.get("follower2"), rule_shape, spec.aF2_size, where + ["follower2"],
                   errors, text)
        if leader is not None and f1 is not None and f2 is not None:
            policies[pname] = PolicyProfile(leader, f1, f2)
    metadata = doc.get("metadata", {})
    if not isinstance(metadata, dict):
        errors.append((_locate(text, ["metadata"]), "metadata must be an object"))
    if errors:
        raise SpecError(errors, name)
    return SpecDocument(version, spec, policies, metadata)


def _problem_line(text, problem: str):
    m = re.search(r"row \(s=(\d+), a=(\d+)\)", problem)
    if m:
        return _locate(text, ["game", "transitions", int(m.group(2)), int(m.group(1))])
    m = re.search(r"P\[a=(\d+), s=(\d+), s'=(\d+)\]", problem)
    if m:
        return _locate(text, ["game", "transitions", int(m.group(1)), int(m.group(2)),
                              int(m.group(3))])
    if "discount" in problem:
        return _locate(text, ["game", "beta"])
    for key in ("sigma1", "sigma2"):
        if problem.startswith(key):
            return _locate(text, ["channels", key])
    return None


def _plain(x):
    if isinstance(x, np.ndarray):
        x = x.tolist()
    if isinstance(x, list):
        return [_plain(v) for v in x]
    if isinstance(x, float) and x.is_integer():
        return int(x)
    return x


def _rule_out(arr: np.ndarray):
    det = np.all((arr == 0) | (arr == 1))
    return _plain(arr.argmax(axis=-1)) if det else _plain(arr)


def dump_spec(doc: SpecDocument) -> str:
    """Serialize a document; innermost arrays are written on one line."""
    g = doc.game
    rewards = ({"L": g.reward("L"), "F": g.reward("F1")} if g.shares_follower_reward()
               else {"L": g.reward("L"), "F1": g.reward("F1"), "F2": g.reward("F2")})
    out = {"schema_version": SCHEMA_VERSION,
           "game": {**{k: getattr(g, k) for k in SIZE_KEYS}, "beta": g.beta,
                    "transitions": _plain(g.transitions),
                    "rewards": {k: _plain(v) for k, v in rewards.items()}}}
    chans = {}
    if not np.array_equal(g.sigma1, default_sigma(g.sL2_size)):
        chans["sigma1"] = _plain(g.sigma1)
    if not np.array_equal(g.sigma2, default_sigma(g.sL1_size)):
        chans["sigma2"] = _plain(g.sigma2)
    if chans:
        out["channels"] = chans
    if doc.policies:
        out["policies"] = {n: {"leader": _rule_out(p.leader), "follower1": _rule_out(p.follower1),
                               "follower2": _rule_out(p.follower2)}
                           for n, p in doc.policies.items()}
    if doc.metadata:
        out["metadata"] = doc.metadata
    text = json.dumps(out, indent=2)
    # collapse arrays of scalars onto one line
    text = re.sub(r"\[\s*([-\d.eE+,\s]*?)\s*\]",
                  lambda m: "[" + ", ".join(t.strip() for t in m.group(1).split(",")) + "]", text)
    return text + "\n"


def bundled_path(name: str):
    if name not in BUNDLED:
        raise KeyError(f"unknown bundled spec {name!r}; choose from {', '.join(BUNDLED)}")
    return resources.files("vodi").joinpath("data", f"{name}.json")


def load_bundled(name: str) -> SpecDocument:
    path = bundled_path(name)
    return parse_spec(path.read_text(encoding="utf-8"), name=name)


def load_spec(source) -> SpecDocument:
    """Bundled name or filesystem path."""
    if isinstance(source, str) and source in BUNDLED:
        return load_bundled(source)
    return parse_spec(Path(source))
