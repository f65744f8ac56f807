"""Game specification files (JSON) and the ``builtin:name:k=v`` shorthand.

A finite spec looks like::

    {"kind": "finite", "name": "pd", "players": 2,
     "actions": [["C", "D"], ["C", "D"]],
     "payoffs": [[[3, 0], [5, 1]], [[3, 5], [0, 1]]],
     "config": {"eta": 0.05}}

``payoffs[i]`` is player ``i``'s tensor as row-major nested lists. A builtin
spec is ``{"kind": "builtin", "name": "cournot", "params": {"b0": 1}}``.
The optional ``config`` object supplies defaults for command-line flags.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from gdlab.catalog import BUILTINS, load_builtin
from gdlab.games import BimatrixGame, ContinuousGame, FiniteGame


class SpecError(ValueError):
    pass


def _shape_check(node, counts, path: str):
    if not counts:
        if isinstance(node, bool) or not isinstance(node, (int, float)):
            raise SpecError(f"{path} must be a number, got {json.dumps(node)}")
        if not np.isfinite(node):
            raise SpecError(f"{path} is not finite")
        return
    if not isinstance(node, list):
        raise SpecError(f"{path} must be a list of {counts[0]} entries")
    if len(node) != counts[0]:
        raise SpecError(f"{path} has {len(node)} entries, expected {counts[0]}")
    for k, child in enumerate(node):
        _shape_check(child, counts[1:], f"{path}[{k}]")


def game_from_dict(spec: dict):
    if not isinstance(spec, dict):
        raise SpecError("top level must be an object")
    kind = spec.get("kind")
    if kind == "builtin":
        name = spec.get("name")
        if name not in BUILTINS:
            raise SpecError(f"unknown builtin game {name!r}; choose from {sorted(BUILTINS)}")
        params = spec.get("params", {})
        if not isinstance(params, dict):
            raise SpecError("params must be an object")
        return load_builtin(name, params)
    if kind != "finite":
        raise SpecError(f"kind must be 'finite' or 'builtin', got {kind!r}")
    payoffs = spec.get("payoffs")
    if not isinstance(payoffs, list) or not payoffs:
        raise SpecError("payoffs must be a nonempty list with one tensor per player")
    players = spec.get("players", len(payoffs))
    if players != len(payoffs):
        raise SpecError(f"players = {players} but {len(payoffs)} payoff tensors given")
    actions = spec.get("actions")
    if actions is None:
        counts = []
        node = payoffs[0]
        for _ in range(players):
            if not isinstance(node, list):
                raise SpecError("cannot infer action counts from payoffs[0]")
            counts.append(len(node))
            node = node[0] if node else None
        actions = [list(range(c)) for c in counts]
    if not isinstance(actions, list) or len(actions) != players:
        raise SpecError(f"actions must list the labels of each of the {players} players")
    counts = [len(a) if isinstance(a, list) else -1 for a in actions]
    if min(counts) < 1:
        raise SpecError("every player needs a nonempty list of action labels")
    for i, p in enumerate(payoffs):
        _shape_check(p, counts, f"payoffs[{i}]")
    name = spec.get("name", "finite")
    if players == 2:
        return BimatrixGame(payoffs[0], payoffs[1], actions=actions, name=name)
    return FiniteGame(payoffs, actions=actions, name=name)


def _located(text: str, pos: int) -> tuple[int, int]:
    line = text.count("\n", 0, pos) + 1
    col = pos - (text.rfind("\n", 0, pos) + 1) + 1
    return line, col


def load_spec_file(path) -> tuple[object, dict, dict]:
    """Return ``(game, raw spec, config section)``."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise SpecError(f"{path}: no such file") from None
    except UnicodeDecodeError as exc:
        line, col = _located(exc.object.decode("latin-1"), exc.start)
        raise SpecError(f"{path}:{line}:{col}: not valid UTF-8") from None
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        game = game_from_dict(spec)
    except SpecError as exc:
        raise SpecError(f"{path}: {exc}") from None
    config = spec.get("config", {}) if isinstance(spec, dict) else {}
    if not isinstance(config, dict):
        raise SpecError(f"{path}: config must be an object")
    return game, spec, config


def _plain(v):
    if isinstance(v, np.ndarray):
        return [_plain(u) for u in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_plain(u) for u in v]
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return int(v) if v.is_integer() and abs(v) < 2**53 else v
    if isinstance(v, np.integer):
        return int(v)
    return v


def game_to_dict(game) -> dict:
    if isinstance(game, ContinuousGame) or hasattr(game, "params"):
        params = getattr(game, "params", {}) or {}
        return {"kind": "builtin", "name": game.name, "params": {k: _plain(v) for k, v in params.items()}}
    return {
        "kind": "finite", "name": game.name, "players": game.n_players,
        "actions": [_plain(list(a)) for a in game.actions],
        "payoffs": [_plain(p) for p in game.payoffs],
    }


def dump_game_spec(game) -> str:
    return json.dumps(game_to_dict(game), indent=2, sort_keys=True) + "\n"


# -------------------------------------------------------- builtin shorthand


def _split_top(text: str, sep: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "[(":
            depth += 1
        elif ch in "])":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    return parts


def parse_number(text: str) -> float:
    text = text.strip()
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise SpecError(f"not a number: {text!r}") from None


def _parse_value(text: str):
    text = text.strip()
    if text.startswith("[") or text.startswith("("):
        if not (text.endswith("]") or text.endswith(")")):
            raise SpecError(f"unbalanced list: {text!r}")
        return [_parse_value(t) for t in _split_top(text[1:-1], ",") if t.strip()]
    return parse_number(text)


def parse_builtin_ref(ref: str) -> tuple[str, dict]:
    """``name[:k=v,k=[a,b],...]`` into a name and a parameter dict."""
    name, _, rest = ref.partition(":")
    params = {}
    if rest.strip():
        for item in _split_top(rest, ","):
            key, eq, value = item.partition("=")
            if not eq or not key.strip():
                raise SpecError(f"expected k=v, got {item!r}")
            params[key.strip()] = _parse_value(value)
    return name.strip(), params


def resolve_game(ref: str):
    """``builtin:...`` or a path to a spec file; returns ``(game, descriptor, config)``."""
    if ref.startswith("builtin:"):
        name, params = parse_builtin_ref(ref[len("builtin:"):])
        game = game_from_dict({"kind": "builtin", "name": name, "params": params})
        return game, {"kind": "builtin", "name": name, "params": params}, {}
    game, spec, config = load_spec_file(ref)
    return game, {"kind": "file", "path": str(ref), "spec": game_to_dict(game)}, config
