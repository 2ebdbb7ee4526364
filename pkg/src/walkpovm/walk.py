"""Discrete-time quantum walk on the integer line with site-dependent coins.

The walker state lives on basis kets ``|x, c>`` with integer position ``x``
and a two-level coin ``c``.  Coin index 0 ("R") moves right under the
conditional shift and doubles as horizontal polarisation; index 1 ("L")
moves left / vertical.  All operations are pure functions on immutable
values, so states can be shared freely between threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .tolerances import DEFAULT

R = 0
L = 1
_COIN_NAME = {R: "R", L: "L"}
_NAME_COIN = {"R": R, "L": L}

IDENTITY_COIN = np.eye(2, dtype=complex)
NOT_COIN = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


class ValidationError(ValueError):
    """An input violated a documented precondition."""


def is_unitary(matrix, tol: float = DEFAULT.unitarity) -> bool:
    m = np.asarray(matrix, dtype=complex)
    if m.shape != (2, 2):
        return False
    return bool(np.max(np.abs(m.conj().T @ m - np.eye(2))) <= tol)


def validate_coin(matrix, *, position=None, step=None, tol: float = DEFAULT.unitarity) -> np.ndarray:
    """Return the coin as a complex array, rejecting non-unitary input.

    The error message names the offending position (and step, if given).
    """
    m = np.asarray(matrix, dtype=complex)
    if m.shape != (2, 2) or not is_unitary(m, tol):
        where = ""
        if position is not None:
            where += f" at position {position}"
        if step is not None:
            where += f" in step {step}"
        raise ValidationError(f"coin operation{where} is not a 2x2 unitary")
    return m


@dataclass(frozen=True)
class WalkState:
    """Sparse walker wavefunction: map (position, coin) -> complex amplitude."""

    amplitudes: dict

    @classmethod
    def from_coin_vector(cls, vector, position: int = 0,
                         tol: float = DEFAULT.input_norm) -> "WalkState":
        v = np.asarray(vector, dtype=complex).reshape(2)
        if abs(np.linalg.norm(v) - 1.0) > tol:
            raise ValidationError("input coin state must be normalised")
        amps = {(position, c): complex(v[c]) for c in (R, L) if v[c] != 0}
        return cls(amps)

    def norm(self) -> float:
        return float(np.sqrt(sum(abs(a) ** 2 for a in self.amplitudes.values())))

    def amplitude(self, position: int, coin: int) -> complex:
        return self.amplitudes.get((position, coin), 0j)

    def pruned(self, threshold: float = 0.0) -> "WalkState":
        """Drop entries with magnitude below ``threshold``.

        Dropping k entries changes the squared norm by less than
        k * threshold**2; the default threshold 0 keeps the state exact.
        """
        if threshold <= 0.0:
            return self
        return WalkState({k: a for k, a in self.amplitudes.items()
                          if abs(a) >= threshold})

    def to_json(self) -> str:
        entries = [
            {"x": x, "coin": _COIN_NAME[c], "re": a.real, "im": a.imag}
            for (x, c), a in sorted(self.amplitudes.items())
        ]
        return json.dumps({"entries": entries}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "WalkState":
        data = json.loads(text)
        amps = {}
        for e in data["entries"]:
            amps[(int(e["x"]), _NAME_COIN[e["coin"]])] = complex(e["re"], e["im"])
        return cls(amps)


@dataclass(frozen=True)
class CoinSchedule:
    """Ordered walk steps; each step maps position -> coin operation.

    Positions absent from a step's map receive the identity.  Every coin
    is checked for unitarity on construction.
    """

    steps: tuple

    def __init__(self, steps):
        canonical = []
        for s, coins in enumerate(steps, start=1):
            step = {}
            for x, m in coins.items():
                step[int(x)] = validate_coin(m, position=x, step=s)
            canonical.append(step)
        object.__setattr__(self, "steps", tuple(canonical))

    @property
    def n_steps(self) -> int:
        return len(self.steps)

    def to_json(self) -> str:
        out = []
        for coins in self.steps:
            placed = [
                {"position": x,
                 "matrix": [[{"re": m[r, c].real, "im": m[r, c].imag}
                             for c in range(2)] for r in range(2)]}
                for x, m in sorted(coins.items())
            ]
            out.append({"coins": placed})
        return json.dumps({"steps": out}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CoinSchedule":
        try:
            data = json.loads(text)
            raw_steps = data["steps"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ValidationError(f"malformed schedule file: {exc}") from exc
        steps = []
        for raw in raw_steps:
            coins = {}
            for entry in raw.get("coins", []):
                m = np.array(
                    [[complex(cell["re"], cell["im"]) for cell in row]
                     for row in entry["matrix"]],
                    dtype=complex,
                )
                coins[int(entry["position"])] = m
            steps.append(coins)
        return cls(steps)


def apply_coin(state: WalkState, coins) -> WalkState:
    """Apply position-dependent coin operations; identity where unspecified."""
    checked = {int(x): validate_coin(m, position=x) for x, m in coins.items()}
    new = dict(state.amplitudes)
    for x, m in checked.items():
        a_r = state.amplitude(x, R)
        a_l = state.amplitude(x, L)
        if a_r == 0 and a_l == 0:
            continue
        out = m @ np.array([a_r, a_l])
        for c in (R, L):
            if out[c] == 0:
                new.pop((x, c), None)
            else:
                new[(x, c)] = complex(out[c])
    return WalkState(new)


def translate(state: WalkState) -> WalkState:
    """Conditional shift: (x, R) -> (x+1, R) and (x, L) -> (x-1, L)."""
    new = {}
    for (x, c), a in state.amplitudes.items():
        new[(x + 1, R) if c == R else (x - 1, L)] = a
    return WalkState(new)


def run(schedule: CoinSchedule, coin_vector, prune_threshold: float = 0.0) -> WalkState:
    """Run the walk from x = 0: coin-then-shift for every schedule step."""
    state = WalkState.from_coin_vector(coin_vector)
    for coins in schedule.steps:
        state = translate(apply_coin(state, coins))
        if prune_threshold > 0.0:
            state = state.pruned(prune_threshold)
    return state


def position_distribution(state: WalkState) -> dict:
    """Marginalise the coin: probability at x is the summed |amplitude|^2."""
    dist = {}
    for (x, _c), a in state.amplitudes.items():
        dist[x] = dist.get(x, 0.0) + abs(a) ** 2
    return dict(sorted(dist.items()))
