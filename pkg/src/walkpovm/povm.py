"""Rank-1 qubit POVMs as peel-off walk circuits.

A circuit for an n-outcome POVM is built from n-1 coin-operation pairs:
iteration i applies its first coin at x = 0, shifts, then applies its
second coin at x = 1 together with a NOT at x = -1, and shifts again.
Each iteration routes one outcome's amplitude onto a dedicated
detection port (an even position); whatever remains at x = 0 after the
last iteration is the final outcome.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass

import numpy as np

from .tolerances import DEFAULT
from .walk import (
    IDENTITY_COIN,
    L,
    NOT_COIN,
    R,
    CoinSchedule,
    ValidationError,
    run,
    validate_coin,
)

HADAMARD_LIKE = np.sqrt(0.5) * np.array([[1.0, 1.0], [1.0, -1.0]], dtype=complex)
_TILT = np.sqrt(1.0 / 3.0) * np.array(
    [[np.sqrt(2.0), 1.0], [1.0, -np.sqrt(2.0)]], dtype=complex
)


class SynthesisInfeasibleError(RuntimeError):
    """No outcome ordering admits the peel-off construction."""

    def __init__(self, max_a: float):
        super().__init__(
            f"peel-off synthesis infeasible for every outcome ordering "
            f"(largest row norm encountered: {max_a:.6g} > 1)"
        )
        self.max_a = max_a


@dataclass(frozen=True)
class PovmElement:
    """A 2x2 positive-semidefinite effect with an outcome label and port."""

    matrix: np.ndarray
    label: str
    port: int

    def __init__(self, matrix, label: str, port: int,
                 tol_herm: float = DEFAULT.hermiticity,
                 tol_psd: float = DEFAULT.psd_floor):
        m = np.asarray(matrix, dtype=complex)
        if m.shape != (2, 2):
            raise ValidationError(f"element {label}: matrix must be 2x2")
        if np.max(np.abs(m - m.conj().T)) > tol_herm:
            raise ValidationError(f"element {label}: matrix is not Hermitian")
        if np.linalg.eigvalsh(m)[0] < tol_psd:
            raise ValidationError(f"element {label}: matrix is not positive semidefinite")
        object.__setattr__(self, "matrix", 0.5 * (m + m.conj().T))
        object.__setattr__(self, "label", label)
        object.__setattr__(self, "port", int(port))

    @property
    def weight(self) -> float:
        return float(np.trace(self.matrix).real)


@dataclass(frozen=True)
class PovmSet:
    """Ordered POVM elements plus the operator-norm distance of their sum from 1."""

    elements: tuple
    completeness_residual: float

    @classmethod
    def build(cls, elements) -> "PovmSet":
        elems = tuple(elements)
        total = sum((e.matrix for e in elems), np.zeros((2, 2), dtype=complex))
        residual = float(np.linalg.norm(total - np.eye(2), ord=2))
        return cls(elems, residual)

    def element_at_port(self, port: int) -> PovmElement:
        for e in self.elements:
            if e.port == port:
                return e
        raise KeyError(f"no element at port {port}")

    def to_json(self) -> str:
        payload = {
            "elements": [
                {
                    "label": e.label,
                    "port": e.port,
                    "matrix": [
                        [{"re": e.matrix[r, c].real, "im": e.matrix[r, c].imag}
                         for c in range(2)]
                        for r in range(2)
                    ],
                }
                for e in self.elements
            ],
            "residual": self.completeness_residual,
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PovmSet":
        data = json.loads(text)
        elems = []
        for raw in data["elements"]:
            m = np.array(
                [[complex(cell["re"], cell["im"]) for cell in row]
                 for row in raw["matrix"]],
                dtype=complex,
            )
            elems.append(PovmElement(m, raw["label"], raw["port"]))
        return cls.build(elems)


@dataclass(frozen=True)
class IterationPair:
    """One peel-off iteration: c1 acts at x = 0, c2 at x = 1."""

    c1: np.ndarray
    c2: np.ndarray

    def __init__(self, c1, c2):
        object.__setattr__(self, "c1", validate_coin(c1, position=0))
        object.__setattr__(self, "c2", validate_coin(c2, position=1))


def detection_ports(n_outcomes: int) -> list:
    return [2 * k for k in range(n_outcomes)]


def build_circuit(pairs) -> CoinSchedule:
    """Lay out the peel-off schedule: 2 steps per iteration pair."""
    pairs = list(pairs)
    if not pairs:
        raise ValidationError("at least one iteration pair is required (n >= 2 outcomes)")
    steps = []
    for p in pairs:
        steps.append({0: p.c1})
        steps.append({1: p.c2, -1: NOT_COIN})
    return CoinSchedule(steps)


def extract_povm(schedule: CoinSchedule) -> PovmSet:
    """Recover the POVM a schedule implements.

    Runs both coin basis states, assembles per-port Kraus maps K_x
    (rows: final coin, columns: input basis) and returns E_x = K_x^dag K_x.
    """
    finals = [run(schedule, v) for v in (np.array([1.0, 0.0]), np.array([0.0, 1.0]))]
    ports = sorted({x for st in finals for (x, _c) in st.amplitudes})
    elements = []
    for x in ports:
        k = np.array(
            [[finals[j].amplitude(x, c) for j in range(2)] for c in (R, L)],
            dtype=complex,
        )
        elements.append(PovmElement(k.conj().T @ k, f"E{x}", x))
    return PovmSet.build(elements)


def _orthonormal_completion(row: np.ndarray) -> np.ndarray:
    """Unit row orthogonal to ``row`` whose first nonzero entry is real positive."""
    comp = np.array([-np.conj(row[1]), np.conj(row[0])])
    for entry in comp:
        if abs(entry) > 1e-12:
            comp = comp * (np.conj(entry) / abs(entry))
            break
    return comp


class _OrderingInfeasible(Exception):
    def __init__(self, a: float):
        self.a = a


def _peel(rows, tol_consistency: float) -> list:
    """Peel-off recursion over the accumulated residual matrix."""
    pairs = []
    m = np.eye(2, dtype=complex)
    for f in rows[:-1]:
        g = f @ np.linalg.pinv(m)
        if np.max(np.abs(g @ m - f)) > tol_consistency:
            raise _OrderingInfeasible(np.inf)
        a = float(np.linalg.norm(g))
        if a > 1.0 + 1e-12:
            raise _OrderingInfeasible(a)
        a = min(a, 1.0)
        b = np.sqrt(max(0.0, 1.0 - a * a))
        r = g / a if a > 1e-12 else np.array([1.0 + 0j, 0.0 + 0j])
        low = _orthonormal_completion(r)
        c1 = np.vstack([r, low])
        if b <= 1e-12:
            c2 = IDENTITY_COIN
        else:
            c2 = np.array([[a, b], [b, -a]], dtype=complex)
        pairs.append(IterationPair(c1, c2))
        m = np.vstack([low @ m, b * (r @ m)])
    return pairs


def _rank_one_row(element: PovmElement, tol: float) -> np.ndarray:
    vals, vecs = np.linalg.eigh(element.matrix)
    if vals[0] > tol:
        raise ValidationError(f"element {element.label} is not rank 1")
    w = max(vals[1], 0.0)
    return np.sqrt(w) * vecs[:, 1].conj()


def synthesize(target: PovmSet,
               tol: float = DEFAULT.synthesis_roundtrip):
    """Find iteration pairs realising a rank-1 POVM, plus the outcome->port map.

    Outcomes are peeled in the given order when feasible; if some ordering
    step would need a row norm above 1, other outcome orderings are tried
    before reporting infeasibility.  The returned circuit is verified by
    round-tripping through ``extract_povm``.
    """
    if target.completeness_residual >= DEFAULT.completeness:
        raise ValidationError(
            f"target POVM is not complete (residual {target.completeness_residual:.3g})"
        )
    n = len(target.elements)
    if n < 2:
        raise ValidationError("a POVM needs at least two outcomes")
    rows = [_rank_one_row(e, DEFAULT.rank_one) for e in target.elements]

    max_a = 1.0
    for order in itertools.permutations(range(n)):
        try:
            pairs = _peel([rows[i] for i in order], tol)
        except _OrderingInfeasible as exc:
            if np.isfinite(exc.a):
                max_a = max(max_a, exc.a)
            continue
        assignment = {}
        for slot, idx in enumerate(order):
            port = 2 * (n - 1 - slot)
            assignment[target.elements[idx].label] = port
        extracted = extract_povm(build_circuit(pairs))
        produced = {e.port: e.matrix for e in extracted.elements}
        ok = all(
            np.max(np.abs(produced.get(assignment[e.label], np.zeros((2, 2))) - e.matrix)) <= tol
            for e in target.elements
        )
        if ok:
            return pairs, assignment
    raise SynthesisInfeasibleError(max_a)


# ---------------------------------------------------------------------------
# Built-in measurement scenarios and their input states.
# ---------------------------------------------------------------------------

def trine_state(i: int) -> np.ndarray:
    states = {
        1: np.array([1.0, 0.0], dtype=complex),
        2: -0.5 * np.array([1.0, -np.sqrt(3.0)], dtype=complex),
        3: -0.5 * np.array([1.0, np.sqrt(3.0)], dtype=complex),
    }
    return states[i]


def anti_trine_state(i: int) -> np.ndarray:
    states = {
        1: np.array([0.0, 1.0], dtype=complex),
        2: np.array([np.sqrt(3.0) / 2.0, 0.5], dtype=complex),
        3: np.array([np.sqrt(3.0) / 2.0, -0.5], dtype=complex),
    }
    return states[i]


def sic_state(i: int) -> np.ndarray:
    a = -1.0 / np.sqrt(3.0)
    b = np.sqrt(2.0 / 3.0)
    phases = {1: None, 2: 1.0, 3: np.exp(2j * np.pi / 3.0), 4: np.exp(-2j * np.pi / 3.0)}
    if i == 1:
        return np.array([1.0, 0.0], dtype=complex)
    return np.array([a, b * phases[i]], dtype=complex)


def anti_sic_state(i: int) -> np.ndarray:
    a = np.sqrt(2.0 / 3.0)
    b = 1.0 / np.sqrt(3.0)
    phases = {1: None, 2: 1.0, 3: np.exp(2j * np.pi / 3.0), 4: np.exp(-2j * np.pi / 3.0)}
    if i == 1:
        return np.array([0.0, 1.0], dtype=complex)
    return np.array([a, b * phases[i]], dtype=complex)


def usd_state(sign: int, theta: float) -> np.ndarray:
    """The pair of non-orthogonal states cos(t/2)|H> +/- sin(t/2)|V>."""
    if sign not in (+1, -1):
        raise ValidationError("sign must be +1 or -1")
    return np.array([np.cos(theta / 2.0), sign * np.sin(theta / 2.0)], dtype=complex)


def trine_scenario() -> list:
    return [
        IterationPair(IDENTITY_COIN, _TILT),
        IterationPair(HADAMARD_LIKE, IDENTITY_COIN),
    ]


def sic_scenario() -> list:
    split = np.sqrt(0.5) * np.array([[-1.0, 1.0], [1.0, 1.0]], dtype=complex)
    phase = np.sqrt(0.5) * np.array(
        [
            [np.exp(-1j * np.pi / 3.0), np.exp(1j * np.pi / 6.0)],
            [np.exp(1j * np.pi / 3.0), np.exp(-1j * np.pi / 6.0)],
        ],
        dtype=complex,
    )
    return [
        IterationPair(IDENTITY_COIN, split),
        IterationPair(split, _TILT),
        IterationPair(phase, IDENTITY_COIN),
    ]


def usd_scenario(theta: float) -> list:
    """Discrimination circuit for the state pair at separation angle theta.

    Requires 0 < theta <= pi/2 so that tan(theta/2) <= 1 and the matrix
    square root stays real.
    """
    if not 0.0 < theta <= np.pi / 2.0 + 1e-12:
        raise ValidationError("theta must lie in (0, pi/2]")
    t = np.tan(theta / 2.0)
    q = np.sqrt(max(0.0, 1.0 - t * t))
    peel = np.array([[q, t], [t, -q]], dtype=complex)
    return [
        IterationPair(IDENTITY_COIN, peel),
        IterationPair(HADAMARD_LIKE, IDENTITY_COIN),
    ]


def usd_success_probability(theta: float) -> float:
    """Probability of a conclusive outcome: 2 sin^2(theta/2) = 1 - cos(theta)."""
    if not 0.0 <= theta <= np.pi / 2.0 + 1e-12:
        raise ValidationError("theta must lie in [0, pi/2]")
    return float(1.0 - np.cos(theta))


_SCENARIOS = {"trine": trine_scenario, "sic": sic_scenario, "usd": usd_scenario}


def scenario_schedule(name: str, theta: float = None) -> CoinSchedule:
    """Schedule for a named scenario; ``theta`` is required for "usd"."""
    if name not in _SCENARIOS:
        raise ValidationError(f"unknown scenario {name!r}")
    if name == "usd":
        if theta is None:
            raise ValidationError("usd scenario requires theta")
        return build_circuit(usd_scenario(theta))
    return build_circuit(_SCENARIOS[name]())


def scenario_port_map(name: str, theta: float = None) -> dict:
    """Outcome->port assignment discovered by extraction, not assumed.

    Ports are matched to the scenario's defining states by picking, for
    each extracted effect, the state it is proportional to.
    """
    schedule = scenario_schedule(name, theta)
    extracted = extract_povm(schedule)
    if name == "trine":
        states = {i: trine_state(i) for i in (1, 2, 3)}
    elif name == "sic":
        states = {i: sic_state(i) for i in (1, 2, 3, 4)}
    else:
        # conclusive ports carry the anti-state of the discarded input
        return {"plus": 2, "minus": 0, "failure": 4}
    mapping = {}
    for i, v in states.items():
        weight = 2.0 / len(states)
        projector = weight * np.outer(v, v.conj())
        for e in extracted.elements:
            if np.max(np.abs(e.matrix - projector)) < 1e-9:
                mapping[i] = e.port
                break
    return mapping
