"""Counting statistics and optical imperfections for walk measurements.

``run_density`` evolves the full density matrix over (position, coin)
and models finite interference contrast: at every displacer belonging
to an interferometer with visibility V, off-diagonal coherences are
multiplied by V.  With all visibilities at 1 it reproduces the ideal
pure-state probabilities exactly.  ``sample_counts`` adds multinomial
shot noise with a seeded, portable generator, and
``apply_efficiencies`` models per-port detector imbalance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .optics import interferometers
from .povm import usd_scenario, usd_state, usd_success_probability, build_circuit
from .tolerances import DEFAULT
from .walk import CoinSchedule, L, R, ValidationError, WalkState


@dataclass(frozen=True)
class ImperfectionConfig:
    """Optical non-idealities plus the RNG seed used for sampling.

    ``visibilities`` maps an interferometer (its displacer pair) to the
    interference contrast in [0, 1]; pairs absent from the map are
    perfect.  ``port_efficiencies`` maps detection ports to relative
    detector efficiencies in (0, 1]; their spread must stay inside
    ``imbalance_budget``.
    """

    visibilities: dict = field(default_factory=dict)
    port_efficiencies: dict = field(default_factory=dict)
    seed: int = 0
    imbalance_budget: float = 0.05

    def __post_init__(self):
        for pair, v in self.visibilities.items():
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"visibility for {pair} must lie in [0, 1]")
        for port, eta in self.port_efficiencies.items():
            if not 0.0 < eta <= 1.0:
                raise ValidationError(f"efficiency for port {port} must lie in (0, 1]")
        if self.port_efficiencies:
            values = list(self.port_efficiencies.values())
            spread = (max(values) - min(values)) / max(values)
            if spread > self.imbalance_budget + 1e-12:
                raise ValidationError(
                    f"efficiency imbalance {spread:.4f} exceeds budget "
                    f"{self.imbalance_budget:.4f}"
                )

    def to_json(self) -> str:
        payload = {
            "visibilities": {f"{a}-{b}": v for (a, b), v in self.visibilities.items()},
            "port_efficiencies": {str(p): e for p, e in self.port_efficiencies.items()},
            "seed": self.seed,
            "imbalance_budget": self.imbalance_budget,
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ImperfectionConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"malformed imperfection config: {exc}") from exc
        vis = {}
        for key, v in data.get("visibilities", {}).items():
            a, b = key.split("-")
            vis[(int(a), int(b))] = float(v)
        eff = {int(p): float(e) for p, e in data.get("port_efficiencies", {}).items()}
        return cls(
            visibilities=vis,
            port_efficiencies=eff,
            seed=int(data.get("seed", 0)),
            imbalance_budget=float(data.get("imbalance_budget", 0.05)),
        )


IDEAL = ImperfectionConfig()


@dataclass(frozen=True)
class CountTable:
    """Per-port photon counts with normalised probabilities and standard errors."""

    counts: dict
    total: int
    probabilities: dict
    std_errors: dict

    @classmethod
    def from_counts(cls, counts: dict) -> "CountTable":
        total = int(sum(counts.values()))
        if total <= 0:
            raise ValidationError("count table needs a positive total")
        probs = {p: c / total for p, c in counts.items()}
        errs = {p: float(np.sqrt(q * (1.0 - q) / total)) for p, q in probs.items()}
        return cls(dict(counts), total, probs, errs)

    def parenthetical(self, port: int, digits: int = 4) -> str:
        """Value with the uncertainty in the last printed digits, e.g. 0.1684(19)."""
        p = self.probabilities[port]
        err_units = round(self.std_errors[port] * 10 ** digits)
        return f"{p:.{digits}f}({err_units:02d})"

    def to_json(self) -> str:
        payload = {
            "counts": {str(p): c for p, c in sorted(self.counts.items())},
            "total": self.total,
            "probabilities": {str(p): v for p, v in sorted(self.probabilities.items())},
            "std_errors": {str(p): v for p, v in sorted(self.std_errors.items())},
        }
        return json.dumps(payload, sort_keys=True)


def run_density(schedule: CoinSchedule, coin_vector, config: ImperfectionConfig = None) -> dict:
    """Final position distribution under the dephasing imperfection model.

    Coherences pick up one factor of the relevant visibility per
    interferometer displacer they traverse, so a closed pair damps the
    recombined-path coherence by V^2.
    """
    if config is None:
        config = IDEAL
    steps = schedule.steps
    t_max = max(1, len(steps))
    n_pos = 2 * t_max + 1
    dim = 2 * n_pos

    def idx(x: int, c: int) -> int:
        return 2 * (x + t_max) + c

    start = WalkState.from_coin_vector(coin_vector)
    vec = np.zeros(dim, dtype=complex)
    for (x, c), a in start.amplitudes.items():
        vec[idx(x, c)] = a
    rho = np.outer(vec, vec.conj())

    damping = {}
    for pair in interferometers(schedule):
        v = config.visibilities.get(pair, 1.0)
        for member in pair:
            damping[member] = damping.get(member, 1.0) * v

    # cyclic shift permutation; support never reaches the wrap-around edge
    dest = np.arange(dim)
    for x in range(-t_max, t_max + 1):
        dest[idx(x, R)] = idx(x + 1 if x < t_max else -t_max, R)
        dest[idx(x, L)] = idx(x - 1 if x > -t_max else t_max, L)
    inv = np.empty(dim, dtype=int)
    inv[dest] = np.arange(dim)

    for s, coins in enumerate(steps, start=1):
        if coins:
            u = np.eye(dim, dtype=complex)
            for x, m in coins.items():
                i, j = idx(x, R), idx(x, L)
                u[i, i], u[i, j] = m[0, 0], m[0, 1]
                u[j, i], u[j, j] = m[1, 0], m[1, 1]
            rho = u @ rho @ u.conj().T
        rho = rho[np.ix_(inv, inv)]
        v = damping.get(s)
        if v is not None and v != 1.0:
            diag = np.diag(np.diag(rho))
            rho = diag + v * (rho - diag)

    out = {}
    for x in range(-t_max, t_max + 1):
        if (x - len(steps)) % 2 != 0:
            continue
        p = rho[idx(x, R), idx(x, R)].real + rho[idx(x, L), idx(x, L)].real
        out[x] = max(0.0, float(p))
    return out


def apply_efficiencies(dist: dict, efficiencies: dict) -> dict:
    """Reweight port probabilities by detector efficiencies and renormalise."""
    for port, eta in efficiencies.items():
        if not 0.0 < eta <= 1.0:
            raise ValidationError(f"efficiency for port {port} must lie in (0, 1]")
    weighted = {p: q * efficiencies.get(p, 1.0) for p, q in dist.items()}
    total = sum(weighted.values())
    if total <= 0.0:
        raise ValidationError("all probability removed by efficiencies")
    return {p: q / total for p, q in weighted.items()}


def sample_counts(dist: dict, total: int, seed: int) -> CountTable:
    """Multinomial draw over ports; identical seeds give identical tables."""
    if total <= 0:
        raise ValidationError("total count must be positive")
    ports = sorted(dist)
    probs = np.array([dist[p] for p in ports], dtype=float)
    if np.any(probs < -1e-12):
        raise ValidationError("negative probabilities cannot be sampled")
    probs = np.clip(probs, 0.0, None)
    if abs(probs.sum() - 1.0) > DEFAULT.distribution:
        raise ValidationError(f"distribution sums to {probs.sum():.12f}, not 1")
    probs = probs / probs.sum()
    rng = np.random.default_rng(seed)
    draws = rng.multinomial(total, probs)
    return CountTable.from_counts({p: int(c) for p, c in zip(ports, draws)})


@dataclass(frozen=True)
class SweepPoint:
    theta: float
    p_theory: float
    p_sampled: float
    std_error: float


def usd_sweep(theta_values, config: ImperfectionConfig = None, total: int = 40000,
              seed: int = 0) -> list:
    """Conclusive-outcome probability across state separations.

    Negative angles mirror the positive ones (the success probability is
    even in theta) and probe the second input state, whose conclusive
    port is x = 0 instead of x = 2.  Each angle gets an independent
    sub-stream of the seeded generator.
    """
    thetas = list(theta_values)
    for th in thetas:
        if not 0.0 < abs(th) <= np.pi / 2.0 + 1e-12:
            raise ValidationError("sweep angles must have magnitude in (0, pi/2]")
    if config is None:
        config = IDEAL
    children = np.random.SeedSequence(seed).spawn(len(thetas))
    rows = []
    for th, child in zip(thetas, children):
        mag = abs(th)
        schedule = build_circuit(usd_scenario(mag))
        state = usd_state(+1 if th > 0 else -1, mag)
        success_port = 2 if th > 0 else 0
        dist = run_density(schedule, state, config)
        dist = apply_efficiencies(dist, config.port_efficiencies)
        table = sample_counts(dist, total, int(child.generate_state(1)[0]))
        p_hat = table.probabilities.get(success_port, 0.0)
        err = table.std_errors.get(success_port, 0.0)
        rows.append(SweepPoint(th, usd_success_probability(mag), p_hat, err))
    return rows
