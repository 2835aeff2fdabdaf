"""Secondary-user energy reports under Rayleigh block fading, with falsification.

Every observation instant draws from its own generator keyed on
``(master_seed, instant_index)``, so any instant can be regenerated in
isolation and instants may be produced in any order or in parallel.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from byzsense.errors import InvalidInputError

__all__ = [
    "AttackKind",
    "AttackModel",
    "ObservationInstant",
    "ScenarioConfig",
    "SensingReport",
    "apply_attack",
    "instant_stream",
    "rayleigh_gain",
    "sense_energy",
    "simulate_instant",
    "simulate_scenario",
]


class AttackKind(str, enum.Enum):
    HONEST = "honest"
    ALWAYS_NO = "always_no"
    ALWAYS_YES = "always_yes"


_DEFAULT_SEVERITY = {
    AttackKind.HONEST: 1.0,
    AttackKind.ALWAYS_NO: 0.5,
    AttackKind.ALWAYS_YES: 2.0,
}


@dataclass(frozen=True)
class AttackModel:
    """How malicious users falsify their report.

    ``severity`` is the scale factor: below 1 for ``always_no`` (reported
    value is severity times a noise-only reading), above 1 for
    ``always_yes`` (reported value is severity times the honest reading).
    """

    kind: AttackKind = AttackKind.ALWAYS_NO
    severity: float | None = None

    def __post_init__(self):
        kind = AttackKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if self.severity is None:
            object.__setattr__(self, "severity", _DEFAULT_SEVERITY[kind])
        sev = float(self.severity)
        object.__setattr__(self, "severity", sev)
        if not math.isfinite(sev) or sev <= 0:
            raise InvalidInputError(f"attack.severity must be positive, got {sev}")
        if kind is AttackKind.ALWAYS_NO and not sev < 1:
            raise InvalidInputError(f"attack.severity must lie in (0, 1) for always_no, got {sev}")
        if kind is AttackKind.ALWAYS_YES and not sev > 1:
            raise InvalidInputError(f"attack.severity must exceed 1 for always_yes, got {sev}")


@dataclass(frozen=True)
class ScenarioConfig:
    n_malicious: int
    n_su: int = 50
    snr_db: float = -10.0
    samples_per_sensing: int = 1000
    n_instants: int = 50
    pu_present_prob: float = 1.0
    attack: AttackModel = field(default_factory=AttackModel)
    method_multiplier_k: float = 3.0
    max_iterations: int = 10
    threshold_tolerance: float = 1e-6
    two_sided: bool = False
    master_seed: int = 0
    threshold_grid: tuple[float, float, int] = (0.8, 1.3, 51)

    def __post_init__(self):
        def fail(name, why):
            raise InvalidInputError(f"{name}: {why}")

        for name in ("n_su", "samples_per_sensing", "n_instants", "max_iterations"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                fail(name, f"must be a positive integer, got {v!r}")
        if isinstance(self.n_malicious, bool) or not isinstance(self.n_malicious, int) or self.n_malicious < 0:
            fail("n_malicious", f"must be a non-negative integer, got {self.n_malicious!r}")
        if self.n_malicious >= self.n_su:
            fail("n_malicious", f"must be smaller than n_su ({self.n_su}), got {self.n_malicious}")
        if not math.isfinite(self.snr_db):
            fail("snr_db", "must be finite")
        if not 0.0 <= self.pu_present_prob <= 1.0:
            fail("pu_present_prob", f"must lie in [0, 1], got {self.pu_present_prob}")
        if not self.method_multiplier_k > 0:
            fail("method_multiplier_k", f"must be positive, got {self.method_multiplier_k}")
        if not self.threshold_tolerance > 0:
            fail("threshold_tolerance", f"must be positive, got {self.threshold_tolerance}")
        if isinstance(self.master_seed, bool) or not isinstance(self.master_seed, int) or not 0 <= self.master_seed < 2**64:
            fail("master_seed", f"must be an unsigned 64-bit integer, got {self.master_seed!r}")
        if not isinstance(self.attack, AttackModel):
            fail("attack", f"must be an AttackModel, got {type(self.attack).__name__}")
        start, stop, steps = self.threshold_grid
        if isinstance(steps, bool) or not isinstance(steps, int) or steps < 1:
            fail("threshold_grid.steps", f"must be a positive integer, got {steps!r}")
        if steps > 1 and not stop > start:
            fail("threshold_grid", f"stop ({stop}) must exceed start ({start})")

    @property
    def snr_linear(self):
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def malicious_ids(self):
        return frozenset(range(self.n_malicious))

    def grid(self):
        start, stop, steps = self.threshold_grid
        return np.linspace(start, stop, steps)


@dataclass(frozen=True)
class SensingReport:
    su_id: int
    reported_level: float
    honest_level: float
    is_malicious: bool


@dataclass(frozen=True)
class ObservationInstant:
    instant_index: int
    pu_present: bool
    reports: tuple[SensingReport, ...]

    @property
    def levels(self):
        return np.array([r.reported_level for r in self.reports])

    @property
    def malicious_ids(self):
        return frozenset(r.su_id for r in self.reports if r.is_malicious)


def instant_stream(master_seed, instant_index):
    """Independent generator for one observation instant."""
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(instant_index,))
    return np.random.Generator(np.random.PCG64(seq))


def rayleigh_gain(stream: np.random.Generator) -> complex:
    """Circularly-symmetric complex Gaussian channel gain with ``E|h|^2 = 1``."""
    re, im = stream.standard_normal(2)
    return complex(re, im) / math.sqrt(2.0)


def sense_energy(pu_present, h, snr_linear, m_samples, stream: np.random.Generator) -> float:
    """Normalised energy ``(1/M) sum |sqrt(snr) h s[m] 1{pu} + n[m]|^2``.

    Noise is unit-power complex white Gaussian; the PU waveform has unit
    modulus and pseudo-random phase, so only its power matters. The mean
    is 1 without the PU and ``1 + snr |h|^2`` with it.
    """
    if snr_linear < 0:
        raise InvalidInputError(f"snr_linear must be non-negative, got {snr_linear}")
    if m_samples < 1:
        raise InvalidInputError(f"m_samples must be at least 1, got {m_samples}")
    noise = stream.standard_normal((2, m_samples))
    rx = (noise[0] + 1j * noise[1]) / math.sqrt(2.0)
    if pu_present:
        phase = stream.uniform(0.0, 2.0 * math.pi, m_samples)
        rx = rx + math.sqrt(snr_linear) * h * np.exp(1j * phase)
    return float(np.mean(rx.real**2 + rx.imag**2))


def apply_attack(honest_level, attack: AttackModel, stream: np.random.Generator, m_samples=1000) -> float:
    """Falsified report for a malicious user (identity for honest behaviour)."""
    if honest_level < 0:
        raise InvalidInputError(f"honest_level must be non-negative, got {honest_level}")
    if attack.kind is AttackKind.HONEST:
        return honest_level
    if attack.kind is AttackKind.ALWAYS_NO:
        return attack.severity * sense_energy(False, 0j, 0.0, m_samples, stream)
    return attack.severity * honest_level


SensingStatistic = Callable[[bool, complex, float, int, np.random.Generator], float]


def simulate_instant(config: ScenarioConfig, instant_index: int, statistic: SensingStatistic = sense_energy) -> ObservationInstant:
    """Generate every SU report for one instant.

    Malicious users are SU ids ``0 .. n_malicious-1`` in every instant. Each
    SU gets a fresh fading gain (block fading). ``statistic`` replaces the
    energy detector when a different sensing statistic is wanted.
    """
    if not 0 <= instant_index < config.n_instants:
        raise InvalidInputError(f"instant_index {instant_index} outside [0, {config.n_instants})")
    rng = instant_stream(config.master_seed, instant_index)
    pu_present = bool(rng.random() < config.pu_present_prob)
    gamma = config.snr_linear
    reports = []
    for su in range(config.n_su):
        h = rayleigh_gain(rng)
        honest = statistic(pu_present, h, gamma, config.samples_per_sensing, rng)
        malicious = su < config.n_malicious
        if malicious:
            reported = apply_attack(honest, config.attack, rng, config.samples_per_sensing)
        else:
            reported = honest
        reports.append(SensingReport(su, reported, honest, malicious))
    return ObservationInstant(instant_index, pu_present, tuple(reports))


def simulate_scenario(config: ScenarioConfig, executor=None) -> list[ObservationInstant]:
    """All instants of a scenario, in index order.

    ``executor`` is any :class:`concurrent.futures.Executor`; results are
    identical with or without it.
    """
    indices = range(config.n_instants)
    if executor is None:
        return [simulate_instant(config, i) for i in indices]
    return list(executor.map(simulate_instant, [config] * config.n_instants, indices))
