"""Detector models and conditional measurement.

Conventional (bucket) detectors only tell vacuum from "at least one photon".
With efficiency eta and mean dark-count number nu per resolution window, the
no-click element is diagonal with weight exp(-nu) (1 - eta)^n on n photons and
the click element is its complement. Because both elements are diagonal and
positive, a demanded outcome is applied to a pure state as the Kraus operator
sqrt(Pi), which keeps pure branches pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fock import (
    DiagonalOperator,
    PureFockState,
    StateEnsemble,
    apply_diagonal,
    rail_index,
    trace_out_rails,
)

NO_CLICK, CLICK = 0, 1


@dataclass(frozen=True)
class DetectorParams:
    """Efficiency, dark-count rate (1/s) and resolution time (s) of one detector."""

    eta: float = 1.0
    rdark: float = 0.0
    tres: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.eta!r}")
        if self.rdark < 0 or self.tres < 0:
            raise ValueError("dark-count rate and resolution time must be non-negative")

    @classmethod
    def with_nu(cls, eta: float, nu: float) -> "DetectorParams":
        return cls(eta=eta, rdark=nu, tres=1.0)

    @classmethod
    def ideal(cls) -> "DetectorParams":
        return cls(1.0, 0.0, 0.0)

    @property
    def nu(self) -> float:
        return self.tres * self.rdark

    def no_click_weights(self, cutoff: int) -> np.ndarray:
        n = np.arange(cutoff + 1)
        return math.exp(-self.nu) * (1.0 - self.eta) ** n


def povm_weights(p: DetectorParams, rail=0, cutoff: int = 2) -> tuple[DiagonalOperator, DiagonalOperator]:
    """(Pi_0, Pi_1) for one rail."""
    w0 = p.no_click_weights(cutoff)
    r = rail_index(rail)
    return DiagonalOperator(r, tuple(w0.tolist())), DiagonalOperator(r, tuple((1.0 - w0).tolist()))


@dataclass(frozen=True)
class ClickPattern:
    """Outcome per measured rail: 0/1 for bucket detectors, a count when number-resolving."""

    rails: tuple[int, ...]
    outcomes: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "rails", tuple(rail_index(r) for r in self.rails))
        object.__setattr__(self, "outcomes", tuple(int(o) for o in self.outcomes))
        if len(self.rails) != len(self.outcomes):
            raise ValueError("pattern needs one outcome per measured rail")
        if len(set(self.rails)) != len(self.rails):
            raise ValueError("measured rails must be distinct")
        if any(o < 0 for o in self.outcomes):
            raise ValueError("outcomes must be non-negative")

    def format(self, labels: Sequence[str] | None = None) -> str:
        labels = labels or [str(r) for r in self.rails]
        return " ".join(f"D{lab}={o}" for lab, o in zip(labels, self.outcomes))


def format_pattern(labels: Sequence[str], outcomes: Sequence[int]) -> str:
    return " ".join(f"D{lab}={int(o)}" for lab, o in zip(labels, outcomes))


def parse_pattern(text: str) -> tuple[list[str], list[int]]:
    """``"D3H=1 D3V=0"`` -> (["3H", "3V"], [1, 0])."""
    labels, outcomes = [], []
    for tok in text.split():
        name, sep, val = tok.partition("=")
        if not sep or not name.startswith("D") or len(name) < 2:
            raise ValueError(f"bad pattern token {tok!r}")
        labels.append(name[1:])
        outcomes.append(int(val))
    return labels, outcomes


@dataclass(frozen=True)
class MeasurementOutcome:
    pattern: ClickPattern
    probability: float
    conditional: StateEnsemble


def _per_rail_params(p, k: int) -> list[DetectorParams]:
    if isinstance(p, DetectorParams):
        return [p] * k
    p = list(p)
    if len(p) != k:
        raise ValueError("need one DetectorParams per measured rail")
    return p


def _coerce(rails, pattern) -> ClickPattern:
    if isinstance(pattern, ClickPattern):
        if rails is not None and tuple(rail_index(r) for r in rails) != pattern.rails:
            raise ValueError("pattern rails differ from measured rails")
        return pattern
    rails = list(rails)
    if not rails:
        raise ValueError("no rails to measure")
    if len(pattern) != len(rails):
        raise ValueError(f"pattern has {len(pattern)} outcomes for {len(rails)} rails")
    return ClickPattern(tuple(rails), tuple(pattern))


def click_factors(state: PureFockState, rails: Sequence, p, pattern: Sequence[int]) -> np.ndarray:
    """Per-term POVM weight of a click pattern (product over rails)."""
    params = _per_rail_params(p, len(rails))
    f = np.ones(len(state))
    for r, det, o in zip(rails, params, pattern):
        w0 = det.no_click_weights(state.cutoff)[state.counts(r)]
        f = f * (w0 if o == NO_CLICK else 1.0 - w0)
    return f


def project_clicks(state: PureFockState, rails: Sequence, pattern: Sequence[int], p) -> PureFockState:
    """Apply sqrt(Pi) for the demanded outcomes; the measured rails stay in the register."""
    params = _per_rail_params(p, len(rails))
    for r, det, o in zip(rails, params, pattern):
        if o not in (NO_CLICK, CLICK):
            raise ValueError(f"bucket detector outcome must be 0 or 1, got {o!r}")
        state = apply_diagonal(state, povm_weights(det, r, state.cutoff)[o])
    return state


def pattern_probabilities(state: PureFockState, rails: Sequence, p) -> np.ndarray:
    """Probabilities of all 2^k click patterns, first rail most significant."""
    params = _per_rail_params(p, len(rails))
    probs = np.abs(state.amps) ** 2
    table = probs[:, None]
    for r, det in zip(rails, params):
        w0 = det.no_click_weights(state.cutoff)[state.counts(r)]
        table = np.stack([table * w0[:, None], table * (1.0 - w0)[:, None]], axis=2)
        table = table.reshape(len(state), -1)
    return table.sum(axis=0)


def _finish(ensemble_parts, pattern, rails):
    projected = StateEnsemble(tuple(ensemble_parts))
    reduced = trace_out_rails(projected, rails)
    prob = reduced.trace
    cond = reduced.renormalized() if prob > 0 else StateEnsemble()
    return MeasurementOutcome(pattern, prob, cond)


def measure(ensemble: StateEnsemble | PureFockState, rails: Sequence, pattern, p: DetectorParams) -> MeasurementOutcome:
    """Demand ``pattern`` on ``rails``; returns its probability and the renormalized
    conditional state of the unmeasured rails."""
    if isinstance(ensemble, PureFockState):
        ensemble = StateEnsemble.from_unnormalized([ensemble])
    pat = _coerce(rails, pattern)
    parts = []
    for w, s in ensemble.branches:
        proj = project_clicks(s, pat.rails, pat.outcomes, p)
        n2 = proj.norm_squared
        if n2 > 0:
            parts.append((w * n2, proj.normalized()))
    return _finish(parts, pat, pat.rails)


def resolving_weights(p: DetectorParams, reported: int, cutoff: int) -> np.ndarray:
    """P(report ``reported`` | n photons), n = 0..cutoff: binomial loss plus Poisson dark counts."""
    nu = p.nu
    out = np.zeros(cutoff + 1)
    for n in range(cutoff + 1):
        for j in range(min(n, reported) + 1):
            detect = math.comb(n, j) * p.eta ** j * (1 - p.eta) ** (n - j)
            dark = reported - j
            out[n] += detect * math.exp(-nu) * nu ** dark / math.factorial(dark)
    return out


def measure_number_resolving(ensemble: StateEnsemble | PureFockState, rails: Sequence,
                             counts: Sequence[int], p: DetectorParams | None = None) -> MeasurementOutcome:
    """Photon-number-resolving measurement reporting ``counts`` on ``rails``."""
    if isinstance(ensemble, PureFockState):
        ensemble = StateEnsemble.from_unnormalized([ensemble])
    p = DetectorParams.ideal() if p is None else p
    pat = _coerce(rails, counts)
    params = _per_rail_params(p, len(pat.rails))
    parts = []
    for w, s in ensemble.branches:
        proj = s
        for r, det, m in zip(pat.rails, params, pat.outcomes):
            proj = apply_diagonal(proj, DiagonalOperator(r, tuple(resolving_weights(det, m, s.cutoff))))
        n2 = proj.norm_squared
        if n2 > 0:
            parts.append((w * n2, proj.normalized()))
    return _finish(parts, pat, pat.rails)
