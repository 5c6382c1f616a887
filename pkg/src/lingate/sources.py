"""Input and ancilla states: the two-qubit input, Bell pairs, SPDC pairs, GHZ and chi states.

Every builder returns a dual-rail state; each spatial mode contributes an (H, V)
rail pair in the order the modes are listed in the docstring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fock import DEFAULT_CUTOFF, PureFockState

H_RAILS = (1, 0)
V_RAILS = (0, 1)
_SQ2 = 1 / math.sqrt(2)
MAX_GAMMA2 = 1e-2


def polarization_key(letters: str) -> tuple[int, ...]:
    """``"HV"`` -> ``(1, 0, 0, 1)``: one photon per mode with the given polarizations."""
    out: tuple[int, ...] = ()
    for ch in letters:
        if ch == "H":
            out += H_RAILS
        elif ch == "V":
            out += V_RAILS
        elif ch == "0":
            out += (0, 0)
        else:
            raise ValueError(f"bad polarization letter {ch!r}")
    return out


def polarization_state(terms: dict[str, complex], cutoff: int = DEFAULT_CUTOFF) -> PureFockState:
    return PureFockState.from_amplitudes({polarization_key(k): v for k, v in terms.items()}, cutoff)


@dataclass(frozen=True)
class TwoQubitAmplitudes:
    """Coefficients of |HH>, |HV>, |VH>, |VV>."""

    alpha1: complex
    alpha2: complex
    alpha3: complex
    alpha4: complex

    def __post_init__(self):
        n = sum(abs(a) ** 2 for a in self.as_array())
        if abs(n - 1) > 1e-12:
            raise ValueError(f"amplitudes are not normalized (sum |alpha|^2 = {n!r})")

    @classmethod
    def from_vector(cls, vec: Sequence[complex], normalize: bool = False) -> "TwoQubitAmplitudes":
        v = np.asarray(vec, dtype=np.complex128)
        if v.shape != (4,):
            raise ValueError("need exactly four amplitudes")
        if normalize:
            v = v / np.linalg.norm(v)
        return cls(*(complex(x) for x in v))

    @classmethod
    def random(cls, rng: np.random.Generator) -> "TwoQubitAmplitudes":
        v = rng.normal(size=4) + 1j * rng.normal(size=4)
        return cls.from_vector(v, normalize=True)

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha1, self.alpha2, self.alpha3, self.alpha4], dtype=np.complex128)


@dataclass(frozen=True)
class SPDCParams:
    """Pair-generation amplitude; ``gamma2`` is the pairs-per-pulse rate."""

    gamma2: float
    double_pairs: bool = False

    def __post_init__(self):
        if not 0 <= self.gamma2 <= MAX_GAMMA2:
            raise ValueError(f"gamma^2 must lie in [0, {MAX_GAMMA2}], got {self.gamma2!r}")

    @property
    def gamma(self) -> float:
        return math.sqrt(self.gamma2)


def two_qubit_state(vec: Sequence[complex], cutoff: int = DEFAULT_CUTOFF) -> PureFockState:
    """Two modes (control, target) carrying ``sum vec[i] |basis_i>``; no normalization check."""
    labels = ("HH", "HV", "VH", "VV")
    return polarization_state({k: complex(a) for k, a in zip(labels, vec) if a != 0}, cutoff)


def input_state(a: TwoQubitAmplitudes, cutoff: int = DEFAULT_CUTOFF) -> PureFockState:
    """Modes c, t: alpha1|HH> + alpha2|HV> + alpha3|VH> + alpha4|VV>."""
    if not isinstance(a, TwoQubitAmplitudes):
        a = TwoQubitAmplitudes.from_vector(a)
    return two_qubit_state(a.as_array(), cutoff)


def epr_pair(cutoff: int = DEFAULT_CUTOFF) -> PureFockState:
    """(|HH> + |VV>)/sqrt(2) on two modes."""
    return polarization_state({"HH": _SQ2, "VV": _SQ2}, cutoff)


def bell_psi_plus(cutoff: int = DEFAULT_CUTOFF) -> PureFockState:
    """(|HV> + |VH>)/sqrt(2) on two modes."""
    return polarization_state({"HV": _SQ2, "VH": _SQ2}, cutoff)


def spdc_pair(p: SPDCParams, cutoff: int = DEFAULT_CUTOFF) -> PureFockState:
    """Vacuum-dominated EPR-like pair on two modes, renormalized after truncation.

    With ``double_pairs`` the second-order emission of a polarization-entangled
    pair source, gamma^2 (|2H,2H> + |1H1V,1H1V> + |2V,2V>), is added when the
    cutoff admits two photons per rail.
    """
    g = p.gamma
    amps = {(0, 0, 0, 0): 1.0, polarization_key("HH"): g, polarization_key("VV"): g}
    if p.double_pairs and cutoff >= 2:
        g2 = p.gamma2
        amps[(2, 0, 2, 0)] = g2
        amps[(1, 1, 1, 1)] = g2
        amps[(0, 2, 0, 2)] = g2
    return PureFockState.from_amplitudes(amps, cutoff).normalized()


def ghz_state(cutoff: int = DEFAULT_CUTOFF) -> PureFockState:
    """(|HHH> + |VVV>)/sqrt(2) on three modes."""
    return polarization_state({"HHH": _SQ2, "VVV": _SQ2}, cutoff)


def chi_state(cutoff: int = DEFAULT_CUTOFF) -> PureFockState:
    """(|HH>|Phi+> + |VV>|Psi+>)/sqrt(2) on four modes, in scheme order (1, 2, 5, 6)."""
    return polarization_state({"HHHH": 0.5, "HHVV": 0.5, "VVHV": 0.5, "VVVH": 0.5}, cutoff)
