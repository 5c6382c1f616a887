"""Linear-optical elements acting on polarization-encoded spatial modes."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .fock import PureFockState, apply_rail_swap, apply_two_rail_unitary, permute_rails


class ElementKind(enum.Enum):
    HWP = "hwp"
    QWP = "qwp"
    PHASE = "phase"
    SIGMA_Z = "z"
    S = "s"
    HADAMARD = "h"
    PBS = "pbs"
    RAIL_SWAP = "swap"


TWO_MODE_KINDS = frozenset({ElementKind.PBS, ElementKind.RAIL_SWAP})
ANGLE_KINDS = frozenset({ElementKind.HWP, ElementKind.PHASE})


@dataclass(frozen=True)
class ElementSpec:
    """An element and the spatial mode(s) it acts on.

    ``modes`` holds mode labels; they are resolved to register positions when the
    element is applied. ``theta`` is the HWP angle or the phase-shifter phase.
    """

    kind: ElementKind
    modes: tuple
    theta: float = 0.0

    def __post_init__(self):
        kind = ElementKind(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "modes", tuple(self.modes))
        want = 2 if kind in TWO_MODE_KINDS else 1
        if len(self.modes) != want:
            raise ValueError(f"{kind.value} acts on {want} mode(s), got {self.modes!r}")
        if want == 2 and self.modes[0] == self.modes[1]:
            raise ValueError(f"{kind.value} needs two distinct modes")
        if not math.isfinite(self.theta):
            raise ValueError("element angle must be finite")

    def __str__(self):
        args = [str(m) for m in self.modes]
        if self.kind in ANGLE_KINDS:
            args.append(f"theta={self.theta!r}")
        return f"{self.kind.value}({', '.join(args)})"


def hwp(mode, theta: float) -> ElementSpec:
    return ElementSpec(ElementKind.HWP, (mode,), theta)


def hadamard(mode) -> ElementSpec:
    return ElementSpec(ElementKind.HADAMARD, (mode,))


def sigma_z(mode) -> ElementSpec:
    return ElementSpec(ElementKind.SIGMA_Z, (mode,))


def s_gate(mode) -> ElementSpec:
    return ElementSpec(ElementKind.S, (mode,))


def qwp(mode) -> ElementSpec:
    return ElementSpec(ElementKind.QWP, (mode,))


def phase_shifter(mode, phi: float) -> ElementSpec:
    return ElementSpec(ElementKind.PHASE, (mode,), phi)


def pbs(mode_a, mode_b) -> ElementSpec:
    return ElementSpec(ElementKind.PBS, (mode_a, mode_b))


def rail_swap(mode_a, mode_b) -> ElementSpec:
    return ElementSpec(ElementKind.RAIL_SWAP, (mode_a, mode_b))


def hwp_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(2 * theta), math.sin(2 * theta)
    return np.array([[c, s], [s, -c]], dtype=np.complex128)


def matrix_of(spec: ElementSpec):
    """Polarization-basis (H, V) matrix of a single-mode element.

    Two-mode elements have no 2x2 matrix; a rail routing is returned instead:
    ``("swap-h",)`` for the PBS and ``("swap-hv",)`` for the mode exchange.
    """
    kind = spec.kind
    if kind is ElementKind.HWP:
        return hwp_matrix(spec.theta)
    if kind is ElementKind.HADAMARD:
        return hwp_matrix(math.pi / 8)
    if kind is ElementKind.SIGMA_Z:
        return hwp_matrix(0.0)
    if kind in (ElementKind.S, ElementKind.QWP):
        # QWP with fast axis horizontal, global phase dropped
        return np.diag([1, 1j]).astype(np.complex128)
    if kind is ElementKind.PHASE:
        return np.diag([1, np.exp(1j * spec.theta)]).astype(np.complex128)
    if kind is ElementKind.PBS:
        return ("swap-h",)
    if kind is ElementKind.RAIL_SWAP:
        return ("swap-hv",)
    raise ValueError(f"unknown element kind {kind!r}")


def _resolve(mode, register: Mapping | None) -> int:
    if register is None:
        return int(mode)
    try:
        return register[mode]
    except KeyError:
        raise KeyError(f"mode {mode!r} is not in the register") from None


def apply_element(state: PureFockState, spec: ElementSpec, register: Mapping | Sequence | None = None,
                  backend: str | None = None) -> PureFockState:
    """Apply ``spec`` to ``state``.

    ``register`` maps mode labels to spatial-mode positions (a sequence of labels
    is accepted too); without it the labels are taken as positions.
    """
    if register is not None and not isinstance(register, Mapping):
        register = {label: i for i, label in enumerate(register)}
    positions = [_resolve(m, register) for m in spec.modes]
    for p in positions:
        if not 0 <= 2 * p + 1 < state.rail_count:
            raise IndexError(f"mode position {p} outside a register of {state.rail_count} rails")
    if spec.kind is ElementKind.PBS:
        a, b = positions
        return apply_rail_swap(state, 2 * a, 2 * b)
    if spec.kind is ElementKind.RAIL_SWAP:
        a, b = positions
        order = list(range(state.rail_count))
        order[2 * a], order[2 * b] = 2 * b, 2 * a
        order[2 * a + 1], order[2 * b + 1] = 2 * b + 1, 2 * a + 1
        return permute_rails(state, order)
    (p,) = positions
    return apply_two_rail_unitary(state, (2 * p, 2 * p + 1), matrix_of(spec), backend=backend)
