"""Sparse multi-rail bosonic Fock states.

A register of S spatial modes has 2S rails, one per (mode, polarization)
pair; rail ``2*mode + pol`` with ``pol`` 0 for H and 1 for V. Basis states are
occupation vectors packed into int64 keys, ``bits_per_rail`` bits per rail with
rail 0 in the lowest bits. States are immutable; every operation returns a new
state.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import kernels

PRUNE_THRESHOLD = 1e-14
DEFAULT_CUTOFF = 2
UNITARY_TOL = 1e-12


class Polarization(enum.IntEnum):
    H = 0
    V = 1


@dataclass(frozen=True, order=True)
class RailIndex:
    """One bosonic rail: a spatial mode position and a polarization."""

    spatial_mode: int
    polarization: Polarization

    @property
    def index(self) -> int:
        return 2 * self.spatial_mode + int(self.polarization)


def rail_index(rail) -> int:
    """Resolve a ``RailIndex`` or plain integer to an integer rail position."""
    if isinstance(rail, RailIndex):
        return rail.index
    if isinstance(rail, (int, np.integer)) and rail >= 0:
        return int(rail)
    raise TypeError(f"not a rail: {rail!r}")


def bits_per_rail(cutoff: int) -> int:
    return max(1, int(cutoff).bit_length())


def max_rails(cutoff: int) -> int:
    return 63 // bits_per_rail(cutoff)


def pack(counts: Sequence[int], cutoff: int) -> int:
    bits = bits_per_rail(cutoff)
    key = 0
    for r, n in enumerate(counts):
        if not 0 <= n <= cutoff:
            raise ValueError(f"occupation {n} on rail {r} outside 0..{cutoff}")
        key |= int(n) << (r * bits)
    return key


def unpack(key: int, rail_count: int, cutoff: int) -> tuple[int, ...]:
    bits = bits_per_rail(cutoff)
    mask = (1 << bits) - 1
    return tuple((int(key) >> (r * bits)) & mask for r in range(rail_count))


@dataclass(frozen=True, eq=False)
class PureFockState:
    """Sparse complex amplitude map over occupation vectors.

    ``keys`` is sorted and unique, ``amps`` aligned with it. ``truncation_loss``
    accumulates the weight that fell outside the cutoff while producing this
    state.
    """

    keys: np.ndarray
    amps: np.ndarray
    rail_count: int
    cutoff: int = DEFAULT_CUTOFF
    truncation_loss: float = 0.0

    def __post_init__(self):
        if self.rail_count > max_rails(self.cutoff):
            raise ValueError(
                f"{self.rail_count} rails do not fit a packed key at cutoff {self.cutoff}"
            )

    @classmethod
    def from_arrays(cls, keys, amps, rail_count, cutoff=DEFAULT_CUTOFF, truncation_loss=0.0,
                    prune=PRUNE_THRESHOLD) -> "PureFockState":
        keys = np.asarray(keys, dtype=np.int64)
        amps = np.asarray(amps, dtype=np.complex128)
        if keys.size:
            uniq, inverse = np.unique(keys, return_inverse=True)
            if uniq.size != keys.size:
                summed = np.zeros(uniq.size, dtype=np.complex128)
                np.add.at(summed, inverse, amps)
                keys, amps = uniq, summed
            else:
                order = np.argsort(keys, kind="stable")
                keys, amps = keys[order], amps[order]
            keep = np.abs(amps) > prune
            keys, amps = keys[keep], amps[keep]
        keys.setflags(write=False)
        amps.setflags(write=False)
        return cls(keys, amps, int(rail_count), int(cutoff), float(truncation_loss))

    @classmethod
    def from_amplitudes(cls, amplitudes: Mapping[Sequence[int], complex],
                        cutoff: int = DEFAULT_CUTOFF, rail_count: int | None = None) -> "PureFockState":
        items = list(amplitudes.items())
        lengths = {len(k) for k, _ in items}
        if rail_count is None:
            if len(lengths) != 1:
                raise ValueError("occupation vectors must share one rail count")
            rail_count = lengths.pop()
        elif lengths - {rail_count}:
            raise ValueError("occupation vector length differs from rail_count")
        keys = [pack(k, cutoff) for k, _ in items]
        return cls.from_arrays(keys, [complex(v) for _, v in items], rail_count, cutoff)

    @classmethod
    def basis(cls, counts: Sequence[int], cutoff: int = DEFAULT_CUTOFF) -> "PureFockState":
        return cls.from_amplitudes({tuple(counts): 1.0}, cutoff)

    @classmethod
    def vacuum(cls, rail_count: int, cutoff: int = DEFAULT_CUTOFF) -> "PureFockState":
        return cls.basis((0,) * rail_count, cutoff)

    def __len__(self) -> int:
        return int(self.keys.size)

    @property
    def bits(self) -> int:
        return bits_per_rail(self.cutoff)

    @property
    def amplitudes(self) -> dict[tuple[int, ...], complex]:
        return {unpack(k, self.rail_count, self.cutoff): complex(a)
                for k, a in zip(self.keys.tolist(), self.amps.tolist())}

    def amplitude(self, counts: Sequence[int]) -> complex:
        if len(counts) != self.rail_count:
            raise ValueError("occupation vector length differs from rail_count")
        if any(n > self.cutoff for n in counts):
            return 0j
        key = pack(counts, self.cutoff)
        i = np.searchsorted(self.keys, key)
        if i < self.keys.size and self.keys[i] == key:
            return complex(self.amps[i])
        return 0j

    def counts(self, rail) -> np.ndarray:
        """Occupation of ``rail`` for every stored basis key."""
        r = rail_index(rail)
        self._check_rail(r)
        return (self.keys >> (r * self.bits)) & ((1 << self.bits) - 1)

    def photon_numbers(self) -> np.ndarray:
        return sum((self.counts(r) for r in range(self.rail_count)),
                   np.zeros(self.keys.size, dtype=np.int64))

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return abs(self.norm_squared - 1.0) <= tol

    def normalized(self) -> "PureFockState":
        n2 = self.norm_squared
        if n2 == 0:
            raise ValueError("cannot normalize a zero state")
        return self.scaled(1 / math.sqrt(n2))

    def scaled(self, factor: complex) -> "PureFockState":
        return PureFockState.from_arrays(self.keys, self.amps * factor, self.rail_count,
                                         self.cutoff, self.truncation_loss)

    def with_amps(self, amps, truncation_loss=None) -> "PureFockState":
        loss = self.truncation_loss if truncation_loss is None else truncation_loss
        return PureFockState.from_arrays(self.keys, amps, self.rail_count, self.cutoff, loss)

    def dump(self) -> str:
        """One line per basis key, ``occupations : re imag``, lexicographic by key."""
        lines = []
        for occ, a in sorted(self.amplitudes.items()):
            lines.append(f"{','.join(map(str, occ))} : {a.real:.15e} {a.imag:.15e}")
        return "\n".join(lines) + ("\n" if lines else "")

    def _check_rail(self, r: int):
        if not 0 <= r < self.rail_count:
            raise IndexError(f"rail {r} outside register of {self.rail_count} rails")

    def __repr__(self):
        return (f"PureFockState(rails={self.rail_count}, cutoff={self.cutoff}, "
                f"terms={len(self)}, norm2={self.norm_squared:.6g})")


@dataclass(frozen=True)
class DiagonalOperator:
    """Operator diagonal in the Fock basis of one rail, weights indexed by photon count."""

    rail: int
    weights: tuple[float, ...]

    def __post_init__(self):
        if any(w < 0 for w in self.weights):
            raise ValueError("diagonal weights must be non-negative")


@dataclass(frozen=True)
class StateEnsemble:
    """Weighted mixture of normalized pure states, ``sum_k w_k |phi_k><phi_k|``."""

    branches: tuple[tuple[float, PureFockState], ...] = field(default_factory=tuple)

    def __post_init__(self):
        rails = {s.rail_count for _, s in self.branches}
        if len(rails) > 1:
            raise ValueError("ensemble branches live on different registers")
        if any(w <= 0 for w, _ in self.branches):
            raise ValueError("ensemble weights must be positive")

    @classmethod
    def pure(cls, state: PureFockState) -> "StateEnsemble":
        return cls.from_unnormalized([state])

    @classmethod
    def from_unnormalized(cls, states: Iterable[PureFockState]) -> "StateEnsemble":
        """Turn unnormalized pure states into weighted normalized branches."""
        branches = []
        for s in states:
            w = s.norm_squared
            if w > 0:
                branches.append((w, s.normalized()))
        return cls(tuple(branches))

    @property
    def trace(self) -> float:
        return float(sum(w for w, _ in self.branches))

    @property
    def rail_count(self) -> int:
        return self.branches[0][1].rail_count if self.branches else 0

    def renormalized(self) -> "StateEnsemble":
        t = self.trace
        if t <= 0:
            raise ValueError("cannot renormalize an empty ensemble")
        return StateEnsemble(tuple((w / t, s) for w, s in self.branches))

    def density_matrix(self, basis: Sequence[int] | None = None):
        """Dense density matrix on the populated keys; returns ``(keys, rho)``."""
        if basis is None:
            basis = np.unique(np.concatenate([s.keys for _, s in self.branches])) \
                if self.branches else np.zeros(0, dtype=np.int64)
        basis = np.asarray(basis, dtype=np.int64)
        rho = np.zeros((basis.size, basis.size), dtype=np.complex128)
        for w, s in self.branches:
            vec = np.zeros(basis.size, dtype=np.complex128)
            pos = np.searchsorted(basis, s.keys)
            if np.any(pos >= basis.size) or np.any(basis[np.minimum(pos, basis.size - 1)] != s.keys):
                raise ValueError("basis does not cover ensemble support")
            vec[pos] = s.amps
            rho += w * np.outer(vec, vec.conj())
        return basis, rho

    def equals(self, other: "StateEnsemble", tol: float = 1e-10) -> bool:
        """Operational equality: equal induced density operators."""
        if self.rail_count != other.rail_count and self.branches and other.branches:
            return False
        keys = [s.keys for _, s in self.branches + other.branches]
        basis = np.unique(np.concatenate(keys)) if keys else np.zeros(0, dtype=np.int64)
        _, a = self.density_matrix(basis)
        _, b = other.density_matrix(basis)
        return bool(np.all(np.abs(a - b) <= tol))


def tensor(a: PureFockState, b: PureFockState) -> PureFockState:
    """Product state with ``b``'s rails appended after ``a``'s."""
    if a.cutoff != b.cutoff:
        raise ValueError(f"cutoff mismatch: {a.cutoff} vs {b.cutoff}")
    shift = a.rail_count * a.bits
    keys = (a.keys[:, None] | (b.keys[None, :] << shift)).ravel()
    amps = np.outer(a.amps, b.amps).ravel()
    loss = a.truncation_loss * b.norm_squared + b.truncation_loss * a.norm_squared
    return PureFockState.from_arrays(keys, amps, a.rail_count + b.rail_count, a.cutoff, loss)


def inner_product(a: PureFockState, b: PureFockState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    if a.rail_count != b.rail_count:
        raise ValueError(f"rail count mismatch: {a.rail_count} vs {b.rail_count}")
    if a.cutoff != b.cutoff:
        raise ValueError(f"cutoff mismatch: {a.cutoff} vs {b.cutoff}")
    _, ia, ib = np.intersect1d(a.keys, b.keys, assume_unique=True, return_indices=True)
    return complex(np.vdot(a.amps[ia], b.amps[ib]))


def overlap_squared(a: PureFockState, b: PureFockState) -> float:
    return abs(inner_product(a, b)) ** 2


def _check_unitary(U: np.ndarray):
    if U.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {U.shape}")
    if not np.all(np.isfinite(U)):
        raise ValueError("matrix has non-finite entries")
    if np.max(np.abs(U @ U.conj().T - np.eye(2))) > UNITARY_TOL:
        raise ValueError("matrix is not unitary within 1e-12")


@lru_cache(maxsize=256)
def _transfer_table(entries: tuple[complex, ...], cutoff: int) -> np.ndarray:
    """coef[n1, n2, k]: amplitude of |k, n1+n2-k> from |n1, n2> under the substitution
    a1^dag -> U00 a1^dag + U10 a2^dag, a2^dag -> U01 a1^dag + U11 a2^dag."""
    u00, u01, u10, u11 = entries
    table = np.zeros((cutoff + 1, cutoff + 1, 2 * cutoff + 1), dtype=np.complex128)
    fact = [math.factorial(n) for n in range(2 * cutoff + 1)]
    for n1 in range(cutoff + 1):
        for n2 in range(cutoff + 1):
            norm_in = math.sqrt(fact[n1] * fact[n2])
            for j1 in range(n1 + 1):
                c1 = math.comb(n1, j1) * u00 ** j1 * u10 ** (n1 - j1)
                for j2 in range(n2 + 1):
                    c2 = math.comb(n2, j2) * u01 ** j2 * u11 ** (n2 - j2)
                    k = j1 + j2
                    rest = n1 + n2 - k
                    table[n1, n2, k] += c1 * c2 * math.sqrt(fact[k] * fact[rest]) / norm_in
    table.setflags(write=False)
    return table


def transfer_table(U, cutoff: int = DEFAULT_CUTOFF) -> np.ndarray:
    U = np.asarray(U, dtype=np.complex128)
    return _transfer_table(tuple(complex(x) for x in U.ravel()), int(cutoff))


def apply_two_rail_unitary(state: PureFockState, rails, U, backend: str | None = None) -> PureFockState:
    """Bosonic action of a 2x2 unitary on two rails.

    Terms pushed above the cutoff are dropped and their weight is added to the
    result's ``truncation_loss``.
    """
    r1, r2 = (rail_index(r) for r in rails)
    if r1 == r2:
        raise ValueError("two-rail unitary needs distinct rails")
    state._check_rail(r1)
    state._check_rail(r2)
    U = np.asarray(U, dtype=np.complex128)
    _check_unitary(U)
    coef = transfer_table(U, state.cutoff)
    kernel = kernels.get_backend(backend)
    keys, amps = kernel.two_rail_transform(
        np.ascontiguousarray(state.keys), np.ascontiguousarray(state.amps),
        r1 * state.bits, r2 * state.bits, state.bits, state.cutoff, coef)
    out = PureFockState.from_arrays(keys, amps, state.rail_count, state.cutoff)
    lost = max(0.0, state.norm_squared - out.norm_squared)
    if lost < 1e-15 * max(1.0, state.norm_squared):
        lost = 0.0
    return PureFockState(out.keys, out.amps, out.rail_count, out.cutoff,
                         state.truncation_loss + lost)


def permute_rails(state: PureFockState, order: Sequence[int]) -> PureFockState:
    """New rail ``i`` carries old rail ``order[i]``."""
    order = [rail_index(r) for r in order]
    if sorted(order) != list(range(state.rail_count)):
        raise ValueError("order must be a permutation of the register's rails")
    keys = np.zeros_like(state.keys)
    for new, old in enumerate(order):
        keys |= state.counts(old) << (new * state.bits)
    return PureFockState.from_arrays(keys, state.amps, state.rail_count, state.cutoff,
                                     state.truncation_loss)


def apply_rail_swap(state: PureFockState, r1, r2) -> PureFockState:
    a, b = rail_index(r1), rail_index(r2)
    if a == b:
        raise ValueError("rail swap needs distinct rails")
    order = list(range(state.rail_count))
    state._check_rail(a)
    state._check_rail(b)
    order[a], order[b] = b, a
    return permute_rails(state, order)


def apply_diagonal(state: PureFockState, op: DiagonalOperator) -> PureFockState:
    """Multiply each amplitude by ``sqrt(weights[n])``, n the count on ``op.rail``."""
    weights = np.asarray(op.weights, dtype=float)
    if weights.size < state.cutoff + 1:
        raise ValueError(f"diagonal operator needs {state.cutoff + 1} weights")
    n = state.counts(op.rail)
    return state.with_amps(state.amps * np.sqrt(weights[n]))


def split_by_rails(state: PureFockState, rails: Iterable) -> dict[tuple[int, ...], PureFockState]:
    """Group ``state`` by occupation pattern on ``rails``; values live on the remaining rails.

    The parts are unnormalized, so their squared norms are the pattern probabilities.
    """
    traced = sorted({rail_index(r) for r in rails})
    for r in traced:
        state._check_rail(r)
    kept = [r for r in range(state.rail_count) if r not in traced]
    bits = state.bits
    pattern = np.zeros(len(state), dtype=np.int64)
    for j, r in enumerate(traced):
        pattern |= state.counts(r) << (j * bits)
    rest = np.zeros(len(state), dtype=np.int64)
    for j, r in enumerate(kept):
        rest |= state.counts(r) << (j * bits)
    uniq, inverse = np.unique(pattern, return_inverse=True)
    parts = {}
    for g, p in enumerate(uniq.tolist()):
        sel = inverse == g
        parts[unpack(p, len(traced), state.cutoff)] = PureFockState.from_arrays(
            rest[sel], state.amps[sel], len(kept), state.cutoff)
    return parts


def trace_out_rails(ensemble: StateEnsemble, rails: Iterable) -> StateEnsemble:
    """Partial trace: one branch per (parent branch, traced occupation pattern)."""
    rails = list(rails)
    branches = []
    for w, s in ensemble.branches:
        for part in split_by_rails(s, rails).values():
            p = part.norm_squared
            if p > 0:
                branches.append((w * p, part.scaled(1 / math.sqrt(p))))
    return StateEnsemble(tuple(branches))
