"""Gate-level verification and parameter sweeps."""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .circuits import CircuitProgram, SourceSettings, build_inputs, load_scheme, run
from .detection import DetectorParams
from .fock import PureFockState, StateEnsemble, overlap_squared
from .sources import TwoQubitAmplitudes, two_qubit_state

_SQ2 = 1 / math.sqrt(2)

I2 = np.eye(2, dtype=np.complex128)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=np.complex128) * _SQ2
S_GATE = np.diag([1, 1j]).astype(np.complex128)
CS = np.diag([1, 1, 1, -1]).astype(np.complex128)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128)
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128)
ISWAP = np.array([[1, 0, 0, 0], [0, 0, 1j, 0], [0, 1j, 0, 0], [0, 0, 0, 1]], dtype=np.complex128)

# success probability of the earlier EPR-ancilla iSWAP construction, in units of eta^4
EPR_ISWAP_BASELINE_FACTOR = 1 / 32


class IdealGate(enum.Enum):
    CS = "cs"
    CNOT = "cnot"
    ISWAP = "iswap"
    SWAP = "swap"
    IDENTITY = "identity"

    @property
    def matrix(self) -> np.ndarray:
        return {"cs": CS, "cnot": CNOT, "iswap": ISWAP, "swap": SWAP,
                "identity": np.eye(4, dtype=np.complex128)}[self.value].copy()

    def target_state(self, alphas, cutoff: int = 2) -> PureFockState:
        a = alphas.as_array() if isinstance(alphas, TwoQubitAmplitudes) else np.asarray(alphas)
        return two_qubit_state(self.matrix @ a, cutoff)


def fidelity(output: StateEnsemble, target: PureFockState) -> float:
    """<target| rho |target> / Tr rho."""
    if not output.branches:
        raise ValueError("empty output ensemble")
    if output.rail_count != target.rail_count:
        raise ValueError(f"register mismatch: {output.rail_count} vs {target.rail_count} rails")
    tn = target.norm_squared
    num = sum(w * overlap_squared(target, s) for w, s in output.branches)
    return float(num / (output.trace * tn))


# ---------------------------------------------------------------- decomposition identities


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    max_error: float


def _check(name, lhs, rhs, tol):
    err = float(np.max(np.abs(lhs - rhs)))
    return CheckResult(name, err <= tol, err)


def verify_decompositions(tol: float = 1e-12, s_gate: np.ndarray | None = None,
                          hadamard: np.ndarray | None = None) -> list[CheckResult]:
    """Gate identities by plain 4x4 algebra; pass a perturbed gate to see a check fail."""
    S = S_GATE if s_gate is None else np.asarray(s_gate, dtype=np.complex128)
    H = HADAMARD if hadamard is None else np.asarray(hadamard, dtype=np.complex128)
    hwp = np.array([[math.cos(math.pi / 4), math.sin(math.pi / 4)],
                    [math.sin(math.pi / 4), -math.cos(math.pi / 4)]], dtype=np.complex128)
    return [
        _check("iswap-decomposition", CS @ np.kron(S, S) @ SWAP, ISWAP, tol),
        _check("cs-cnot-conjugation", np.kron(I2, H) @ CNOT @ np.kron(I2, H), CS, tol),
        _check("hwp-hadamard", hwp, H, tol),
        _check("hadamard-involution", H @ H, I2, tol),
        _check("phase-gate-order", np.linalg.matrix_power(S, 4), I2, tol),
        _check("identity-composition", SWAP @ SWAP, np.eye(4), tol),
    ]


# ---------------------------------------------------------------- random-input fidelity


@dataclass(frozen=True)
class FidelityStats:
    min_fidelity: float
    mean_fidelity: float
    mean_success: float
    samples: int
    seed: int


def gate_fidelity_random(program: CircuitProgram, gate: IdealGate, n_samples: int,
                         det: DetectorParams = DetectorParams(), seed: int = 0,
                         sources: SourceSettings = SourceSettings(), cutoff: int = 2,
                         postselect: str = "all") -> FidelityStats:
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    rng = np.random.default_rng(seed)
    fs, ps = [], []
    for _ in range(n_samples):
        alphas = TwoQubitAmplitudes.random(rng)
        result = run(program, build_inputs(program, alphas, sources, cutoff), det, postselect)
        ps.append(result.success_probability)
        fs.append(fidelity(result.output, gate.target_state(alphas, cutoff)) if result.output.branches else 0.0)
    return FidelityStats(min(fs), float(np.mean(fs)), float(np.mean(ps)), n_samples, seed)


# ---------------------------------------------------------------- sweeps

SWEEP_PARAMS = ("eta", "nu", "gamma2", "scheme")
GATE_OF = {"cs": IdealGate.CS, "cnot": IdealGate.CNOT, "iswap": IdealGate.ISWAP}
PHI_PLUS = np.array([_SQ2, 0, 0, _SQ2], dtype=np.complex128)


@dataclass(frozen=True)
class SweepSpec:
    """One varying parameter over ``grid``; everything else fixed.

    With SPDC sources the input is the pair state, so the ideal output is the gate
    applied to |Phi+>; otherwise ``alphas`` is used, or ``samples`` random inputs.
    """

    param: str
    grid: tuple
    scheme: str = "scheme2-cs"
    det: DetectorParams = DetectorParams()
    sources: SourceSettings = SourceSettings()
    alphas: tuple | None = None
    samples: int = 0
    seed: int = 0
    cutoff: int = 2
    postselect: str = "all"

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(self.grid))
        if self.param not in SWEEP_PARAMS:
            raise ValueError(f"sweep parameter must be one of {SWEEP_PARAMS}, got {self.param!r}")
        if not self.grid:
            raise ValueError("sweep grid is empty")
        for v in self.grid:
            if self.param == "eta" and not 0 <= v <= 1:
                raise ValueError(f"eta={v} outside [0, 1]")
            if self.param == "nu" and v < 0:
                raise ValueError(f"nu={v} is negative")
            if self.param == "gamma2" and not 0 <= v <= 1e-2:
                raise ValueError(f"gamma2={v} outside [0, 1e-2]")
        if self.samples < 0:
            raise ValueError("samples must be non-negative")


@dataclass
class SweepRow:
    param: object
    P: float
    F: float
    trunc_loss: float
    seed: int
    report: list = field(default_factory=list, repr=False)


def evaluate_point(scheme: str, det: DetectorParams, sources: SourceSettings, alphas=None,
                   samples: int = 0, seed: int = 0, cutoff: int = 2, postselect: str = "all"):
    """(P, F, truncation loss, pattern report) for one parameter point."""
    program = load_scheme(scheme)
    gate = GATE_OF.get(program.gate)
    if sources.input_is_spdc or not program.input_modes:
        inputs = [None]
        targets = [PHI_PLUS]
    elif samples:
        rng = np.random.default_rng(seed)
        inputs = [TwoQubitAmplitudes.random(rng) for _ in range(samples)]
        targets = [a.as_array() for a in inputs]
    else:
        a = TwoQubitAmplitudes.from_vector(alphas if alphas is not None else PHI_PLUS)
        inputs, targets = [a], [a.as_array()]
    Ps, Fs, losses, report = [], [], [], []
    for a, target in zip(inputs, targets):
        result = run(program, build_inputs(program, a, sources, cutoff), det, postselect)
        Ps.append(result.success_probability)
        losses.append(result.truncation_loss)
        report = result.per_pattern_report
        if gate is None or not result.output.branches:
            Fs.append(float("nan"))
        else:
            Fs.append(fidelity(result.output, two_qubit_state(gate.matrix @ target, cutoff)))
    return float(np.mean(Ps)), float(np.mean(Fs)), float(np.mean(losses)), report


def _point_args(spec: SweepSpec, value):
    scheme, det, sources = spec.scheme, spec.det, spec.sources
    if spec.param == "eta":
        det = replace(det, eta=float(value))
    elif spec.param == "nu":
        det = DetectorParams.with_nu(det.eta, float(value))
    elif spec.param == "gamma2":
        sources = replace(sources, kind="spdc", gamma2=float(value))
    else:
        scheme = str(value)
    return (scheme, det, sources, spec.alphas, spec.samples, spec.seed, spec.cutoff, spec.postselect)


def _evaluate(args):
    return evaluate_point(*args)


def sweep(spec: SweepSpec, workers: int = 1) -> list[SweepRow]:
    """One row per grid value, in grid order."""
    jobs = [_point_args(spec, v) for v in spec.grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_evaluate, jobs))
    else:
        results = [_evaluate(j) for j in jobs]
    return [SweepRow(v, P, F, loss, spec.seed, report)
            for v, (P, F, loss, report) in zip(spec.grid, results)]


CSV_COLUMNS = ("param", "P", "F", "trunc_loss", "seed")


def rows_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in rows:
        writer.writerow([r.param, repr(r.P), repr(r.F), repr(r.trunc_loss), r.seed])
    return buf.getvalue()


def rows_to_json(rows: Sequence[SweepRow], include_report: bool = True) -> str:
    records = []
    for r in rows:
        rec = {"param": r.param, "P": r.P, "F": r.F, "trunc_loss": r.trunc_loss, "seed": r.seed}
        if include_report:
            rec["per_pattern_report"] = [asdict(p) for p in r.report]
        records.append(rec)
    return json.dumps(records, indent=2, allow_nan=True)


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    lx, ly = np.log(np.asarray(xs, float)), np.log(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])
