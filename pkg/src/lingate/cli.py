"""Command-line front end: ``lingate run|sweep|verify|list-schemes``.

Configuration comes from an optional YAML/JSON file with flat dotted keys
(``detector.eta: 0.7``); nested mappings are flattened. Command-line flags
override file values. Without flags the detector and source settings are the
realistic ones (eta 0.7, 100 dark counts/s, 10 ns window, SPDC pairs with
gamma^2 = 1e-4, identity-correction rows only); ``--ideal`` switches to perfect
sources and detectors with every feedforward row accepted.

Exit codes: 0 success, 1 failed verification, 2 configuration error,
3 scheme parse error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np
import yaml

from . import analysis
from .circuits import SchemeError, SchemeParseError, SourceSettings, list_schemes, load_scheme
from .detection import DetectorParams
from .sources import TwoQubitAmplitudes

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_PARSE = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


@dataclass(frozen=True)
class RunConfig:
    scheme: str = "scheme2-cs"
    eta: float = 0.7
    rdark: float = 100.0
    tres: float = 1e-8
    source_kind: str = "spdc"
    gamma2: float = 1e-4
    double_pairs: bool = False
    alphas: tuple | None = None
    samples: int = 0
    cutoff: int = 2
    seed: int = 0
    postselect: str = "identity"
    format: str = "text"

    @property
    def detector(self) -> DetectorParams:
        return DetectorParams(self.eta, self.rdark, self.tres)

    @property
    def sources(self) -> SourceSettings:
        return SourceSettings(self.source_kind, self.gamma2, self.double_pairs)

    def to_flat(self) -> dict:
        """Dotted-key mapping; ``from_flat(to_flat())`` returns an equal config."""
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "alphas" and v is not None:
                v = [[float(complex(a).real), float(complex(a).imag)] for a in v]
            out[_FIELD_TO_KEY[f.name]] = v
        return out

    @classmethod
    def from_flat(cls, flat: dict, base: "RunConfig | None" = None) -> "RunConfig":
        cfg = base or cls()
        updates = {}
        for key, value in flat.items():
            if key not in CONFIG_KEYS:
                raise ConfigError(key, f"unknown key (known: {', '.join(sorted(CONFIG_KEYS))})")
            name, conv = CONFIG_KEYS[key]
            try:
                updates[name] = conv(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(key, f"bad value {value!r}: {exc}") from None
        cfg = replace(cfg, **updates)
        cfg.check()
        return cfg

    def check(self):
        def bad(key, msg):
            raise ConfigError(key, msg)

        if not 0 <= self.eta <= 1:
            bad("detector.eta", f"{self.eta} outside [0, 1]")
        if self.rdark < 0:
            bad("detector.rdark", "must be non-negative")
        if self.tres < 0:
            bad("detector.tres", "must be non-negative")
        if self.source_kind not in ("ideal", "spdc"):
            bad("source.kind", "must be ideal or spdc")
        if not 0 <= self.gamma2 <= 1e-2:
            bad("source.gamma2", f"{self.gamma2} outside [0, 1e-2]")
        if self.cutoff < 1:
            bad("cutoff", "must be at least 1")
        if self.samples < 0:
            bad("input.samples", "must be non-negative")
        if self.postselect not in ("all", "identity"):
            bad("postselect", "must be all or identity")
        if self.format not in ("text", "csv", "json"):
            bad("format", "must be text, csv or json")
        if self.alphas is not None:
            try:
                TwoQubitAmplitudes.from_vector(self.alphas)
            except ValueError as exc:
                bad("input.alphas", str(exc))


def _to_bool(v):
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ("true", "false", "yes", "no", "1", "0"):
        return v.lower() in ("true", "yes", "1")
    raise ValueError("expected a boolean")


def _to_int(v):
    if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
        raise ValueError("expected an integer")
    return int(v)


def _to_float(v):
    if isinstance(v, bool):
        raise ValueError("expected a number")
    x = float(v)
    if not math.isfinite(x):
        raise ValueError("must be finite")
    return x


def _to_alphas(v):
    """Four amplitudes, each a [re, im] pair, a number, or a string like ``"0.5+0.5j"``."""
    if v is None:
        return None
    v = list(v)
    if len(v) != 4:
        raise ValueError("need four amplitudes")
    out = []
    for a in v:
        if isinstance(a, (list, tuple)):
            if len(a) != 2:
                raise ValueError("complex pair must be [re, im]")
            out.append(complex(_to_float(a[0]), _to_float(a[1])))
        elif isinstance(a, str):
            out.append(complex(a.replace(" ", "")))
        else:
            out.append(complex(_to_float(a)))
    return tuple(out)


CONFIG_KEYS = {
    "scheme": ("scheme", str),
    "detector.eta": ("eta", _to_float),
    "detector.rdark": ("rdark", _to_float),
    "detector.tres": ("tres", _to_float),
    "source.kind": ("source_kind", str),
    "source.gamma2": ("gamma2", _to_float),
    "source.double_pairs": ("double_pairs", _to_bool),
    "input.alphas": ("alphas", _to_alphas),
    "input.samples": ("samples", _to_int),
    "cutoff": ("cutoff", _to_int),
    "seed": ("seed", _to_int),
    "postselect": ("postselect", str),
    "format": ("format", str),
}
_FIELD_TO_KEY = {name: key for key, (name, _) in CONFIG_KEYS.items()}
SWEEP_KEYS = {"sweep.param", "sweep.grid"}


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def load_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"{path} is not valid YAML/JSON: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("<file>", f"{path} must hold a mapping of keys to values")
    return _flatten(data)


# ---------------------------------------------------------------- argument parsing


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="YAML or JSON file with dotted keys")
    p.add_argument("--scheme", help="built-in scheme name or path to a .scheme file")
    p.add_argument("--given-chi", action="store_true",
                   help="with scheme1-cnot: start from a prepared chi state")
    p.add_argument("--ideal", action="store_true",
                   help="perfect sources and detectors, every feedforward row accepted")
    p.add_argument("--eta", type=float)
    p.add_argument("--rdark", type=float, help="dark-count rate in 1/s")
    p.add_argument("--tres", type=float, help="resolution time in s")
    p.add_argument("--source", choices=("ideal", "spdc"))
    p.add_argument("--gamma2", type=float)
    p.add_argument("--double-pairs", action="store_true", default=None)
    p.add_argument("--alphas", type=float, nargs=8, metavar="X",
                   help="re im pairs of the |HH>, |HV>, |VH>, |VV> amplitudes")
    p.add_argument("--samples", type=int, help="number of random inputs")
    p.add_argument("--cutoff", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--postselect", choices=("all", "identity"))
    p.add_argument("--format", choices=("text", "csv", "json"))
    p.add_argument("--out", help="write results here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lingate", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scheme and report P, F and the pattern table")
    _common(p_run)
    p_run.add_argument("--dump", action="store_true", help="print the accepted output branches")
    p_run.add_argument("--print-config", action="store_true",
                       help="print the effective config as YAML and exit")

    p_sweep = sub.add_parser("sweep", help="vary one parameter and emit CSV or JSON rows")
    _common(p_sweep)
    p_sweep.add_argument("--param", choices=analysis.SWEEP_PARAMS)
    p_sweep.add_argument("--grid", help="start:stop:step (inclusive) or a comma list")
    p_sweep.add_argument("--workers", type=int, default=1)

    p_verify = sub.add_parser("verify", help="gate identities and invariant quick checks")
    p_verify.add_argument("--inject-fault", choices=("s-gate", "hadamard"), help=argparse.SUPPRESS)

    sub.add_parser("list-schemes", help="print built-in scheme names")
    return parser


def _overrides(args) -> dict:
    out = {}
    pairs = {
        "scheme": "scheme", "eta": "detector.eta", "rdark": "detector.rdark",
        "tres": "detector.tres", "source": "source.kind", "gamma2": "source.gamma2",
        "double_pairs": "source.double_pairs", "samples": "input.samples", "cutoff": "cutoff",
        "seed": "seed", "postselect": "postselect", "format": "format",
    }
    if args.ideal:
        out.update({"detector.rdark": 0.0, "detector.tres": 0.0, "detector.eta": 1.0,
                    "source.kind": "ideal", "postselect": "all"})
    for attr, key in pairs.items():
        v = getattr(args, attr, None)
        if v is not None:
            out[key] = v
    if args.alphas is not None:
        a = args.alphas
        out["input.alphas"] = [[a[2 * i], a[2 * i + 1]] for i in range(4)]
    return out


def resolve_config(args) -> tuple[RunConfig, dict]:
    """Effective run config plus any sweep.* keys from the file."""
    flat = load_config_file(args.config) if args.config else {}
    sweep_keys = {k: flat.pop(k) for k in list(flat) if k in SWEEP_KEYS}
    flat.update(_overrides(args))
    cfg = RunConfig.from_flat(flat)
    if args.given_chi:
        if cfg.scheme not in ("scheme1-cnot", "scheme1-cnot-given-chi"):
            raise ConfigError("scheme", "--given-chi applies to scheme1-cnot only")
        cfg = replace(cfg, scheme="scheme1-cnot-given-chi")
    return cfg, sweep_keys


def parse_grid(text: str, param: str) -> tuple:
    text = str(text).strip()
    if not text:
        return ()
    if param == "scheme":
        return tuple(s.strip() for s in text.split(",") if s.strip())
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError("range grid must be start:stop:step")
        start, stop, step = (float(x) for x in parts)
        if step <= 0:
            raise ValueError("grid step must be positive")
        if stop < start:
            return ()
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(n))
    return tuple(float(x) for x in text.split(",") if x.strip())


# ---------------------------------------------------------------- output


def _header(cfg: RunConfig) -> str:
    src = f"source=spdc gamma2={cfg.gamma2!r}" if cfg.source_kind == "spdc" else "source=ideal"
    if cfg.double_pairs and cfg.source_kind == "spdc":
        src += " double_pairs=true"
    return (f"# scheme={cfg.scheme} eta={cfg.eta!r} rdark={cfg.rdark!r}/s tres={cfg.tres!r}s "
            f"nu={cfg.detector.nu!r} {src} cutoff={cfg.cutoff} postselect={cfg.postselect} "
            f"seed={cfg.seed}")


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _alphas_for(cfg: RunConfig):
    return None if cfg.alphas is None else np.asarray(cfg.alphas)


# ---------------------------------------------------------------- commands


def cmd_run(args) -> int:
    cfg, _ = resolve_config(args)
    if args.print_config:
        _emit(yaml.safe_dump(cfg.to_flat(), sort_keys=True), args.out)
        return EXIT_OK
    program = load_scheme(cfg.scheme)
    P, F, loss, report = analysis.evaluate_point(
        cfg.scheme, cfg.detector, cfg.sources, _alphas_for(cfg), cfg.samples, cfg.seed,
        cfg.cutoff, cfg.postselect)
    fmt = cfg.format
    if fmt == "json":
        record = {"scheme": cfg.scheme, "gate": program.gate, "nu": cfg.detector.nu,
                  "config": cfg.to_flat(), "P": P, "F": F, "trunc_loss": loss, "seed": cfg.seed,
                  "per_pattern_report": [asdict(r) for r in report]}
        _emit(json.dumps(record, indent=2) + "\n", args.out)
        return EXIT_OK
    if fmt == "csv":
        row = analysis.SweepRow(cfg.scheme, P, F, loss, cfg.seed)
        _emit(analysis.rows_to_csv([row]), args.out)
        return EXIT_OK
    lines = [_header(cfg), f"P = {P!r}", f"F = {F!r}", f"trunc_loss = {loss!r}"]
    if cfg.samples:
        lines.append(f"# averaged over {cfg.samples} random inputs; pattern table of the last one")
    lines.append("pattern,probability,accepted,stage")
    for r in report:
        lines.append(f"{r.pattern},{r.probability!r},{int(r.accepted)},{r.stage}")
    if args.dump:
        lines += _dump_output(cfg, program)
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def _dump_output(cfg: RunConfig, program) -> list[str]:
    from .circuits import build_inputs, run

    alphas = _alphas_for(cfg)
    if alphas is None and program.input_modes and not cfg.sources.input_is_spdc:
        alphas = analysis.PHI_PLUS
    result = run(program, build_inputs(program, alphas, cfg.sources, cfg.cutoff),
                 cfg.detector, cfg.postselect)
    lines = [f"# output modes {' '.join(result.output_modes)}"]
    for w, branch in result.output.branches:
        lines.append(f"# branch weight {w!r}")
        lines += branch.dump().splitlines()
    return lines


def cmd_sweep(args) -> int:
    cfg, sweep_keys = resolve_config(args)
    param = args.param or sweep_keys.get("sweep.param")
    if param is None:
        raise ConfigError("sweep.param", "no sweep parameter given")
    if param not in analysis.SWEEP_PARAMS:
        raise ConfigError("sweep.param", f"must be one of {analysis.SWEEP_PARAMS}")
    grid_text = args.grid if args.grid is not None else sweep_keys.get("sweep.grid")
    if grid_text is None:
        raise ConfigError("sweep.grid", "no grid given")
    try:
        grid = (tuple(grid_text) if isinstance(grid_text, (list, tuple))
                else parse_grid(grid_text, param))
    except ValueError as exc:
        raise ConfigError("sweep.grid", str(exc)) from None
    if not grid:
        raise ConfigError("sweep.grid", "grid is empty")
    if param == "scheme":
        for name in grid:
            load_scheme(name)
    else:
        load_scheme(cfg.scheme)
    try:
        spec = analysis.SweepSpec(param, grid, cfg.scheme, cfg.detector, cfg.sources,
                                  cfg.alphas, cfg.samples, cfg.seed, cfg.cutoff, cfg.postselect)
    except ValueError as exc:
        raise ConfigError("sweep.grid", str(exc)) from None
    print(_header(cfg), file=sys.stderr)
    rows = analysis.sweep(spec, workers=max(1, args.workers))
    if cfg.format == "json":
        _emit(analysis.rows_to_json(rows) + "\n", args.out)
    else:
        _emit(analysis.rows_to_csv(rows), args.out)
    return EXIT_OK


def quick_suite() -> list[analysis.CheckResult]:
    """Invariant checks on the simulator itself: POVM completeness and element unitarity."""
    from .elements import ElementKind, ElementSpec, matrix_of
    from .fock import PureFockState, apply_two_rail_unitary
    from .kernels import BACKENDS

    out = []
    err = 0.0
    for eta in (0.0, 0.3, 0.7, 1.0):
        for nu in (0.0, 1e-6, 0.5):
            p = DetectorParams.with_nu(eta, nu)
            w0 = p.no_click_weights(4)
            err = max(err, float(np.max(np.abs(w0 + (1 - w0) - 1))), float(max(0, -w0.min())))
    out.append(analysis.CheckResult("povm-completeness", err <= 1e-12, err))

    err = 0.0
    for kind in ElementKind:
        if kind in (ElementKind.PBS, ElementKind.RAIL_SWAP):
            continue
        for theta in (0.0, 0.3, math.pi / 8):
            U = matrix_of(ElementSpec(kind, (0,), theta))
            err = max(err, float(np.max(np.abs(U.conj().T @ U - np.eye(2)))))
    out.append(analysis.CheckResult("element-unitarity", err <= 1e-12, err))

    rng = np.random.default_rng(7)
    amps = {}
    for _ in range(12):
        key = tuple(int(x) for x in rng.integers(0, 2, size=4))
        amps[key] = complex(rng.normal(), rng.normal())
    state = PureFockState.from_amplitudes(amps, cutoff=2).normalized()
    U = matrix_of(ElementSpec(ElementKind.HWP, (0,), 0.37))
    results = {name: apply_two_rail_unitary(state, (0, 1), U, backend=name) for name in BACKENDS}
    err = max(abs(s.norm_squared + s.truncation_loss - 1) for s in results.values())
    out.append(analysis.CheckResult("norm-bookkeeping", err <= 1e-12, err))
    if len(results) > 1:
        a, b = results["compiled"], results["python"]
        same = np.array_equal(a.keys, b.keys)
        err = float(np.max(np.abs(a.amps - b.amps))) if same else float("inf")
        out.append(analysis.CheckResult("backend-agreement", err <= 1e-12, err))
    return out


def cmd_verify(args) -> int:
    kwargs = {}
    if args.inject_fault == "s-gate":
        kwargs["s_gate"] = np.diag([1, np.exp(1j * (math.pi / 2 + 1e-3))])
    elif args.inject_fault == "hadamard":
        kwargs["hadamard"] = analysis.HADAMARD @ np.diag([1, np.exp(1e-3j)])
    checks = analysis.verify_decompositions(**kwargs) + quick_suite()
    failed = [c for c in checks if not c.passed]
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} max_error={c.max_error:.3e}")
    if failed:
        print("verification failed: " + ", ".join(c.name for c in failed), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


def cmd_list_schemes(args) -> int:
    for name in list_schemes():
        print(name)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify, "list-schemes": cmd_list_schemes}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code = COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"lingate: config error: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    except SchemeParseError as exc:
        print(f"lingate: scheme parse error: {exc}", file=sys.stderr)
        code = EXIT_PARSE
    except SchemeError as exc:
        # unknown scheme name or missing file
        print(f"lingate: config error: scheme: {exc}", file=sys.stderr)
        code = EXIT_CONFIG
    if argv is None:
        raise SystemExit(code)
    return code
