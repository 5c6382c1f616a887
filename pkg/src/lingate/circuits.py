"""Post-selected gate programs: element sequences, measure-and-feedforward steps, and a runner.

Programs are plain data and round-trip through a line-oriented text format::

    scheme scheme2-cs
    gate cs
    mode c
    mode t
    input c t
    ancilla epr 1 2
    apply pbs t 3
    apply hwp c theta=0.39269908169872414
    measure cH cV tH tV {
      1 0 1 0 -> accept
      1 0 0 1 -> accept z(2)
      1 1 0 0 -> reject
    }
    output 1 4

Patterns not listed in a ``measure`` block are rejected.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .detection import (
    DetectorParams,
    format_pattern,
    pattern_probabilities,
    project_clicks,
)
from .elements import ANGLE_KINDS, ElementKind, ElementSpec, apply_element, hadamard, rail_swap, s_gate
from .fock import (
    PureFockState,
    StateEnsemble,
    permute_rails,
    split_by_rails,
    tensor,
)
from .sources import (
    SPDCParams,
    chi_state,
    epr_pair,
    ghz_state,
    input_state,
    spdc_pair,
)

POLARIZATIONS = {"H": 0, "V": 1}
ANCILLA_MODES = {"epr": 2, "ghz": 3, "chi": 4}


class SchemeError(ValueError):
    """Malformed scheme program."""


class SchemeParseError(SchemeError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Apply:
    element: ElementSpec


@dataclass(frozen=True)
class FeedforwardRule:
    pattern: tuple[int, ...]
    accept: bool = True
    corrections: tuple[ElementSpec, ...] = ()

    @property
    def is_identity(self) -> bool:
        return self.accept and not self.corrections


@dataclass(frozen=True)
class MeasureFF:
    """Measure ``rails`` (pairs of mode label and "H"/"V") and act on the click pattern."""

    rails: tuple[tuple[str, str], ...]
    rules: tuple[FeedforwardRule, ...]

    def rule_for(self, pattern: tuple[int, ...]) -> FeedforwardRule | None:
        for rule in self.rules:
            if rule.pattern == pattern:
                return rule
        return None

    @property
    def labels(self) -> list[str]:
        return [f"{m}{p}" for m, p in self.rails]


@dataclass(frozen=True)
class AncillaSpec:
    kind: str
    modes: tuple[str, ...]


@dataclass(frozen=True)
class CircuitProgram:
    name: str
    register: tuple[str, ...]
    steps: tuple
    output_modes: tuple[str, ...]
    input_modes: tuple[str, ...] = ()
    ancillas: tuple[AncillaSpec, ...] = ()
    gate: str | None = None

    def __post_init__(self):
        for attr in ("register", "steps", "output_modes", "input_modes", "ancillas"):
            object.__setattr__(self, attr, tuple(getattr(self, attr)))
        self.validate()

    @property
    def mode_index(self) -> dict[str, int]:
        return {m: i for i, m in enumerate(self.register)}

    def rail(self, mode: str, pol: str) -> int:
        return 2 * self.mode_index[mode] + POLARIZATIONS[pol]

    def validate(self):
        if len(set(self.register)) != len(self.register):
            raise SchemeError("duplicate mode in register")
        known = set(self.register)

        def check_modes(modes, what):
            for m in modes:
                if m not in known:
                    raise SchemeError(f"{what} uses unknown mode {m!r}")

        check_modes(self.output_modes, "output")
        check_modes(self.input_modes, "input")
        for anc in self.ancillas:
            if anc.kind not in ANCILLA_MODES:
                raise SchemeError(f"unknown ancilla kind {anc.kind!r}")
            if len(anc.modes) != ANCILLA_MODES[anc.kind]:
                raise SchemeError(f"{anc.kind} ancilla needs {ANCILLA_MODES[anc.kind]} modes")
            check_modes(anc.modes, "ancilla")
        measured: set[tuple[str, str]] = set()
        for step in self.steps:
            if isinstance(step, Apply):
                check_modes(step.element.modes, "element")
                touched = {(m, p) for m in step.element.modes for p in "HV"}
                if touched & measured:
                    raise SchemeError(f"{step.element} acts on an already measured rail")
            elif isinstance(step, MeasureFF):
                check_modes([m for m, _ in step.rails], "measurement")
                if len(set(step.rails)) != len(step.rails):
                    raise SchemeError("rail listed twice in one measurement")
                if set(step.rails) & measured:
                    raise SchemeError("rail measured more than once")
                measured |= set(step.rails)
                seen = set()
                for rule in step.rules:
                    if len(rule.pattern) != len(step.rails):
                        raise SchemeError("rule pattern length differs from measured rails")
                    if any(o not in (0, 1) for o in rule.pattern):
                        raise SchemeError("click patterns are 0/1")
                    if rule.pattern in seen:
                        raise SchemeError(f"pattern {rule.pattern} has two rules")
                    seen.add(rule.pattern)
                    for el in rule.corrections:
                        check_modes(el.modes, "correction")
                        if {(m, p) for m in el.modes for p in "HV"} & measured:
                            raise SchemeError(f"correction {el} acts on a measured rail")
            else:
                raise SchemeError(f"unknown step {step!r}")
        for m in self.output_modes:
            if {(m, "H"), (m, "V")} & measured:
                raise SchemeError(f"output mode {m!r} is measured")

    def measure_steps(self) -> list[MeasureFF]:
        return [s for s in self.steps if isinstance(s, MeasureFF)]


# ---------------------------------------------------------------- text format

_CORRECTION = re.compile(r"(\w+)\(([^)]*)\)")


def _parse_element(kind: str, args: Sequence[str], line: int) -> ElementSpec:
    try:
        kind_enum = ElementKind(kind.lower())
    except ValueError:
        raise SchemeParseError(f"unknown element kind {kind!r}", line) from None
    modes, theta = [], 0.0
    for a in args:
        if a.startswith("theta="):
            try:
                theta = float(a[len("theta="):])
            except ValueError:
                raise SchemeParseError(f"bad angle {a!r}", line) from None
        else:
            modes.append(a)
    if theta != 0.0 and kind_enum not in ANGLE_KINDS:
        raise SchemeParseError(f"{kind} takes no angle", line)
    try:
        return ElementSpec(kind_enum, tuple(modes), theta)
    except ValueError as exc:
        raise SchemeParseError(str(exc), line) from None


def _parse_rule(text: str, line: int) -> FeedforwardRule:
    lhs, sep, rhs = text.partition("->")
    if not sep:
        raise SchemeParseError("rule needs '->'", line)
    bits = lhs.replace(" ", "")
    if not bits or set(bits) - {"0", "1"}:
        raise SchemeParseError(f"bad click pattern {lhs.strip()!r}", line)
    pattern = tuple(int(b) for b in bits)
    action = rhs.strip()
    if action == "reject":
        return FeedforwardRule(pattern, accept=False)
    if not action.startswith("accept"):
        raise SchemeParseError(f"rule action must be accept or reject, got {action!r}", line)
    rest = action[len("accept"):].strip()
    corrections = []
    pos = 0
    for m in _CORRECTION.finditer(rest):
        if rest[pos:m.start()].strip():
            raise SchemeParseError(f"cannot parse correction near {rest[pos:m.start()]!r}", line)
        args = [a.strip() for a in m.group(2).split(",") if a.strip()]
        corrections.append(_parse_element(m.group(1), args, line))
        pos = m.end()
    if rest[pos:].strip():
        raise SchemeParseError(f"cannot parse correction near {rest[pos:]!r}", line)
    return FeedforwardRule(pattern, True, tuple(corrections))


def _parse_rail(token: str, line: int) -> tuple[str, str]:
    if len(token) < 2 or token[-1] not in POLARIZATIONS:
        raise SchemeParseError(f"bad rail {token!r}; expected <mode>H or <mode>V", line)
    return token[:-1], token[-1]


def parse_scheme(text: str) -> CircuitProgram:
    name, gate = "unnamed", None
    register, steps, output, inputs, ancillas = [], [], [], [], []
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        lineno = i + 1
        raw = lines[i].split("#", 1)[0].strip()
        i += 1
        if not raw:
            continue
        head, *args = raw.split()
        if head == "scheme":
            if len(args) != 1:
                raise SchemeParseError("scheme takes one name", lineno)
            name = args[0]
        elif head == "gate":
            if len(args) != 1:
                raise SchemeParseError("gate takes one name", lineno)
            gate = args[0].lower()
        elif head == "mode":
            if len(args) != 1:
                raise SchemeParseError("mode takes one label", lineno)
            register.append(args[0])
        elif head == "input":
            inputs = args
        elif head == "ancilla":
            if len(args) < 2:
                raise SchemeParseError("ancilla needs a kind and modes", lineno)
            ancillas.append(AncillaSpec(args[0].lower(), tuple(args[1:])))
        elif head == "apply":
            if not args:
                raise SchemeParseError("apply needs an element kind", lineno)
            steps.append(Apply(_parse_element(args[0], args[1:], lineno)))
        elif head == "measure":
            body = raw[len("measure"):]
            rails_part, brace, after = body.partition("{")
            if not brace:
                raise SchemeParseError("measure needs a '{' rule block", lineno)
            rails = tuple(_parse_rail(t, lineno) for t in rails_part.split())
            if not rails:
                raise SchemeParseError("measure lists no rails", lineno)
            chunks = [(after, lineno)]
            closed = "}" in after
            while not closed:
                if i >= len(lines):
                    raise SchemeParseError("unterminated measure block", lineno)
                chunks.append((lines[i].split("#", 1)[0], i + 1))
                closed = "}" in chunks[-1][0]
                i += 1
            rules = []
            for chunk, ln in chunks:
                chunk = chunk.split("}", 1)[0]
                for piece in chunk.split(";"):
                    if piece.strip():
                        rules.append(_parse_rule(piece.strip(), ln))
            steps.append(MeasureFF(rails, tuple(rules)))
        elif head == "output":
            output = args
        else:
            raise SchemeParseError(f"unknown directive {head!r}", lineno)
    if not register:
        raise SchemeParseError("no modes declared")
    try:
        return CircuitProgram(name, tuple(register), tuple(steps), tuple(output or register),
                              tuple(inputs), tuple(ancillas), gate)
    except SchemeError as exc:
        raise SchemeParseError(str(exc)) from None


def _format_element(el: ElementSpec) -> str:
    parts = [el.kind.value, *map(str, el.modes)]
    if el.kind in ANGLE_KINDS:
        parts.append(f"theta={el.theta!r}")
    return " ".join(parts)


def format_scheme(program: CircuitProgram) -> str:
    out = [f"scheme {program.name}"]
    if program.gate:
        out.append(f"gate {program.gate}")
    out += [f"mode {m}" for m in program.register]
    if program.input_modes:
        out.append("input " + " ".join(program.input_modes))
    out += [f"ancilla {a.kind} " + " ".join(a.modes) for a in program.ancillas]
    for step in program.steps:
        if isinstance(step, Apply):
            out.append("apply " + _format_element(step.element))
        else:
            out.append("measure " + " ".join(step.labels) + " {")
            for rule in step.rules:
                pat = " ".join(map(str, rule.pattern))
                if not rule.accept:
                    out.append(f"  {pat} -> reject")
                else:
                    corr = " ".join(str(c) for c in rule.corrections)
                    out.append(f"  {pat} -> accept" + (f" {corr}" if corr else ""))
            out.append("}")
    out.append("output " + " ".join(program.output_modes))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- built-in schemes

_BUILTIN_FILES = {
    "scheme2-cs": "scheme2_cs.scheme",
    "scheme1-cnot": "scheme1_cnot.scheme",
    "scheme1-cnot-given-chi": "scheme1_cnot_given_chi.scheme",
    "scheme1-chi": "scheme1_chi.scheme",
}
_DERIVED = {
    "iswap-scheme2": lambda: scheme_iswap(scheme_ii_cs()),
    "iswap-scheme1": lambda: scheme_iswap(scheme_i_cnot()),
    "iswap-scheme1-given-chi": lambda: scheme_iswap(scheme_i_cnot(use_given_chi=True)),
}


def list_schemes() -> list[str]:
    return sorted(_BUILTIN_FILES) + sorted(_DERIVED)


def builtin_scheme_text(name: str) -> str:
    return resources.files("lingate.schemes").joinpath(_BUILTIN_FILES[name]).read_text()


def load_scheme(name_or_path: str | Path) -> CircuitProgram:
    """A built-in scheme by name, or a scheme file by path."""
    key = str(name_or_path)
    if key in _BUILTIN_FILES:
        return parse_scheme(builtin_scheme_text(key))
    if key in _DERIVED:
        return _DERIVED[key]()
    path = Path(name_or_path)
    if not path.is_file():
        raise SchemeError(f"no built-in scheme or file named {key!r}")
    return parse_scheme(path.read_text())


def scheme_ii_cs() -> CircuitProgram:
    return load_scheme("scheme2-cs")


def scheme_i_cnot(use_given_chi: bool = False) -> CircuitProgram:
    return load_scheme("scheme1-cnot-given-chi" if use_given_chi else "scheme1-cnot")


def scheme_i_chi_generation() -> CircuitProgram:
    return load_scheme("scheme1-chi")


def scheme_iswap(inner: CircuitProgram) -> CircuitProgram:
    """iSWAP = CS (S x S) SWAP, with a CNOT inner gate conjugated by Hadamards on the target."""
    if inner.gate not in ("cs", "cnot"):
        raise SchemeError(f"inner program must implement cs or cnot, not {inner.gate!r}")
    if len(inner.input_modes) != 2 or len(inner.output_modes) != 2:
        raise SchemeError("inner program needs two input and two output modes")
    c, t = inner.input_modes
    pre = [Apply(rail_swap(c, t)), Apply(s_gate(c)), Apply(s_gate(t))]
    post = []
    if inner.gate == "cnot":
        pre.append(Apply(hadamard(t)))
        post.append(Apply(hadamard(inner.output_modes[1])))
    return replace(inner, name=f"iswap-{inner.name}", gate="iswap",
                   steps=tuple(pre) + inner.steps + tuple(post))


# ---------------------------------------------------------------- inputs


@dataclass(frozen=True)
class SourceSettings:
    """``kind="spdc"`` replaces the EPR ancillae and the gate input by SPDC pairs."""

    kind: str = "ideal"
    gamma2: float = 1e-4
    double_pairs: bool = False
    spdc_input: bool = True

    def __post_init__(self):
        if self.kind not in ("ideal", "spdc"):
            raise ValueError(f"source kind must be ideal or spdc, got {self.kind!r}")
        if self.kind == "spdc":
            SPDCParams(self.gamma2, self.double_pairs)

    @property
    def spdc(self) -> SPDCParams | None:
        return SPDCParams(self.gamma2, self.double_pairs) if self.kind == "spdc" else None

    @property
    def input_is_spdc(self) -> bool:
        return self.kind == "spdc" and self.spdc_input


def build_inputs(program: CircuitProgram, alphas=None, sources: SourceSettings = SourceSettings(),
                 cutoff: int = 2) -> dict[tuple[str, ...], PureFockState]:
    """Initial states for the program's input and ancilla registers."""
    inputs = {}
    spdc = sources.spdc
    if program.input_modes:
        if sources.input_is_spdc:
            inputs[program.input_modes] = spdc_pair(spdc, cutoff)
        else:
            if alphas is None:
                raise ValueError("program has an input register but no amplitudes were given")
            inputs[program.input_modes] = input_state(alphas, cutoff)
    for anc in program.ancillas:
        if anc.kind == "epr":
            state = spdc_pair(spdc, cutoff) if spdc else epr_pair(cutoff)
        elif anc.kind == "ghz":
            state = ghz_state(cutoff)
        else:
            state = chi_state(cutoff)
        inputs[anc.modes] = state
    return inputs


def assemble(program: CircuitProgram, inputs: Mapping[tuple[str, ...], PureFockState]) -> PureFockState:
    """Tensor the input registers together and order the rails as in the program register."""
    modes: list[str] = []
    state = None
    for group, s in inputs.items():
        group = (group,) if isinstance(group, str) else tuple(group)
        if s.rail_count != 2 * len(group):
            raise ValueError(f"state for modes {group} has {s.rail_count} rails")
        modes += group
        state = s if state is None else tensor(state, s)
    if sorted(modes) != sorted(program.register) or len(set(modes)) != len(modes):
        raise ValueError(f"inputs cover modes {modes}, register is {list(program.register)}")
    pos = {m: i for i, m in enumerate(modes)}
    order = []
    for m in program.register:
        order += [2 * pos[m], 2 * pos[m] + 1]
    return permute_rails(state, order)


# ---------------------------------------------------------------- runner


@dataclass(frozen=True)
class PatternRecord:
    """One enumerated click pattern; ``pattern`` includes the earlier stages' patterns."""

    pattern: str
    probability: float
    accepted: bool
    stage: int = 0


@dataclass
class GateRunResult:
    success_probability: float
    output: StateEnsemble
    per_pattern_report: list[PatternRecord]
    truncation_loss: float
    output_modes: tuple[str, ...] = ()
    accepted_states: list = field(default_factory=list, repr=False)

    def accepted_records(self) -> list[PatternRecord]:
        """Accepted patterns of the last measurement stage; their probabilities sum to P."""
        if not self.per_pattern_report:
            return []
        last = max(r.stage for r in self.per_pattern_report)
        return [r for r in self.per_pattern_report if r.accepted and r.stage == last]


def _rows_allowed(rule: FeedforwardRule | None, postselect: str) -> bool:
    if rule is None or not rule.accept:
        return False
    if postselect == "identity":
        return rule.is_identity
    return True


def run(program: CircuitProgram, inputs, det: DetectorParams | Mapping = DetectorParams(),
        postselect: str = "all", backend: str | None = None) -> GateRunResult:
    """Execute ``program`` exactly, enumerating every click pattern at each measurement.

    ``inputs`` maps mode groups to states (or is one state over the whole
    register). ``det`` is shared by all detectors unless a mapping from rail
    label (e.g. ``"cH"``) to ``DetectorParams`` is given, with key ``"*"`` as
    the default. ``postselect="identity"`` keeps only rules without corrections.
    """
    if postselect not in ("all", "identity"):
        raise ValueError("postselect must be 'all' or 'identity'")
    state = inputs if isinstance(inputs, PureFockState) else assemble(program, inputs)
    if state.rail_count != 2 * len(program.register):
        raise ValueError("input state does not match the program register")
    index = program.mode_index
    lost = state.truncation_loss

    def det_for(labels):
        if isinstance(det, DetectorParams):
            return det
        default = det.get("*", DetectorParams())
        return [det.get(lab, default) for lab in labels]

    def apply(s, el):
        nonlocal lost
        before = s.truncation_loss
        out = apply_element(s, el, index, backend=backend)
        lost += out.truncation_loss - before
        return out

    paths = [(state, "")]
    report: list[PatternRecord] = []
    stage = -1
    for step in program.steps:
        if isinstance(step, Apply):
            paths = [(apply(s, step.element), h) for s, h in paths]
            continue
        stage += 1
        rails = [program.rail(m, p) for m, p in step.rails]
        params = det_for(step.labels)
        k = len(rails)
        next_paths = []
        for s, hist in paths:
            probs = pattern_probabilities(s, rails, params)
            for idx, pattern in enumerate(itertools.product((0, 1), repeat=k)):
                rule = step.rule_for(pattern)
                ok = _rows_allowed(rule, postselect)
                label = format_pattern(step.labels, pattern)
                label = f"{hist} | {label}" if hist else label
                report.append(PatternRecord(label, float(probs[idx]), ok, stage))
                if not ok or probs[idx] <= 0:
                    continue
                branch = project_clicks(s, rails, pattern, params)
                for el in rule.corrections:
                    branch = apply(branch, el)
                next_paths.append((branch, label))
        paths = next_paths
    success = float(sum(s.norm_squared for s, _ in paths))
    output_rails = [program.rail(m, p) for m in program.output_modes for p in "HV"]
    other = [r for r in range(state.rail_count) if r not in output_rails]
    parts = []
    for s, _ in paths:
        ordered = permute_rails(s, output_rails + other)
        parts += split_by_rails(ordered, range(len(output_rails), s.rail_count)).values()
    output = StateEnsemble.from_unnormalized(parts)
    if success > 0:
        output = StateEnsemble(tuple((w / success, b) for w, b in output.branches))
    return GateRunResult(success, output, report, lost, tuple(program.output_modes),
                         [s for s, _ in paths])


def evolve_until_measurement(program: CircuitProgram, state: PureFockState,
                             backend: str | None = None) -> PureFockState:
    """Apply the element steps that precede the first measurement."""
    index = program.mode_index
    for step in program.steps:
        if isinstance(step, MeasureFF):
            break
        state = apply_element(state, step.element, index, backend=backend)
    return state


def classify_branches_scheme_ii(state: PureFockState, program: CircuitProgram | None = None
                                ) -> tuple[float, float, float]:
    """Split the state after the Scheme II multigate into (N_ok^2, N_err1^2, N_err2^2).

    ok: one photon in each of modes c, t, 2, 3. err2: a single occupied rail in
    each of modes c and t, so bucket detectors on c, t cannot reject it, but not
    ok. err1: everything the first post-selection rejects.
    """
    program = program or scheme_ii_cs()
    for m in ("c", "t", "2", "3"):
        if m not in program.mode_index:
            raise SchemeError(f"register lacks mode {m!r}")
    if state.rail_count != 2 * len(program.register):
        raise SchemeError("state does not match the Scheme II register")

    def occ(m):
        return state.counts(program.rail(m, "H")), state.counts(program.rail(m, "V"))

    w = np.abs(state.amps) ** 2
    (cH, cV), (tH, tV) = occ("c"), occ("t")
    ok = np.ones(len(state), dtype=bool)
    for m in ("c", "t", "2", "3"):
        h, v = occ(m)
        ok &= (h + v) == 1
    bucket_ok = ((cH > 0) != (cV > 0)) & ((tH > 0) != (tV > 0))
    err2 = bucket_ok & ~ok
    err1 = ~bucket_ok
    return float(w[ok].sum()), float(w[err1].sum()), float(w[err2].sum())
