import itertools
import math

import numpy as np
import pytest

from lingate.analysis import CNOT, CS, ISWAP, fidelity
from lingate.circuits import (
    Apply,
    CircuitProgram,
    MeasureFF,
    SchemeError,
    SchemeParseError,
    SourceSettings,
    assemble,
    build_inputs,
    classify_branches_scheme_ii,
    evolve_until_measurement,
    format_scheme,
    list_schemes,
    load_scheme,
    parse_scheme,
    run,
    scheme_i_chi_generation,
    scheme_i_cnot,
    scheme_ii_cs,
    scheme_iswap,
)
from lingate.detection import DetectorParams
from lingate.elements import ElementKind, hadamard
from lingate.fock import PureFockState, StateEnsemble, permute_rails, trace_out_rails
from lingate.sources import TwoQubitAmplitudes, two_qubit_state

IDEAL = DetectorParams.ideal()


def accepted_outputs(program, result):
    """Normalized output ensemble of every accepted path, one per pattern."""
    out = [program.rail(m, p) for m in program.output_modes for p in "HV"]
    outs = []
    for s in result.accepted_states:
        other = [r for r in range(s.rail_count) if r not in out]
        ens = StateEnsemble.from_unnormalized([permute_rails(s, out + other)])
        outs.append(trace_out_rails(ens, range(len(out), s.rail_count)).renormalized())
    return outs


def random_alphas(n, seed=0):
    rng = np.random.default_rng(seed)
    return [TwoQubitAmplitudes.random(rng) for _ in range(n)]


# ---------------------------------------------------------------- text format


def test_builtin_names():
    names = list_schemes()
    for want in ("scheme2-cs", "scheme1-cnot", "scheme1-cnot-given-chi", "scheme1-chi", "iswap-scheme2"):
        assert want in names


@pytest.mark.parametrize("name", list_schemes())
def test_format_parse_roundtrip(name):
    program = load_scheme(name)
    text = format_scheme(program)
    again = parse_scheme(text)
    assert again == program
    assert format_scheme(again) == text


def test_scheme_file_from_path(tmp_path):
    path = tmp_path / "one.scheme"
    path.write_text("scheme one\nmode a\ninput a\napply h a\noutput a\n")
    program = load_scheme(path)
    assert program.name == "one"
    assert program.steps == (Apply(hadamard("a")),)


def test_unknown_scheme_name():
    with pytest.raises(SchemeError):
        load_scheme("no-such-scheme")


def test_single_line_rule_block_and_comments():
    text = """
    scheme inline   # trailing comment
    mode a
    mode b
    apply hwp a theta=0.3927
    measure aH aV { 1 0 -> accept z(b); 0 1 -> accept }
    output b
    """
    p = parse_scheme(text)
    m = p.steps[1]
    assert isinstance(m, MeasureFF)
    assert m.rule_for((1, 0)).corrections[0].kind is ElementKind.SIGMA_Z
    assert m.rule_for((0, 1)).is_identity
    assert m.rule_for((1, 1)) is None
    assert p.steps[0].element.theta == pytest.approx(0.3927)


@pytest.mark.parametrize("text,line", [
    ("mode a\napply frob a\n", 2),
    ("mode a\napply h\n", 2),
    ("mode a\nmeasure aH aV\n", 2),
    ("mode a\nmeasure aX { 1 -> accept }\n", 2),
    ("mode a\nmode b\nmeasure aH { 1 -> maybe }\noutput b\n", 3),
    ("mode a\nmode b\nmeasure aH { 2 -> accept }\noutput b\n", 3),
    ("mode a\nmode b\nmeasure aH {\n 1 -> accept\n", 3),
    ("mode a\nfrobnicate\n", 2),
    ("mode a\napply h a theta=1\n", 2),
    ("mode a\nmode b\nmeasure aH { 1 -> accept z(b) junk }\noutput b\n", 3),
])
def test_parse_errors_name_the_line(text, line):
    with pytest.raises(SchemeParseError) as info:
        parse_scheme(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


@pytest.mark.parametrize("text", [
    "",
    "mode a\napply h b\n",
    "mode a\nmode b\nmeasure aH { 1 -> accept }\nmeasure aH { 1 -> accept }\noutput b\n",
    "mode a\nmode b\nmeasure aH { 1 -> accept z(a) }\noutput b\n",
    "mode a\nmode b\nmeasure aH { 1 -> accept }\noutput a\n",
    "mode a\nmode b\nmeasure aH { 1 -> accept; 1 -> reject }\noutput b\n",
])
def test_invalid_programs_rejected(text):
    with pytest.raises(SchemeParseError):
        parse_scheme(text)


def _one_click_per_pair(k_pairs):
    for choice in itertools.product(((1, 0), (0, 1)), repeat=k_pairs):
        yield tuple(b for pair in choice for b in pair)


@pytest.mark.parametrize("name,sizes", [
    ("scheme2-cs", [4, 4]),
    ("scheme1-cnot-given-chi", [16]),
    ("scheme1-chi", [4]),
    ("scheme1-cnot", [4, 16]),
])
def test_feedforward_tables_total(name, sizes):
    program = load_scheme(name)
    steps = program.measure_steps()
    assert [len(s.rules) for s in steps] == sizes
    for step in steps:
        wanted = set(_one_click_per_pair(len(step.rails) // 2))
        patterns = [r.pattern for r in step.rules]
        assert len(set(patterns)) == len(patterns)
        assert set(patterns) == wanted
        assert all(r.accept for r in step.rules)
        # detector pairs are the H and V rails of one mode
        assert [p for _, p in step.rails] == ["H", "V"] * (len(step.rails) // 2)


def test_corrections_are_sigma_z_on_unmeasured_modes():
    for name in ("scheme2-cs", "scheme1-cnot", "scheme1-cnot-given-chi", "scheme1-chi"):
        program = load_scheme(name)
        measured = set()
        for step in program.steps:
            if isinstance(step, MeasureFF):
                measured |= {m for m, _ in step.rails}
                for rule in step.rules:
                    for el in rule.corrections:
                        assert el.kind is ElementKind.SIGMA_Z
                        assert el.modes[0] not in measured


# ---------------------------------------------------------------- runner


def test_empty_program_is_identity():
    program = CircuitProgram("empty", ("c", "t"), (), ("c", "t"), ("c", "t"))
    alphas = random_alphas(1)[0]
    result = run(program, build_inputs(program, alphas), IDEAL)
    assert result.success_probability == pytest.approx(1)
    assert result.output.equals(StateEnsemble.pure(two_qubit_state(alphas.as_array())))


def test_assemble_orders_rails_by_register():
    program = scheme_ii_cs()
    state = assemble(program, build_inputs(program, TwoQubitAmplitudes(1, 0, 0, 0)))
    # c=H, t=H, modes 1..4 carry (|HH>+|VV>)/sqrt2 twice
    assert state.amplitude((1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0)) == pytest.approx(0.5)
    assert state.amplitude((1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 1, 0)) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        assemble(program, {("c", "t"): two_qubit_state([1, 0, 0, 0])})


def test_scheme_ii_ideal(backend):
    program = scheme_ii_cs()
    for alphas in random_alphas(10, seed=1):
        result = run(program, build_inputs(program, alphas), IDEAL, backend=backend)
        assert result.success_probability == pytest.approx(1 / 8, abs=1e-12)
        target = two_qubit_state(CS @ alphas.as_array())
        assert fidelity(result.output, target) == pytest.approx(1, abs=1e-10)


def test_scheme_ii_finite_efficiency():
    program = scheme_ii_cs()
    result = run(program, build_inputs(program, random_alphas(1)[0]), DetectorParams(0.7))
    assert result.success_probability == pytest.approx(0.0300125, abs=1e-12)


def test_report_covers_every_pattern():
    program = scheme_ii_cs()
    # cutoff 3 holds every bunching term, so nothing is truncated
    result = run(program, build_inputs(program, random_alphas(1)[0], cutoff=3), IDEAL)
    assert result.truncation_loss == pytest.approx(0, abs=1e-12)
    first = [r for r in result.per_pattern_report if r.stage == 0]
    assert len(first) == 16
    assert sum(r.probability for r in first) == pytest.approx(1, abs=1e-10)
    assert sum(r.probability for r in result.accepted_records()) == pytest.approx(1 / 8, abs=1e-12)
    assert all(" | " in r.pattern for r in result.per_pattern_report if r.stage == 1)


@pytest.mark.parametrize("name,gate,P", [
    ("scheme2-cs", CS, 1 / 8),
    ("scheme1-cnot-given-chi", CNOT, 1 / 4),
    ("scheme1-cnot", CNOT, 1 / 8),
    ("iswap-scheme2", ISWAP, 1 / 8),
])
def test_every_accepted_pattern_gives_the_gate(name, gate, P):
    program = load_scheme(name)
    for alphas in random_alphas(3, seed=7):
        result = run(program, build_inputs(program, alphas), IDEAL)
        assert result.success_probability == pytest.approx(P, abs=1e-12)
        target = two_qubit_state(gate @ alphas.as_array())
        outs = accepted_outputs(program, result)
        assert len(outs) == len(result.accepted_records())
        for ens in outs:
            assert fidelity(ens, target) == pytest.approx(1, abs=1e-10)


def test_chi_generation():
    program = scheme_i_chi_generation()
    result = run(program, build_inputs(program), IDEAL)
    assert result.success_probability == pytest.approx(0.5, abs=1e-12)
    from lingate.sources import chi_state
    chi = StateEnsemble.pure(chi_state())
    assert result.output.equals(chi, tol=1e-10)


def test_iswap_basis_examples():
    program = load_scheme("iswap-scheme2")
    hh = run(program, build_inputs(program, TwoQubitAmplitudes(1, 0, 0, 0)), IDEAL)
    assert fidelity(hh.output, two_qubit_state([1, 0, 0, 0])) == pytest.approx(1)
    hv = run(program, build_inputs(program, TwoQubitAmplitudes(0, 1, 0, 0)), IDEAL)
    # |HV> -> i|VH>
    assert fidelity(hv.output, two_qubit_state([0, 0, 1j, 0])) == pytest.approx(1)


def test_iswap_wrapper_rejects_other_gates():
    with pytest.raises(SchemeError):
        scheme_iswap(scheme_i_chi_generation())


def test_identity_postselection_keeps_correction_free_rows():
    program = scheme_ii_cs()
    alphas = random_alphas(1)[0]
    result = run(program, build_inputs(program, alphas), IDEAL, postselect="identity")
    # 2 of the 16 accepted row pairs carry no correction, each with probability 1/128
    assert result.success_probability == pytest.approx(1 / 64, abs=1e-12)
    assert fidelity(result.output, two_qubit_state(CS @ alphas.as_array())) == pytest.approx(1)


def test_per_detector_params_by_label():
    program = scheme_ii_cs()
    det = {"*": IDEAL, "cH": DetectorParams(0.5)}
    result = run(program, build_inputs(program, random_alphas(1)[0]), det)
    # cH clicks in half the accepted first-stage rows, on average
    assert 1 / 16 < result.success_probability < 1 / 8


def test_run_rejects_bad_postselect():
    program = scheme_ii_cs()
    with pytest.raises(ValueError):
        run(program, build_inputs(program, random_alphas(1)[0]), IDEAL, postselect="some")


# ---------------------------------------------------------------- branch norms


def _branches(alphas):
    program = scheme_ii_cs()
    state = assemble(program, build_inputs(program, alphas, cutoff=3))
    return classify_branches_scheme_ii(evolve_until_measurement(program, state), program)


def test_branch_norm_examples():
    ok, err1, err2 = _branches(TwoQubitAmplitudes(1, 0, 0, 0))
    assert ok == pytest.approx(1 / 8, abs=1e-12)
    assert err1 == pytest.approx(14 / 16, abs=1e-12)
    ok, err1, err2 = _branches(TwoQubitAmplitudes(0, 1, 0, 0))
    assert err2 == pytest.approx(1 / 16, abs=1e-12)


def test_branch_norms_random():
    for a in random_alphas(10, seed=5):
        ok, err1, err2 = _branches(a)
        p = np.abs(a.as_array()) ** 2
        assert ok == pytest.approx(1 / 8, abs=1e-10)
        assert err1 == pytest.approx((8 * p[0] + 7 * p[1] + 6) / 16, abs=1e-10)
        assert err2 == pytest.approx(p[1] / 16 + (p[2] + p[3]) / 2, abs=1e-10)
        assert ok + err1 + err2 == pytest.approx(1, abs=1e-10)


def test_classifier_needs_scheme_ii_register():
    with pytest.raises(SchemeError):
        classify_branches_scheme_ii(PureFockState.vacuum(4), scheme_i_chi_generation())


# ---------------------------------------------------------------- sources in runs


def test_spdc_run_truncation_small():
    program = scheme_ii_cs()
    sources = SourceSettings("spdc", 1e-4)
    result = run(program, build_inputs(program, None, sources), DetectorParams(0.7, 100, 1e-8),
                 postselect="identity")
    assert 0 <= result.truncation_loss <= 1e-6
    assert result.success_probability > 0


def test_scheme_i_accepted_weight_of_final_stage():
    program = scheme_i_cnot(use_given_chi=True)
    result = run(program, build_inputs(program, random_alphas(1)[0]), IDEAL)
    accepted = sum(r.probability for r in result.accepted_records())
    rejected = sum(r.probability for r in result.per_pattern_report if not r.accepted)
    assert accepted == pytest.approx(1 / 4, abs=1e-10)
    assert rejected == pytest.approx(3 / 4, abs=1e-10)
    assert math.isclose(accepted + rejected, 1, abs_tol=1e-10)
