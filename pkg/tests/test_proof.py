import dataclasses
import json
from fractions import Fraction

import pytest

from conftest import fixture_text
from dynproof.graphs import complete, cycle, petersen
from dynproof.poly import MalformedInput, Polynomial
from dynproof.proof import (AxiomRef, Factor, ProofStep, ProofTrace, StepRef, parse_proof,
                            render_proof, verify)

FIXTURES = ["cycle7_table2.txt", "petersen.txt", "complete7.txt", "random10.txt"]


def test_cycle7_table2(cycle7_trace):
    assert cycle7_trace.graph == cycle(7)
    assert len(cycle7_trace.steps) == 10
    report = verify(cycle7_trace)
    assert report.ok and report.bound == 3


def test_petersen_supplementary(petersen_trace):
    assert petersen_trace.graph == petersen()
    report = verify(petersen_trace)
    assert report.ok and report.bound == 4
    lams = {lam for _, lam in petersen_trace.combination}
    assert lams <= {Fraction(1, 5), Fraction(2, 5), Fraction(3, 5)}
    # the listing numbers its steps 0..41
    assert len(petersen_trace.steps) == 42


@pytest.mark.parametrize("name", FIXTURES)
def test_render_parse_round_trip(name):
    trace = parse_proof(fixture_text(name))
    assert verify(trace).ok
    assert parse_proof(render_proof(trace)) == trace
    assert ProofTrace.from_json(json.loads(json.dumps(trace.to_json()))) == trace


def test_render_is_table_layout(cycle7_trace):
    text = render_proof(cycle7_trace)
    assert "Proof that 3 - sum(x_i) >= 0:" in text
    assert "[Step 0] 0 <= -x2 - x3 + 1 = (-x3 + 1) * (-x2 + 1)" in text
    assert text.rstrip().endswith("= 3 - sum(x_i)")


def test_negative_lambda_fails(cycle7_trace):
    ref, lam = cycle7_trace.combination[0]
    bad = dataclasses.replace(cycle7_trace, combination=[(ref, -lam)] + cycle7_trace.combination[1:])
    report = verify(bad)
    assert not report.ok and report.check == "nonnegativity"


def test_wrong_bound_fails(cycle7_trace):
    report = verify(dataclasses.replace(cycle7_trace, claimed_bound=Fraction(5, 2)))
    assert not report.ok and report.check == "identity"


def test_tampered_step_fails(cycle7_trace):
    steps = list(cycle7_trace.steps)
    s = steps[3]
    steps[3] = ProofStep(s.poly + Polynomial.var(0), s.parent, s.factor)
    report = verify(dataclasses.replace(cycle7_trace, steps=steps))
    assert not report.ok and report.check == "derivation"


@pytest.mark.parametrize("ref", [StepRef(5), StepRef(-1), AxiomRef(Factor(9, False))])
def test_hostile_references_are_reported(ref):
    trace = ProofTrace(cycle(3), [ProofStep(Polynomial.var(0), ref, Factor(0, False))], [], Fraction(3))
    report = verify(trace)
    assert not report.ok and report.check in ("malformed", "derivation")


def test_complete_graph_fixture():
    trace = parse_proof(fixture_text("complete7.txt"))
    assert trace.graph == complete(7)
    assert verify(trace).bound == 1


def test_malformed_text():
    with pytest.raises(MalformedInput):
        parse_proof("Graph: n=3 edges: 1-2\nnot a proof line\n")
    with pytest.raises(MalformedInput):
        ProofTrace.from_json({"format": "something-else"})
