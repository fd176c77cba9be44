import math

import numpy as np
import pytest

from chaincontrol.formats import (
    FormatError,
    Provenance,
    fmt,
    format_matrix_csv,
    format_plan,
    format_schedules,
    parse_matrix_csv,
    parse_plan,
    parse_schedules,
)
from chaincontrol.pulses import PulseSchedule, PulseSegment
from chaincontrol.symplectic import sp2_exp
from chaincontrol.synthesis import CouplingStep, SynthesisPlan, random_chain_target, synthesize

PROV = Provenance(3, "ab" * 32)


def test_float_format_round_trips():
    for x in (0.1, 1 / 3, -2.5e-300, 1e308, math.pi):
        assert float(fmt(x)) == x


def test_provenance_line():
    assert PROV.line() == f"# tool_version=0.1.0 seed=3 input_sha256={'ab' * 32}"


def test_matrix_round_trip():
    M = np.random.default_rng(0).normal(size=(4, 4))
    text = format_matrix_csv(M, PROV, "test")
    assert text.splitlines()[1].startswith("# test; quadratures interleaved")
    assert np.array_equal(parse_matrix_csv(text), M)


@pytest.mark.parametrize("text,msg", [
    ("1,2\n3\n", ":2: row has 1"),
    ("1,x\n3,4\n", ":1: field 'column 2'"),
    ("1,2,3\n4,5,6\n", "square"),
    ("# only comments\n", "no matrix rows"),
])
def test_matrix_diagnostics(text, msg):
    with pytest.raises(FormatError, match=msg):
        parse_matrix_csv(text, "m.csv")


def test_plan_round_trip_is_exact():
    T = random_chain_target(3, np.random.default_rng(1))
    plan = synthesize(T, seed=2)
    text = format_plan(plan, PROV)
    back, header = parse_plan(text)
    assert header["seed"] == "2" and back.seed == 2
    assert np.array_equal(back.target, plan.target)
    assert [s.site for s in back.steps] == [s.site for s in plan.steps]
    assert all(np.array_equal(a.inner, b.inner) for a, b in zip(back.steps, plan.steps))
    assert format_plan(back, PROV) == text


def test_empty_plan_file():
    plan = SynthesisPlan(3, [], np.eye(4), residual=0.0)
    text = format_plan(plan, PROV)
    assert "steps 0" in text
    assert parse_plan(text)[0].steps == []


def _plan_text():
    plan = SynthesisPlan(3, [CouplingStep(2, sp2_exp(0.1, 0, 0), (0.1, 0.0, 0.0))], np.eye(4), residual=0.0)
    return format_plan(plan, PROV)


@pytest.mark.parametrize("edit,msg", [
    (lambda t: t.replace("chaincontrol-plan 1\n", ""), "not a plan file"),
    (lambda t: t.replace("steps 1", "steps 2"), "announces 2 steps"),
    (lambda t: t.replace("step 1 site 2", "step 1 site 9"), "outside 1..2"),
    (lambda t: t.replace("step 1 site 2", "step 1 site two"), "field 'site'"),
    (lambda t: t.replace("target_row 4 ", "target_row 5 "), "out of order"),
    (lambda t: t + "bogus record here\n", "unrecognized record"),
])
def test_plan_diagnostics(edit, msg):
    with pytest.raises(FormatError, match=msg):
        parse_plan(edit(_plan_text()), "p.txt")


def test_schedule_round_trip():
    seg = PulseSegment(2, 0.0012, 4.0, -0.3, 5 * math.pi)
    scheds = [PulseSchedule(1.0, [seg, PulseSegment(2, 0.008, 0.0, 0.0, 3 * math.pi)]), PulseSchedule(1.0, [])]
    text = format_schedules(scheds, "cd" * 32, PROV)
    back, header = parse_schedules(text)
    assert header["plan_sha256"] == "cd" * 32
    assert [s.segments for s in back] == [s.segments for s in scheds]


def test_schedule_diagnostics():
    with pytest.raises(FormatError, match="before any schedule"):
        parse_schedules("segment site 1 mean_strength 0 modulation_depth 0 modulation_phase 0 duration 1\n")
    with pytest.raises(FormatError, match="outside"):
        parse_schedules("schedule 1 target_step 1 segments 1\n"
                        "segment site 1 mean_strength 0 modulation_depth 0 modulation_phase 9 duration 1\n")
