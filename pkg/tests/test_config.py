import dataclasses

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cavseq.config import (ArrivalModel, Geometry, Lane, OutputSpec, PolicySpec, Relation, Scenario, ScenarioError,
                           VehicleLimits, errors, load_scenario, load_scenario_file, render_scenario, validate)
from cavseq.trajectory import FuelCoefficients

BASELINE = """
geometry:
  mz_side: 30
  lanes:
    - {name: E2W, road: EW, direction: W, length: 400}
    - {name: W2E, road: EW, direction: E, length: 400}
    - {name: N2S, road: NS, direction: S, length: 300}
    - {name: S2N, road: NS, direction: N, length: 300}
limits: {v_min: 4, v_max: 16, u_min: -5, u_max: 2}
arrivals:
  rates: [0.4, 0.4, 0.4, 0.4]
  speed_range: [8, 12]
"""


def test_baseline_document_fields():
    s = load_scenario(BASELINE)
    assert s.geometry.segment_lengths == (400.0, 400.0, 300.0, 300.0)
    assert s.geometry.mz_side == 30.0
    assert s.arrivals.rates == (0.4,) * 4
    assert s.arrivals.speed_range == (8.0, 12.0)
    lim = s.limits
    assert (lim.v_min, lim.v_max, lim.u_min, lim.u_max) == (4.0, 16.0, -5.0, 2.0)


def test_omitted_energy_weight_defaults_to_one():
    assert load_scenario(BASELINE).limits.energy_weight == 1.0


def test_defaults_applied():
    s = load_scenario(BASELINE)
    assert s.limits.delta == 10.0 and s.limits.vehicle_length == 5.0
    assert s.arrivals.service_rate == 0.8
    assert s.policy == PolicySpec()


def test_bundled_baseline_matches_defaults(tmp_path):
    from importlib.resources import files
    text = (files("cavseq") / "scenarios" / "baseline.yaml").read_text()
    assert load_scenario(text) == Scenario().with_policy(PolicySpec.from_case(4))


def test_vmin_above_vmax_names_vmin():
    with pytest.raises(ScenarioError) as exc:
        load_scenario(BASELINE.replace("v_min: 4", "v_min: 20"))
    assert exc.value.field == "limits.v_min"
    assert "v_min" in str(exc.value)


def test_every_violation_is_listed():
    doc = BASELINE.replace("v_min: 4", "v_min: 20").replace("u_max: 2", "u_max: -1")
    doc += "  seed: 1\n"
    doc = doc.replace("limits: {", "limits: {delta: 0, ")
    with pytest.raises(ScenarioError) as exc:
        load_scenario(doc)
    fields = {v.field for v in exc.value.violations}
    assert {"limits.v_min", "limits.u_max", "limits.delta"} <= fields


def test_unknown_key_reports_line_and_field():
    doc = BASELINE + "policy:\n  resequence: true\n"
    with pytest.raises(ScenarioError) as exc:
        load_scenario(doc)
    assert exc.value.field == "policy.resequence"
    assert exc.value.line == doc.splitlines().index("  resequence: true") + 1


def test_wrong_type_reports_line():
    doc = BASELINE.replace("u_max: 2", "u_max: fast")
    with pytest.raises(ScenarioError) as exc:
        load_scenario(doc)
    assert exc.value.field == "limits.u_max"
    assert exc.value.line == 9


def test_malformed_yaml_reports_line():
    with pytest.raises(ScenarioError) as exc:
        load_scenario("limits: {v_min: 4\narrivals: [\n")
    assert exc.value.line is not None


def test_bad_case_number():
    with pytest.raises(ScenarioError) as exc:
        load_scenario(BASELINE + "policy: {case: 11}\n")
    assert exc.value.field == "policy.case"


def test_case_overrides_apply():
    s = load_scenario(BASELINE + "policy: {case: 5, rho: 2.5}\n")
    assert s.policy == PolicySpec.from_case(5, rho=2.5)
    assert s.policy.case_number() == 5


def test_file_loader(tmp_path):
    p = tmp_path / "s.yaml"
    p.write_text(BASELINE)
    assert load_scenario_file(p) == load_scenario(BASELINE)


# ------------------------------------------------------------ validation

def test_baseline_validates_clean():
    assert validate(Scenario()) == []


def test_stability_warning_for_heavy_traffic():
    s = Scenario().replace(arrivals=ArrivalModel(rates=(1.0,) * 4))
    found = validate(s)
    assert [v.severity for v in found] == ["warning"]
    assert found[0].field == "arrivals.rates"
    assert errors(s) == []


def test_stability_boundary_is_not_a_warning():
    s = Scenario().replace(arrivals=ArrivalModel(rates=(0.1, 0.2, 0.6, 0.7)))
    assert validate(s) == []


def test_zero_delta_is_a_violation():
    s = Scenario().replace(limits=VehicleLimits(delta=0.0))
    assert [v.field for v in validate(s)] == ["limits.delta"]


def test_speed_range_outside_limits():
    s = Scenario().replace(arrivals=ArrivalModel(speed_range=(2.0, 12.0)))
    assert "arrivals.speed_range" in {v.field for v in validate(s)}


def test_segment_shorter_than_zone():
    g = Geometry.canonical(lengths=(400, 20, 300, 300))
    assert "geometry.lanes[1].length" in {v.field for v in validate(Scenario(geometry=g))}


def test_asymmetric_table_rejected():
    lanes = Geometry.canonical().lanes
    table = [list(r) for r in Geometry.canonical().conflict_table]
    table[0][2] = Relation.SAME_ROAD
    g = Geometry((400, 400, 300, 300), 30.0, lanes, table)
    assert any("conflict_table" in v.field for v in validate(Scenario(geometry=g)))


def test_rho_formulation_needs_positive_rho():
    s = Scenario(policy=PolicySpec.from_case(5, rho=0.0))
    assert "policy.rho" in {v.field for v in validate(s)}


def test_negative_sigma_rejected():
    assert "policy.sigma" in {v.field for v in validate(Scenario(policy=PolicySpec(sigma=-1.0)))}


def test_negative_fuel_rate_warns():
    o = OutputSpec(fuel=FuelCoefficients(cruise=(-1.0, 0.0, 0.0, 0.0)))
    found = validate(Scenario(output=o))
    assert [(v.field, v.severity) for v in found] == [("output.fuel", "warning")]


# ------------------------------------------------------------ geometry

def test_canonical_relations():
    g = Geometry.canonical()
    R = g.conflict_table
    assert R[0][0] == Relation.SAME_LANE
    assert R[0][1] == Relation.OPPOSITE
    assert R[0][2] == R[2][1] == Relation.CONFLICT
    assert R[2][3] == Relation.OPPOSITE


def test_multi_lane_same_direction():
    lanes = (Lane("a0", "EW", "E", 0), Lane("a1", "EW", "E", 1), Lane("b", "NS", "N"))
    g = Geometry((300, 300, 300), 30.0, lanes)
    assert g.conflict_table[0][1] == Relation.SAME_ROAD
    assert g.conflict_table[0][2] == Relation.CONFLICT
    assert g.lane_index("b") == 2
    with pytest.raises(KeyError):
        g.lane_index("c")


def test_custom_table_round_trips():
    lanes = (Lane("a", "r", "x"), Lane("b", "q", "y"))
    table = ((Relation.SAME_LANE, Relation.OPPOSITE), (Relation.OPPOSITE, Relation.SAME_LANE))
    s = Scenario(geometry=Geometry((200, 250), 30.0, lanes, table),
                 arrivals=ArrivalModel(rates=(0.2, 0.3)))
    assert validate(s) == []
    assert load_scenario(render_scenario(s)) == s


def test_cases_map_to_formulations():
    assert [PolicySpec.from_case(c).case_number() for c in range(1, 11)] == list(range(1, 11))
    assert not PolicySpec.from_case(3).resequencing
    assert PolicySpec.from_case(9).sigma == 10.0
    assert PolicySpec(formulation="sigma", sigma=0.5).case_number() is None
    with pytest.raises(ValueError):
        PolicySpec.from_case(0)


# ------------------------------------------------------------ properties

pos = st.floats(0.05, 2.0)


@st.composite
def scenarios(draw):
    v_min = draw(st.floats(0, 10))
    v_max = v_min + draw(st.floats(0.5, 20))
    lo = draw(st.floats(v_min, v_max))
    hi = draw(st.floats(lo, v_max))
    n = draw(st.integers(1, 6))
    mz = draw(st.floats(5, 50))
    lengths = tuple(mz + draw(st.floats(1, 500)) for _ in range(n))
    lanes = tuple(Lane(f"L{i}", draw(st.sampled_from("AB")), draw(st.sampled_from("+-")), i) for i in range(n))
    limits = VehicleLimits(v_min, v_max, -draw(st.floats(0.5, 8)), draw(st.floats(0.5, 5)),
                           delta=draw(st.floats(0.5, 30)), vehicle_length=draw(st.floats(1, 10)),
                           energy_weight=draw(st.floats(0.1, 3)))
    vehicles = draw(st.one_of(st.none(), st.integers(1, 500)))
    end = draw(st.floats(1, 1e4)) if vehicles is None else draw(st.one_of(st.none(), st.floats(1, 1e4)))
    arrivals = ArrivalModel(tuple(draw(pos) for _ in range(n)), (lo, hi), vehicles, end,
                            draw(st.integers(0, 2 ** 31)), draw(st.floats(0.1, 3)))
    policy = PolicySpec(draw(st.booleans()), draw(st.sampled_from(["cruise", "rho", "force_tc", "sigma",
                                                                   "force_vmax"])),
                        draw(st.floats(0.01, 50)), draw(st.floats(0, 50)), repair=draw(st.booleans()))
    output = OutputSpec(draw(st.floats(0.01, 5)), draw(st.floats(1e-3, 0.1)))
    return Scenario(Geometry(lengths, mz, lanes), limits, arrivals, policy, output)


@given(scenarios())
def test_round_trip(s):
    assert errors(s) == []
    assert load_scenario(render_scenario(s)) == s


@given(scenarios())
def test_validation_is_pure(s):
    before = dataclasses.replace(s)
    assert validate(s) == validate(s)
    assert s == before
