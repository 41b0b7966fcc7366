"""Scenario definition, YAML loading and validation.

A scenario document has five sections::

    geometry:   mz_side, lanes (name, road, direction, index, length),
                optional conflict_table
    limits:     v_min, v_max, u_min, u_max, delta, vehicle_length,
                energy_weight
    arrivals:   rates, speed_range, vehicles, end_time, seed,
                service_rate
    policy:     case (1-10) or resequencing, formulation, rho, sigma,
                tie_break, repair
    output:     trace_step, fuel_dt, fuel (cruise, accel, scale)

Unknown keys are rejected so that a typo never silently falls back to a
default.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from enum import IntEnum

import yaml

from . import kernels
from .trajectory import FuelCoefficients


class Relation(IntEnum):
    SAME_LANE = kernels.REL_SAME_LANE
    SAME_ROAD = kernels.REL_SAME_ROAD
    OPPOSITE = kernels.REL_OPPOSITE
    CONFLICT = kernels.REL_CONFLICT


_RELATION_NAMES = {
    "SameLane": Relation.SAME_LANE,
    "SameRoadSameDir": Relation.SAME_ROAD,
    "Opposite": Relation.OPPOSITE,
    "Conflict": Relation.CONFLICT,
}
_RELATION_LABELS = {v: k for k, v in _RELATION_NAMES.items()}


@dataclass(frozen=True)
class Lane:
    name: str
    road: str
    direction: str
    index: int = 0


def relate(a, b):
    """Relation between two lanes from their road and direction labels."""
    if a.road != b.road:
        return Relation.CONFLICT
    if a.direction != b.direction:
        return Relation.OPPOSITE
    if a.index == b.index:
        return Relation.SAME_LANE
    return Relation.SAME_ROAD


def default_table(lanes):
    return tuple(tuple(relate(a, b) for b in lanes) for a in lanes)


@dataclass(frozen=True)
class Geometry:
    segment_lengths: tuple
    mz_side: float
    lanes: tuple
    conflict_table: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "segment_lengths", tuple(float(x) for x in self.segment_lengths))
        object.__setattr__(self, "lanes", tuple(self.lanes))
        if self.conflict_table is None:
            table = default_table(self.lanes)
        else:
            table = tuple(tuple(Relation(x) for x in row) for row in self.conflict_table)
        object.__setattr__(self, "conflict_table", table)

    @classmethod
    def canonical(cls, lengths=(400.0, 400.0, 300.0, 300.0), mz_side=30.0):
        """Four-approach intersection, one lane each: E2W, W2E, N2S, S2N."""
        lanes = (
            Lane("E2W", "EW", "W"),
            Lane("W2E", "EW", "E"),
            Lane("N2S", "NS", "S"),
            Lane("S2N", "NS", "N"),
        )
        return cls(tuple(lengths), mz_side, lanes)

    @property
    def n_lanes(self):
        return len(self.lanes)

    def lane_index(self, name):
        for i, lane in enumerate(self.lanes):
            if lane.name == name:
                return i
        raise KeyError(f"unknown lane {name!r}")


@dataclass(frozen=True)
class VehicleLimits:
    v_min: float = 4.0
    v_max: float = 16.0
    u_min: float = -5.0
    u_max: float = 2.0
    delta: float = 10.0
    vehicle_length: float = 5.0
    energy_weight: float = 1.0


@dataclass(frozen=True)
class ArrivalModel:
    rates: tuple = (0.4, 0.4, 0.4, 0.4)
    speed_range: tuple = (8.0, 12.0)
    vehicles: int = 100
    end_time: float = None
    seed: int = 0
    service_rate: float = 0.8

    def __post_init__(self):
        object.__setattr__(self, "rates", tuple(float(x) for x in self.rates))
        object.__setattr__(self, "speed_range", tuple(float(x) for x in self.speed_range))


FORMULATIONS = ("cruise", "rho", "force_tc", "sigma", "force_vmax")
TIE_BREAKS = ("min_displacement",)


@dataclass(frozen=True)
class PolicySpec:
    resequencing: bool = True
    formulation: str = "cruise"
    rho: float = 5.0
    sigma: float = 0.1
    tie_break: str = "min_displacement"
    repair: bool = True

    _CASES = {
        1: (False, "cruise", {}),
        2: (False, "rho", {}),
        3: (False, "force_tc", {}),
        4: (True, "cruise", {}),
        5: (True, "rho", {}),
        6: (True, "force_tc", {}),
        7: (True, "sigma", {"sigma": 0.1}),
        8: (True, "sigma", {"sigma": 1.0}),
        9: (True, "sigma", {"sigma": 10.0}),
        10: (True, "force_vmax", {}),
    }

    @classmethod
    def from_case(cls, case, **overrides):
        """Policy for one of the ten benchmark cases."""
        try:
            reseq, form, extra = cls._CASES[int(case)]
        except KeyError:
            raise ValueError(f"case must be in 1..10, got {case}") from None
        kw = dict(resequencing=reseq, formulation=form, **extra)
        kw.update(overrides)
        return cls(**kw)

    @property
    def head_mode(self):
        if self.formulation == "rho":
            return kernels.HEAD_RHO
        if self.formulation == "force_tc":
            return kernels.HEAD_FORCE_TC
        return kernels.HEAD_CRUISE

    @property
    def terminal_mode(self):
        if self.formulation == "sigma":
            return kernels.TERM_SIGMA
        if self.formulation == "force_vmax":
            return kernels.TERM_VMAX
        return kernels.TERM_FREE

    def case_number(self):
        """Matching case id, or None for a custom policy."""
        for n, (reseq, form, extra) in self._CASES.items():
            if (self.resequencing, self.formulation) != (reseq, form):
                continue
            if form == "sigma" and self.sigma != extra["sigma"]:
                continue
            return n
        return None


@dataclass(frozen=True)
class OutputSpec:
    trace_step: float = 0.1
    fuel_dt: float = 0.01
    fuel: FuelCoefficients = field(default_factory=FuelCoefficients)


@dataclass(frozen=True)
class Scenario:
    geometry: Geometry = field(default_factory=Geometry.canonical)
    limits: VehicleLimits = field(default_factory=VehicleLimits)
    arrivals: ArrivalModel = field(default_factory=ArrivalModel)
    policy: PolicySpec = field(default_factory=PolicySpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    def replace(self, **sections):
        return dataclasses.replace(self, **sections)

    def with_policy(self, policy):
        return dataclasses.replace(self, policy=policy)


@dataclass(frozen=True)
class Violation:
    field: str
    message: str
    severity: str = "error"

    def __str__(self):
        return f"{self.severity}: {self.field}: {self.message}"


class ScenarioError(ValueError):
    """Parse or validation failure; ``violations`` lists every problem found."""

    def __init__(self, message, violations=(), line=None, field=None):
        super().__init__(message)
        self.violations = list(violations)
        self.line = line
        self.field = field


# ----------------------------------------------------------------- validation

def _fuel_goes_negative(fc, lim):
    r0, r1, r2 = fc.accel
    for k in range(201):
        v = lim.v_max * k / 200.0
        w0, w1, w2, w3 = fc.cruise
        cruise = w0 + v * (w1 + v * (w2 + v * w3))
        if cruise < 0.0 or cruise + lim.u_max * (r0 + v * (r1 + v * r2)) < 0.0:
            return True
    return False


def validate(s):
    """Every violated invariant as a :class:`Violation`; never raises.

    The stability precheck is advisory and reported with severity
    ``"warning"``.
    """
    out = []

    def err(name, msg):
        out.append(Violation(name, msg))

    g, lim, arr, pol, o = s.geometry, s.limits, s.arrivals, s.policy, s.output
    M = len(g.lanes)
    if M == 0:
        err("geometry.lanes", "at least one lane is required")
    if len(g.segment_lengths) != M:
        err("geometry.segment_lengths", f"expected {M} lengths, got {len(g.segment_lengths)}")
    if not g.mz_side > 0:
        err("geometry.mz_side", "must be positive")
    for i, L in enumerate(g.segment_lengths):
        if not L > g.mz_side:
            err(f"geometry.lanes[{i}].length", f"length {L} must exceed mz_side {g.mz_side}")
    names = [lane.name for lane in g.lanes]
    if len(set(names)) != len(names):
        err("geometry.lanes", "lane names must be unique")
    T = g.conflict_table
    if len(T) != M or any(len(row) != M for row in T):
        err("geometry.conflict_table", f"must be {M}x{M}")
    else:
        for i in range(M):
            for j in range(M):
                r = T[i][j]
                if (r == Relation.SAME_LANE) != (i == j):
                    err("geometry.conflict_table", f"SameLane must hold exactly on the diagonal ({i},{j})")
                if r in (Relation.OPPOSITE, Relation.CONFLICT) and T[j][i] != r:
                    err("geometry.conflict_table", f"entry ({i},{j}) is {r.name} but ({j},{i}) is {T[j][i].name}")
    if M > 64:
        err("geometry.lanes", "at most 64 lanes are supported")

    if not 0 <= lim.v_min < lim.v_max:
        err("limits.v_min", f"need 0 <= v_min < v_max, got v_min={lim.v_min}, v_max={lim.v_max}")
    if not lim.u_min < 0 < lim.u_max:
        err("limits.u_max" if lim.u_max <= 0 else "limits.u_min", "need u_min < 0 < u_max")
    if not lim.delta > 0:
        err("limits.delta", "must be positive")
    if not lim.vehicle_length > 0:
        err("limits.vehicle_length", "must be positive")
    if not lim.energy_weight > 0:
        err("limits.energy_weight", "must be positive")

    if len(arr.rates) != M:
        err("arrivals.rates", f"expected {M} rates, got {len(arr.rates)}")
    if any(not r > 0 for r in arr.rates):
        err("arrivals.rates", "every rate must be positive")
    lo, hi = arr.speed_range if len(arr.speed_range) == 2 else (math.nan, math.nan)
    if not lim.v_min <= lo <= hi <= lim.v_max:
        err("arrivals.speed_range", f"need v_min <= lo <= hi <= v_max, got {arr.speed_range}")
    if arr.vehicles is None and arr.end_time is None:
        err("arrivals.vehicles", "either vehicles or end_time must be given")
    if arr.vehicles is not None and arr.vehicles < 1:
        err("arrivals.vehicles", "must be at least 1")
    if arr.end_time is not None and not arr.end_time > 0:
        err("arrivals.end_time", "must be positive")
    if not arr.service_rate > 0:
        err("arrivals.service_rate", "must be positive")

    if pol.formulation not in FORMULATIONS:
        err("policy.formulation", f"must be one of {FORMULATIONS}")
    if pol.tie_break not in TIE_BREAKS:
        err("policy.tie_break", f"must be one of {TIE_BREAKS}")
    if not pol.rho >= 0:
        err("policy.rho", "must be nonnegative")
    if pol.formulation == "rho" and not pol.rho > 0:
        err("policy.rho", "the rho formulation needs rho > 0")
    if not pol.sigma >= 0:
        err("policy.sigma", "must be nonnegative")

    if not o.trace_step > 0:
        err("output.trace_step", "must be positive")
    if not o.fuel_dt > 0:
        err("output.fuel_dt", "must be positive")
    if len(o.fuel.cruise) != 4 or len(o.fuel.accel) != 3:
        err("output.fuel", "cruise needs 4 weights and accel 3")
    elif not out and _fuel_goes_negative(o.fuel, lim):
        out.append(Violation("output.fuel", "raw fuel rate is negative somewhere in the admissible box; "
                             "it will be clamped at zero", "warning"))

    if arr.rates and arr.service_rate > 0:
        total = math.fsum(arr.rates)
        cap = 2.0 * arr.service_rate
        # tolerant comparison so the boundary case 4 x 0.4 vs 1.6 passes
        if total > cap * (1.0 + 1e-9):
            out.append(Violation("arrivals.rates", f"sum of rates {total:.6g} exceeds 2*service_rate={cap:.6g}; "
                                 "the queue is unlikely to be stable", "warning"))
    return out


def errors(s):
    return [v for v in validate(s) if v.severity == "error"]


# -------------------------------------------------------------------- loading

_SECTIONS = ("geometry", "limits", "arrivals", "policy", "output")
_GEOMETRY_KEYS = ("mz_side", "lanes", "conflict_table")
_LANE_KEYS = ("name", "road", "direction", "index", "length")
_POLICY_KEYS = ("case", "resequencing", "formulation", "rho", "sigma", "tie_break", "repair")
_OUTPUT_KEYS = ("trace_step", "fuel_dt", "fuel")
_FUEL_KEYS = ("cruise", "accel", "scale")


def _key_lines(node, path="", out=None):
    # map dotted key path -> 1-based line number
    if out is None:
        out = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            p = f"{path}.{k.value}" if path else str(k.value)
            out[p] = k.start_mark.line + 1
            _key_lines(v, p, out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            p = f"{path}[{i}]"
            out[p] = v.start_mark.line + 1
            _key_lines(v, p, out)
    return out


class _Reader:
    def __init__(self, lines):
        self.lines = lines

    def fail(self, path, msg):
        line = None
        p = path
        while p and line is None:
            line = self.lines.get(p)
            p = p.rsplit(".", 1)[0] if "." in p else ""
        where = f" (line {line})" if line else ""
        raise ScenarioError(f"{path}: {msg}{where}", line=line, field=path)

    def mapping(self, obj, path, allowed):
        if obj is None:
            return {}
        if not isinstance(obj, dict):
            self.fail(path, "expected a mapping")
        for k in obj:
            if k not in allowed:
                self.fail(f"{path}.{k}" if path else str(k), "unknown key")
        return obj

    def number(self, obj, path, integer=False, optional=False):
        if obj is None and optional:
            return None
        if isinstance(obj, bool) or not isinstance(obj, (int, float)):
            self.fail(path, f"expected a number, got {obj!r}")
        if integer:
            if float(obj) != int(obj):
                self.fail(path, "expected an integer")
            return int(obj)
        return float(obj)

    def numbers(self, obj, path):
        if not isinstance(obj, list):
            self.fail(path, "expected a list of numbers")
        return tuple(self.number(x, f"{path}[{i}]") for i, x in enumerate(obj))

    def boolean(self, obj, path):
        if not isinstance(obj, bool):
            self.fail(path, f"expected true or false, got {obj!r}")
        return obj

    def string(self, obj, path):
        if not isinstance(obj, (str, int)) or isinstance(obj, bool):
            self.fail(path, f"expected a string, got {obj!r}")
        return str(obj)


def _fields(cls):
    return tuple(f.name for f in dataclasses.fields(cls))


def _parse(data, rd):
    data = rd.mapping(data, "", _SECTIONS)

    g = rd.mapping(data.get("geometry"), "geometry", _GEOMETRY_KEYS)
    if "lanes" in g:
        if not isinstance(g["lanes"], list):
            rd.fail("geometry.lanes", "expected a list")
        lanes, lengths = [], []
        for i, item in enumerate(g["lanes"]):
            p = f"geometry.lanes[{i}]"
            item = rd.mapping(item, p, _LANE_KEYS)
            for req in ("name", "road", "direction", "length"):
                if req not in item:
                    rd.fail(f"{p}.{req}", "missing")
            lanes.append(Lane(rd.string(item["name"], f"{p}.name"),
                              rd.string(item["road"], f"{p}.road"),
                              rd.string(item["direction"], f"{p}.direction"),
                              rd.number(item.get("index", 0), f"{p}.index", integer=True)))
            lengths.append(rd.number(item["length"], f"{p}.length"))
        mz = rd.number(g.get("mz_side", 30.0), "geometry.mz_side")
        table = None
        if g.get("conflict_table") is not None:
            raw = g["conflict_table"]
            if not isinstance(raw, list):
                rd.fail("geometry.conflict_table", "expected a list of rows")
            table = []
            for i, row in enumerate(raw):
                if not isinstance(row, list):
                    rd.fail(f"geometry.conflict_table[{i}]", "expected a list")
                cells = []
                for j, cell in enumerate(row):
                    if cell not in _RELATION_NAMES:
                        rd.fail(f"geometry.conflict_table[{i}][{j}]",
                                f"expected one of {sorted(_RELATION_NAMES)}, got {cell!r}")
                    cells.append(_RELATION_NAMES[cell])
                table.append(tuple(cells))
            table = tuple(table)
        geometry = Geometry(tuple(lengths), mz, tuple(lanes), table)
    else:
        if "conflict_table" in g:
            rd.fail("geometry.conflict_table", "requires an explicit lanes list")
        base = Geometry.canonical()
        geometry = Geometry(base.segment_lengths, rd.number(g.get("mz_side", base.mz_side), "geometry.mz_side"),
                            base.lanes)

    lim_d = rd.mapping(data.get("limits"), "limits", _fields(VehicleLimits))
    limits = VehicleLimits(**{k: rd.number(v, f"limits.{k}") for k, v in lim_d.items()})

    arr_d = rd.mapping(data.get("arrivals"), "arrivals", _fields(ArrivalModel))
    akw = {}
    for k, v in arr_d.items():
        p = f"arrivals.{k}"
        if k in ("rates", "speed_range"):
            akw[k] = rd.numbers(v, p)
        elif k in ("vehicles", "seed"):
            akw[k] = rd.number(v, p, integer=True, optional=(k == "vehicles"))
        else:
            akw[k] = rd.number(v, p, optional=(k == "end_time"))
    if "rates" not in akw:
        akw["rates"] = (0.4,) * len(geometry.lanes)
    arrivals = ArrivalModel(**akw)

    pol_d = rd.mapping(data.get("policy"), "policy", _POLICY_KEYS)
    pkw = {}
    for k, v in pol_d.items():
        p = f"policy.{k}"
        if k in ("resequencing", "repair"):
            pkw[k] = rd.boolean(v, p)
        elif k in ("formulation", "tie_break"):
            pkw[k] = rd.string(v, p)
        elif k in ("rho", "sigma"):
            pkw[k] = rd.number(v, p)
    if "case" in pol_d:
        case = rd.number(pol_d["case"], "policy.case", integer=True)
        if case not in PolicySpec._CASES:
            rd.fail("policy.case", "must be in 1..10")
        policy = PolicySpec.from_case(case, **pkw)
    else:
        policy = PolicySpec(**pkw)

    out_d = rd.mapping(data.get("output"), "output", _OUTPUT_KEYS)
    okw = {}
    for k in ("trace_step", "fuel_dt"):
        if k in out_d:
            okw[k] = rd.number(out_d[k], f"output.{k}")
    if "fuel" in out_d:
        f = rd.mapping(out_d["fuel"], "output.fuel", _FUEL_KEYS)
        fkw = {}
        for k in ("cruise", "accel"):
            if k in f:
                fkw[k] = rd.numbers(f[k], f"output.fuel.{k}")
        if "scale" in f:
            fkw["scale"] = rd.number(f["scale"], "output.fuel.scale")
        okw["fuel"] = FuelCoefficients(**fkw)
    output = OutputSpec(**okw)
    return Scenario(geometry, limits, arrivals, policy, output)


def load_scenario(text):
    """Parse a YAML scenario document, apply defaults and validate it.

    Raises :class:`ScenarioError` on malformed YAML, unknown keys, wrong
    types, or any violated invariant.  Advisory warnings do not raise.
    """
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ScenarioError(f"malformed scenario document: {exc}", line=line) from None
    s = _parse(data, _Reader(_key_lines(node) if node is not None else {}))
    bad = errors(s)
    if bad:
        msg = "invalid scenario:\n" + "\n".join(f"  {v}" for v in bad)
        raise ScenarioError(msg, bad, field=bad[0].field)
    return s


def load_scenario_file(path):
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())


def scenario_dict(s):
    """Plain-data form of a scenario, the inverse of the loader."""
    g = s.geometry
    lanes = [
        {"name": ln.name, "road": ln.road, "direction": ln.direction, "index": ln.index, "length": L}
        for ln, L in zip(g.lanes, g.segment_lengths)
    ]
    geometry = {"mz_side": g.mz_side, "lanes": lanes}
    if g.conflict_table != default_table(g.lanes):
        geometry["conflict_table"] = [[_RELATION_LABELS[r] for r in row] for row in g.conflict_table]
    a = s.arrivals
    p = s.policy
    o = s.output
    return {
        "geometry": geometry,
        "limits": dataclasses.asdict(s.limits),
        "arrivals": {
            "rates": list(a.rates),
            "speed_range": list(a.speed_range),
            "vehicles": a.vehicles,
            "end_time": a.end_time,
            "seed": a.seed,
            "service_rate": a.service_rate,
        },
        "policy": {
            "resequencing": p.resequencing,
            "formulation": p.formulation,
            "rho": p.rho,
            "sigma": p.sigma,
            "tie_break": p.tie_break,
            "repair": p.repair,
        },
        "output": {
            "trace_step": o.trace_step,
            "fuel_dt": o.fuel_dt,
            "fuel": {"cruise": list(o.fuel.cruise), "accel": list(o.fuel.accel), "scale": o.fuel.scale},
        },
    }


def render_scenario(s):
    """YAML text that :func:`load_scenario` maps back to an equal scenario."""
    return yaml.safe_dump(scenario_dict(s), sort_keys=False, default_flow_style=None)
