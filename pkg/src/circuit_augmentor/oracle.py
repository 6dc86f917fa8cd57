"""Analytic circuit models standing in for SPICE-class simulators.

Gate propagation delays follow a first-order saturation-current model:

    delay(pin, edge) = k * c_load * vdd /
        ( mu(temp) * (w / l) * (tox_ref / tox) * (vdd - vth(corner, temp))^alpha )

with mu(temp) = mu0 * ((temp + 273.15) / 300)^(-1.5) and
vth(corner, temp) = vth0(corner) - kT * (temp - 27). The per-gate constant k
factors into a drive strength and per-pin rise/fall asymmetry coefficients.
Every constant lives in a versioned TOML table shipped with the package;
changing that table invalidates pinned regression values on purpose.

The module also provides a toy analog current reference, uniform dataset
generation over parameter ranges, TOML netlists, and longest-path delay
composition over gate DAGs with a pluggable per-gate delay provider.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .dataio import CORNER_CODES, DataError, Dataset, Feature, FeatureSchema, ROLE_INPUT, ROLE_OUTPUT
from .linalg import ValidationError
from .seeding import stream

KELVIN_OFFSET = 273.15
TEMP_REF_K = 300.0
MOBILITY_EXPONENT = -1.5
VTH_TEMP_REF = 27.0


class OperatingRegionError(ValueError):
    """Evaluation requested outside the model's valid operating region."""


# ---------------------------------------------------------------------------
# constants table


@dataclass(frozen=True)
class GateKind:
    """One digital block: drive strength plus per-pin edge asymmetries."""

    name: str
    pins: tuple[str, ...]
    drive: float
    asym_lh: tuple[float, ...]
    asym_hl: tuple[float, ...]

    def __post_init__(self):
        if len(self.pins) < 1:
            raise ValidationError(f"gate {self.name!r} has no pins")
        if len(self.asym_lh) != len(self.pins) or len(self.asym_hl) != len(self.pins):
            raise ValidationError(f"gate {self.name!r}: asymmetry length != pin count")
        if self.drive <= 0.0 or min(*self.asym_lh, *self.asym_hl) <= 0.0:
            raise ValidationError(f"gate {self.name!r}: coefficients must be > 0")


@dataclass(frozen=True)
class DigitalConstants:
    mu0: float
    alpha: float
    kt: float  # vth temperature slope, V per degC
    tox_ref: float
    vth0: tuple[float, ...]  # indexed by corner code


@dataclass(frozen=True)
class AnalogConstants:
    lam: float  # supply sensitivity, 1/V
    vdd_nom: float
    kt: float
    vth0: tuple[float, ...]


@dataclass(frozen=True)
class OracleConstants:
    version: int
    digital: DigitalConstants
    analog: AnalogConstants
    gates: dict[str, GateKind]


def _vth0_tuple(table: dict) -> tuple[float, ...]:
    missing = [c for c in CORNER_CODES if c not in table]
    if missing:
        raise DataError(f"constants table missing vth0 for corners {missing}")
    return tuple(float(table[c]) for c in CORNER_CODES)


@lru_cache(maxsize=8)
def load_constants(path: str | None = None) -> OracleConstants:
    """Load the oracle constants table; None loads the packaged default."""
    if path is None:
        text = resources.files("circuit_augmentor").joinpath("data/constants.toml").read_text()
    else:
        text = Path(path).read_text(encoding="utf-8")
    doc = tomllib.loads(text)
    dig = doc["digital"]
    ana = doc["analog"]
    gates = {}
    for name, g in doc["gates"].items():
        gates[name] = GateKind(
            name=name,
            pins=tuple(g["pins"]),
            drive=float(g["drive"]),
            asym_lh=tuple(float(a) for a in g["asym_lh"]),
            asym_hl=tuple(float(a) for a in g["asym_hl"]),
        )
    return OracleConstants(
        version=int(doc["version"]),
        digital=DigitalConstants(
            mu0=float(dig["mu0"]),
            alpha=float(dig["alpha"]),
            kt=float(dig["kt"]),
            tox_ref=float(dig["tox_ref"]),
            vth0=_vth0_tuple(dig["vth0"]),
        ),
        analog=AnalogConstants(
            lam=float(ana["lambda"]),
            vdd_nom=float(ana["vdd_nom"]),
            kt=float(ana["kt"]),
            vth0=_vth0_tuple(ana["vth0"]),
        ),
        gates=gates,
    )


def mobility(temp, mu0: float):
    return mu0 * ((temp + KELVIN_OFFSET) / TEMP_REF_K) ** MOBILITY_EXPONENT


def threshold_voltage(vth0: tuple[float, ...], corner_code, temp, kt: float):
    base = np.asarray(vth0, dtype=np.float64)[corner_code]
    return base - kt * (temp - VTH_TEMP_REF)


# ---------------------------------------------------------------------------
# operating points


@dataclass(frozen=True)
class ProcessPoint:
    """Shared operating conditions for one evaluation.

    vdd must stay above the corner's threshold voltage; that guard depends on
    the constants table, so it is enforced at evaluation time rather than
    here.
    """

    vdd: float = 1.8
    temp: float = 27.0
    w: float = 2.0e-7
    l: float = 2.0e-7
    tox: float = 4.0e-9
    corner: str = "TT"
    c_load: float = 5.0e-15

    def __post_init__(self):
        if not 0.5 <= self.vdd <= 2.5:
            raise ValidationError(f"vdd {self.vdd} outside [0.5, 2.5] V")
        if not -40.0 <= self.temp <= 150.0:
            raise ValidationError(f"temp {self.temp} outside [-40, 150] degC")
        for field_name in ("w", "l", "tox", "c_load"):
            if getattr(self, field_name) <= 0.0:
                raise ValidationError(f"{field_name} must be > 0")
        if self.corner not in CORNER_CODES:
            raise ValidationError(f"unknown corner {self.corner!r}")

    @property
    def corner_code(self) -> int:
        return CORNER_CODES[self.corner]


@dataclass(frozen=True)
class DelayResult:
    pins: tuple[str, ...]
    delay_lh: np.ndarray  # ps, one per pin
    delay_hl: np.ndarray

    def worst(self) -> float:
        return float(max(self.delay_lh.max(), self.delay_hl.max()))

    def as_dict(self) -> dict[str, float]:
        out = {}
        for i, pin in enumerate(self.pins):
            out[f"delay_lh_{pin}"] = float(self.delay_lh[i])
            out[f"delay_hl_{pin}"] = float(self.delay_hl[i])
        return out


def _resolve_kind(kind, constants: OracleConstants) -> GateKind:
    if isinstance(kind, GateKind):
        return kind
    if kind not in constants.gates:
        raise ValidationError(f"unknown gate kind {kind!r}")
    return constants.gates[kind]


def _edge_base(vdd, temp, corner_code, c_load, w, l_eff, tox, dvth, kmu, c: DigitalConstants):
    """Shared delay factor for one driving device group; multiply by k."""
    overdrive = vdd - (threshold_voltage(c.vth0, corner_code, temp, c.kt) + dvth)
    if np.any(overdrive <= 0.0):
        raise OperatingRegionError("vdd does not exceed the threshold voltage")
    if np.any(l_eff <= 0.0):
        raise OperatingRegionError("effective channel length must be > 0")
    drive = kmu * mobility(temp, c.mu0) * (w / l_eff) * (c.tox_ref / tox)
    return c_load * vdd / (drive * overdrive**c.alpha)


def gate_delay(kind, p: ProcessPoint, constants: OracleConstants | None = None) -> DelayResult:
    """Per-pin rise/fall propagation delays (ps) for one gate at one point."""
    c = constants or load_constants()
    k = _resolve_kind(kind, c)
    base = _edge_base(p.vdd, p.temp, p.corner_code, p.c_load, p.w, p.l, p.tox, 0.0, 1.0, c.digital)
    lh = k.drive * np.asarray(k.asym_lh) * base
    hl = k.drive * np.asarray(k.asym_hl) * base
    if not (np.all(np.isfinite(lh)) and np.all(np.isfinite(hl))):
        raise OperatingRegionError("delay overflowed; point too close to cutoff")
    return DelayResult(pins=k.pins, delay_lh=lh, delay_hl=hl)


def current_reference(p: ProcessPoint, r: float, constants: OracleConstants | None = None) -> float:
    """Branch current (A) of the toy current-reference block."""
    c = (constants or load_constants()).analog
    if r <= 0.0:
        raise ValidationError(f"r must be > 0, got {r}")
    overdrive = p.vdd - threshold_voltage(c.vth0, p.corner_code, p.temp, c.kt)
    if overdrive <= 0.0:
        raise OperatingRegionError("vdd does not exceed the analog threshold voltage")
    return float(overdrive / r * (1.0 + c.lam * (p.vdd - c.vdd_nom)))


# ---------------------------------------------------------------------------
# dataset generation

# Shared conditions plus one five-feature block per driving device group.
# Rising outputs are charged through the p group, falling through the n group.
_SHARED_INPUTS = ("vdd", "temp", "corner", "c_load", "xl")
_GROUP_INPUTS = ("w", "l", "tox", "dvth", "kmu")

DEFAULT_DIGITAL_RANGES: dict[str, tuple[float, float]] = {
    "vdd": (1.4, 2.2),
    "temp": (-40.0, 125.0),
    "c_load": (2.0e-15, 1.0e-14),
    "xl": (-1.0e-8, 1.0e-8),
}
for _g in ("n", "p"):
    DEFAULT_DIGITAL_RANGES[f"w_{_g}"] = (1.5e-7, 4.0e-7)
    DEFAULT_DIGITAL_RANGES[f"l_{_g}"] = (1.6e-7, 2.4e-7)
    DEFAULT_DIGITAL_RANGES[f"tox_{_g}"] = (3.5e-9, 4.5e-9)
    DEFAULT_DIGITAL_RANGES[f"dvth_{_g}"] = (-0.02, 0.02)
    DEFAULT_DIGITAL_RANGES[f"kmu_{_g}"] = (0.9, 1.1)
del _g

DEFAULT_ANALOG_RANGES: dict[str, tuple[float, float]] = {
    "vdd": (1.4, 2.2),
    "temp": (-40.0, 125.0),
    "r": (5.0e5, 2.0e6),
    "dvth": (-0.02, 0.02),
    "mirror": (0.5, 4.0),
}

ANALOG_KIND = "current_reference"

_UNITS = {
    "vdd": "V",
    "temp": "degC",
    "c_load": "F",
    "xl": "m",
    "w": "m",
    "l": "m",
    "tox": "m",
    "dvth": "V",
    "kmu": "",
    "r": "ohm",
    "mirror": "",
}


def gate_schema(kind, constants: OracleConstants | None = None) -> FeatureSchema:
    """15 sampled inputs plus one lh/hl delay pair per input pin."""
    k = _resolve_kind(kind, constants or load_constants())
    feats = []
    for name in _SHARED_INPUTS:
        feats.append(Feature(name, ROLE_INPUT, _UNITS.get(name, ""), categorical=name == "corner"))
    for g in ("n", "p"):
        for base in _GROUP_INPUTS:
            feats.append(Feature(f"{base}_{g}", ROLE_INPUT, _UNITS[base]))
    for pin in k.pins:
        feats.append(Feature(f"delay_lh_{pin}", ROLE_OUTPUT, "ps"))
        feats.append(Feature(f"delay_hl_{pin}", ROLE_OUTPUT, "ps"))
    return FeatureSchema(tuple(feats))


def analog_schema() -> FeatureSchema:
    feats = [
        Feature("vdd", ROLE_INPUT, "V"),
        Feature("temp", ROLE_INPUT, "degC"),
        Feature("corner", ROLE_INPUT, "", categorical=True),
        Feature("r", ROLE_INPUT, "ohm"),
        Feature("dvth", ROLE_INPUT, "V"),
        Feature("mirror", ROLE_INPUT, ""),
        Feature("i_branch", ROLE_OUTPUT, "A"),
        Feature("i_out", ROLE_OUTPUT, "A"),
        Feature("p_total", ROLE_OUTPUT, "W"),
    ]
    return FeatureSchema(tuple(feats))


def _gate_outputs(kind: GateKind, cols: dict[str, np.ndarray], c: OracleConstants) -> dict:
    """Vectorized delay outputs; per-group geometry and threshold shifts."""
    code = cols["corner"].astype(int)
    by_edge = {}
    for group, edge in (("p", "lh"), ("n", "hl")):
        by_edge[edge] = _edge_base(
            cols["vdd"],
            cols["temp"],
            code,
            cols["c_load"],
            cols[f"w_{group}"],
            cols[f"l_{group}"] + cols["xl"],
            cols[f"tox_{group}"],
            cols[f"dvth_{group}"],
            cols[f"kmu_{group}"],
            c.digital,
        )
    out = {}
    for i, pin in enumerate(kind.pins):
        out[f"delay_lh_{pin}"] = kind.drive * kind.asym_lh[i] * by_edge["lh"]
        out[f"delay_hl_{pin}"] = kind.drive * kind.asym_hl[i] * by_edge["hl"]
    return out


def _analog_outputs(cols: dict[str, np.ndarray], c: OracleConstants) -> dict:
    a = c.analog
    code = cols["corner"].astype(int)
    overdrive = cols["vdd"] - (threshold_voltage(a.vth0, code, cols["temp"], a.kt) + cols["dvth"])
    if np.any(overdrive <= 0.0):
        raise OperatingRegionError("vdd does not exceed the analog threshold voltage")
    i_branch = overdrive / cols["r"] * (1.0 + a.lam * (cols["vdd"] - a.vdd_nom))
    i_out = cols["mirror"] * i_branch
    return {"i_branch": i_branch, "i_out": i_out, "p_total": cols["vdd"] * (i_branch + i_out)}


def _check_ranges(ranges: dict, defaults: dict, vth0: tuple[float, ...], kt: float) -> dict:
    merged = dict(defaults)
    for name, pair in (ranges or {}).items():
        if name not in defaults:
            raise DataError(f"unknown range feature {name!r}")
        lo, hi = float(pair[0]), float(pair[1])
        if not np.isfinite(lo) or not np.isfinite(hi) or lo > hi:
            raise DataError(f"invalid range for {name!r}: ({lo}, {hi})")
        merged[name] = (lo, hi)
    if not 0.5 <= merged["vdd"][0] or not merged["vdd"][1] <= 2.5:
        raise DataError("vdd range outside [0.5, 2.5] V")
    if not -40.0 <= merged["temp"][0] or not merged["temp"][1] <= 150.0:
        raise DataError("temp range outside [-40, 150] degC")
    for name, (lo, _) in merged.items():
        if name in ("w_n", "w_p", "l_n", "l_p", "tox_n", "tox_p", "c_load", "r", "mirror"):
            if lo <= 0.0:
                raise DataError(f"{name} range must be > 0")
    # worst case over corners and the sampled box must stay above threshold
    vth_hi = max(vth0) + kt * max(0.0, VTH_TEMP_REF - merged["temp"][0])
    dvth_keys = [k for k in merged if k.startswith("dvth")]
    vth_hi += max(merged[k][1] for k in dvth_keys) if dvth_keys else 0.0
    if merged["vdd"][0] <= vth_hi:
        raise DataError(
            f"vdd range floor {merged['vdd'][0]} does not clear worst-case threshold {vth_hi:.4f}"
        )
    if "xl" in merged and min(merged["l_n"][0], merged["l_p"][0]) + merged["xl"][0] <= 0.0:
        raise DataError("xl range can drive effective length to zero")
    return merged


def generate_dataset(
    kind: str,
    n: int,
    seed: int,
    ranges: dict[str, tuple[float, float]] | None = None,
    constants: OracleConstants | None = None,
) -> Dataset:
    """Sample n rows uniformly over the ranges and attach oracle outputs.

    kind is a gate name from the constants table or "current_reference".
    Corners are sampled uniformly over the five codes. Partial range
    overrides merge into the defaults. Deterministic given seed.
    """
    if n < 1:
        raise DataError(f"n must be >= 1, got {n}")
    c = constants or load_constants()
    if kind == ANALOG_KIND:
        schema = analog_schema()
        merged = _check_ranges(ranges or {}, DEFAULT_ANALOG_RANGES, c.analog.vth0, c.analog.kt)
    else:
        gk = _resolve_kind(kind, c)
        schema = gate_schema(gk, c)
        merged = _check_ranges(ranges or {}, DEFAULT_DIGITAL_RANGES, c.digital.vth0, c.digital.kt)
    rng = stream(seed, f"dataset:{kind}")
    cols: dict[str, np.ndarray] = {}
    for idx in schema.input_indices:
        name = schema.names[idx]
        if name == "corner":
            cols[name] = rng.integers(0, len(CORNER_CODES), size=n).astype(np.float64)
        else:
            lo, hi = merged[name]
            cols[name] = rng.uniform(lo, hi, size=n) if lo < hi else np.full(n, lo)
    outputs = _analog_outputs(cols, c) if kind == ANALOG_KIND else _gate_outputs(gk, cols, c)
    values = np.column_stack([cols.get(nm, outputs.get(nm)) for nm in schema.names])
    return Dataset(schema=schema, values=values)


def _input_columns(schema: FeatureSchema, rows: np.ndarray) -> dict[str, np.ndarray]:
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    in_names = [schema.names[i] for i in schema.input_indices]
    if rows.shape[1] != len(in_names):
        raise DataError(f"expected {len(in_names)} input columns, got {rows.shape[1]}")
    return {nm: rows[:, j] for j, nm in enumerate(in_names)}


def row_simulator(kind: str, constants: OracleConstants | None = None):
    """Tolerant re-simulator for generated rows.

    Returns (schema, sim) where sim(rows_of_input_features) gives
    (outputs, valid): outputs ordered like the schema's output features and
    valid flagging rows inside the operating region. Invalid rows carry
    zero outputs and must be excluded by the caller.
    """
    c = constants or load_constants()
    if kind == ANALOG_KIND:
        schema = analog_schema()
    else:
        schema = gate_schema(_resolve_kind(kind, c), c)
    out_names = [schema.names[i] for i in schema.output_indices]

    def sim(rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        cols = _input_columns(schema, rows)
        n = next(iter(cols.values())).shape[0]
        valid = np.ones(n, dtype=bool)
        for arr in cols.values():
            valid &= np.isfinite(arr)
        valid &= (cols["vdd"] >= 0.5) & (cols["vdd"] <= 2.5)
        valid &= (cols["temp"] >= -40.0) & (cols["temp"] <= 150.0)
        code = np.clip(np.rint(np.nan_to_num(cols["corner"])), 0, len(CORNER_CODES) - 1).astype(int)
        valid &= np.abs(cols["corner"] - code) < 0.5 + 1e-9
        cols = dict(cols, temp=np.clip(np.nan_to_num(cols["temp"]), -40.0, 150.0))
        out = np.zeros((n, len(out_names)))
        if kind == ANALOG_KIND:
            a = c.analog
            valid &= (cols["r"] > 0.0) & (cols["mirror"] > 0.0)
            od = cols["vdd"] - (threshold_voltage(a.vth0, code, cols["temp"], a.kt) + cols["dvth"])
            valid &= od > 0.0
            r_safe = np.where(valid, cols["r"], 1.0)
            i_branch = np.where(valid, od, 0.0) / r_safe
            i_branch *= 1.0 + a.lam * (cols["vdd"] - a.vdd_nom)
            i_out = cols["mirror"] * i_branch
            vals = {"i_branch": i_branch, "i_out": i_out,
                    "p_total": cols["vdd"] * (i_branch + i_out)}
        else:
            gk = _resolve_kind(kind, c)
            d = c.digital
            base = {}
            for group, edge in (("p", "lh"), ("n", "hl")):
                l_eff = cols[f"l_{group}"] + cols["xl"]
                od = cols["vdd"] - (
                    threshold_voltage(d.vth0, code, cols["temp"], d.kt) + cols[f"dvth_{group}"]
                )
                ok = (
                    (od > 0.0)
                    & (l_eff > 0.0)
                    & (cols[f"w_{group}"] > 0.0)
                    & (cols[f"tox_{group}"] > 0.0)
                    & (cols["c_load"] > 0.0)
                    & (cols[f"kmu_{group}"] > 0.0)
                )
                valid &= ok
                drive = (
                    cols[f"kmu_{group}"]
                    * mobility(cols["temp"], d.mu0)
                    * (cols[f"w_{group}"] / np.where(ok, l_eff, 1.0))
                    * (d.tox_ref / np.where(cols[f"tox_{group}"] > 0.0, cols[f"tox_{group}"], 1.0))
                    * np.where(ok, od, 1.0) ** d.alpha
                )
                base[edge] = np.where(ok, cols["c_load"] * cols["vdd"] / drive, 0.0)
            vals = {}
            for i, pin in enumerate(gk.pins):
                vals[f"delay_lh_{pin}"] = gk.drive * gk.asym_lh[i] * base["lh"]
                vals[f"delay_hl_{pin}"] = gk.drive * gk.asym_hl[i] * base["hl"]
        for j, nm in enumerate(out_names):
            out[:, j] = np.where(valid, vals[nm], 0.0)
        return out, valid

    return schema, sim


def point_to_row(schema: FeatureSchema, point: ProcessPoint) -> np.ndarray:
    """Input-feature row for a shared operating point; group features neutral."""
    values = []
    for i in schema.input_indices:
        name = schema.names[i]
        base = name.split("_")[0]
        if name == "vdd":
            values.append(point.vdd)
        elif name == "temp":
            values.append(point.temp)
        elif name == "corner":
            values.append(float(point.corner_code))
        elif name == "c_load":
            values.append(point.c_load)
        elif name == "xl" or base == "dvth":
            values.append(0.0)
        elif base == "kmu":
            values.append(1.0)
        elif base == "w":
            values.append(point.w)
        elif base == "l":
            values.append(point.l)
        elif base == "tox":
            values.append(point.tox)
        else:
            raise DataError(f"cannot derive feature {name!r} from an operating point")
    return np.array(values, dtype=np.float64)


def sample_points(n: int, seed: int, constants: OracleConstants | None = None) -> list[ProcessPoint]:
    """Random in-region operating points drawn from the default digital ranges."""
    rng = stream(seed, "process-points")
    r = DEFAULT_DIGITAL_RANGES
    pts = []
    for _ in range(n):
        pts.append(
            ProcessPoint(
                vdd=rng.uniform(*r["vdd"]),
                temp=rng.uniform(*r["temp"]),
                w=rng.uniform(*r["w_n"]),
                l=rng.uniform(*r["l_n"]),
                tox=rng.uniform(*r["tox_n"]),
                corner=list(CORNER_CODES)[rng.integers(0, len(CORNER_CODES))],
                c_load=rng.uniform(*r["c_load"]),
            )
        )
    return pts


# ---------------------------------------------------------------------------
# netlists


@dataclass(frozen=True)
class Gate:
    name: str
    kind: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]

    def __post_init__(self):
        if not self.inputs or not self.outputs:
            raise ValidationError(f"gate {self.name!r} needs inputs and outputs")


@dataclass(frozen=True)
class Netlist:
    """Acyclic gate graph; every net is driven exactly once."""

    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    gates: tuple[Gate, ...]

    def __post_init__(self):
        names = [g.name for g in self.gates]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate gate names")
        drivers: dict[str, str] = {net: "primary input" for net in self.inputs}
        if len(drivers) != len(self.inputs):
            raise ValidationError("duplicate primary inputs")
        for g in self.gates:
            for net in g.outputs:
                if net in drivers:
                    raise ValidationError(f"net {net!r} driven by both {drivers[net]} and {g.name}")
                drivers[net] = g.name
        for g in self.gates:
            for net in g.inputs:
                if net not in drivers:
                    raise ValidationError(f"gate {g.name!r} input {net!r} is undriven")
        for net in self.outputs:
            if net not in drivers:
                raise ValidationError(f"primary output {net!r} is undriven")
        self.topological_order()  # raises on cycles

    def topological_order(self) -> tuple[Gate, ...]:
        ready = set(self.inputs)
        pending = list(self.gates)
        order = []
        while pending:
            placed = [g for g in pending if all(net in ready for net in g.inputs)]
            if not placed:
                stuck = ", ".join(g.name for g in pending)
                raise ValidationError(f"netlist has a combinational cycle through: {stuck}")
            for g in placed:
                order.append(g)
                ready.update(g.outputs)
            pending = [g for g in pending if g not in placed]
        return tuple(order)

    def gate_count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)


def load_netlist(path) -> Netlist:
    doc = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    return _netlist_from_doc(doc)


def _netlist_from_doc(doc: dict) -> Netlist:
    gates = tuple(
        Gate(
            name=g["name"],
            kind=g["kind"],
            inputs=tuple(g["inputs"]),
            outputs=tuple(g["outputs"]),
        )
        for g in doc.get("gate", [])
    )
    return Netlist(
        name=doc["name"],
        inputs=tuple(doc["inputs"]),
        outputs=tuple(doc["outputs"]),
        gates=gates,
    )


@lru_cache(maxsize=8)
def builtin_netlist(name: str) -> Netlist:
    """Packaged benchmark netlists: "c17" or "rca4"."""
    ref = resources.files("circuit_augmentor").joinpath(f"data/netlists/{name}.toml")
    try:
        text = ref.read_text()
    except FileNotFoundError:
        raise ValidationError(f"no builtin netlist named {name!r}") from None
    return _netlist_from_doc(tomllib.loads(text))


def critical_path_delay(
    net: Netlist,
    point: ProcessPoint,
    delay_fn=None,
    constants: OracleConstants | None = None,
) -> float:
    """Longest input-to-output path (ps) using worst-case per-gate delays.

    delay_fn(kind: GateKind, point) -> DelayResult is pluggable so the same
    composition runs from oracle delays or from model predictions.
    """
    c = constants or load_constants()
    fn = delay_fn or (lambda kind, pt: gate_delay(kind, pt, c))
    worst: dict[str, float] = {}
    for g in net.gates:
        if g.kind not in worst:
            worst[g.kind] = fn(_resolve_kind(g.kind, c), point).worst()
    arrival = {net_name: 0.0 for net_name in net.inputs}
    for g in net.topological_order():
        t = max(arrival[x] for x in g.inputs) + worst[g.kind]
        for out in g.outputs:
            arrival[out] = t
    return max(arrival[x] for x in net.outputs)
