"""Scenario files: schema, variants, validation and engine construction.

A scenario is one JSON document describing the engine, its sequences, the
modules with their parameter blocks and wiring, the data series they play and
the optional MPC horizon and solver blocks. Variants are JSON merge patches
applied on top of the base document, so every comparison runs from the same
file.
"""

from __future__ import annotations

import copy
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Literal, Mapping

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

import cosimpc.formulations  # noqa: F401  registers the plant formulators
from cosimpc.config import DEFAULT_SEED, PARALLEL_DISPATCH
from cosimpc.engine import CoSimulation, Sequence
from cosimpc.errors import CosimError, ScenarioError
from cosimpc.loads import generate_price_series, generate_synthetic_load
from cosimpc.logic import LogicModule, compile_logic, load_logic, parse_logic
from cosimpc.modules import SimModule
from cosimpc.mpc import Horizon, MpcModule, get_formulator
from cosimpc.plants import PlantModuleA, PlantModuleB
from cosimpc.rbc import RbcModuleA, RbcModuleB, rbc_baseline_a, rbc_baseline_b
from cosimpc.testplants import ConstantSource, FirstOrderLag, Gain, Ramp, SeriesSource, StopWhen
from cosimpc.timebase import TimeVector, read_timevector_csv

logger = logging.getLogger(__name__)

BASE_VARIANT = "base"


class EngineBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    origin: int = 0
    base_period: int = Field(gt=0)
    duration: int = Field(gt=0)
    parallel: bool = False
    max_workers: int | None = Field(default=None, ge=1)


class SequenceBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    period_multiplier: int = Field(default=1, ge=1)
    modules: list[str] = Field(min_length=1)


class ModuleBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    type: str = Field(min_length=1)
    params: dict[str, Any] = {}
    wiring: dict[str, str] = {}


class DataSource(BaseModel):
    model_config = ConfigDict(extra="forbid")

    csv: str | None = None
    generator: Literal["synthetic_load", "price"] | None = None
    params: dict[str, Any] = {}
    unit: str = ""

    @model_validator(mode="after")
    def _one_origin(self) -> "DataSource":
        if (self.csv is None) == (self.generator is None):
            raise ValueError("a data source needs exactly one of 'csv' or 'generator'")
        return self


class HorizonBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    control_period_h: float = Field(default=24.0, gt=0)
    length_h: float = Field(default=48.0, gt=0)
    step_h: float = Field(default=1.0, gt=0)

    def to_horizon(self) -> Horizon:
        return Horizon.hours(self.control_period_h, self.length_h, self.step_h)


class ConvergenceBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    multipliers: list[int] = Field(default=[1, 2, 4, 8], min_length=2)
    probes: list[str] = []
    reference: dict[str, float] = {}


class SweepBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    capacities: list[float] = [0.0, 1.0, 2.0, 4.0]
    discharge_hours: float = Field(default=2.0, gt=0)
    variant: str | None = None


class ScenarioDoc(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str = "scenario"
    description: str = ""
    seed: int | None = None
    engine: EngineBlock
    sequences: dict[str, SequenceBlock] = Field(min_length=1)
    modules: dict[str, ModuleBlock] = Field(min_length=1)
    data: dict[str, DataSource] = {}
    plant: dict[str, Any] = {}
    horizon: HorizonBlock | None = None
    solver: dict[str, Any] = {}
    probes: list[str] = []
    variants: dict[str, dict[str, Any]] = {}
    compare: list[str] = []
    convergence: ConvergenceBlock | None = None
    sweep: SweepBlock | None = None
    output_dir: str | None = None


def merge_patch(target: Any, patch: Any) -> Any:
    """JSON merge patch: objects merge recursively, ``null`` deletes a key."""

    if not isinstance(patch, dict):
        return copy.deepcopy(patch)
    merged = copy.deepcopy(target) if isinstance(target, dict) else {}
    for key, value in patch.items():
        if value is None:
            merged.pop(key, None)
        else:
            merged[key] = merge_patch(merged.get(key), value)
    return merged


def _format_validation_error(error: ValidationError) -> list[str]:
    messages = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "scenario"
        messages.append(f"{location}: {item['msg']}")
    return messages


@dataclass
class Scenario:
    doc: ScenarioDoc
    raw: dict[str, Any]
    path: Path | None = None
    content_hash: str = ""
    variant: str = BASE_VARIANT
    seed_override: int | None = None

    @property
    def base_dir(self) -> Path:
        return self.path.parent if self.path is not None else Path.cwd()

    @property
    def seed(self) -> int:
        if self.seed_override is not None:
            return self.seed_override
        return self.doc.seed if self.doc.seed is not None else DEFAULT_SEED

    @property
    def label(self) -> str:
        return self.doc.name if self.variant == BASE_VARIANT else f"{self.doc.name}[{self.variant}]"

    def variant_names(self) -> list[str]:
        return list(self.doc.variants)

    def with_variant(self, name: str) -> "Scenario":
        if name == BASE_VARIANT:
            return self
        if name not in self.doc.variants:
            raise ScenarioError([f"variants: unknown variant '{name}'"])
        raw = merge_patch(self.raw, self.doc.variants[name])
        raw.pop("variants", None)
        try:
            doc = ScenarioDoc.model_validate(raw)
        except ValidationError as error:
            raise ScenarioError([f"variants.{name}.{message}" for message in _format_validation_error(error)]) from None
        return Scenario(doc, raw, self.path, self.content_hash, name, self.seed_override)

    def with_patch(self, patch: Mapping[str, Any]) -> "Scenario":
        raw = merge_patch(self.raw, dict(patch))
        try:
            doc = ScenarioDoc.model_validate(raw)
        except ValidationError as error:
            raise ScenarioError(_format_validation_error(error)) from None
        return Scenario(doc, raw, self.path, self.content_hash, self.variant, self.seed_override)


def scenario_from_dict(raw: Mapping[str, Any], path: str | Path | None = None, seed: int | None = None) -> Scenario:
    raw = copy.deepcopy(dict(raw))
    try:
        doc = ScenarioDoc.model_validate(raw)
    except ValidationError as error:
        raise ScenarioError(_format_validation_error(error)) from None
    digest = hashlib.sha256(json.dumps(raw, sort_keys=True).encode("utf-8")).hexdigest()
    return Scenario(doc, raw, Path(path) if path is not None else None, digest, seed_override=seed)


def load_scenario(path: str | Path, seed: int | None = None) -> Scenario:
    """Read and schema-check a scenario file; the hash covers the file bytes."""

    path = Path(path).expanduser()
    try:
        content = path.read_bytes()
    except OSError as error:
        raise ScenarioError([f"{path}: {error.strerror or error}"]) from None
    try:
        raw = json.loads(content)
    except json.JSONDecodeError as error:
        raise ScenarioError([f"{path}: invalid JSON at line {error.lineno}: {error.msg}"]) from None
    if not isinstance(raw, dict):
        raise ScenarioError([f"{path}: a scenario must be a JSON object"])
    scenario = scenario_from_dict(raw, path, seed)
    scenario.content_hash = hashlib.sha256(content).hexdigest()
    return scenario


# --- data -------------------------------------------------------------------


def load_data_source(name: str, source: DataSource, scenario: Scenario) -> TimeVector:
    if source.csv is not None:
        return read_timevector_csv(scenario.base_dir / source.csv, unit=source.unit)
    params = {"seed": scenario.seed, **source.params}
    if source.generator == "synthetic_load":
        return generate_synthetic_load(params)
    return generate_price_series(params)


def load_data(scenario: Scenario) -> dict[str, TimeVector]:
    return {name: load_data_source(name, source, scenario) for name, source in scenario.doc.data.items()}


# --- module registry ---------------------------------------------------------


@dataclass
class BuildContext:
    scenario: Scenario
    data: dict[str, TimeVector] = field(default_factory=dict)
    multiplier: int = 1

    def module_period(self, module_id: str) -> int:
        doc = self.scenario.doc
        for sequence in doc.sequences.values():
            if module_id in sequence.modules:
                return sequence.period_multiplier * self.multiplier * doc.engine.base_period
        return doc.engine.base_period

    def plant_block(self, params: Mapping[str, Any]) -> dict[str, Any]:
        return {**self.scenario.doc.plant, **params.get("plant", {})}

    def series(self, name: str) -> TimeVector:
        return self.data[name]


CreateFn = Callable[[str, Mapping[str, str], Mapping[str, Any], BuildContext], SimModule]
SetupFn = Callable[[str, Mapping[str, Any], BuildContext], dict[str, Any]]


def _pass_params(module_id: str, params: Mapping[str, Any], context: BuildContext) -> dict[str, Any]:
    return dict(params)


@dataclass(frozen=True)
class ModuleType:
    key: str
    label: str
    create: CreateFn
    setup_params: SetupFn = _pass_params
    data_refs: Callable[[Mapping[str, Any]], list[str]] = lambda params: []


def _simple(cls) -> CreateFn:
    return lambda module_id, wiring, params, context: cls(module_id, wiring)


def _series_setup(module_id, params, context):
    return {**params, "series": context.series(params["series"])}


def _create_logic(module_id, wiring, params, context):
    if "model" in params:
        graph = parse_logic(params["model"])
    elif "path" in params:
        graph = load_logic(context.scenario.base_dir / params["path"])
    else:
        raise ValueError(f"logic module {module_id} needs a 'model' or 'path' parameter")
    return LogicModule(module_id, wiring, compile_logic(graph))


def _plant_setup(module_id, params, context):
    return {**params, "plant": context.plant_block(params)}


def _create_mpc(module_id, wiring, params, context):
    if "formulator" not in params:
        raise ValueError(f"mpc module {module_id} needs a 'formulator' parameter")
    return MpcModule(module_id, wiring, formulator=params["formulator"])


def _mpc_horizon(params: Mapping[str, Any], context: BuildContext) -> Horizon:
    if "horizon" in params:
        return HorizonBlock.model_validate(params["horizon"]).to_horizon()
    if context.scenario.doc.horizon is not None:
        return context.scenario.doc.horizon.to_horizon()
    return HorizonBlock().to_horizon()


def _mpc_setup(module_id, params, context):
    formulator = get_formulator(params["formulator"])
    refs = {**{name: name for name in formulator.forecasts}, **params.get("forecasts", {})}
    return {
        "formulator": formulator.name,
        "horizon": _mpc_horizon(params, context),
        "forecasts": {name: context.series(ref) for name, ref in refs.items()},
        "wrap": params.get("wrap", True),
        "plant": context.plant_block(params),
        "solver": {**context.scenario.doc.solver, **params.get("solver", {})},
        "lp_dump_dir": params.get("lp_dump_dir"),
        "keep_iterations": params.get("keep_iterations", False),
    }


def _mpc_refs(params: Mapping[str, Any]) -> list[str]:
    try:
        formulator = get_formulator(params.get("formulator", ""))
    except ValueError:
        return []
    refs = {**{name: name for name in formulator.forecasts}, **params.get("forecasts", {})}
    return list(refs.values())


def _create_rbc(cls, build):
    def create(module_id, wiring, params, context):
        module = cls(module_id, wiring)
        plan = build(context.plant_block(params), params.get("rbc"), int(params.get("step", context.module_period(module_id))))
        module._declare_ports(plan)
        return module

    return create


def _rbc_setup(module_id, params, context):
    return {
        **params,
        "plant": context.plant_block(params),
        "step": int(params.get("step", context.module_period(module_id))),
    }


MODULE_TYPES: dict[str, ModuleType] = {
    "series_source": ModuleType(
        "series_source", "Data series player", _simple(SeriesSource), _series_setup, lambda p: [p.get("series", "")]
    ),
    "constant": ModuleType("constant", "Constant source", _simple(ConstantSource)),
    "gain": ModuleType("gain", "Gain", _simple(Gain)),
    "ramp": ModuleType("ramp", "Ramp source", _simple(Ramp)),
    "lag": ModuleType("lag", "First-order lag", _simple(FirstOrderLag)),
    "stop_when": ModuleType("stop_when", "Automatic stop", _simple(StopWhen)),
    "logic": ModuleType("logic", "Logic model", _create_logic),
    "plant_a": ModuleType("plant_a", "Gas + biomass + storage plant", _simple(PlantModuleA), _plant_setup),
    "plant_b": ModuleType("plant_b", "Biomass + heat pump + storage plant", _simple(PlantModuleB), _plant_setup),
    "mpc": ModuleType("mpc", "Rolling-horizon MPC", _create_mpc, _mpc_setup, _mpc_refs),
    "rbc_a": ModuleType("rbc_a", "Rule-based control, plant A", _create_rbc(RbcModuleA, rbc_baseline_a), _rbc_setup),
    "rbc_b": ModuleType("rbc_b", "Rule-based control, plant B", _create_rbc(RbcModuleB, rbc_baseline_b), _rbc_setup),
}


def get_module_type(type_name: str) -> ModuleType:
    try:
        return MODULE_TYPES[type_name]
    except KeyError as error:
        raise ValueError(f"Unsupported module type: {type_name}") from error


# --- validation ---------------------------------------------------------------


def _structure_errors(scenario: Scenario) -> list[str]:
    doc = scenario.doc
    errors = []
    owners: dict[str, list[str]] = {}
    for name, sequence in doc.sequences.items():
        for module_id in sequence.modules:
            owners.setdefault(module_id, []).append(name)
            if module_id not in doc.modules:
                errors.append(f"sequences.{name}: unknown module '{module_id}'")
    for module_id, names in owners.items():
        if len(names) > 1:
            errors.append(f"modules.{module_id}: assigned to several sequences ({', '.join(names)})")
    for module_id, block in doc.modules.items():
        if "." in module_id:
            errors.append(f"modules.{module_id}: module ids must not contain '.'")
        if module_id not in owners:
            errors.append(f"modules.{module_id}: not assigned to any sequence")
        if block.type not in MODULE_TYPES:
            errors.append(f"modules.{module_id}.type: unsupported module type '{block.type}'")
            continue
        for ref in MODULE_TYPES[block.type].data_refs(block.params):
            if ref not in doc.data:
                errors.append(f"modules.{module_id}.params: unknown data source '{ref}'")
    for name, source in doc.data.items():
        if source.csv is not None and not (scenario.base_dir / source.csv).is_file():
            errors.append(f"data.{name}.csv: file not found: {source.csv}")
    if doc.engine.duration % doc.engine.base_period:
        errors.append("engine.duration: must be a whole number of base periods")
    for name in doc.compare:
        if name != BASE_VARIANT and name not in doc.variants:
            errors.append(f"compare: unknown variant '{name}'")
    return errors


def create_modules(scenario: Scenario, context: BuildContext | None = None) -> dict[str, SimModule]:
    context = context or BuildContext(scenario)
    modules = {}
    for module_id, block in scenario.doc.modules.items():
        module_type = get_module_type(block.type)
        modules[module_id] = module_type.create(module_id, block.wiring, block.params, context)
    return modules


def wiring_errors(modules: Mapping[str, SimModule]) -> list[str]:
    """Check every input against the declared outputs of the other modules."""

    produced = {module.output_slot(port.name): port for module in modules.values() for port in module.outputs}
    errors = []
    for module_id, module in modules.items():
        declared = {port.name: port for port in module.inputs}
        for port_name, slot in module.wiring.items():
            if port_name not in declared:
                errors.append(f"modules.{module_id}.wiring.{port_name}: module has no input '{port_name}'")
                continue
            source = produced.get(slot)
            if source is None:
                errors.append(f"modules.{module_id}.wiring.{port_name}: slot '{slot}' does not exist")
            elif declared[port_name].kind == "time-vector" and source.kind == "scalar":
                errors.append(f"modules.{module_id}.wiring.{port_name}: slot '{slot}' is scalar, a time-vector is needed")
        for port in module.inputs:
            if port.name not in module.wiring and port.default is None:
                errors.append(f"modules.{module_id}: input '{port.name}' is not wired")
    return errors


def validate_scenario(scenario: Scenario) -> list[str]:
    """Return every schema, data and wiring problem found; empty means valid."""

    errors = _structure_errors(scenario)
    if errors:
        return errors
    context = BuildContext(scenario)
    try:
        context.data = load_data(scenario)
    except (CosimError, ValueError, OSError) as error:
        errors.append(f"data: {error}")
    try:
        modules = create_modules(scenario, context)
    except (CosimError, ValueError) as error:
        return errors + [f"modules: {error}"]
    errors += wiring_errors(modules)
    probes = set(scenario.doc.probes) | set(scenario.doc.convergence.probes if scenario.doc.convergence else ())
    known = {slot for module in modules.values() for slot in module.output_slots()}
    errors += [f"probes: slot '{slot}' does not exist" for slot in sorted(probes - known)]
    if not errors:
        for module_id, block in scenario.doc.modules.items():
            try:
                get_module_type(block.type).setup_params(module_id, block.params, context)
            except (CosimError, ValueError, KeyError) as error:
                errors.append(f"modules.{module_id}.params: {error}")
    return errors


def check_scenario(scenario: Scenario) -> None:
    errors = validate_scenario(scenario)
    if errors:
        raise ScenarioError(errors)


# --- build --------------------------------------------------------------------


@dataclass
class BuiltScenario:
    scenario: Scenario
    engine: CoSimulation
    modules: dict[str, SimModule]
    data: dict[str, TimeVector]
    t_end: int


def build_cosimulation(
    scenario: Scenario,
    multiplier: int = 1,
    data: Mapping[str, TimeVector] | None = None,
    record: list[str] | None = None,
) -> BuiltScenario:
    """Build the engine for ``scenario`` with every sequence multiplier scaled by ``multiplier``."""

    doc = scenario.doc
    context = BuildContext(scenario, dict(data) if data is not None else load_data(scenario), multiplier)
    modules = create_modules(scenario, context)
    params = {
        module_id: get_module_type(block.type).setup_params(module_id, block.params, context)
        for module_id, block in doc.modules.items()
    }
    sequences = [
        Sequence(name, block.period_multiplier * multiplier, tuple(block.modules)) for name, block in doc.sequences.items()
    ]
    engine = CoSimulation(
        doc.engine.origin,
        doc.engine.base_period,
        sequences,
        modules.values(),
        params=params,
        record=record,
        parallel=doc.engine.parallel and PARALLEL_DISPATCH,
        max_workers=doc.engine.max_workers,
    )
    logger.info("built scenario %s: %d modules, %d sequences", scenario.label, len(modules), len(sequences))
    return BuiltScenario(scenario, engine, modules, context.data, doc.engine.origin + doc.engine.duration)
