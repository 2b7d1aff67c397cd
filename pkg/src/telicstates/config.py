"""
Experiment configuration: JSON documents parsed into frozen dataclasses.

Documents are validated against the schemas shipped in ``schema/`` and every
violation is collected before anything is reported, so a single
`InvalidConfig` lists all offending key paths. Only checks that a schema
cannot express (overlapping regions, bins that do not cover [0, 1], rows that
do not sum to one) happen while the dataclasses are built.
"""

from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple, \
    TypeVar, Union
import hashlib
import json
import logging

from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from .exp_dist import Bin, FeatureSet, Goal, TabularEnvironment, \
    TabularPolicy
from .discrete_backend import DiscreteInstance
from .gaussian_nav import GaussianPolicy, Mode, NavTask, Region, SearchBox
from .info_geom import Base, DivergenceValue
from .exceptions import InvalidConfig, TelicError


logger = logging.getLogger(__name__)

SCHEMA_DIR = Path(__file__).parent / "schema"
CONFIG_SCHEMA = "telicstates/config.schema.json"
INSTANCE_SCHEMA = "telicstates/instance.schema.json"

T = TypeVar("T")


@lru_cache(maxsize=None)
def _registry() -> Registry:
    resources = []
    for name in ("config.schema.json", "instance.schema.json"):
        with open(SCHEMA_DIR / name, "r", encoding="utf-8") as stream:
            contents = json.load(stream)
        resources.append((contents["$id"], Resource.from_contents(contents)))
    return Registry().with_resources(resources)


def schema_errors(document: Any, ref: str = CONFIG_SCHEMA,
                  path: str = "$") -> List[str]:
    """
    Every schema violation in `document`, as ``"<key path>: <message>"``
    lines sorted by key path. `ref` names the (sub)schema to check against
    and `path` is the key path of `document` inside the whole file.
    """

    validator = Draft202012Validator({"$ref": ref}, registry=_registry())
    diagnostics = []
    for error in validator.iter_errors(document):
        where = path + error.json_path[1:]
        if error.validator == "not":
            message = "give either a task or an instance, not both"
        else:
            message = error.message
        diagnostics.append(f"{where}: {message}")
    return sorted(diagnostics)


class _Builder:
    """Constructs dataclasses, recording failures by key path."""

    def __init__(self) -> None:
        self.diagnostics: List[str] = []

    def build(self, path: str, factory: Callable[..., T], *args: Any,
              **kwargs: Any) -> Optional[T]:
        try:
            return factory(*args, **kwargs)
        except (TelicError, ValueError, TypeError) as error:
            self.diagnostics.append(f"{path}: {error}")
            return None


@dataclass(frozen=True)
class SimulateOptions:
    policies: Tuple[GaussianPolicy, ...] = ()
    trajectories: int = 500
    columns: int = 3


@dataclass(frozen=True)
class Shift:
    label: str
    center: float


@dataclass(frozen=True)
class PhaseOptions:
    mu_range: Optional[Tuple[float, float]] = None
    sigma_range: Optional[Tuple[float, float]] = None
    resolution: int = 200
    panels: str = "single"
    shift: Optional[Shift] = None
    levels: Optional[Tuple[float, ...]] = None


@dataclass(frozen=True)
class CurveOptions:
    budgets: Tuple[float, ...] = ()
    epsilons: Tuple[float, ...] = ()
    references: Tuple[GaussianPolicy, ...] = ()


@dataclass(frozen=True)
class RefineOptions:
    max_rounds: int = 8
    epsilon: Optional[float] = None


@dataclass(frozen=True)
class SanovOptions:
    state: Optional[str] = None
    sample_sizes: Tuple[int, ...] = ()
    trials: int = 100000
    importance: bool = False


@dataclass(frozen=True)
class GradientOptions:
    state: Optional[str] = None
    theta: Tuple[float, ...] = (0.5,)
    eta: float = 0.05
    iterations: int = 50
    tolerance: float = 0.0


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Purpose:

        Everything a command needs: the problem (a navigation task or a
        discrete instance), the per-command option blocks and the run-level
        settings that flags may override.

    Structure:

        `raw` keeps the validated JSON document; the config hash recorded
        in run manifests is computed from it.
    """

    raw: Mapping[str, Any] = field(repr=False, compare=False)
    seed: int = 0
    base: Base = Base.NATS
    threads: int = 1
    output: Optional[str] = None
    task: Optional[NavTask] = None
    instance: Optional[DiscreteInstance] = None
    instance_delta: Optional[DivergenceValue] = None
    simulate: SimulateOptions = SimulateOptions()
    phase: PhaseOptions = PhaseOptions()
    curves: CurveOptions = CurveOptions()
    refine: RefineOptions = RefineOptions()
    sanov: SanovOptions = SanovOptions()
    gradient: GradientOptions = GradientOptions()

    @property
    def config_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True,
                               separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_overrides(self, seed: Optional[int] = None,
                       base: Optional[str] = None,
                       threads: Optional[int] = None,
                       output: Optional[str] = None) -> "ExperimentConfig":
        """
        Re-read the document with flag values in place of its own. Thread
        count and output directory stay out of the hashed document.
        """

        raw = dict(self.raw)
        for key, value in (("seed", seed), ("base", base)):
            if value is not None:
                raw[key] = value
        config = parse_config(raw)

        if threads is not None:
            if threads < 1:
                raise InvalidConfig([f"--threads: {threads} is below 1"])
            config = replace(config, threads=threads)
        if output is not None:
            config = replace(config, output=output)
        return config


def _pair(value: Any) -> Tuple[float, float]:
    return float(value[0]), float(value[1])


def _policy(builder: _Builder, value: Any, path: str) \
        -> Optional[GaussianPolicy]:
    if isinstance(value, list):
        mu, sigma = value
    else:
        mu, sigma = value["mu"], value["sigma"]
    return builder.build(path, GaussianPolicy, float(mu), float(sigma))


def _policies(builder: _Builder, values: List[Any],
              path: str) -> Tuple[GaussianPolicy, ...]:
    found = [_policy(builder, item, f"{path}[{i}]")
             for i, item in enumerate(values)]
    return tuple(p for p in found if p is not None)


def _build_task(builder: _Builder, data: Mapping[str, Any], base: Base,
                path: str) -> Optional[NavTask]:
    regions: List[Region] = []
    for i, item in enumerate(data["regions"]):
        where = f"{path}.regions[{i}]"
        anchor = _policy(builder, item["anchor"], f"{where}.anchor") \
            if "anchor" in item else None
        region = builder.build(where, Region, float(item["center"]),
                               float(item["radius"]), item["label"], anchor)
        if region is not None:
            regions.append(region)

    default = _policy(builder, data.get("default", [0.0, 1.0]),
                      f"{path}.default")
    box_data = data.get("box", {})
    fallback = SearchBox()
    box = builder.build(
        f"{path}.box", SearchBox,
        _pair(box_data["mu"]) if "mu" in box_data else fallback.mu,
        _pair(box_data["sigma"]) if "sigma" in box_data else fallback.sigma,
        box_data.get("resolution", fallback.resolution))

    delta = builder.build(f"{path}.delta", DivergenceValue,
                          float(data.get("delta", 1.0)), base)

    if builder.diagnostics or default is None or box is None or \
       delta is None:
        return None
    return builder.build(path, NavTask, horizon=data["horizon"],
                         regions=tuple(regions),
                         epsilon=float(data["epsilon"]), default=default,
                         delta=delta,
                         mode=Mode(data.get("mode", "accumulate")), box=box)


def _build_instance(builder: _Builder, data: Mapping[str, Any], base: Base,
                    path: str) \
        -> Tuple[Optional[DiscreteInstance], Optional[DivergenceValue]]:
    features = builder.build(f"{path}.features", FeatureSet.parse,
                             data["features"])
    bins = tuple(Bin(float(b["lo"]), float(b["hi"]), b["label"])
                 for b in data["bins"])
    goal = builder.build(f"{path}.bins", Goal, features,
                         float(data["epsilon"]), bins) \
        if features is not None else None
    environment = builder.build(f"{path}.environment", TabularEnvironment,
                                tuple(data["observations"]),
                                data["environment"], data["horizon"])
    policy = builder.build(f"{path}.policy", TabularPolicy,
                           tuple(data["actions"]), data["policy"])

    delta = builder.build(f"{path}.delta", DivergenceValue,
                          float(data["delta"]), base)

    if goal is None or environment is None or policy is None or \
       delta is None:
        return None, None
    instance = DiscreteInstance(policy, environment, data["horizon"], goal)
    return instance, delta


def parse_task(value: Any, base: Base = Base.NATS,
               path: str = "task") -> NavTask:
    """Validate and build a navigation task on its own."""

    diagnostics = schema_errors(value, f"{CONFIG_SCHEMA}#/$defs/task", path)
    if diagnostics:
        raise InvalidConfig(diagnostics)
    builder = _Builder()
    task = _build_task(builder, value, base, path)
    if task is None:
        raise InvalidConfig(builder.diagnostics)
    return task


def parse_instance(value: Any, base: Base = Base.NATS,
                   path: str = "instance") \
        -> Tuple[DiscreteInstance, DivergenceValue]:
    """Validate and build a discrete instance and its budget on their own."""

    diagnostics = schema_errors(value, INSTANCE_SCHEMA, path)
    if diagnostics:
        raise InvalidConfig(diagnostics)
    builder = _Builder()
    instance, delta = _build_instance(builder, value, base, path)
    if instance is None or delta is None:
        raise InvalidConfig(builder.diagnostics)
    return instance, delta


def parse_config(data: Any) -> ExperimentConfig:
    diagnostics = schema_errors(data)
    if diagnostics:
        raise InvalidConfig(diagnostics)

    builder = _Builder()
    base = Base(data.get("base", "nats"))
    task = _build_task(builder, data["task"], base, "$.task") \
        if "task" in data else None
    instance, instance_delta = \
        _build_instance(builder, data["instance"], base, "$.instance") \
        if "instance" in data else (None, None)

    simulate = data.get("simulate", {})
    phase = data.get("phase", {})
    curves = data.get("curves", {})
    refine = data.get("refine", {})
    sanov = data.get("sanov", {})
    gradient = data.get("gradient", {})

    shift = Shift(phase["shift"]["label"], float(phase["shift"]["center"])) \
        if "shift" in phase else None

    options = dict(
        simulate=SimulateOptions(
            policies=_policies(builder, simulate.get("policies", []),
                               "$.simulate.policies"),
            trajectories=simulate.get("trajectories", 500),
            columns=simulate.get("columns", 3)),
        phase=PhaseOptions(
            mu_range=_pair(phase["mu_range"])
            if "mu_range" in phase else None,
            sigma_range=_pair(phase["sigma_range"])
            if "sigma_range" in phase else None,
            resolution=phase.get("resolution", 200),
            panels=phase.get("panels", "single"),
            shift=shift,
            levels=tuple(float(x) for x in phase["levels"])
            if "levels" in phase else None),
        curves=CurveOptions(
            budgets=tuple(float(x) for x in curves.get("budgets", [])),
            epsilons=tuple(float(x) for x in curves.get("epsilons", [])),
            references=_policies(builder, curves.get("references", []),
                                 "$.curves.references")),
        refine=RefineOptions(
            max_rounds=refine.get("max_rounds", 8),
            epsilon=float(refine["epsilon"])
            if "epsilon" in refine else None),
        sanov=SanovOptions(
            state=sanov.get("state"),
            sample_sizes=tuple(int(n) for n in sanov.get("sample_sizes", [])),
            trials=sanov.get("trials", 100000),
            importance=sanov.get("importance", False)),
        gradient=GradientOptions(
            state=gradient.get("state"),
            theta=tuple(float(x) for x in gradient.get("theta", [0.5])),
            eta=float(gradient.get("eta", 0.05)),
            iterations=gradient.get("iterations", 50),
            tolerance=float(gradient.get("tolerance", 0.0))),
    )

    if builder.diagnostics:
        raise InvalidConfig(builder.diagnostics)

    return ExperimentConfig(raw=dict(data), seed=data.get("seed", 0),
                            base=base, threads=data.get("threads", 1),
                            output=data.get("output"), task=task,
                            instance=instance,
                            instance_delta=instance_delta, **options)


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as stream:
            data = json.load(stream)
    except json.JSONDecodeError as error:
        raise InvalidConfig([f"{path}: not valid JSON ({error})"]) from None

    config = parse_config(data)
    logger.info("Loaded configuration %s (%s).", path, config.config_hash[:12])
    return config


def task_to_dict(task: NavTask) -> Dict[str, Any]:
    regions = []
    for region in task.regions:
        entry: Dict[str, Any] = {"label": region.label,
                                 "center": region.center,
                                 "radius": region.radius}
        if region.anchor is not None:
            entry["anchor"] = region.anchor.as_dict()
        regions.append(entry)
    return {
        "horizon": task.horizon,
        "mode": task.mode.value,
        "epsilon": task.epsilon,
        "default": task.default.as_dict(),
        "delta": task.delta.value,
        "regions": regions,
        "box": {"mu": list(task.box.mu), "sigma": list(task.box.sigma),
                "resolution": task.box.resolution},
    }


def goal_to_dict(goal: Goal) -> Dict[str, Any]:
    members = goal.features.members
    if members is None:
        raise InvalidConfig(["goal.features: predicate-only feature sets "
                             "cannot be written out"])
    return {
        "features": sorted(h.key for h in members),
        "epsilon": goal.epsilon,
        "bins": [{"label": b.label, "lo": b.lo, "hi": b.hi}
                 for b in goal.bins],
    }
