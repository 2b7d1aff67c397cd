"""
Command-line front end.

Every command reads an experiment configuration, writes its tables, JSON
documents and SVG figures into the output directory together with a
``manifest.json`` and exits with 0 on success, 2 on a negative domain
result (not controllable, refinement failed, non-monotone curve) and 1 on
usage, configuration or I/O errors.
"""

from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple
import argparse
import json
import logging
import math
import sys
import time

import numpy as np

from .config import ExperimentConfig, load_config, task_to_dict, \
    goal_to_dict
from .discrete_backend import DiscreteBackend
from .exp_dist import Goal
from .gaussian_nav import GaussianPolicy, NavTask, ComplexityCurves, \
    simulate_trajectories, phase_plot_grid, project_policy_to_state, \
    nearest_policy_within_budget, split_state_gaussian, classify_policy, \
    goal_complexity_curve, granularity_complexity_curve
from .info_geom import Base, DivergenceValue, sanov_rate_estimate, \
    bernoulli_family, ParametricPolicy, descend
from .nav_backend import NavigationBackend
from .records import Recorder, RunManifest
from .svg import PhasePanel, render_trajectory_tiles, render_phase_panels, \
    render_curves
from .telic_control import Backend, find_reachable_states, refine_goal, \
    report_to_json
from .version import __version__
from .exceptions import InvalidConfig, TelicError, StateNotFound, \
    NoSplitNeeded, RefinementDidNotConverge, SplitCollapsed, SplitCollision


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NEGATIVE = 2

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"
DEFAULT_OUTPUT = "telicstates-out"

Command = Callable[[ExperimentConfig, Recorder], int]


def _require_task(config: ExperimentConfig, command: str) -> NavTask:
    if config.task is None:
        raise InvalidConfig([f"$.task: required by {command}"])
    return config.task


def _in_base(nats: float, base: Base) -> float:
    if math.isnan(nats):
        return nats
    return DivergenceValue.from_nats(nats, base).value


def _seeds(seed: int, count: int) -> List[int]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0])
            for child in children]


def cmd_simulate(config: ExperimentConfig, recorder: Recorder) -> int:
    task = _require_task(config, "simulate")
    options = config.simulate
    policies = options.policies or (task.default,)

    rows: List[List[Any]] = []
    tiles = []
    for index, (policy, seed) in enumerate(
            zip(policies, _seeds(config.seed, len(policies)))):
        walks = simulate_trajectories(policy, task, options.trajectories,
                                      seed)
        tiles.append((policy, walks))
        for n, (positions, label) in enumerate(zip(walks.positions,
                                                    walks.labels)):
            rows.append([index, policy.mu, policy.sigma, n, label] +
                        [float(x) for x in positions])

    header = ["policy", "mu", "sigma", "trajectory", "terminal_state"] + \
        [f"x_{t}" for t in range(task.horizon + 1)]
    recorder.table("trajectories.csv", header, rows)
    recorder.svg("trajectories.svg",
                 render_trajectory_tiles(tiles, task, options.columns))
    print(f"Simulated {options.trajectories} trajectories for "
          f"{len(policies)} policies.")
    return EXIT_OK


def _phase_panel(title: str, task: NavTask, config: ExperimentConfig,
                 ref: GaussianPolicy, markers: Dict[str, GaussianPolicy]) \
        -> Tuple[PhasePanel, Dict[str, Any]]:
    options = config.phase
    grid = phase_plot_grid(task, options.mu_range, options.sigma_range,
                           options.resolution, ref=ref,
                           levels=options.levels)

    projections: Dict[str, Any] = {}
    markers = dict(markers)
    for region in task.regions:
        try:
            target, cost = project_policy_to_state(ref, region.label, task)
        except StateNotFound:
            projections[region.label] = None
            continue
        markers[f"P*({region.label})"] = target
        entry: Dict[str, Any] = {"policy": target.as_dict(),
                                 "complexity": _in_base(cost.nats,
                                                        config.base),
                                 "reachable": cost.nats <= task.delta.nats}
        if not entry["reachable"]:
            nearest = nearest_policy_within_budget(ref, region.label, task)
            markers[f"pi_M({region.label})"] = nearest
            entry["nearest_within_budget"] = nearest.as_dict()
        projections[region.label] = entry

    summary = {
        "title": title,
        "task": task_to_dict(task),
        "reference": ref.as_dict(),
        "reference_state": classify_policy(ref, task),
        "projections": projections,
        "contours": {repr(level): lines
                     for level, lines in grid.contours.items()},
    }
    return PhasePanel(title, grid, markers), summary


def _grid_rows(panel: PhasePanel, base: Base) -> List[List[Any]]:
    regions = list(panel.grid.delta_p)
    rows = []
    for cell in panel.grid.cells():
        rows.append([cell.mu, cell.sigma, cell.label,
                     _in_base(cell.complexity, base)] +
                    [cell.delta_p[label] for label in regions])
    return rows


def cmd_phase(config: ExperimentConfig, recorder: Recorder) -> int:
    task = _require_task(config, "phase")
    options = config.phase

    stages: List[Tuple[str, NavTask, GaussianPolicy]] = [
        ("before shift", task, task.default)]
    if options.panels == "sequence":
        if options.shift is None:
            raise InvalidConfig(["$.phase.shift: required by the sequence "
                                 "panels"])
        label = options.shift.label
        shifted = task.shift_region(label, options.shift.center)
        stages.append(("after shift", shifted, shifted.default))
        try:
            split = split_state_gaussian(shifted, label)
        except NoSplitNeeded as error:
            logger.warning("No split after the shift: %s", error)
        else:
            pi_m = nearest_policy_within_budget(shifted.default, label,
                                                shifted)
            stages.append(("after split", split, split.default))
            stages.append(("after default update", split.with_default(pi_m),
                           pi_m))

    panels = []
    summaries = []
    for index, (title, stage, ref) in enumerate(stages):
        panel, summary = _phase_panel(title, stage, config, ref,
                                      {"pi_0": ref})
        panels.append(panel)
        summaries.append(summary)
        header = ["mu", "sigma", "state", "complexity"] + \
            [f"delta_p_{label}" for label in panel.grid.delta_p]
        recorder.table(f"phase_grid_{index}.csv", header,
                       _grid_rows(panel, config.base))

    recorder.json("phase.json", {"base": config.base.value,
                                 "panels": summaries})
    recorder.svg("phase.svg", render_phase_panels(panels))
    print(f"Rendered {len(panels)} phase panel(s).")
    return EXIT_OK


def _problem(config: ExperimentConfig, command: str) \
        -> Tuple[Backend[Any, Any], Any, Any, DivergenceValue,
                 Dict[str, Any]]:
    if config.task is not None:
        task = config.task
        return (NavigationBackend(), task.default, task, task.delta,
                {"task": task_to_dict(task)})
    if config.instance is not None and config.instance_delta is not None:
        instance = config.instance
        return (DiscreteBackend(), instance.default_distribution(),
                instance.goal, config.instance_delta,
                {"goal": goal_to_dict(instance.goal)})
    raise InvalidConfig([f"$: {command} needs a task or an instance"])


def _describe_goal(goal: Any) -> Dict[str, Any]:
    if isinstance(goal, NavTask):
        return task_to_dict(goal)
    if isinstance(goal, Goal):
        return goal_to_dict(goal)
    raise TypeError(f"Unexpected goal type {type(goal).__name__}.")


def cmd_reach(config: ExperimentConfig, recorder: Recorder) -> int:
    backend, pi0, goal, delta, problem = _problem(config, "reach")
    report = find_reachable_states(pi0, goal, delta, backend)
    recorder.json("reach.json", {**problem, "base": config.base.value,
                                 "delta": delta.to(config.base).value,
                                 "report": report_to_json(report, backend)})

    print(f"Reachable: {', '.join(report.reachable)}")
    print(f"Unreachable: {', '.join(report.unreachable) or '-'}")
    return EXIT_OK if report.controllable else EXIT_NEGATIVE


def cmd_refine(config: ExperimentConfig, recorder: Recorder) -> int:
    backend, pi0, goal, delta, problem = _problem(config, "refine")
    epsilon = config.refine.epsilon
    if epsilon is None:
        epsilon = goal.epsilon

    try:
        refined = refine_goal(pi0, goal, delta, epsilon, backend,
                              config.refine.max_rounds)
    except (RefinementDidNotConverge, SplitCollapsed, SplitCollision) \
            as error:
        logger.error("%s", error)
        payload: Dict[str, Any] = {**problem, "converged": False,
                                   "reason": str(error)}
        if isinstance(error, RefinementDidNotConverge) and \
           error.report is not None:
            payload["report"] = report_to_json(error.report, backend)
        recorder.json("refine.json", payload)
        return EXIT_NEGATIVE

    report = find_reachable_states(pi0, refined, delta, backend)
    recorder.json("refine.json", {**problem, "converged": True,
                                  "refined": _describe_goal(refined),
                                  "report": report_to_json(report, backend)})
    states = backend.states(refined)
    print(f"Refined goal has {len(states)} states: {', '.join(states)}")
    return EXIT_OK


def _curve_rows(curves: ComplexityCurves) -> List[List[Any]]:
    labels = list(curves.values)
    return [[x] + [curves.values[label][i] for label in labels]
            for i, x in enumerate(curves.x)]


def cmd_curves(config: ExperimentConfig, recorder: Recorder) -> int:
    task = _require_task(config, "curves")
    options = config.curves
    if not options.budgets and not options.epsilons:
        raise InvalidConfig(["$.curves: give budgets, epsilons or both"])
    references = options.references or (task.default,)
    delta = task.delta.value

    violations: List[str] = []
    for index, ref in enumerate(references):
        name = f"mu={ref.mu:g}, sigma={ref.sigma:g}"
        if options.budgets:
            curves = goal_complexity_curve(task, ref, options.budgets)
            violations.extend(curves.violations())
            recorder.table(f"goal_complexity_{index}.csv",
                           ["budget"] + list(curves.values),
                           _curve_rows(curves))
            recorder.svg(f"goal_complexity_{index}.svg", render_curves(
                curves, f"complexity budget ({task.delta.base.value})",
                "best advantage toward state", name,
                vertical=delta, horizontal=task.epsilon))
        if options.epsilons:
            curves = granularity_complexity_curve(task, ref,
                                                  options.epsilons)
            violations.extend(curves.violations())
            recorder.table(f"granularity_complexity_{index}.csv",
                           ["neg_log_epsilon"] + list(curves.values),
                           _curve_rows(curves))
            recorder.svg(f"granularity_complexity_{index}.svg",
                         render_curves(
                             curves, "-log(epsilon)",
                             f"required complexity "
                             f"({task.delta.base.value})", name,
                             vertical=-float(np.log(task.epsilon)),
                             horizontal=delta))

    if violations:
        for violation in violations:
            logger.error("Curve is not monotone: %s", violation)
        return EXIT_NEGATIVE
    print(f"Wrote curves for {len(references)} reference policies.")
    return EXIT_OK


def _instance(config: ExperimentConfig, command: str) -> Any:
    if config.instance is None:
        raise InvalidConfig([f"$.instance: required by {command}"])
    return config.instance


def cmd_sanov(config: ExperimentConfig, recorder: Recorder) -> int:
    instance = _instance(config, "sanov")
    options = config.sanov
    if not options.sample_sizes:
        raise InvalidConfig(["$.sanov.sample_sizes: required by sanov"])

    goal = instance.goal
    label = options.state or goal.labels[-1]
    state = goal.state_by_label(label)
    estimate = sanov_rate_estimate(instance.default_distribution(), state,
                                   options.sample_sizes, options.trials,
                                   config.seed, config.threads,
                                   options.importance)

    recorder.table("sanov.csv", ["N", "hits", "trials", "rate_estimate",
                                 "telic_distance"],
                   [[row.n, row.hits, row.trials,
                     _in_base(row.rate_estimate, config.base),
                     _in_base(row.telic_distance, config.base)]
                    for row in estimate.rows])
    recorder.json("sanov.json", {
        "state": label,
        "default_state": instance.default_state().label,
        "base": config.base.value,
        "importance": options.importance,
        "telic_distance": estimate.telic_distance.to(config.base).value,
        "decay_rate": _in_base(estimate.decay_rate, config.base),
        "omitted": list(estimate.omitted),
    })
    print(f"Fitted decay rate {estimate.decay_rate:.6g} nats against "
          f"telic distance {estimate.telic_distance.nats:.6g} nats.")
    return EXIT_OK


def cmd_gradient(config: ExperimentConfig, recorder: Recorder) -> int:
    instance = _instance(config, "gradient")
    options = config.gradient
    if instance.horizon != 1 or len(instance.policy.actions) != 2 or \
       len(options.theta) != 1:
        raise InvalidConfig(["$.gradient: descent runs on one-step "
                             "instances with two actions and one "
                             "parameter"])

    generator = bernoulli_family(instance.environment.observations[0],
                                 (instance.policy.actions[0],
                                  instance.policy.actions[1]))
    goal = instance.goal
    state = goal.state_by_label(options.state or goal.labels[-1])
    trace = descend(ParametricPolicy(options.theta, generator), state,
                    options.eta, options.iterations, options.tolerance)

    recorder.table("gradient.csv", ["iteration", "theta", "objective"],
                   [[step.iteration, step.theta[0],
                     _in_base(step.objective, config.base)]
                    for step in trace])
    print(f"Objective {trace[0].objective:.6g} -> {trace[-1].objective:.6g}"
          f" nats in {len(trace) - 1} steps.")
    return EXIT_OK


COMMANDS: Dict[str, Tuple[Command, str]] = {
    "simulate": (cmd_simulate, "Simulate random-walk trajectories"),
    "phase": (cmd_phase, "Policy-space phase plots"),
    "reach": (cmd_reach, "Find reachable telic states"),
    "refine": (cmd_refine, "Refine the goal until it is controllable"),
    "curves": (cmd_curves, "Goal- and granularity-complexity curves"),
    "sanov": (cmd_sanov, "Monte Carlo estimate of the telic distance"),
    "gradient": (cmd_gradient, "Policy-gradient descent toward a state"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="telicstates",
        description="Telic state representations for complexity-bounded "
                    "agents.")
    parser.add_argument("--version", action="version",
                        version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, (command, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path,
                       help="Experiment configuration (JSON).")
        p.add_argument("--out", type=str, default=None,
                       help="Output directory.")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--base", choices=[b.value for b in Base],
                       default=None, help="Unit of complexity values.")
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("-v", "--verbose", action="count", default=0)
        p.set_defaults(func=command)

    return parser


def configure_logging(verbosity: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity,
                                                      logging.DEBUG)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr,
                        force=True)


def run(args: argparse.Namespace) -> int:
    config = load_config(args.config).with_overrides(
        seed=args.seed, base=args.base, threads=args.threads,
        output=args.out)
    directory = Path(config.output or DEFAULT_OUTPUT)

    canonical = json.dumps(config.raw, sort_keys=True, separators=(",", ":"))
    recorder = Recorder(
        directory,
        RunManifest(args.command, config.config_hash, config.seed),
        {"tool": "telicstates", "version": __version__,
         "command": args.command, "seed": config.seed,
         "config_hash": config.config_hash, "config": canonical})

    started = time.perf_counter()
    status: int = args.func(config, recorder)
    recorder.close(time.perf_counter() - started)
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as error:
        return EXIT_OK if error.code == 0 else EXIT_ERROR
    configure_logging(args.verbose)

    try:
        return run(args)
    except InvalidConfig as error:
        print(error, file=sys.stderr)
        return EXIT_ERROR
    except OSError as error:
        logger.error("I/O error: %s", error)
        return EXIT_ERROR
    except TelicError as error:
        logger.error("%s: %s", type(error).__name__, error)
        return EXIT_ERROR
