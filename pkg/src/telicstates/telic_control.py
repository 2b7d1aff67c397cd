"""
Reachability of telic states under complexity-bounded policy updates, the
telic-controllability predicate and goal refinement by state splitting.

The algorithms are written once against the `Backend` protocol. A backend
owns the policy type `P` and the goal type `G`; states are addressed by
their labels.
"""

from dataclasses import dataclass, field
from typing import Dict, Generic, List, Mapping, Optional, Protocol, \
    Sequence, Tuple, TypeVar, Union
import logging
import math

from scipy.optimize import brentq

from .info_geom import DivergenceValue
from .exceptions import TelicError, NoSplitNeeded, BisectionFailure, \
    RefinementDidNotConverge, UnreachableState, SplitCollapsed


logger = logging.getLogger(__name__)

P = TypeVar("P")
G = TypeVar("G")

COMPLEXITY_TOLERANCE = 1e-9
BISECTION_TOLERANCE = 1e-13
MAX_BISECTION_ITERATIONS = 200

Budget = Union[float, DivergenceValue]


@dataclass(frozen=True)
class Projection(Generic[P]):
    target: Optional[P]
    divergence: float


class Backend(Protocol[P, G]):
    """
    What the reachability and refinement algorithms need from a setting.

    Divergences and complexities are in nats. `project` reports an empty
    or absolutely-continuity-violating state as an infinite divergence with
    no target instead of raising.
    """

    def states(self, goal: G) -> Sequence[str]: ...

    def classify(self, goal: G, policy: P) -> str: ...

    def project(self, goal: G, policy: P, label: str) -> Projection[P]: ...

    def improve(self, goal: G, policy: P, label: str,
                delta: float) -> P: ...

    def complexity(self, policy: P, reference: P) -> float: ...

    def interpolate(self, start: P, end: P, t: float) -> P: ...

    def make_intermediate_state(self, goal: G, target: str, origin: P,
                                midpoint: P,
                                epsilon: float) -> Tuple[str, G]: ...

    def describe(self, policy: P) -> Dict[str, object]: ...


@dataclass(frozen=True)
class ChainLink(Generic[P]):
    policy: P
    label: str
    step_complexity: float


@dataclass(frozen=True)
class ReachabilityReport(Generic[P]):
    states: Tuple[str, ...]
    reachable: Tuple[str, ...]
    unreachable: Tuple[str, ...]
    chains: Mapping[str, Tuple[ChainLink[P], ...]]
    delta: float
    diagnostics: Mapping[str, str] = field(default_factory=dict)

    @property
    def controllable(self) -> bool:
        return not self.unreachable

    def chain_length(self, label: str) -> int:
        return len(self.chains[label]) - 1


def _nats(delta: Budget) -> float:
    value = delta.nats if isinstance(delta, DivergenceValue) \
        else float(delta)
    if math.isnan(value) or value < 0:
        raise ValueError(f"Complexity capacity {delta!r} must be >= 0.")
    return value


def find_reachable_states(pi0: P, g: G, delta: Budget,
                          backend: Backend[P, G]) -> ReachabilityReport[P]:
    budget = _nats(delta)
    labels = list(backend.states(g))
    home = backend.classify(g, pi0)
    chains: Dict[str, Tuple[ChainLink[P], ...]] = {
        home: (ChainLink(pi0, home, 0.0),)}
    diagnostics: Dict[str, str] = {}

    def recurse(policy: P, chain: Tuple[ChainLink[P], ...]) -> None:
        pending = [label for label in labels if label not in chains]
        ranked = sorted(pending, key=lambda label: (
            backend.project(g, policy, label).divergence, label))

        found = []
        for label in ranked:
            if label in chains:
                continue

            try:
                candidate = backend.improve(g, policy, label, budget)
            except TelicError as error:
                logger.warning("Optimization toward %r failed: %s",
                               label, error)
                diagnostics[label] = str(error)
                continue

            reached = backend.classify(g, candidate)
            if reached in chains:
                continue

            step = backend.complexity(candidate, policy)
            if step > budget + COMPLEXITY_TOLERANCE:
                diagnostics[label] = (f"step complexity {step!r} exceeds "
                                      f"the capacity {budget!r}")
                continue

            chains[reached] = chain + (ChainLink(candidate, reached, step),)
            logger.debug("Reached %r in %d steps.", reached,
                         len(chains[reached]) - 1)
            found.append(reached)

        for reached in found:
            recurse(chains[reached][-1].policy, chains[reached])

    recurse(pi0, chains[home])

    reachable = tuple(chains)
    unreachable = tuple(label for label in labels if label not in chains)
    logger.info("Reachable states %s; unreachable %s.",
                list(reachable), list(unreachable))
    return ReachabilityReport(
        states=tuple(labels),
        reachable=reachable,
        unreachable=unreachable,
        chains=chains,
        delta=budget,
        diagnostics={label: diagnostics[label] for label in unreachable
                     if label in diagnostics})


def is_telic_controllable(pi0: P, g: G, delta: Budget,
                          backend: Backend[P, G]) \
        -> Tuple[bool, ReachabilityReport[P]]:
    report = find_reachable_states(pi0, g, delta, backend)
    return report.controllable, report


def verify_report(report: ReachabilityReport[P], g: G,
                  backend: Backend[P, G]) -> List[str]:
    """
    Check every chain step against the two conjuncts of
    telic-controllability. Returns the violations found.
    """

    violations = []
    for label, chain in report.chains.items():
        if chain[-1].label != label:
            violations.append(f"{label}: chain ends in {chain[-1].label}")
        for t, link in enumerate(chain):
            if backend.classify(g, link.policy) != link.label:
                violations.append(f"{label}: step {t} does not classify "
                                  f"into {link.label}")
            if t == 0:
                continue
            step = backend.complexity(link.policy, chain[t - 1].policy)
            if step > report.delta + COMPLEXITY_TOLERANCE:
                violations.append(f"{label}: step {t} has complexity {step}")
    return violations


@dataclass(frozen=True)
class SplitResult(Generic[P, G]):
    t_star: float
    midpoint: P
    new_state: Optional[str]
    updated_goal: G


def split_unreachable_state(pi0: P, g: G, s: str, delta: Budget,
                            epsilon: float,
                            backend: Backend[P, G]) -> SplitResult[P, G]:
    budget = _nats(delta)
    if backend.classify(g, pi0) == s:
        raise NoSplitNeeded(f"Policy already lies in {s!r}.")

    projection = backend.project(g, pi0, s)
    if projection.target is None or not math.isfinite(projection.divergence):
        raise UnreachableState(f"State {s!r} has no information projection.")

    target = projection.target
    if projection.divergence <= budget:
        return SplitResult(1.0, target, None, g)

    def slack(t: float) -> float:
        return backend.complexity(backend.interpolate(pi0, target, t),
                                  pi0) - budget

    root, result = brentq(slack, 0.0, 1.0, xtol=BISECTION_TOLERANCE,
                          maxiter=MAX_BISECTION_ITERATIONS,
                          full_output=True, disp=False)
    if not result.converged:
        raise BisectionFailure(f"Bisection toward {s!r} did not converge: "
                               f"{result.flag}.")
    inside = max(0.0, float(root) - 2.0 * BISECTION_TOLERANCE)

    midpoint = backend.interpolate(pi0, target, inside)
    label, goal = backend.make_intermediate_state(g, s, pi0, midpoint,
                                                  epsilon)
    logger.info("Inserted %r toward %r at t*=%.9f.", label, s, inside)
    return SplitResult(inside, midpoint, label, goal)


def _frontier(report: ReachabilityReport[P], g: G, label: str,
              backend: Backend[P, G]) -> P:
    endpoints = [report.chains[reached][-1].policy
                 for reached in report.reachable]
    ranked = sorted(range(len(endpoints)), key=lambda i: (
        backend.project(g, endpoints[i], label).divergence, i))
    return endpoints[ranked[0]]


def refine_goal(pi0: P, g: G, delta: Budget, epsilon: float,
                backend: Backend[P, G], max_rounds: int = 8) -> G:
    """
    Split unreachable states until the goal is telic-controllable.

    Each round recomputes the reachable set and splits every unreachable
    state once, starting from the reached policy nearest to it. A split
    never moves `pi0` out of its own state. Raises
    `RefinementDidNotConverge` with the last report when `max_rounds`
    rounds of splitting are not enough.
    """

    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1.")

    goal = g
    home = backend.classify(g, pi0)
    for round_number in range(1, max_rounds + 1):
        report = find_reachable_states(pi0, goal, delta, backend)
        if report.controllable:
            return goal

        logger.info("Refinement round %d: splitting %s.",
                    round_number, list(report.unreachable))
        ranked = sorted(report.unreachable, key=lambda label: (
            backend.project(goal, pi0, label).divergence, label))
        for label in ranked:
            if label not in backend.states(goal):
                continue
            origin = _frontier(report, goal, label, backend)
            split = split_unreachable_state(origin, goal, label, delta,
                                            epsilon, backend)
            if split.new_state is None:
                logger.warning("State %r is within budget of the frontier "
                               "but was not reached.", label)
                continue
            if backend.classify(split.updated_goal, pi0) != home:
                raise SplitCollapsed(
                    f"Splitting {label!r} would move the default policy "
                    f"out of {home!r}.")
            goal = split.updated_goal

    report = find_reachable_states(pi0, goal, delta, backend)
    if report.controllable:
        return goal

    raise RefinementDidNotConverge(
        f"Refinement did not converge in {max_rounds} rounds; unreachable "
        f"{list(report.unreachable)}.", report)


def report_to_json(report: ReachabilityReport[P],
                   backend: Backend[P, G]) -> Dict[str, object]:
    states = []
    for label in report.states:
        entry: Dict[str, object] = {
            "label": label,
            "reachable": label in report.chains,
        }
        if label in report.chains:
            entry["chain"] = [
                {"policy": backend.describe(link.policy),
                 "state": link.label,
                 "step_complexity": link.step_complexity}
                for link in report.chains[label]]
        if label in report.diagnostics:
            entry["diagnostic"] = report.diagnostics[label]
        states.append(entry)

    return {
        "delta_nats": report.delta,
        "controllable": report.controllable,
        "reachable": list(report.reachable),
        "unreachable": list(report.unreachable),
        "states": states,
    }
