"""
One-dimensional random-walk navigation with Gaussian step policies.

An agent starts at x=0 and takes `horizon` steps x <- x + eta with
eta ~ N(mu, sigma). Target regions are intervals of the line; a policy
belongs to a region's telic state when its probability of ending in that
region beats every other region's by at least epsilon, and to the default
state otherwise.

Closed forms are vectorised over arrays of (mu, sigma) so that the same
code evaluates single policies and dense policy grids.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union
import logging
import math

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import ndtr

from .contour import Polyline, iso_lines
from .info_geom import Base, DivergenceValue
from .exceptions import InvalidPolicy, InvalidTask, UnknownRegion, \
    StateNotFound, SplitCollision, SplitCollapsed, NoSplitNeeded


logger = logging.getLogger(__name__)

DEFAULT_STATE = "S_0"
OUTSIDE = "-"
BOUNDARY_ITERATIONS = 60
GOLDEN_ITERATIONS = 40
SIMULATION_CHUNK = 1 << 14

ArrayLike = Union[float, np.ndarray]


class Mode(Enum):
    """How policy parameters map to the final-position distribution."""

    ACCUMULATE = "accumulate"
    DIRECT = "direct"


@dataclass(frozen=True)
class GaussianPolicy:
    mu: float
    sigma: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mu) and math.isfinite(self.sigma)):
            raise InvalidPolicy(f"Policy ({self.mu!r}, {self.sigma!r}) "
                                "must be finite.")
        if self.sigma <= 0:
            raise InvalidPolicy(f"Step noise {self.sigma!r} must be "
                                "positive.")

    def as_dict(self) -> Dict[str, float]:
        return {"mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True)
class Region:
    center: float
    radius: float
    label: str
    anchor: Optional[GaussianPolicy] = None

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise InvalidTask(f"Region {self.label!r} needs a positive "
                              "radius.")

    @property
    def lo(self) -> float:
        return self.center - self.radius

    @property
    def hi(self) -> float:
        return self.center + self.radius

    def overlaps(self, other: "Region") -> bool:
        return self.lo < other.hi and other.lo < self.hi

    def contains(self, x: ArrayLike) -> np.ndarray:
        x = np.asarray(x)
        return (x >= self.lo) & (x <= self.hi)


@dataclass(frozen=True)
class SearchBox:
    mu: Tuple[float, float] = (-3.0, 3.0)
    sigma: Tuple[float, float] = (0.05, 3.0)
    resolution: int = 400

    def __post_init__(self) -> None:
        if not self.mu[0] < self.mu[1]:
            raise InvalidTask(f"Empty mean range {self.mu!r}.")
        if not 0 < self.sigma[0] < self.sigma[1]:
            raise InvalidTask(f"Noise range {self.sigma!r} must be "
                              "positive and non-empty.")
        if self.resolution < 2:
            raise InvalidTask("Grid resolution must be at least 2.")

    def axes(self, resolution: Optional[int] = None) \
            -> Tuple[np.ndarray, np.ndarray]:
        n = self.resolution if resolution is None else resolution
        return (np.linspace(self.mu[0], self.mu[1], n),
                np.linspace(self.sigma[0], self.sigma[1], n))


@dataclass(frozen=True)
class NavTask:
    """
    Purpose:

        The navigation task together with the goal it is evaluated under:
        target regions in rank order, the sensitivity epsilon, the default
        policy, the complexity capacity and the search domain used by the
        grid-based optimisers.

    Structure:

        Region order is the tie-break order for classification. Regions
        added by refinement keep the policy they were built around as
        their `anchor`.
        In `Mode.ACCUMULATE` the final position is N(T*mu, sqrt(T)*sigma);
        in `Mode.DIRECT` the parameters describe the final position itself.
    """

    horizon: int
    regions: Tuple[Region, ...]
    epsilon: float
    default: GaussianPolicy = GaussianPolicy(0.0, 1.0)
    delta: DivergenceValue = DivergenceValue(1.0)
    mode: Mode = Mode.ACCUMULATE
    box: SearchBox = field(default_factory=SearchBox)
    default_label: str = DEFAULT_STATE

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise InvalidTask("Horizon must be at least one step.")
        if not 0 < self.epsilon < 1:
            raise InvalidTask(f"Sensitivity {self.epsilon!r} is outside "
                              "(0, 1).")

        labels = [region.label for region in self.regions]
        if len(set(labels)) != len(labels) or self.default_label in labels:
            raise InvalidTask(f"State labels {labels!r} must be unique and "
                              f"distinct from {self.default_label!r}.")

        for i, first in enumerate(self.regions):
            for second in self.regions[i + 1:]:
                if first.overlaps(second):
                    raise InvalidTask(f"Regions {first.label!r} and "
                                      f"{second.label!r} overlap.")

    @property
    def labels(self) -> Tuple[str, ...]:
        return (self.default_label,) + \
            tuple(region.label for region in self.regions)

    def region(self, label: str) -> Region:
        for region in self.regions:
            if region.label == label:
                return region
        raise UnknownRegion(label)

    def state_index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise UnknownRegion(label) from None

    def fresh_label(self, base: str = "S_M") -> str:
        if base not in self.labels:
            return base
        suffix = 2
        while f"{base}{suffix}" in self.labels:
            suffix += 1
        return f"{base}{suffix}"

    def shift_region(self, label: str, center: float) -> "NavTask":
        moved = replace(self.region(label), center=center)
        return replace(self, regions=tuple(
            moved if region.label == label else region
            for region in self.regions))

    def with_default(self, policy: GaussianPolicy) -> "NavTask":
        return replace(self, default=policy)

    def with_epsilon(self, epsilon: float) -> "NavTask":
        return replace(self, epsilon=epsilon)

    def insert_region(self, region: Region, before: str) -> "NavTask":
        for existing in self.regions:
            if existing.overlaps(region):
                raise SplitCollision(
                    f"Region {region.label!r} [{region.lo:.6g}, "
                    f"{region.hi:.6g}] overlaps {existing.label!r}.")
        position = [r.label for r in self.regions].index(
            self.region(before).label)
        regions = self.regions[:position] + (region,) + \
            self.regions[position:]
        return replace(self, regions=regions)


def final_moments(mu: ArrayLike, sigma: ArrayLike, task: NavTask) \
        -> Tuple[np.ndarray, np.ndarray]:
    mu, sigma = np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float)
    if task.mode is Mode.DIRECT:
        return mu, sigma
    return task.horizon * mu, math.sqrt(task.horizon) * sigma


def final_position_distribution(p: GaussianPolicy, task: NavTask) \
        -> Tuple[float, float]:
    mean, std = final_moments(p.mu, p.sigma, task)
    return float(mean), float(std)


def step_distribution(p: GaussianPolicy, task: NavTask) \
        -> Tuple[float, float]:
    """Mean and std of a single step under `task.mode`."""

    if task.mode is Mode.DIRECT:
        return p.mu / task.horizon, p.sigma / math.sqrt(task.horizon)
    return p.mu, p.sigma


def region_probability_grid(mu: ArrayLike, sigma: ArrayLike, task: NavTask,
                            region: Region) -> np.ndarray:
    mean, std = final_moments(mu, sigma, task)
    upper = ndtr((region.hi - mean) / std)
    lower = ndtr((region.lo - mean) / std)
    return np.clip(upper - lower, 0.0, 1.0)


def region_probability(p: GaussianPolicy, task: NavTask,
                       r: Region) -> float:
    return float(region_probability_grid(p.mu, p.sigma, task, r))


def _region_probabilities(mu: ArrayLike, sigma: ArrayLike,
                          task: NavTask) -> List[np.ndarray]:
    return [region_probability_grid(mu, sigma, task, region)
            for region in task.regions]


def _advantages(probabilities: List[np.ndarray]) -> List[np.ndarray]:
    advantages = []
    for i, target in enumerate(probabilities):
        others = [p for j, p in enumerate(probabilities) if j != i]
        best = np.max(np.stack(others), axis=0) if others \
            else np.zeros_like(target)
        advantages.append(target - best)
    return advantages


def delta_p_grid(mu: ArrayLike, sigma: ArrayLike, task: NavTask,
                 label: str) -> np.ndarray:
    """Probability of the labelled region minus the best competitor's."""

    index = task.state_index(label) - 1
    if index < 0:
        raise UnknownRegion(label)
    return _advantages(_region_probabilities(mu, sigma, task))[index]


def delta_p(p: GaussianPolicy, task: NavTask, target: str) -> float:
    return float(delta_p_grid(p.mu, p.sigma, task, target))


def classify_grid(mu: ArrayLike, sigma: ArrayLike,
                  task: NavTask) -> np.ndarray:
    """State index per policy: 0 for the default state, i+1 for region i."""

    advantages = _advantages(_region_probabilities(mu, sigma, task))
    shape = np.broadcast(np.asarray(mu), np.asarray(sigma)).shape
    states = np.zeros(shape, dtype=int)
    for i in reversed(range(len(advantages))):
        states[advantages[i] >= task.epsilon] = i + 1
    return states


def classify_policy(p: GaussianPolicy, task: NavTask) -> str:
    return task.labels[int(classify_grid(p.mu, p.sigma, task))]


def state_score_grid(mu: ArrayLike, sigma: ArrayLike, task: NavTask,
                     label: str) -> np.ndarray:
    """
    How strongly policies lean toward the labelled state: the region's
    advantage, or for the default state the negated strongest advantage.
    """

    if label != task.default_label:
        return delta_p_grid(mu, sigma, task, label)

    shape = np.broadcast(np.asarray(mu), np.asarray(sigma)).shape
    if not task.regions:
        return np.ones(shape)
    advantages = _advantages(_region_probabilities(mu, sigma, task))
    return -np.max(np.stack(advantages), axis=0)


def gaussian_kl(mu: ArrayLike, sigma: ArrayLike, mu_ref: float,
                sigma_ref: float) -> np.ndarray:
    mu, sigma = np.asarray(mu, dtype=float), np.asarray(sigma, dtype=float)
    value = np.log(sigma_ref / sigma) + \
        (sigma ** 2 + (mu - mu_ref) ** 2) / (2.0 * sigma_ref ** 2) - 0.5
    return np.maximum(value, 0.0)


def policy_complexity(p: GaussianPolicy, ref: GaussianPolicy,
                      base: Base = Base.NATS) -> DivergenceValue:
    nats = float(gaussian_kl(p.mu, p.sigma, ref.mu, ref.sigma))
    return DivergenceValue.from_nats(nats, base)


def _complexity(p: GaussianPolicy, ref: GaussianPolicy) -> float:
    return float(gaussian_kl(p.mu, p.sigma, ref.mu, ref.sigma))


def _budget(delta: Union[float, DivergenceValue]) -> float:
    return delta.nats if isinstance(delta, DivergenceValue) \
        else float(delta)


def _policy_grid(task: NavTask, resolution: Optional[int]) \
        -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    mus, sigmas = task.box.axes(resolution)
    M, S = np.meshgrid(mus, sigmas)
    return mus, sigmas, M, S


def _refine_projection(ref: GaussianPolicy, index: int, task: NavTask,
                       cell: GaussianPolicy,
                       spacing: float) -> Optional[GaussianPolicy]:
    def inside(mu: float, sigma: float) -> bool:
        return bool(classify_grid(mu, sigma, task) == index)

    def boundary_mu(sigma: float) -> Optional[float]:
        if inside(ref.mu, sigma):
            return ref.mu
        if not inside(cell.mu, sigma):
            return None
        outer, inner = ref.mu, cell.mu
        for _ in range(BOUNDARY_ITERATIONS):
            middle = (outer + inner) / 2.0
            if inside(middle, sigma):
                inner = middle
            else:
                outer = middle
        return inner

    def objective(sigma: float) -> float:
        mu = boundary_mu(sigma)
        if mu is None:
            return 1e6
        return float(gaussian_kl(mu, sigma, ref.mu, ref.sigma))

    lower = max(task.box.sigma[0], cell.sigma - 2.0 * spacing)
    upper = min(task.box.sigma[1], cell.sigma + 2.0 * spacing)
    result = minimize_scalar(objective, bounds=(lower, upper),
                             method="bounded",
                             options={"xatol": 1e-10,
                                      "maxiter": GOLDEN_ITERATIONS})
    sigma = float(result.x)
    mu = boundary_mu(sigma)
    if mu is None:
        return None
    return GaussianPolicy(mu, sigma)


def project_policy_to_state(ref: GaussianPolicy, label: str, task: NavTask,
                            resolution: Optional[int] = None) \
        -> Tuple[GaussianPolicy, DivergenceValue]:
    """
    Policy of least complexity relative to `ref` inside the labelled state.

    A grid scan over the search box finds the best cell; the optimum is then
    refined along the state boundary, which is located by bisection in mu
    for each candidate sigma.
    """

    base = task.delta.base
    index = task.state_index(label)
    if classify_policy(ref, task) == label:
        return ref, DivergenceValue(0.0, base)

    mus, sigmas, M, S = _policy_grid(task, resolution)
    inside = classify_grid(M, S, task) == index
    if not inside.any():
        raise StateNotFound(f"State {label!r} not found in search domain.")

    cost = np.where(inside, gaussian_kl(M, S, ref.mu, ref.sigma), np.inf)
    i, j = np.unravel_index(int(np.argmin(cost)), cost.shape)
    best = GaussianPolicy(float(mus[j]), float(sigmas[i]))

    refined = _refine_projection(ref, index, task, best,
                                 float(sigmas[1] - sigmas[0]))
    if refined is not None and \
       _complexity(refined, ref) < _complexity(best, ref) and \
       classify_policy(refined, task) == label:
        best = refined

    complexity = _complexity(best, ref)
    logger.debug("Projection onto %r: (%.6f, %.6f) at %.6g nats.",
                 label, best.mu, best.sigma, complexity)
    return best, DivergenceValue.from_nats(complexity, base)


def _contour_sigma_range(ref: GaussianPolicy,
                         budget: float) -> Tuple[float, float]:
    def slack(sigma: float) -> float:
        return budget - float(gaussian_kl(ref.mu, sigma, ref.mu, ref.sigma))

    if budget <= 0:
        return ref.sigma, ref.sigma
    lower = brentq(slack, ref.sigma * math.exp(-budget - 2.0), ref.sigma)
    upper = brentq(slack, ref.sigma, ref.sigma * (2.0 * budget + 3.0))
    return float(lower), float(upper)


def _contour_mu(ref: GaussianPolicy, budget: float, sigma: float,
                sign: float) -> float:
    slack = budget - float(gaussian_kl(ref.mu, sigma, ref.mu, ref.sigma))
    reach = math.sqrt(max(0.0, 2.0 * ref.sigma ** 2 * slack))
    return ref.mu + sign * reach * (1.0 - 1e-12)


def nearest_policy_within_budget(
        ref: GaussianPolicy, label: str, task: NavTask,
        delta: Optional[Union[float, DivergenceValue]] = None,
        candidates: Sequence[GaussianPolicy] = (),
        resolution: Optional[int] = None) -> GaussianPolicy:
    """
    Policy leaning furthest toward the labelled state among those within
    `delta` (default: the task's capacity) of `ref`.

    The grid optimum is refined along the budget contour. `candidates` are
    extra feasible starting points, e.g. the optimum for a smaller budget.
    """

    budget = task.delta.nats if delta is None else _budget(delta)
    if budget <= 0:
        return ref

    def score(p: GaussianPolicy) -> float:
        return float(state_score_grid(p.mu, p.sigma, task, label))

    mus, sigmas, M, S = _policy_grid(task, resolution)
    feasible = gaussian_kl(M, S, ref.mu, ref.sigma) <= budget
    scores = np.where(feasible, state_score_grid(M, S, task, label), -np.inf)

    pool = [ref] + [c for c in candidates if _complexity(c, ref) <= budget]
    if feasible.any():
        i, j = np.unravel_index(int(np.argmax(scores)), scores.shape)
        pool.append(GaussianPolicy(float(mus[j]), float(sigmas[i])))
    best = max(pool, key=score)

    sign = 1.0 if best.mu >= ref.mu else -1.0
    lowest, highest = _contour_sigma_range(ref, budget)
    spacing = float(sigmas[1] - sigmas[0])
    lower = max(lowest, best.sigma - 2.0 * spacing)
    upper = min(highest, best.sigma + 2.0 * spacing)
    if lower < upper:
        result = minimize_scalar(
            lambda s: -score(GaussianPolicy(
                _contour_mu(ref, budget, s, sign), s)),
            bounds=(lower, upper), method="bounded",
            options={"xatol": 1e-10, "maxiter": GOLDEN_ITERATIONS})
        sigma = float(result.x)
        refined = GaussianPolicy(_contour_mu(ref, budget, sigma, sign), sigma)
        if score(refined) > score(best) and \
           _complexity(refined, ref) <= budget:
            best = refined

    logger.debug("Best policy toward %r within %.6g nats: (%.6f, %.6f).",
                 label, budget, best.mu, best.sigma)
    return best


def _free_gap(task: NavTask, center: float) -> float:
    gap = math.inf
    for region in task.regions:
        if region.lo < center < region.hi:
            raise SplitCollision(f"Centre {center:.6g} lies inside "
                                 f"{region.label!r}.")
        gap = min(gap, abs(center - region.lo), abs(center - region.hi))
    return gap


def _fit_radius(task: NavTask, target: str, anchor: GaussianPolicy,
                center: float, label: str) -> float:
    """
    Radius for a region at `center`: at most the target's radius and the
    free gap around the centre.

    The new state must contain `anchor` while the default policy keeps its
    state. When the widest region would crowd either margin, the radius is
    shrunk to where the anchor's advantage exceeds epsilon by as much as the
    default policy's falls short of it.
    """

    widest = min(task.region(target).radius, _free_gap(task, center))
    if not widest > 0:
        raise SplitCollapsed(f"No room for a region at {center:.6g}.")
    home = classify_policy(task.default, task)

    def trial(radius: float) -> NavTask:
        return task.insert_region(Region(center, radius, label, anchor),
                                  before=target)

    def imbalance(radius: float) -> float:
        candidate = trial(radius)
        return delta_p(anchor, candidate, label) + \
            delta_p(task.default, candidate, label) - 2.0 * task.epsilon

    radius = widest
    if imbalance(widest) > 0:
        radius = float(brentq(imbalance, widest * 1e-9, widest))

    fitted = trial(radius)
    if classify_policy(anchor, fitted) != label or \
       classify_policy(task.default, fitted) != home:
        raise SplitCollapsed(
            f"No radius around {center:.6g} separates the anchor "
            f"({anchor.mu:.6g}, {anchor.sigma:.6g}) from the default "
            f"policy at epsilon {task.epsilon!r}.")
    return radius


def insert_intermediate_region(task: NavTask, target: str,
                               anchor: GaussianPolicy,
                               radius: Optional[float] = None) -> NavTask:
    """
    Add a region ranked just before `target`, centred on the mean final
    position under `anchor`.

    Without an explicit `radius` the region is fitted so that `anchor`
    lands in the new state and the default policy stays where it was.
    """

    center, _ = final_position_distribution(anchor, task)
    label = task.fresh_label()
    if radius is None:
        radius = _fit_radius(task, target, anchor, center, label)

    inserted = Region(center, radius, label, anchor)
    logger.info("Inserting %r at [%.6g, %.6g] before %r.", inserted.label,
                inserted.lo, inserted.hi, target)
    return task.insert_region(inserted, before=target)


def split_state_gaussian(task: NavTask, label: str,
                         radius: Optional[float] = None) -> NavTask:
    if classify_policy(task.default, task) == label:
        raise NoSplitNeeded(f"Default policy already lies in {label!r}.")

    try:
        _, cost = project_policy_to_state(task.default, label, task)
    except StateNotFound:
        cost = DivergenceValue(math.inf)
    if cost.nats <= task.delta.nats:
        raise NoSplitNeeded(f"State {label!r} is reachable at "
                            f"{cost} from the default policy.")

    pi_m = nearest_policy_within_budget(task.default, label, task)
    return insert_intermediate_region(task, label, pi_m, radius)


@dataclass(frozen=True)
class Trajectories:
    positions: np.ndarray
    labels: Tuple[str, ...]


def terminal_labels(x: np.ndarray, task: NavTask) -> Tuple[str, ...]:
    labels = np.full(np.shape(x), OUTSIDE, dtype=object)
    for region in reversed(task.regions):
        labels[region.contains(x)] = region.label
    return tuple(str(label) for label in labels)


def _walks(p: GaussianPolicy, task: NavTask, n: int,
           seed: int) -> Iterator[np.ndarray]:
    if n < 1:
        raise ValueError("Need at least one trajectory.")
    mu, sigma = step_distribution(p, task)
    generator = np.random.Generator(np.random.Philox(
        np.random.SeedSequence(seed)))
    for start in range(0, n, SIMULATION_CHUNK):
        size = min(SIMULATION_CHUNK, n - start)
        steps = mu + sigma * generator.standard_normal((size, task.horizon))
        yield np.cumsum(steps, axis=1)


def simulate_trajectories(p: GaussianPolicy, task: NavTask, n: int,
                          seed: int) -> Trajectories:
    walks = np.concatenate(list(_walks(p, task, n, seed)))
    positions = np.hstack([np.zeros((n, 1)), walks])
    return Trajectories(positions, terminal_labels(positions[:, -1], task))


def simulate_terminal_positions(p: GaussianPolicy, task: NavTask, n: int,
                                seed: int) -> np.ndarray:
    """Final positions only; equal to the last column of the trajectories
    simulated with the same seed."""

    return np.concatenate([walk[:, -1] for walk in _walks(p, task, n, seed)])


@dataclass(frozen=True)
class PolicyGridCell:
    mu: float
    sigma: float
    delta_p: Dict[str, float]
    complexity: float
    label: str


@dataclass(frozen=True)
class PolicyGrid:
    mu: np.ndarray
    sigma: np.ndarray
    labels: Tuple[str, ...]
    states: np.ndarray
    delta_p: Dict[str, np.ndarray]
    complexity: np.ndarray
    contours: Dict[float, List[Polyline]]

    def cell(self, i: int, j: int) -> PolicyGridCell:
        return PolicyGridCell(
            mu=float(self.mu[j]), sigma=float(self.sigma[i]),
            delta_p={label: float(values[i, j])
                     for label, values in self.delta_p.items()},
            complexity=float(self.complexity[i, j]),
            label=self.labels[int(self.states[i, j])])

    def cells(self) -> Iterator[PolicyGridCell]:
        for i in range(len(self.sigma)):
            for j in range(len(self.mu)):
                yield self.cell(i, j)


def phase_plot_grid(task: NavTask,
                    mu_range: Optional[Tuple[float, float]] = None,
                    sigma_range: Optional[Tuple[float, float]] = None,
                    resolution: Optional[int] = None,
                    ref: Optional[GaussianPolicy] = None,
                    levels: Optional[Sequence[float]] = None) -> PolicyGrid:
    """
    Advantage per region, state and complexity relative to `ref` (default:
    the task's default policy) over a (mu, sigma) grid, with complexity
    iso-lines at `levels` nats (default: the task's capacity).
    """

    box = SearchBox(mu=mu_range or task.box.mu,
                    sigma=sigma_range or task.box.sigma,
                    resolution=resolution or task.box.resolution)
    ref = task.default if ref is None else ref
    levels = (task.delta.nats,) if levels is None else tuple(levels)

    mus, sigmas = box.axes()
    M, S = np.meshgrid(mus, sigmas)
    advantages = _advantages(_region_probabilities(M, S, task))
    complexity = gaussian_kl(M, S, ref.mu, ref.sigma)

    return PolicyGrid(
        mu=mus, sigma=sigmas, labels=task.labels,
        states=classify_grid(M, S, task),
        delta_p={region.label: advantage
                 for region, advantage in zip(task.regions, advantages)},
        complexity=complexity,
        contours={level: iso_lines(mus, sigmas, complexity, level)
                  for level in levels})


@dataclass(frozen=True)
class ComplexityCurves:
    """
    One curve per state over a shared abscissa. `directions` holds +1 for
    curves expected to be non-decreasing and -1 for non-increasing ones;
    absent points (state empty in the search box) are None.
    """

    x: Tuple[float, ...]
    values: Dict[str, Tuple[Optional[float], ...]]
    directions: Dict[str, int]
    policies: Dict[str, Tuple[Optional[GaussianPolicy], ...]] = \
        field(default_factory=dict)

    def violations(self, tolerance: float = 1e-6) -> List[str]:
        found = []
        for label, values in self.values.items():
            direction = self.directions[label]
            present = [(x, v) for x, v in zip(self.x, values)
                       if v is not None]
            for (x0, v0), (x1, v1) in zip(present, present[1:]):
                if direction * (v1 - v0) < -tolerance:
                    found.append(f"{label}: {v0:.9g} at {x0:.6g} -> "
                                 f"{v1:.9g} at {x1:.6g}")
        return found


def goal_complexity_curve(task: NavTask, ref: GaussianPolicy,
                          budgets: Sequence[float]) -> ComplexityCurves:
    """
    Best achievable advantage toward each state as the complexity budget
    grows. Budgets are in the units of `task.delta.base`.
    """

    if any(b < 0 for b in budgets) or list(budgets) != sorted(budgets):
        raise InvalidTask("Budgets must be non-negative and ascending.")

    values: Dict[str, Tuple[Optional[float], ...]] = {}
    policies: Dict[str, Tuple[Optional[GaussianPolicy], ...]] = {}
    for label in task.labels:
        found: List[GaussianPolicy] = []
        for budget in budgets:
            nats = DivergenceValue(budget, task.delta.base).nats
            found.append(nearest_policy_within_budget(
                ref, label, task, nats, candidates=found[-1:]))
        values[label] = tuple(
            float(state_score_grid(p.mu, p.sigma, task, label))
            for p in found)
        policies[label] = tuple(found)

    curves = ComplexityCurves(tuple(float(b) for b in budgets), values,
                              {label: 1 for label in task.labels}, policies)
    for violation in curves.violations():
        logger.warning("Goal-complexity curve decreases: %s", violation)
    return curves


def granularity_complexity_curve(task: NavTask, ref: GaussianPolicy,
                                 epsilons: Sequence[float]) \
        -> ComplexityCurves:
    """
    Complexity of the projection of `ref` onto each state as the
    sensitivity shrinks; the abscissa is -log(epsilon), ascending.

    Region states grow as epsilon shrinks, so their curves are
    non-increasing; the default state shrinks and its curve is
    non-decreasing.
    """

    if any(not 0 < e < 1 for e in epsilons):
        raise InvalidTask("Sensitivities must lie in (0, 1).")

    ordered = sorted(epsilons, reverse=True)
    values: Dict[str, List[Optional[float]]] = {
        label: [] for label in task.labels}
    for epsilon in ordered:
        refined = task.with_epsilon(epsilon)
        for label in task.labels:
            try:
                _, cost = project_policy_to_state(ref, label, refined)
                values[label].append(cost.value)
            except StateNotFound:
                logger.info("State %r is empty at epsilon=%g.",
                            label, epsilon)
                values[label].append(None)

    directions = {label: 1 if label == task.default_label else -1
                  for label in task.labels}
    curves = ComplexityCurves(tuple(-math.log(e) for e in ordered),
                              {label: tuple(v) for label, v in values.items()},
                              directions)
    for violation in curves.violations():
        logger.warning("Granularity-complexity curve is not monotone: %s",
                       violation)
    return curves
