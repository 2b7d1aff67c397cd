"""
KL divergence, information projection onto telic states, the Sanov-rate
telic distance and the policy-gradient step toward a target state.

All internal quantities are in nats; `Base.BITS` is a presentation choice.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np
from scipy.optimize import brentq
from scipy.special import rel_entr, xlogy

from .exp_dist import ExperienceDistribution, TelicState, TabularPolicy, \
    TabularEnvironment, Experience, feature_probability, telic_state_of, \
    policy_pushforward, INTERIOR_MARGIN
from .exceptions import DistributionError, UnreachableState, DivergentStart, \
    GradientOverflow, InvalidStepSize


logger = logging.getLogger(__name__)

FD_STEP = 1e-5
SAMPLING_CHUNK = 1 << 18


class Base(Enum):
    NATS = "nats"
    BITS = "bits"

    @property
    def per_nat(self) -> float:
        return 1.0 if self is Base.NATS else 1.0 / math.log(2.0)


@dataclass(frozen=True)
class DivergenceValue:
    value: float
    base: Base = Base.NATS

    def __post_init__(self) -> None:
        if math.isnan(self.value) or self.value < 0:
            raise ValueError(f"Divergence {self.value!r} must be >= 0.")

    @classmethod
    def from_nats(cls, nats: float, base: Base = Base.NATS) \
            -> "DivergenceValue":
        return cls(nats * base.per_nat, base)

    @property
    def nats(self) -> float:
        return self.value / self.base.per_nat

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)

    def to(self, base: Base) -> "DivergenceValue":
        return DivergenceValue.from_nats(self.nats, base)

    def __str__(self) -> str:
        return f"{self.value:.6g} {self.base.value}"


def kl_divergence(P: ExperienceDistribution, Q: ExperienceDistribution,
                  base: Base = Base.NATS) -> DivergenceValue:
    reference = Q.as_dict()
    p = np.array([mass for _, mass in P.items()], dtype=float)
    q = np.array([reference.get(experience, 0.0)
                  for experience, _ in P.items()], dtype=float)
    nats = float(np.sum(rel_entr(p, q)))
    if math.isinf(nats):
        return DivergenceValue(math.inf, base)
    return DivergenceValue.from_nats(max(0.0, nats), base)


def binary_kl(c: float, q: float) -> float:
    """d(c||q) in nats, the divergence between Bernoulli(c) and (q)."""

    value = float(rel_entr(c, q) + rel_entr(1.0 - c, 1.0 - q))
    return max(0.0, value)


def binary_kl_inverse(q: float, delta: float, toward: float,
                      iterations: int = 200) -> float:
    """
    Point c between `q` and `toward` farthest from `q` with d(c||q) <= delta.
    Returns `toward` itself when it is within the budget.
    """

    if binary_kl(toward, q) <= delta:
        return toward
    if q <= 0.0 or q >= 1.0:
        return q

    root = brentq(lambda c: binary_kl(c, q) - delta, q, toward,
                  xtol=1e-15, maxiter=iterations)
    # Keep the root on the feasible side.
    c = float(root)
    while binary_kl(c, q) > delta:
        c = q + (c - q) * (1.0 - 1e-12)
    return c


def tilt(Q: ExperienceDistribution, state: TelicState, c: float) \
        -> ExperienceDistribution:
    """
    Rescale `Q` so that its feature probability becomes `c`, keeping the
    conditional distributions inside and outside the feature set.
    """

    phi = state.goal.features
    q = feature_probability(Q, phi)
    masses = []
    for experience, mass in Q.items():
        if experience in phi:
            masses.append(c * mass / q if q > 0 else 0.0)
        else:
            masses.append((1.0 - c) * mass / (1.0 - q) if q < 1 else 0.0)

    return ExperienceDistribution(Q.support, tuple(masses))


@dataclass(frozen=True)
class ProjectionResult:
    projected: ExperienceDistribution
    divergence: DivergenceValue
    target_feature_prob: float


def information_projection(Q: ExperienceDistribution, state: TelicState,
                           base: Base = Base.NATS) -> ProjectionResult:
    q = feature_probability(Q, state.goal.features)
    c = state.nearest_point(q)
    if c == q:
        return ProjectionResult(Q, DivergenceValue(0.0, base), q)

    if (c > 0 and q == 0) or (c < 1 and q == 1):
        raise UnreachableState(
            f"Unreachable state {state.label!r}: absolute continuity fails "
            f"moving feature probability {q!r} to {c!r}.")

    projected = tilt(Q, state, c)
    margin = INTERIOR_MARGIN
    for _ in range(6):
        if telic_state_of(projected, state.goal).index == state.index:
            break
        c = c - margin if c < q else c + margin
        margin *= 10
        projected = tilt(Q, state, c)

    return ProjectionResult(projected,
                            DivergenceValue.from_nats(binary_kl(c, q), base),
                            c)


def telic_distance(Q: ExperienceDistribution, state: TelicState,
                   base: Base = Base.NATS) -> DivergenceValue:
    try:
        return information_projection(Q, state, base).divergence
    except UnreachableState:
        return DivergenceValue(math.inf, base)


@dataclass(frozen=True)
class SanovRow:
    n: int
    hits: int
    trials: int
    rate_estimate: float
    telic_distance: float


@dataclass(frozen=True)
class SanovEstimate:
    rows: Tuple[SanovRow, ...]
    omitted: Tuple[int, ...]
    telic_distance: DivergenceValue

    @property
    def decay_rate(self) -> float:
        return fit_decay_rate(self.rows)


def _count_hits(Q: ExperienceDistribution, state: TelicState, n: int,
                trials: int, seed: np.random.SeedSequence,
                importance: bool = False) -> Tuple[int, float]:
    """
    Number of sampled empirical distributions that land in `state` and the
    estimated probability of landing there.

    With `importance` the samples come from the information projection of
    `Q` and every hit is weighted by its likelihood ratio. Membership depends
    only on the feature count, so that count is drawn from a binomial.
    """

    item = state.bin
    last = state.index == len(state.goal.bins) - 1
    generator = np.random.Generator(np.random.Philox(seed))

    def inside(f: np.ndarray) -> np.ndarray:
        upper = (f <= item.hi) if last else (f < item.hi)
        return np.asarray((f >= item.lo) & upper)

    members = np.array([h in state.goal.features for h in Q.support])
    q = feature_probability(Q, state.goal.features)
    c = q
    if importance:
        try:
            c = information_projection(Q, state).target_feature_prob
        except UnreachableState:
            return 0, 0.0

    hits = 0
    mass = 0.0
    remaining = trials
    while remaining > 0:
        size = min(remaining, SAMPLING_CHUNK)
        if importance:
            k = generator.binomial(n, c, size=size)
            landed = inside(k / n)
            if c != q:
                hit = k[landed]
                mass += float(np.sum(np.exp(
                    xlogy(hit, q / c) +
                    xlogy(n - hit, (1.0 - q) / (1.0 - c)))))
            else:
                mass += float(landed.sum())
        else:
            counts = generator.multinomial(n, Q.masses, size=size)
            landed = inside(counts[:, members].sum(axis=1) / n)
            mass += float(landed.sum())
        hits += int(landed.sum())
        remaining -= size

    return hits, mass / trials


def sanov_rate_estimate(Q: ExperienceDistribution, state: TelicState,
                        sample_sizes: Sequence[int], trials: int,
                        seed: int, threads: int = 1,
                        importance: bool = False) -> SanovEstimate:
    """
    Monte Carlo estimate of the large-deviation rate at which empirical
    distributions of `n` samples from `Q` land in `state`.

    Each sample size draws from its own Philox stream spawned from `seed`,
    so the result does not depend on `threads`. With `importance` the
    samples are drawn around the information projection, which keeps the
    estimate usable at sample sizes where direct hits are too rare to see.
    """

    distance = telic_distance(Q, state)
    streams = np.random.SeedSequence(seed).spawn(len(sample_sizes))

    def run(index: int) -> Tuple[int, float]:
        return _count_hits(Q, state, sample_sizes[index], trials,
                           streams[index], importance)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        outcomes = list(pool.map(run, range(len(sample_sizes))))

    rows: List[SanovRow] = []
    omitted: List[int] = []
    for n, (hits, frequency) in zip(sample_sizes, outcomes):
        if hits == 0:
            logger.warning("No hits at N=%d over %d trials; entry omitted.",
                           n, trials)
            omitted.append(n)
            continue
        rate = max(0.0, -math.log(frequency) / n)
        rows.append(SanovRow(n, hits, trials, rate, distance.nats))

    return SanovEstimate(tuple(rows), tuple(omitted), distance)


def fit_decay_rate(rows: Sequence[SanovRow]) -> float:
    """Least-squares slope of -log(frequency) against N."""

    if len(rows) < 2:
        return math.nan
    n = np.array([row.n for row in rows], dtype=float)
    y = n * np.array([row.rate_estimate for row in rows])
    slope, _ = np.polyfit(n, y, 1)
    return float(slope)


Generator = Callable[[np.ndarray], ExperienceDistribution]


@dataclass(frozen=True)
class ParametricPolicy:
    theta: Tuple[float, ...]
    generator: Generator

    def distribution(self) -> ExperienceDistribution:
        return self.generator(np.asarray(self.theta, dtype=float))

    def with_theta(self, theta: Sequence[float]) -> "ParametricPolicy":
        return ParametricPolicy(tuple(float(t) for t in theta),
                                self.generator)


def telic_objective(generator: Generator, theta: np.ndarray,
                    state: TelicState) -> float:
    """D(P*||P_theta), with P* the projection of the current P_theta."""

    return telic_distance(generator(theta), state).nats


def _objective_or_none(generator: Generator, theta: np.ndarray,
                       state: TelicState) -> Optional[float]:
    try:
        return telic_objective(generator, theta, state)
    except DistributionError:
        return None


def finite_difference_gradient(p: ParametricPolicy, state: TelicState,
                               h: float = FD_STEP) -> np.ndarray:
    """
    Central differences, falling back to a one-sided difference along any
    coordinate where a shifted parameter leaves the generator's domain.
    """

    theta = np.asarray(p.theta, dtype=float)
    here = telic_objective(p.generator, theta, state)
    gradient = np.zeros_like(theta)
    for i in range(theta.size):
        step = np.zeros_like(theta)
        step[i] = h
        forward = _objective_or_none(p.generator, theta + step, state)
        backward = _objective_or_none(p.generator, theta - step, state)
        if forward is not None and backward is not None:
            gradient[i] = (forward - backward) / (2.0 * h)
        elif forward is not None:
            gradient[i] = (forward - here) / h
        elif backward is not None:
            gradient[i] = (here - backward) / h
        else:
            raise GradientOverflow(f"No feasible difference along "
                                   f"coordinate {i} at {p.theta!r}.")
    return gradient


def policy_gradient_step(p: ParametricPolicy, state: TelicState, eta: float,
                         h: float = FD_STEP) -> ParametricPolicy:
    if not eta > 0:
        raise InvalidStepSize(f"Step size must be positive, got {eta!r}.")

    theta = np.asarray(p.theta, dtype=float)
    if not math.isfinite(telic_objective(p.generator, theta, state)):
        raise DivergentStart(f"Objective is not finite at {p.theta!r}.")

    gradient = finite_difference_gradient(p, state, h)
    if not np.all(np.isfinite(gradient)):
        raise GradientOverflow(f"Non-finite gradient at {p.theta!r}.")

    return p.with_theta(theta - eta * gradient)


@dataclass(frozen=True)
class DescentStep:
    iteration: int
    theta: Tuple[float, ...]
    objective: float


def descend(p: ParametricPolicy, state: TelicState, eta: float,
            iterations: int, tolerance: float = 0.0) -> List[DescentStep]:
    """Repeated gradient steps; the trace includes the starting point."""

    trace = [DescentStep(0, p.theta, telic_objective(
        p.generator, np.asarray(p.theta), state))]
    for iteration in range(1, iterations + 1):
        if trace[-1].objective <= tolerance:
            break
        p = policy_gradient_step(p, state, eta)
        objective = telic_objective(p.generator, np.asarray(p.theta), state)
        trace.append(DescentStep(iteration, p.theta, objective))
        logger.debug("Descent iteration %d: objective %.6g.",
                     iteration, objective)
    return trace


def bernoulli_family(observation: str = "o0",
                     actions: Tuple[str, str] = ("a0", "a1")) -> Generator:
    """
    One-step instances with a single observation whose policy picks the
    second action with probability theta[0].
    """

    environment = TabularEnvironment((observation,), {"": {observation: 1.0}},
                                     horizon=1)

    def generate(theta: np.ndarray) -> ExperienceDistribution:
        p = float(theta[0])
        policy = TabularPolicy(actions, {observation: {actions[0]: 1.0 - p,
                                                       actions[1]: p}})
        return policy_pushforward(policy, environment, 1)

    return generate


def bernoulli_features(observation: str = "o0", action: str = "a1") \
        -> List[Experience]:
    return [Experience(((observation, action),))]


def mixture(A: ExperienceDistribution, B: ExperienceDistribution, t: float,
            support: Optional[Sequence[Experience]] = None) \
        -> ExperienceDistribution:
    """(1 - t) * A + t * B over the union of both supports."""

    a, b = A.as_dict(), B.as_dict()
    if support is None:
        support = list(A.support) + [h for h in B.support if h not in a]
    return ExperienceDistribution.from_pairs(
        (h, (1.0 - t) * a.get(h, 0.0) + t * b.get(h, 0.0)) for h in support)
