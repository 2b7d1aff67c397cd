"""
Experiences, finite-support experience distributions, tabular policies and
environments, feature sets, goals and the telic partition they induce.

History keys are the comma-joined symbol-ids of a prefix, e.g. ``"o0,a1,o0"``.
An environment row is keyed by the prefix preceding an observation (the empty
string for the first step); a policy row is keyed by the prefix that ends
with the current observation.
"""

from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Collection, Dict, FrozenSet, Iterable, \
    Iterator, List, Mapping, Optional, Sequence, Tuple
import logging
import math

import numpy as np

from .exceptions import UnknownHistory, EnumerationTooLarge, NoSamples, \
    NotNormalized, DuplicateExperience, InvalidTable, UnknownSymbol, \
    InvalidGoal, SplitCollapsed


logger = logging.getLogger(__name__)

NORMALIZATION_TOLERANCE = 1e-9
RENORMALIZATION_TOLERANCE = 1e-6
DEFAULT_ENUMERATION_CAP = 10 ** 6

Step = Tuple[str, str]


@dataclass(frozen=True)
class Experience:
    steps: Tuple[Step, ...] = ()

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def symbols(self) -> Tuple[str, ...]:
        return tuple(symbol for step in self.steps for symbol in step)

    @property
    def key(self) -> str:
        return ",".join(self.symbols)

    @classmethod
    def parse(cls, key: str) -> "Experience":
        key = key.strip()
        if not key:
            return cls()

        symbols = [symbol.strip() for symbol in key.split(",")]
        if len(symbols) % 2 != 0 or not all(symbols):
            raise UnknownSymbol(f"Malformed experience key {key!r}.")

        return cls(tuple(zip(symbols[0::2], symbols[1::2])))

    def check_alphabets(self,
                        observations: Collection[str],
                        actions: Collection[str]) -> None:
        for observation, action in self.steps:
            if observation not in observations:
                raise UnknownSymbol(f"Observation {observation!r} is not "
                                    "in the observation alphabet.")
            if action not in actions:
                raise UnknownSymbol(f"Action {action!r} is not "
                                    "in the action alphabet.")

    def __str__(self) -> str:
        return self.key


def _normalize(masses: Sequence[float], what: str) -> Tuple[float, ...]:
    if any(m < 0 or not math.isfinite(m) for m in masses):
        raise NotNormalized(f"{what} has a negative or non-finite entry.")

    total = math.fsum(masses)
    if abs(total - 1.0) <= NORMALIZATION_TOLERANCE:
        return tuple(float(m) for m in masses)
    if abs(total - 1.0) <= RENORMALIZATION_TOLERANCE:
        return tuple(float(m) / total for m in masses)

    raise NotNormalized(f"{what} sums to {total!r}, not 1.")


@dataclass(frozen=True)
class ExperienceDistribution:
    """
    A probability measure with finite support over experiences.

    Masses must be non-negative and sum to one. Totals within 1e-6 of one
    are renormalized on construction, anything further off is rejected, so
    every instance satisfies the 1e-9 normalization tolerance. Support
    entries are distinct; zero masses are allowed and kept.
    """

    support: Tuple[Experience, ...]
    mass: Tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.support) != len(self.mass):
            raise NotNormalized("Support and mass have different lengths.")
        if len(set(self.support)) != len(self.support):
            raise DuplicateExperience("Support entries must be distinct.")

        object.__setattr__(self, "mass",
                           _normalize(self.mass, "Experience distribution"))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[Experience, float]]) \
            -> "ExperienceDistribution":
        support: List[Experience] = []
        mass: List[float] = []
        for experience, probability in pairs:
            support.append(experience)
            mass.append(probability)
        return cls(tuple(support), tuple(mass))

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, float]) \
            -> "ExperienceDistribution":
        return cls.from_pairs((Experience.parse(key), value)
                              for key, value in mapping.items())

    @classmethod
    def point_mass(cls, experience: Experience) -> "ExperienceDistribution":
        return cls((experience,), (1.0,))

    @property
    def masses(self) -> np.ndarray:
        return np.asarray(self.mass, dtype=float)

    def items(self) -> Iterator[Tuple[Experience, float]]:
        return zip(self.support, self.mass)

    def probability(self, experience: Experience) -> float:
        for candidate, probability in self.items():
            if candidate == experience:
                return probability
        return 0.0

    def as_dict(self) -> Dict[Experience, float]:
        return dict(self.items())

    def to_records(self) -> List[Dict[str, object]]:
        return [{"experience": h.key, "mass": m} for h, m in self.items()]

    @classmethod
    def from_records(cls, records: Iterable[Mapping[str, object]]) \
            -> "ExperienceDistribution":
        pairs = []
        for record in records:
            key = record["experience"]
            mass = record["mass"]
            if not isinstance(key, str) or \
               not isinstance(mass, (int, float)):
                raise NotNormalized(f"Malformed distribution record "
                                    f"{dict(record)!r}.")
            pairs.append((Experience.parse(key), float(mass)))
        return cls.from_pairs(pairs)

    def __len__(self) -> int:
        return len(self.support)


def _check_vector(vector: Mapping[str, float], alphabet: Collection[str],
                  table: str, key: str) -> Dict[str, float]:
    unknown = [symbol for symbol in vector if symbol not in alphabet]
    if unknown:
        raise InvalidTable(f"Row {key!r} of the {table} table uses symbols "
                           f"{unknown!r} outside its alphabet.")

    values = [float(v) for v in vector.values()]
    if any(v < 0 or not math.isfinite(v) for v in values):
        raise InvalidTable(f"Row {key!r} of the {table} table has a "
                           "negative or non-finite probability.")
    if abs(math.fsum(values) - 1.0) > NORMALIZATION_TOLERANCE:
        raise InvalidTable(f"Row {key!r} of the {table} table does not "
                           "sum to 1.")

    return {symbol: float(v) for symbol, v in vector.items()}


@dataclass(frozen=True)
class TabularPolicy:
    actions: Tuple[str, ...]
    table: Mapping[str, Mapping[str, float]]

    def __post_init__(self) -> None:
        checked = {key: _check_vector(row, self.actions, "policy", key)
                   for key, row in self.table.items()}
        object.__setattr__(self, "table", checked)

    def probability(self, history: str, action: str) -> float:
        try:
            row = self.table[history]
        except KeyError:
            raise UnknownHistory(history, "policy") from None
        return row.get(action, 0.0)

    @classmethod
    def stationary(cls, observations: Sequence[str], actions: Sequence[str],
                   horizon: int, probabilities: Mapping[str, float]) \
            -> "TabularPolicy":
        """Same action distribution after every history up to `horizon`."""

        table = {key: dict(probabilities)
                 for key in _policy_keys(observations, actions, horizon)}
        return cls(tuple(actions), table)


@dataclass(frozen=True)
class TabularEnvironment:
    observations: Tuple[str, ...]
    table: Mapping[str, Mapping[str, float]]
    horizon: int

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise InvalidTable("Environment horizon must be positive.")

        checked = {key: _check_vector(row, self.observations,
                                      "environment", key)
                   for key, row in self.table.items()}
        object.__setattr__(self, "table", checked)

    def probability(self, history: str, observation: str) -> float:
        try:
            row = self.table[history]
        except KeyError:
            raise UnknownHistory(history, "environment") from None
        return row.get(observation, 0.0)

    @classmethod
    def stationary(cls, observations: Sequence[str], actions: Sequence[str],
                   horizon: int, probabilities: Mapping[str, float]) \
            -> "TabularEnvironment":
        table = {key: dict(probabilities)
                 for key in _environment_keys(observations, actions, horizon)}
        return cls(tuple(observations), table, horizon)


def _prefixes(observations: Sequence[str], actions: Sequence[str],
              length: int) -> Iterator[List[str]]:
    if length == 0:
        yield []
        return
    for prefix in _prefixes(observations, actions, length - 1):
        for observation in observations:
            for action in actions:
                yield prefix + [observation, action]


def _environment_keys(observations: Sequence[str], actions: Sequence[str],
                      horizon: int) -> Iterator[str]:
    for length in range(horizon):
        for prefix in _prefixes(observations, actions, length):
            yield ",".join(prefix)


def _policy_keys(observations: Sequence[str], actions: Sequence[str],
                 horizon: int) -> Iterator[str]:
    for length in range(horizon):
        for prefix in _prefixes(observations, actions, length):
            for observation in observations:
                yield ",".join(prefix + [observation])


def trajectory_probability(policy: TabularPolicy, env: TabularEnvironment,
                           h: Experience) -> float:
    h.check_alphabets(env.observations, policy.actions)

    probability = 1.0
    symbols: List[str] = []
    for observation, action in h.steps:
        probability *= env.probability(",".join(symbols), observation)
        symbols.append(observation)
        probability *= policy.probability(",".join(symbols), action)
        symbols.append(action)

    return probability


def policy_pushforward(policy: TabularPolicy, env: TabularEnvironment,
                       n: int, cap: int = DEFAULT_ENUMERATION_CAP) \
        -> ExperienceDistribution:
    if n < 0:
        raise InvalidTable("Experience length must be non-negative.")
    if n > env.horizon:
        raise InvalidTable(f"Length {n} exceeds the environment horizon "
                           f"{env.horizon}.")

    size = (len(env.observations) * len(policy.actions)) ** n
    if size > cap:
        raise EnumerationTooLarge(f"Enumerating {size} experiences exceeds "
                                  f"the cap of {cap}.")

    pairs: List[Tuple[Experience, float]] = []
    stack: List[Tuple[Tuple[Step, ...], float]] = [((), 1.0)]
    while stack:
        steps, probability = stack.pop()
        if len(steps) == n:
            pairs.append((Experience(steps), probability))
            continue

        prefix = Experience(steps).key
        for observation in reversed(env.observations):
            p_obs = env.probability(prefix, observation)
            if p_obs <= 0:
                continue
            history = f"{prefix},{observation}" if prefix else observation
            for action in reversed(policy.actions):
                p_act = policy.probability(history, action)
                if p_act > 0:
                    stack.append((steps + ((observation, action),),
                                  probability * p_obs * p_act))

    logger.debug("Pushforward at length %d has %d experiences.",
                 n, len(pairs))
    return ExperienceDistribution.from_pairs(pairs)


def empirical_distribution(samples: Sequence[Experience]) \
        -> ExperienceDistribution:
    if not samples:
        raise NoSamples("Empirical distribution needs at least one sample.")

    counts = Counter(samples)
    total = len(samples)
    return ExperienceDistribution.from_pairs(
        (experience, count / total) for experience, count in counts.items())


@dataclass(frozen=True)
class FeatureSet:
    """The desired-experience subset of a goal, as a pure membership test."""

    predicate: Callable[[Experience], bool]
    members: Optional[FrozenSet[Experience]] = None

    @classmethod
    def of(cls, experiences: Iterable[Experience]) -> "FeatureSet":
        members = frozenset(experiences)
        return cls(members.__contains__, members)

    @classmethod
    def parse(cls, keys: Iterable[str]) -> "FeatureSet":
        return cls.of(Experience.parse(key) for key in keys)

    def __contains__(self, experience: object) -> bool:
        return isinstance(experience, Experience) and \
            bool(self.predicate(experience))


def feature_probability(P: ExperienceDistribution, phi: FeatureSet) -> float:
    return min(1.0, math.fsum(m for h, m in P.items() if h in phi))


@dataclass(frozen=True)
class Bin:
    lo: float
    hi: float
    label: str

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class Goal:
    """
    A goal operationalized as a feature set, a sensitivity and an ordered
    partition of feature probability into bins.

    Bins are half-open ``[lo, hi)`` except the last one which also holds
    1.0. They are listed in increasing feature probability, which is also
    the goal's preference order: a later bin is strictly preferred to an
    earlier one.
    """

    features: FeatureSet
    epsilon: float
    bins: Tuple[Bin, ...]

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise InvalidGoal(f"Sensitivity {self.epsilon!r} is outside "
                              "[0, 1].")
        if not self.bins:
            raise InvalidGoal("A goal needs at least one bin.")
        if self.bins[0].lo != 0.0 or self.bins[-1].hi != 1.0:
            raise InvalidGoal("Bins must cover [0, 1].")

        for previous, current in zip(self.bins, self.bins[1:]):
            if not math.isclose(previous.hi, current.lo, abs_tol=1e-12):
                raise InvalidGoal(f"Bins {previous.label!r} and "
                                  f"{current.label!r} are not contiguous.")

        for item in self.bins:
            if item.width < self.epsilon - 1e-12 or item.width <= 0:
                raise InvalidGoal(f"Bin {item.label!r} is narrower than the "
                                  f"sensitivity {self.epsilon!r}.")

        labels = self.labels
        if len(set(labels)) != len(labels):
            raise InvalidGoal("Bin labels must be unique.")

    @classmethod
    def from_cuts(cls, features: FeatureSet, epsilon: float,
                  cuts: Sequence[float], labels: Sequence[str]) -> "Goal":
        edges = [0.0] + list(cuts) + [1.0]
        if len(labels) != len(edges) - 1:
            raise InvalidGoal("Need exactly one label per bin.")
        bins = tuple(Bin(lo, hi, label)
                     for lo, hi, label in zip(edges, edges[1:], labels))
        return cls(features, epsilon, bins)

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(item.label for item in self.bins)

    def bin_index(self, f: float) -> int:
        last = len(self.bins) - 1
        for index, item in enumerate(self.bins):
            if f < item.hi or index == last:
                return index
        return last

    def state(self, index: int) -> "TelicState":
        return TelicState(self, index, self.bins[index].label)

    def state_by_label(self, label: str) -> "TelicState":
        for index, item in enumerate(self.bins):
            if item.label == label:
                return self.state(index)
        raise KeyError(label)

    def states(self) -> List["TelicState"]:
        return [self.state(index) for index in range(len(self.bins))]

    def fresh_label(self, base: str = "S_M") -> str:
        if base not in self.labels:
            return base
        suffix = 2
        while f"{base}{suffix}" in self.labels:
            suffix += 1
        return f"{base}{suffix}"

    def split_bin(self, midpoint: float, target_index: int,
                  epsilon: Optional[float] = None) -> Tuple["Goal", str]:
        """
        Carve the epsilon-neighbourhood of `midpoint` out of the bin that
        holds it, on the side facing `target_index`. The carved interval
        becomes a new state ordered between the old bin and the target.
        `epsilon` defaults to the goal's own sensitivity.
        """

        width = self.epsilon if epsilon is None else epsilon

        index = self.bin_index(midpoint)
        host = self.bins[index]
        label = self.fresh_label()

        if target_index > index:
            cut = midpoint - width
            pieces = (Bin(host.lo, cut, host.label), Bin(cut, host.hi, label))
        elif target_index < index:
            cut = midpoint + width
            pieces = (Bin(host.lo, cut, label), Bin(cut, host.hi, host.label))
        else:
            raise SplitCollapsed(f"Midpoint {midpoint!r} already lies in "
                                 f"the target state {host.label!r}.")

        if not host.lo < cut < host.hi or \
           min(piece.width for piece in pieces) < width - 1e-12:
            raise SplitCollapsed(f"Split of {host.label!r} at {midpoint!r} "
                                 "produced no new state.")

        bins = self.bins[:index] + pieces + self.bins[index + 1:]
        return Goal(self.features, self.epsilon, bins), label


@dataclass(frozen=True)
class TelicState:
    goal: Goal = field(repr=False)
    index: int
    label: str

    def __post_init__(self) -> None:
        if not 0 <= self.index < len(self.goal.bins):
            raise InvalidGoal(f"Bin index {self.index} is out of range.")

    @property
    def bin(self) -> Bin:
        return self.goal.bins[self.index]

    def nearest_point(self, f: float) -> float:
        """Point of this state's feature interval closest to `f`."""

        item = self.bin
        last = self.index == len(self.goal.bins) - 1
        upper = item.hi if last else item.hi - INTERIOR_MARGIN
        if f < item.lo:
            return item.lo
        if f > upper:
            return upper
        return f


# Keeps points projected onto an open upper edge inside their bin.
INTERIOR_MARGIN = 1e-12


class Ordering(Enum):
    A_PREFERRED = "A>B"
    B_PREFERRED = "B>A"
    EQUIVALENT = "A~B"


def epsilon_equivalent(A: ExperienceDistribution, B: ExperienceDistribution,
                       g: Goal) -> bool:
    difference = feature_probability(A, g.features) - \
        feature_probability(B, g.features)
    return abs(difference) <= g.epsilon


def prefers(A: ExperienceDistribution, B: ExperienceDistribution,
            g: Goal) -> Ordering:
    difference = feature_probability(A, g.features) - \
        feature_probability(B, g.features)
    if abs(difference) <= g.epsilon:
        return Ordering.EQUIVALENT
    return Ordering.A_PREFERRED if difference > 0 else Ordering.B_PREFERRED


def telic_state_of(P: ExperienceDistribution, g: Goal) -> TelicState:
    return g.state(g.bin_index(feature_probability(P, g.features)))


def telic_state_of_policy(policy: TabularPolicy, env: TabularEnvironment,
                          n: int, g: Goal) -> TelicState:
    return telic_state_of(policy_pushforward(policy, env, n), g)
