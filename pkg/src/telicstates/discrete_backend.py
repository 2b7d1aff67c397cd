"""
The discrete setting for the reachability algorithms: policies are
represented by their experience distributions, states by the bins of a
`Goal`, and complexity is the KL divergence between distributions.
"""

from dataclasses import dataclass
from typing import Dict, Sequence, Tuple
import logging
import math

from .exp_dist import ExperienceDistribution, Goal, TabularPolicy, \
    TabularEnvironment, feature_probability, telic_state_of, \
    telic_state_of_policy, policy_pushforward, TelicState
from .info_geom import information_projection, binary_kl_inverse, \
    tilt, kl_divergence, mixture
from .telic_control import Projection
from .exceptions import UnreachableState


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiscreteInstance:
    """A tabular agent-environment pair together with a goal over it."""

    policy: TabularPolicy
    environment: TabularEnvironment
    horizon: int
    goal: Goal

    def default_distribution(self) -> ExperienceDistribution:
        return policy_pushforward(self.policy, self.environment,
                                  self.horizon)

    def default_state(self) -> TelicState:
        return telic_state_of_policy(self.policy, self.environment,
                                     self.horizon, self.goal)


class DiscreteBackend:
    def states(self, goal: Goal) -> Sequence[str]:
        return goal.labels

    def classify(self, goal: Goal, policy: ExperienceDistribution) -> str:
        return telic_state_of(policy, goal).label

    def project(self, goal: Goal, policy: ExperienceDistribution,
                label: str) -> Projection[ExperienceDistribution]:
        state = goal.state_by_label(label)
        try:
            result = information_projection(policy, state)
        except UnreachableState:
            return Projection(None, math.inf)
        return Projection(result.projected, result.divergence.nats)

    def improve(self, goal: Goal, policy: ExperienceDistribution,
                label: str, delta: float) -> ExperienceDistribution:
        """
        Distribution closest to the state among those within `delta` of
        `policy`: the projection itself when affordable, otherwise the tilt
        whose feature probability sits on the budget boundary.
        """

        state = goal.state_by_label(label)
        projection = information_projection(policy, state)
        if projection.divergence.nats <= delta:
            return projection.projected

        q = feature_probability(policy, goal.features)
        c = binary_kl_inverse(q, delta, projection.target_feature_prob)
        logger.debug("Budget-limited move toward %r: %.9f -> %.9f.",
                     label, q, c)
        return tilt(policy, state, c)

    def complexity(self, policy: ExperienceDistribution,
                   reference: ExperienceDistribution) -> float:
        return kl_divergence(policy, reference).nats

    def interpolate(self, start: ExperienceDistribution,
                    end: ExperienceDistribution,
                    t: float) -> ExperienceDistribution:
        return mixture(start, end, t)

    def make_intermediate_state(self, goal: Goal, target: str,
                                origin: ExperienceDistribution,
                                midpoint: ExperienceDistribution,
                                epsilon: float) -> Tuple[str, Goal]:
        f = feature_probability(midpoint, goal.features)
        target_index = goal.state_by_label(target).index
        updated, label = goal.split_bin(f, target_index, epsilon)
        return label, updated

    def describe(self, policy: ExperienceDistribution) -> Dict[str, object]:
        return {"distribution": policy.to_records()}
