"""
The navigation task as a setting for the reachability algorithms: policies
are (mu, sigma) pairs, the goal is the `NavTask` itself and interpolation
happens in parameter space, so every point on a split path is a policy.
"""

from typing import Dict, Sequence, Tuple
import logging
import math

from .gaussian_nav import GaussianPolicy, NavTask, classify_policy, \
    project_policy_to_state, nearest_policy_within_budget, gaussian_kl, \
    insert_intermediate_region
from .telic_control import Projection
from .exceptions import StateNotFound, SplitCollapsed


logger = logging.getLogger(__name__)


class NavigationBackend:
    def states(self, goal: NavTask) -> Sequence[str]:
        return goal.labels

    def classify(self, goal: NavTask, policy: GaussianPolicy) -> str:
        return classify_policy(policy, goal)

    def project(self, goal: NavTask, policy: GaussianPolicy,
                label: str) -> Projection[GaussianPolicy]:
        try:
            target, cost = project_policy_to_state(policy, label, goal)
        except StateNotFound:
            return Projection(None, math.inf)
        return Projection(target, cost.nats)

    def improve(self, goal: NavTask, policy: GaussianPolicy, label: str,
                delta: float) -> GaussianPolicy:
        """
        An inserted state is entered at its anchor when that is affordable;
        otherwise at the information projection, or as close as the budget
        allows.
        """

        if label != goal.default_label:
            anchor = goal.region(label).anchor
            if anchor is not None and \
               self.complexity(anchor, policy) <= delta and \
               self.classify(goal, anchor) == label:
                return anchor

        projection = self.project(goal, policy, label)
        if projection.target is not None and projection.divergence <= delta:
            return projection.target
        return nearest_policy_within_budget(policy, label, goal, delta)

    def complexity(self, policy: GaussianPolicy,
                   reference: GaussianPolicy) -> float:
        return float(gaussian_kl(policy.mu, policy.sigma,
                                 reference.mu, reference.sigma))

    def interpolate(self, start: GaussianPolicy, end: GaussianPolicy,
                    t: float) -> GaussianPolicy:
        return GaussianPolicy((1.0 - t) * start.mu + t * end.mu,
                              (1.0 - t) * start.sigma + t * end.sigma)

    def make_intermediate_state(self, goal: NavTask, target: str,
                                origin: GaussianPolicy,
                                midpoint: GaussianPolicy,
                                epsilon: float) -> Tuple[str, NavTask]:
        if target == goal.default_label:
            raise SplitCollapsed(f"The default state {target!r} has no "
                                 "region to split.")
        task = goal if epsilon == goal.epsilon else goal.with_epsilon(epsilon)
        label = task.fresh_label()
        return label, insert_intermediate_region(task, target, midpoint)

    def describe(self, policy: GaussianPolicy) -> Dict[str, object]:
        return dict(policy.as_dict())
