# flake8: noqa: F401

from .version import __version__
from .exp_dist import Experience, ExperienceDistribution, TabularPolicy, \
    TabularEnvironment, FeatureSet, Bin, Goal, TelicState, \
    policy_pushforward, feature_probability, telic_state_of, \
    telic_state_of_policy
from .info_geom import Base, DivergenceValue, kl_divergence, \
    information_projection, telic_distance, sanov_rate_estimate, \
    ParametricPolicy, policy_gradient_step
from .telic_control import find_reachable_states, is_telic_controllable, \
    split_unreachable_state, refine_goal, ReachabilityReport
from .discrete_backend import DiscreteBackend, DiscreteInstance
from .gaussian_nav import GaussianPolicy, Region, NavTask, Mode, \
    simulate_trajectories, phase_plot_grid, project_policy_to_state, \
    split_state_gaussian
from .nav_backend import NavigationBackend
from .config import ExperimentConfig, load_config
