import math
import numpy as np
import pytest
from scipy import integrate
from scipy.stats import norm
from telicstates.gaussian_nav import GaussianPolicy, Region, SearchBox, \
    NavTask, Mode, final_moments, step_distribution, region_probability, \
    delta_p, delta_p_grid, classify_policy, classify_grid, gaussian_kl, \
    policy_complexity, project_policy_to_state, \
    nearest_policy_within_budget, insert_intermediate_region, \
    split_state_gaussian, simulate_trajectories, \
    simulate_terminal_positions, terminal_labels, phase_plot_grid, \
    goal_complexity_curve, granularity_complexity_curve, OUTSIDE
from telicstates.info_geom import Base, DivergenceValue
from telicstates.nav_backend import NavigationBackend
from telicstates.telic_control import find_reachable_states, verify_report, \
    refine_goal, split_unreachable_state
from telicstates.exceptions import InvalidPolicy, InvalidTask, \
    UnknownRegion, StateNotFound, SplitCollision, NoSplitNeeded, \
    SplitCollapsed


@pytest.fixture
def task() -> NavTask:
    return NavTask(horizon=10,
                   regions=(Region(-2.0, 1.0, "S_L"), Region(2.0, 1.0, "S_R")),
                   epsilon=0.1,
                   default=GaussianPolicy(0.0, 1.0),
                   delta=DivergenceValue(0.1),
                   mode=Mode.DIRECT)


@pytest.fixture
def shifted(task) -> NavTask:
    return task.shift_region("S_R", 2.5)


@pytest.fixture
def figure() -> NavTask:
    return NavTask(horizon=30,
                   regions=(Region(-2.0, 0.5, "S_L"), Region(2.0, 0.5, "S_R")),
                   epsilon=0.1,
                   default=GaussianPolicy(0.0, 1.0),
                   delta=DivergenceValue(1.0),
                   mode=Mode.DIRECT)


@pytest.fixture
def coarse(task) -> NavTask:
    return NavTask(horizon=task.horizon, regions=task.regions,
                   epsilon=task.epsilon, default=task.default,
                   delta=task.delta, mode=task.mode,
                   box=SearchBox(resolution=120))


def test_policy_validation():
    with pytest.raises(InvalidPolicy):
        GaussianPolicy(0.0, 0.0)
    with pytest.raises(InvalidPolicy):
        GaussianPolicy(math.nan, 1.0)


def test_task_validation():
    with pytest.raises(InvalidTask):
        NavTask(5, (Region(0.0, 1.0, "A"), Region(1.5, 1.0, "B")), 0.1)
    with pytest.raises(InvalidTask):
        NavTask(5, (Region(-2.0, 1.0, "A"), Region(2.0, 1.0, "A")), 0.1)
    with pytest.raises(InvalidTask):
        NavTask(5, (Region(2.0, 1.0, "S_0"),), 0.1)
    with pytest.raises(InvalidTask):
        NavTask(0, (), 0.1)
    with pytest.raises(InvalidTask):
        NavTask(5, (), 1.0)
    with pytest.raises(InvalidTask):
        Region(0.0, 0.0, "A")
    with pytest.raises(InvalidTask):
        SearchBox(sigma=(0.0, 1.0))


def test_task_lookup(task):
    assert task.labels == ("S_0", "S_L", "S_R")
    assert task.state_index("S_R") == 2
    with pytest.raises(UnknownRegion):
        task.region("S_X")
    assert task.fresh_label() == "S_M"


def test_final_moments():
    accumulate = NavTask(4, (), 0.1)
    mean, std = final_moments(0.5, 2.0, accumulate)
    assert float(mean) == 2.0
    assert float(std) == 4.0

    direct = NavTask(4, (), 0.1, mode=Mode.DIRECT)
    assert step_distribution(GaussianPolicy(2.0, 4.0), direct) == (0.5, 2.0)
    assert step_distribution(GaussianPolicy(2.0, 4.0), accumulate) == \
        (2.0, 4.0)


def test_region_probability(task):
    p = region_probability(task.default, task, task.region("S_R"))
    assert p == pytest.approx(norm.cdf(3.0) - norm.cdf(1.0))


def test_advantages_are_symmetric(task):
    mu = np.linspace(-1.5, 1.5, 7)
    sigma = np.full_like(mu, 0.8)
    left = delta_p_grid(mu, sigma, task, "S_L")
    right = delta_p_grid(-mu, sigma, task, "S_R")
    np.testing.assert_allclose(left, right, atol=1e-12)
    with pytest.raises(UnknownRegion):
        delta_p_grid(mu, sigma, task, "S_0")


def test_classification(task, shifted):
    assert classify_policy(task.default, task) == "S_0"
    assert classify_policy(GaussianPolicy(2.0, 0.5), task) == "S_R"
    assert classify_policy(GaussianPolicy(-2.0, 0.5), task) == "S_L"
    assert delta_p(shifted.default, shifted, "S_L") == \
        pytest.approx(0.0907, abs=1e-4)
    assert classify_policy(shifted.default, shifted) == "S_0"


def test_classification_tie_break_follows_region_order():
    regions = (Region(-1.0, 0.5, "A"), Region(1.0, 0.5, "B"))
    loose = NavTask(1, regions, 0.01, mode=Mode.DIRECT)
    states = classify_grid(np.array([0.0]), np.array([1.0]), loose)
    assert states.tolist() == [0]
    assert classify_policy(GaussianPolicy(-1.0, 0.3), loose) == "A"


def test_gaussian_kl_matches_quadrature():
    mu_ref, sigma_ref = -0.2, 1.3
    for mu in np.linspace(-2.0, 2.0, 10):
        for sigma in np.linspace(0.3, 2.5, 10):
            def integrand(x: float) -> float:
                return norm.pdf(x, mu, sigma) * (
                    norm.logpdf(x, mu, sigma) -
                    norm.logpdf(x, mu_ref, sigma_ref))

            expected, _ = integrate.quad(integrand, mu - 12.0 * sigma,
                                         mu + 12.0 * sigma, epsabs=1e-11,
                                         epsrel=1e-11, limit=200)
            assert abs(float(gaussian_kl(mu, sigma, mu_ref, sigma_ref)) -
                       expected) <= 1e-6
    assert float(gaussian_kl(1.0, 2.0, 1.0, 2.0)) == 0.0


def test_policy_complexity_in_bits():
    value = policy_complexity(GaussianPolicy(1.0, 1.0),
                              GaussianPolicy(0.0, 1.0), Base.BITS)
    assert value.nats == pytest.approx(0.5)
    assert value.base is Base.BITS


def test_projection_onto_reachable_region(task):
    target, cost = project_policy_to_state(task.default, "S_R", task)
    assert cost.nats == pytest.approx(0.0222, abs=2e-3)
    assert classify_policy(target, task) == "S_R"
    assert target.mu > 0
    assert float(gaussian_kl(target.mu, target.sigma, 0.0, 1.0)) == \
        pytest.approx(cost.nats)


def test_projection_of_member_is_free(task):
    target, cost = project_policy_to_state(task.default, "S_0", task)
    assert target == task.default
    assert cost.nats == 0.0


def test_projection_onto_missing_state(task):
    narrow = NavTask(task.horizon, (Region(20.0, 0.5, "S_far"),), 0.1,
                     mode=Mode.DIRECT, box=SearchBox(resolution=50))
    with pytest.raises(StateNotFound):
        project_policy_to_state(narrow.default, "S_far", narrow)


def test_shifted_region_is_out_of_budget(shifted):
    _, cost = project_policy_to_state(shifted.default, "S_R", shifted)
    assert cost.nats > shifted.delta.nats

    best = nearest_policy_within_budget(shifted.default, "S_R", shifted)
    assert float(gaussian_kl(best.mu, best.sigma, 0.0, 1.0)) <= 0.1 + 1e-9
    assert 0.05 < delta_p(best, shifted, "S_R") < shifted.epsilon


def test_nearest_policy_with_zero_budget(task):
    assert nearest_policy_within_budget(task.default, "S_R", task, 0.0) == \
        task.default


def test_split_state(shifted):
    split = split_state_gaussian(shifted, "S_R")
    assert split.labels == ("S_0", "S_L", "S_M", "S_R")

    middle = split.region("S_M")
    assert middle.center == pytest.approx(0.447, abs=0.03)
    assert 0.25 < middle.radius < 0.45

    pi_m = nearest_policy_within_budget(shifted.default, "S_R", shifted)
    assert middle.anchor == pi_m
    assert pi_m.mu == pytest.approx(0.447, abs=0.03)
    assert pi_m.sigma == pytest.approx(1.0, abs=0.1)
    assert classify_policy(pi_m, split) == "S_M"
    assert classify_policy(split.default, split) == "S_0"


def test_split_with_explicit_radius(shifted):
    split = split_state_gaussian(shifted, "S_R", radius=0.2)
    assert split.region("S_M").radius == 0.2


def test_split_not_needed(task):
    with pytest.raises(NoSplitNeeded):
        split_state_gaussian(task, "S_R")


def test_insert_region_collision(task):
    with pytest.raises(SplitCollision):
        insert_intermediate_region(task, "S_R", GaussianPolicy(-1.5, 1.0))


def test_reachability_on_navigation_task(task, shifted):
    backend = NavigationBackend()
    report = find_reachable_states(task.default, task, task.delta, backend)
    assert report.controllable
    assert verify_report(report, task, backend) == []

    report = find_reachable_states(shifted.default, shifted, shifted.delta,
                                   backend)
    assert "S_R" in report.unreachable
    assert "S_L" in report.reachable


@pytest.mark.parametrize("label", ["S_L", "S_R"])
def test_projection_beats_dense_grid(shifted, label):
    target, cost = project_policy_to_state(shifted.default, label, shifted)
    assert classify_policy(target, shifted) == label

    mus, sigmas = shifted.box.axes(1000)
    M, S = np.meshgrid(mus, sigmas)
    inside = classify_grid(M, S, shifted) == shifted.state_index(label)
    dense = float(np.min(np.where(inside, gaussian_kl(M, S, 0.0, 1.0),
                                  np.inf)))
    assert cost.nats <= dense + 1e-4
    assert dense - cost.nats < 5e-3


def test_reachable_sets_grow_with_budget_on_navigation_task(shifted):
    backend = NavigationBackend()
    budgets = [0.0, 0.02, 0.05, 0.1, 0.3, 1.0]
    reached = [set(find_reachable_states(shifted.default, shifted, delta,
                                         backend).reachable)
               for delta in budgets]
    assert reached[0] == {"S_0"}
    assert reached[-1] == {"S_0", "S_L", "S_R"}
    for smaller, larger in zip(reached, reached[1:]):
        assert smaller <= larger


def test_split_unreachable_state_on_navigation_task(shifted):
    backend = NavigationBackend()
    pi0 = shifted.default
    split = split_unreachable_state(pi0, shifted, "S_R", shifted.delta,
                                    shifted.epsilon, backend)
    assert 0.0 < split.t_star < 1.0
    assert backend.complexity(split.midpoint, pi0) == \
        pytest.approx(0.1, abs=1e-9)

    target = backend.project(shifted, pi0, "S_R").target
    beyond = backend.interpolate(pi0, target, split.t_star + 1e-4)
    assert backend.complexity(beyond, pi0) > 0.1

    updated = split.updated_goal
    assert split.new_state == "S_M"
    assert updated.labels == ("S_0", "S_L", "S_M", "S_R")
    assert updated.region("S_M").anchor == split.midpoint
    assert backend.classify(updated, split.midpoint) == "S_M"
    assert backend.classify(updated, pi0) == "S_0"


def test_figure_shift_needs_to_clear_one_nat(figure):
    backend = NavigationBackend()
    _, cost = project_policy_to_state(figure.default, "S_R", figure)
    assert cost.nats == pytest.approx(0.0959, abs=0.01)
    assert find_reachable_states(figure.default, figure, figure.delta,
                                 backend).controllable

    # Half a unit further out, S_R is still a single step away.
    near = figure.shift_region("S_R", 2.5)
    _, cost = project_policy_to_state(near.default, "S_R", near)
    assert cost.nats == pytest.approx(0.343, abs=0.02)
    assert find_reachable_states(near.default, near, near.delta,
                                 backend).controllable

    far = figure.shift_region("S_R", 3.5)
    _, cost = project_policy_to_state(far.default, "S_R", far)
    assert cost.nats == pytest.approx(1.356, abs=0.05)
    report = find_reachable_states(far.default, far, far.delta, backend)
    assert report.unreachable == ("S_R",)


def test_refine_figure_task(figure):
    backend = NavigationBackend()
    far = figure.shift_region("S_R", 3.5)
    refined = refine_goal(far.default, far, far.delta, 0.1, backend)
    assert refined.labels == ("S_0", "S_L", "S_M", "S_R")
    assert classify_policy(refined.default, refined) == "S_0"

    anchor = refined.region("S_M").anchor
    assert anchor is not None
    assert classify_policy(anchor, refined) == "S_M"
    assert backend.improve(refined, refined.default, "S_M", 1.0) == anchor

    report = find_reachable_states(refined.default, refined, refined.delta,
                                   backend)
    assert report.controllable
    assert verify_report(report, refined, backend) == []
    assert [link.label for link in report.chains["S_R"]] == \
        ["S_0", "S_M", "S_R"]
    assert report.chain_length("S_R") == 2
    assert report.chains["S_R"][-1].step_complexity == \
        pytest.approx(0.45, abs=0.05)


def test_default_state_is_never_split(task):
    backend = NavigationBackend()
    with pytest.raises(SplitCollapsed):
        backend.make_intermediate_state(task, "S_0", task.default,
                                        task.default, task.epsilon)


def test_navigation_backend():
    backend = NavigationBackend()
    start, end = GaussianPolicy(0.0, 1.0), GaussianPolicy(1.0, 2.0)
    assert backend.interpolate(start, end, 0.25) == GaussianPolicy(0.25, 1.25)
    assert backend.complexity(end, start) == \
        pytest.approx(math.log(0.5) + 2.5 - 0.5)
    assert backend.describe(end) == {"mu": 1.0, "sigma": 2.0}


def test_terminal_labels(task):
    labels = terminal_labels(np.array([-2.0, 0.0, 2.0, 3.0]), task)
    assert labels == ("S_L", OUTSIDE, "S_R", "S_R")


def test_simulation_is_reproducible(task):
    p = GaussianPolicy(0.3, 0.8)
    first = simulate_trajectories(p, task, 50, seed=5)
    second = simulate_trajectories(p, task, 50, seed=5)
    assert first.positions.shape == (50, task.horizon + 1)
    assert np.all(first.positions[:, 0] == 0.0)
    np.testing.assert_array_equal(first.positions, second.positions)
    assert first.labels == second.labels

    finals = simulate_terminal_positions(p, task, 50, seed=5)
    np.testing.assert_array_equal(finals, first.positions[:, -1])

    with pytest.raises(ValueError):
        simulate_trajectories(p, task, 0, seed=5)


@pytest.mark.slow
def test_simulated_frequencies_match_closed_form():
    task = NavTask(5, (Region(-2.0, 1.0, "S_L"), Region(2.0, 1.0, "S_R")),
                   0.1)
    n = 10 ** 6
    policies = [GaussianPolicy(mu, sigma) for mu, sigma in (
        (0.0, 0.4), (0.1, 0.3), (-0.2, 0.5), (0.3, 0.3), (-0.4, 0.4),
        (0.5, 0.6), (-0.1, 0.8), (0.2, 0.45), (0.4, 0.35), (-0.3, 0.15))]
    for seed, p in enumerate(policies):
        finals = simulate_terminal_positions(p, task, n, seed=seed)
        mean, std = final_moments(p.mu, p.sigma, task)
        assert np.mean(finals) == pytest.approx(float(mean), abs=0.01)
        assert np.std(finals) == pytest.approx(float(std), rel=0.01)

        for region in task.regions:
            expected = region_probability(p, task, region)
            observed = np.mean(region.contains(finals))
            error = math.sqrt(expected * (1 - expected) / n)
            assert abs(observed - expected) <= 3 * error


def test_phase_plot_grid(task):
    grid = phase_plot_grid(task, resolution=60)
    assert grid.states.shape == (60, 60)
    assert set(grid.delta_p) == {"S_L", "S_R"}
    assert grid.contours[0.1]

    cell = grid.cell(30, 45)
    policy = GaussianPolicy(cell.mu, cell.sigma)
    assert cell.label == classify_policy(policy, task)
    assert cell.complexity == pytest.approx(
        float(gaussian_kl(cell.mu, cell.sigma, 0.0, 1.0)))
    assert len(list(grid.cells())) == 3600

    for line in grid.contours[0.1]:
        for mu, sigma in line:
            assert float(gaussian_kl(mu, sigma, 0.0, 1.0)) == \
                pytest.approx(0.1, abs=5e-3)


def test_goal_complexity_curve(coarse):
    curves = goal_complexity_curve(coarse, coarse.default,
                                   [0.0, 0.02, 0.05, 0.1, 0.2])
    assert curves.violations() == []
    assert curves.x == (0.0, 0.02, 0.05, 0.1, 0.2)
    assert curves.values["S_R"][0] == pytest.approx(0.0, abs=1e-12)
    assert curves.values["S_R"][-1] >= coarse.epsilon
    assert all(d == 1 for d in curves.directions.values())

    with pytest.raises(InvalidTask):
        goal_complexity_curve(coarse, coarse.default, [0.1, 0.05])


def test_granularity_complexity_curve(coarse):
    curves = granularity_complexity_curve(coarse, coarse.default,
                                          [0.05, 0.2, 0.1])
    assert curves.x == pytest.approx((-math.log(0.2), -math.log(0.1),
                                      -math.log(0.05)))
    assert curves.violations() == []
    assert curves.values["S_0"] == (0.0, 0.0, 0.0)
    costs = curves.values["S_R"]
    assert costs[0] > costs[1] > costs[2] > 0
    assert curves.directions == {"S_0": 1, "S_L": -1, "S_R": -1}

    with pytest.raises(InvalidTask):
        granularity_complexity_curve(coarse, coarse.default, [1.5])
