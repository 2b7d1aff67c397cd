import math
import numpy as np
import pytest
from scipy.special import rel_entr
from scipy.stats import binom
from telicstates.exp_dist import Experience, ExperienceDistribution, \
    FeatureSet, Goal, feature_probability, telic_state_of
from telicstates.info_geom import Base, DivergenceValue, kl_divergence, \
    binary_kl, binary_kl_inverse, tilt, information_projection, \
    telic_distance, sanov_rate_estimate, fit_decay_rate, SanovRow, \
    ParametricPolicy, telic_objective, policy_gradient_step, descend, \
    bernoulli_family, bernoulli_features, mixture, \
    finite_difference_gradient
from telicstates.exceptions import UnreachableState, DivergentStart, \
    InvalidStepSize, InvalidTable, GradientOverflow


D_06_03 = 0.192042
D_09_03 = 0.794160


def binary(q: float) -> ExperienceDistribution:
    return ExperienceDistribution.from_mapping({"o0,a0": 1.0 - q,
                                                "o0,a1": q})


def goal_with_cut(cut: float, epsilon: float = 0.02) -> Goal:
    return Goal.from_cuts(FeatureSet.of(bernoulli_features()), epsilon,
                          [cut], ["S_0", "S_G"])


@pytest.fixture
def goal() -> Goal:
    return goal_with_cut(0.9)


def test_divergence_value_units():
    value = DivergenceValue(1.0, Base.BITS)
    assert value.nats == pytest.approx(math.log(2.0))
    assert DivergenceValue(math.log(2.0)).to(Base.BITS).value == \
        pytest.approx(1.0)
    assert str(DivergenceValue(0.5)) == "0.5 nats"
    with pytest.raises(ValueError):
        DivergenceValue(-1.0)
    with pytest.raises(ValueError):
        DivergenceValue(math.nan)


def test_kl_divergence():
    P, Q = binary(0.9), binary(0.3)
    assert kl_divergence(P, Q).nats == pytest.approx(D_09_03, abs=1e-6)
    assert kl_divergence(P, Q, Base.BITS).value == \
        pytest.approx(D_09_03 / math.log(2.0), abs=1e-6)
    assert kl_divergence(Q, Q).nats == 0.0


def test_kl_divergence_absolute_continuity():
    P = binary(0.5)
    Q = ExperienceDistribution.point_mass(Experience.parse("o0,a0"))
    assert kl_divergence(P, Q).value == math.inf
    assert math.isfinite(kl_divergence(Q, P).value)


def test_binary_kl():
    assert binary_kl(0.6, 0.3) == pytest.approx(D_06_03, abs=1e-6)
    assert binary_kl(0.3, 0.3) == 0.0
    assert binary_kl(1.0, 0.5) == pytest.approx(math.log(2.0))


def test_binary_kl_inverse():
    c = binary_kl_inverse(0.3, 0.1, 0.9)
    assert 0.3 < c < 0.9
    assert binary_kl(c, 0.3) == pytest.approx(0.1, abs=1e-9)
    assert binary_kl_inverse(0.3, 1.0, 0.9) == 0.9

    down = binary_kl_inverse(0.7, 0.1, 0.1)
    assert 0.1 < down < 0.7
    assert binary_kl(down, 0.7) == pytest.approx(0.1, abs=1e-9)


def test_tilt_keeps_conditionals(goal):
    Q = ExperienceDistribution.from_mapping({"o0,a0": 0.5, "o0,a1": 0.3,
                                             "o1,a0": 0.2})
    tilted = tilt(Q, goal.state(1), 0.65)
    assert feature_probability(tilted, goal.features) == pytest.approx(0.65)
    a0 = tilted.probability(Experience.parse("o0,a0"))
    b0 = tilted.probability(Experience.parse("o1,a0"))
    assert a0 / b0 == pytest.approx(0.5 / 0.2)


def test_projection_onto_upper_state(goal):
    result = information_projection(binary(0.3), goal.state(1))
    assert result.target_feature_prob == pytest.approx(0.9)
    assert result.divergence.nats == pytest.approx(D_09_03, abs=1e-6)
    assert telic_state_of(result.projected, goal).label == "S_G"
    assert kl_divergence(result.projected, binary(0.3)).nats == \
        pytest.approx(result.divergence.nats)


def test_projection_of_member_is_identity(goal):
    Q = binary(0.3)
    result = information_projection(Q, goal.state(0))
    assert result.projected == Q
    assert result.divergence.nats == 0.0


def test_projection_onto_open_upper_edge(goal):
    Q = binary(0.95)
    result = information_projection(Q, goal.state(0))
    assert telic_state_of(result.projected, goal).label == "S_0"
    assert result.divergence.nats == \
        pytest.approx(binary_kl(0.9, 0.95), rel=1e-6)


def test_projection_is_minimal_among_state_members(goal):
    Q = ExperienceDistribution.from_mapping({"o0,a0": 0.5, "o0,a1": 0.3,
                                             "o1,a0": 0.2})
    best = information_projection(Q, goal.state(1)).divergence.nats
    for c in (0.9, 0.93, 0.97):
        for share in (0.1, 0.4, 0.9):
            rest = 1.0 - c
            alternative = ExperienceDistribution.from_mapping(
                {"o0,a0": rest * share, "o0,a1": c,
                 "o1,a0": rest * (1.0 - share)})
            assert kl_divergence(alternative, Q).nats >= best - 1e-12


GOLDEN = 0.6180339887498949


def scattered_instance(index: int):
    """
    Deterministic instance over two or three experiences, with the goal cut
    placed on the grid used by `simplex_grid`.
    """

    size = 3 if index % 2 else 2
    weights = [0.15 + ((index + 1) * (j + 1) * GOLDEN) % 1.0
               for j in range(size)]
    total = sum(weights)
    masses = [w / total for w in weights]
    members = (0, 1) if size == 3 and index % 4 == 3 else (0,)
    q = sum(masses[j] for j in members)
    scale = 140 if size == 3 else 10000
    cut = math.ceil((q + 0.1 + 0.3 * ((index * 0.41421356) % 1.0)) * scale)
    cut = min(cut, math.floor(0.95 * scale))

    Q = ExperienceDistribution.from_mapping(
        {f"o0,a{j}": mass for j, mass in enumerate(masses)})
    goal = Goal.from_cuts(FeatureSet.parse(f"o0,a{j}" for j in members),
                          0.02, [cut / scale], ["S_0", "S_G"])
    return Q, goal, members, scale, cut


def simplex_grid(size: int, members, scale: int, cut: int) -> np.ndarray:
    """Grid points of the simplex whose feature mass reaches the cut."""

    if size == 2:
        first = np.arange(cut, scale + 1)
        counts = np.stack([first, scale - first], axis=1)
    else:
        a, b = np.meshgrid(np.arange(scale + 1), np.arange(scale + 1),
                           indexing="ij")
        keep = a + b <= scale
        counts = np.stack([a[keep], b[keep], scale - a[keep] - b[keep]],
                          axis=1)
        counts = counts[counts[:, list(members)].sum(axis=1) >= cut]
    return counts / scale


def masses_of(P: ExperienceDistribution, size: int) -> np.ndarray:
    return np.array([P.probability(Experience.parse(f"o0,a{j}"))
                     for j in range(size)])


@pytest.mark.parametrize("index", range(50))
def test_projection_matches_simplex_grid(index):
    Q, goal, members, scale, cut = scattered_instance(index)
    size = len(Q.support)
    q = masses_of(Q, size)
    grid = simplex_grid(size, members, scale, cut)
    brute = float(rel_entr(grid, q).sum(axis=1).min())

    result = information_projection(Q, goal.state(1))
    assert result.divergence.nats <= brute + 1e-9
    assert brute - result.divergence.nats < 1e-4


@pytest.mark.parametrize("index", range(0, 50, 5))
def test_projection_is_exponential_tilt(index):
    Q, goal, members, _, _ = scattered_instance(index)
    size = len(Q.support)
    projected = masses_of(information_projection(Q, goal.state(1)).projected,
                          size)
    ratio = projected / masses_of(Q, size)
    inside = [ratio[j] for j in range(size) if j in members]
    outside = [ratio[j] for j in range(size) if j not in members]
    assert max(inside) == pytest.approx(min(inside), rel=1e-9)
    if outside:
        assert max(outside) == pytest.approx(min(outside), rel=1e-9)
        assert min(inside) > 1.0 > max(outside)


@pytest.mark.parametrize("index", range(1, 50, 4))
def test_projection_satisfies_pythagorean_inequality(index):
    Q, goal, members, scale, cut = scattered_instance(index)
    size = len(Q.support)
    q = masses_of(Q, size)
    result = information_projection(Q, goal.state(1))
    star = masses_of(result.projected, size)
    grid = simplex_grid(size, members, scale, cut)

    direct = rel_entr(grid, q).sum(axis=1)
    via = rel_entr(grid, star).sum(axis=1) + result.divergence.nats
    assert np.all(direct >= via - 1e-9)


def test_projection_violating_absolute_continuity(goal):
    Q = ExperienceDistribution.point_mass(Experience.parse("o0,a0"))
    with pytest.raises(UnreachableState):
        information_projection(Q, goal.state(1))
    assert telic_distance(Q, goal.state(1)).value == math.inf


def test_telic_distance_in_bits(goal):
    distance = telic_distance(binary(0.3), goal.state(1), Base.BITS)
    assert distance.base is Base.BITS
    assert distance.value == pytest.approx(D_09_03 / math.log(2.0),
                                           abs=1e-6)


def test_fit_decay_rate():
    rows = [SanovRow(n, 1, 10 ** 6, 0.2 + math.log(3.0) / n, 0.2)
            for n in (5, 10, 20)]
    assert fit_decay_rate(rows) == pytest.approx(0.2, rel=1e-3)
    assert math.isnan(fit_decay_rate(rows[:1]))


def test_sanov_estimate_is_deterministic():
    Q, state = binary(0.3), goal_with_cut(0.6).state(1)
    first = sanov_rate_estimate(Q, state, [10, 20], 2000, seed=7)
    second = sanov_rate_estimate(Q, state, [10, 20], 2000, seed=7,
                                 threads=2)
    assert first == second


def test_sanov_omits_sizes_without_hits():
    Q, state = binary(0.3), goal_with_cut(0.9).state(1)
    estimate = sanov_rate_estimate(Q, state, [400], 10, seed=1)
    assert estimate.rows == ()
    assert estimate.omitted == (400,)
    assert math.isnan(estimate.decay_rate)


@pytest.mark.slow
def test_sanov_frequencies_match_binomial_tail():
    Q, state = binary(0.3), goal_with_cut(0.6).state(1)
    trials = 100000
    estimate = sanov_rate_estimate(Q, state, [10, 20, 30], trials, seed=3)
    for row in estimate.rows:
        k = round(0.6 * row.n)
        p = float(binom.sf(k - 1, row.n, 0.3))
        spread = 5.0 * math.sqrt(trials * p * (1.0 - p)) + 1.0
        assert abs(row.hits - trials * p) < spread


@pytest.mark.slow
def test_sanov_rate_approaches_telic_distance():
    Q, state = binary(0.3), goal_with_cut(0.6).state(1)
    sizes = list(range(20, 201, 10))
    estimate = sanov_rate_estimate(Q, state, sizes, 100000, seed=11,
                                   threads=4, importance=True)
    assert estimate.telic_distance.nats == pytest.approx(D_06_03, abs=1e-6)
    assert not estimate.omitted
    assert abs(estimate.decay_rate - D_06_03) / D_06_03 < 0.15

    direct = sanov_rate_estimate(Q, state, sizes, 100000, seed=11,
                                 threads=4)
    assert 200 in direct.omitted


def test_importance_sampling_matches_binomial_tail():
    Q, state = binary(0.3), goal_with_cut(0.6).state(1)
    estimate = sanov_rate_estimate(Q, state, [30], 20000, seed=4,
                                   importance=True)
    row, = estimate.rows
    frequency = math.exp(-row.rate_estimate * row.n)
    assert frequency == pytest.approx(float(binom.sf(17, 30, 0.3)), rel=0.1)
    assert row.hits > 10000

    inside = sanov_rate_estimate(binary(0.7), state, [30], 1000, seed=4,
                                 importance=True)
    assert inside.telic_distance.nats == 0.0
    assert inside.rows[0].hits == round(
        1000 * math.exp(-inside.rows[0].rate_estimate * 30))


def test_bernoulli_family():
    generator = bernoulli_family()
    P = generator(np.array([0.25]))
    assert P.probability(Experience.parse("o0,a1")) == pytest.approx(0.25)
    assert P.probability(Experience.parse("o0,a0")) == pytest.approx(0.75)


def test_gradient_step_moves_toward_state():
    state = goal_with_cut(0.6).state(1)
    p = ParametricPolicy((0.55,), bernoulli_family())
    before = telic_objective(p.generator, np.array(p.theta), state)
    stepped = policy_gradient_step(p, state, 0.05)
    after = telic_objective(stepped.generator, np.array(stepped.theta),
                            state)
    assert stepped.theta[0] > 0.55
    assert after < before


def test_descent_converges():
    state = goal_with_cut(0.6).state(1)
    trace = descend(ParametricPolicy((0.55,), bernoulli_family()), state,
                    eta=0.05, iterations=50)
    objectives = [step.objective for step in trace]
    assert trace[0].iteration == 0
    assert all(b <= a for a, b in zip(objectives, objectives[1:]))
    assert objectives[-1] < 1e-6


def test_gradient_step_errors():
    state = goal_with_cut(0.6).state(1)
    p = ParametricPolicy((0.55,), bernoulli_family())
    with pytest.raises(InvalidStepSize):
        policy_gradient_step(p, state, 0.0)
    with pytest.raises(DivergentStart):
        policy_gradient_step(p.with_theta([0.0]), state, 0.05)


def test_gradient_at_parameter_bound():
    state = goal_with_cut(0.6).state(1)
    p = ParametricPolicy((1.0,), bernoulli_family())
    assert finite_difference_gradient(p, state).tolist() == [0.0]
    assert policy_gradient_step(p, state, 0.01).theta == (1.0,)


def test_gradient_near_lower_bound_is_one_sided():
    state = goal_with_cut(0.6).state(1)
    p = ParametricPolicy((5e-6,), bernoulli_family())
    gradient = finite_difference_gradient(p, state)
    assert gradient[0] < 0


def test_gradient_without_feasible_neighbours():
    family = bernoulli_family()

    def pinned(theta: np.ndarray) -> ExperienceDistribution:
        if theta[0] != 0.5:
            raise InvalidTable("Only theta = 0.5 is allowed.")
        return family(theta)

    state = goal_with_cut(0.6).state(1)
    with pytest.raises(GradientOverflow):
        policy_gradient_step(ParametricPolicy((0.5,), pinned), state, 0.01)


def test_small_steps_descend_monotonically():
    state = goal_with_cut(0.6).state(1)
    start = ParametricPolicy((0.55,), bernoulli_family())
    trace = descend(start, state, eta=1e-2, iterations=50)
    objectives = [step.objective for step in trace]
    assert len(trace) == 51
    assert all(b <= a for a, b in zip(objectives, objectives[1:]))
    assert objectives[-1] < objectives[0]

    full = policy_gradient_step(start, state, 1e-2)
    half = policy_gradient_step(start, state, 5e-3)
    assert half.theta[0] - 0.55 == \
        pytest.approx((full.theta[0] - 0.55) / 2.0, rel=1e-9)
    assert telic_objective(full.generator, np.array(full.theta), state) < \
        telic_objective(half.generator, np.array(half.theta), state) < \
        objectives[0]


def test_mixture():
    A = binary(0.2)
    B = ExperienceDistribution.from_mapping({"o1,a0": 1.0})
    M = mixture(A, B, 0.25)
    assert M.probability(Experience.parse("o0,a1")) == pytest.approx(0.15)
    assert M.probability(Experience.parse("o1,a0")) == pytest.approx(0.25)
    assert mixture(A, B, 0.0).probability(Experience.parse("o1,a0")) == 0.0
