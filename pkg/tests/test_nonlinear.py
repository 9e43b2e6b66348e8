import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contest_opt.distributions import DistributionSpec, ParameterError, make_grid
from contest_opt.mechanism import canonical_utility
from contest_opt.nonlinear import (
    CostFamily,
    CostSpec,
    DiscreteTypeModel,
    certainty_equivalent_effort,
    construct_discrete_contest,
    global_ic_check_discrete,
    load_discrete_model,
    menu_utility,
    recommendation_cost_gap,
)
from menus import cost_gap_failures, dominance_failures

TWO_TYPES = DiscreteTypeModel([0.0, 1.0], [0.5, 0.5], [0.2, 0.8])
# hand induction: U(0) = 0.2, C(s1) = 0.6 so s1 = √1.2, and U(1) = 0.8 - (√1.2 - 1)²/2 = √1.2 - 0.3
S1 = 1.0954451150103321
U1 = 0.7954451150103323


def test_two_type_quadratic_example():
    out = construct_discrete_contest(TWO_TYPES, CostSpec.quadratic())
    assert out.signals[0] == 0.0 and out.utility[0] == 0.2
    assert out.signals[1] == pytest.approx(S1, abs=1e-12)
    assert out.utility[1] == pytest.approx(U1, abs=1e-12)
    assert global_ic_check_discrete(TWO_TYPES, CostSpec.quadratic(), out.signals, out.utility).passed


def test_two_type_deviations_by_hand():
    out = construct_discrete_contest(TWO_TYPES, CostSpec.quadratic())
    rep = global_ic_check_discrete(TWO_TYPES, CostSpec.quadratic(), out.signals, out.utility)
    # low mimics high: 0.8 - 1.2/2 = 0.2 (indifferent); high mimics low: 0.2 < U1
    np.testing.assert_allclose(rep.gains, [[0.0, 0.0], [0.2 - U1, 0.0]], atol=1e-12)


def test_lowered_target_is_caught():
    out = construct_discrete_contest(TWO_TYPES, CostSpec.quadratic())
    s = out.signals.copy()
    s[1] -= 0.1
    U = TWO_TYPES.Q - CostSpec.quadratic().signal_cost(s, TWO_TYPES.types)
    rep = global_ic_check_discrete(TWO_TYPES, CostSpec.quadratic(), s, U)
    assert not rep.passed and rep.pair == (0, 1)
    assert rep.worst_gain == pytest.approx(0.6 - (S1 - 0.1) ** 2 / 2)


def test_constant_allocation_needs_no_effort():
    m = DiscreteTypeModel([0.1, 0.4, 0.5, 0.9], [0.25] * 4, [0.3] * 4)
    out = construct_discrete_contest(m, CostSpec.power_law(2.0, 1.5))
    np.testing.assert_array_equal(out.signals[1:], m.types[:-1])
    np.testing.assert_array_equal(out.efforts, 0.0)
    np.testing.assert_array_equal(out.utility, 0.3)


def test_single_type_is_vacuous():
    m = DiscreteTypeModel([0.3], [1.0], [0.6])
    out = construct_discrete_contest(m, CostSpec.quadratic())
    assert out.utility[0] == 0.6
    assert global_ic_check_discrete(m, CostSpec.quadratic(), out.signals, out.utility).passed


@pytest.mark.parametrize("eta", [0.5, 1.0, 3.0])
def test_linear_cost_matches_canonical_utility(eta):
    grid = make_grid(DistributionSpec("power", p=2.0), 60)
    Q = grid.efficient_allocation(3, 1)
    m = DiscreteTypeModel(grid.points, grid.weights / grid.weights.sum(), Q)
    out = construct_discrete_contest(m, CostSpec.linear(eta))
    np.testing.assert_allclose(out.utility, canonical_utility(Q, grid, eta), atol=1e-12)


def test_model_validation_names_field():
    with pytest.raises(ParameterError, match="^Q:"):
        DiscreteTypeModel([0, 1], [0.5, 0.5], [0.8, 0.2])
    with pytest.raises(ParameterError, match="^probs:"):
        DiscreteTypeModel([0, 1], [0.5, 0.6], [0.2, 0.8])
    with pytest.raises(ParameterError, match="^types:"):
        DiscreteTypeModel([1, 0], [0.5, 0.5], [0.2, 0.8])
    with pytest.raises(ParameterError, match="cost.p"):
        CostSpec.power_law(1.0, 2.5)
    with pytest.raises(ParameterError, match="cost.family"):
        CostSpec("cubic")


def test_cost_inverse_round_trip():
    e = np.linspace(0, 3, 31)
    for cost in (CostSpec.linear(2.0), CostSpec.quadratic(0.5), CostSpec.power_law(1.3, 1.7)):
        np.testing.assert_allclose(cost.inverse(cost(e)), e, atol=1e-12)
        assert cost(0.0) == 0.0
        assert np.all(np.diff(cost(e)) > 0)


def test_certainty_equivalent_examples():
    assert certainty_equivalent_effort(CostSpec.quadratic(), [0.7]) == pytest.approx(0.7, abs=1e-15)
    assert certainty_equivalent_effort(CostSpec.quadratic(), [0.0, 2.0]) == pytest.approx(math.sqrt(2), abs=1e-15)
    e, w = [0.1, 0.5, 2.0], [0.2, 0.5, 0.3]
    assert certainty_equivalent_effort(CostSpec.linear(3.0), e, w) == pytest.approx(np.dot(e, w), abs=1e-15)
    with pytest.raises(ParameterError):
        certainty_equivalent_effort(CostSpec.quadratic(), [-1.0, 1.0])


def test_recommendation_cost_gap_battery():
    assert cost_gap_failures(1000, seed=2024) == 0


def test_gap_vanishes_at_zero_shift():
    assert recommendation_cost_gap(CostSpec.power_law(1.0, 1.4), [0.0, 1.0, 3.0], eps=0.0) == pytest.approx(0, abs=1e-12)


@given(theta=st.floats(0, 2), dtheta=st.floats(0, 2), xa=st.floats(0, 1), xb=st.floats(0, 1),
       sb=st.floats(0, 3), ds=st.floats(0, 2), fam=st.integers(0, 2), p=st.floats(1, 2))
@settings(max_examples=300, deadline=None)
def test_single_crossing_of_deterministic_options(theta, dtheta, xa, xb, sb, ds, fam, p):
    cost = [CostSpec.linear(1.5), CostSpec.quadratic(1.0), CostSpec.power_law(2.0, p)][fam]
    sa = sb + ds
    gain = lambda t: (xa - cost.signal_cost(sa, t)) - (xb - cost.signal_cost(sb, t))  # noqa: E731
    if gain(theta) >= 0:
        assert gain(theta + dtheta) >= -1e-12


def test_contest_dominates_random_general_mechanisms():
    assert dominance_failures(200, seed=7) == 0


def test_menu_utility_diagonal_is_utility():
    cost = CostSpec.power_law(1.0, 1.5)
    m = DiscreteTypeModel([0.0, 0.3, 0.7, 1.0], [0.1, 0.2, 0.3, 0.4], [0.0, 0.1, 0.5, 0.9])
    out = construct_discrete_contest(m, cost)
    np.testing.assert_allclose(np.diag(menu_utility(cost, m.types, m.Q, out.signals)), out.utility, atol=1e-15)
    assert np.all(np.diff(out.signals) >= 0)


def test_load_model_from_json(tmp_path):
    f = tmp_path / "m.json"
    f.write_text(json.dumps({"types": [0, 1], "probs": [0.5, 0.5], "Q": [0.2, 0.8],
                             "cost": {"family": "quadratic", "c": 1.0}}))
    model, cost = load_discrete_model(f)
    assert cost.family is CostFamily.QUADRATIC
    assert construct_discrete_contest(model, cost).utility[1] == pytest.approx(U1, abs=1e-12)
    assert CostSpec.from_dict(cost.to_dict()) == cost
