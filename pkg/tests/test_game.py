import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mrcwpt.circuit import NetworkInstance, SystemParams, harvested_power
from mrcwpt.game import (EquilibriumError, GameSpec, best_response, interaction_terms,
                         solve_equilibrium, symmetric_limit_power, unconstrained_optimum,
                         utility_derivative, verify_standard_function)

M_FIG4 = (-0.0921e-6, 0.0402e-6, 0.0370e-6, 0.0245e-6)
X_FIG4 = (0.1505, 0.0796, 0.0776, 0.0716)


@pytest.fixture
def spec(params):
    return GameSpec(M_FIG4, params)


def test_interaction_terms_single_player(params):
    spec = GameSpec((5e-8,), params)
    beta, gamma = interaction_terms(spec, 0, [1.0])
    assert beta == pytest.approx(params.omega ** 2 * 25e-16)
    assert gamma == params.tx_resistance


def test_interaction_terms_uncoupled_others(params):
    spec = GameSpec((5e-8, 0.0, 0.0), params)
    assert interaction_terms(spec, 0, [1.0, 2.0, 3.0])[1] == params.tx_resistance


def test_interaction_terms_at_reference_loads(spec):
    beta, gamma = interaction_terms(spec, 0, X_FIG4)
    assert unconstrained_optimum(beta, gamma, spec.params.rx_resistance) == pytest.approx(
        0.1505, abs=5e-4)


def test_best_response_clamps(params):
    r = params.rx_resistance
    weak = GameSpec((1e-12,), params)
    assert best_response(weak, 0, [1.0]) == pytest.approx(r, rel=1e-6)
    low = GameSpec((1e-12,), params.replace(load_lower=0.5, load_upper=1.0))
    assert best_response(low, 0, [1.0]) == 0.5
    high = GameSpec((1e-5,), params.replace(load_upper=0.2))
    assert best_response(high, 0, [0.1]) == 0.2


def test_best_response_grid_oracle(params):
    rng = np.random.default_rng(21)
    for _ in range(100):
        k = int(rng.integers(1, 6))
        m = tuple(rng.uniform(-2e-7, 2e-7, k))
        p = params.replace(tx_resistance=rng.uniform(0.1, 3), rx_resistance=rng.uniform(0.01, 1))
        spec = GameSpec(m, p)
        loads = list(rng.uniform(p.load_lower, p.load_upper, k))
        i = int(rng.integers(k))
        grid = np.linspace(p.load_lower, p.load_upper, 10_000)
        # Brute-force utility over the grid, written out independently.
        w2, r = p.omega ** 2, p.rx_resistance
        others = sum(m[j] ** 2 / (r + loads[j]) for j in range(k) if j != i)
        util = (p.transmit_power * w2 * m[i] ** 2 * grid / (r + grid) ** 2
                / (p.tx_resistance + w2 * (others + m[i] ** 2 / (r + grid))))
        step = grid[1] - grid[0]
        assert abs(best_response(spec, i, loads) - grid[int(np.argmax(util))]) <= step


def test_equilibrium_reference_loads(spec):
    eq = solve_equilibrium(spec)
    assert eq.converged
    np.testing.assert_allclose(eq.loads, X_FIG4, atol=5e-4)
    assert max(eq.residuals) <= spec.tolerance


def test_equilibrium_single_player(params):
    m = 3e-8
    eq = solve_equilibrium(GameSpec((m,), params))
    r = params.rx_resistance
    expected = min(params.load_upper, max(params.load_lower,
                   np.sqrt(r * (r + params.omega ** 2 * m ** 2 / params.tx_resistance))))
    assert eq.loads[0] == pytest.approx(expected, rel=1e-12)


def test_equilibrium_unique_from_random_starts(spec):
    ref = solve_equilibrium(spec).loads
    rng = np.random.default_rng(4)
    for _ in range(20):
        start = rng.uniform(*spec.bounds, spec.players)
        np.testing.assert_allclose(solve_equilibrium(spec, start).loads, ref,
                                   atol=10 * spec.tolerance)


def test_sequential_and_simultaneous_agree(params):
    a = solve_equilibrium(GameSpec(M_FIG4, params, order="sequential"))
    b = solve_equilibrium(GameSpec(M_FIG4, params, order="simultaneous"))
    np.testing.assert_allclose(a.loads, b.loads, atol=1e-7)


def test_equilibrium_invariances(params):
    a = solve_equilibrium(GameSpec(M_FIG4, params))
    b = solve_equilibrium(GameSpec(M_FIG4, params.replace(transmit_power=100 * params.transmit_power)))
    assert a.loads == b.loads
    flipped = tuple(-m for m in M_FIG4)
    assert solve_equilibrium(GameSpec(flipped, params)).loads == a.loads


def test_no_profitable_deviation(spec):
    eq = solve_equilibrium(spec)
    grid = np.linspace(*spec.bounds, 1000)
    for i in range(spec.players):
        loads = list(eq.loads)
        best = harvested_power(spec.params, spec.network(loads), i)
        for x in grid:
            loads[i] = x
            assert harvested_power(spec.params, spec.network(loads), i) <= best + 1e-12


def test_nonconvergence_raises(params):
    spec = GameSpec(M_FIG4, params, tolerance=1e-300, max_sweeps=2)
    with pytest.raises(EquilibriumError) as info:
        solve_equilibrium(spec)
    assert len(info.value.loads) == 4 and len(info.value.residuals) == 4


def test_game_spec_validation(params):
    with pytest.raises(ValueError):
        GameSpec((), params)
    with pytest.raises(ValueError):
        GameSpec(M_FIG4, params, order="random")
    with pytest.raises(ValueError):
        solve_equilibrium(GameSpec(M_FIG4, params), [100.0] * 4)


def test_best_response_monotone_in_coupling_ratio():
    r = 0.0672
    ratios = np.geomspace(1e-6, 1e6, 200)
    xi = [unconstrained_optimum(b, 1.0, r) for b in ratios]
    assert np.all(np.diff(xi) >= 0)


def test_matched_load_closed_form(params):
    spec = GameSpec((1e-9, 5e-8), params)
    loads = [params.rx_resistance, 1.0]
    beta, gamma = interaction_terms(spec, 0, loads)
    p = harvested_power(params, spec.network(loads), 0)
    r = params.rx_resistance
    # Matched load: own reflected coupling is beta / (2 r).
    closed = params.transmit_power * beta / (4 * r * (gamma + beta / (2 * r)))
    assert p == pytest.approx(closed, rel=1e-12)


def test_standard_function_report_reference(spec):
    eq = solve_equilibrium(spec)
    grid = np.geomspace(1e-3, 50, 400)
    for i in range(spec.players):
        rep = verify_standard_function(spec, i, eq.loads, grid)
        assert rep.ok, rep.violations
        assert rep.positive and rep.unimodal and rep.scalable and rep.derivative_consistent


def test_standard_function_detects_nonpositive_utility(params):
    spec = GameSpec((0.0, 5e-8), params)
    rep = verify_standard_function(spec, 0, [1.0, 1.0], np.linspace(0.1, 2, 20))
    assert not rep.positive
    assert rep.violations[0][0] == "positivity"


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1e-3, 2.0))
def test_derivative_matches_finite_differences(beta, gamma, r):
    alpha = 2.0
    f = lambda x: alpha * x / (beta * (r + x) + gamma * (r + x) ** 2)
    x = np.geomspace(1e-3, 1e2, 50)
    h = 1e-6 * x
    fd = (f(x + h) - f(x - h)) / (2 * h)
    exact = utility_derivative(x, alpha, beta, gamma, r)
    xi = np.sqrt(r * (r + beta / gamma))
    away = np.abs(x - xi) > 1e-2 * xi
    np.testing.assert_allclose(fd[away], exact[away], rtol=1e-6,
                               atol=1e-8 * np.max(np.abs(exact)))
    # Global maximum at the stationary point, and 2 f(x) > f(2x).
    assert np.all(f(x) <= f(xi) * (1 + 1e-12))
    assert np.all(2 * f(x) - f(2 * x) > 0)


def test_symmetric_limit():
    assert symmetric_limit_power(4, 10.0, 1e-9) == pytest.approx(2.5, rel=1e-3)
    assert symmetric_limit_power(1, 10.0, 1e-9) == pytest.approx(10.0, rel=1e-3)
    assert symmetric_limit_power(10 ** 6, 10.0, 1e-9) <= 1e-5 * 10.0
    with pytest.raises(ValueError):
        symmetric_limit_power(0, 10.0, 1e-9)


def test_loose_matched_load_closed_form(params):
    from mrcwpt.circuit import harvested_power_loose
    m, r = 4e-8, params.rx_resistance
    # In the loose regime gamma reduces to R.
    closed = params.transmit_power * params.omega ** 2 * m ** 2 / (4 * params.tx_resistance * r)
    assert harvested_power_loose(params, m, r) == pytest.approx(closed, rel=1e-14)
