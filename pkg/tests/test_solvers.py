"""Tests for the constrained solvers: valley minimization, the minimax
ground state, mountain-pass paths, and the sphere deformation demo."""

import functools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from massnls.bubbles import bubble_grid, truncated_instanton
from massnls.constants import sobolev_constant, thresholds
from massnls.errors import HypothesisError, ParameterError, ScanExhaustedError
from massnls.functionals import normalize_mass, problem
from massnls.grid import RadialFunction, make_grid, mass
from massnls.solvers import (
    SolveOptions,
    concentration_init,
    deformation_flow_demo,
    gaussian_valley_init,
    ground_state_minimax,
    local_minimize,
    mountain_pass_path,
)

C0_3_25_1 = 41.61237633847645       # critical mass at (N, q, mu) = (3, 2.5, 1)
C_HALF = 0.5 * C0_3_25_1
RHO0_HALF = 12.162680101829379      # gradient-norm cap rho0 at mass C_HALF
S_POW_3 = sobolev_constant(3).S_pow


@functools.lru_cache(maxsize=None)
def _valley():
    p = problem(3, C_HALF, 1.0, 2.5)
    return p, local_minimize(p, gaussian_valley_init(p))


@functools.lru_cache(maxsize=None)
def _ground(c=1.0, mu=1.0, seed=0):
    p = problem(3, c, mu, 4.0)
    return p, ground_state_minimax(p, concentration_init(p, seed=seed))


@functools.lru_cache(maxsize=None)
def _pass_pieces(n=64):
    """Local minimizer and a truncated bubble sharing one grid."""
    p = problem(3, C_HALF, 1.0, 2.5)
    g = bubble_grid(3, n, 60.0, barrier_radii=(1.0, 2.0))
    init = normalize_mass(RadialFunction(g, np.exp(-((g.nodes / 3.0) ** 2))), p.c)
    return p, local_minimize(p, init), truncated_instanton(3, n, g)


def _stiff_form(u):
    return float(u.values @ (u.grid.stiffness @ u.values))


# ----------------------------------------------------------------------------
# options
# ----------------------------------------------------------------------------

def test_options_defaults():
    o = SolveOptions()
    assert o.max_iters == 2000
    assert o.step0 == 1.0
    assert o.grad_tol == 1e-8
    assert o.v_cap is None
    assert o.seed == 0


@pytest.mark.parametrize(
    "kw",
    [
        dict(max_iters=0),
        dict(step0=0.0),
        dict(step0=-1.0),
        dict(grad_tol=0.0),
        dict(v_cap=-2.0),
    ],
)
def test_options_reject_bad_fields(kw):
    with pytest.raises(ParameterError):
        SolveOptions(**kw)


# ----------------------------------------------------------------------------
# initializers
# ----------------------------------------------------------------------------

def test_gaussian_init_sits_on_sphere_inside_the_well():
    p = problem(3, C_HALF, 1.0, 2.5)
    init = gaussian_valley_init(p)
    assert mass(init) == pytest.approx(p.c, rel=1e-12)
    assert _stiff_form(init) < RHO0_HALF


def test_gaussian_init_domain_tracks_the_small_mu_spread():
    # the family-optimal width grows as mu shrinks; the box must follow
    r_small = gaussian_valley_init(problem(3, 1.0, 1e-3, 2.5)).grid.nodes[-1]
    r_big = gaussian_valley_init(problem(3, 1.0, 1e-1, 2.5)).grid.nodes[-1]
    assert r_small > 10.0 * r_big


def test_gaussian_init_respects_custom_grid():
    g = make_grid(3, 40.0, 800, grading="graded")
    init = gaussian_valley_init(problem(3, 1.0, 1.0, 2.5), grid=g)
    assert init.grid is g
    assert mass(init) == pytest.approx(1.0, rel=1e-12)


def test_gaussian_init_needs_subcritical_exponent():
    with pytest.raises(HypothesisError):
        gaussian_valley_init(problem(3, 1.0, 1.0, 4.0))


def test_concentration_init_mass_and_seed_variation():
    p = problem(3, 1.0, 1.0, 4.0)
    u0 = concentration_init(p, seed=0)
    u1 = concentration_init(p, seed=1)
    assert mass(u0) == pytest.approx(1.0, rel=1e-12)
    assert mass(u1) == pytest.approx(1.0, rel=1e-12)
    assert not np.allclose(u0.values, u1.values)


# ----------------------------------------------------------------------------
# local minimizer in the gradient-norm well
# ----------------------------------------------------------------------------

def test_valley_minimizer_converges_with_negative_level_and_multiplier():
    p, rpt = _valley()
    er = rpt.energy_report
    assert rpt.converged
    assert rpt.level_name == "local_min"
    assert er.phi == pytest.approx(-1.981625708340378, rel=1e-6)
    assert er.multiplier == pytest.approx(-0.2681194850890754, rel=1e-4)
    assert er.phi < 0.0
    assert er.multiplier < 0.0


def test_valley_minimizer_is_stationary_on_the_sphere():
    p, rpt = _valley()
    er = rpt.energy_report
    assert er.kkt_residual <= 1e-8
    assert abs(er.mass - p.c) <= 1e-10 * p.c
    assert abs(er.pohozaev) < 1e-4


def test_valley_minimizer_stays_interior():
    p, rpt = _valley()
    a = _stiff_form(rpt.u)
    assert a == pytest.approx(2.4229389128638203, rel=1e-6)
    assert a < RHO0_HALF


def test_valley_history_is_monotone_on_accepted_steps():
    _, rpt = _valley()
    phis = np.array([h[0] for h in rpt.history])
    assert np.all(np.diff(phis) <= 0.0)


def test_valley_restart_agreement():
    p, rpt = _valley()
    g = rpt.u.grid
    bent = rpt.u.values * (1.0 + 0.05 * np.cos(g.nodes / 3.0))
    rpt2 = local_minimize(p, normalize_mass(RadialFunction(g, bent), p.c))
    assert rpt2.converged
    assert abs(rpt2.energy_report.phi - rpt.energy_report.phi) <= 2e-8


def test_valley_rejects_supercritical_exponent():
    p = problem(3, 1.0, 1.0, 4.0)
    with pytest.raises(HypothesisError):
        local_minimize(p, concentration_init(p))


def test_valley_rejects_mass_at_or_above_critical():
    p = problem(3, 2.0 * C0_3_25_1, 1.0, 2.5)
    g = make_grid(3, 40.0, 400, grading="graded")
    init = normalize_mass(RadialFunction(g, np.exp(-g.nodes ** 2)), p.c)
    with pytest.raises(HypothesisError, match="critical mass"):
        local_minimize(p, init)


def test_valley_rejects_off_sphere_start():
    p = problem(3, C_HALF, 1.0, 2.5)
    init = gaussian_valley_init(p)
    bad = RadialFunction(init.grid, 2.0 * init.values)
    with pytest.raises(ParameterError, match="off the target sphere"):
        local_minimize(p, bad)


def test_valley_rejects_start_outside_the_well():
    p = problem(3, C_HALF, 1.0, 2.5)
    g = make_grid(3, 40.0, 2000, grading="graded")
    spike = normalize_mass(RadialFunction(g, np.exp(-((g.nodes / 0.05) ** 2))), p.c)
    with pytest.raises(ParameterError, match="start inside"):
        local_minimize(p, spike)


def test_valley_honors_explicit_cap():
    p, rpt = _valley()
    tight = SolveOptions(v_cap=1e-3)
    with pytest.raises(ParameterError, match="start inside"):
        local_minimize(p, gaussian_valley_init(p), opts=tight)


def test_small_mu_levels_follow_the_soliton_dilation_law():
    """Sweep mu over decades at fixed mass: the minimum is negative, climbs
    toward zero monotonically, and successive levels contract by 10^(8/5) --
    the dilation exponent of the pure subcritical soliton at q = 5/2."""
    phis = []
    for mu in (1e-3, 1e-2, 1e-1):
        p = problem(3, 1.0, mu, 2.5)
        rpt = local_minimize(p, gaussian_valley_init(p))
        assert rpt.converged
        er = rpt.energy_report
        assert er.phi < 0.0
        assert er.multiplier < 0.0
        assert er.kkt_residual <= 1e-8
        phis.append(er.phi)
    assert phis[0] > phis[1] > phis[2]
    for lo, hi in zip(phis[1:], phis[:-1]):
        assert lo / hi == pytest.approx(10.0 ** 1.6, rel=1e-6)


# ----------------------------------------------------------------------------
# minimax ground state
# ----------------------------------------------------------------------------

def test_ground_state_level_sits_below_the_bubble_ceiling():
    p, rpt = _ground()
    er = rpt.energy_report
    assert rpt.converged
    assert rpt.level_name == "minimax_ground_state"
    assert er.phi == pytest.approx(4.113000891874706, rel=1e-6)
    assert er.phi < S_POW_3 / 3.0
    assert er.multiplier == pytest.approx(-0.26489928703986004, rel=1e-4)
    assert er.multiplier < 0.0
    assert er.kkt_residual <= 1e-8
    assert abs(er.mass - p.c) <= 1e-10 * p.c


def test_ground_state_satisfies_the_dilation_identity():
    # the identity the solver enforces is the one of its own kinetic form
    p, rpt = _ground()
    g, v = rpt.u.grid, rpt.u.values
    W = g.omega_N * g.weights
    av = np.abs(v)
    a = float(v @ (g.stiffness @ v))
    d = float(W @ av ** p.q)
    b = float(W @ av ** p.two_star)
    assert abs(a - p.mu * p.gamma_q * d - b) <= 1e-6 * a


def test_ground_state_restarts_land_on_one_level():
    levels = [_ground(seed=s)[1].energy_report.phi for s in (0, 1, 2)]
    assert all(_ground(seed=s)[1].converged for s in (0, 1, 2))
    assert max(levels) - min(levels) <= 2e-8


def test_ground_state_level_does_not_increase_with_mass():
    _, r1 = _ground(c=1.0)
    _, r2 = _ground(c=2.0)
    assert r2.converged
    assert r2.energy_report.phi <= r1.energy_report.phi + 1e-8


def test_pure_critical_run_stalls_at_the_bubble_level():
    # with no subcritical term the level is only approached, never attained:
    # the run must report non-convergence, stalled within 5% of S^(3/2)/3
    p, rpt = _ground(mu=0.0)
    assert not rpt.converged
    bound = S_POW_3 / 3.0
    assert rpt.energy_report.phi > bound
    assert abs(rpt.energy_report.phi - bound) <= 0.05 * bound


def test_ground_state_rejects_subcritical_exponent():
    p = problem(3, 1.0, 1.0, 2.5)
    with pytest.raises(HypothesisError):
        ground_state_minimax(p, gaussian_valley_init(p))


def test_ground_state_rejects_large_mu_at_mass_critical_exponent():
    qbar = 2.0 + 4.0 / 3.0
    rep = thresholds(3, qbar, 1.0, 1.0)
    p = problem(3, 1.0, 2.0 * rep.alpha_Nq, qbar)
    g = bubble_grid(3, 12, 30.0, barrier_radii=(1.0, 2.0))
    init = normalize_mass(RadialFunction(g, np.exp(-g.nodes ** 2)), 1.0)
    with pytest.raises(HypothesisError, match="admissible bound"):
        ground_state_minimax(p, init)


def test_ground_state_rejects_off_sphere_start():
    p = problem(3, 1.0, 1.0, 4.0)
    init = concentration_init(p)
    bad = RadialFunction(init.grid, 3.0 * init.values)
    with pytest.raises(ParameterError, match="off the target sphere"):
        ground_state_minimax(p, bad)


# ----------------------------------------------------------------------------
# mountain-pass path
# ----------------------------------------------------------------------------

def test_path_starts_at_the_minimizer_exactly():
    p, rpt, U = _pass_pieces()
    mp = mountain_pass_path(p, rpt.u, U)
    assert mp.t_grid[0] == 0.0
    assert mp.energies[0] == mp.base_level
    # base level is the stiffness-form energy of u_minus
    W = rpt.u.grid.omega_N * rpt.u.grid.weights
    av = np.abs(rpt.u.values)
    phi_stiff = (
        0.5 * _stiff_form(rpt.u)
        - (p.mu / p.q) * float(W @ av ** p.q)
        - float(W @ av ** p.two_star) / p.two_star
    )
    assert mp.base_level == pytest.approx(phi_stiff, rel=1e-12)


def test_path_maximum_stays_below_the_pass_ceiling():
    p, rpt, U = _pass_pieces()
    mp = mountain_pass_path(p, rpt.u, U)
    assert mp.level_estimate < mp.base_level + S_POW_3 / 3.0
    assert 0.0 < mp.t_at_max < mp.t_hat
    assert mp.energies[mp.t_grid == mp.t_hat][0] < 2.0 * mp.base_level
    assert mp.mass_err_max <= 1e-8


def test_path_ceiling_margin_shrinks_as_the_bubble_sharpens():
    margins = []
    for n in (16, 64):
        p, rpt, U = _pass_pieces(n)
        mp = mountain_pass_path(p, rpt.u, U)
        margins.append(mp.base_level + S_POW_3 / 3.0 - mp.level_estimate)
    assert margins[0] > margins[1] > 0.0


def test_path_prepends_zero_to_a_custom_grid():
    p, rpt, U = _pass_pieces()
    mp = mountain_pass_path(p, rpt.u, U, t_grid=np.geomspace(1e-2, 1e3, 80))
    assert mp.t_grid[0] == 0.0
    assert mp.t_grid.size == 81


def test_path_that_never_drops_is_reported_as_exhausted():
    p, rpt, U = _pass_pieces()
    with pytest.raises(ScanExhaustedError, match="extend the t-grid"):
        mountain_pass_path(p, rpt.u, U, t_grid=np.geomspace(1e-3, 1.0, 50))


def test_path_requires_subcritical_exponent():
    p, rpt, U = _pass_pieces()
    p_bad = problem(3, p.c, 1.0, 4.0)
    with pytest.raises(HypothesisError):
        mountain_pass_path(p_bad, rpt.u, U)


# ----------------------------------------------------------------------------
# deformation flow on the finite-dimensional sphere
# ----------------------------------------------------------------------------

def test_north_pole_is_stationary_for_the_height():
    north = np.zeros(6)
    north[-1] = 1.0
    tr = deformation_flow_demo(6, "height", north, duration=2.0, step=1e-2)
    assert np.max(np.abs(tr.points - north)) <= 1e-12
    assert tr.displacement[-1] == 0.0


def test_generic_height_flow_reaches_the_south_pole():
    x0 = np.ones(6) / np.sqrt(6.0)
    tr = deformation_flow_demo(6, "height", x0, duration=20.0, step=1e-2)
    assert abs(tr.values[-1] + 1.0) <= 1e-8
    assert np.all(np.diff(tr.values) <= 1e-15)
    assert np.max(np.abs(tr.norms - 1.0)) <= 1e-10


def test_height_flow_matches_the_tanh_solution():
    # the projected flow closes on the last coordinate alone:
    # x_d' = -(1 - x_d^2), so x_d(t) = tanh(atanh(x_d(0)) - t)
    x0 = np.ones(4) / 2.0
    step = 1e-3
    tr = deformation_flow_demo(4, "height", x0, duration=1.0, step=step)
    t = step * np.arange(tr.values.size)
    oracle = np.tanh(np.arctanh(x0[-1]) - t)
    assert np.max(np.abs(tr.points[:, -1] - oracle)) <= 0.2 * step


def test_displacement_is_bounded_by_the_gradient_sum():
    rng = np.random.default_rng(3)
    x0 = rng.normal(size=12)
    x0 /= np.linalg.norm(x0)
    tr = deformation_flow_demo(12, "quadratic", x0, duration=4.0, step=1e-2)
    bound = tr.step * np.cumsum(tr.grad_norms[:-1])
    assert np.all(tr.displacement[1:] <= bound + 1e-14)


def test_quadratic_flow_selects_the_softest_axis():
    x0 = np.ones(3) / np.sqrt(3.0)
    tr = deformation_flow_demo(3, "quadratic", x0, duration=40.0, step=1e-2)
    assert abs(tr.points[-1, 0]) == pytest.approx(1.0, abs=1e-8)
    assert tr.values[-1] == pytest.approx(0.5, abs=1e-8)


def test_double_well_flow_settles_on_the_well_floor():
    x0 = np.array([0.1, 0.2, np.sqrt(1.0 - 0.05)])
    tr = deformation_flow_demo(3, "double_well", x0, duration=40.0, step=1e-2)
    assert tr.points[-1, -1] ** 2 == pytest.approx(0.5, abs=1e-8)


@pytest.mark.parametrize(
    "kw",
    [
        dict(dim=1, functional="height", start=np.array([1.0])),
        dict(dim=3, functional="height", start=np.ones(3) / np.sqrt(3.0), step=0.0),
        dict(dim=3, functional="height", start=np.ones(3) / np.sqrt(3.0), duration=-1.0),
        dict(dim=3, functional="height", start=np.ones(4) / 2.0),
        dict(dim=3, functional="height", start=np.array([1.0, 1.0, 1.0])),
        dict(dim=3, functional="saddle", start=np.array([0.0, 0.0, 1.0])),
    ],
)
def test_deformation_rejects_bad_inputs(kw):
    with pytest.raises(ParameterError):
        deformation_flow_demo(**kw)


@settings(max_examples=25, deadline=None)
@given(
    dim=st.integers(min_value=2, max_value=24),
    seed=st.integers(min_value=0, max_value=10_000),
)
def test_flow_conserves_the_sphere_for_random_starts(dim, seed):
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=dim)
    x0 /= np.linalg.norm(x0)
    tr = deformation_flow_demo(dim, "height", x0, duration=0.5, step=1e-2)
    assert np.max(np.abs(tr.norms - 1.0)) <= 1e-10
    bound = tr.step * np.cumsum(tr.grad_norms[:-1])
    assert np.all(tr.displacement[1:] <= bound + 1e-14)
