import numpy as np
import pytest

from latentflow.fourier import PeriodicGrid
from latentflow.integrators import IntegrationConfig, integrate_etdrk4, integrate_if_rk45
from latentflow.pde import (
    FkdvParams,
    InitialCondition,
    KsParams,
    build_system,
    conserved_mean,
    fkdv_system,
    ks_growth_rate,
    ks_system,
    sg_energy,
    sg_system,
    tendency,
)

GRID = PeriodicGrid()
X = GRID.nodes


def fd_derivatives(f, n_fine=4096):
    """4th-order central differences of ``f`` on a fine periodic grid, sampled at GRID nodes."""
    fine = PeriodicGrid(n_fine)
    h = fine.dx
    u = f(fine.nodes)

    def d1(a):
        return (-np.roll(a, -2) + 8 * np.roll(a, -1) - 8 * np.roll(a, 1) + np.roll(a, 2)) / (12 * h)

    def d2(a):
        return (-np.roll(a, -2) + 16 * np.roll(a, -1) - 30 * a + 16 * np.roll(a, 1)
                - np.roll(a, 2)) / (12 * h * h)

    step = n_fine // GRID.n_points
    ux, uxx = d1(u), d2(u)
    uxxx, uxxxx = d1(uxx), d2(uxx)
    return [a[::step] for a in (u, ux, uxx, uxxx, uxxxx)]


def test_zero_state_is_fixed_point_of_all_systems():
    assert np.all(tendency(fkdv_system(), np.zeros(64)) == 0)
    assert np.all(tendency(ks_system(), np.zeros(64)) == 0)
    assert np.all(tendency(sg_system(), np.zeros((2, 64))) == 0)


def test_constant_state_fkdv_ks():
    assert np.max(np.abs(tendency(fkdv_system(), np.full(64, 0.8)))) < 1e-13
    assert np.max(np.abs(tendency(ks_system(), np.full(64, 0.8)))) < 1e-13


def test_fkdv_matches_finite_difference_oracle():
    F = 1.5
    u, ux, _, uxxx, _ = fd_derivatives(lambda x: 0.5 * np.cos(x))
    expected = -uxxx / 6 - 1.5 * u * ux + (F - 1) * ux
    got = tendency(fkdv_system(FkdvParams(F)), 0.5 * np.cos(X))
    assert np.max(np.abs(got - expected)) < 1e-4


def test_ks_matches_finite_difference_oracle():
    nu = 16 / 71
    u, ux, uxx, _, uxxxx = fd_derivatives(lambda x: 0.5 * np.cos(x))
    expected = -u * ux - uxx - nu * uxxxx
    got = tendency(ks_system(KsParams(nu)), 0.5 * np.cos(X))
    assert np.max(np.abs(got - expected)) < 1e-4


def test_ks_growth_rate_mode_one():
    assert ks_growth_rate(1) == pytest.approx(55 / 71, rel=1e-14)
    assert ks_system().linear_symbol[0, 1].real == pytest.approx(55 / 71, rel=1e-14)


def test_sg_tendencies():
    assert np.max(np.abs(tendency(sg_system(), np.stack([np.full(64, np.pi), np.zeros(64)])))) < 1e-14
    u = 0.3 * np.cos(2 * X)
    v = 0.1 * np.sin(X)
    got = tendency(sg_system(), np.stack([u, v]))
    np.testing.assert_allclose(got[0], v, atol=1e-13)
    np.testing.assert_allclose(got[1], -4 * u - np.sin(u), atol=1e-10)


def test_sg_linearised_frequency():
    eps = 1e-5
    period = 2 * np.pi / np.sqrt(2.0)
    cfg = IntegrationConfig(0.0, period, rel_tol=1e-9, abs_tol=1e-12, snapshot_interval=period / 2)
    traj = integrate_etdrk4(sg_system(), np.stack([eps * np.cos(X), np.zeros(64)]), cfg)
    u_half = traj.state(1)[0]
    u_full = traj.state(2)[0]
    assert np.max(np.abs(u_half + eps * np.cos(X))) < 1e-3 * eps
    assert np.max(np.abs(u_full - eps * np.cos(X))) < 1e-3 * eps


def test_conserved_mean_and_energy_values():
    assert conserved_mean(np.full(64, 2.5)) == pytest.approx(2.5)
    assert sg_energy(np.zeros(64), np.zeros(64)) == 0.0
    assert sg_energy(np.full(64, np.pi), np.zeros(64)) == pytest.approx(4 * np.pi, rel=1e-14)


def test_initial_condition():
    ic = InitialCondition()
    np.testing.assert_allclose(ic.evaluate(GRID), 0.5 * np.cos(X + 1.0))
    with pytest.raises(ValueError):
        InitialCondition(wavenumber=32).evaluate(GRID)


@pytest.mark.parametrize("equation", ["fkdv", "ks"])
def test_mean_conserved_short_run(equation):
    system = build_system(equation, GRID)
    u0 = InitialCondition().evaluate(GRID) + 0.1
    traj = integrate_if_rk45(system, u0, IntegrationConfig(0.0, 20.0, snapshot_interval=1.0))
    assert np.max(np.abs(traj.states.mean(axis=1) - conserved_mean(u0))) < 1e-8


def test_sg_energy_drift_50_time_units():
    u0 = InitialCondition().evaluate(GRID)
    traj = integrate_etdrk4(sg_system(), np.stack([u0, 0 * u0]),
                            IntegrationConfig(0.0, 50.0, snapshot_interval=0.5))
    energy = np.array([sg_energy(*traj.state(i)) for i in range(len(traj.times))])
    assert np.max(np.abs(energy - energy[0])) / energy[0] < 1e-4


def test_build_system_rejects_unknown():
    with pytest.raises(ValueError):
        build_system("burgers", GRID)
    with pytest.raises(ValueError):
        FkdvParams(froude=0)
    with pytest.raises(ValueError):
        KsParams(viscosity=-1)
