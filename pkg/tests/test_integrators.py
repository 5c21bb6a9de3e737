import math

import numpy as np
import pytest

from latentflow.fourier import PeriodicGrid
from latentflow.integrators import (
    IntegrationConfig,
    IntegrationError,
    SemiLinearSystem,
    block_phi_functions,
    integrate_etdrk4,
    integrate_fixed,
    integrate_if_rk45,
    phi_functions,
)
from latentflow.pde import _quadratic_flux

GRID = PeriodicGrid()
X = GRID.nodes
K = GRID.wavenumbers


def zero_rhs(v, t):
    return np.zeros_like(v)


def burgers_heat():
    return SemiLinearSystem(-(K**2) + 0j, _quadratic_flux(GRID, -0.5), GRID)


INTEGRATORS = [integrate_if_rk45, integrate_etdrk4]


@pytest.mark.parametrize("integrate", INTEGRATORS)
def test_uniform_linear_decay(integrate):
    system = SemiLinearSystem(np.full(33, -1.0 + 0j), zero_rhs, GRID)
    traj = integrate(system, np.ones(64), IntegrationConfig(0.0, 1.0, snapshot_interval=0.25))
    np.testing.assert_allclose(traj.times, [0, 0.25, 0.5, 0.75, 1.0])
    assert np.max(np.abs(traj.states[-1] - np.exp(-1.0))) < 1e-6


@pytest.mark.parametrize("integrate", INTEGRATORS)
def test_zero_system_is_stationary(integrate):
    system = SemiLinearSystem(np.zeros(33, complex), zero_rhs, GRID)
    u0 = np.cos(X) + 0.2 * np.sin(3 * X)
    traj = integrate(system, u0, IntegrationConfig(0.0, 2.0, snapshot_interval=0.5))
    assert np.max(np.abs(traj.states - u0)) < 1e-14


@pytest.mark.parametrize("integrate", INTEGRATORS)
def test_heat_kernel_decay(integrate):
    system = SemiLinearSystem(-(K**2) + 0j, zero_rhs, GRID)
    traj = integrate(system, np.cos(X), IntegrationConfig(0.0, 1.0, snapshot_interval=1.0))
    assert np.max(np.abs(traj.states[-1] - np.cos(X) * np.exp(-1.0))) < 1e-6


def test_phi_functions_taylor_and_direct_agree_at_switch():
    z = np.array([0.4999999, 0.5000001, -0.4999999, -0.5000001, 0.5j])
    e, p1, p2, p3 = phi_functions(z)
    # reference via high-precision series
    for j, p in enumerate([p1, p2, p3], start=1):
        ref = sum(z**m / math.factorial(m + j) for m in range(40))
        np.testing.assert_allclose(p, ref, rtol=1e-13)


def test_phi_functions_small_and_stiff_arguments():
    e, p1, p2, p3 = phi_functions(np.array([0.0, 1e-12, -1e5]))
    np.testing.assert_allclose(p1[:2], 1.0, rtol=1e-12)
    np.testing.assert_allclose(p2[:2], 0.5, rtol=1e-12)
    np.testing.assert_allclose(p3[:2], 1 / 6, rtol=1e-12)
    np.testing.assert_allclose([p1[2], p2[2]], [1e-5, 1e-5 - 1e-10], rtol=1e-10)


def test_block_phi_matches_scalar_on_diagonal_blocks():
    z = np.array([-3.0, 0.1, 2j, 0.0])
    mats = np.zeros((4, 2, 2), complex)
    mats[:, 0, 0] = z
    mats[:, 1, 1] = 2 * z
    blocks = block_phi_functions(mats)
    for b, s1, s2 in zip(blocks, phi_functions(z), phi_functions(2 * z)):
        np.testing.assert_allclose(b[:, 0, 0], s1, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(b[:, 1, 1], s2, rtol=1e-12, atol=1e-14)


def _slopes(method, steps):
    system = burgers_heat()
    u0 = 0.5 * np.cos(X + 1)
    ref = integrate_fixed(system, u0, 1.0, 2048, method)
    errs = np.array([np.max(np.abs(integrate_fixed(system, u0, 1.0, n, method) - ref))
                     for n in steps])
    return np.log2(errs[:-1] / errs[1:])


def test_if_rk5_convergence_order():
    slopes = _slopes("if_rk5", [8, 16, 32])
    assert np.all(np.abs(slopes - 5) <= 0.4), slopes


def test_etdrk4_convergence_order():
    slopes = _slopes("etdrk4", [8, 16, 32, 64])
    assert np.all(np.abs(slopes - 4) <= 0.4), slopes


@pytest.mark.parametrize("integrate", INTEGRATORS)
def test_tightening_tolerance_never_hurts(integrate):
    system = SemiLinearSystem(-(K**2) + 0.5j * K, zero_rhs, GRID)
    u0 = np.cos(X) + 0.5 * np.sin(2 * X)
    exact_hat = np.fft.rfft(u0) * np.exp(system.linear_symbol[0] * 2.0)
    exact = np.fft.irfft(exact_hat, 64)
    errs = []
    for tol in (1e-3, 1e-5, 1e-7, 1e-9):
        cfg = IntegrationConfig(0.0, 2.0, rel_tol=tol, abs_tol=tol, snapshot_interval=2.0)
        errs.append(np.max(np.abs(integrate(system, u0, cfg).states[-1] - exact)))
    assert all(b <= a for a, b in zip(errs, errs[1:])), errs


@pytest.mark.parametrize("integrate", INTEGRATORS)
def test_deterministic(integrate):
    cfg = IntegrationConfig(0.0, 3.0, snapshot_interval=0.5)
    a = integrate(burgers_heat(), 0.5 * np.cos(X + 1), cfg)
    b = integrate(burgers_heat(), 0.5 * np.cos(X + 1), cfg)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.times, b.times)


def test_snapshots_land_on_exact_output_times():
    cfg = IntegrationConfig(0.0, 1.0, snapshot_interval=0.1)
    traj = integrate_if_rk45(burgers_heat(), np.cos(X), cfg)
    np.testing.assert_array_equal(traj.times, 0.1 * np.arange(11))
    assert np.all(np.diff(traj.times) > 0)
    assert traj.accepted_steps >= 10


def test_max_steps_reports_partial_trajectory():
    cfg = IntegrationConfig(0.0, 10.0, snapshot_interval=0.5, max_steps=5, initial_step=0.2)
    with pytest.raises(IntegrationError) as info:
        integrate_if_rk45(burgers_heat(), np.cos(X), cfg)
    partial = info.value.partial
    assert partial.times[0] == 0.0
    assert len(partial.times) >= 1
    assert len(partial.times) < 21


def test_blow_up_is_reported():
    # u_t = u^2 blows up at t = 1 for u0 = 1
    def square(v, t):
        u = np.fft.irfft(v, 64)
        return np.fft.rfft(u * u)

    system = SemiLinearSystem(np.zeros(33, complex), square, GRID)
    cfg = IntegrationConfig(0.0, 2.0, snapshot_interval=0.5)
    with pytest.raises(IntegrationError) as info:
        integrate_if_rk45(system, np.ones(64), cfg)
    assert info.value.time == pytest.approx(1.0, abs=0.05)
    assert info.value.partial.times[-1] <= 1.0


def test_config_validation():
    with pytest.raises(ValueError):
        IntegrationConfig(1.0, 1.0)
    with pytest.raises(ValueError):
        IntegrationConfig(0.0, 1.0, rel_tol=0)
    with pytest.raises(ValueError):
        IntegrationConfig(0.0, 1.0, snapshot_interval=-1)


def test_if_rk45_requires_diagonal_symbol():
    lin = np.zeros((33, 2, 2), complex)
    system = SemiLinearSystem(lin, zero_rhs, GRID, state_dim=2)
    with pytest.raises(ValueError, match="diagonal"):
        integrate_if_rk45(system, np.zeros((2, 64)), IntegrationConfig())
