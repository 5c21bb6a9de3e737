"""Time integration of semi-linear systems ``u_t = L u + N(u, t)`` in Fourier space.

Two schemes are provided:

* :func:`integrate_if_rk45` -- integrating-factor (Lawson) Dormand-Prince 5(4)
  with embedded error control. The stiff linear part is propagated exactly.
* :func:`integrate_etdrk4` -- Cox-Matthews ETDRK4 with step-doubling error
  control. Linear symbols may be diagonal or small per-wavenumber blocks
  (needed for the first-order Sine-Gordon system).

States handed in and out are real-space arrays of shape ``(state_dim, n)``;
internally they are rfft coefficients of shape ``(state_dim, n // 2 + 1)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import factorial
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .fourier import PeriodicGrid, irfft, rfft

log = logging.getLogger(__name__)

NonlinearRHS = Callable[[np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class SemiLinearSystem:
    """Split right-hand side.

    ``linear_symbol`` is either diagonal with shape ``(state_dim, n_modes)``
    (a single ``(n_modes,)`` row is broadcast to every component) or a block
    symbol with shape ``(n_modes, state_dim, state_dim)``.
    """

    linear_symbol: np.ndarray
    nonlinear_rhs: NonlinearRHS
    grid: PeriodicGrid
    state_dim: int = 1
    name: str = ""

    def __post_init__(self):
        sym = np.asarray(self.linear_symbol, dtype=complex)
        nk = self.grid.n_modes
        d = self.state_dim
        if sym.shape == (nk,):
            sym = np.broadcast_to(sym, (d, nk)).copy()
        if sym.shape not in ((d, nk), (nk, d, d)):
            raise ValueError(
                f"linear symbol shape {sym.shape} incompatible with state_dim={d}, n_modes={nk}"
            )
        object.__setattr__(self, "linear_symbol", sym)

    @property
    def is_block(self) -> bool:
        return self.linear_symbol.ndim == 3


@dataclass
class IntegrationConfig:
    t_start: float = 0.0
    t_end: float = 1.0
    rel_tol: float = 1e-6
    abs_tol: float = 1e-6
    initial_step: float = 1e-2
    max_steps: int = 2_000_000
    snapshot_interval: float = 0.1

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.snapshot_interval <= 0:
            raise ValueError("snapshot_interval must be positive")
        if self.initial_step <= 0:
            raise ValueError("initial_step must be positive")

    def output_times(self) -> np.ndarray:
        n = int(np.floor((self.t_end - self.t_start) / self.snapshot_interval + 1e-9))
        times = self.t_start + self.snapshot_interval * np.arange(n + 1)
        if self.t_end - times[-1] > 1e-9 * max(1.0, abs(self.t_end)):
            times = np.append(times, self.t_end)
        return times


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_snapshots, state_dim * n_points)
    accepted_steps: int = 0
    rejected_steps: int = 0
    state_dim: int = 1

    def state(self, i: int) -> np.ndarray:
        return self.states[i].reshape(self.state_dim, -1)


class IntegrationError(RuntimeError):
    """Integration stopped early; ``partial`` holds the snapshots gathered so far."""

    def __init__(self, message: str, partial: Trajectory, time: float):
        super().__init__(message)
        self.partial = partial
        self.time = time


def _apply(coef: np.ndarray, v: np.ndarray) -> np.ndarray:
    if coef.ndim == 3:
        return np.einsum("kij,jk->ik", coef, v)
    return coef * v


def _as_state(u0, system: SemiLinearSystem) -> np.ndarray:
    u0 = np.asarray(u0, dtype=float)
    n = system.grid.n_points
    u0 = u0.reshape(system.state_dim, n)
    if not np.all(np.isfinite(u0)):
        raise ValueError("initial state contains non-finite values")
    return u0


# ---------------------------------------------------------------------------
# phi functions


def phi_functions(z, order: int = 3) -> list[np.ndarray]:
    """``[exp(z), phi_1(z), ..., phi_order(z)]`` for scalar/array ``z``.

    Taylor series for ``|z| < 0.5`` avoids cancellation; direct formulas
    elsewhere.
    """
    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < 0.5
    zs = np.where(small, z, 0.0)
    zl = np.where(small, 1.0, z)
    ez = np.exp(z)
    out = [ez]
    partial = np.ones_like(zl)  # sum_{m<j} z^m / m!
    term = np.ones_like(zl)
    for j in range(1, order + 1):
        direct = (ez - partial) / zl**j
        series = np.zeros_like(zs)
        t = np.full_like(zs, 1.0 / factorial(j))
        for m in range(20):
            series = series + t
            t = t * zs / (m + j + 1)
        out.append(np.where(small, series, direct))
        term = term * zl / j
        partial = partial + term
    return out


def block_phi_functions(mats: np.ndarray, order: int = 3) -> list[np.ndarray]:
    """Matrix ``exp`` and ``phi_j`` for a stack of small square matrices.

    Uses the exponential of the augmented block matrix
    ``[[A, I, 0..], [0, 0, I, ..], ..., [0 .. 0]]`` whose first block row is
    ``[exp(A), phi_1(A), ..., phi_order(A)]``.
    """
    mats = np.asarray(mats, dtype=complex)
    nk, d, _ = mats.shape
    size = d * (order + 1)
    aug = np.zeros((nk, size, size), dtype=complex)
    aug[:, :d, :d] = mats
    eye = np.eye(d)
    for j in range(order):
        aug[:, j * d : (j + 1) * d, (j + 1) * d : (j + 2) * d] = eye
    ex = expm(aug)
    return [ex[:, :d, j * d : (j + 1) * d] for j in range(order + 1)]


def _phis(system: SemiLinearSystem, h: float) -> list[np.ndarray]:
    if system.is_block:
        return block_phi_functions(h * system.linear_symbol)
    return phi_functions(h * system.linear_symbol)


# ---------------------------------------------------------------------------
# Lawson / integrating-factor Dormand-Prince


_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)


class _LawsonDP:
    def __init__(self, system: SemiLinearSystem):
        if system.is_block:
            raise ValueError("integrating-factor RK needs a diagonal linear symbol")
        self.system = system
        self.L = system.linear_symbol
        self._cache_h = None
        self._exp = {}

    def _exps(self, h: float) -> dict:
        if h != self._cache_h:
            deltas = {0.0}
            for i in range(1, 7):
                for j in range(i):
                    deltas.add(_DP_C[i] - _DP_C[j])
                deltas.add(_DP_C[i])
            for j in range(7):
                deltas.add(1.0 - _DP_C[j])
            self._exp = {dl: np.exp(dl * h * self.L) for dl in deltas}
            self._cache_h = h
        return self._exp

    def step(self, v: np.ndarray, t: float, h: float, k1: np.ndarray):
        """One step from spectral state ``v``; returns ``(v_new, err_hat, k_last)``."""
        E = self._exps(h)
        N = self.system.nonlinear_rhs
        ks = [k1]
        for i in range(1, 7):
            acc = E[_DP_C[i]] * v
            for j, a in enumerate(_DP_A[i]):
                if a != 0.0:
                    acc = acc + (h * a) * (E[_DP_C[i] - _DP_C[j]] * ks[j])
            if i == 6:
                v_new = acc
            ks.append(N(acc, t + _DP_C[i] * h))
        err = np.zeros_like(v)
        for j in range(7):
            if _DP_E[j] != 0.0:
                err = err + (h * _DP_E[j]) * (E[1.0 - _DP_C[j]] * ks[j])
        return v_new, err, ks[6]


# ---------------------------------------------------------------------------
# ETDRK4


class _ETDRK4:
    def __init__(self, system: SemiLinearSystem):
        self.system = system
        self._coeffs: dict[float, tuple] = {}

    def coeffs(self, h: float) -> tuple:
        c = self._coeffs.get(h)
        if c is None:
            e, p1, p2, p3 = _phis(self.system, h)
            e2, q1, _, _ = _phis(self.system, h / 2)
            c = (
                e,
                e2,
                (h / 2) * q1,
                h * (p1 - 3 * p2 + 4 * p3),
                h * (2 * p2 - 4 * p3),
                h * (-p2 + 4 * p3),
            )
            if len(self._coeffs) > 16:
                self._coeffs.clear()
            self._coeffs[h] = c
        return c

    def step(self, v: np.ndarray, t: float, h: float, nv: np.ndarray | None = None):
        E, E2, Q, f1, f2, f3 = self.coeffs(h)
        N = self.system.nonlinear_rhs
        Nv = N(v, t) if nv is None else nv
        a = _apply(E2, v) + _apply(Q, Nv)
        Na = N(a, t + h / 2)
        b = _apply(E2, v) + _apply(Q, Na)
        Nb = N(b, t + h / 2)
        c = _apply(E2, a) + _apply(Q, 2 * Nb - Nv)
        Nc = N(c, t + h)
        return _apply(E, v) + _apply(f1, Nv) + _apply(f2, Na + Nb) + _apply(f3, Nc)


# ---------------------------------------------------------------------------
# drivers


def _drive(system, u0, cfg: IntegrationConfig, attempt, order: int) -> Trajectory:
    """Adaptive loop shared by both schemes.

    ``attempt(v, t, h, nv) -> (v_new, err_phys, nv_new)`` performs one trial
    step given ``nv = N(v, t)``; ``err_phys`` is the local error estimate in
    real space and ``nv_new`` the nonlinear term at the new state.
    """
    n = system.grid.n_points
    d = system.state_dim
    u = _as_state(u0, system)
    v = rfft(u)
    out_times = cfg.output_times()
    states = np.empty((len(out_times), d * n))
    states[0] = u.ravel()
    n_out = 1
    t = cfg.t_start
    h = min(cfg.initial_step, cfg.t_end - cfg.t_start)
    accepted = rejected = 0
    cache = system.nonlinear_rhs(v, t)

    def partial():
        return Trajectory(out_times[:n_out].copy(), states[:n_out].copy(), accepted, rejected, d)

    while n_out < len(out_times):
        target = out_times[n_out]
        if accepted + rejected >= cfg.max_steps:
            raise IntegrationError(
                f"max_steps={cfg.max_steps} exceeded at t={t:.6g}", partial(), t
            )
        clipped = t + h >= target - 1e-12 * max(1.0, abs(target))
        h_try = target - t if clipped else h
        v_new, err_phys, cache_new = attempt(v, t, h_try, cache)
        u_new = irfft(v_new, n)
        if not np.all(np.isfinite(u_new)):
            if h_try > 1e-10:
                rejected += 1
                h = h_try * 0.2
                continue
            raise IntegrationError(f"non-finite state near t={t:.6g}", partial(), t)
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(u), np.abs(u_new))
        err = float(np.max(np.abs(err_phys) / scale))
        if not np.isfinite(err):
            err = np.inf
        if err <= 1.0:
            accepted += 1
            t = target if clipped else t + h_try
            v, u, cache = v_new, u_new, cache_new
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** (-1.0 / (order + 1))))
            # a step shortened to hit an output time keeps the proposed size
            if not (clipped and h_try < h):
                h = h_try * fac
            if clipped:
                states[n_out] = u.ravel()
                n_out += 1
        else:
            rejected += 1
            h = h_try * max(0.2, 0.9 * err ** (-1.0 / (order + 1)))
            if h < 1e-12:
                raise IntegrationError(f"step size underflow at t={t:.6g}", partial(), t)
    return Trajectory(out_times, states, accepted, rejected, d)


def integrate_if_rk45(system: SemiLinearSystem, u0, cfg: IntegrationConfig) -> Trajectory:
    """Adaptive integrating-factor Dormand-Prince 5(4)."""
    stepper = _LawsonDP(system)
    n = system.grid.n_points

    def attempt(v, t, h, k1):
        v_new, err_hat, k_last = stepper.step(v, t, h, k1)
        return v_new, irfft(err_hat, n), k_last

    return _drive(system, u0, cfg, attempt, order=4)


def integrate_etdrk4(system: SemiLinearSystem, u0, cfg: IntegrationConfig) -> Trajectory:
    """Adaptive ETDRK4 with step-doubling error control."""
    stepper = _ETDRK4(system)
    n = system.grid.n_points

    def attempt(v, t, h, nv):
        full = stepper.step(v, t, h, nv)
        half = stepper.step(v, t, h / 2, nv)
        two = stepper.step(half, t + h / 2, h / 2)
        err = irfft(two - full, n) / 15.0
        return two, err, system.nonlinear_rhs(two, t + h)

    return _drive(system, u0, cfg, attempt, order=4)


def integrate_fixed(system: SemiLinearSystem, u0, t_end: float, n_steps: int,
                    method: str = "if_rk5", t_start: float = 0.0) -> np.ndarray:
    """Fixed-step integration returning the final real-space state.

    ``method`` is ``"if_rk5"`` (5th-order Lawson Dormand-Prince solution) or
    ``"etdrk4"``. Used for convergence studies.
    """
    u = _as_state(u0, system)
    v = rfft(u)
    h = (t_end - t_start) / n_steps
    t = t_start
    if method == "if_rk5":
        stepper = _LawsonDP(system)
        k1 = system.nonlinear_rhs(v, t)
        for i in range(n_steps):
            v, _, k1 = stepper.step(v, t, h, k1)
            t = t_start + (i + 1) * h
    elif method == "etdrk4":
        stepper = _ETDRK4(system)
        for i in range(n_steps):
            v = stepper.step(v, t, h)
            t = t_start + (i + 1) * h
    else:
        raise ValueError(f"unknown method {method!r}")
    return irfft(v, system.grid.n_points)
