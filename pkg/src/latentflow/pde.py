"""Right-hand sides and diagnostic functionals for fKdV, Kuramoto-Sivashinsky and Sine-Gordon.

All three equations live on a periodic grid and are split as
``u_t = L u + N(u)`` with ``L`` diagonal (fKdV, KS) or a 2x2 wave block (SG).
Nonlinear terms are formed in real space, transformed and dealiased.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .fourier import PeriodicGrid, dealias_mask, differentiate, irfft, rfft
from .integrators import SemiLinearSystem


@dataclass(frozen=True)
class FkdvParams:
    froude: float = 1.5

    def __post_init__(self):
        if not self.froude > 0:
            raise ValueError(f"froude must be positive, got {self.froude}")


@dataclass(frozen=True)
class KsParams:
    viscosity: float = 16.0 / 71.0

    def __post_init__(self):
        if not self.viscosity > 0:
            raise ValueError(f"viscosity must be positive, got {self.viscosity}")


@dataclass(frozen=True)
class InitialCondition:
    """``u(x, 0) = amplitude * cos(wavenumber * x + phase)``; SG starts at rest."""

    amplitude: float = 0.5
    wavenumber: int = 1
    phase: float = 1.0

    def evaluate(self, grid: PeriodicGrid) -> np.ndarray:
        if abs(self.wavenumber) >= grid.n_points // 2:
            raise ValueError(
                f"wavenumber {self.wavenumber} not resolvable on {grid.n_points} points"
            )
        return self.amplitude * np.cos(self.wavenumber * grid.nodes + self.phase)

    def as_dict(self) -> dict:
        return asdict(self)


def _quadratic_flux(grid: PeriodicGrid, coeff: float):
    """``v -> coeff * d/dx (u^2)`` in spectral space, dealiased."""
    ik = 1j * grid.wavenumbers
    ik[-1] = 0.0
    mask = dealias_mask(grid)
    op = np.where(mask, coeff * ik, 0.0)
    n = grid.n_points

    def rhs(v: np.ndarray, t: float) -> np.ndarray:
        u = irfft(v, n)
        return op * rfft(u * u)

    return rhs


def fkdv_system(params: FkdvParams = FkdvParams(), grid: PeriodicGrid = PeriodicGrid()) -> SemiLinearSystem:
    """``6u_t + u_xxx + (9u - 6(F-1)) u_x = 0`` without forcing."""
    k = grid.wavenumbers
    lin = 1j * k**3 / 6.0 + 1j * k * (params.froude - 1.0)
    lin[-1] = 0.0  # odd-order terms drop the Nyquist mode
    return SemiLinearSystem(lin, _quadratic_flux(grid, -0.75), grid, 1, "fkdv")


def ks_system(params: KsParams = KsParams(), grid: PeriodicGrid = PeriodicGrid()) -> SemiLinearSystem:
    """``u_t + u u_x + u_xx + nu u_xxxx = 0``."""
    k = grid.wavenumbers
    lin = k**2 - params.viscosity * k**4
    return SemiLinearSystem(lin.astype(complex), _quadratic_flux(grid, -0.5), grid, 1, "ks")


def ks_growth_rate(k, params: KsParams = KsParams()):
    """Linear growth rate ``k^2 - nu k^4`` of Fourier mode ``k``."""
    k = np.asarray(k, dtype=float)
    return k**2 - params.viscosity * k**4


def sg_system(grid: PeriodicGrid = PeriodicGrid()) -> SemiLinearSystem:
    """``u_tt - u_xx + sin(u) = 0`` as the first-order system ``(u, v)``.

    The wave operator ``[[0, 1], [-k^2, 0]]`` is the linear block; ``-sin(u)``
    is the whole nonlinear part.
    """
    k = grid.wavenumbers
    nk = grid.n_modes
    lin = np.zeros((nk, 2, 2), dtype=complex)
    lin[:, 0, 1] = 1.0
    lin[:, 1, 0] = -(k**2)
    mask = dealias_mask(grid)
    n = grid.n_points

    def rhs(w: np.ndarray, t: float) -> np.ndarray:
        out = np.zeros_like(w)
        u = irfft(w[0], n)
        out[1] = np.where(mask, -rfft(np.sin(u)), 0.0)
        return out

    return SemiLinearSystem(lin, rhs, grid, 2, "sg")


def tendency(system: SemiLinearSystem, state) -> np.ndarray:
    """Full real-space right-hand side ``L u + N(u)`` at ``state``."""
    n = system.grid.n_points
    u = np.asarray(state, dtype=float).reshape(system.state_dim, n)
    v = rfft(u)
    lin = system.linear_symbol
    lv = np.einsum("kij,jk->ik", lin, v) if system.is_block else lin * v
    return irfft(lv + system.nonlinear_rhs(v, 0.0), n)


def conserved_mean(values, grid: PeriodicGrid | None = None) -> float:
    """Spatial mean ``(dx / L) * sum(values)``."""
    values = np.asarray(getattr(values, "values", values), dtype=float)
    return float(np.sum(values) / values.shape[-1])


def sg_energy(u, v, grid: PeriodicGrid = PeriodicGrid()) -> float:
    """``sum (v^2/2 + u_x^2/2 + 1 - cos u) dx`` with a spectral ``u_x``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    ux = differentiate(u, grid, 1)
    density = 0.5 * v**2 + 0.5 * ux**2 + 1.0 - np.cos(u)
    return float(np.sum(density) * grid.dx)


SYSTEMS = ("fkdv", "ks", "sg")


def build_system(equation: str, grid: PeriodicGrid, params: dict | None = None) -> SemiLinearSystem:
    params = params or {}
    if equation == "fkdv":
        return fkdv_system(FkdvParams(**params), grid)
    if equation == "ks":
        return ks_system(KsParams(**params), grid)
    if equation == "sg":
        if params:
            raise ValueError(f"sg takes no parameters, got {sorted(params)}")
        return sg_system(grid)
    raise ValueError(f"unknown equation {equation!r}; expected one of {SYSTEMS}")


def default_params(equation: str) -> dict:
    if equation == "fkdv":
        return asdict(FkdvParams())
    if equation == "ks":
        return asdict(KsParams())
    if equation == "sg":
        return {}
    raise ValueError(f"unknown equation {equation!r}; expected one of {SYSTEMS}")
