"""Periodic grids, radix-2 FFT and spectral calculus on real fields.

Transforms use the real-to-complex layout: for ``n`` real samples the
spectrum holds ``n // 2 + 1`` coefficients for wavenumbers ``0 .. n/2``.
The forward transform is unscaled and the inverse divides by ``n``, so the
``k = 0`` coefficient of a constant field ``c`` is ``n * c``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid on ``[x_min, x_max)``."""

    n_points: int = 64
    x_min: float = -np.pi
    x_max: float = np.pi

    def __post_init__(self):
        if not _is_pow2(int(self.n_points)) or self.n_points < 2:
            raise ValueError(f"n_points must be a power of two >= 2, got {self.n_points}")
        if not self.x_max > self.x_min:
            raise ValueError(f"x_max ({self.x_max}) must exceed x_min ({self.x_min})")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def nodes(self) -> np.ndarray:
        return self.x_min + np.arange(self.n_points) * self.dx

    @property
    def n_modes(self) -> int:
        return self.n_points // 2 + 1

    @property
    def wavenumbers(self) -> np.ndarray:
        """Wavenumbers of the real-transform layout, scaled to the domain length."""
        return np.arange(self.n_modes) * (2.0 * np.pi / self.length)

    def as_dict(self) -> dict:
        return {"n_points": self.n_points, "x_min": self.x_min, "x_max": self.x_max}


@dataclass(frozen=True)
class Field:
    values: np.ndarray
    grid: PeriodicGrid = field(default_factory=PeriodicGrid)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.n_points,):
            raise ValueError(
                f"field has shape {values.shape}, grid expects ({self.grid.n_points},)"
            )
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class SpectralField:
    coefficients: np.ndarray
    grid: PeriodicGrid = field(default_factory=PeriodicGrid)

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=complex)
        if coeffs.shape != (self.grid.n_modes,):
            raise ValueError(
                f"spectrum has shape {coeffs.shape}, grid expects ({self.grid.n_modes},)"
            )
        object.__setattr__(self, "coefficients", coeffs)


# ---------------------------------------------------------------------------
# radix-2 transform


@lru_cache(maxsize=None)
def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=None)
def _twiddles(n: int, inverse: bool) -> tuple:
    sign = 1.0 if inverse else -1.0
    out = []
    size = 2
    while size <= n:
        half = size // 2
        out.append(np.exp(sign * 2j * np.pi * np.arange(half) / size))
        size *= 2
    return tuple(out)


def fft(x, inverse: bool = False) -> np.ndarray:
    """Iterative decimation-in-time radix-2 FFT along the last axis.

    Both directions are unscaled.
    """
    x = np.asarray(x, dtype=complex)
    n = x.shape[-1]
    if not _is_pow2(n):
        raise ValueError(f"transform length must be a power of two, got {n}")
    lead = x.shape[:-1]
    y = x[..., _bit_reversal(n)]
    size = 2
    for tw in _twiddles(n, inverse):
        half = size // 2
        y = y.reshape(lead + (n // size, size))
        even = y[..., :half]
        odd = y[..., half:] * tw
        y = np.concatenate([even + odd, even - odd], axis=-1)
        size *= 2
    return y.reshape(lead + (n,))


def rfft(values) -> np.ndarray:
    """Unscaled real-to-complex transform; returns ``n // 2 + 1`` coefficients."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    return fft(values)[..., : n // 2 + 1]


def irfft(coeffs, n: int) -> np.ndarray:
    """Inverse of :func:`rfft` (divides by ``n``)."""
    coeffs = np.asarray(coeffs, dtype=complex)
    m = n // 2 + 1
    if coeffs.shape[-1] != m:
        raise ValueError(f"expected {m} coefficients for n={n}, got {coeffs.shape[-1]}")
    full = np.empty(coeffs.shape[:-1] + (n,), dtype=complex)
    full[..., :m] = coeffs
    # Hermitian completion; DC and Nyquist must be real for a real signal
    full[..., 0] = coeffs[..., 0].real
    full[..., m - 1] = coeffs[..., m - 1].real
    full[..., m:] = np.conj(coeffs[..., 1 : m - 1][..., ::-1])
    return fft(full, inverse=True).real / n


def dft_reference(values) -> np.ndarray:
    """Direct O(n^2) DFT in real-transform layout. Only for testing."""
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    j = np.arange(n)
    k = np.arange(n // 2 + 1)
    return values @ np.exp(-2j * np.pi * np.outer(j, k) / n)


# ---------------------------------------------------------------------------
# spectral calculus on raw coefficient arrays


def derivative_multiplier(grid: PeriodicGrid, order: int) -> np.ndarray:
    if order not in (1, 2, 3, 4):
        raise ValueError(f"derivative order must be in 1..4, got {order}")
    mult = (1j * grid.wavenumbers) ** order
    if order % 2 == 1:
        mult[-1] = 0.0
    return mult


@lru_cache(maxsize=None)
def _dealias_mask(n_points: int) -> np.ndarray:
    return np.arange(n_points // 2 + 1) <= n_points // 3


def dealias_mask(grid: PeriodicGrid) -> np.ndarray:
    """Boolean mask keeping ``|k| <= floor(n/3)`` (2/3 rule, in index units)."""
    return _dealias_mask(grid.n_points)


# ---------------------------------------------------------------------------
# field-level operations


def forward_transform(f: Field) -> SpectralField:
    if not np.all(np.isfinite(f.values)):
        bad = np.flatnonzero(~np.isfinite(f.values))
        raise ValueError(f"non-finite field values at indices {bad.tolist()}")
    return SpectralField(rfft(f.values), f.grid)


def inverse_transform(s: SpectralField) -> Field:
    return Field(irfft(s.coefficients, s.grid.n_points), s.grid)


def spectral_derivative(s: SpectralField, order: int) -> SpectralField:
    return SpectralField(s.coefficients * derivative_multiplier(s.grid, order), s.grid)


def dealias(s: SpectralField) -> SpectralField:
    return SpectralField(np.where(dealias_mask(s.grid), s.coefficients, 0.0), s.grid)


def differentiate(values, grid: PeriodicGrid, order: int = 1) -> np.ndarray:
    """Real-space spectral derivative of ``values`` (last axis is space)."""
    return irfft(rfft(values) * derivative_multiplier(grid, order), grid.n_points)


def dominant_modes(snapshots, count: int) -> list[tuple[int, np.ndarray]]:
    """Wavenumber indices ``k >= 1`` with the largest time-averaged energy.

    ``snapshots`` is either a ``(Nt, n)`` array or an object exposing one as
    ``.values``. Returns ``[(k, amplitude_series), ...]`` ordered by energy,
    ties broken toward smaller ``k``. Amplitudes are the unscaled rfft
    coefficients.
    """
    values = np.asarray(getattr(snapshots, "values", snapshots), dtype=float)
    if values.ndim != 2 or values.shape[0] == 0:
        raise ValueError("dominant_modes needs a non-empty (Nt, n) snapshot matrix")
    coeffs = rfft(values)
    n_avail = coeffs.shape[-1] - 1
    if count < 1 or count > n_avail:
        raise ValueError(f"count must be in 1..{n_avail}, got {count}")
    energy = np.mean(np.abs(coeffs[:, 1:]) ** 2, axis=0)
    # stable sort on -energy keeps smaller k first among ties
    order = np.argsort(-energy, kind="stable")[:count]
    return [(int(i) + 1, coeffs[:, i + 1].copy()) for i in order]
