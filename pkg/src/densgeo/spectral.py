"""Spectral toolbox on the flat torus T^d: grids, fields, Fourier multipliers.

All fields live on uniform periodic grids with n points per axis on [0, 2*pi).
The measure is normalized so that the constant field 1 integrates to exactly 1;
integrals are plain grid means. Differential operators are exact for
band-limited fields; products of fields are dealiased with the 2/3 rule.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi


class GridError(ValueError):
    """Invalid grid parameters or mismatched grids."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on T^dim with n points per axis (power of two)."""

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise GridError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise GridError(f"n must be a power of two >= 8, got {self.n}")

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def npoints(self) -> int:
        return self.n ** self.dim

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n

    @cached_property
    def coords(self) -> tuple:
        """Meshgrid coordinate arrays, 'ij' indexing."""
        x = np.arange(self.n) * self.spacing
        return tuple(np.meshgrid(*([x] * self.dim), indexing="ij"))

    @cached_property
    def wavenumbers(self) -> tuple:
        """Integer frequencies per axis in FFT layout, covering -n/2 .. n/2-1."""
        k = np.fft.fftfreq(self.n, 1.0 / self.n).astype(np.int64)
        return tuple(k for _ in range(self.dim))

    @cached_property
    def k_mesh(self) -> tuple:
        k = self.wavenumbers[0].astype(np.float64)
        return tuple(np.meshgrid(*([k] * self.dim), indexing="ij"))

    @cached_property
    def ksq(self) -> np.ndarray:
        return sum(km ** 2 for km in self.k_mesh)

    @cached_property
    def ik(self) -> tuple:
        """1j*k per axis with the Nyquist mode zeroed (keeps derivatives real)."""
        out = []
        for km in self.k_mesh:
            ik = 1j * km
            ik[np.abs(km) == self.n // 2] = 0.0
            out.append(ik)
        return tuple(out)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with |k_j| <= n//3 on every axis."""
        cut = self.n // 3
        mask = np.ones(self.shape, dtype=bool)
        for km in self.k_mesh:
            mask &= np.abs(km) <= cut
        return mask


def make_grid(dim: int, n: int) -> Grid:
    return Grid(int(dim), int(n))


def check_same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise GridError(f"grid mismatch: {a} vs {b}")


@dataclass
class ScalarField:
    """Real scalar field on a grid; mean_zero tags quotient representatives."""

    grid: Grid
    values: np.ndarray
    mean_zero: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(self.grid.shape)
        self.values = v

    def mean(self) -> float:
        return float(self.values.mean())


@dataclass
class VectorField:
    """Real vector field: dim component arrays on a shared grid."""

    grid: Grid
    components: tuple

    def __post_init__(self):
        comps = tuple(
            np.asarray(c, dtype=np.float64).reshape(self.grid.shape)
            for c in self.components
        )
        if len(comps) != self.grid.dim:
            raise GridError(
                f"expected {self.grid.dim} components, got {len(comps)}"
            )
        self.components = comps


@dataclass
class FourierMultiplier:
    """Real, even symbol over the wavenumber mesh (maps real to real fields)."""

    grid: Grid
    symbol: np.ndarray

    def __post_init__(self):
        self.symbol = np.asarray(self.symbol, dtype=np.float64).reshape(
            self.grid.shape
        )


def project_mean_zero(values: np.ndarray) -> np.ndarray:
    return values - values.mean()


def dealias(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Zero the top third of frequencies (2/3 rule) of a physical-space field."""
    return np.fft.ifftn(np.fft.fftn(values) * grid.dealias_mask).real


def inertia_symbol(grid: Grid, k: int) -> FourierMultiplier:
    """Symbol of A = (1 - Laplacian)^(k+1): (1 + |xi|^2)^(k+1). k = -1 is identity."""
    if k < -1:
        raise ValueError(f"metric order k must be >= -1, got {k}")
    return FourierMultiplier(grid, (1.0 + grid.ksq) ** (k + 1))


def inverse_inertia_symbol(grid: Grid, k: int) -> FourierMultiplier:
    if k < -1:
        raise ValueError(f"metric order k must be >= -1, got {k}")
    return FourierMultiplier(grid, (1.0 + grid.ksq) ** (-(k + 1)))


def apply_multiplier(m: FourierMultiplier, f: ScalarField) -> ScalarField:
    """Apply a Fourier multiplier to a scalar field. Output mean = symbol(0) * input mean."""
    check_same_grid(m.grid, f.grid)
    out = np.fft.ifftn(m.symbol * np.fft.fftn(f.values)).real
    return ScalarField(f.grid, out, mean_zero=f.mean_zero)


def gradient(f: ScalarField) -> VectorField:
    fhat = np.fft.fftn(f.values)
    comps = tuple(np.fft.ifftn(ik * fhat).real for ik in f.grid.ik)
    return VectorField(f.grid, comps)


def divergence(v: VectorField) -> ScalarField:
    grid = v.grid
    out_hat = sum(
        ik * np.fft.fftn(c) for ik, c in zip(grid.ik, v.components)
    )
    return ScalarField(grid, np.fft.ifftn(out_hat).real, mean_zero=True)


def apply_A_inv(k: int, v: VectorField) -> VectorField:
    """Componentwise (1 - Laplacian)^-(k+1)."""
    sym = inverse_inertia_symbol(v.grid, k).symbol
    comps = tuple(
        np.fft.ifftn(sym * np.fft.fftn(c)).real for c in v.components
    )
    return VectorField(v.grid, comps)


def l2_inner(f: ScalarField, g: ScalarField) -> float:
    check_same_grid(f.grid, g.grid)
    return float((f.values * g.values).mean())


def l2_norm(f: ScalarField) -> float:
    return float(np.sqrt((f.values ** 2).mean()))


def l2_norm_values(values: np.ndarray) -> float:
    return float(np.sqrt((np.asarray(values) ** 2).mean()))


def shift_values(grid: Grid, values: np.ndarray, offsets) -> np.ndarray:
    """Translate a field by whole grid offsets (periodic roll)."""
    return np.roll(values, shift=tuple(int(o) for o in offsets),
                   axis=tuple(range(grid.dim)))


def spectral_tail_fraction(grid: Grid, values: np.ndarray) -> float:
    """Energy fraction carried by the top third of *retained* (dealiased) modes.

    The mean mode is excluded; returns 0 for a field with no fluctuation.
    """
    fhat = np.fft.fftn(values)
    power = np.abs(fhat) ** 2
    zero = (0,) * grid.dim
    power[zero] = 0.0
    retained = power * grid.dealias_mask
    cut = grid.n // 3
    tail_mask = np.zeros(grid.shape, dtype=bool)
    maxabs = np.zeros(grid.shape)
    for km in grid.k_mesh:
        np.maximum(maxabs, np.abs(km), out=maxabs)
    tail_mask = (maxabs > (2.0 * cut) / 3.0) & grid.dealias_mask
    total = retained.sum()
    if total == 0.0:
        return 0.0
    return float(retained[tail_mask].sum() / total)
