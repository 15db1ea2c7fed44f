"""Periodized grid model of R^n and Fourier multipliers on it.

The domain ``[-L/2, L/2)^n`` is sampled at ``m`` nodes per axis and treated
as a torus. Fields are stored in natural node order (``x_0 = -L/2``);
spectral coefficients follow numpy's FFT order, so frequency node ``k``
sits at ``xi_k = 2*pi*k/L`` with ``k`` from ``fftfreq``.
"""

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

#: Imaginary residue (relative to the input max-norm) tolerated when a
#: multiplier is applied to a real field.
IMAG_TOL = 1e-10


class GridError(ValueError):
    """Unsupported grid parameters."""


class SymbolError(ValueError):
    """A multiplier produced a non-real output from a real field."""


def _is_power_of_two(m):
    return m > 0 and (m & (m - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with ``m`` nodes per axis on ``[-L/2, L/2)^n``."""

    n: int
    L: float
    m: int

    @property
    def h(self):
        return self.L / self.m

    @property
    def shape(self):
        return (self.m,) * self.n

    @property
    def cell_volume(self):
        return self.h**self.n

    @property
    def origin_index(self):
        return (self.m // 2,) * self.n

    @cached_property
    def axis(self):
        """Node coordinates along one axis."""
        return -self.L / 2 + self.h * np.arange(self.m)

    @cached_property
    def frequency_axis(self):
        """Angular frequencies along one axis, in FFT order."""
        return 2 * np.pi * np.fft.fftfreq(self.m, d=self.h)

    def coords(self):
        """Broadcastable coordinate arrays, one per axis (``ij`` indexing)."""
        return tuple(np.meshgrid(*([self.axis] * self.n), indexing="ij", sparse=True))

    def frequencies(self):
        """Broadcastable frequency arrays, one per axis (``ij`` indexing)."""
        return tuple(np.meshgrid(*([self.frequency_axis] * self.n), indexing="ij", sparse=True))

    @cached_property
    def radius(self):
        """|x| at every node."""
        return np.sqrt(sum(c**2 for c in self.coords()))

    @cached_property
    def nyquist_mask(self):
        """Frequency nodes with at least one coordinate at k = -m/2."""
        mask = np.zeros(self.shape, dtype=bool)
        for ax in range(self.n):
            idx = [slice(None)] * self.n
            idx[ax] = self.m // 2
            mask[tuple(idx)] = True
        return mask

    def scaled(self, factor):
        """Same node count, extent multiplied by ``factor``."""
        return Grid(self.n, self.L * factor, self.m)


def make_grid(n, L, m):
    """Validate parameters and build a :class:`Grid`."""
    if n not in (1, 2):
        raise GridError(f"unsupported dimension n={n}; only 1 and 2 are supported")
    if not L > 0:
        raise GridError(f"extent must be positive, got L={L}")
    if int(m) != m or not _is_power_of_two(int(m)) or m < 16:
        raise GridError(f"unsupported resolution m={m}; need a power of two >= 16")
    return Grid(int(n), float(L), int(m))


@dataclass(frozen=True, eq=False)
class SampledField:
    """Real samples of a function at the grid nodes."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def max_norm(self):
        return float(np.max(np.abs(self.values)))

    def mean(self):
        return float(np.mean(self.values))

    def __add__(self, other):
        return SampledField(self.grid, self.values + other.values)

    def __sub__(self, other):
        return SampledField(self.grid, self.values - other.values)

    def scale(self, c):
        return SampledField(self.grid, c * self.values)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """DFT coefficients of a field, in FFT order."""

    grid: Grid
    coeffs: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class Multiplier:
    """Fourier symbol evaluated lazily on a grid's frequency nodes.

    ``symbol`` receives the tuple of broadcastable frequency arrays returned
    by :meth:`Grid.frequencies` and returns an array broadcastable to the
    grid shape.
    """

    symbol: Callable[[Sequence[np.ndarray]], np.ndarray]
    label: str = ""

    def on(self, grid):
        vals = np.broadcast_to(np.asarray(self.symbol(grid.frequencies())), grid.shape)
        if np.iscomplexobj(vals):
            vals = vals.copy()
            # a lone Nyquist node has no conjugate partner; keep it real
            vals[grid.nyquist_mask] = vals[grid.nyquist_mask].real
        if not np.all(np.isfinite(vals)):
            raise SymbolError(f"symbol {self.label!r} is not bounded on the grid")
        return vals


def xi_power(xi, power):
    """|xi|**power for a tuple of frequency arrays; 0 at the origin."""
    r2 = sum(c**2 for c in xi)
    return r2 ** (power / 2)


def forward(f):
    return SpectralField(f.grid, np.fft.fftn(f.values))


def inverse(F, imag_tol=IMAG_TOL, scale=None):
    """Inverse DFT; raise if the result is not real to ``imag_tol``."""
    out = np.fft.ifftn(F.coeffs)
    if scale is None:
        scale = max(float(np.max(np.abs(out.real))), np.finfo(float).tiny)
    residue = float(np.max(np.abs(out.imag))) / scale if out.size else 0.0
    if residue > imag_tol:
        raise SymbolError(f"imaginary residue {residue:.3e} exceeds {imag_tol:.1e}")
    return SampledField(F.grid, out.real)


def transform_roundtrip(f):
    return inverse(forward(f), scale=max(f.max_norm(), np.finfo(float).tiny))


def apply_symbol_array(f, sym, imag_tol=IMAG_TOL):
    """Multiply DFT(f) by a precomputed symbol array and invert."""
    F = np.fft.fftn(f.values) * sym
    scale = max(f.max_norm(), np.finfo(float).tiny)
    return inverse(SpectralField(f.grid, F), imag_tol=imag_tol, scale=scale)


def apply_multiplier(f, mu, imag_tol=IMAG_TOL):
    """Apply the Fourier multiplier ``mu`` to the real field ``f``."""
    return apply_symbol_array(f, mu.on(f.grid), imag_tol=imag_tol)


def _check_alpha(alpha):
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")


def heat_symbol(t, alpha):
    """Multiplier exp(-t |xi|^(2 alpha))."""
    if not t > 0:
        raise ValueError(f"time must be positive, got t={t}")
    _check_alpha(alpha)
    return Multiplier(lambda xi: np.exp(-t * xi_power(xi, 2 * alpha)), f"heat(t={t}, alpha={alpha})")


def heat_semigroup(f, t, alpha):
    """Evolve ``f`` by the fractional heat semigroup for time ``t``."""
    return apply_multiplier(f, heat_symbol(t, alpha))


def delta(grid):
    """Discrete unit mass at the origin node (value 1/h^n)."""
    vals = np.zeros(grid.shape)
    vals[grid.origin_index] = 1.0 / grid.cell_volume
    return SampledField(grid, vals)


def spatial_tail(f, fraction=0.25):
    """max |f| over |x| >= fraction*L, relative to max |f| (0 for f = 0)."""
    peak = f.max_norm()
    if peak == 0:
        return 0.0
    far = f.grid.radius >= fraction * f.grid.L
    if not far.any():
        return 0.0
    return float(np.max(np.abs(f.values[far])) / peak)


def sample(grid, func):
    """Sample ``func(*coords)`` on the grid nodes."""
    return SampledField(grid, np.broadcast_to(func(*grid.coords()), grid.shape))
