"""Norms, power weights, maximal functions, BMO, and the Cotlar ratio field.

Balls are discrete: B(c, r) is the set of nodes whose periodic distance to
the node c is at most r. Radii default to 0 and h * 2^k up to L/4.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate

from . import backend
from .spectral import SampledField
from .transforms import Window, differential_transform, maximal_transform


class WeightError(ValueError):
    """Power weight outside the admissible range for its class."""


@dataclass(frozen=True)
class PowerWeight:
    """w(x) = |x|^beta, labelled with the Muckenhoupt class A_p it targets.

    ``p = 1`` stands for A_1, where the admissible range is -n < beta <= 0.
    """

    beta: float
    p: float
    n: int = 1

    @property
    def admissible(self):
        if self.p == 1:
            return -self.n < self.beta <= 0
        return -self.n < self.beta < self.n * (self.p - 1)


def _origin_average(beta, n, h):
    # mean of |x|^beta over the central cell [-h/2, h/2]^n
    if n == 1:
        return (h / 2) ** beta / (beta + 1)
    # polar coordinates over one eighth of the square
    integral, _ = integrate.quad(lambda th: math.cos(th) ** -(beta + 2), 0, math.pi / 4)
    return 8 * (h / 2) ** (beta + 2) * integral / (beta + 2) / h**2


def weight_field(w, grid):
    """|x|^beta on the grid nodes with the origin cell averaged."""
    if not -grid.n < w.beta:
        raise WeightError(f"|x|^{w.beta} is not locally integrable in dimension {grid.n}")
    r = grid.radius
    vals = np.empty(grid.shape)
    nz = r > 0
    vals[nz] = r[nz] ** w.beta
    vals[~nz] = _origin_average(w.beta, grid.n, grid.h)
    return vals


def _require_admissible(w, grid):
    if w is None:
        return None
    if w.n != grid.n:
        w = PowerWeight(w.beta, w.p, grid.n)
    if not w.admissible:
        raise WeightError(f"|x|^{w.beta} is not an admissible A_{w.p:g} weight in dimension {grid.n}")
    return weight_field(w, grid)


def lp_norm(f, p, w=None):
    """Riemann-sum L^p(w) norm; p = inf gives max |f| (weights ignored)."""
    if not p >= 1:
        raise ValueError("p must be >= 1")
    wf = _require_admissible(w, f.grid)
    a = np.abs(f.values)
    if p == math.inf:
        return float(a.max())
    dens = a**p if wf is None else a**p * wf
    return float(np.sum(dens) * f.grid.cell_volume) ** (1.0 / p)


def distribution_level(f, sigma, w=None):
    """w-measure of {|f| > sigma}."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    wf = _require_admissible(w, f.grid)
    over = np.abs(f.values) > sigma
    total = over.sum() if wf is None else wf[over].sum()
    return float(total * f.grid.cell_volume)


# ------------------------------------------------------------- discrete balls


@dataclass(frozen=True)
class MaximalParams:
    q: float = 1.0
    radii: tuple = field(default=())

    def __post_init__(self):
        if not self.q >= 1:
            raise ValueError("q must be >= 1")
        if len(self.radii) == 0:
            raise ValueError("radii must be non-empty")


def default_radii(grid, outer=0.25):
    """0 followed by h * 2^k for k >= 0 while <= outer * L."""
    out = [0.0]
    r = grid.h
    while r <= outer * grid.L * (1 + 1e-12):
        out.append(r)
        r *= 2
    return tuple(out)


def _half_width(r, h):
    return int(math.floor(r / h + 1e-9))


@lru_cache(maxsize=64)
def ball_offsets(n, r_cells):
    """Integer offsets within Euclidean radius ``r_cells`` (in nodes)."""
    w = int(math.floor(r_cells + 1e-9))
    if n == 1:
        return np.arange(-w, w + 1).reshape(-1, 1)
    d = np.arange(-w, w + 1)
    di, dj = np.meshgrid(d, d, indexing="ij")
    keep = di**2 + dj**2 <= r_cells**2 * (1 + 1e-12)
    return np.stack([di[keep], dj[keep]], axis=1).astype(np.intp)


def _ball_indicator(grid, r):
    # ball around node 0 in FFT (wrapped) order
    ind = np.zeros(grid.shape)
    offs = ball_offsets(grid.n, r / grid.h)
    ind[tuple((offs % grid.m).T)] = 1.0
    return ind


def ball_average(values, grid, r):
    """Mean of ``values`` over B(c, r) for every node c (periodic)."""
    if r < grid.h:
        return np.array(values, dtype=float)
    ind = _ball_indicator(grid, r)
    # the ball is symmetric, so correlation and convolution agree
    out = np.fft.ifftn(np.fft.fftn(values) * np.fft.fftn(ind)).real
    return out / ind.sum()


def hl_maximal(f, q=1.0, radii=None):
    """Centered maximal function M_q f = sup_r (avg_{B(x,r)} |f|^q)^(1/q)."""
    if not q >= 1:
        raise ValueError("q must be >= 1")
    radii = default_radii(f.grid) if radii is None else radii
    g = np.abs(f.values) ** q
    best = np.zeros(f.grid.shape)
    for r in radii:
        np.maximum(best, ball_average(g, f.grid, r), out=best)
    # FFT rounding can leave tiny negatives for nonnegative input
    np.maximum(best, 0.0, out=best)
    return SampledField(f.grid, best ** (1.0 / q))


def sharp_maximal(f, radii=None):
    """f#(x): sup over discrete balls B containing x of the mean of |f - f_B|.

    For each radius the oscillation of the ball centered at every node is
    computed, then spread to every node within that radius of the center.
    """
    grid = f.grid
    radii = default_radii(grid) if radii is None else radii
    best = np.zeros(grid.shape)
    for r in radii:
        if r < grid.h:
            continue
        if grid.n == 1:
            w = _half_width(r, grid.h)
            if 2 * w + 1 > grid.m:
                continue
            osc = backend.mean_oscillation_1d(f.values, w)
            spread = backend.window_max_1d(osc, w)
        else:
            offs = ball_offsets(2, r / grid.h)
            osc = backend.mean_oscillation_2d(f.values, offs)
            spread = backend.offset_max_2d(osc, offs)
        np.maximum(best, spread, out=best)
    return SampledField(grid, best)


def bmo_norm(f, radii=None):
    return sharp_maximal(f, radii).max_norm()


# ------------------------------------------------------------------- Cotlar


@dataclass
class CotlarResult:
    ratio: SampledField
    numerator: SampledField
    denominator: SampledField
    violations: int

    @property
    def sup(self):
        return self.ratio.max_norm()


def cotlar_ratio(f, spec, M, q, radii=None, eps_rel=1e-14, mode="inclusive"):
    """T*_M f / (M(T_{(-M,M)} f) + M_q f), pointwise.

    Nodes where the denominator is below eps (eps_rel * max|f|, floored at
    the smallest normal float so that f = 0 is covered) get ratio 0 when the
    numerator is below eps too, and count as violations otherwise.
    """
    if not q > 1:
        raise ValueError("q must exceed 1")
    num = maximal_transform(f, spec, M, mode=mode)
    full = differential_transform(f, spec, Window(-M, M), mode="inclusive")
    den = hl_maximal(full, 1.0, radii).values + hl_maximal(f, q, radii).values
    eps = max(eps_rel * f.max_norm(), np.finfo(float).tiny)
    small = den < eps
    ratio = np.zeros(f.grid.shape)
    ok = ~small
    ratio[ok] = num.values[ok] / den[ok]
    violations = int(np.count_nonzero(small & (num.values >= eps)))
    return CotlarResult(SampledField(f.grid, ratio), num, SampledField(f.grid, den), violations)
