"""Differential transforms T_N, their kernels, and the maximal operator T*_M.

With E_t = exp(-t(-Delta)^alpha),

    T_N f = sum_{j=N1}^{N2} v_j (E_{a_{j+1}} f - E_{a_j} f),

which is applied as the single multiplier m_N(xi). Window modes: "strict"
requires N1 < N2; "inclusive" also admits N1 = N2.
"""

from dataclasses import dataclass

import numpy as np

from . import backend
from .kernels import BoundReport, KernelSpec, _require, spread_of
from .lacunary import LacunarySequence, WeightSequence
from .spectral import SampledField, apply_symbol_array, delta, xi_power

MODES = ("strict", "inclusive")


class WindowError(ValueError):
    """Window or horizon outside the sequence's index range."""


@dataclass(frozen=True)
class Window:
    N1: int
    N2: int

    def __iter__(self):
        return iter((self.N1, self.N2))

    @property
    def length(self):
        return self.N2 - self.N1 + 1


@dataclass(frozen=True)
class TransformSpec:
    alpha: float
    seq: LacunarySequence
    weights: WeightSequence

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if (self.weights.j_min, len(self.weights)) != (self.seq.j_min, len(self.seq)):
            raise ValueError("weights are not aligned with the sequence")


@dataclass(frozen=True)
class MaximalHorizon:
    M: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"horizon must be a positive integer, got {self.M}")


def check_window(spec, N, mode="strict"):
    if mode not in MODES:
        raise ValueError(f"unknown window mode {mode!r}")
    N1, N2 = N
    if mode == "strict" and not N1 < N2:
        raise WindowError(f"window ({N1}, {N2}) needs N1 < N2")
    if N1 > N2:
        raise WindowError(f"window ({N1}, {N2}) is empty")
    # T_N uses a_{N2+1}
    if N1 < spec.seq.j_min or N2 + 1 > spec.seq.j_max:
        raise WindowError(
            f"window ({N1}, {N2}) needs indices {N1}..{N2 + 1}, "
            f"sequence has {spec.seq.j_min}..{spec.seq.j_max}"
        )
    return Window(int(N1), int(N2))


def check_horizon(spec, M):
    M = M.M if isinstance(M, MaximalHorizon) else int(M)
    MaximalHorizon(M)
    if -M < spec.seq.j_min or M + 1 > spec.seq.j_max:
        raise WindowError(
            f"horizon M={M} needs indices {-M}..{M + 1}, "
            f"sequence has {spec.seq.j_min}..{spec.seq.j_max}"
        )
    return M


def _symbol_from_power(P, spec, N):
    v = spec.weights
    a = spec.seq
    out = np.zeros_like(P)
    prev = np.exp(-a[N.N1] * P)
    for j in range(N.N1, N.N2 + 1):
        nxt = np.exp(-a[j + 1] * P)
        if v[j] != 0:
            out += v[j] * (nxt - prev)
        prev = nxt
    return out


def transform_symbol(spec, N, grid, mode="strict"):
    """m_N on the frequency nodes of ``grid``."""
    N = check_window(spec, N, mode)
    P = np.broadcast_to(xi_power(grid.frequencies(), 2 * spec.alpha), grid.shape)
    return _symbol_from_power(np.array(P), spec, N)


def differential_transform(f, spec, N, mode="strict"):
    """T_N f via the fused multiplier m_N."""
    return apply_symbol_array(f, transform_symbol(spec, N, f.grid, mode))


def transform_multiplier_bound(spec, N, grid, mode="strict"):
    """sup over frequency nodes of |m_N|; bounds ||T_N||_{2->2}."""
    return float(np.max(np.abs(transform_symbol(spec, N, grid, mode))))


def transform_kernel(spec, N, grid, mode="strict", tol=1e-10):
    """K_N sampled on ``grid`` (resolution checked at the smallest time)."""
    N = check_window(spec, N, mode)
    _require(KernelSpec(spec.alpha, grid.n, spec.seq[N.N1]), grid, tol)
    return apply_symbol_array(delta(grid), transform_symbol(spec, N, grid, mode))


def transform_kernel_gradient(spec, N, grid, mode="strict", tol=1e-10):
    """Spatial gradient of K_N, via i xi_j m_N(xi)."""
    N = check_window(spec, N, mode)
    _require(KernelSpec(spec.alpha, grid.n, spec.seq[N.N1]), grid, tol)
    sym = transform_symbol(spec, N, grid, mode)
    xi = grid.frequencies()
    out = []
    for axis in range(grid.n):
        s = 1j * np.broadcast_to(xi[axis], grid.shape) * sym
        # the Nyquist node has no conjugate partner
        s[grid.nyquist_mask] = s[grid.nyquist_mask].real
        out.append(apply_symbol_array(delta(grid), s))
    return out


def check_cz_bounds(spec, windows, grid, spread_factor=50.0, mode="strict", inner=4, outer=0.25):
    """Kernel size and smoothness constants over a family of windows.

    Ratios |K_N(y)| |y|^n and |grad K_N(y)| |y|^(n+1) are taken over
    ``inner*h <= |y| <= outer*L``. The sweep parameter is the window length.
    """
    r = grid.radius
    mask = (r >= inner * grid.h) & (r <= outer * grid.L)
    size, smooth, where_s, where_g, params = [], [], [], [], []
    for N in windows:
        N = check_window(spec, N, mode)
        K = transform_kernel(spec, N, grid, mode).values
        G = np.sqrt(sum(g.values**2 for g in transform_kernel_gradient(spec, N, grid, mode)))
        rs = np.where(mask, np.abs(K) * r**grid.n, -np.inf)
        rg = np.where(mask, G * r ** (grid.n + 1), -np.inf)
        i = np.unravel_index(int(np.argmax(rs)), rs.shape)
        k = np.unravel_index(int(np.argmax(rg)), rg.shape)
        size.append(float(rs[i]))
        smooth.append(float(rg[k]))
        where_s.append(float(r[i]))
        where_g.append(float(r[k]))
        params.append(N.length)
    reports = []
    for bid, sups, where in (("czsize", size, where_s), ("czgrad", smooth, where_g)):
        i = int(np.argmax(sups))
        spread = spread_of(sups)
        reports.append(
            BoundReport(
                bound_id=bid,
                sup_ratio=float(sups[i]),
                argmax=(params[i], where[i]),
                sweep=list(zip(params, sups)),
                stable=bool(np.all(np.isfinite(sups)) and spread <= spread_factor),
                spread=spread,
            )
        )
    return tuple(reports)


# ------------------------------------------------------------------ maximal


def semigroup_stack(f, alpha, times):
    """E_t f for each t in ``times``, stacked along a new leading axis."""
    F = np.fft.fftn(f.values)
    P = np.broadcast_to(xi_power(f.grid.frequencies(), 2 * alpha), f.grid.shape)
    out = np.empty((len(times),) + f.grid.shape)
    for i, t in enumerate(times):
        out[i] = np.fft.ifftn(F * np.exp(-t * P)).real
    return out


def prefix_sums(f, spec, M):
    """Rows S_k for k = -M-1, ..., M with S_{-M-1} = 0.

    S_k = sum_{j=-M}^{k} v_j (E_{a_{j+1}} f - E_{a_j} f), so that
    T_{(N1,N2)} f = S_{N2} - S_{N1-1}.
    """
    M = check_horizon(spec, M)
    H = semigroup_stack(f, spec.alpha, [spec.seq[j] for j in range(-M, M + 2)])
    v = np.array([spec.weights[j] for j in range(-M, M + 1)])
    D = (H[1:] - H[:-1]) * v.reshape((-1,) + (1,) * f.grid.n)
    S = np.zeros((2 * M + 2,) + f.grid.shape)
    np.cumsum(D, axis=0, out=S[1:])
    return S


def maximal_from_prefix(S, mode="strict"):
    """sup over windows of |S_b - S_a|, b - a >= 2 (strict) or >= 1."""
    if mode not in MODES:
        raise ValueError(f"unknown window mode {mode!r}")
    gap = 2 if mode == "strict" else 1
    shape = S.shape[1:]
    return backend.range_scan(S.reshape(S.shape[0], -1), gap).reshape(shape)


def maximal_transform(f, spec, M, mode="strict"):
    """T*_M f: pointwise sup of |T_N f| over windows inside [-M, M]."""
    S = prefix_sums(f, spec, M)
    return SampledField(f.grid, maximal_from_prefix(S, mode))


@dataclass
class StabilizedMaximal:
    field: SampledField
    M: int
    converged: bool
    history: list


def stabilized_maximal(f, spec, M0=4, M_max=None, rtol=1e-6, mode="strict"):
    """Double M from ``M0`` until the max-norm change of T*_M is <= rtol.

    ``history`` lists ``(M, max T*_M f)``. When the sequence runs out of
    indices before convergence, ``converged`` is False.
    """
    limit = min(-spec.seq.j_min, spec.seq.j_max - 1)
    if M_max is not None:
        limit = min(limit, M_max)
    M = check_horizon(spec, M0)
    prev = maximal_transform(f, spec, M, mode)
    history = [(M, prev.max_norm())]
    while True:
        nxt_M = min(2 * M, limit)
        if nxt_M <= M:
            return StabilizedMaximal(prev, M, False, history)
        cur = maximal_transform(f, spec, nxt_M, mode)
        history.append((nxt_M, cur.max_norm()))
        scale = max(cur.max_norm(), np.finfo(float).tiny)
        change = float(np.max(np.abs(cur.values - prev.values))) / scale
        M, prev = nxt_M, cur
        if change <= rtol:
            return StabilizedMaximal(cur, M, True, history)


def window_family(spec, mode="strict", center=0, max_length=None):
    """Windows widening symmetrically around ``center`` while in range."""
    out = []
    lo, hi = spec.seq.j_min, spec.seq.j_max - 1
    k = 1 if mode == "strict" else 0
    while True:
        N1, N2 = center - k // 2, center + (k - k // 2)
        if N1 < lo or N2 > hi or (max_length and N2 - N1 + 1 > max_length):
            break
        out.append(Window(N1, N2))
        k += 1
    return out


__all__ = [
    "MODES",
    "MaximalHorizon",
    "StabilizedMaximal",
    "TransformSpec",
    "Window",
    "WindowError",
    "check_cz_bounds",
    "check_horizon",
    "check_window",
    "differential_transform",
    "maximal_from_prefix",
    "maximal_transform",
    "prefix_sums",
    "semigroup_stack",
    "stabilized_maximal",
    "transform_kernel",
    "transform_kernel_gradient",
    "transform_multiplier_bound",
    "transform_symbol",
    "window_family",
]
