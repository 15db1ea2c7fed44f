"""Lacunary sequences, weight sequences and the ratio-normalizing refinement.

Sequences are finite and carry an integer index range ``[j_min, j_max]``
so that "index 0" keeps its meaning when a horizon ``[-M, M]`` is applied.
"""

import math
from dataclasses import dataclass

import numpy as np


#: relative slack on ratio comparisons, so that lam**(j+1) / lam**j passes
#: even when rounding puts it an ulp below lam
RATIO_SLACK = 1e-12


class LacunaryError(ValueError):
    """Sequence is not positive, increasing, or lambda-lacunary."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class LacunarySequence:
    """Terms a_j for j = j_min, ..., j_min + len(terms) - 1."""

    terms: tuple
    lam: float
    j_min: int = 0

    @property
    def j_max(self):
        return self.j_min + len(self.terms) - 1

    @property
    def indices(self):
        return range(self.j_min, self.j_max + 1)

    def __len__(self):
        return len(self.terms)

    def __getitem__(self, j):
        if not self.j_min <= j <= self.j_max:
            raise IndexError(f"index {j} outside [{self.j_min}, {self.j_max}]")
        return self.terms[j - self.j_min]

    def ratios(self):
        a = np.asarray(self.terms)
        return a[1:] / a[:-1]

    def as_array(self):
        return np.asarray(self.terms, dtype=float)


@dataclass(frozen=True)
class WeightSequence:
    """Weights v_j aligned with a sequence's index range."""

    values: tuple
    j_min: int = 0

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def j_max(self):
        return self.j_min + len(self.values) - 1

    def __len__(self):
        return len(self.values)

    def __getitem__(self, j):
        if not self.j_min <= j <= self.j_max:
            raise IndexError(f"index {j} outside [{self.j_min}, {self.j_max}]")
        return self.values[j - self.j_min]

    @property
    def norm_linf(self):
        return max((abs(v) for v in self.values), default=0.0)

    def norm_lp(self, p):
        if p == math.inf:
            return self.norm_linf
        if p < 1:
            raise ValueError("p must be >= 1")
        return float(np.sum(np.abs(self.values) ** p) ** (1.0 / p))

    def as_array(self):
        return np.asarray(self.values, dtype=float)


def validate_lacunary(terms, lam, j_min=0):
    """Build a :class:`LacunarySequence`, rejecting any ratio below ``lam``.

    The error's ``index`` is the j whose successor ratio a_{j+1}/a_j fails.
    """
    terms = tuple(float(a) for a in terms)
    if not terms:
        raise LacunaryError("sequence is empty")
    if not lam > 1:
        raise LacunaryError(f"lambda must exceed 1, got {lam}")
    for i, a in enumerate(terms):
        if not (a > 0 and math.isfinite(a)):
            raise LacunaryError(f"term a_{j_min + i} = {a} is not a positive finite number", j_min + i)
    for i in range(len(terms) - 1):
        if terms[i + 1] <= terms[i]:
            raise LacunaryError(f"sequence not increasing at j={j_min + i}", j_min + i)
        ratio = terms[i + 1] / terms[i]
        if ratio < lam * (1 - RATIO_SLACK):
            raise LacunaryError(
                f"ratio a_{j_min + i + 1}/a_{j_min + i} = {ratio:.6g} < lambda = {lam:g} at j={j_min + i}",
                j_min + i,
            )
    return LacunarySequence(terms, float(lam), int(j_min))


def increasing_sequence(terms, j_min=0):
    """Increasing positive sequence with no lacunarity requirement.

    ``lam`` is set to the smallest consecutive ratio (1 if the sequence
    has a single term), which is only informative.
    """
    terms = tuple(float(a) for a in terms)
    a = np.asarray(terms)
    if a.size == 0 or np.any(a <= 0) or np.any(np.diff(a) <= 0):
        raise LacunaryError("need a non-empty, positive, strictly increasing sequence")
    lam = float(np.min(a[1:] / a[:-1])) if a.size > 1 else 1.0
    return LacunarySequence(terms, lam, int(j_min))


def geometric(lam, j_min, j_max, base=1.0):
    """a_j = base * lam**j."""
    return validate_lacunary([base * lam**j for j in range(j_min, j_max + 1)], lam, j_min)


def perturbed_geometric(lam, j_min, j_max, amplitude=0.3):
    """a_j = lam**j (1 + amplitude sin j), validated for its own minimal ratio.

    The returned sequence's ``lam`` is the smallest consecutive ratio, which
    must exceed 1 (true for lam above about 1.86 at the default amplitude).
    """
    terms = [lam**j * (1 + amplitude * math.sin(j)) for j in range(j_min, j_max + 1)]
    ratios = [b / a for a, b in zip(terms, terms[1:])]
    lam_eff = min(ratios) if ratios else lam
    if lam_eff <= 1:
        raise LacunaryError(f"perturbation destroys lacunarity (min ratio {lam_eff:.4g})")
    return validate_lacunary(terms, lam_eff, j_min)


def power_weights(j_min, j_max, s, signs=None):
    """v_j = sign_j (1 + |j|)**(-s); in l^p exactly when s*p > 1."""
    js = np.arange(j_min, j_max + 1)
    vals = (1.0 + np.abs(js)) ** (-float(s))
    if signs is not None:
        vals = vals * np.asarray(signs, dtype=float)
    return WeightSequence(tuple(vals), j_min)


def constant_weights(seq, value=1.0):
    return WeightSequence((value,) * len(seq), seq.j_min)


def random_weights(seq, rng, scale=1.0):
    return WeightSequence(tuple(rng.uniform(-scale, scale, len(seq))), seq.j_min)


@dataclass(frozen=True)
class RefinementResult:
    """Refined pair (eta, omega) with the block bookkeeping.

    ``blocks[j]`` is the range of refined indices k with omega_k = v_j; it
    runs from the position of a_j up to (excluding) that of a_{j+1}.
    ``position[j]`` is the refined index k with eta_k = a_j.
    """

    eta: LacunarySequence
    omega: WeightSequence
    blocks: dict
    position: dict

    def window_map(self, N1, N2):
        """Refined window with the same transform as (N1, N2).

        T_{(N1,N2)} spans a_{N1} to a_{N2+1}, so the refined window runs from
        the position of a_{N1} to one before the position of a_{N2+1}.
        """
        return self.position[N1], self.position[N2 + 1] - 1


def _anchor(seq):
    return 0 if seq.j_min <= 0 <= seq.j_max else seq.j_min


def refine(seq, v):
    """Insert geometric terms so every consecutive ratio lies in [lam, lam^2].

    Starting from the term with index 0 (or the first term when 0 is out of
    range), gaps above it are filled upward by repeated multiplication of
    the lower end by lam, and gaps below it downward by repeated division of
    the upper end, each time until the remaining ratio is at most lam^2.
    The anchor keeps refined index 0.
    """
    if (v.j_min, len(v)) != (seq.j_min, len(seq)):
        raise ValueError("weights are not aligned with the sequence")
    lam = seq.lam
    lam2 = lam * lam
    anchor = _anchor(seq)
    # gap[j] holds the inserted terms strictly between a_j and a_{j+1}
    gap = {}
    for j in range(seq.j_min, seq.j_max):
        lo, hi = seq[j], seq[j + 1]
        inserted = []
        if j >= anchor:
            last = lo
            while hi > lam2 * last:
                last = last * lam
                inserted.append(last)
        else:
            last = hi
            while last > lam2 * lo:
                last = last / lam
                inserted.append(last)
            inserted.reverse()
        gap[j] = inserted

    position = {seq.j_min: 0}
    for j in range(seq.j_min, seq.j_max):
        position[j + 1] = position[j] + 1 + len(gap[j])
    shift = position[anchor]
    position = {j: k - shift for j, k in position.items()}

    eta, omega, blocks = [], [], {}
    for j in range(seq.j_min, seq.j_max + 1):
        run = [seq[j]] + (gap[j] if j < seq.j_max else [])
        blocks[j] = range(position[j], position[j] + len(run))
        eta.extend(run)
        omega.extend([v[j]] * len(run))
    k_min = position[seq.j_min]
    eta_seq = LacunarySequence(tuple(eta), lam, k_min)
    return RefinementResult(eta_seq, WeightSequence(tuple(omega), k_min), blocks, position)


def transform_equivalence_check(f, spec, N, refinement, mode="strict"):
    """max |T_N f - T~_{N'} f| / max |f| with N' from the refinement."""
    from .transforms import TransformSpec, Window, differential_transform

    N = Window(*N) if not isinstance(N, Window) else N
    lhs = differential_transform(f, spec, N, mode=mode)
    refined = TransformSpec(spec.alpha, refinement.eta, refinement.omega)
    rhs = differential_transform(f, refined, Window(*refinement.window_map(N.N1, N.N2)), mode="inclusive")
    scale = f.max_norm()
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(lhs.values - rhs.values)) / scale)
