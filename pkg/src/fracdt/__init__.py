"""Differential transforms of fractional heat semigroups on periodized grids."""

__version__ = "0.1.0"

from .spectral import (  # noqa: F401
    Grid,
    Multiplier,
    SampledField,
    SpectralField,
    apply_multiplier,
    heat_semigroup,
    make_grid,
    transform_roundtrip,
)
