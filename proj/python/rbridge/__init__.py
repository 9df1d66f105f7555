"""Guided diffusion bridges and heat kernel estimates on Riemannian manifolds."""

from ._rbridge import (
    Manifold,
    MeanResult,
    NumericalError,
    conditional_expectation,
    diffusion_mean,
    heat_kernel,
    l2_radial_bound,
    sample_endpoints,
    simulate_bridges,
    sphere_heat_kernel_series,
)

__all__ = [
    "Manifold",
    "MeanResult",
    "NumericalError",
    "conditional_expectation",
    "diffusion_mean",
    "heat_kernel",
    "l2_radial_bound",
    "sample_endpoints",
    "simulate_bridges",
    "sphere_heat_kernel_series",
]
