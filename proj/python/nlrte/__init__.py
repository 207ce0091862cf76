"""Nonlinear radiative transfer: forward, diffusion-limit, inverse and Wigner tools."""

from ._nlrte import (
    ConvergenceError,
    ValidationError,
    diffusion_matrix,
    forward_density,
    homogeneous_oracle,
    inequality_check,
    kappa,
    run,
    wigner_transform,
)

__all__ = [
    "ConvergenceError",
    "ValidationError",
    "diffusion_matrix",
    "forward_density",
    "homogeneous_oracle",
    "inequality_check",
    "kappa",
    "run",
    "wigner_transform",
]
