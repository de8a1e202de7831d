"""Finite-time explosion analysis for the stochastic-inflation SDE dY = (Y^2-1)(3Y+lam) dtau + dW."""

__version__ = "0.1.0"

from .feller import ScaleSpeedConfig, feller_test, lambda_sweep  # noqa: E402
from .quadrature import LogValue, integrate_exp_poly, log_integrate  # noqa: E402
from .stochastic import NoiseProcess, PathConfig, simulate_ensemble, simulate_path  # noqa: E402

__all__ = [
    "LogValue",
    "NoiseProcess",
    "PathConfig",
    "ScaleSpeedConfig",
    "feller_test",
    "integrate_exp_poly",
    "lambda_sweep",
    "log_integrate",
    "simulate_ensemble",
    "simulate_path",
]
