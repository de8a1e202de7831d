"""Flat FLRW universe with a noise-forced inflaton, in raw and expansion-normalized form.

Raw variables are (phi, H, f) with f = dphi/dt.  The normalized variables are

    X = sqrt(V/3) / H,   Y = f / (sqrt(6) H),   dt/dtau = 1/H,

which put the Friedmann constraint on the unit circle X^2 + Y^2 = 1.  Under the
constraint the Y equation reduces to the scalar SDE

    dY = (Y^2 - 1)(3Y + lam) dtau + dW.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SQRT6 = math.sqrt(6.0)
CONSTRAINT_RTOL = 1e-10


class DomainError(ValueError):
    """Argument outside the domain where a model function is defined."""


class InconsistentStateError(ValueError):
    """State violates the Friedmann constraint."""


@dataclass(frozen=True)
class PowerLawPotential:
    """V(phi) = amplitude * phi**n."""

    n: float
    amplitude: float = 1.0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"exponent must be >= 0, got {self.n}")
        if not self.amplitude > 0:
            raise ValueError(f"amplitude must be > 0, got {self.amplitude}")

    @property
    def integer_exponent(self) -> bool:
        return float(self.n).is_integer()

    def _check_phi(self, phi):
        if not self.integer_exponent and np.any(np.asarray(phi) < 0):
            raise DomainError(f"phi < 0 with non-integer exponent n={self.n}")

    def value(self, phi):
        self._check_phi(phi)
        if self.n == 0:
            return self.amplitude + 0.0 * np.asarray(phi) if np.ndim(phi) else self.amplitude
        return self.amplitude * phi**self.n

    def slope(self, phi):
        """dV/dphi."""
        self._check_phi(phi)
        if self.n == 0:
            return 0.0 * np.asarray(phi) if np.ndim(phi) else 0.0
        return self.n * self.amplitude * phi ** (self.n - 1)


def potential_value(pot: PowerLawPotential, phi: float) -> float:
    return pot.value(phi)


def lambda_param(pot: PowerLawPotential, phi: float) -> float:
    """lam = sqrt(3/2) V'/V, which is sqrt(3) n / (sqrt(2) phi) for a power law."""
    if not phi > 0:
        raise DomainError(f"lam is singular for phi <= 0 (phi={phi})")
    return math.sqrt(3.0) * pot.n / (math.sqrt(2.0) * phi)


@dataclass(frozen=True)
class RawState:
    phi: float
    H: float
    f: float
    ricci3: float = 0.0

    def __post_init__(self):
        if not self.H > 0:
            raise DomainError(f"H must be > 0, got {self.H}")
        if self.ricci3 != 0.0:
            raise ValueError("only spatially flat models are supported (ricci3 = 0)")

    @classmethod
    def consistent(cls, phi: float, f: float, pot: PowerLawPotential) -> "RawState":
        """Solve the Friedmann constraint for H given (phi, f)."""
        rho = pot.value(phi) + 0.5 * f * f
        if not rho > 0:
            raise InconsistentStateError("V + f^2/2 must be > 0 for an expanding universe")
        return cls(phi=phi, H=math.sqrt(rho / 3.0), f=f)

    def friedmann_residual(self, pot: PowerLawPotential) -> float:
        return friedmann_residual(self.phi, self.H, self.f, pot, self.ricci3)

    def check(self, pot: PowerLawPotential, rtol: float = CONSTRAINT_RTOL) -> None:
        r = self.friedmann_residual(pot)
        if abs(r) > rtol * 3.0 * self.H * self.H:
            raise InconsistentStateError(
                f"Friedmann residual {r:.3e} exceeds {rtol:g} relative to 3H^2"
            )


def friedmann_residual(phi, H, f, pot: PowerLawPotential, ricci3: float = 0.0):
    return 3.0 * H * H - pot.value(phi) - 0.5 * f * f - 0.5 * ricci3


@dataclass(frozen=True)
class NormalizedState:
    X: float
    Y: float

    def __post_init__(self):
        if self.X < 0:
            raise DomainError(f"X must be >= 0, got {self.X}")
        if not -1.0 <= self.Y <= 1.0:
            raise DomainError(f"Y must lie in [-1, 1], got {self.Y}")
        if abs(self.X * self.X + self.Y * self.Y - 1.0) > CONSTRAINT_RTOL:
            raise InconsistentStateError(f"X^2 + Y^2 = {self.X**2 + self.Y**2!r} != 1")

    @property
    def q(self) -> float:
        return deceleration(self)


def normalize(raw: RawState, pot: PowerLawPotential) -> NormalizedState:
    raw.check(pot)
    X = math.sqrt(pot.value(raw.phi) / 3.0) / raw.H
    Y = raw.f / (SQRT6 * raw.H)
    # Round-off can push Y a few ulps past 1 in the kinetic-dominated limit.
    Y = min(1.0, max(-1.0, Y))
    return NormalizedState(X=X, Y=Y)


def deceleration(state: NormalizedState) -> float:
    return 2.0 * state.Y**2 - state.X**2


def raw_rhs(raw: RawState, pot: PowerLawPotential) -> tuple[float, float, float]:
    """(dphi/dt, dH/dt, df/dt) without the noise forcing."""
    return raw_rhs_arrays(raw.phi, raw.H, raw.f, pot)


def raw_rhs_arrays(phi, H, f, pot: PowerLawPotential):
    V = pot.value(phi)
    return f, -H * H + (V - f * f) / 3.0, -3.0 * H * f - pot.slope(phi)


@dataclass(frozen=True)
class SdeCoefficients:
    lam: float

    def drift(self, Y):
        return drift(Y, self.lam)

    def dispersion(self, Y=None):
        return dispersion()


def drift(Y, lam):
    """b(Y) = (Y^2 - 1)(3Y + lam)."""
    return (Y * Y - 1.0) * (3.0 * Y + lam)


def dispersion() -> float:
    return 1.0


def x_rhs(X, lam):
    """Right-hand side of the decoupled X equation, 3X - 3X^3 + lam X sqrt(1 - X^2)."""
    if np.any(np.abs(X) > 1.0):
        raise DomainError(f"x_rhs needs |X| <= 1, got {X}")
    return 3.0 * X - 3.0 * X**3 + X * np.sqrt(1.0 - X * X) * lam


def normalized_rhs(tau, state, pot: PowerLawPotential):
    """d/dtau of (phi, Y) on the constraint circle, with lam evaluated at the current phi.

    Used to integrate the decoupled Y equation when lam is not frozen; X follows
    from the constraint as sqrt(1 - Y^2).
    """
    phi, Y = state
    lam = lambda_param(pot, phi) if pot.n != 0 else 0.0
    return [SQRT6 * Y, drift(Y, lam)]


@dataclass(frozen=True)
class FluidState:
    mu: float
    p: float

    @property
    def w(self) -> float:
        if self.mu == 0:
            raise DomainError("degenerate fluid: mu = 0")
        return self.p / self.mu


def fluid_state(f: float, V: float) -> FluidState:
    kin = 0.5 * f * f
    return FluidState(mu=kin + V, p=kin - V)


def eos_ratio(f: float, V: float) -> float:
    """p/mu for the scalar-field fluid."""
    return fluid_state(f, V).w


def noise_rescale(H: float) -> float:
    """Factor sqrt(6)/sqrt(H) converting normalized noise into eta."""
    if not H > 0:
        raise DomainError(f"H must be > 0, got {H}")
    return SQRT6 / math.sqrt(H)
