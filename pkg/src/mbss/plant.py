"""Nonlinear magnetic ball suspension model.

State ``x = (y, dy/dt, i)``: ball distance below the magnet [m], its velocity
[m/s] and the coil current [A]. The input is the coil voltage ``e`` [V].

    dx1/dt = x2
    dx2/dt = g - K x3**2 / (M x1**2)
    dx3/dt = (x1 / L) (e - R x3)

The electrical equation keeps the simplified position-scaled form di/dt =
(y/L)(e - Ri). A strict treatment of the position-dependent inductance L/y
adds a velocity-dependent back-EMF term; it is deliberately left out so the
model matches the published one.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateEquilibrium, DomainError

# resolution used by the reference operating point (x10 printed as 0.06)
PAPER_ROUNDING_DECIMALS = 2


@dataclass(frozen=True)
class PlantParams:
    """Physical constants.

    ``K`` is the electromagnet force constant [N m^2 / A^2], not a feedback
    gain. ``E`` is the nominal supply voltage; zero is accepted so that the
    degenerate contact equilibrium can be reported rather than rejected.
    """

    M: float = 0.2
    K: float = 0.01
    L: float = 0.5
    R: float = 10.0
    g: float = 9.8
    E: float = 8.0

    def __post_init__(self):
        for name in ("M", "K", "L", "R", "g"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be finite and > 0, got {v!r}")
        if not (math.isfinite(self.E) and self.E >= 0):
            raise ValueError(f"E must be finite and >= 0, got {self.E!r}")


@dataclass(frozen=True)
class EquilibriumPoint:
    state: np.ndarray
    input_E: float

    @property
    def degenerate(self):
        return not self.state[0] > 0


def dynamics(x, u, p):
    """State derivative of the nonlinear plant.

    Raises
    ------
    DomainError
        If ``x1 <= 0``: the ball touches the magnet and the force term is
        singular.
    """
    x1, x2, x3 = x
    if not x1 > 0:
        raise DomainError(f"ball position x1={x1!r} must be > 0")
    return np.array([
        x2,
        p.g - p.K * x3 * x3 / (p.M * x1 * x1),
        (x1 / p.L) * (u - p.R * x3),
    ])


def output(x):
    """Measured output: the ball position."""
    return x[0]


def equilibrium(p, paper_rounding=False):
    """Hovering equilibrium for the nominal voltage.

    ``x30 = E/R`` and ``x10 = (E/R) sqrt(K/(M g))``. With ``paper_rounding``
    the position is rounded to centimetres (0.0571 m -> 0.06 m), which
    reproduces the published operating point but is not an exact rest state.
    """
    i0 = p.E / p.R
    y0 = i0 * math.sqrt(p.K / (p.M * p.g))
    if paper_rounding:
        y0 = round(y0, PAPER_ROUNDING_DECIMALS)
    return EquilibriumPoint(state=np.array([y0, 0.0, i0]), input_E=p.E)


def analytic_jacobian(eq, p):
    """Partial derivatives of :func:`dynamics` at ``eq``.

    Returns ``(A, B)`` with shapes (3, 3) and (3, 1). The (3, 1) entry is the
    general ``(E - R x30)/L``, which vanishes at an exact rest state.
    """
    x1, _, x3 = eq.state
    if not x1 > 0:
        raise DegenerateEquilibrium(
            f"degenerate equilibrium (x10={x1!r}); cannot linearize")
    E = eq.input_E
    A = np.array([
        [0.0, 1.0, 0.0],
        [2 * p.K * x3**2 / (p.M * x1**3), 0.0, -2 * p.K * x3 / (p.M * x1**2)],
        [(E - p.R * x3) / p.L, 0.0, -p.R * x1 / p.L],
    ])
    B = np.array([[0.0], [0.0], [x1 / p.L]])
    return A, B
