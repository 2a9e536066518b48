"""Linear state-space models and structural analysis."""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import numkit
from .plant import EquilibriumPoint, analytic_jacobian, dynamics

STABILITY_MARGIN = 1e-9


@dataclass(frozen=True)
class StateSpace:
    """Continuous LTI model ``dx = A x + B u``, ``y = C x + D u``.

    For a linearized plant the variables are deviations from ``op_point``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    op_point: Optional[EquilibriumPoint] = None

    def __post_init__(self):
        A = numkit.as_matrix(self.A)
        B = numkit.as_matrix(self.B)
        C = numkit.as_matrix(self.C)
        D = numkit.as_matrix(self.D)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            # a flat input vector arrives as a row; accept it as a column
            if B.shape == (1, n):
                B = B.T
            else:
                raise ValueError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise ValueError(f"C must have {n} columns, got {C.shape}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValueError(
                f"D must be {C.shape[0]}x{B.shape[1]}, got {D.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n(self):
        return self.A.shape[0]

    def dual(self):
        """The transposed system (A^T, C^T, B^T, D^T)."""
        return StateSpace(self.A.T, self.C.T, self.B.T, self.D.T)


def numeric_jacobian(f, x0, u0, h=None):
    """Central-difference Jacobians of ``f(x, u)`` at ``(x0, u0)``.

    The step for each variable is ``h * max(1, |value|)`` with ``h = 1e-6``
    by default. ``u0`` is a scalar input.
    """
    h = 1e-6 if h is None else h
    if h <= 0:
        raise ValueError("h must be > 0")
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    A = np.empty((n, n))
    for i in range(n):
        step = h * max(1.0, abs(x0[i]))
        xp = x0.copy()
        xm = x0.copy()
        xp[i] += step
        xm[i] -= step
        A[:, i] = (np.asarray(f(xp, u0)) - np.asarray(f(xm, u0))) / (2 * step)
    step = h * max(1.0, abs(u0))
    B = ((np.asarray(f(x0, u0 + step)) - np.asarray(f(x0, u0 - step)))
         / (2 * step)).reshape(n, 1)
    return A, B


def plant_numeric_jacobian(p, eq, h=None):
    return numeric_jacobian(lambda x, u: dynamics(x, u, p), eq.state,
                            eq.input_E, h)


def linearize(p, eq):
    """Linear deviation model at ``eq`` with the position as output."""
    A, B = analytic_jacobian(eq, p)
    return StateSpace(A, B, [[1.0, 0.0, 0.0]], [[0.0]], op_point=eq)


def controllability_matrix(ss):
    """``[B, AB, ..., A^(n-1) B]``."""
    cols = [ss.B]
    for _ in range(ss.n - 1):
        cols.append(ss.A @ cols[-1])
    return np.hstack(cols)


def observability_matrix(ss):
    """``[C; CA; ...; C A^(n-1)]``."""
    rows = [ss.C]
    for _ in range(ss.n - 1):
        rows.append(rows[-1] @ ss.A)
    return np.vstack(rows)


def is_controllable(ss):
    """Return ``(controllable, rank of the controllability matrix)``."""
    r = numkit.rank(controllability_matrix(ss))
    return r == ss.n, r


def is_observable(ss):
    """Return ``(observable, rank of the observability matrix)``."""
    r = numkit.rank(observability_matrix(ss))
    return r == ss.n, r


def is_stable(m):
    """True when every eigenvalue has real part below -1e-9."""
    return all(ev.real < -STABILITY_MARGIN for ev in numkit.eigenvalues(m))
