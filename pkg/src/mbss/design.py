"""Controller and observer synthesis.

Sign conventions are kept as they appear in the design procedures instead
of being normalised:

* pole placement: ``u = K_fb x + v``, closed loop ``A + B K_fb``;
* observer: ``dxhat = (A + G C) xhat + B u - G y``, error matrix ``A + G C``;
* LQR: ``u = -K_lqr x``, closed loop ``A - B K_lqr``.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import numkit
from .errors import (ComplexCoefficients, NoConvergence, NoStabilizingSeed,
                     NotControllable, NotObservable)
from .lti import (StateSpace, controllability_matrix, is_controllable,
                  is_observable, is_stable)

DEFAULT_POLES = (-5.0, -10.0, -20.0)
DEFAULT_OBSERVER_POLES = (-15.0, -30.0, -60.0)
CARE_MAX_ITER = 100
CARE_RTOL = 1e-12


@dataclass(frozen=True)
class GainSet:
    K_fb: Optional[np.ndarray] = None
    G_obs: Optional[np.ndarray] = None
    K_lqr: Optional[np.ndarray] = None


@dataclass(frozen=True)
class Placement:
    """Every intermediate of the canonical-form placement procedure."""

    phi: np.ndarray
    A_c: np.ndarray
    B_c: np.ndarray
    phi_bar: np.ndarray
    T_c: np.ndarray
    K_c: np.ndarray
    K: np.ndarray


@dataclass(frozen=True)
class CareSolution:
    S: np.ndarray
    K_lqr: np.ndarray
    iterations: int
    residual: float


def _pole_list(spec):
    return sorted((complex(p) for p in np.atleast_1d(spec)),
                  key=lambda c: (c.real, c.imag))


def canonical_form(charpoly):
    """Controllable canonical (companion) form of a monic polynomial."""
    c = np.asarray(charpoly, dtype=float)
    n = c.size - 1
    if n < 1:
        raise ValueError("polynomial degree must be >= 1")
    if c[0] != 1.0:
        raise ValueError(f"polynomial must be monic, leading coeff is {c[0]}")
    A_c = np.zeros((n, n))
    A_c[:-1, 1:] = np.eye(n - 1)
    # last row: -a0, -a1, ..., -a_{n-1}
    A_c[-1] = -c[:0:-1]
    B_c = np.zeros((n, 1))
    B_c[-1, 0] = 1.0
    return A_c, B_c


def desired_poly(spec):
    """Real monic coefficients of prod(s - p) over the pole set."""
    poles = _pole_list(spec)
    coeffs = numkit.poly_from_roots(poles)
    scale = max(1.0, float(np.max(np.abs(coeffs))))
    if np.max(np.abs(coeffs.imag)) > 1e-9 * scale:
        raise ComplexCoefficients(
            f"pole set {poles} is not closed under conjugation")
    return coeffs.real.copy()


def placement(ss, spec):
    """Run the canonical-form pole placement and keep every intermediate."""
    n = ss.n
    if ss.B.shape[1] != 1:
        raise ValueError("pole placement is single-input only")
    if len(_pole_list(spec)) != n:
        raise ValueError(f"need {n} poles, got {len(np.atleast_1d(spec))}")
    ok, r = is_controllable(ss)
    if not ok:
        raise NotControllable(f"controllability rank {r} < {n}")

    phi = numkit.char_poly(ss.A)
    A_c, B_c = canonical_form(phi)
    phi_bar = desired_poly(spec)
    T_c = controllability_matrix(ss) @ numkit.invert(
        controllability_matrix(StateSpace(A_c, B_c, np.zeros((1, n)), [[0.0]])))
    # K_c = [a0 - abar0, ..., a_{n-1} - abar_{n-1}]
    K_c = (phi[:0:-1] - phi_bar[:0:-1]).reshape(1, n)
    K = K_c @ numkit.invert(T_c)
    return Placement(phi, A_c, B_c, phi_bar, T_c, K_c, K)


def place_poles(ss, spec):
    """Feedback gain ``K`` (1 x n) with ``eig(A + B K) = spec``."""
    return placement(ss, spec).K


def observer_gain(ss, spec):
    """Observer gain ``G`` (n x 1) with ``eig(A + G C) = spec``, by duality."""
    ok, r = is_observable(ss)
    if not ok:
        raise NotObservable(f"observability rank {r} < {ss.n}")
    return place_poles(ss.dual(), spec).T


def care_residual(ss, S, Q, R_weight):
    """Infinity norm of ``S A + A^T S + Q - S B R^-1 B^T S``.

    Evaluated exactly in rational arithmetic and rounded once. With S near
    1e5 the floating-point products alone carry round-off of order 1e-8,
    which would swamp the quantity being measured.
    """
    def exact(m):
        return [[Fraction(float(v)) for v in row] for row in np.atleast_2d(m)]

    A, B, Sx, Qx = exact(ss.A), exact(ss.B), exact(S), exact(Q)
    n, m = len(A), len(B[0])
    r_inv = 1 / Fraction(float(R_weight))
    SB = [[sum(Sx[i][k] * B[k][j] for k in range(n)) for j in range(m)]
          for i in range(n)]
    worst = Fraction(0)
    for i in range(n):
        row = Fraction(0)
        for j in range(n):
            v = (sum(Sx[i][k] * A[k][j] + A[k][i] * Sx[k][j] for k in range(n))
                 + Qx[i][j]
                 - r_inv * sum(SB[i][c] * SB[j][c] for c in range(m)))
            row += abs(v)
        worst = max(worst, row)
    return float(worst)


def lyapunov(Acl, rhs):
    """Solve ``Acl^T S + S Acl = rhs`` through the n^2 Kronecker system."""
    n = Acl.shape[0]
    eye = np.eye(n)
    # column-major vec: vec(Acl^T S) = (I kron Acl^T) vec S,
    #                   vec(S Acl)   = (Acl^T kron I) vec S
    big = np.kron(eye, Acl.T) + np.kron(Acl.T, eye)
    s = numkit.solve_dense(big, rhs.reshape(-1, order="F"))
    return s.reshape(n, n, order="F")


def seed_poles(n):
    """-5, -10, -20, ... : the default placement poles, extended to any n."""
    return [-5.0 * 2.0**k for k in range(n)]


def solve_care(ss, Q, R_weight, K0=None, max_iter=CARE_MAX_ITER, rtol=CARE_RTOL):
    """Stabilizing solution of the continuous algebraic Riccati equation.

    Kleinman-Newton iteration: starting from a stabilizing gain ``K0``
    (LQR sign convention, ``u = -K x``), repeatedly solve the Lyapunov
    equation

        (A - B K)^T S + S (A - B K) = -(Q + K^T R K)

    and update ``K = R^-1 B^T S``. Without ``K0`` the seed is the pole
    placement gain for -5, -10, -20 (-5 * 2**k beyond three states).

    The loop stops once ``||S_next - S||_inf <= rtol * max(1, ||S||_inf)``.
    A scaled test is needed because the entries of S reach 1e5 for the
    levitation model, where an absolute 1e-10 is below round-off.
    It also stops when the step has reached round-off level
    (``sqrt(eps)`` relative) and no longer shrinks. Newton steps shrink
    quadratically, so a step that grows there is noise from the
    Lyapunov solves, not progress. Large seed gains put that floor above
    ``rtol``.

    Raises
    ------
    NoStabilizingSeed
        The seed gain does not stabilize ``A - B K0``.
    NoConvergence
        ``max_iter`` iterations without meeting the stopping test.
    """
    A, B = ss.A, ss.B
    n = ss.n
    Q = numkit.as_matrix(Q)
    if Q.shape != (n, n):
        raise ValueError(f"Q must be {n}x{n}, got {Q.shape}")
    if np.max(np.abs(Q - Q.T)) > 1e-12 * max(1.0, np.max(np.abs(Q))):
        raise ValueError("Q must be symmetric")
    if not R_weight > 0:
        raise ValueError(f"R_weight must be > 0, got {R_weight!r}")

    if K0 is None:
        try:
            K = -place_poles(ss, seed_poles(n))
        except NotControllable as exc:
            raise NoStabilizingSeed(str(exc)) from exc
    else:
        K = np.atleast_2d(np.asarray(K0, dtype=float))
    if not is_stable(A - B @ K):
        raise NoStabilizingSeed("seed gain does not stabilize A - B K0")

    floor = np.sqrt(np.finfo(float).eps)
    S_prev, prev_step = None, np.inf
    for it in range(1, max_iter + 1):
        Acl = A - B @ K
        S = lyapunov(Acl, -(Q + K.T @ K * R_weight))
        S = 0.5 * (S + S.T)
        K = B.T @ S / R_weight
        if S_prev is not None:
            step = numkit.norm_inf(S - S_prev)
            scale = max(1.0, numkit.norm_inf(S))
            if step <= rtol * scale or (step <= floor * scale and step >= prev_step):
                return CareSolution(S, K, it, care_residual(ss, S, Q, R_weight))
            prev_step = step
        S_prev = S
    raise NoConvergence(f"Kleinman iteration did not converge in {max_iter} steps")


def lqr_gain(sol, ss, R_weight):
    """``K_lqr = R^-1 B^T S`` for the control law ``u = -K_lqr x``."""
    return ss.B.T @ sol.S / R_weight
