"""Fixed-step RK4 simulation of the closed-loop scenarios.

The control input is computed from the state at the start of each step and
held over the step (zero-order hold). Linear scenarios use the RK4 transition
matrices of the affine system, which reproduce :func:`rk4_step` exactly up to
round-off; nonlinear scenarios step the plant equations directly.
"""

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError

MAX_STEPS = 10**7


class Scenario(enum.Enum):
    LINEAR_FEEDBACK = "linear-feedback"
    NONLINEAR_FEEDBACK = "nonlinear-feedback"
    LINEAR_OBSERVER = "linear-observer"
    NONLINEAR_OBSERVER = "nonlinear-observer"
    LINEAR_LQR = "linear-lqr"
    NONLINEAR_LQR = "nonlinear-lqr"

    @property
    def linear(self):
        return self.value.startswith("linear")

    @property
    def observer(self):
        return self.value.endswith("observer")


@dataclass(frozen=True)
class SimConfig:
    """Run settings.

    ``x0`` and ``xhat0`` are deviations from the operating point for linear
    scenarios and absolute states for nonlinear ones. ``None`` lets each
    scenario pick its documented default.
    """

    dt: float = 1e-4
    t_final: float = 50.0
    x0: Optional[tuple] = None
    xhat0: Optional[tuple] = None
    v_ref: float = 0.0

    def __post_init__(self):
        problems = validate_timing(self.dt, self.t_final)
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def steps(self):
        # guard against 50/1e-4 landing a hair under an integer
        return int(math.floor(self.t_final / self.dt + 1e-9))


def validate_timing(dt, t_final):
    problems = []
    if not (math.isfinite(dt) and 0 < dt <= 0.01):
        problems.append(f"dt must be in (0, 0.01], got {dt!r}")
    if not (math.isfinite(t_final) and t_final > 0):
        problems.append(f"t_final must be > 0, got {t_final!r}")
    elif not problems and t_final / dt > MAX_STEPS:
        problems.append(f"t_final/dt exceeds {MAX_STEPS} steps")
    return problems


@dataclass
class SimTrace:
    """Sampled closed-loop run on the grid ``t_k = k dt``.

    ``u[k]`` is the input held over ``[t_k, t_k + dt)``. When the run stops
    early, ``stop_time`` is the end of the failed step and ``stop_reason``
    says why ("ball contact" or "non-finite state").
    """

    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    y: np.ndarray
    xhat: Optional[np.ndarray] = None
    stop_time: Optional[float] = None
    stop_reason: Optional[str] = None

    @property
    def truncated(self):
        return self.stop_reason is not None

    @property
    def ball_contact(self):
        return self.stop_reason == "ball contact"

    def __len__(self):
        return self.t.size


def rk4_step(f, x, u, dt):
    """One classical Runge-Kutta step of ``dx/dt = f(x, u)`` with ``u`` held."""
    x = np.asarray(x, dtype=float)
    k1 = np.asarray(f(x, u))
    k2 = np.asarray(f(x + 0.5 * dt * k1, u))
    k3 = np.asarray(f(x + 0.5 * dt * k2, u))
    k4 = np.asarray(f(x + dt * k3, u))
    return x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_affine(A, B, dt):
    """Matrices ``(Phi, Gamma)`` with ``rk4_step`` on ``A x + B u`` equal to
    ``Phi x + Gamma u``."""
    n = A.shape[0]
    hA = dt * A
    eye = np.eye(n)
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    Phi = eye + hA + hA2 / 2 + hA3 / 6 + hA3 @ hA / 24
    Gamma = dt * (eye + hA / 2 + hA2 / 6 + hA3 / 24) @ B
    return Phi, Gamma


def _grid(cfg, rows):
    return np.arange(rows) * cfg.dt


def _run_linear(M, N, z0, v, steps):
    """Iterate ``z <- M z + N v``; returns the (steps + 1, len(z0)) history."""
    z = np.empty((steps + 1, z0.size))
    z[0] = z0
    drive = (N * v).ravel()
    cur = z0
    for k in range(steps):
        cur = M @ cur + drive
        z[k + 1] = cur
    return z


def _deviation(x, n=3, default=(0.01, 0.0, 0.0)):
    return np.array(default if x is None else x, dtype=float).reshape(n)


def simulate_linear_feedback(ss, K_fb, cfg):
    """Linear deviation model under ``u = K dx + v``.

    Default initial deviation ``(0.01, 0, 0)``.
    """
    K = np.atleast_2d(K_fb)
    x0 = _deviation(cfg.x0, ss.n)
    Phi, Gamma = rk4_affine(ss.A, ss.B, cfg.dt)
    x = _run_linear(Phi + Gamma @ K, Gamma, x0, cfg.v_ref, cfg.steps)
    u = x @ K[0] + cfg.v_ref
    y = x @ ss.C[0]
    return SimTrace(_grid(cfg, len(x)), x, u, y)


def simulate_lqr_linear(ss, K_lqr, cfg):
    K = np.atleast_2d(K_lqr)
    x0 = _deviation(cfg.x0, ss.n)
    Phi, Gamma = rk4_affine(ss.A, ss.B, cfg.dt)
    x = _run_linear(Phi - Gamma @ K, Gamma, x0, 0.0, cfg.steps)
    return SimTrace(_grid(cfg, len(x)), x, -(x @ K[0]), x @ ss.C[0])


def simulate_observer_linear(ss, K_fb, G_obs, cfg):
    """Plant and observer co-integrated; control uses the estimate.

    Default initial estimate is the origin, i.e. off by the initial deviation.
    """
    n = ss.n
    K = np.atleast_2d(K_fb)
    G = np.asarray(G_obs, dtype=float).reshape(n, 1)
    A, B, C = ss.A, ss.B, ss.C
    A_aug = np.block([[A, np.zeros((n, n))], [-G @ C, A + G @ C]])
    B_aug = np.vstack([B, B])
    Phi, Gamma = rk4_affine(A_aug, B_aug, cfg.dt)
    # u = K xhat + v
    K_aug = np.hstack([np.zeros((1, n)), K])
    z0 = np.concatenate([_deviation(cfg.x0, n),
                         _deviation(cfg.xhat0, n, default=(0.0,) * n)])
    z = _run_linear(Phi + Gamma @ K_aug, Gamma, z0, cfg.v_ref, cfg.steps)
    x, xhat = z[:, :n], z[:, n:]
    return SimTrace(_grid(cfg, len(z)), x, xhat @ K[0] + cfg.v_ref,
                    x @ C[0], xhat=xhat)


def _plant_rhs(p):
    g, KM, L, R = p.g, p.K / p.M, p.L, p.R

    def rhs(x1, x2, x3, u):
        if not x1 > 0:
            raise DomainError(f"ball position x1={x1!r} must be > 0")
        return x2, g - KM * x3 * x3 / (x1 * x1), (x1 / L) * (u - R * x3)

    return rhs


def _default_nonlinear_x0(eq):
    x = eq.state.copy()
    x[0] *= 1.05
    return x


def _run_nonlinear(p, eq, cfg, gain, v, observer=None):
    """Step the nonlinear plant, optionally with a linear observer.

    Without observer the input is ``E + gain (x - x_eq) + v``. With
    ``observer = (Ao, Bo, Go)`` the estimate obeys
    ``d(dxhat) = Ao dxhat + Bo (u - E) - Go (y - x10)`` and the input is
    ``E + gain dxhat + v``.
    """
    rhs = _plant_rhs(p)
    dt = cfg.dt
    steps = cfg.steps
    half = 0.5 * dt
    sixth = dt / 6.0
    E = float(eq.input_E)
    e1, e2, e3 = (float(c) for c in eq.state)
    k1_, k2_, k3_ = (float(c) for c in np.ravel(gain))
    x1, x2, x3 = (float(c) for c in
                  (_default_nonlinear_x0(eq) if cfg.x0 is None else cfg.x0))

    xs = np.empty((steps + 1, 3))
    us = np.empty(steps + 1)
    with_obs = observer is not None
    if with_obs:
        Ao, Bo, Go = (np.asarray(m, dtype=float) for m in observer)
        (a11, a12, a13), (a21, a22, a23), (a31, a32, a33) = Ao.tolist()
        b1_, b2_, b3_ = Bo.ravel().tolist()
        g1_, g2_, g3_ = Go.ravel().tolist()
        xh0 = eq.state if cfg.xhat0 is None else np.asarray(cfg.xhat0, float)
        h1, h2, h3 = (float(a - b) for a, b in zip(xh0, eq.state))
        xhs = np.empty((steps + 1, 3))

        def obs(h1, h2, h3, y, du):
            dy = y - e1
            return (a11 * h1 + a12 * h2 + a13 * h3 + b1_ * du - g1_ * dy,
                    a21 * h1 + a22 * h2 + a23 * h3 + b2_ * du - g2_ * dy,
                    a31 * h1 + a32 * h2 + a33 * h3 + b3_ * du - g3_ * dy)

    stop_time = stop_reason = None
    rows = steps + 1
    for k in range(steps + 1):
        xs[k] = (x1, x2, x3)
        if with_obs:
            xhs[k] = (h1, h2, h3)
            du = k1_ * h1 + k2_ * h2 + k3_ * h3 + v
        else:
            du = k1_ * (x1 - e1) + k2_ * (x2 - e2) + k3_ * (x3 - e3) + v
        u = E + du
        us[k] = u
        if k == steps:
            break
        try:
            a1, a2, a3 = rhs(x1, x2, x3, u)
            b1, b2, b3 = rhs(x1 + half * a1, x2 + half * a2, x3 + half * a3, u)
            c1, c2, c3 = rhs(x1 + half * b1, x2 + half * b2, x3 + half * b3, u)
            d1, d2, d3 = rhs(x1 + dt * c1, x2 + dt * c2, x3 + dt * c3, u)
            if with_obs:
                p1, p2, p3 = obs(h1, h2, h3, x1, du)
                q1, q2, q3 = obs(h1 + half * p1, h2 + half * p2, h3 + half * p3,
                                 x1 + half * a1, du)
                r1, r2, r3 = obs(h1 + half * q1, h2 + half * q2, h3 + half * q3,
                                 x1 + half * b1, du)
                s1, s2, s3 = obs(h1 + dt * r1, h2 + dt * r2, h3 + dt * r3,
                                 x1 + dt * c1, du)
                h1 += sixth * (p1 + 2 * q1 + 2 * r1 + s1)
                h2 += sixth * (p2 + 2 * q2 + 2 * r2 + s2)
                h3 += sixth * (p3 + 2 * q3 + 2 * r3 + s3)
            x1 += sixth * (a1 + 2 * b1 + 2 * c1 + d1)
            x2 += sixth * (a2 + 2 * b2 + 2 * c2 + d2)
            x3 += sixth * (a3 + 2 * b3 + 2 * c3 + d3)
        except (DomainError, OverflowError, ZeroDivisionError):
            stop_reason = "ball contact"
        else:
            if not (math.isfinite(x1) and math.isfinite(x2) and math.isfinite(x3)):
                stop_reason = "non-finite state"
            elif not x1 > 0:
                stop_reason = "ball contact"
        if stop_reason is not None:
            stop_time = (k + 1) * dt
            rows = k + 1
            break

    xs = xs[:rows]
    trace = SimTrace(_grid(cfg, rows), xs, us[:rows].copy(), xs[:, 0].copy(),
                     stop_time=stop_time, stop_reason=stop_reason)
    if with_obs:
        # absolute coordinates, comparable with x
        trace.xhat = xhs[:rows] + eq.state
    return trace


def simulate_nonlinear_feedback(p, eq, K_fb, cfg):
    """Nonlinear plant under ``u = E + K (x - x_eq) + v``.

    Default initial state: the operating point with x1 raised by 5 %.
    """
    return _run_nonlinear(p, eq, cfg, K_fb, cfg.v_ref)


def simulate_lqr_nonlinear(p, eq, K_lqr, cfg):
    """Nonlinear plant under ``u = E - K_lqr (x - x_eq)``."""
    return _run_nonlinear(p, eq, cfg, -np.ravel(K_lqr), 0.0)


def simulate_observer_nonlinear(ss, p, eq, K_fb, G_obs, cfg):
    """Nonlinear plant, observer in deviation coordinates, ``u = E + K dxhat + v``.

    The measured position enters the observer as ``y - x10``. Default
    initial estimate is the operating point itself.
    """
    G = np.asarray(G_obs, dtype=float).reshape(ss.n, 1)
    return _run_nonlinear(p, eq, cfg, K_fb, cfg.v_ref,
                          observer=(ss.A + G @ ss.C, ss.B, G))


def simulate_with_observer(mode, ss, p, eq, K_fb, G_obs, cfg):
    if mode == "linear":
        return simulate_observer_linear(ss, K_fb, G_obs, cfg)
    if mode == "nonlinear":
        return simulate_observer_nonlinear(ss, p, eq, K_fb, G_obs, cfg)
    raise ValueError(f"mode must be 'linear' or 'nonlinear', got {mode!r}")


def simulate_lqr(mode, ss, p, eq, K_lqr, cfg):
    if mode == "linear":
        return simulate_lqr_linear(ss, K_lqr, cfg)
    if mode == "nonlinear":
        return simulate_lqr_nonlinear(p, eq, K_lqr, cfg)
    raise ValueError(f"mode must be 'linear' or 'nonlinear', got {mode!r}")


def quadratic_cost(trace, Q, R_weight, x_ref=None, u_ref=0.0):
    """Trapezoidal ``int (dx^T Q dx + R du^2) dt`` over the trace."""
    dx = trace.x if x_ref is None else trace.x - np.asarray(x_ref)
    du = trace.u - u_ref
    integrand = np.einsum("ki,ij,kj->k", dx, np.asarray(Q, float), dx) \
        + R_weight * du * du
    if integrand.size < 2:
        return 0.0
    dt = trace.t[1] - trace.t[0]
    return float(dt * (integrand.sum() - 0.5 * (integrand[0] + integrand[-1])))


def response_summary(trace, y_ref=0.0, band=0.01):
    """Peak output deviation and the time it last leaves the band.

    The band is ``band`` times the peak deviation. Settling time is None when
    the trace ends outside the band.
    """
    dev = np.abs(trace.y - y_ref)
    peak = float(dev.max()) if dev.size else 0.0
    if peak == 0.0:
        return {"peak_deviation": 0.0, "settling_time": 0.0}
    outside = np.nonzero(dev > band * peak)[0]
    last = outside[-1]
    if last == dev.size - 1:
        settling = None
    else:
        settling = float(trace.t[last + 1])
    return {"peak_deviation": peak, "settling_time": settling}
