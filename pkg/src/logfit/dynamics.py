"""Vector fields and adaptation laws for the coupled reference/tracking system.

The reference system replays the target signal by integrating the true
logistic ensemble; the tracking system is a structural copy driven by
estimated parameters plus output-error feedback K(t)*e.  Both are wrapped in
a periodic reset: a gate lam(t, D) switches the drift off and slides every
state back to x0 at slew rate l0 for dT2 seconds out of every period
T1 = T + dT2 (or whenever the tracking state norm reaches D).  Estimates are
adjusted by a speed-gradient law with an optional dead zone of half-width
delta that freezes adaptation when |e| <= delta.

All functions here are pure; integration lives in `integrator` and the tuned
long-run loop in `kernel`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .models import LogisticEnsemble


@dataclass(frozen=True)
class ResetSchedule:
    """Periodic reset window plus state-norm cap.

    T : active-window length, dT2 : reset-window length, D : tracking-state
    norm bound (np.inf disables the norm trigger), l0 : reset slew rate.
    The period is T1 = T + dT2.

    For a finite D the slew must be able to cross the bound within one reset
    window, i.e. l0 >= D/dT2; schedules violating that cannot guarantee the
    state returns to x0 before the next active window.  With D = inf the
    condition is vacuous and is not checked (the bundled single-sigmoid
    scenario uses exactly that configuration).

    The norm trigger is pointwise by default: the gate drops back to 0 as
    soon as the norm falls below D, which chatters along the bound.  With
    latched=True a norm trip holds the gate at 1 until the tracking state has
    slid all the way back to x0 (an alternative reading of the trigger; kept
    behind this flag, not the default).
    """

    T: float
    dT2: float
    D: float = math.inf
    l0: float = 1.0
    latched: bool = False

    def __post_init__(self):
        if not (self.T > 0 and self.dT2 > 0):
            raise ValueError(f"window lengths must be positive, got T={self.T}, dT2={self.dT2}")
        if not self.D > 0:
            raise ValueError(f"norm bound D must be positive, got {self.D}")
        if not self.l0 > 0:
            raise ValueError(f"slew rate l0 must be positive, got {self.l0}")
        if math.isfinite(self.D) and self.l0 < self.D / self.dT2 - 1e-12:
            raise ValueError(
                f"l0={self.l0} cannot cross the norm bound within one reset window: "
                f"need l0 >= D/dT2 = {self.D / self.dT2}"
            )

    @property
    def T1(self) -> float:
        return self.T + self.dT2


@dataclass(frozen=True)
class AdaptationConfig:
    """Learning gain gamma, dead-zone half-width delta, acceptance slack delta1."""

    gamma: float
    delta: float = 0.0
    delta1: float = 1e-3

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.delta < 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")
        if not self.delta1 > 0:
            raise ValueError(f"delta1 must be positive, got {self.delta1}")


@dataclass(frozen=True)
class AdaptiveState:
    """Full state of one coupled run: time, both state vectors, and estimates.

    q_hat holds the estimated signed quadratic coefficients (the beta-like
    unknowns expressed as dx/dt = alpha*x + q*x^2); k_gain is the per-equation
    output-error feedback gain K(t).
    """

    t: float
    x: np.ndarray
    x_hat: np.ndarray
    alpha_hat: np.ndarray
    q_hat: np.ndarray
    k_gain: np.ndarray

    def __post_init__(self):
        for name in ("x", "x_hat", "alpha_hat", "q_hat", "k_gain"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float)).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = self.x.size
        if any(getattr(self, name).size != n for name in ("x_hat", "alpha_hat", "q_hat", "k_gain")):
            raise ValueError("state vectors must share one length")


@dataclass(frozen=True)
class MultiInputSystem:
    """Logistic ensemble whose growth rates are modulated by m input channels.

    dx_i/dt = sum_j alpha[i,j] * dxi_j(t) * x_i * (1 - beta[i,j]*x_i), where
    dxi_j are the time derivatives of the input curves.  The per-channel
    saturation beta[i,j] sits inside the channel sum; for m = 1 this is the
    plain modulated logistic equation.
    """

    alpha: np.ndarray
    beta: np.ndarray
    c_out: np.ndarray
    x0: np.ndarray
    input_derivs: tuple = field(default_factory=tuple)

    def __post_init__(self):
        alpha = np.atleast_2d(np.asarray(self.alpha, dtype=float))
        beta = np.atleast_2d(np.asarray(self.beta, dtype=float))
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "c_out", np.atleast_1d(np.asarray(self.c_out, dtype=float)))
        object.__setattr__(self, "x0", np.atleast_1d(np.asarray(self.x0, dtype=float)))
        object.__setattr__(self, "input_derivs", tuple(self.input_derivs))
        if alpha.shape != beta.shape:
            raise ValueError(f"alpha and beta shapes differ: {alpha.shape} vs {beta.shape}")
        n, m = alpha.shape
        if self.c_out.size != n or self.x0.size != n:
            raise ValueError("c_out and x0 must have length n")
        if len(self.input_derivs) != m:
            raise ValueError(f"need {m} input-derivative channels, got {len(self.input_derivs)}")
        if not np.all(np.isfinite(self.x0)):
            raise ValueError("x0 must be finite")

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    @property
    def m(self) -> int:
        return self.alpha.shape[1]


def lambda_gate(t: float, x_hat_norm: float, sched: ResetSchedule) -> int:
    """Reset gate: 1 inside the reset window [T, T1) of each period, or when
    the tracking-state norm reaches D; 0 otherwise.

    The norm trigger is evaluated pointwise (no latching).  Integrators
    should prefer step-index arithmetic on grid-aligned runs; this float
    version is exact away from window edges.
    """
    phase = math.fmod(t, sched.T1)
    if phase < 0:
        phase += sched.T1
    return 1 if (phase >= sched.T or x_hat_norm >= sched.D) else 0


def signum_vec(v: np.ndarray) -> np.ndarray:
    """Componentwise sign with sign(0) = 0 exactly."""
    return np.sign(v)


def output(y_weights: np.ndarray, x: np.ndarray) -> float:
    """Weighted-sum readout y = y_weights . x."""
    y_weights = np.asarray(y_weights, dtype=float)
    x = np.asarray(x, dtype=float)
    if y_weights.shape != x.shape:
        raise ValueError(f"weight/state length mismatch: {y_weights.shape} vs {x.shape}")
    return float(np.dot(y_weights, x))


def reference_rhs(
    x: np.ndarray,
    t: float,
    sys: LogisticEnsemble,
    sched: ResetSchedule,
    lam: int,
) -> np.ndarray:
    """Reference drift (alpha*x + q*x^2) gated by (1-lam), plus the reset slide.

    During lam = 1 the drift is annihilated and every component moves toward
    x0 at rate l0 (t only enters through lam, which the caller evaluates)."""
    if lam:
        return -sched.l0 * np.sign(x - sys.x0)
    return sys.alpha * x + sys.quad_coeff * x * x


def tracking_rhs(
    x_hat: np.ndarray,
    e: float,
    state: AdaptiveState,
    sched: ResetSchedule,
    lam: int,
    x0: np.ndarray,
) -> np.ndarray:
    """Tracking drift with estimated parameters and output-error feedback.

    Returns (alpha_hat*x + q_hat*x^2 + K*e) * (1-lam) - lam*l0*sign(x_hat-x0).
    e = y(x_hat) - y(x) is supplied by the caller.  For lam = 1 the result is
    independent of the estimates, the gain, and e.
    """
    if lam:
        return -sched.l0 * np.sign(x_hat - x0)
    return state.alpha_hat * x_hat + state.q_hat * x_hat * x_hat + state.k_gain * e


def adaptation_rhs(
    state: AdaptiveState,
    e: float,
    cfg: AdaptationConfig,
    c_out: np.ndarray,
    lam: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Speed-gradient updates for (alpha_hat, q_hat, k_gain).

    d(alpha_hat)_i = -gamma * e * c_i * x_hat_i        (zero when gated)
    d(q_hat)_i     = -gamma * e * c_i * x_hat_i^2
    d(k_gain)_i    = -gamma * e^2 * c_i

    All three are multiplied by the dead-zone indicator (1 iff |e| > delta)
    and by (1-lam).  Returns exact zero vectors when frozen so that Euler
    updates leave the estimates bit-identical.
    """
    n = state.x_hat.size
    if lam or abs(e) <= cfg.delta:
        z = np.zeros(n)
        return z, z.copy(), z.copy()
    cx = np.asarray(c_out, dtype=float) * state.x_hat
    dalpha = -cfg.gamma * e * cx
    dq = -cfg.gamma * e * cx * state.x_hat
    dk = -cfg.gamma * e * e * np.asarray(c_out, dtype=float)
    return dalpha, dq, dk


def stabilizing_gain(
    sys: LogisticEnsemble,
    D: float,
    delta: float,
    delta1: float = 0.0,
    margin: float = 1.1,
) -> np.ndarray:
    """Constant feedback gain k* making the matched error strictly decrease.

    With matched estimates the output-error derivative is
    e_dot = c . (alpha*(x_hat - x) + q*(x_hat^2 - x^2)) + (c . k*) * e.
    On the ball max(|x|, |x_hat|) <= D the drift part is bounded by
        D2 = sum_i |c_i| * (|alpha_i| * 2D + |q_i| * 4D^2),
    using |x_hat_i - x_i| <= 2D and |x_hat_i^2 - x_i^2| =
    |x_hat_i - x_i| * |x_hat_i + x_i| <= 2D * 2D.  Any k* with
    c . k* < -D2/(delta - delta1) then gives e*e_dot < 0 whenever |e| > delta
    (delta1 = 0), and supports the tightened descent ledger used by
    `estimation_progress_bound` for 0 < delta1 < delta.

    Returns k* = -s * c / ||c||^2 with s = margin * D2/(delta-delta1) + 1,
    so c . k* = -(margin * D2/(delta-delta1) + 1) < -D2/(delta-delta1).
    """
    c = sys.c_out
    if not np.any(c != 0.0):
        raise ValueError("output weights are all zero; no output channel to stabilize")
    if not (delta > delta1 >= 0.0):
        raise ValueError(f"need delta > delta1 >= 0, got delta={delta}, delta1={delta1}")
    if not (np.isfinite(D) and D > 0):
        raise ValueError(f"need a finite positive state bound, got D={D}")
    d2 = float(np.sum(np.abs(c) * (np.abs(sys.alpha) * 2.0 * D + np.abs(sys.quad_coeff) * 4.0 * D * D)))
    scale = margin * d2 / (delta - delta1) + 1.0
    return -scale * c / float(np.dot(c, c))


@dataclass(frozen=True)
class AdaptationTrace:
    """Checkpointed history of one instrumented adaptive run.

    t, alpha_hat, q_hat, k_gain are checkpoint arrays (first axis: checkpoint
    index).  dissipation is the running trapezoid integral, on the full step
    grid, of S_delta(e) * |e| restricted to active (non-reset) segments; the
    gain-dependent factor |c . k*| is applied later so one trace serves any
    candidate gain.  alpha_true/q_true must be present for the progress bound
    (they exist only in synthetic runs).
    """

    t: np.ndarray
    alpha_hat: np.ndarray
    q_hat: np.ndarray
    k_gain: np.ndarray
    dissipation: np.ndarray
    alpha_true: np.ndarray | None = None
    q_true: np.ndarray | None = None


def estimation_progress_bound(
    trace: AdaptationTrace,
    kstar: np.ndarray,
    cfg: AdaptationConfig,
    c_out: np.ndarray,
    at: int = -1,
) -> tuple[float, float]:
    """Evaluate both sides of the parameter-progress inequality lhs >= rhs.

    lhs is the decrease of the gamma^-1-weighted squared parameter error
    between the first checkpoint and checkpoint `at`; rhs is the gain motion
    toward k* plus twice the dissipation integral scaled by
    |c . k*| * delta1.  For a valid k* (see `stabilizing_gain`) the
    inequality holds along exact trajectories; it is a diagnostic available
    only when the true parameters are known.
    """
    if trace.alpha_true is None or trace.q_true is None:
        raise ValueError("progress bound needs the true parameters recorded in the trace")
    g = cfg.gamma
    a0 = trace.alpha_hat[0] - trace.alpha_true
    q0 = trace.q_hat[0] - trace.q_true
    a1 = trace.alpha_hat[at] - trace.alpha_true
    q1 = trace.q_hat[at] - trace.q_true
    lhs = (np.dot(a0, a0) + np.dot(q0, q0) - np.dot(a1, a1) - np.dot(q1, q1)) / g
    k0 = trace.k_gain[0] - kstar
    k1 = trace.k_gain[at] - kstar
    gain_term = (np.dot(k1, k1) - np.dot(k0, k0)) / g
    coupling = abs(float(np.dot(np.asarray(c_out, dtype=float), kstar)))
    integral = float(trace.dissipation[at] - trace.dissipation[0])
    rhs = gain_term + 2.0 * coupling * cfg.delta1 * integral
    return float(lhs), float(rhs)


def multiinput_rhs(sys: MultiInputSystem, x: np.ndarray, t: float) -> np.ndarray:
    """RHS of the input-modulated ensemble at time t.

    dx_i = x_i * sum_j alpha[i,j] * dxi_j(t) * (1 - beta[i,j]*x_i).
    With one channel and dxi(t) = 1 this is the autonomous logistic RHS;
    a constant dxi(t) = r rescales time by r.
    """
    u = np.array([float(f(t)) for f in sys.input_derivs])
    x = np.asarray(x, dtype=float)
    if x.size != sys.n:
        raise ValueError(f"state length {x.size} != n={sys.n}")
    inner = (sys.alpha * u[None, :]) * (1.0 - sys.beta * x[:, None])
    return x * inner.sum(axis=1)


def feedback_rhs(sys: LogisticEnsemble, x: np.ndarray, z: float) -> tuple[np.ndarray, float]:
    """Output-coupled ensemble: dx_i = alpha_i*(c.x)*x_i*(1-beta_i*x_i), dz = c.x.

    z accumulates the output, so z(t) equals the time integral of y; the
    coupling makes the ensemble generate solutions of dz/dt = F(z) for the
    sigmoid sum F realized by the ensemble.
    """
    x = np.asarray(x, dtype=float)
    y = float(np.dot(sys.c_out, x))
    dx = sys.alpha * y * x * (1.0 - sys.beta * x)
    return dx, y
