"""Fixed-step integration of the coupled reference/tracking system.

Explicit Euler is the production method; classical RK4 is kept alongside as a
verification oracle.  Both use synchronous updates: every block of the
augmented state (x, x_hat, alpha_hat, q_hat, k_gain) advances from the same
pre-step values.  Discontinuous gates (reset gate lam, dead-zone indicator)
are evaluated once at the step start and frozen across RK4 sub-stages; the
componentwise reset sign function is re-evaluated per stage.

Runs are expected to be grid-aligned: T1/dt and dT2/dt integral, so gate
transitions land exactly on step boundaries.  During reset windows a
component within one step's travel (l0*dt) of its target snaps to x0 exactly,
which makes epoch boundaries land on x = x0 bit-exactly once the slide has
had time to complete.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    AdaptationConfig,
    AdaptationTrace,
    AdaptiveState,
    ResetSchedule,
    adaptation_rhs,
    lambda_gate,
    output,
    reference_rhs,
    tracking_rhs,
)
from .models import LogisticEnsemble


class DivergenceError(RuntimeError):
    """A state component left the finite range during integration."""

    def __init__(self, t: float, detail: str = ""):
        self.t = t
        super().__init__(f"non-finite state at t={t:.6g}" + (f" ({detail})" if detail else ""))


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float
    method: str = "euler"

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.method not in ("euler", "rk4"):
            raise ValueError(f"method must be 'euler' or 'rk4', got {self.method!r}")


def check_grid_alignment(sched: ResetSchedule, dt: float) -> tuple[int, int]:
    """Return (steps per period, steps per active window); reject misaligned dt.

    Both T1/dt and dT2/dt must be integral so gate flips land on grid points.
    """
    per = sched.T1 / dt
    res = sched.dT2 / dt
    if abs(per - round(per)) > 1e-6 or abs(res - round(res)) > 1e-6:
        raise ValueError(
            f"grid misalignment: T1/dt={per} and dT2/dt={res} must be integers"
        )
    steps_period = int(round(per))
    steps_active = steps_period - int(round(res))
    return steps_period, steps_active


def _snap(vec: np.ndarray, prev: np.ndarray, x0: np.ndarray, tol: float) -> np.ndarray:
    """Snap components that started within one step's travel of x0."""
    close = np.abs(prev - x0) < tol
    if np.any(close):
        vec = vec.copy()
        vec[close] = x0[close]
    return vec


def step(
    state: AdaptiveState,
    sys: LogisticEnsemble,
    sched: ResetSchedule,
    acfg: AdaptationConfig,
    icfg: IntegratorConfig,
    lam: int | None = None,
) -> AdaptiveState:
    """Advance the coupled system by one step of dt.

    lam overrides the gate when the caller tracks it by step index (exact on
    aligned grids); by default it is computed from the state time and norm.
    Raises DivergenceError if any component becomes non-finite.
    """
    dt = icfg.dt
    if lam is None:
        lam = lambda_gate(state.t, float(np.linalg.norm(state.x_hat)), sched)

    e0 = output(sys.c_out, state.x_hat) - output(sys.c_out, state.x)
    frozen_sdelta = abs(e0) > acfg.delta

    if icfg.method == "euler":
        dx = reference_rhs(state.x, state.t, sys, sched, lam)
        dxh = tracking_rhs(state.x_hat, e0, state, sched, lam, sys.x0)
        dalpha, dq, dk = adaptation_rhs(state, e0, acfg, sys.c_out, lam)
        x = state.x + dt * dx
        x_hat = state.x_hat + dt * dxh
        alpha_hat = state.alpha_hat + dt * dalpha
        q_hat = state.q_hat + dt * dq
        k_gain = state.k_gain + dt * dk
    else:
        x, x_hat, alpha_hat, q_hat, k_gain = _rk4_step(
            state, sys, sched, acfg, dt, lam, frozen_sdelta
        )

    if lam:
        tol = sched.l0 * dt
        x = _snap(x, state.x, sys.x0, tol)
        x_hat = _snap(x_hat, state.x_hat, sys.x0, tol)

    new = AdaptiveState(
        t=state.t + dt, x=x, x_hat=x_hat, alpha_hat=alpha_hat, q_hat=q_hat, k_gain=k_gain
    )
    for block in (new.x, new.x_hat, new.alpha_hat, new.q_hat, new.k_gain):
        if not np.all(np.isfinite(block)):
            raise DivergenceError(new.t)
    return new


def _rk4_step(state, sys, sched, acfg, dt, lam, sdelta):
    """Classical RK4 over the augmented state with lam and S_delta frozen."""
    c = sys.c_out
    x0 = sys.x0
    gamma = acfg.gamma

    def deriv(x, xh, ah, qh, kg):
        e = float(np.dot(c, xh) - np.dot(c, x))
        if lam:
            dx = -sched.l0 * np.sign(x - x0)
            dxh = -sched.l0 * np.sign(xh - x0)
            z = np.zeros_like(ah)
            return dx, dxh, z, z, z
        dx = sys.alpha * x + sys.quad_coeff * x * x
        dxh = ah * xh + qh * xh * xh + kg * e
        if sdelta:
            cx = c * xh
            da = -gamma * e * cx
            dq = -gamma * e * cx * xh
            dk = -gamma * e * e * c
        else:
            da = dq = dk = np.zeros_like(ah)
        return dx, dxh, da, dq, dk

    y = (state.x, state.x_hat, state.alpha_hat, state.q_hat, state.k_gain)
    k1 = deriv(*y)
    k2 = deriv(*(yi + 0.5 * dt * ki for yi, ki in zip(y, k1)))
    k3 = deriv(*(yi + 0.5 * dt * ki for yi, ki in zip(y, k2)))
    k4 = deriv(*(yi + dt * ki for yi, ki in zip(y, k3)))
    return tuple(
        yi + (dt / 6.0) * (a + 2.0 * b + 2.0 * c_ + d)
        for yi, a, b, c_, d in zip(y, k1, k2, k3, k4)
    )


@dataclass(frozen=True)
class Trajectory:
    t: np.ndarray
    x: np.ndarray  # shape (len(t), n)
    y: np.ndarray  # readout c_out . x per sample


def integrate_autonomous(
    sys: LogisticEnsemble, t_end: float, icfg: IntegratorConfig
) -> Trajectory:
    """Integrate dx = alpha*x + q*x^2 from sys.x0; no schedule, no adaptation."""
    if not t_end > 0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    dt = icfg.dt
    n_steps = int(round(t_end / dt))
    alpha, q = sys.alpha, sys.quad_coeff

    def f(x):
        return alpha * x + q * x * x

    xs = np.empty((n_steps + 1, sys.n))
    xs[0] = sys.x0
    x = sys.x0.astype(float)
    for k in range(n_steps):
        if icfg.method == "euler":
            x = x + dt * f(x)
        else:
            k1 = f(x)
            k2 = f(x + 0.5 * dt * k1)
            k3 = f(x + 0.5 * dt * k2)
            k4 = f(x + dt * k3)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(x)):
            raise DivergenceError((k + 1) * dt)
        xs[k + 1] = x
    t = np.arange(n_steps + 1) * dt
    return Trajectory(t=t, x=xs, y=xs @ sys.c_out)


def _fixed_step(f, y0: np.ndarray, dt: float, n_steps: int, method: str) -> np.ndarray:
    """Generic Euler/RK4 march of dy/dt = f(y, t); returns (n_steps+1, len(y0))."""
    ys = np.empty((n_steps + 1, y0.size))
    ys[0] = y0
    y = y0.astype(float)
    for k in range(n_steps):
        t = k * dt
        if method == "euler":
            y = y + dt * f(y, t)
        else:
            k1 = f(y, t)
            k2 = f(y + 0.5 * dt * k1, t + 0.5 * dt)
            k3 = f(y + 0.5 * dt * k2, t + 0.5 * dt)
            k4 = f(y + dt * k3, t + dt)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise DivergenceError((k + 1) * dt)
        ys[k + 1] = y
    return ys


def integrate_multiinput(sys, t_end: float, icfg: IntegratorConfig) -> Trajectory:
    """Forward-simulate an input-modulated ensemble (`dynamics.MultiInputSystem`)."""
    from .dynamics import multiinput_rhs

    n_steps = int(round(t_end / icfg.dt))
    xs = _fixed_step(lambda x, t: multiinput_rhs(sys, x, t), sys.x0, icfg.dt, n_steps, icfg.method)
    t = np.arange(n_steps + 1) * icfg.dt
    return Trajectory(t=t, x=xs, y=xs @ sys.c_out)


def integrate_feedback(
    sys: LogisticEnsemble, t_end: float, icfg: IntegratorConfig, z0: float = 0.0
) -> tuple[Trajectory, np.ndarray]:
    """Forward-simulate the output-coupled ensemble; returns (trajectory, z path)."""
    from .dynamics import feedback_rhs

    n_steps = int(round(t_end / icfg.dt))

    def f(y, t):
        dx, dz = feedback_rhs(sys, y[:-1], float(y[-1]))
        return np.append(dx, dz)

    y0 = np.append(sys.x0, float(z0))
    ys = _fixed_step(f, y0, icfg.dt, n_steps, icfg.method)
    t = np.arange(n_steps + 1) * icfg.dt
    xs = ys[:, :-1]
    return Trajectory(t=t, x=xs, y=xs @ sys.c_out), ys[:, -1]


@dataclass
class RunResult:
    """Outputs of an adaptive run (reference loop or tuned kernel).

    Per-epoch arrays cover completed epochs; checkpoint arrays are decimated
    by record_stride (0 disables them).  boundary_dev is the largest
    max-norm deviation of either state from x0 seen at an epoch boundary.
    """

    state: AdaptiveState
    epoch_alpha_hat: np.ndarray
    epoch_q_hat: np.ndarray
    epoch_k_gain: np.ndarray
    epoch_R: np.ndarray
    epoch_emax_active: np.ndarray
    boundary_dev: float
    max_tracking_norm: float = 0.0
    diverged: bool = False
    t_checkpoints: np.ndarray | None = None
    e_checkpoints: np.ndarray | None = None
    lam_checkpoints: np.ndarray | None = None
    alpha_checkpoints: np.ndarray | None = None
    q_checkpoints: np.ndarray | None = None
    k_checkpoints: np.ndarray | None = None
    dissipation_checkpoints: np.ndarray | None = None

    def trace(self, sys: LogisticEnsemble) -> AdaptationTrace:
        if self.t_checkpoints is None:
            raise ValueError("run was not recorded; set record_stride > 0")
        return AdaptationTrace(
            t=self.t_checkpoints,
            alpha_hat=self.alpha_checkpoints,
            q_hat=self.q_checkpoints,
            k_gain=self.k_checkpoints,
            dissipation=self.dissipation_checkpoints,
            alpha_true=sys.alpha,
            q_true=sys.quad_coeff,
        )


def run_adaptive(
    sys: LogisticEnsemble,
    sched: ResetSchedule,
    acfg: AdaptationConfig,
    icfg: IntegratorConfig,
    n_epochs: int,
    alpha_hat0: np.ndarray,
    q_hat0: np.ndarray | None = None,
    k_gain0: np.ndarray | None = None,
    *,
    adapt_quad: bool = True,
    beta_known: np.ndarray | None = None,
    c_weighted_alpha: bool = True,
    adapt_gain: bool = True,
    record_stride: int = 0,
) -> RunResult:
    """Reference (slow, numpy) epoch loop; mirrors `kernel.run_epochs_fast`.

    adapt_quad=True adapts (alpha_hat, q_hat) independently; with
    adapt_quad=False the quadratic coefficient is slaved to the known
    saturation (q_hat = -alpha_hat*beta_known) and only alpha_hat adapts,
    against the combined basis x_hat*(1 - beta_known*x_hat).
    c_weighted_alpha chooses whether the alpha update carries the output
    weight c_i.  The gain law always carries c_i.
    """
    dt = icfg.dt
    steps_period, steps_active = check_grid_alignment(sched, dt)
    n = sys.n
    alpha = sys.alpha.astype(float)
    q = sys.quad_coeff.astype(float)
    c = sys.c_out.astype(float)
    x0 = sys.x0.astype(float)
    if beta_known is None:
        beta_known = np.ones(n)
    beta_known = np.asarray(beta_known, dtype=float)

    x = x0.copy()
    xh = x0.copy()
    ah = np.asarray(alpha_hat0, dtype=float).copy()
    if q_hat0 is None:
        q_hat0 = -ah * beta_known if not adapt_quad else np.zeros(n)
    qh = np.asarray(q_hat0, dtype=float).copy()
    kg = np.zeros(n) if k_gain0 is None else np.asarray(k_gain0, dtype=float).copy()

    gamma, delta = acfg.gamma, acfg.delta
    l0, D = sched.l0, sched.D
    snap_tol = l0 * dt

    ep_alpha = np.empty((n_epochs, n))
    ep_q = np.empty((n_epochs, n))
    ep_k = np.empty((n_epochs, n))
    ep_R = np.empty(n_epochs)
    ep_emax = np.empty(n_epochs)
    boundary_dev = 0.0
    max_norm = 0.0
    latch = False

    rec = record_stride > 0
    if rec:
        total = n_epochs * steps_period
        n_cp = total // record_stride + 1
        cp_t = np.empty(n_cp)
        cp_e = np.empty(n_cp)
        cp_lam = np.empty(n_cp, dtype=np.int64)
        cp_a = np.empty((n_cp, n))
        cp_q = np.empty((n_cp, n))
        cp_k = np.empty((n_cp, n))
        cp_I = np.empty(n_cp)
    icp = 0
    dissipation = 0.0
    prev_sample = 0.0
    diverged = False

    k_step = 0
    for ep in range(n_epochs):
        acc_e2 = 0.0
        emax = 0.0
        for pos in range(steps_period):
            e = float(np.dot(c, xh) - np.dot(c, x))
            norm = float(np.linalg.norm(xh))
            if norm > max_norm:
                max_norm = norm
            if sched.latched:
                if math.isfinite(D) and norm >= D:
                    latch = True
                elif latch and np.array_equal(xh, x0):
                    latch = False
            lam = 1 if pos >= steps_active else (
                1 if latch or (math.isfinite(D) and norm >= D) else 0
            )
            sdelta = abs(e) > delta
            sample = abs(e) if (sdelta and lam == 0) else 0.0
            if k_step > 0:
                dissipation += 0.5 * (prev_sample + sample) * dt
            prev_sample = sample
            if rec and k_step % record_stride == 0:
                cp_t[icp] = k_step * dt
                cp_e[icp] = e
                cp_lam[icp] = lam
                cp_a[icp] = ah
                cp_q[icp] = qh
                cp_k[icp] = kg
                cp_I[icp] = dissipation
                icp += 1

            acc_e2 += e * e
            if lam == 0 and abs(e) > emax:
                emax = abs(e)

            if lam:
                x_new = np.where(np.abs(x - x0) < snap_tol, x0, x - dt * l0 * np.sign(x - x0))
                xh_new = np.where(np.abs(xh - x0) < snap_tol, x0, xh - dt * l0 * np.sign(xh - x0))
                x, xh = x_new, xh_new
            else:
                if adapt_quad:
                    dxh = ah * xh + qh * xh * xh + kg * e
                else:
                    dxh = ah * xh * (1.0 - beta_known * xh) + kg * e
                x_new = x + dt * (alpha * x + q * x * x)
                if sdelta:
                    w = c if c_weighted_alpha else 1.0
                    if adapt_quad:
                        basis = w * xh
                        ah = ah + dt * (-gamma * e * basis)
                        qh = qh + dt * (-gamma * e * basis * xh)
                    else:
                        basis = w * xh * (1.0 - beta_known * xh)
                        ah = ah + dt * (-gamma * e * basis)
                        qh = -ah * beta_known
                    if adapt_gain:
                        kg = kg + dt * (-gamma * e * e * c)
                xh = xh + dt * dxh
                x = x_new
            k_step += 1
            if not (
                np.all(np.isfinite(x))
                and np.all(np.isfinite(xh))
                and np.all(np.isfinite(ah))
                and np.all(np.isfinite(qh))
                and np.all(np.isfinite(kg))
            ):
                diverged = True
                break
        if diverged:
            ep_alpha = ep_alpha[:ep]
            ep_q = ep_q[:ep]
            ep_k = ep_k[:ep]
            ep_R = ep_R[:ep]
            ep_emax = ep_emax[:ep]
            break
        dev = max(float(np.max(np.abs(x - x0))), float(np.max(np.abs(xh - x0))))
        boundary_dev = max(boundary_dev, dev)
        ep_alpha[ep] = ah
        ep_q[ep] = qh
        ep_k[ep] = kg
        ep_R[ep] = acc_e2 * dt / sched.T1
        ep_emax[ep] = emax

    if rec:
        cp_t = cp_t[:icp]
        cp_e = cp_e[:icp]
        cp_lam = cp_lam[:icp]
        cp_a = cp_a[:icp]
        cp_q = cp_q[:icp]
        cp_k = cp_k[:icp]
        cp_I = cp_I[:icp]

    state = AdaptiveState(t=k_step * dt, x=x, x_hat=xh, alpha_hat=ah, q_hat=qh, k_gain=kg)
    return RunResult(
        state=state,
        epoch_alpha_hat=ep_alpha,
        epoch_q_hat=ep_q,
        epoch_k_gain=ep_k,
        epoch_R=ep_R,
        epoch_emax_active=ep_emax,
        boundary_dev=boundary_dev,
        max_tracking_norm=max_norm,
        diverged=diverged,
        t_checkpoints=cp_t if rec else None,
        e_checkpoints=cp_e if rec else None,
        lam_checkpoints=cp_lam if rec else None,
        alpha_checkpoints=cp_a if rec else None,
        q_checkpoints=cp_q if rec else None,
        k_checkpoints=cp_k if rec else None,
        dissipation_checkpoints=cp_I if rec else None,
    )
