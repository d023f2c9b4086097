"""Tuned inner loop for long adaptive runs (same semantics as the reference loop).

`integrator.run_adaptive` is the readable specification of one run; this
module repeats it as a numba-compiled scalar loop so that full-scale trials
(tens of millions of Euler steps) finish in seconds.  The two paths are
cross-checked in the test suite; the kernel computes the output error with a
sequential dot product, so agreement is to rounding, not bitwise.

Only explicit Euler is provided here; RK4 stays in `integrator` where it
serves as the verification oracle on short horizons.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .dynamics import AdaptationConfig, AdaptiveState, ResetSchedule
from .integrator import DivergenceError, IntegratorConfig, RunResult, check_grid_alignment
from .models import LogisticEnsemble

STATUS_OK = 0
STATUS_DIVERGED = 1


@njit(cache=True)
def _run_epochs(
    alpha, q, c, x0, beta_known,
    x, xh, ah, qh, kg,
    n_epochs, steps_period, steps_active,
    dt, l0, D, T1,
    gamma, delta,
    adapt_quad, c_weighted_alpha, adapt_gain, latched,
    record_stride,
    ep_alpha, ep_q, ep_k, ep_R, ep_emax, boundary_dev_out,
    cp_t, cp_e, cp_lam, cp_a, cp_q, cp_k, cp_I,
):
    n = alpha.shape[0]
    snap_tol = l0 * dt
    norm_cap = np.isfinite(D)
    dissipation = 0.0
    prev_sample = 0.0
    icp = 0
    k_step = 0
    boundary_dev = 0.0
    max_norm = 0.0
    latch = False
    status = STATUS_OK
    completed = 0

    for ep in range(n_epochs):
        acc_e2 = 0.0
        emax = 0.0
        for pos in range(steps_period):
            e = 0.0
            for i in range(n):
                e += c[i] * (xh[i] - x[i])

            s = 0.0
            for i in range(n):
                s += xh[i] * xh[i]
            norm = np.sqrt(s)
            if norm > max_norm:
                max_norm = norm
            if latched:
                if norm_cap and norm >= D:
                    latch = True
                elif latch:
                    back_home = True
                    for i in range(n):
                        if xh[i] != x0[i]:
                            back_home = False
                    if back_home:
                        latch = False

            lam = 0
            if pos >= steps_active:
                lam = 1
            elif latch or (norm_cap and norm >= D):
                lam = 1

            sdelta = np.abs(e) > delta
            sample = np.abs(e) if (sdelta and lam == 0) else 0.0
            if k_step > 0:
                dissipation += 0.5 * (prev_sample + sample) * dt
            prev_sample = sample

            if record_stride > 0 and k_step % record_stride == 0:
                cp_t[icp] = k_step * dt
                cp_e[icp] = e
                cp_lam[icp] = lam
                for i in range(n):
                    cp_a[icp, i] = ah[i]
                    cp_q[icp, i] = qh[i]
                    cp_k[icp, i] = kg[i]
                cp_I[icp] = dissipation
                icp += 1

            acc_e2 += e * e
            if lam == 0 and np.abs(e) > emax:
                emax = np.abs(e)

            if lam == 1:
                for i in range(n):
                    d = x[i] - x0[i]
                    if np.abs(d) < snap_tol:
                        x[i] = x0[i]
                    else:
                        x[i] = x[i] - dt * l0 * np.sign(d)
                    d = xh[i] - x0[i]
                    if np.abs(d) < snap_tol:
                        xh[i] = x0[i]
                    else:
                        xh[i] = xh[i] - dt * l0 * np.sign(d)
            else:
                for i in range(n):
                    if adapt_quad:
                        dxh = ah[i] * xh[i] + qh[i] * xh[i] * xh[i] + kg[i] * e
                    else:
                        dxh = ah[i] * xh[i] * (1.0 - beta_known[i] * xh[i]) + kg[i] * e
                    x_new = x[i] + dt * (alpha[i] * x[i] + q[i] * x[i] * x[i])
                    if sdelta:
                        w = c[i] if c_weighted_alpha else 1.0
                        if adapt_quad:
                            basis = w * xh[i]
                            ah[i] = ah[i] + dt * (-gamma * e * basis)
                            qh[i] = qh[i] + dt * (-gamma * e * basis * xh[i])
                        else:
                            basis = w * xh[i] * (1.0 - beta_known[i] * xh[i])
                            ah[i] = ah[i] + dt * (-gamma * e * basis)
                            qh[i] = -ah[i] * beta_known[i]
                        if adapt_gain:
                            kg[i] = kg[i] + dt * (-gamma * e * e * c[i])
                    xh[i] = xh[i] + dt * dxh
                    x[i] = x_new

            k_step += 1
            ok = True
            for i in range(n):
                if not (
                    np.isfinite(x[i]) and np.isfinite(xh[i]) and np.isfinite(ah[i])
                    and np.isfinite(qh[i]) and np.isfinite(kg[i])
                ):
                    ok = False
            if not ok:
                status = STATUS_DIVERGED
                break
        if status != STATUS_OK:
            break
        dev = 0.0
        for i in range(n):
            a = np.abs(x[i] - x0[i])
            b = np.abs(xh[i] - x0[i])
            if a > dev:
                dev = a
            if b > dev:
                dev = b
        if dev > boundary_dev:
            boundary_dev = dev
        for i in range(n):
            ep_alpha[ep, i] = ah[i]
            ep_q[ep, i] = qh[i]
            ep_k[ep, i] = kg[i]
        ep_R[ep] = acc_e2 * dt / T1
        ep_emax[ep] = emax
        completed = ep + 1

    boundary_dev_out[0] = boundary_dev
    boundary_dev_out[1] = max_norm
    return status, completed, icp, k_step


def run_epochs_fast(
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
    raise_on_divergence: bool = False,
) -> RunResult:
    """Drop-in fast counterpart of `integrator.run_adaptive` (Euler only)."""
    if icfg.method != "euler":
        raise ValueError("fast path supports the euler method only")
    dt = icfg.dt
    steps_period, steps_active = check_grid_alignment(sched, dt)
    n = sys.n

    alpha = np.ascontiguousarray(sys.alpha, dtype=float)
    q = np.ascontiguousarray(sys.quad_coeff, dtype=float)
    c = np.ascontiguousarray(sys.c_out, dtype=float)
    x0 = np.ascontiguousarray(sys.x0, dtype=float)
    bk = np.ones(n) if beta_known is None else np.ascontiguousarray(beta_known, dtype=float)

    x = x0.copy()
    xh = x0.copy()
    ah = np.array(alpha_hat0, dtype=float).copy()
    if q_hat0 is None:
        q_hat0 = -ah * bk if not adapt_quad else np.zeros(n)
    qh = np.array(q_hat0, dtype=float).copy()
    kg = np.zeros(n) if k_gain0 is None else np.array(k_gain0, dtype=float).copy()

    ep_alpha = np.empty((n_epochs, n))
    ep_q = np.empty((n_epochs, n))
    ep_k = np.empty((n_epochs, n))
    ep_R = np.empty(n_epochs)
    ep_emax = np.empty(n_epochs)
    bdev = np.zeros(2)  # [0] boundary residual, [1] max tracking norm

    if record_stride > 0:
        n_cp = n_epochs * steps_period // record_stride + 1
    else:
        n_cp = 1
    cp_t = np.empty(n_cp)
    cp_e = np.empty(n_cp)
    cp_lam = np.empty(n_cp, dtype=np.int64)
    cp_a = np.empty((n_cp, n))
    cp_q = np.empty((n_cp, n))
    cp_k = np.empty((n_cp, n))
    cp_I = np.empty(n_cp)

    status, completed, icp, k_step = _run_epochs(
        alpha, q, c, x0, bk,
        x, xh, ah, qh, kg,
        n_epochs, steps_period, steps_active,
        dt, sched.l0, sched.D, sched.T1,
        acfg.gamma, acfg.delta,
        adapt_quad, c_weighted_alpha, adapt_gain, sched.latched,
        record_stride,
        ep_alpha, ep_q, ep_k, ep_R, ep_emax, bdev,
        cp_t, cp_e, cp_lam, cp_a, cp_q, cp_k, cp_I,
    )

    diverged = status == STATUS_DIVERGED
    if diverged and raise_on_divergence:
        raise DivergenceError(k_step * dt)

    rec = record_stride > 0
    state = AdaptiveState(
        t=k_step * dt, x=x, x_hat=xh, alpha_hat=ah, q_hat=qh, k_gain=kg
    )
    return RunResult(
        state=state,
        epoch_alpha_hat=ep_alpha[:completed],
        epoch_q_hat=ep_q[:completed],
        epoch_k_gain=ep_k[:completed],
        epoch_R=ep_R[:completed],
        epoch_emax_active=ep_emax[:completed],
        boundary_dev=float(bdev[0]),
        max_tracking_norm=float(bdev[1]),
        diverged=diverged,
        t_checkpoints=cp_t[:icp] if rec else None,
        e_checkpoints=cp_e[:icp] if rec else None,
        lam_checkpoints=cp_lam[:icp] if rec else None,
        alpha_checkpoints=cp_a[:icp] if rec else None,
        q_checkpoints=cp_q[:icp] if rec else None,
        k_checkpoints=cp_k[:icp] if rec else None,
        dissipation_checkpoints=cp_I[:icp] if rec else None,
    )
