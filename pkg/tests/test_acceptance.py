"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings.  The ten-sigmoid desk-scale study (20 trials x 2000
epochs) is executed once and shared by the criteria that consume it.
"""

import math

import numpy as np
import pytest
from scipy.special import expit

from logfit.baselines import ScalarSigmoidTarget, batch_cost, batch_gradient_rhs
from logfit.dynamics import (
    AdaptationConfig,
    AdaptiveState,
    ResetSchedule,
    adaptation_rhs,
    estimation_progress_bound,
    stabilizing_gain,
    tracking_rhs,
)
from logfit.harness import (
    example1_adaptive,
    example1_baseline,
    example1_progress_run,
    example2,
)
from logfit.integrator import IntegratorConfig, integrate_autonomous, run_adaptive, step
from logfit.kernel import run_epochs_fast
from logfit.models import LogisticEnsemble, eval_sigmoid_sum, logistic_to_sigmoid


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"\n[criterion {num:2d}] {'PASS' if ok else 'FAIL'} — {detail}")
    assert ok, f"criterion {num}: {detail}"


@pytest.fixture(scope="module")
def desk_study():
    return example2(scale="desk", seed=2024)


def _stack(ensembles):
    """Decoupled equations can be integrated as one big ensemble."""
    return LogisticEnsemble(
        alpha=np.concatenate([e.alpha for e in ensembles]),
        beta=np.concatenate([e.beta for e in ensembles]),
        c_out=np.concatenate([e.c_out for e in ensembles]),
        x0=np.concatenate([e.x0 for e in ensembles]),
    )


def test_criterion_1_conversion_equivalence():
    rng = np.random.default_rng(101)
    systems = []
    for _ in range(50):
        n = int(rng.integers(1, 9))
        systems.append(
            LogisticEnsemble.normalized(
                alpha=rng.uniform(-5, 5, n),
                c_out=rng.uniform(0.2, 3, n) * rng.choice([-1.0, 1.0], n),
                x0=rng.uniform(0.01, 0.99, n),
            )
        )
    traj = integrate_autonomous(_stack(systems), 10.0, IntegratorConfig(dt=1e-3, method="rk4"))
    worst = 0.0
    lo = 0
    for ens in systems:
        hi = lo + ens.n
        y_ode = traj.x[:, lo:hi] @ ens.c_out
        y_closed = eval_sigmoid_sum(logistic_to_sigmoid(ens), traj.t)
        worst = max(worst, float(np.max(np.abs(y_ode - y_closed))))
        lo = hi
    _report(1, worst < 1e-6, f"50 ensembles, max |ode - sigmoid sum| = {worst:.3e} (< 1e-6)")


def test_criterion_2_funnel_suite():
    rng = np.random.default_rng(102)
    alpha = rng.uniform(0.5, 5.0, 100) * rng.choice([-1.0, 1.0], 100)
    x0 = rng.uniform(0.01, 0.99, 100)
    ens = LogisticEnsemble.normalized(alpha=alpha, c_out=np.ones(100), x0=x0)
    traj = integrate_autonomous(ens, 40.0, IntegratorConfig(dt=1e-3, method="rk4"))
    diffs = np.diff(traj.x, axis=0)
    sign = np.sign(alpha)
    monotone = bool(np.all(diffs * sign >= -1e-12))
    contained = bool(np.all(traj.x >= -1e-12) and np.all(traj.x <= 1.0 + 1e-12))
    target = np.where(alpha > 0, 1.0, 0.0)
    limits = bool(np.all(np.abs(traj.x[-1] - target) < 1e-3))
    _report(
        2,
        monotone and contained and limits,
        f"100 instances: monotone={monotone}, in [0,1]={contained}, limits={limits}",
    )


def test_criterion_3_matched_descent():
    rng = np.random.default_rng(103)
    sched = ResetSchedule(T=10.0, dT2=1.0, D=5.0, l0=50.0)
    delta = 0.05
    failures = []
    for trial in range(20):
        n = int(rng.integers(1, 5))
        sys = LogisticEnsemble.normalized(
            alpha=rng.uniform(-3, 3, n),
            c_out=rng.uniform(0.4, 2.5, n) * rng.choice([-1.0, 1.0], n),
            x0=rng.uniform(0.15, 0.85, n),
        )
        kstar = stabilizing_gain(sys, D=sched.D, delta=delta)
        gain_mag = abs(float(np.dot(sys.c_out, kstar)))
        icfg = IntegratorConfig(dt=min(1e-3, 0.2 / gain_mag))
        acfg = AdaptationConfig(gamma=1e-12, delta=delta, delta1=1e-3)
        st = AdaptiveState(
            t=0.0, x=sys.x0,
            x_hat=np.clip(sys.x0 + rng.uniform(0.05, 0.25, n), 0.01, 0.99),
            alpha_hat=sys.alpha, q_hat=sys.quad_coeff, k_gain=kstar,
        )
        e_prev = abs(float(np.dot(sys.c_out, st.x_hat - st.x)))
        reached = False
        for _ in range(4000):
            st = step(st, sys, sched, acfg, icfg, lam=0)
            e = abs(float(np.dot(sys.c_out, st.x_hat - st.x)))
            if e_prev > delta and e * e >= e_prev * e_prev:
                failures.append(trial)
                break
            if e <= delta:
                reached = True
                break
            e_prev = e
        if not reached and trial not in failures:
            failures.append(trial)
    _report(3, not failures, f"20 matched systems, e^2 strictly decreasing; failures={failures}")


def test_criterion_4_single_sigmoid_reproduction():
    adaptive = example1_adaptive()  # published settings, 900 s
    a_err = abs(adaptive.a_final - 2.0 / 3.0)
    c_err = abs(adaptive.c_final - 2.0)
    batch_a = example1_baseline("batch", (-3.0, -3.0))
    batch_b = example1_baseline("batch", (3.0, -3.0))
    threshold = 100.0 * adaptive.J_final
    ok_adaptive = a_err < 0.05 and c_err < 0.1
    ok_batch_a = batch_a.J_final > threshold
    ok_batch_b = batch_b.J_final > threshold
    detail = (
        f"adaptive |a-2/3|={a_err:.4f} (<0.05), |c-2|={c_err:.4f} (<0.1), "
        f"J_adaptive={adaptive.J_final:.3e}; batch J from (-3,-3)={batch_a.J_final:.3e} "
        f"(>{threshold:.2e}: {ok_batch_a}), from (3,-3)={batch_b.J_final:.3e} "
        f"(>{threshold:.2e}: {ok_batch_b}; the printed flow descends to the global "
        f"minimum from this start, see decisions ledger)"
    )
    _report(4, ok_adaptive and ok_batch_a and ok_batch_b, detail)


def test_criterion_5_desk_scale_shift(desk_study):
    s = desk_study.summary
    ok_frac_d = s["frac_d_decreased"] >= 0.9
    ok_frac_R = s["frac_R_decreased"] >= 0.9
    ok_median = s["median_d_final"] < 0.5 * s["median_d0"]
    detail = (
        f"20x2000 epochs: d decreased in {s['frac_d_decreased']:.0%} (>=90%: {ok_frac_d}), "
        f"R decreased in {s['frac_R_decreased']:.0%} (>=90%: {ok_frac_R}), "
        f"median d {s['median_d0']:.2f} -> {s['median_d_final']:.2f} "
        f"(halving: {ok_median}; published gain 1e-3 moves estimates O(0.1)/1000 epochs, "
        f"see decisions ledger)"
    )
    _report(5, ok_frac_d and ok_frac_R and ok_median, detail)


def test_criterion_6_error_bound(desk_study):
    delta = desk_study.config.acfg.delta
    threshold = delta + 10.0 * delta
    tails = np.array([
        float(np.max(r.epoch_emax_active[-10:]))
        for r in desk_study.records
        if r.status == "ok"
    ])
    flag_rate = float(np.mean(tails >= threshold))
    detail = (
        f"limsup |e| over final 10 epochs: median {np.median(tails):.3g}, "
        f"threshold {threshold:.2e}, flag rate {flag_rate:.0%} (<=10%; "
        f"the bound is asymptotic and desk scale stops far earlier, see ledger)"
    )
    _report(6, flag_rate <= 0.10, detail)


def _instrumented_invariant_run():
    """Ten-sigmoid-style run with strict componentwise reset reachability."""
    from logfit.harness import example2_system

    sys = example2_system()
    sched = ResetSchedule(T=2.0, dT2=1.0, D=10.0, l0=11.0)
    acfg = AdaptationConfig(gamma=0.01, delta=0.02, delta1=1e-3)
    icfg = IntegratorConfig(dt=1e-3)
    rng = np.random.default_rng(107)
    res = run_adaptive(
        sys, sched, acfg, icfg, 5, rng.uniform(0, 12, 10), None, np.zeros(10),
        adapt_quad=False, c_weighted_alpha=False, adapt_gain=True, record_stride=1,
    )
    return sys, sched, acfg, res


def test_criterion_7_dead_zone_and_reset_invariants():
    sys, sched, acfg, res = _instrumented_invariant_run()

    # freeze: estimates move only on active steps with |e| beyond the zone
    a = res.alpha_checkpoints
    k = res.k_checkpoints
    frozen = (np.abs(res.e_checkpoints[:-1]) <= acfg.delta) | (res.lam_checkpoints[:-1] == 1)
    moved = np.any(a[1:] != a[:-1], axis=1) | np.any(k[1:] != k[:-1], axis=1)
    freeze_violations = int(np.sum(frozen & moved))

    # exact epoch-boundary resets under strict reachability
    reset_ok = res.boundary_dev == 0.0

    # gate annihilation: gated RHS and updates ignore estimates, gain, error
    rng = np.random.default_rng(1007)
    x0 = sys.x0
    xh = np.clip(x0 + 0.4, 0.0, 1.5)
    gate_violations = 0
    base = None
    for _ in range(200):
        st = AdaptiveState(
            t=0.0, x=x0, x_hat=xh,
            alpha_hat=rng.normal(size=10), q_hat=rng.normal(size=10),
            k_gain=rng.normal(size=10),
        )
        e = float(rng.normal(scale=5.0))
        rhs = tracking_rhs(xh, e, st, sched, 1, x0)
        da, dq, dk = adaptation_rhs(st, e, acfg, sys.c_out, 1)
        if base is None:
            base = rhs
        if not np.array_equal(rhs, base) or da.any() or dq.any() or dk.any():
            gate_violations += 1

    ok = freeze_violations == 0 and reset_ok and gate_violations == 0
    _report(
        7,
        ok,
        f"freeze violations={freeze_violations}, boundary residual={res.boundary_dev:.1e}, "
        f"gate violations={gate_violations} (zero required)",
    )


def test_criterion_8_gradient_correctness():
    target = ScalarSigmoidTarget()
    grid = np.linspace(-3.0, 3.0, 5)
    h = 1e-6
    worst = 0.0
    for a in grid:
        for c in grid:
            # partials of g at a representative time
            t = 4.0
            f = float(expit(a * t - target.b_fixed))
            dg_da = c * t * f * (1.0 - f)
            dg_dc = f
            fd_da = float((target.g(t, a + h, c) - target.g(t, a - h, c)) / (2 * h))
            fd_dc = float((target.g(t, a, c + h) - target.g(t, a, c - h)) / (2 * h))
            # quadrature-cost gradient
            ga, gc = batch_gradient_rhs(a, c, target, rate=-1.0)  # returns +grad J
            fd_ga = (batch_cost(a + h, c, target) - batch_cost(a - h, c, target)) / (2 * h)
            fd_gc = (batch_cost(a, c + h, target) - batch_cost(a, c - h, target)) / (2 * h)
            for got, want in ((dg_da, fd_da), (dg_dc, fd_dc), (ga, fd_ga), (gc, fd_gc)):
                denom = max(abs(want), 1e-3)
                worst = max(worst, abs(got - want) / denom)
    _report(8, worst < 1e-5, f"25-point grid, worst relative gradient error {worst:.2e} (< 1e-5)")


def test_criterion_9_integrator_orders():
    ens = LogisticEnsemble.normalized([1.0], [1.0], [0.5])

    def err(method, dt):
        traj = integrate_autonomous(ens, 5.0, IntegratorConfig(dt=dt, method=method))
        return float(np.max(np.abs(traj.x[:, 0] - expit(traj.t))))

    euler_dts = [1e-2, 1e-3, 1e-4]
    euler_slope = float(np.polyfit(np.log(euler_dts), np.log([err("euler", d) for d in euler_dts]), 1)[0])
    # rk4 needs coarser steps: at dt <= 1e-3 its truncation error sits below
    # float64 roundoff and the measured slope flattens
    rk4_dts = [4e-1, 2e-1, 1e-1]
    rk4_slope = float(np.polyfit(np.log(rk4_dts), np.log([err("rk4", d) for d in rk4_dts]), 1)[0])
    ok = abs(euler_slope - 1.0) < 0.2 and abs(rk4_slope - 4.0) < 0.2
    _report(9, ok, f"euler slope {euler_slope:.3f} (1±0.2), rk4 slope {rk4_slope:.3f} (4±0.2)")


def test_criterion_10_progress_bound():
    worst = math.inf
    total_checkpoints = 0
    violations = 0
    for idx in range(5):
        pr = example1_progress_run(run_index=idx)
        n_cp = pr.trace.t.size
        total_checkpoints += n_cp
        for j in range(n_cp):
            lhs, rhs = estimation_progress_bound(pr.trace, pr.kstar, pr.acfg, pr.sys.c_out, at=j)
            slack = lhs - rhs
            worst = min(worst, slack)
            if slack < -(1e-9 + 1e-9 * max(abs(lhs), abs(rhs))):
                violations += 1
    _report(
        10,
        violations == 0,
        f"5 instrumented runs, {total_checkpoints} checkpoints, "
        f"violations={violations}, min slack={worst:.3e}",
    )
