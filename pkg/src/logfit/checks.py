"""Quick self-check battery behind `logfit check`.

Each check is a few-second version of an invariant the test suite verifies
at full size: conversion exactness, funnel monotonicity, dead-zone freezing,
reset-gate annihilation, exact epoch resets, and matched-system error
descent under a stabilizing constant gain.
"""

from __future__ import annotations

import numpy as np

from .dynamics import (
    AdaptationConfig,
    AdaptiveState,
    ResetSchedule,
    adaptation_rhs,
    stabilizing_gain,
    tracking_rhs,
)
from .harness import epoch_mse
from .integrator import IntegratorConfig, integrate_autonomous, step
from .kernel import run_epochs_fast
from .models import (
    LogisticEnsemble,
    eval_sigmoid_sum,
    logistic_to_sigmoid,
    sigmoid_to_logistic,
)


def _random_normalized(rng: np.random.Generator, n: int) -> LogisticEnsemble:
    return LogisticEnsemble.normalized(
        alpha=rng.uniform(-5, 5, n),
        c_out=rng.uniform(-3, 3, n) + np.where(rng.random(n) < 0.5, -0.5, 0.5),
        x0=rng.uniform(0.05, 0.95, n),
    )


def check_conversion_fidelity() -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    icfg = IntegratorConfig(dt=1e-3, method="rk4")
    worst = 0.0
    for _ in range(5):
        ens = _random_normalized(rng, int(rng.integers(1, 5)))
        traj = integrate_autonomous(ens, 5.0, icfg)
        model = logistic_to_sigmoid(ens)
        y_ref = eval_sigmoid_sum(model, traj.t)
        worst = max(worst, float(np.max(np.abs(traj.y - y_ref))))
    return worst < 1e-6, f"max |ode - closed form| = {worst:.2e}"


def check_round_trip() -> tuple[bool, str]:
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(10):
        n = int(rng.integers(1, 6))
        from .models import SigmoidSum

        model = SigmoidSum(a=rng.uniform(-4, 4, n), b=rng.uniform(-3, 3, n),
                           c=rng.uniform(0.5, 3, n) * rng.choice([-1.0, 1.0], n))
        back = logistic_to_sigmoid(sigmoid_to_logistic(model))
        worst = max(
            worst,
            float(np.max(np.abs(back.a - model.a))),
            float(np.max(np.abs(back.b - model.b))),
            float(np.max(np.abs(back.c - model.c))),
        )
    return worst < 1e-12, f"max round-trip drift = {worst:.2e}"


def check_funnel_monotone() -> tuple[bool, str]:
    rng = np.random.default_rng(13)
    icfg = IntegratorConfig(dt=1e-3, method="rk4")
    for _ in range(10):
        alpha = float(rng.uniform(0.5, 4) * rng.choice([-1.0, 1.0]))
        ens = LogisticEnsemble.normalized(alpha=[alpha], c_out=[1.0],
                                          x0=[float(rng.uniform(0.05, 0.95))])
        traj = integrate_autonomous(ens, 20.0 / abs(alpha), icfg)
        x = traj.x[:, 0]
        diffs = np.diff(x)
        mono = np.all(diffs >= -1e-12) if alpha > 0 else np.all(diffs <= 1e-12)
        inside = np.all(x > -1e-12) and np.all(x < 1 + 1e-12)
        limit_ok = abs(x[-1] - (1.0 if alpha > 0 else 0.0)) < 1e-3
        if not (mono and inside and limit_ok):
            return False, f"alpha={alpha:.3g} broke the funnel"
    return True, "10 instances monotone, contained, correct limits"


def check_dead_zone_freeze() -> tuple[bool, str]:
    ens = LogisticEnsemble.normalized(alpha=[1.0, -2.0], c_out=[1.0, 2.0], x0=[0.3, 0.6])
    sched = ResetSchedule(T=1.0, dT2=0.5, D=10.0, l0=20.0)
    acfg = AdaptationConfig(gamma=0.5, delta=100.0, delta1=1.0)  # everything inside the zone
    res = run_epochs_fast(
        ens, sched, acfg, IntegratorConfig(dt=1e-3), 3,
        np.array([4.0, -1.0]), np.array([0.5, 0.5]), np.array([0.1, 0.2]),
        adapt_quad=True,
    )
    frozen = (
        np.all(res.state.alpha_hat == np.array([4.0, -1.0]))
        and np.all(res.state.q_hat == np.array([0.5, 0.5]))
        and np.all(res.state.k_gain == np.array([0.1, 0.2]))
    )
    return frozen, "estimates bit-identical across 3 epochs"


def check_gate_annihilation() -> tuple[bool, str]:
    rng = np.random.default_rng(14)
    sched = ResetSchedule(T=1.0, dT2=0.5, D=5.0, l0=10.0)
    acfg = AdaptationConfig(gamma=1.0, delta=0.0, delta1=1.0)
    x0 = rng.uniform(0.1, 0.9, 3)
    base = None
    for _ in range(20):
        state = AdaptiveState(
            t=0.0, x=x0.copy(), x_hat=x0 + 0.3,
            alpha_hat=rng.normal(size=3), q_hat=rng.normal(size=3),
            k_gain=rng.normal(size=3),
        )
        e = float(rng.normal())
        rhs = tracking_rhs(state.x_hat, e, state, sched, 1, x0)
        da, dq, dk = adaptation_rhs(state, e, acfg, np.ones(3), 1)
        if base is None:
            base = rhs
        if not (np.array_equal(rhs, base) and not da.any() and not dq.any() and not dk.any()):
            return False, "gated output depended on estimates"
    return True, "gated RHS independent of estimates over 20 draws"


def check_reset_exactness() -> tuple[bool, str]:
    ens = LogisticEnsemble.normalized(alpha=[1.5, -1.0], c_out=[1.0, -2.0], x0=[0.2, 0.7])
    sched = ResetSchedule(T=1.0, dT2=0.5, D=8.0, l0=16.0)
    acfg = AdaptationConfig(gamma=0.1, delta=0.0, delta1=1.0)
    res = run_epochs_fast(
        ens, sched, acfg, IntegratorConfig(dt=1e-3), 5,
        np.array([3.0, 2.0]), None, np.zeros(2), adapt_quad=True,
    )
    return res.boundary_dev == 0.0, f"max boundary deviation = {res.boundary_dev:.2e}"


def check_matched_descent() -> tuple[bool, str]:
    rng = np.random.default_rng(15)
    sched = ResetSchedule(T=10.0, dT2=1.0, D=5.0, l0=50.0)
    delta = 0.05
    for _ in range(3):
        n = int(rng.integers(1, 4))
        ens = _random_normalized(rng, n)
        kstar = stabilizing_gain(ens, D=sched.D, delta=delta)
        # keep the stiff feedback channel inside the Euler stability region
        gain_mag = abs(float(np.dot(ens.c_out, kstar)))
        icfg = IntegratorConfig(dt=min(1e-3, 0.2 / gain_mag))
        acfg = AdaptationConfig(gamma=1e-12, delta=delta, delta1=1.0)
        state = AdaptiveState(
            t=0.0, x=ens.x0, x_hat=np.clip(ens.x0 + rng.uniform(0.05, 0.3, n), 0.01, 0.99),
            alpha_hat=ens.alpha, q_hat=ens.quad_coeff, k_gain=kstar,
        )
        e_prev = abs(
            float(np.dot(ens.c_out, state.x_hat)) - float(np.dot(ens.c_out, state.x))
        )
        for _ in range(5000):
            state = step(state, ens, sched, acfg, icfg, lam=0)
            e = abs(float(np.dot(ens.c_out, state.x_hat)) - float(np.dot(ens.c_out, state.x)))
            if e_prev > delta and not e < e_prev:
                return False, f"|e| failed to shrink at |e|={e_prev:.3g}"
            if e <= delta:
                break
            e_prev = e
        else:
            return False, "error never reached the dead zone"
    return True, "matched error strictly decreased down to the dead zone"


def check_epoch_mse() -> tuple[bool, str]:
    R = epoch_mse(np.full(3000, 2.5), 1e-3, 3.0)
    return abs(R - 6.25) < 1e-12, f"constant-error period gives {R}"


def run_checks():
    checks = [
        ("conversion fidelity", check_conversion_fidelity),
        ("sigmoid/logistic round trip", check_round_trip),
        ("funnel monotonicity and limits", check_funnel_monotone),
        ("dead-zone freeze", check_dead_zone_freeze),
        ("reset-gate annihilation", check_gate_annihilation),
        ("exact epoch resets", check_reset_exactness),
        ("matched-system descent", check_matched_descent),
        ("period mean-square normalization", check_epoch_mse),
    ]
    results = []
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, ok, detail))
    return results
