"""Static sigmoid sums, logistic ODE ensembles, and exact conversions between them.

A sigmoid sum is the static map  y(t) = sum_i c_i * f(a_i*t + b_i)  with
f the logistic function.  A logistic ensemble is a set of decoupled ODEs
dx_i/dt = alpha_i * x_i * (1 - beta_i * x_i) read out through a weighted sum
y = c_out . x.  Because the solution of each logistic equation is itself a
shifted/scaled sigmoid in t, the two representations are interchangeable;
the conversion routines here are exact, not fitted.

Conventions
-----------
- f(z) = 1 / (1 + exp(-z)), evaluated with overflow-safe branches.
- "Normalized" ensemble means beta_i = 1 for all i.  In that chart each state
  lives in the open funnel x_i in (0, 1) and x_i(t) = f(alpha_i*t + logit(x_i(0))).
- The signed quadratic coefficient of the right-hand side is
  q_i = -alpha_i * beta_i, i.e. dx_i/dt = alpha_i*x_i + q_i*x_i^2.  The
  simulation modules work in (alpha, q) coordinates; this module owns the
  factored (alpha, beta) form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(values, dtype=float)).copy()
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {arr}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SigmoidSum:
    """Finite sum of logistic sigmoids y(t) = sum_i c_i * f(a_i*t + b_i).

    a : slopes (1/time), b : offsets, c : output weights.  All three vectors
    share the same length n >= 1.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _as_vector(self.a, "a"))
        object.__setattr__(self, "b", _as_vector(self.b, "b"))
        object.__setattr__(self, "c", _as_vector(self.c, "c"))
        if not (self.a.size == self.b.size == self.c.size):
            raise ValueError(
                f"a, b, c must share one length, got {self.a.size}, {self.b.size}, {self.c.size}"
            )

    @property
    def n(self) -> int:
        return self.a.size


@dataclass(frozen=True)
class LogisticEnsemble:
    """n decoupled logistic ODEs dx_i/dt = alpha_i*x_i*(1 - beta_i*x_i), y = c_out . x.

    alpha : growth rates (1/time), beta : saturation coefficients (1/signal),
    c_out : output weights, x0 : initial state.  beta_i = 0 is a valid
    (exponential, non-saturating) ensemble for simulation purposes but is
    rejected by the sigmoid conversions.
    """

    alpha: np.ndarray
    beta: np.ndarray
    c_out: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "alpha", _as_vector(self.alpha, "alpha"))
        object.__setattr__(self, "beta", _as_vector(self.beta, "beta"))
        object.__setattr__(self, "c_out", _as_vector(self.c_out, "c_out"))
        object.__setattr__(self, "x0", _as_vector(self.x0, "x0"))
        sizes = {self.alpha.size, self.beta.size, self.c_out.size, self.x0.size}
        if len(sizes) != 1:
            raise ValueError("alpha, beta, c_out, x0 must share one length")

    @property
    def n(self) -> int:
        return self.alpha.size

    @property
    def quad_coeff(self) -> np.ndarray:
        """Signed quadratic coefficient q = -alpha*beta of the expanded RHS."""
        q = -self.alpha * self.beta
        q.setflags(write=False)
        return q

    @property
    def is_normalized(self) -> bool:
        return bool(np.all(self.beta == 1.0))

    @classmethod
    def normalized(cls, alpha, c_out, x0) -> "LogisticEnsemble":
        """Build a beta = 1 ensemble, enforcing the open funnel x0 in (0, 1)."""
        x0 = np.atleast_1d(np.asarray(x0, dtype=float))
        if np.any(x0 <= 0.0) or np.any(x0 >= 1.0):
            raise ValueError(f"normalized ensemble needs x0 strictly inside (0, 1), got {x0}")
        return cls(alpha=alpha, beta=np.ones_like(x0), c_out=c_out, x0=x0)


def eval_sigmoid_sum(model: SigmoidSum, t) -> float | np.ndarray:
    """Evaluate y(t) = sum_i c_i * f(a_i*t + b_i) at scalar or array t."""
    t = np.asarray(t, dtype=float)
    z = np.multiply.outer(t, model.a) + model.b
    y = expit(z) @ model.c
    return float(y) if y.ndim == 0 else y


def logistic_to_sigmoid(sys: LogisticEnsemble) -> SigmoidSum:
    """Convert an ensemble to the sigmoid sum its output traces exactly.

    Uses the closed-form solution of the logistic equation: with
    u_i = beta_i * x_i in (0, 1), the state is u_i(t) = f(alpha_i*t + b_i)
    where b_i = logit(u_i(0)), hence
    y(t) = sum_i (c_out_i / beta_i) * f(alpha_i*t + b_i).

    Rejects beta_i = 0 (no saturation: the trajectory is not a sigmoid) and
    beta_i * x0_i outside the open funnel (0, 1), where the closed form
    degenerates or leaves the sigmoid branch.
    """
    if np.any(sys.beta == 0.0):
        raise ValueError("beta has zero entries; a non-saturating equation has no sigmoid form")
    u0 = sys.beta * sys.x0
    if np.any(u0 <= 0.0) or np.any(u0 >= 1.0):
        raise ValueError(f"beta*x0 must lie strictly inside (0, 1), got {u0}")
    return SigmoidSum(a=sys.alpha, b=logit(u0), c=sys.c_out / sys.beta)


def sigmoid_to_logistic(model: SigmoidSum) -> LogisticEnsemble:
    """Convert a sigmoid sum to the normalized (beta = 1) ensemble generating it.

    Each term c_i * f(a_i*t + b_i) is realized by dx_i/dt = a_i*x_i*(1 - x_i)
    with x_i(0) = f(b_i) and output weight c_i.  Terms with c_i = 0 are
    rejected: they carry no output and the inverse map would not be defined.
    """
    if np.any(model.c == 0.0):
        raise ValueError("c has zero entries; drop degenerate terms before converting")
    x0 = expit(model.b)
    if np.any(x0 <= 0.0) or np.any(x0 >= 1.0):
        # |b| beyond ~745 underflows f(b) to exactly 0.0 or 1.0 in float64
        raise ValueError(f"f(b) leaves the representable open interval (0, 1) for b={model.b}")
    return LogisticEnsemble(alpha=model.a, beta=np.ones_like(x0), c_out=model.c, x0=x0)


def scale_coordinates(sys: LogisticEnsemble, mode: str = "beta") -> LogisticEnsemble:
    """Rescale ensemble states without changing the output trajectory.

    mode="beta" applies u_i = beta_i * x_i, giving beta' = 1, c' = c/beta,
    x0' = beta*x0 (requires beta_i != 0).
    mode="c" applies u_i = c_i * x_i, giving c' = 1, beta' = beta/c,
    x0' = c*x0 (requires c_i != 0): the amplitude information moves from the
    output weights into the saturation coefficients.

    Both are linear changes of variables of each decoupled equation, so
    y(t) = c_out . x(t) is pointwise identical before and after.  (Note the
    direction of the output normalization: u = c*x is the one that leaves
    y = sum(u_i) equal to the original weighted readout; the inverse map
    u = x/c would rescale the output signal itself.)
    """
    if mode == "beta":
        if np.any(sys.beta == 0.0):
            raise ValueError("beta normalization needs beta_i != 0 for every i")
        return LogisticEnsemble(
            alpha=sys.alpha,
            beta=np.ones(sys.n),
            c_out=sys.c_out / sys.beta,
            x0=sys.beta * sys.x0,
        )
    if mode == "c":
        if np.any(sys.c_out == 0.0):
            raise ValueError("output normalization needs c_out_i != 0 for every i")
        return LogisticEnsemble(
            alpha=sys.alpha,
            beta=sys.beta / sys.c_out,
            c_out=np.ones(sys.n),
            x0=sys.x0 * sys.c_out,
        )
    raise ValueError(f"mode must be 'beta' or 'c', got {mode!r}")
