"""Mirror-averaging engine on the probability simplex.

The engine keeps a dual state ``zeta`` (cumulative vertex losses), maps it to
the simplex through the gradient of the entropic potential

    W(z) = beta * log( mean_j exp(-z_j / beta) ),

and Cesaro-averages the resulting weights.  After feeding the loss vectors of
samples ``Z_1 .. Z_{n-1}`` the aggregate is ``(theta_0 + ... + theta_{n-1}) / n``,
so it never looks at ``Z_n``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DualState",
    "LossVector",
    "aggregate",
    "check_simplex",
    "fresh_state",
    "mirror_average",
    "mirror_map",
    "potential",
    "step",
    "uniform_weights",
    "weights_closed_form",
]

SIMPLEX_TOL = 1e-12


@dataclass(frozen=True)
class LossVector:
    """Per-vertex losses ``(Q(z, e_1), ..., Q(z, e_M))`` for one or many samples.

    ``values`` has shape ``(M,)`` or ``(n, M)``.  ``finite_flag`` is False when
    a loss model had to clamp a component (one bool per row for batches).
    """

    values: np.ndarray
    finite_flag: bool | np.ndarray = True

    @property
    def clamped(self) -> np.ndarray:
        return ~np.asarray(self.finite_flag, dtype=bool)


@dataclass(frozen=True)
class DualState:
    """Entire state of the engine.

    ``avg_accumulator`` holds the running *sum* of ``theta_0, ..., theta_i``;
    it is divided by ``step_count + 1`` on read.
    """

    zeta: np.ndarray
    theta: np.ndarray
    avg_accumulator: np.ndarray
    step_count: int
    beta: float

    @property
    def M(self) -> int:
        return self.zeta.shape[0]


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not (beta > 0.0 and math.isfinite(beta)):
        raise ValueError(f"beta must be a positive finite number, got {beta!r}")
    return beta


def check_simplex(weights, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Return ``weights`` as an array, raising if it is not a point of the simplex."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] < 2:
        raise ValueError("simplex weights need at least two components")
    if np.any(w < 0.0) or not np.all(np.isfinite(w)):
        raise ValueError("simplex weights must be finite and nonnegative")
    if abs(math.fsum(w) - 1.0) > tol:
        raise ValueError(f"simplex weights sum to {math.fsum(w)!r}, not 1")
    return w


def uniform_weights(M: int) -> np.ndarray:
    if int(M) != M or M < 2:
        raise ValueError(f"need M >= 2 candidates, got {M!r}")
    return np.full(int(M), 1.0 / int(M))


def potential(zeta, beta: float) -> float:
    """Entropic potential ``beta * log(mean_j exp(-zeta_j / beta))``.

    The exponent is shifted by ``min(zeta)`` so nothing overflows.
    """
    z = _as_vector(zeta, "zeta")
    beta = _check_beta(beta)
    zmin = z.min()
    s = np.exp(-(z - zmin) / beta).sum()
    return float(beta * (math.log(s) - math.log(z.shape[0])) - zmin)


def mirror_map(zeta, beta: float) -> np.ndarray:
    """Minus the gradient of :func:`potential`: a softmax of ``-zeta / beta``.

    Works row-wise on a 2-D array of dual states.
    """
    z = np.asarray(zeta, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("zeta must be finite")
    beta = _check_beta(beta)
    w = np.exp(-(z - z.min(axis=-1, keepdims=True)) / beta)
    return w / w.sum(axis=-1, keepdims=True)


def fresh_state(M: int, beta: float) -> DualState:
    theta0 = uniform_weights(M)
    return DualState(
        zeta=np.zeros(M),
        theta=theta0,
        avg_accumulator=theta0.copy(),
        step_count=0,
        beta=_check_beta(beta),
    )


def step(state: DualState, u) -> DualState:
    """Feed one loss vector and return the new state (the input is not modified)."""
    if isinstance(u, LossVector):
        u = u.values
    u = _as_vector(u, "loss vector")
    if u.shape != state.zeta.shape:
        raise ValueError(f"loss vector has {u.shape[0]} components, engine has {state.M}")
    zeta = state.zeta + u
    theta = mirror_map(zeta, state.beta)
    return DualState(
        zeta=zeta,
        theta=theta,
        avg_accumulator=state.avg_accumulator + theta,
        step_count=state.step_count + 1,
        beta=state.beta,
    )


def aggregate(state: DualState) -> np.ndarray:
    return state.avg_accumulator / (state.step_count + 1)


def mirror_average(losses, beta: float, *, return_path: bool = False):
    """Run the engine over a whole ``(n_steps, M)`` loss matrix at once.

    Produces exactly the same floating point results as repeated :func:`step`
    calls (cumulative sums and the running accumulator are both sequential).
    Returns the aggregate, plus the ``(n_steps + 1, M)`` array of iterates
    ``theta_0, ..., theta_{n_steps}`` when ``return_path`` is set.
    """
    U = np.asarray(losses, dtype=np.float64)
    if U.ndim != 2 or U.shape[1] < 2:
        raise ValueError("losses must be an (n_steps, M) array with M >= 2")
    if not np.all(np.isfinite(U)):
        raise ValueError("losses must be finite")
    beta = _check_beta(beta)
    M = U.shape[1]
    thetas = np.empty((U.shape[0] + 1, M))
    thetas[0] = uniform_weights(M)
    if U.shape[0]:
        thetas[1:] = mirror_map(np.cumsum(U, axis=0), beta)
    acc = np.cumsum(thetas, axis=0)[-1]
    agg = acc / thetas.shape[0]
    if return_path:
        return agg, thetas
    return agg


def _compensated_sum(terms: np.ndarray) -> np.ndarray:
    # Kahan summation over the last axis, vectorised over the leading ones.
    # Terms are nonnegative; once the running total overflows the compensation
    # becomes inf - inf, so any non-finite result means the sum is +inf.
    total = np.zeros(terms.shape[:-1])
    comp = np.zeros(terms.shape[:-1])
    with np.errstate(invalid="ignore"):
        for k in range(terms.shape[-1]):
            y = terms[..., k] - comp
            t = total + y
            comp = (t - total) - y
            total = t
    return np.where(np.isfinite(total), total, np.inf)


def weights_closed_form(cumulative_losses, beta: float) -> np.ndarray:
    """Exponential weights written directly from cumulative losses.

    Used as a test oracle, so it deliberately avoids the shifted softmax of
    :func:`mirror_map` and evaluates ``1 / sum_k exp((L_j - L_k) / beta)`` with
    compensated summation.  Accepts ``(M,)`` or ``(n, M)`` input.
    """
    L = np.asarray(cumulative_losses, dtype=np.float64)
    if not np.all(np.isfinite(L)):
        raise ValueError("cumulative losses must be finite")
    beta = _check_beta(beta)
    diff = (L[..., :, None] - L[..., None, :]) / beta
    with np.errstate(over="ignore"):
        return 1.0 / _compensated_sum(np.exp(diff))
