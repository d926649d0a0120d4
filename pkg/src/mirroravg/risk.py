"""Risk evaluation: exact risks, Monte Carlo estimates, the vertex oracle and ERM."""

from __future__ import annotations

import numpy as np

from .simplex import LossVector

__all__ = [
    "RiskUnavailable",
    "erm_selector",
    "exact_mixture_risk",
    "excess_risk",
    "min_quadratic_on_simplex",
    "monte_carlo_risk",
    "oracle_value",
    "project_to_simplex",
]


class RiskUnavailable(LookupError):
    """The scenario has no closed-form risk; fall back to Monte Carlo."""


def exact_mixture_risk(scenario, theta) -> float:
    try:
        return scenario.exact_risk(theta)
    except NotImplementedError:
        raise RiskUnavailable(f"{scenario.kind} has no closed-form risk") from None


def monte_carlo_risk(theta, loss_model, data_source, N: int, seed: int) -> tuple[float, float]:
    """Sample mean and standard error of ``Q(Z, theta)`` over ``N`` fresh draws.

    ``data_source(N, rng)`` returns a batch of samples.
    """
    if N < 2:
        raise ValueError("Monte Carlo risk needs N >= 2")
    rng = np.random.default_rng(seed)
    q = np.asarray(loss_model.mixture_loss(data_source(N, rng), theta), dtype=np.float64)
    # Shifted moments: exact for a constant stream and better conditioned otherwise.
    d = q - q[0]
    return float(q[0] + d.mean()), float(d.std(ddof=1) / np.sqrt(N))


def erm_selector(samples, loss_model=None) -> int:
    """Index of the vertex with the smallest empirical risk (lowest index on ties).

    ``samples`` may be raw samples (with a ``loss_model``) or an ``(n, M)``
    matrix of vertex losses.
    """
    if loss_model is None:
        U = samples.values if isinstance(samples, LossVector) else np.asarray(samples, dtype=np.float64)
    else:
        U = loss_model.vertex_losses(samples).values
    U = np.atleast_2d(U)
    if U.shape[0] < 1:
        raise ValueError("ERM needs at least one sample")
    return int(np.argmin(U.sum(axis=0)))


def oracle_value(scenario_or_risks) -> tuple[int, float]:
    """``(j*, A(e_j*))`` for the best vertex; ties go to the lowest index."""
    if hasattr(scenario_or_risks, "exact_vertex_risks"):
        try:
            risks = scenario_or_risks.exact_vertex_risks()
        except NotImplementedError:
            raise RiskUnavailable("exact vertex risks are unavailable") from None
    else:
        risks = np.asarray(scenario_or_risks, dtype=np.float64)
    j = int(np.argmin(risks))
    return j, float(risks[j])


def excess_risk(scenario, theta) -> float:
    """``A(theta) - min_j A(e_j)`` with exact risks."""
    return exact_mixture_risk(scenario, theta) - oracle_value(scenario)[1]


def project_to_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex (sort-based)."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.shape[0] + 1)
    rho = k[u - css / k > 0][-1]
    return np.maximum(v - css[rho - 1] / rho, 0.0)


def min_quadratic_on_simplex(P, q, *, tol: float = 1e-14, max_iter: int = 100_000) -> np.ndarray:
    """Minimiser of ``theta P theta - 2 q theta`` over the simplex (accelerated projected gradient)."""
    P = np.asarray(P, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    lip = 2.0 * max(float(np.linalg.eigvalsh(P)[-1]), 1e-300)
    x = np.full(q.shape[0], 1.0 / q.shape[0])
    y = x.copy()
    t = 1.0
    for _ in range(max_iter):
        x_new = project_to_simplex(y - (2.0 * (P @ y) - 2.0 * q) / lip)
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x_new + (t - 1.0) / t_new * (x_new - x)
        if np.abs(x_new - x).max() < tol:
            return x_new
        x, t = x_new, t_new
    return x
