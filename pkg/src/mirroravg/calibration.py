"""Temperature calibration and exponential-concavity checks.

``beta_for_scenario`` returns the smallest temperature for which the fast
``beta * log(M) / n`` oracle bound is known to hold in each setting.  The
concavity checkers verify the underlying sufficient conditions numerically:

* ``check_exp_concavity`` tests that ``beta * hess g - grad g grad g^T`` is
  positive semidefinite over sampled simplex points, which makes
  ``exp(-g / beta)`` concave.
* ``check_concavity`` tests a plain Hessian upper bound, used for the
  Bernoulli and Poisson ``Psi`` functions.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .losses import PhiLoss

__all__ = [
    "SCENARIO_KINDS",
    "BetaPolicy",
    "ConcavityReport",
    "beta_for_scenario",
    "beta_phi",
    "catalog_exp_concavity",
    "check_psi_concavity",
    "bounded_moment_constants",
    "check_concavity",
    "check_exp_concavity",
    "moment_beta",
    "psi_bernoulli",
    "psi_poisson",
    "quadratic_game_beta",
    "remainder_R_beta",
    "simplex_points",
]

SCENARIO_KINDS = (
    "quadratic-game",
    "regression-bounded",
    "regression-heavy-tail",
    "regression-exp-moment",
    "regression-gaussian",
    "classification-phi",
    "density-kl",
    "density-l2",
    "parametric-gaussian",
    "parametric-bernoulli",
    "parametric-poisson",
)

# Temperatures stated for the classification catalog.  For the logit and the
# two quadratic losses they are smaller than what the Hessian condition gives
# on [-1, 1]; both values are carried by the policy.
PAPER_PHI_BETA = {
    "exp": math.e,
    "logit": math.e * math.log(2.0),
    "squared": 2.0,
    "soft-margin": 2.0,
}


@dataclass(frozen=True)
class BetaPolicy:
    scenario_kind: str
    beta_min: float
    constants: dict = field(default_factory=dict)
    provenance: str = ""
    alternatives: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.beta_min > 0 and math.isfinite(self.beta_min)):
            raise ValueError(f"beta_min must be positive and finite, got {self.beta_min}")

    def to_dict(self) -> dict:
        out = {
            "scenario": self.scenario_kind,
            "beta_min": self.beta_min,
            "constants": dict(self.constants),
            "provenance": self.provenance,
        }
        if self.alternatives:
            out["alternatives"] = dict(self.alternatives)
        return out


@dataclass(frozen=True)
class ConcavityReport:
    min_eigenvalue_observed: float
    sample_points: int
    tolerance: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "min_eigenvalue_observed": self.min_eigenvalue_observed,
            "sample_points": self.sample_points,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


# --------------------------------------------------------------------------
# closed-form thresholds


def beta_phi(loss: PhiLoss, points: int = 10001) -> float:
    """Grid supremum of ``phi'(x)^2 / phi''(x)`` over ``[-1, 1]``."""
    x = np.linspace(-1.0, 1.0, points)
    d1 = np.asarray(loss.phi_d1(x), dtype=np.float64)
    d2 = np.asarray(loss.phi_d2(x), dtype=np.float64)
    num = d1**2
    if np.any((d2 <= 0.0) & (num > 0.0)):
        raise ValueError(f"phi loss {loss.name!r} has phi'' = 0 where phi' != 0: no finite beta")
    ratio = np.divide(num, d2, out=np.zeros_like(num), where=d2 > 0.0)
    return float(ratio.max())


def bounded_moment_constants(L: float) -> tuple[float, float, float]:
    """``(b, B, beta_min)`` for squared-loss regression with ``|f_j| <= L``.

    ``B = (4L + 2)^-2`` and ``b`` is the midpoint of ``(L B, 1/4)``.
    """
    if not L > 0:
        raise ValueError("L must be positive")
    B = (4.0 * L + 2.0) ** -2
    b = (L * B + 0.25) / 2.0
    # b / B simplifies to L/2 + (4L + 2)^2 / 8, which rounds far less.
    ratio = L / 2.0 + (4.0 * L + 2.0) ** 2 / 8.0
    return b, B, ratio**2


def remainder_R_beta(y, L: float, b: float, B: float, beta: float) -> np.ndarray:
    """Truncation remainder of the bounded-moment regression bound.

    ``4L|y|`` when ``|y| >= B beta``, ``4 L^2 y^2 / (B beta)`` when
    ``b sqrt(beta) < |y| < B beta`` and zero otherwise.
    """
    y = np.abs(np.asarray(y, dtype=np.float64))
    hi = B * beta
    lo = b * math.sqrt(beta)
    out = np.where(y >= hi, 4.0 * L * y, 0.0)
    mid = (y > lo) & (y < hi)
    return np.where(mid, 4.0 * L**2 * y**2 / (B * beta), out)


def moment_beta(s: float, C1: float, n: int, M: int) -> float:
    """``C1 * (n / log M)^(2 / (2 + s))`` for responses with a finite s-th moment."""
    if s < 2 or C1 <= 0 or n < 1 or M < 2:
        raise ValueError("moment_beta needs s >= 2, C1 > 0, n >= 1, M >= 2")
    return C1 * (n / math.log(M)) ** (2.0 / (2.0 + s))


def quadratic_game_beta(sigma: float, mean_norm: float) -> float:
    """Sufficient temperature for ``Q(z, theta) = theta.theta/2 - z.theta`` with
    Gaussian ``z ~ N(mu, sigma^2 I)``.

    Here ``E exp(-Q_1 / beta)`` is available in closed form and is concave in
    ``theta`` once ``beta - sigma^2 >= (1 + |mu| + 1/sqrt 2)^2`` and
    ``beta >= 2 sigma^2``.
    """
    if not sigma > 0 or mean_norm < 0:
        raise ValueError("need sigma > 0 and a nonnegative mean norm")
    c = 1.0 + mean_norm + 1.0 / math.sqrt(2.0)
    return max(2.0 * sigma**2, sigma**2 + c**2)


def _need(constants: dict, kind: str, *names: str, nonneg: tuple = ()) -> list[float]:
    out = []
    for name in names:
        if name not in constants or constants[name] is None:
            raise ValueError(f"{kind}: constant {name!r} is required")
        value = float(constants[name])
        if name in nonneg and value == 0:
            out.append(value)
            continue
        if not value > 0:
            raise ValueError(f"{kind}: constant {name!r} must be > 0, got {value}")
        out.append(value)
    return out


def beta_for_scenario(kind: str, constants: dict | None = None, *, paper_beta: bool = False) -> BetaPolicy:
    """Temperature threshold for a setting, with the constants it was built from.

    ``constants`` by kind:

    ====================== ===========================================
    quadratic-game         ``sigma``, ``mean_norm``
    regression-bounded     ``L``
    regression-heavy-tail  ``s``, ``n``, ``M``, optional ``C1`` (1)
    regression-exp-moment  ``sigma2``, ``L_tilde``, ``L``, ``b0`` (may be inf)
    regression-gaussian    ``sigma2``, ``L_tilde``
    classification-phi     ``phi`` (catalog name) or a ``PhiLoss`` under ``loss``
    density-kl             none
    density-l2             ``L``
    parametric-gaussian    ``sigma``, ``L``
    parametric-bernoulli   none
    parametric-poisson     ``ell``, ``L`` with ``ell < L``
    ====================== ===========================================
    """
    c = dict(constants or {})
    if kind == "quadratic-game":
        sigma = _need(c, kind, "sigma")[0]
        mean_norm = float(c.get("mean_norm", 0.0))
        return BetaPolicy(kind, quadratic_game_beta(sigma, mean_norm),
                          {"sigma": sigma, "mean_norm": mean_norm},
                          "closed-form Gaussian moment; sufficient concavity bound")
    if kind == "regression-bounded":
        (L,) = _need(c, kind, "L")
        b, B, beta = bounded_moment_constants(L)
        if not (L * B < b < 0.25):
            raise ValueError(f"{kind}: violated L*B < b < 1/4")
        return BetaPolicy(kind, beta, {"L": L, "b": b, "B": B}, "beta >= (b/B)^2, B = (4L+2)^-2")
    if kind == "regression-heavy-tail":
        s, n, M = _need(c, kind, "s", "n", "M")
        C1 = float(c.get("C1", 1.0))
        if s < 2:
            raise ValueError(f"{kind}: violated s >= 2")
        beta = moment_beta(s, C1, int(n), int(M))
        out = {"s": s, "C1": C1, "n": int(n), "M": int(M)}
        if "L" in c:
            b, B, _ = bounded_moment_constants(float(c["L"]))
            out.update(L=float(c["L"]), b=b, B=B)
        return BetaPolicy(kind, beta, out, "beta = C1 (n / log M)^(2/(2+s))")
    if kind == "regression-exp-moment":
        sigma2, L_tilde, L = _need(c, kind, "sigma2", "L_tilde", "L", nonneg=("sigma2",))
        b0 = float(c.get("b0", math.inf))
        if not b0 > 0:
            raise ValueError(f"{kind}: constant 'b0' must be > 0")
        beta = max(2 * sigma2 + 2 * L_tilde**2, 4 * L / b0)
        return BetaPolicy(kind, beta, {"sigma2": sigma2, "L_tilde": L_tilde, "L": L, "b0": b0},
                          "beta >= max(2 sigma^2 + 2 L_tilde^2, 4L / b0)")
    if kind == "regression-gaussian":
        sigma2, L_tilde = _need(c, kind, "sigma2", "L_tilde", nonneg=("sigma2",))
        return BetaPolicy(kind, 2 * sigma2 + 2 * L_tilde**2, {"sigma2": sigma2, "L_tilde": L_tilde},
                          "beta >= 2 sigma^2 + 2 L_tilde^2")
    if kind == "classification-phi":
        from .losses import phi_loss

        loss = c.get("loss") or phi_loss(str(c.get("phi", "")))
        computed = beta_phi(loss)
        alternatives = {"computed_sufficient": computed}
        if loss.name in PAPER_PHI_BETA:
            alternatives["paper_claimed"] = PAPER_PHI_BETA[loss.name]
        use_paper = paper_beta and "paper_claimed" in alternatives
        if use_paper:
            return BetaPolicy(kind, alternatives["paper_claimed"], {"phi": loss.name},
                              "stated catalog value", alternatives)
        return BetaPolicy(kind, computed, {"phi": loss.name},
                          "sup_{|x|<=1} phi'(x)^2 / phi''(x)", alternatives)
    if kind == "density-kl":
        return BetaPolicy(kind, 1.0, {}, "beta = 1 (progressive mixture)")
    if kind == "density-l2":
        (L,) = _need(c, kind, "L")
        return BetaPolicy(kind, 12.0 * L, {"L": L}, "beta >= 12 L")
    if kind == "parametric-gaussian":
        sigma, L = _need(c, kind, "sigma", "L")
        return BetaPolicy(kind, 2 * sigma**2 + 8 * L**2, {"sigma": sigma, "L": L},
                          "beta >= 2 sigma^2 + 8 L^2")
    if kind == "parametric-bernoulli":
        return BetaPolicy(kind, 1.0, {}, "beta >= 1")
    if kind == "parametric-poisson":
        ell, L = _need(c, kind, "ell", "L")
        if not ell < L:
            raise ValueError(f"{kind}: violated ell < L")
        beta = 1.0 + L * (1.0 + L / ell) * (L / ell) ** (1.0 / (2.0 * L + 1.0))
        return BetaPolicy(kind, beta, {"ell": ell, "L": L},
                          "beta >= 1 + L (1 + L/ell) (L/ell)^(1/(2L+1))")
    raise ValueError(f"unknown scenario kind {kind!r}; choose from {SCENARIO_KINDS}")


# --------------------------------------------------------------------------
# Psi functions for parametric KL aggregation


def _dot_domain(theta, params, lo: float, hi: float | None, what: str) -> float:
    s = float(np.dot(theta, params))
    if not (s > lo and (hi is None or s < hi)):
        raise ValueError(f"{what} = {s} lies outside the open parameter domain")
    return s


def psi_bernoulli(theta, theta_prime, params, a: float, beta: float) -> float:
    params = np.asarray(params, dtype=np.float64)
    if np.any((params <= 0) | (params >= 1)) or not 0 < a < 1:
        raise ValueError("Bernoulli parameters must lie in (0, 1)")
    s = _dot_domain(theta, params, 0.0, 1.0, "H^T theta")
    sp = _dot_domain(theta_prime, params, 0.0, 1.0, "H^T theta'")
    return (s / sp) ** (1 / beta) * a + ((1 - s) / (1 - sp)) ** (1 / beta) * (1 - a)


def psi_poisson(theta, theta_prime, params, a: float, beta: float) -> float:
    params = np.asarray(params, dtype=np.float64)
    if np.any(params <= 0) or not a > 0:
        raise ValueError("Poisson parameters must be positive")
    s = _dot_domain(theta, params, 0.0, None, "H^T theta")
    sp = _dot_domain(theta_prime, params, 0.0, None, "H^T theta'")
    return math.exp(a * (s / sp) ** (1 / beta) - a - (s - sp) / beta)


# --------------------------------------------------------------------------
# numerical checkers


def simplex_points(M: int, n_points: int, rng: np.random.Generator) -> np.ndarray:
    """Flat-Dirichlet interior points, plus vertices and edge midpoints when M <= 4."""
    pts = [rng.dirichlet(np.ones(M), size=n_points)]
    if M <= 4:
        eye = np.eye(M)
        pts.append(eye)
        pts.append(np.array([(eye[i] + eye[j]) / 2 for i, j in itertools.combinations(range(M), 2)]))
    return np.vstack(pts)


def _fd_grad(g: Callable, theta: np.ndarray, h: float) -> np.ndarray:
    out = np.empty_like(theta)
    for i in range(theta.shape[0]):
        e = np.zeros_like(theta)
        e[i] = h
        out[i] = (g(theta + e) - g(theta - e)) / (2 * h)
    return out


def _fd_hess(g: Callable, theta: np.ndarray, h: float) -> np.ndarray:
    M = theta.shape[0]
    H = np.empty((M, M))
    g0 = g(theta)
    for i in range(M):
        ei = np.zeros(M)
        ei[i] = h
        H[i, i] = (g(theta + ei) - 2 * g0 + g(theta - ei)) / h**2
        for j in range(i + 1, M):
            ej = np.zeros(M)
            ej[j] = h
            H[i, j] = H[j, i] = (
                g(theta + ei + ej) - g(theta + ei - ej) - g(theta - ei + ej) + g(theta - ei - ej)
            ) / (4 * h**2)
    return H


def _richardson(fd: Callable, g: Callable, theta: np.ndarray, rel_step: float) -> np.ndarray:
    h = rel_step * max(1.0, float(np.abs(theta).max()))
    return (4.0 * fd(g, theta, h / 2) - fd(g, theta, h)) / 3.0


def _derivatives(g, theta, grad, hess, rel_step):
    gr = np.asarray(grad(theta), dtype=np.float64) if grad else _richardson(_fd_grad, g, theta, rel_step)
    he = np.asarray(hess(theta), dtype=np.float64) if hess else _richardson(_fd_hess, g, theta, rel_step)
    return gr, he


def check_exp_concavity(
    g: Callable,
    beta: float,
    M: int,
    rng: np.random.Generator,
    *,
    grad: Callable | None = None,
    hess: Callable | None = None,
    n_points: int = 500,
    tolerance: float | None = None,
    points: np.ndarray | None = None,
    rel_step: float = 1e-5,
) -> ConcavityReport:
    """Check that ``beta * hess g - grad g grad g^T`` is PSD on sampled simplex points.

    Without analytic ``grad``/``hess`` the derivatives come from central
    differences with a Richardson correction.  The default tolerance is
    ``1e-8`` times the largest matrix scale seen.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    pts = simplex_points(M, n_points, rng) if points is None else np.asarray(points)
    worst = math.inf
    scale = 1.0
    for theta in pts:
        if not math.isfinite(float(g(theta))):
            raise ValueError(f"g is not finite at theta = {theta}")
        gr, he = _derivatives(g, theta, grad, hess, rel_step)
        A = beta * he
        B = np.outer(gr, gr)
        mat = A - B
        mat = 0.5 * (mat + mat.T)
        worst = min(worst, float(np.linalg.eigvalsh(mat)[0]))
        scale = max(scale, float(np.abs(A).max()), float(np.abs(B).max()))
    tol = 1e-8 * scale if tolerance is None else float(tolerance)
    return ConcavityReport(worst, len(pts), tol, worst >= -tol)


def check_concavity(
    f: Callable,
    M: int,
    rng: np.random.Generator,
    *,
    hess: Callable | None = None,
    n_points: int = 500,
    tolerance: float = 1e-8,
    points: np.ndarray | None = None,
    rel_step: float = 1e-5,
) -> ConcavityReport:
    """Plain concavity: the Hessian's largest eigenvalue stays below ``tolerance``.

    The report's ``min_eigenvalue_observed`` is the smallest value of
    ``-lambda_max(hess f)``, so the pass rule matches :func:`check_exp_concavity`.
    """
    pts = simplex_points(M, n_points, rng) if points is None else np.asarray(points)
    worst = math.inf
    for theta in pts:
        he = np.asarray(hess(theta)) if hess else _richardson(_fd_hess, f, theta, rel_step)
        he = 0.5 * (he + he.T)
        worst = min(worst, -float(np.linalg.eigvalsh(he)[-1]))
    return ConcavityReport(worst, len(pts), tolerance, worst >= -tolerance)


# --------------------------------------------------------------------------
# catalog checks used by the CLI


def _psi_second_derivative(family: str, s: float, sp: float, a: float, beta: float) -> float:
    # Psi depends on theta only through s = H^T theta; this is d^2 Psi / ds^2.
    k = 1.0 / beta
    if family == "bernoulli":
        return k * (k - 1) * (a * s ** (k - 2) / sp**k + (1 - a) * (1 - s) ** (k - 2) / (1 - sp) ** k)
    r = (s / sp) ** k
    h1 = a * k * r / s - k
    h2 = a * k * (k - 1) * r / s**2
    psi = math.exp(a * r - a - (s - sp) * k)
    return psi * (h2 + h1**2)


def check_psi_concavity(family: str, beta: float, params, rng: np.random.Generator, *,
                        n_points: int = 500, tolerance: float = 1e-8,
                        a_range: tuple[float, float] | None = None) -> ConcavityReport:
    """Concavity of ``theta -> Psi(theta, theta')`` over sampled ``(theta, theta', a)``.

    The Hessian is ``psi''(H^T theta) H H^T``, so its top eigenvalue is
    ``max(psi'', 0) |H|^2``.
    """
    if family not in ("bernoulli", "poisson"):
        raise ValueError("Psi concavity is defined for the bernoulli and poisson families")
    H = np.asarray(params, dtype=np.float64)
    lo, hi = a_range if a_range is not None else (float(H.min()), float(H.max()))
    M = H.shape[0]
    thetas = simplex_points(M, n_points, rng)[:n_points]
    primes = rng.dirichlet(np.ones(M), size=n_points)
    avals = rng.uniform(lo, hi, size=n_points)
    worst = math.inf
    h2 = float(H @ H)
    for theta, theta_p, a in zip(thetas, primes, avals):
        d2 = _psi_second_derivative(family, float(H @ theta), float(H @ theta_p), float(a), beta)
        worst = min(worst, -max(d2, 0.0) * h2)
    return ConcavityReport(worst, n_points, tolerance, worst >= -tolerance)


def catalog_exp_concavity(loss: str, beta: float, rng: np.random.Generator, *, M: int = 4,
                          n_points: int = 500) -> ConcavityReport:
    """Run :func:`check_exp_concavity` on ``theta -> Q(z, theta) - Q(z, theta')`` for a
    catalog loss at a random sample ``z``.

    ``loss`` is ``"kl"`` or a phi-loss name; derivatives are analytic.
    """
    theta_p = rng.dirichlet(np.ones(M))
    if loss == "kl":
        H = rng.uniform(0.05, 2.0, M)
        ref = math.log(float(H @ theta_p))

        def g(t):
            return -math.log(float(H @ t)) + ref

        def grad(t):
            return -H / float(H @ t)

        def hess(t):
            return np.outer(H, H) / float(H @ t) ** 2

        return check_exp_concavity(g, beta, M, rng, grad=grad, hess=hess, n_points=n_points)

    from .losses import phi_loss

    phi = phi_loss(loss)
    H = rng.uniform(-1.0, 1.0, M)
    y = float(rng.choice([-1.0, 1.0]))

    def g(t):
        return float(phi.phi(-y * (H @ t)) - phi.phi(-y * (H @ theta_p)))

    def grad(t):
        return -y * float(phi.phi_d1(-y * (H @ t))) * H

    def hess(t):
        return float(phi.phi_d2(-y * (H @ t))) * np.outer(H, H)

    return check_exp_concavity(g, beta, M, rng, grad=grad, hess=hess, n_points=n_points)
