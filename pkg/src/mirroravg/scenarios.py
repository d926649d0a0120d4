"""Seeded synthetic data-generating processes with known truth.

Every scenario knows how to draw a sample, turn it into vertex losses, and
evaluate its risk ``A(theta)`` exactly, so excess risks need no Monte Carlo.
Scenarios are immutable; ``with_n`` returns the variant used for one cell of
a study (some settings tie the data model or the temperature to ``n``).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .calibration import BetaPolicy, beta_for_scenario
from .losses import (
    DEFAULT_FLOOR,
    Dictionary,
    Evaluator,
    KLDensityLoss,
    L2DensityLoss,
    ParametricFamily,
    ParametricKLLoss,
    PhiClassificationLoss,
    QuadraticGameLoss,
    SquaredRegressionLoss,
    gram_matrix,
    phi_loss,
)
from .simplex import LossVector

__all__ = [
    "ClassificationScenario",
    "DensityScenario",
    "ParametricScenario",
    "QuadraticGameScenario",
    "RegressionScenario",
    "Scenario",
    "gen_density_scenario",
    "gen_parametric",
    "gen_quadratic_game",
    "gen_regression",
    "head",
    "scenario_from_dict",
]

REGRESSION_KINDS = ("regression-gaussian", "regression-exp-moment", "regression-heavy-tail",
                    "regression-bounded")


def head(samples, k: int):
    """First ``k`` samples of a batch (arrays or tuples of arrays)."""
    if isinstance(samples, tuple):
        return tuple(s[:k] for s in samples)
    return samples[:k]


class Scenario:
    """Shared behaviour; concrete scenarios are frozen dataclasses below."""

    kind: str
    n: int
    beta_override: float | None

    @property
    def policy(self) -> BetaPolicy:
        return beta_for_scenario(self.kind, self.calibration_constants(),
                                 paper_beta=getattr(self, "paper_beta", False))

    @property
    def beta(self) -> float:
        return self.policy.beta_min if self.beta_override is None else float(self.beta_override)

    def calibration_constants(self) -> dict:
        return {}

    def with_n(self, n: int) -> "Scenario":
        return dataclasses.replace(self, n=int(n))

    def vertex_losses(self, samples) -> LossVector:
        return self.loss_model.vertex_losses(samples)

    def exact_vertex_risks(self) -> np.ndarray:
        return np.array([self.exact_risk(e) for e in np.eye(self.M)])

    def exact_risk(self, theta) -> float:
        raise NotImplementedError

    def data_source(self):
        """``(N, rng) -> samples`` for Monte Carlo risk estimates."""
        return self.sample

    def sample(self, n: int, rng: np.random.Generator):
        raise NotImplementedError

    def remainder_mean(self, beta: float, budget: int, rng: np.random.Generator) -> float | None:
        """Monte Carlo mean of the regression truncation remainder, where it applies."""
        return None

    def quadratic_form(self):
        """``(P, q)`` with ``A(theta) = theta P theta - 2 q theta + const`` when A is quadratic."""
        return None


# --------------------------------------------------------------------------
# quadratic game


@dataclass(frozen=True)
class QuadraticGameScenario(Scenario):
    """``Z ~ N(e_k * (sigma/2) sqrt(log M / n), sigma^2 I)`` with ``Q = theta.theta/2 - z.theta``.

    ``truth`` is the 0-based index ``k``.  The mean shrinks with ``n``.
    """

    M: int
    n: int
    sigma: float = 1.0
    truth: int = 0
    beta_override: float | None = None
    kind: str = field(default="quadratic-game", init=False)

    def __post_init__(self):
        if self.M < 2 or self.n < 1 or not self.sigma >= 0:
            raise ValueError("quadratic game needs M >= 2, n >= 1, sigma >= 0")
        if not 0 <= self.truth < self.M:
            raise ValueError(f"truth index {self.truth} outside 0..{self.M - 1}")

    @property
    def shift(self) -> float:
        return self.sigma / 2 * math.sqrt(math.log(self.M) / self.n)

    @property
    def mean(self) -> np.ndarray:
        mu = np.zeros(self.M)
        mu[self.truth] = self.shift
        return mu

    def calibration_constants(self) -> dict:
        return {"sigma": self.sigma, "mean_norm": self.shift}

    @property
    def loss_model(self):
        return QuadraticGameLoss(self.M)

    def sample(self, n, rng):
        return self.mean + self.sigma * rng.standard_normal((n, self.M))

    def exact_risk(self, theta) -> float:
        theta = np.asarray(theta, dtype=np.float64)
        return float(0.5 * theta @ theta - self.mean @ theta)

    def quadratic_form(self):
        return 0.5 * np.eye(self.M), 0.5 * self.mean

    def to_dict(self) -> dict:
        return {"kind": self.kind, "M": self.M, "n": self.n, "sigma": self.sigma,
                "truth": self.truth, "beta": self.beta_override}


def gen_quadratic_game(M: int, n: int, sigma: float, truth_k: int, seed: int, size: int | None = None):
    """Draw ``size`` (default ``n``) i.i.d. vectors of the quadratic game."""
    scen = QuadraticGameScenario(M, n, sigma, truth_k)
    return scen.sample(n if size is None else size, np.random.default_rng(seed))


# --------------------------------------------------------------------------
# regression


def _grid(support, points: int) -> np.ndarray:
    lo, hi = support
    return lo + (hi - lo) * (np.arange(points) + 0.5) / points


def _noise_second_moment(noise: dict) -> float:
    t = noise["type"]
    if t == "none":
        return 0.0
    if t == "gaussian":
        return noise["sigma"] ** 2
    if t == "uniform":
        return noise["half_width"] ** 2 / 3
    df = noise["df"]
    return noise.get("scale", 1.0) ** 2 * df / (df - 2) if df > 2 else math.inf


def _draw_noise(noise: dict, size: int, rng) -> np.ndarray:
    t = noise["type"]
    if t == "none":
        return np.zeros(size)
    if t == "gaussian":
        return noise["sigma"] * rng.standard_normal(size)
    if t == "uniform":
        return rng.uniform(-noise["half_width"], noise["half_width"], size)
    return noise.get("scale", 1.0) * rng.standard_t(noise["df"], size)


def _check_noise(kind: str, noise: dict, s: float) -> None:
    t = noise.get("type")
    if t not in ("none", "gaussian", "uniform", "student-t"):
        raise ValueError(f"unknown noise type {t!r}")
    allowed = {
        "regression-gaussian": ("none", "gaussian"),
        "regression-exp-moment": ("none", "gaussian", "uniform"),
        "regression-heavy-tail": ("none", "gaussian", "uniform", "student-t"),
        "regression-bounded": ("none", "gaussian", "uniform", "student-t"),
    }[kind]
    if t not in allowed:
        raise ValueError(f"{kind} does not admit {t} noise")
    if t == "student-t":
        need = s if kind == "regression-heavy-tail" else 2.0
        if not noise["df"] > need:
            raise ValueError(f"student-t noise needs df > {need} for a finite moment of that order")


def default_regression_dictionary(M: int, L_tilde: float) -> tuple[Evaluator, Dictionary]:
    """Truth ``f(x) = x - 1/2`` on [0, 1] and ``M`` affine candidates around it.

    Candidate 0 is the truth; candidate ``j`` is shifted by ``d_j = L_tilde j/(M-1)``
    in turn as ``+d``, ``-d``, ``+d(2x-1)``, ``-d(2x-1)``, so that
    ``max_j |f - f_j|_inf = L_tilde``.
    """
    truth = Evaluator.affine(-0.5, 1.0)
    evaluators = []
    for j in range(M):
        d = L_tilde * j / (M - 1)
        shape = j % 4
        if shape == 0:
            evaluators.append(Evaluator.affine(-0.5 + d, 1.0))
        elif shape == 1:
            evaluators.append(Evaluator.affine(-0.5 - d, 1.0))
        elif shape == 2:
            evaluators.append(Evaluator.affine(-0.5 - d, 1.0 + 2 * d))
        else:
            evaluators.append(Evaluator.affine(-0.5 + d, 1.0 - 2 * d))
    bounds = {"L": 0.5 + L_tilde, "L_tilde": L_tilde}
    return truth, Dictionary(evaluators, "regression-fn", bounds)


@dataclass(frozen=True)
class RegressionScenario(Scenario):
    """``Y = f(X) + xi`` with ``X`` uniform on a grid of the dictionary's support.

    ``noise`` is one of ``{"type": "gaussian", "sigma"}``,
    ``{"type": "uniform", "half_width"}``, ``{"type": "student-t", "df", "scale"}``
    or ``{"type": "none"}``.
    """

    kind: str
    n: int
    truth: Evaluator
    dictionary: Dictionary
    noise: dict
    grid_points: int = 64
    s: float = 2.0
    C1: float = 1.0
    b0: float = math.inf
    beta_override: float | None = None

    def __post_init__(self):
        if self.kind not in REGRESSION_KINDS:
            raise ValueError(f"unknown regression kind {self.kind!r}")
        if self.dictionary.kind != "regression-fn":
            raise ValueError("regression needs a regression-fn dictionary")
        _check_noise(self.kind, self.noise, self.s)
        L_tilde = self.dictionary.bounds.get("L_tilde")
        if L_tilde is not None:
            dev = np.abs(self._H - self._f[:, None]).max()
            if dev > L_tilde * (1 + 1e-12):
                raise ValueError(f"max_j |f - f_j| = {dev} exceeds L_tilde = {L_tilde}")

    @property
    def M(self) -> int:
        return self.dictionary.M

    @property
    def _x(self) -> np.ndarray:
        return _grid(self.dictionary.support, self.grid_points)

    @property
    def _f(self) -> np.ndarray:
        return self.truth(self._x)

    @property
    def _H(self) -> np.ndarray:
        return self.dictionary(self._x)

    @property
    def L(self) -> float:
        return float(self.dictionary.bounds.get("L", np.abs(self._H).max()))

    def calibration_constants(self) -> dict:
        b = self.dictionary.bounds
        sigma2 = _noise_second_moment(self.noise)
        L_tilde = b.get("L_tilde", float(np.abs(self._H - self._f[:, None]).max()))
        if self.kind == "regression-heavy-tail":
            return {"s": self.s, "C1": self.C1, "n": self.n, "M": self.M, "L": self.L}
        if self.kind == "regression-bounded":
            return {"L": self.L}
        if self.kind == "regression-exp-moment":
            return {"sigma2": sigma2, "L_tilde": L_tilde, "L": self.L, "b0": self.b0}
        return {"sigma2": sigma2, "L_tilde": L_tilde}

    @property
    def loss_model(self):
        return SquaredRegressionLoss(self.dictionary)

    def sample(self, n, rng):
        idx = rng.integers(0, self.grid_points, n)
        x = self._x[idx]
        y = self._f[idx] + _draw_noise(self.noise, n, rng)
        return x, y

    def exact_risk(self, theta) -> float:
        pred = self._H @ np.asarray(theta, dtype=np.float64)
        return float(np.mean((self._f - pred) ** 2) + _noise_second_moment(self.noise))

    def quadratic_form(self):
        H = self._H
        return H.T @ H / len(H), H.T @ self._f / len(H)

    def remainder_mean(self, beta, budget, rng):
        if self.kind not in ("regression-heavy-tail", "regression-bounded"):
            return None
        from .calibration import bounded_moment_constants, remainder_R_beta

        b, B, _ = bounded_moment_constants(self.L)
        _, y = self.sample(budget, rng)
        return float(np.mean(remainder_R_beta(y, self.L, b, B, beta)))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "truth": self.truth.to_dict(),
                "dictionary": self.dictionary.to_dict(), "noise": dict(self.noise),
                "grid_points": self.grid_points, "s": self.s, "C1": self.C1,
                "b0": None if math.isinf(self.b0) else self.b0, "beta": self.beta_override}


def gen_regression(kind: str, truth: Evaluator, dictionary: Dictionary, noise: dict, seed: int,
                   n: int, **kwargs):
    """Draw ``n`` pairs ``(x, y)`` of a regression scenario."""
    scen = RegressionScenario(kind, n, truth, dictionary, noise, **kwargs)
    return scen.sample(n, np.random.default_rng(seed))


# --------------------------------------------------------------------------
# classification


def default_classification_dictionary(M: int) -> tuple[Evaluator, Dictionary]:
    """``P(Y = 1 | x) = 0.2 + 0.6 x`` and affine scores ``c_j (2x - 1)`` in [-1, 1]."""
    eta = Evaluator.affine(0.2, 0.6)
    cs = np.linspace(-1.0, 1.0, M)
    evaluators = [Evaluator.affine(-c, 2 * c) for c in cs]
    return eta, Dictionary(evaluators, "classifier-score", {"L": 1.0})


@dataclass(frozen=True)
class ClassificationScenario(Scenario):
    n: int
    eta: Evaluator
    dictionary: Dictionary
    phi: str = "exp"
    grid_points: int = 64
    paper_beta: bool = False
    beta_override: float | None = None
    kind: str = field(default="classification-phi", init=False)

    def __post_init__(self):
        if self.dictionary.kind != "classifier-score":
            raise ValueError("classification needs a classifier-score dictionary")
        phi_loss(self.phi)
        if np.abs(self._H).max() > 1 + 1e-12:
            raise ValueError("classifier scores must lie in [-1, 1]")
        p = self._eta
        if np.any((p < 0) | (p > 1)):
            raise ValueError("P(Y = 1 | x) must lie in [0, 1]")

    @property
    def M(self) -> int:
        return self.dictionary.M

    @property
    def _x(self):
        return _grid(self.dictionary.support, self.grid_points)

    @property
    def _H(self):
        return self.dictionary(self._x)

    @property
    def _eta(self):
        return self.eta(self._x)

    def calibration_constants(self) -> dict:
        return {"phi": self.phi}

    @property
    def loss_model(self):
        return PhiClassificationLoss(self.dictionary, phi_loss(self.phi))

    def sample(self, n, rng):
        idx = rng.integers(0, self.grid_points, n)
        y = np.where(rng.random(n) < self._eta[idx], 1.0, -1.0)
        return self._x[idx], y

    def exact_risk(self, theta) -> float:
        h = self._H @ np.asarray(theta, dtype=np.float64)
        phi = phi_loss(self.phi).phi
        p = self._eta
        return float(np.mean(p * phi(-h) + (1 - p) * phi(h)))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "eta": self.eta.to_dict(),
                "dictionary": self.dictionary.to_dict(), "phi": self.phi,
                "grid_points": self.grid_points, "beta": self.beta_override}


# --------------------------------------------------------------------------
# densities


def _normalised_histogram(edges, masses) -> Evaluator:
    edges = np.asarray(edges, dtype=np.float64)
    masses = np.asarray(masses, dtype=np.float64)
    return Evaluator.histogram(edges, masses / masses.sum() / np.diff(edges))


def default_kl_dictionary(atoms: int = 8, M: int = 5) -> tuple[Evaluator, Dictionary]:
    """Truth and ``M`` strictly positive candidates on ``atoms`` unit-width atoms."""
    edges = np.arange(atoms + 1, dtype=np.float64)
    k = np.arange(atoms)
    p = np.minimum(k + 1, atoms - k).astype(float)
    p /= p.sum()
    u = np.full(atoms, 1.0 / atoms)
    shapes = [
        u,
        0.7 * p + 0.3 * u,
        0.5 * p + 0.5 * (k + 1) / (k + 1).sum(),
        0.5 * p + 0.5 * (atoms - k) / (atoms - k).sum(),
        0.9 * p + 0.1 * np.roll(p, atoms // 2),
    ]
    while len(shapes) < M:
        t = len(shapes) / (M + 1)
        shapes.append((1 - t) * p + t * u)
    evaluators = [_normalised_histogram(edges, s) for s in shapes[:M]]
    return _normalised_histogram(edges, p), Dictionary(evaluators, "density", {}, (0.0, float(atoms)))


def default_l2_dictionary(M: int = 5, bins: int = 10, L: float = 2.0) -> tuple[Evaluator, Dictionary]:
    """Histogram truth and candidates on [0, 1] with heights at most ``L``."""
    edges = np.linspace(0.0, 1.0, bins + 1)
    k = np.arange(bins) + 0.5
    truth = 1.0 + 0.8 * np.sin(2 * np.pi * k / bins)
    shapes = [np.ones(bins), truth, 1.0 + 0.8 * np.cos(2 * np.pi * k / bins),
              1.0 + 0.9 * (2 * k / bins - 1), 1.0 - 0.9 * (2 * k / bins - 1)]
    while len(shapes) < M:
        t = len(shapes) / (M + 1)
        shapes.append((1 - t) * truth + t)
    evaluators = [Evaluator.histogram(edges, s / s.mean()) for s in shapes[:M]]
    dictionary = Dictionary(evaluators, "density", {"L": L}, (0.0, 1.0))
    return Evaluator.histogram(edges, truth / truth.mean()), dictionary


@dataclass(frozen=True)
class DensityScenario(Scenario):
    """Histogram truth and histogram candidates, aggregated under KL or L2 loss.

    With ``discrete=True`` the unit-width bins are atoms of a counting
    measure and draws are the atom's left edge.
    """

    kind: str
    n: int
    truth: Evaluator
    dictionary: Dictionary
    discrete: bool = False
    floor: float = DEFAULT_FLOOR
    beta_override: float | None = None

    def __post_init__(self):
        if self.kind not in ("density-kl", "density-l2"):
            raise ValueError(f"unknown density kind {self.kind!r}")
        if self.truth.type != "histogram":
            raise ValueError("density truth must be a histogram")
        if self.dictionary.kind != "density":
            raise ValueError("density scenario needs a density dictionary")
        edges, heights = map(np.asarray, self.truth.params)
        if np.any(heights < 0) or abs(np.sum(heights * np.diff(edges)) - 1) > 1e-9:
            raise ValueError("truth histogram is not a probability density")
        for f in self.dictionary.evaluators:
            if f.type == "histogram":
                e, h = map(np.asarray, f.params)
                if np.any(h < 0) or abs(np.sum(h * np.diff(e)) - 1) > 1e-9:
                    raise ValueError("dictionary histogram is not a probability density")
        L = self.dictionary.bounds.get("L")
        if L is not None and heights.max() > L * (1 + 1e-12):
            raise ValueError("truth density exceeds the bound L")
        if self.discrete and np.any(np.diff(edges) != 1.0):
            raise ValueError("discrete densities need unit-width atoms")

    @property
    def M(self) -> int:
        return self.dictionary.M

    def _cells(self):
        # Common refinement of the truth and candidate breakpoints.
        cuts = set(self.truth.params[0])
        for f in self.dictionary.evaluators:
            if f.type == "histogram":
                cuts.update(f.params[0])
        cuts = np.array(sorted(cuts))
        mids = 0.5 * (cuts[:-1] + cuts[1:])
        return mids, np.diff(cuts)

    def calibration_constants(self) -> dict:
        if self.kind == "density-l2":
            return {"L": self.dictionary.bounds.get("L")}
        return {}

    @property
    def gram(self):
        return gram_matrix(self.dictionary)

    @property
    def loss_model(self):
        if self.kind == "density-kl":
            return KLDensityLoss(self.dictionary, self.floor)
        return L2DensityLoss(self.dictionary, self.gram)

    def sample(self, n, rng):
        edges, heights = map(np.asarray, self.truth.params)
        masses = heights * np.diff(edges)
        cdf = np.cumsum(masses)
        cdf /= cdf[-1]
        k = np.minimum(np.searchsorted(cdf, rng.random(n), side="right"), len(masses) - 1)
        if self.discrete:
            return edges[k].copy()
        return edges[k] + np.diff(edges)[k] * rng.random(n)

    def exact_risk(self, theta) -> float:
        theta = np.asarray(theta, dtype=np.float64)
        mids, widths = self._cells()
        p = self.truth(mids)
        mix = self.dictionary(mids) @ theta
        if self.kind == "density-kl":
            return float(-np.sum(p * widths * np.log(np.maximum(mix, self.floor))))
        return float(np.sum(widths * (p - mix) ** 2) - np.sum(widths * p**2))

    def quadratic_form(self):
        if self.kind != "density-l2":
            return None
        mids, widths = self._cells()
        H = self.dictionary(mids)
        return self.gram.entries, H.T @ (widths * self.truth(mids))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "truth": self.truth.to_dict(),
                "dictionary": self.dictionary.to_dict(), "discrete": self.discrete,
                "floor": self.floor, "beta": self.beta_override}


def gen_density_scenario(kind: str, truth: Evaluator, dictionary: Dictionary, seed: int, n: int,
                         discrete: bool = False):
    scen = DensityScenario("density-" + kind if not kind.startswith("density-") else kind,
                           n, truth, dictionary, discrete)
    return scen.sample(n, np.random.default_rng(seed))


# --------------------------------------------------------------------------
# parametric families


def _entropy(family: ParametricFamily, a: float) -> float:
    if family.name == "gaussian":
        return 0.5 * math.log(2 * math.pi * math.e * family.sigma**2)
    if family.name == "bernoulli":
        return -(a * math.log(a) + (1 - a) * math.log1p(-a))
    kmax = int(a + 40 * math.sqrt(a) + 60)
    k = np.arange(kmax)
    logp = k * math.log(a) - a - gammaln(k + 1.0)
    return float(-np.sum(np.exp(logp) * logp))


@dataclass(frozen=True)
class ParametricScenario(Scenario):
    n: int
    family: ParametricFamily
    a_star: float
    params: tuple[float, ...]
    beta_override: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(map(float, self.params)))
        if len(self.params) < 2:
            raise ValueError("need at least two candidate parameters")
        self.family.check(self.params)
        self.family.check(self.a_star)

    @property
    def kind(self) -> str:
        return "parametric-" + self.family.name

    @property
    def M(self) -> int:
        return len(self.params)

    def calibration_constants(self) -> dict:
        f = self.family
        if f.name == "gaussian":
            L = f.upper if f.upper is not None else max(abs(a) for a in (*self.params, self.a_star))
            return {"sigma": f.sigma, "L": L}
        if f.name == "poisson":
            ell = f.lower if f.lower is not None else min((*self.params, self.a_star))
            L = f.upper if f.upper is not None else max((*self.params, self.a_star))
            return {"ell": ell, "L": L}
        return {}

    @property
    def loss_model(self):
        return ParametricKLLoss(self.family, self.params)

    def sample(self, n, rng):
        return self.family.sample(self.a_star, n, rng)

    def exact_risk(self, theta) -> float:
        a = float(np.asarray(theta, dtype=np.float64) @ np.asarray(self.params))
        return float(self.family.kl(self.a_star, a)) + _entropy(self.family, self.a_star)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n": self.n, "family": self.family.to_dict(),
                "a_star": self.a_star, "params": list(self.params), "beta": self.beta_override}


def gen_parametric(family: ParametricFamily, a_star: float, params, seed: int, n: int):
    scen = ParametricScenario(n, family, a_star, tuple(params))
    return scen.sample(n, np.random.default_rng(seed))


# --------------------------------------------------------------------------
# construction from JSON-style specs


def _opt_float(value):
    return None if value is None else float(value)


def scenario_from_dict(spec: dict) -> Scenario:
    """Build a scenario from a JSON config block.

    ``kind`` selects the setting; dictionaries fall back to the built-in
    defaults when not given.  ``n`` defaults to 1 (studies override it).
    """
    spec = dict(spec)
    try:
        kind = spec["kind"]
    except KeyError:
        raise ValueError("scenario spec needs a 'kind'") from None
    n = int(spec.get("n", 1))
    beta = _opt_float(spec.get("beta"))
    if kind == "quadratic-game":
        return QuadraticGameScenario(int(spec.get("M", 50)), n, float(spec.get("sigma", 1.0)),
                                     int(spec.get("truth", 0)), beta)
    if kind in REGRESSION_KINDS:
        M = int(spec.get("M", 10))
        if "dictionary" in spec:
            dictionary = Dictionary.from_dict(spec["dictionary"])
            truth = Evaluator.from_dict(spec["truth"])
        else:
            truth, dictionary = default_regression_dictionary(M, float(spec.get("L_tilde", 1.0)))
        default_noise = {"type": "student-t", "df": 5.0} if kind == "regression-heavy-tail" \
            else {"type": "gaussian", "sigma": 1.0}
        b0 = spec.get("b0")
        return RegressionScenario(kind, n, truth, dictionary, dict(spec.get("noise", default_noise)),
                                  int(spec.get("grid_points", 64)), float(spec.get("s", 2.0)),
                                  float(spec.get("C1", 1.0)),
                                  math.inf if b0 is None else float(b0), beta)
    if kind == "classification-phi":
        if "dictionary" in spec:
            dictionary = Dictionary.from_dict(spec["dictionary"])
            eta = Evaluator.from_dict(spec["eta"])
        else:
            eta, dictionary = default_classification_dictionary(int(spec.get("M", 5)))
        return ClassificationScenario(n, eta, dictionary, spec.get("phi", "exp"),
                                      int(spec.get("grid_points", 64)),
                                      bool(spec.get("paper_beta", False)), beta)
    if kind in ("density-kl", "density-l2"):
        if "dictionary" in spec:
            dictionary = Dictionary.from_dict(spec["dictionary"])
            truth = Evaluator.from_dict(spec["truth"])
            discrete = bool(spec.get("discrete", False))
        elif kind == "density-kl":
            truth, dictionary = default_kl_dictionary(int(spec.get("atoms", 8)), int(spec.get("M", 5)))
            discrete = True
        else:
            truth, dictionary = default_l2_dictionary(int(spec.get("M", 5)), int(spec.get("bins", 10)),
                                                      float(spec.get("L", 2.0)))
            discrete = False
        return DensityScenario(kind, n, truth, dictionary, discrete,
                               float(spec.get("floor", DEFAULT_FLOOR)), beta)
    if kind.startswith("parametric-"):
        name = kind.split("-", 1)[1]
        family = ParametricFamily(name, float(spec.get("sigma", 1.0)), _opt_float(spec.get("ell")),
                                  _opt_float(spec.get("L")))
        if name == "gaussian" and family.upper is not None:
            family = dataclasses.replace(family, lower=-family.upper)
        try:
            return ParametricScenario(n, family, float(spec["a_star"]), tuple(spec["params"]), beta)
        except KeyError as exc:
            raise ValueError(f"{kind} needs {exc}") from None
    raise ValueError(f"unknown scenario kind {kind!r}")
