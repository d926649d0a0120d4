"""Loss models: vertex-loss vectors ``u(z)`` and mixture losses ``Q(z, theta)``.

Each model only ever hands the engine its vertex losses.  Mixture losses are
kept for Monte Carlo risk estimates and convexity checks.

Candidate functions are built from a small declarative catalog so that
dictionaries can be written to and read from JSON:

========== ==========================================
constant    ``{"type": "constant", "value": c}``
affine      ``{"type": "affine", "intercept": a, "slope": b}``
histogram   ``{"type": "histogram", "edges": [...], "heights": [...]}``
gaussian    ``{"type": "gaussian", "mean": m, "sigma": s}`` (a density)
========== ==========================================
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

from .simplex import LossVector, check_simplex

__all__ = [
    "DICTIONARY_KINDS",
    "PHI_LOSSES",
    "Dictionary",
    "Evaluator",
    "GramMatrix",
    "KLDensityLoss",
    "L2DensityLoss",
    "ParametricFamily",
    "ParametricKLLoss",
    "PhiClassificationLoss",
    "PhiLoss",
    "QuadraticGameLoss",
    "SquaredRegressionLoss",
    "gram_matrix",
    "kl_density_vertex_losses",
    "l2_density_vertex_losses",
    "mixture_predict",
    "parametric_kl_vertex_losses",
    "phi_classification_vertex_losses",
    "phi_loss",
    "quadratic_game_vertex_losses",
    "squared_regression_vertex_losses",
]

DICTIONARY_KINDS = ("regression-fn", "classifier-score", "density", "parameter")
DEFAULT_FLOOR = 1e-300
DEFAULT_QUADRATURE_POINTS = 4096


# --------------------------------------------------------------------------
# evaluators and dictionaries


@dataclass(frozen=True)
class Evaluator:
    type: str
    params: tuple = ()

    def __post_init__(self):
        if self.type not in _EVALUATORS:
            raise ValueError(f"unknown evaluator type {self.type!r}")
        if self.type == "histogram":
            edges, heights = self.params
            if len(edges) != len(heights) + 1 or len(heights) < 1:
                raise ValueError("histogram needs len(edges) == len(heights) + 1")
            if np.any(np.diff(edges) <= 0):
                raise ValueError("histogram edges must be strictly increasing")
        if self.type == "gaussian" and not self.params[1] > 0:
            raise ValueError("gaussian sigma must be positive")

    @classmethod
    def constant(cls, value: float) -> "Evaluator":
        return cls("constant", (float(value),))

    @classmethod
    def affine(cls, intercept: float, slope: float) -> "Evaluator":
        return cls("affine", (float(intercept), float(slope)))

    @classmethod
    def histogram(cls, edges: Sequence[float], heights: Sequence[float]) -> "Evaluator":
        return cls("histogram", (tuple(map(float, edges)), tuple(map(float, heights))))

    @classmethod
    def gaussian(cls, mean: float, sigma: float) -> "Evaluator":
        return cls("gaussian", (float(mean), float(sigma)))

    @classmethod
    def from_dict(cls, spec: dict) -> "Evaluator":
        kind = spec.get("type")
        try:
            if kind == "constant":
                return cls.constant(spec["value"])
            if kind == "affine":
                return cls.affine(spec["intercept"], spec["slope"])
            if kind == "histogram":
                return cls.histogram(spec["edges"], spec["heights"])
            if kind == "gaussian":
                return cls.gaussian(spec["mean"], spec["sigma"])
        except KeyError as exc:
            raise ValueError(f"evaluator {kind!r} is missing field {exc}") from None
        raise ValueError(f"unknown evaluator type {kind!r}")

    def to_dict(self) -> dict:
        if self.type == "constant":
            return {"type": "constant", "value": self.params[0]}
        if self.type == "affine":
            return {"type": "affine", "intercept": self.params[0], "slope": self.params[1]}
        if self.type == "histogram":
            return {"type": "histogram", "edges": list(self.params[0]),
                    "heights": list(self.params[1])}
        return {"type": "gaussian", "mean": self.params[0], "sigma": self.params[1]}

    def __call__(self, x) -> np.ndarray:
        return _EVALUATORS[self.type](np.asarray(x, dtype=np.float64), *self.params)

    @property
    def is_piecewise_constant(self) -> bool:
        return self.type in ("constant", "histogram")


def _eval_histogram(x, edges, heights):
    edges = np.asarray(edges)
    heights = np.asarray(heights)
    idx = np.searchsorted(edges, x, side="right") - 1
    inside = (idx >= 0) & (idx < heights.shape[0])
    return np.where(inside, heights[np.clip(idx, 0, heights.shape[0] - 1)], 0.0)


_EVALUATORS: dict[str, Callable] = {
    "constant": lambda x, c: np.full(x.shape, c),
    "affine": lambda x, a, b: a + b * x,
    "histogram": _eval_histogram,
    "gaussian": lambda x, m, s: np.exp(-0.5 * ((x - m) / s) ** 2) / (s * math.sqrt(2 * math.pi)),
}


@dataclass(frozen=True)
class Dictionary:
    """The frozen collection of ``M`` candidates being aggregated.

    ``bounds`` may carry ``L`` (sup-norm bound), ``L_tilde`` and ``ell``.
    ``support`` is the interval on which bounds are grid-checked and densities
    integrated.
    """

    evaluators: tuple[Evaluator, ...]
    kind: str
    bounds: dict = field(default_factory=dict)
    support: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "evaluators", tuple(self.evaluators))
        if self.kind not in DICTIONARY_KINDS:
            raise ValueError(f"dictionary kind must be one of {DICTIONARY_KINDS}")
        if len(self.evaluators) < 2:
            raise ValueError("a dictionary needs M >= 2 candidates")
        lo, hi = self.support
        if not hi > lo:
            raise ValueError("support must be a nonempty interval")
        L = self.bounds.get("L")
        if L is not None:
            worst = float(np.abs(self(np.linspace(lo, hi, 1025, endpoint=False))).max())
            if worst > L * (1 + 1e-12):
                raise ValueError(f"dictionary exceeds its sup-norm bound: {worst} > L={L}")

    @property
    def M(self) -> int:
        return len(self.evaluators)

    def __call__(self, x) -> np.ndarray:
        """Stack the candidates: ``H(x)`` with shape ``x.shape + (M,)``."""
        x = np.asarray(x, dtype=np.float64)
        return np.stack([f(x) for f in self.evaluators], axis=-1)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "support": list(self.support),
            "bounds": dict(self.bounds),
            "evaluators": [f.to_dict() for f in self.evaluators],
        }

    @classmethod
    def from_dict(cls, spec: dict) -> "Dictionary":
        try:
            evaluators = [Evaluator.from_dict(e) for e in spec["evaluators"]]
            kind = spec["kind"]
        except KeyError as exc:
            raise ValueError(f"dictionary spec is missing {exc}") from None
        return cls(evaluators, kind, dict(spec.get("bounds", {})),
                   tuple(spec.get("support", (0.0, 1.0))))

    @classmethod
    def from_json(cls, text: str) -> "Dictionary":
        return cls.from_dict(json.loads(text))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def mixture_predict(theta, dictionary: Dictionary, x) -> np.ndarray:
    """``theta^T H(x)`` for scalar or array ``x``."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (dictionary.M,):
        raise ValueError("theta does not match the dictionary size")
    return dictionary(x) @ theta


# --------------------------------------------------------------------------
# Gram matrix


@dataclass(frozen=True)
class GramMatrix:
    entries: np.ndarray
    quadrature_meta: dict

    @property
    def M(self) -> int:
        return self.entries.shape[0]

    def diag(self) -> np.ndarray:
        return np.diag(self.entries).copy()


def _histogram_gram(evaluators: Sequence[Evaluator], lo: float, hi: float) -> np.ndarray:
    # Exact: refine to the union of all breakpoints, then sum widths * products.
    cuts = {lo, hi}
    for f in evaluators:
        if f.type == "histogram":
            cuts.update(e for e in f.params[0] if lo <= e <= hi)
    cuts = np.array(sorted(cuts))
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    widths = np.diff(cuts)
    vals = np.stack([f(mids) for f in evaluators])
    return (vals * widths) @ vals.T


def gram_matrix(dictionary: Dictionary, grid: dict | None = None) -> GramMatrix:
    """Pairwise inner products ``int p_j p_k`` over the dictionary's support.

    Piecewise-constant dictionaries are integrated exactly.  Otherwise the
    trapezoidal rule runs on ``grid = {"lo", "hi", "points"}``, which must
    cover the declared support.
    """
    if dictionary.kind != "density":
        raise ValueError("gram_matrix needs a density dictionary")
    lo, hi = dictionary.support
    if all(f.is_piecewise_constant for f in dictionary.evaluators):
        entries = _histogram_gram(dictionary.evaluators, lo, hi)
        meta = {"method": "exact-bins", "lo": lo, "hi": hi}
    else:
        grid = dict(grid or {})
        glo = grid.get("lo", lo)
        ghi = grid.get("hi", hi)
        points = int(grid.get("points", DEFAULT_QUADRATURE_POINTS))
        if glo > lo or ghi < hi:
            raise ValueError(f"quadrature grid [{glo}, {ghi}] does not cover support [{lo}, {hi}]")
        if points < 2:
            raise ValueError("quadrature grid needs at least two points")
        x = np.linspace(glo, ghi, points)
        H = dictionary(x)
        entries = np.trapezoid(H[:, :, None] * H[:, None, :], x, axis=0)
        meta = {"method": "trapezoid", "lo": glo, "hi": ghi, "points": points}
    entries = 0.5 * (entries + entries.T)
    return GramMatrix(entries, meta)


# --------------------------------------------------------------------------
# phi losses for classification


@dataclass(frozen=True)
class PhiLoss:
    name: str
    phi: Callable
    phi_d1: Callable
    phi_d2: Callable


_LN2 = math.log(2.0)


def _logit(v):
    return np.logaddexp(0.0, v) / _LN2


def _logit_d1(v):
    return 1.0 / ((1.0 + np.exp(-v)) * _LN2)


def _logit_d2(v):
    s = 1.0 / (1.0 + np.exp(-v))
    return s * (1.0 - s) / _LN2


def _soft_margin_d2(v):
    # One-sided value 2 at the kink v = 1.
    return np.where(np.asarray(v) <= 1.0, 2.0, 0.0)


PHI_LOSSES: dict[str, PhiLoss] = {
    "exp": PhiLoss("exp", np.exp, np.exp, np.exp),
    "logit": PhiLoss("logit", _logit, _logit_d1, _logit_d2),
    "squared": PhiLoss(
        "squared",
        lambda v: (1.0 - v) ** 2,
        lambda v: -2.0 * (1.0 - v),
        lambda v: np.full(np.shape(v), 2.0),
    ),
    "soft-margin": PhiLoss(
        "soft-margin",
        lambda v: np.maximum(0.0, 1.0 - v) ** 2,
        lambda v: -2.0 * np.maximum(0.0, 1.0 - v),
        _soft_margin_d2,
    ),
}


def phi_loss(name: str) -> PhiLoss:
    try:
        return PHI_LOSSES[name]
    except KeyError:
        raise ValueError(f"unknown phi loss {name!r}; choose from {sorted(PHI_LOSSES)}") from None


# --------------------------------------------------------------------------
# vertex losses


def _finite(arr, what: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} must be finite")
    return arr


def squared_regression_vertex_losses(sample, dictionary: Dictionary) -> LossVector:
    """``u_j = (y - f_j(x))^2``; ``sample`` is ``(x, y)`` with scalars or arrays."""
    if dictionary.kind != "regression-fn":
        raise ValueError("squared regression loss needs a regression-fn dictionary")
    x, y = sample
    y = _finite(y, "response y")
    return LossVector((y[..., None] - dictionary(x)) ** 2)


def quadratic_game_vertex_losses(z) -> LossVector:
    """``u_j = Q(z, e_j) = 1/2 - z_j`` for ``Q(z, theta) = theta.theta/2 - z.theta``."""
    return LossVector(0.5 - _finite(z, "z"))


def phi_classification_vertex_losses(sample, dictionary: Dictionary, loss: PhiLoss) -> LossVector:
    """``u_j = phi(-y h_j(x))`` for labels in ``{-1, +1}``."""
    if dictionary.kind != "classifier-score":
        raise ValueError("phi loss needs a classifier-score dictionary")
    x, y = sample
    y = np.asarray(y, dtype=np.float64)
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ValueError("labels must be -1 or +1")
    return LossVector(loss.phi(-y[..., None] * dictionary(x)))


def kl_density_vertex_losses(x, dictionary: Dictionary, floor: float = DEFAULT_FLOOR) -> LossVector:
    """``u_j = -log max(p_j(x), floor)``; rows that needed the floor are flagged."""
    if dictionary.kind != "density":
        raise ValueError("KL loss needs a density dictionary")
    if not 0.0 < floor < 1.0:
        raise ValueError("floor must lie in (0, 1)")
    H = dictionary(x)
    if np.any(H < 0.0):
        raise ValueError("dictionary produced a negative density value")
    low = H < floor
    values = -np.log(np.where(low, floor, H))
    return LossVector(values, ~low.any(axis=-1))


def l2_density_vertex_losses(x, dictionary: Dictionary, gram: GramMatrix) -> LossVector:
    """``u_j = G_jj - 2 p_j(x)``."""
    if dictionary.kind != "density":
        raise ValueError("L2 loss needs a density dictionary")
    if gram.M != dictionary.M:
        raise ValueError("Gram matrix does not match the dictionary")
    return LossVector(gram.diag() - 2.0 * dictionary(x))


@dataclass(frozen=True)
class ParametricFamily:
    """Gaussian (known sigma), Bernoulli, or Poisson family.

    The Bernoulli convention puts mass ``a`` at ``x = 0`` and ``1 - a`` at
    ``x = 1``, which is the reverse of the usual one.
    """

    name: str
    sigma: float = 1.0
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        if self.name not in ("gaussian", "bernoulli", "poisson"):
            raise ValueError(f"unknown parametric family {self.name!r}")
        if self.name == "gaussian" and not self.sigma > 0:
            raise ValueError("gaussian sigma must be positive")
        if self.name == "poisson" and self.lower is not None and self.upper is not None:
            if not 0 < self.lower < self.upper:
                raise ValueError("poisson needs 0 < ell < L")

    def check(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=np.float64)
        ok = np.isfinite(a)
        if self.name == "bernoulli":
            ok &= (a > 0.0) & (a < 1.0)
        elif self.name == "poisson":
            ok &= a > 0.0
        if self.lower is not None:
            ok &= a >= self.lower
        if self.upper is not None:
            ok &= a <= self.upper
        if not np.all(ok):
            raise ValueError(f"parameter outside the {self.name} domain: {a}")
        return a

    def log_density(self, x, a) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        a = np.asarray(a, dtype=np.float64)
        if self.name == "gaussian":
            s = self.sigma
            return -0.5 * ((x - a) / s) ** 2 - math.log(s * math.sqrt(2 * math.pi))
        if self.name == "bernoulli":
            return np.where(x == 0, np.log(a), np.log1p(-a))
        return x * np.log(a) - a - gammaln(x + 1.0)

    def kl(self, a_star, a) -> np.ndarray:
        """``K(P_{a*}, P_a)`` in closed form."""
        a_star = np.asarray(a_star, dtype=np.float64)
        a = np.asarray(a, dtype=np.float64)
        if self.name == "gaussian":
            return (a_star - a) ** 2 / (2 * self.sigma**2)
        if self.name == "bernoulli":
            return a_star * np.log(a_star / a) + (1 - a_star) * np.log((1 - a_star) / (1 - a))
        return a_star * np.log(a_star / a) - a_star + a

    def sample(self, a_star: float, size: int, rng: np.random.Generator) -> np.ndarray:
        if self.name == "gaussian":
            return a_star + self.sigma * rng.standard_normal(size)
        if self.name == "bernoulli":
            return (rng.random(size) >= a_star).astype(np.float64)
        return rng.poisson(a_star, size).astype(np.float64)

    def to_dict(self) -> dict:
        return {"name": self.name, "sigma": self.sigma, "lower": self.lower, "upper": self.upper}


def parametric_kl_vertex_losses(x, family: ParametricFamily, params) -> LossVector:
    """``u_j = -log p(x, a_j)``."""
    a = family.check(params)
    x = np.asarray(x, dtype=np.float64)
    return LossVector(-family.log_density(x[..., None], a))


# --------------------------------------------------------------------------
# loss models bundling vertex and mixture losses


@dataclass(frozen=True)
class QuadraticGameLoss:
    M: int

    def vertex_losses(self, z) -> LossVector:
        return quadratic_game_vertex_losses(z)

    def mixture_loss(self, z, theta) -> np.ndarray:
        theta = check_simplex(theta)
        return 0.5 * theta @ theta - np.asarray(z) @ theta


@dataclass(frozen=True)
class SquaredRegressionLoss:
    dictionary: Dictionary

    def vertex_losses(self, sample) -> LossVector:
        return squared_regression_vertex_losses(sample, self.dictionary)

    def mixture_loss(self, sample, theta) -> np.ndarray:
        x, y = sample
        return (np.asarray(y) - mixture_predict(theta, self.dictionary, x)) ** 2


@dataclass(frozen=True)
class PhiClassificationLoss:
    dictionary: Dictionary
    loss: PhiLoss

    def vertex_losses(self, sample) -> LossVector:
        return phi_classification_vertex_losses(sample, self.dictionary, self.loss)

    def mixture_loss(self, sample, theta) -> np.ndarray:
        x, y = sample
        return self.loss.phi(-np.asarray(y) * mixture_predict(theta, self.dictionary, x))


@dataclass(frozen=True)
class KLDensityLoss:
    dictionary: Dictionary
    floor: float = DEFAULT_FLOOR

    def vertex_losses(self, x) -> LossVector:
        return kl_density_vertex_losses(x, self.dictionary, self.floor)

    def mixture_loss(self, x, theta) -> np.ndarray:
        return -np.log(np.maximum(mixture_predict(theta, self.dictionary, x), self.floor))


@dataclass(frozen=True)
class L2DensityLoss:
    dictionary: Dictionary
    gram: GramMatrix

    def vertex_losses(self, x) -> LossVector:
        return l2_density_vertex_losses(x, self.dictionary, self.gram)

    def mixture_loss(self, x, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=np.float64)
        return theta @ self.gram.entries @ theta - 2.0 * mixture_predict(theta, self.dictionary, x)


@dataclass(frozen=True)
class ParametricKLLoss:
    family: ParametricFamily
    params: tuple[float, ...]

    @property
    def M(self) -> int:
        return len(self.params)

    def vertex_losses(self, x) -> LossVector:
        return parametric_kl_vertex_losses(x, self.family, self.params)

    def mixture_loss(self, x, theta) -> np.ndarray:
        a = float(np.asarray(theta) @ np.asarray(self.params))
        return -self.family.log_density(x, a)
