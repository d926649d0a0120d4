"""Replicated studies: trials, per-cell summaries and log-log rate fits.

Each trial draws its own data from a seed derived as
``blake2b-64(master_seed, cell_index, rep_index)``, where the cell index is the
position of ``n`` in the grid.  Both methods of a replication see the same
sample, so their excess risks are paired.  Mirror averaging consumes the
first ``n - 1`` observations; ERM consumes all ``n``.
"""

from __future__ import annotations

import hashlib
import math
import struct
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .risk import RiskUnavailable, erm_selector, min_quadratic_on_simplex, monte_carlo_risk, oracle_value
from .scenarios import Scenario, head
from .simplex import mirror_average

__all__ = [
    "METHODS",
    "StudyReport",
    "TrialResult",
    "derive_seed",
    "fit_loglog",
    "rate_slope",
    "run_study",
    "run_trial",
    "trial_seed",
]

METHODS = ("mirror-averaging", "erm-selector")

_MASK64 = (1 << 64) - 1


def derive_seed(*parts: int) -> int:
    """Stable 64-bit hash of a tuple of nonnegative integers."""
    data = struct.pack(f"<{len(parts)}Q", *(int(p) & _MASK64 for p in parts))
    return int.from_bytes(hashlib.blake2b(data, digest_size=8).digest(), "little")


def trial_seed(master: int, cell: int, rep: int) -> int:
    return derive_seed(master, cell, rep)


@dataclass(frozen=True)
class TrialResult:
    scenario: str
    method: str
    beta: float
    M: int
    n: int
    rep: int
    seed: int
    excess_risk: float
    clamp_rate: float
    weights: np.ndarray
    losses_used: int
    risk: float
    oracle_risk: float
    simplex_excess: float | None = None
    risk_stderr: float = 0.0
    wall_ms: float = 0.0


def run_trial(scenario: Scenario, method: str, seed: int, *, rep: int = 0,
              mc_budget: int | None = None, simplex_min: float | None = None) -> TrialResult:
    """One replication of one method on ``scenario`` (whose ``n`` sets the sample size)."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {METHODS}")
    start = time.perf_counter()
    rng = np.random.default_rng(seed)
    n = scenario.n
    samples = scenario.sample(n, rng)
    beta = scenario.beta
    if method == "mirror-averaging":
        used = n - 1
        lv = scenario.vertex_losses(head(samples, used))
        weights = mirror_average(np.asarray(lv.values).reshape(used, scenario.M), beta)
    else:
        used = n
        lv = scenario.vertex_losses(samples)
        weights = np.zeros(scenario.M)
        weights[erm_selector(lv)] = 1.0
    clamped = np.atleast_1d(lv.clamped)
    clamp_rate = float(clamped.mean()) if used else 0.0

    stderr = 0.0
    try:
        risk = scenario.exact_risk(weights)
        oracle = oracle_value(scenario)[1]
    except (NotImplementedError, RiskUnavailable):
        if not mc_budget:
            raise RiskUnavailable(f"{scenario.kind} needs a Monte Carlo budget") from None
        mc_seed = derive_seed(seed, 1)
        risk, stderr = monte_carlo_risk(weights, scenario.loss_model, scenario.data_source(),
                                        mc_budget, mc_seed)
        vertex = [monte_carlo_risk(e, scenario.loss_model, scenario.data_source(), mc_budget, mc_seed)[0]
                  for e in np.eye(scenario.M)]
        oracle = min(vertex)
    simplex_excess = None if simplex_min is None else risk - simplex_min
    wall_ms = 1e3 * (time.perf_counter() - start)
    return TrialResult(scenario.kind, method, beta, scenario.M, n, rep, int(seed), risk - oracle,
                       clamp_rate, weights, used, risk, oracle, simplex_excess, stderr, wall_ms)


def fit_loglog(ns, values) -> tuple[float, float]:
    """Least-squares slope of ``log(values)`` on ``log(ns)`` and its standard error."""
    x = np.log(np.asarray(ns, dtype=np.float64))
    y = np.log(np.asarray(values, dtype=np.float64))
    if x.shape[0] < 3:
        raise ValueError("a rate fit needs at least three grid points")
    res = stats.linregress(x, y)
    return float(res.slope), float(res.stderr)


@dataclass
class StudyReport:
    scenario: dict
    n_grid: list
    methods: list
    reps: int
    master_seed: int
    cells: list = field(default_factory=list)
    trials: list = field(default_factory=list)
    slopes: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def cell(self, n: int, method: str) -> dict:
        for c in self.cells:
            if c["n"] == n and c["method"] == method:
                return c
        raise KeyError((n, method))

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "n_grid": list(self.n_grid),
            "methods": list(self.methods),
            "reps": self.reps,
            "master_seed": self.master_seed,
            "cells": self.cells,
            "slopes": self.slopes,
            "notes": list(self.notes),
            "warnings": list(self.warnings),
        }


def rate_slope(report: StudyReport, method: str) -> tuple[float, float]:
    """Log-log slope of mean excess risk against ``n``.

    Cells with a nonpositive mean are dropped and noted on the report.
    """
    ns, means = [], []
    for c in report.cells:
        if c["method"] != method:
            continue
        if c["mean_excess"] > 0:
            ns.append(c["n"])
            means.append(c["mean_excess"])
        else:
            note = f"{method}: cell n={c['n']} has mean excess {c['mean_excess']:.6g} <= 0, dropped from rate fit"
            if note not in report.notes:
                report.notes.append(note)
    if len(ns) < 3:
        raise ValueError(f"{method}: only {len(ns)} cells with positive mean excess; need 3 for a rate fit")
    return fit_loglog(ns, means)


def _run_chunk(args):
    scenario, methods, seeds, cell, mc_budget, simplex_min = args
    out = []
    for rep, seed in seeds:
        for method in methods:
            out.append(run_trial(scenario, method, seed, rep=rep, mc_budget=mc_budget,
                                 simplex_min=simplex_min))
    return cell, out


def _simplex_min(scenario: Scenario) -> float | None:
    form = scenario.quadratic_form()
    if form is None:
        return None
    theta = min_quadratic_on_simplex(*form)
    return scenario.exact_risk(theta)


def run_study(template: Scenario, n_grid, methods=METHODS, reps: int = 30, master_seed: int = 0, *,
              beta: float | None = None, jobs: int = 1, mc_budget: int | None = None,
              remainder_budget: int = 200_000) -> StudyReport:
    """Replicate ``run_trial`` over an ``n`` grid and summarise each (n, method) cell.

    ``beta`` overrides the calibrated temperature in every cell.  The bound
    column is ``beta log M / n``, plus a Monte Carlo estimate of the mean
    truncation remainder for the heavy-tailed regression settings.
    """
    n_grid = [int(n) for n in n_grid]
    if not n_grid:
        raise ValueError("the n grid is empty")
    if any(n < 1 for n in n_grid):
        raise ValueError("every n must be >= 1")
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}")
    if reps < 1:
        raise ValueError("reps must be >= 1")

    cells = []
    for ci, n in enumerate(n_grid):
        scen = template.with_n(n)
        if beta is not None:
            scen = replace(scen, beta_override=float(beta))
        cells.append((ci, scen))

    jobs_args = []
    for ci, scen in cells:
        smin = _simplex_min(scen)
        seeds = [(r, trial_seed(master_seed, ci, r)) for r in range(reps)]
        step = max(1, math.ceil(reps / max(1, jobs)))
        for k in range(0, reps, step):
            jobs_args.append((scen, methods, seeds[k:k + step], ci, mc_budget, smin))

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_run_chunk, jobs_args))
    else:
        chunks = [_run_chunk(a) for a in jobs_args]

    by_cell: dict[int, list] = {}
    for ci, trials in chunks:
        by_cell.setdefault(ci, []).extend(trials)

    report = StudyReport(template.to_dict(), n_grid, methods, reps, master_seed)
    for ci, scen in cells:
        trials = sorted(by_cell[ci], key=lambda t: (t.rep, methods.index(t.method)))
        for t in trials:
            expected = t.n - 1 if t.method == "mirror-averaging" else t.n
            assert t.losses_used == expected, "sample-count accounting violated"
        report.trials.extend(trials)
        b = scen.beta
        bound = b * math.log(scen.M) / scen.n
        remainder = scen.remainder_mean(b, remainder_budget,
                                        np.random.default_rng(derive_seed(master_seed, ci, 1 << 62)))
        for m in methods:
            ex = np.array([t.excess_risk for t in trials if t.method == m])
            cell = {
                "n": scen.n,
                "method": m,
                "beta": b,
                "beta_min": scen.policy.beta_min,
                "M": scen.M,
                "reps": int(ex.shape[0]),
                "mean_excess": float(ex.mean()),
                "stderr": float(ex.std(ddof=1) / math.sqrt(ex.shape[0])) if ex.shape[0] > 1 else 0.0,
                "bound": bound,
                "remainder_mean": remainder,
                "bound_total": bound + (remainder or 0.0),
                "negative_fraction": float(np.mean(ex < 0)),
                "clamp_rate": float(np.mean([t.clamp_rate for t in trials if t.method == m])),
                "losses_used": scen.n - 1 if m == "mirror-averaging" else scen.n,
            }
            sx = [t.simplex_excess for t in trials if t.method == m and t.simplex_excess is not None]
            if sx:
                cell["mean_simplex_excess"] = float(np.mean(sx))
            report.cells.append(cell)

    for m in methods:
        try:
            slope, se = rate_slope(report, m)
            report.slopes[m] = {"slope": slope, "stderr": se}
        except ValueError as exc:
            report.slopes[m] = {"slope": None, "stderr": None, "error": str(exc)}
    if "mirror-averaging" in methods and "erm-selector" in methods:
        report.notes.append("mirror averaging uses n-1 observations per trial, ERM uses n")
    return report
