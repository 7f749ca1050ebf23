"""Constant fitting: Nelder-Mead simplex inside a strict-descent basin-hopping loop.

The local method is implemented here rather than borrowed because the simplex
coefficients are part of the public fit configuration and the hopping
acceptance rule is strictly-better-only (no Metropolis temperature), which
together with a seeded generator makes every fit bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .expressions import MAX_CONSTANTS, Expression, compile_evaluator


class NoFiniteObjectiveError(RuntimeError):
    """No parameter vector ever produced a finite loss; the candidate is unfittable."""


class TooManyConstantsError(ValueError):
    """Expression exceeds the fitted-constant cap."""


@dataclass(frozen=True)
class FitConfig:
    """Knobs for one fit: hop count, perturbation scale, simplex coefficients,
    evaluation budget per local solve, convergence tolerance and seeding."""

    hops: int = 25
    step_scale: float = 1.0
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    max_evals: int = 10000
    tol: float = 1e-8
    seed: int = 0
    refits: int = 1

    def __post_init__(self):
        if self.hops < 1:
            raise ValueError("hops must be a positive integer")
        if self.step_scale <= 0:
            raise ValueError("step_scale must be positive")
        if self.reflection <= 0:
            raise ValueError("reflection coefficient must be > 0")
        if self.expansion <= 1:
            raise ValueError("expansion coefficient must be > 1")
        if not 0 < self.contraction < 1:
            raise ValueError("contraction coefficient must be in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink coefficient must be in (0, 1)")
        if self.max_evals < 1 or self.tol <= 0:
            raise ValueError("max_evals and tol must be positive")
        if self.refits < 1:
            raise ValueError("refits must be >= 1")


@dataclass(frozen=True)
class FitResult:
    params: tuple[float, ...]
    mse: float
    mae: float
    evals: int
    converged: bool


def nelder_mead(func, x0, cfg: FitConfig):
    """One downhill-simplex run from x0.

    Returns ``(x, fval, evals, converged)``. Infinite objective values are
    legal and simply lose comparisons, so undefined regions are never
    attractive.
    """
    alpha, gamma, rho, sigma = cfg.reflection, cfg.expansion, cfg.contraction, cfg.shrink
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    evals = 0

    def call(x):
        nonlocal evals
        evals += 1
        v = func(x)
        return float(v) if np.isfinite(v) else np.inf

    if n == 0:
        return x0, call(x0), evals, True

    sim = np.empty((n + 1, n))
    sim[0] = x0
    for i in range(n):
        y = x0.copy()
        y[i] = y[i] * 1.05 if y[i] != 0 else 0.00025
        sim[i + 1] = y
    fsim = np.array([call(x) for x in sim])
    order = np.argsort(fsim, kind="stable")
    sim, fsim = sim[order], fsim[order]

    converged = False
    while evals + 2 <= cfg.max_evals:
        # inf - inf is NaN and NaN <= tol is False, so an all-inf simplex never converges
        with np.errstate(invalid="ignore"):
            tight = (
                np.max(np.abs(fsim[1:] - fsim[0])) <= cfg.tol
                and np.max(np.abs(sim[1:] - sim[0])) <= cfg.tol
            )
        if tight:
            converged = True
            break
        centroid = sim[:-1].mean(axis=0)
        xr = centroid + alpha * (centroid - sim[-1])
        fr = call(xr)
        if fr < fsim[0]:
            xe = centroid + gamma * (xr - centroid)
            fe = call(xe)
            if fe < fr:
                sim[-1], fsim[-1] = xe, fe
            else:
                sim[-1], fsim[-1] = xr, fr
        elif fr < fsim[-2]:
            sim[-1], fsim[-1] = xr, fr
        else:
            if fr < fsim[-1]:
                xc = centroid + rho * (xr - centroid)
                fc = call(xc)
                accepted = fc <= fr
            else:
                xc = centroid + rho * (sim[-1] - centroid)
                fc = call(xc)
                accepted = fc < fsim[-1]
            if accepted:
                sim[-1], fsim[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    sim[i] = sim[0] + sigma * (sim[i] - sim[0])
                    fsim[i] = call(sim[i])
                    if evals >= cfg.max_evals:
                        break
        order = np.argsort(fsim, kind="stable")
        sim, fsim = sim[order], fsim[order]

    return sim[0].copy(), float(fsim[0]), evals, converged


def minimize(func, x0, cfg: FitConfig):
    """Nelder-Mead plus ``cfg.hops`` basin hops: perturb the incumbent with a
    per-coordinate Gaussian of scale ``step_scale``, re-minimize locally, and
    accept only strict improvements. Deterministic given ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    best_x, best_f, evals, converged = nelder_mead(func, x0, cfg)
    n = np.size(x0)
    if n:
        for _ in range(cfg.hops):
            trial = best_x + cfg.step_scale * rng.standard_normal(n)
            x, fv, ev, conv = nelder_mead(func, trial, cfg)
            evals += ev
            if fv < best_f:
                best_x, best_f, converged = x, fv, conv
    return best_x, best_f, evals, converged


def mse_objective(e: Expression, X, y):
    """Mean squared error over all rows; any undefined row maps to +inf."""
    evaluator = compile_evaluator(e)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)

    def objective(params):
        resid = evaluator(params, X) - y
        if not np.all(np.isfinite(resid)):
            return np.inf
        return float(np.mean(resid * resid))

    return objective


def fit(e: Expression, d, cfg: FitConfig) -> FitResult:
    """Fit the constants of ``e`` to dataset ``d`` (anything with ``X`` and ``y``).

    The objective is MSE over all rows. Raises NoFiniteObjectiveError when no
    visited parameter vector gives a finite loss, and TooManyConstantsError
    when the expression has more than MAX_CONSTANTS constants.
    """
    k = e.n_constants
    if k > MAX_CONSTANTS:
        raise TooManyConstantsError(f"{k} constants exceeds the cap of {MAX_CONSTANTS}")
    X = np.asarray(d.X, dtype=float)
    y = np.asarray(d.y, dtype=float)
    if len(y) < 1:
        raise ValueError("dataset has no rows")
    objective = mse_objective(e, X, y)
    x0 = np.asarray(e.initial_guess(), dtype=float)
    best_x, best_f, evals, converged = minimize(objective, x0, cfg)
    if not np.isfinite(best_f):
        raise NoFiniteObjectiveError(f"no finite objective found for {e}")
    resid = compile_evaluator(e)(best_x, X) - y
    mse = float(np.mean(resid * resid))
    mae = float(np.mean(np.abs(resid)))
    return FitResult(tuple(float(v) for v in best_x), mse, mae, evals, converged)


def repeat_fit(e: Expression, d, cfg: FitConfig) -> FitResult:
    """``cfg.refits`` independent fits with seeds seed, seed+1, ...; returns the
    one with the lowest MAE (ties: lower MSE, then lower seed index)."""
    best: FitResult | None = None
    failures = 0
    for i in range(cfg.refits):
        try:
            result = fit(e, d, replace(cfg, seed=cfg.seed + i, refits=1))
        except NoFiniteObjectiveError:
            failures += 1
            continue
        if best is None or (result.mae, result.mse) < (best.mae, best.mse):
            best = result
    if best is None:
        raise NoFiniteObjectiveError(f"all {failures} refits failed for {e}")
    return best
