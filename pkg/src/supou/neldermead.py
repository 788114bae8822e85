"""Nelder-Mead simplex minimizer for low-dimensional, bound-free problems.

Standard reflection/expansion/contraction/shrink moves with the usual
coefficients (1, 2, 0.5, 0.5).  Box constraints are handled by the caller
through a smooth transform, so the search space here is unconstrained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class NelderMeadResult:
    x: np.ndarray
    fx: float
    iterations: int
    n_evals: int
    converged: bool


def _diameter(simplex: np.ndarray) -> float:
    d = 0.0
    for i in range(len(simplex)):
        for j in range(i + 1, len(simplex)):
            d = max(d, float(np.linalg.norm(simplex[i] - simplex[j])))
    return d


def minimize(
    f,
    x0: np.ndarray,
    step: float = 0.6,
    diam_tol: float = 1e-3,
    max_iter: int = 300,
    f_stop: float | None = None,
) -> NelderMeadResult:
    """Minimize f from x0.

    Stops when the simplex diameter drops below diam_tol or, when f_stop is
    set, as soon as the best vertex value is <= f_stop (discrepancy-style
    early stopping for objectives whose minimum below f_stop is noise).
    step sets the initial simplex size (x0 plus step along each axis).
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    simplex = np.vstack([x0] + [x0 + step * np.eye(n)[i] for i in range(n)])
    values = np.array([f(v) for v in simplex])
    n_evals = n + 1
    iterations = 0
    converged = False

    while iterations < max_iter:
        order = np.argsort(values, kind="stable")
        simplex = simplex[order]
        values = values[order]
        if _diameter(simplex) < diam_tol:
            converged = True
            break
        if f_stop is not None and values[0] <= f_stop:
            converged = True
            break
        iterations += 1

        centroid = simplex[:-1].mean(axis=0)
        worst = simplex[-1]
        reflected = centroid + (centroid - worst)
        f_r = f(reflected)
        n_evals += 1

        if f_r < values[0]:
            expanded = centroid + 2.0 * (centroid - worst)
            f_e = f(expanded)
            n_evals += 1
            if f_e < f_r:
                simplex[-1], values[-1] = expanded, f_e
            else:
                simplex[-1], values[-1] = reflected, f_r
        elif f_r < values[-2]:
            simplex[-1], values[-1] = reflected, f_r
        else:
            if f_r < values[-1]:
                contracted = centroid + 0.5 * (reflected - centroid)
            else:
                contracted = centroid + 0.5 * (worst - centroid)
            f_c = f(contracted)
            n_evals += 1
            if f_c < min(f_r, values[-1]):
                simplex[-1], values[-1] = contracted, f_c
            else:
                # shrink toward the best vertex
                for i in range(1, n + 1):
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    values[i] = f(simplex[i])
                n_evals += n

    best = int(np.argmin(values))
    return NelderMeadResult(
        x=simplex[best].copy(),
        fx=float(values[best]),
        iterations=iterations,
        n_evals=n_evals,
        converged=converged,
    )
