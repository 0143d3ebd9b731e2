"""Limited-memory quasi-Newton minimization, optionally projected.

One solver covers both uses in this package: smooth MAP fitting (identity
projection, infinity-norm gradient stopping) and the cone-constrained
group-sparse problems (per-group projection after every trial point, a
caller-supplied stationarity residual for stopping). The line search is
backtracking with an Armijo sufficient-decrease test evaluated along the
projection arc; if the quasi-Newton direction fails to produce decrease the
iteration falls back to a projected gradient step, which keeps the objective
monotone.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

_ARMIJO = 1e-4
_MAX_BACKTRACKS = 60
_CURVATURE_SKIP = 1e-10


@dataclass
class OptResult:
    x: np.ndarray
    fun: float
    residual: float
    iterations: int
    evaluations: int
    converged: bool
    message: str


def _two_loop(g: np.ndarray, pairs, gamma: float) -> np.ndarray:
    q = g.copy()
    alphas = []
    for s, y, rho in reversed(pairs):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    q *= gamma
    for (s, y, rho), a in zip(pairs, reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return q


def minimize(fun_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
             x0: np.ndarray,
             tol: float = 1e-6,
             max_iter: int = 500,
             memory: int = 10,
             project: Callable[[np.ndarray], np.ndarray] | None = None,
             residual: Callable[[np.ndarray, np.ndarray], float] | None = None) -> OptResult:
    """Minimize a smooth function, optionally over a projectable convex set.

    ``residual(x, g)`` is the optimality measure compared against ``tol``;
    it defaults to the infinity norm of the gradient, which is only correct
    for the unconstrained case.
    """
    if project is None:
        project = lambda z: z
    if residual is None:
        residual = lambda _x, g: float(np.max(np.abs(g))) if g.size else 0.0

    x = project(np.asarray(x0, np.float64).copy())
    f, g = fun_grad(x)
    evals = 1
    pairs: deque = deque(maxlen=memory)
    gamma = 1.0
    message = "max iterations reached"
    converged = False
    it = 0

    for it in range(1, max_iter + 1):
        res = residual(x, g)
        if res <= tol:
            converged = True
            message = "converged"
            it -= 1
            break

        if pairs:
            d = -_two_loop(g, pairs, gamma)
            t0 = 1.0
        else:
            d = -g
            t0 = min(1.0, 1.0 / max(float(np.sum(np.abs(g))), 1e-12))

        accepted = False
        x_new = x
        f_new, g_new = f, g
        for attempt in range(2):
            t = t0
            for _ in range(_MAX_BACKTRACKS):
                x_try = project(x + t * d)
                delta = x_try - x
                gtd = float(g @ delta)
                if gtd < 0:
                    f_try, g_try = fun_grad(x_try)
                    evals += 1
                    if np.isfinite(f_try) and f_try <= f + _ARMIJO * gtd:
                        x_new, f_new, g_new = x_try, f_try, g_try
                        accepted = True
                        break
                t *= 0.5
                if t * float(np.max(np.abs(d), initial=0.0)) < 1e-20:
                    break
            if accepted or attempt == 1:
                break
            # quasi-Newton direction failed; retry with projected gradient
            d = -g
            t0 = min(1.0, 1.0 / max(float(np.sum(np.abs(g))), 1e-12))

        if not accepted:
            message = "line search stalled"
            break

        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > _CURVATURE_SKIP * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            pairs.append((s, y, 1.0 / sy))
            gamma = sy / float(y @ y)
        x, f, g = x_new, f_new, g_new
    else:
        it = max_iter

    final_res = residual(x, g)
    if final_res <= tol:
        converged = True
        message = "converged"
    return OptResult(x=x, fun=f, residual=final_res, iterations=it,
                     evaluations=evals, converged=converged, message=message)


def minimize_proximal(fun_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
                      x0: np.ndarray,
                      prox: Callable[[np.ndarray, float], np.ndarray],
                      penalty: Callable[[np.ndarray], float],
                      residual: Callable[[np.ndarray, np.ndarray], float],
                      tol: float = 1e-6,
                      max_iter: int = 2000) -> OptResult:
    """Proximal gradient with spectral (Barzilai-Borwein) steps.

    Minimizes smooth ``fun_grad`` plus the nonsmooth ``penalty`` whose
    scaled proximal map is ``prox(v, t)``. Steps backtrack until the
    quadratic majorization test holds,

        f(x+) <= f(x) + <grad, x+ - x> + ||x+ - x||^2 / (2t),

    which makes the total objective monotonically nonincreasing.
    ``residual(x, grad)`` is the stationarity measure compared to ``tol``.
    """
    x = np.asarray(x0, np.float64).copy()
    f, g = fun_grad(x)
    evals = 1
    t = 1.0 / max(float(np.max(np.abs(g), initial=0.0)), 1.0)
    message = "max iterations reached"
    converged = False
    it = 0

    for it in range(1, max_iter + 1):
        res = residual(x, g)
        if res <= tol:
            converged = True
            message = "converged"
            it -= 1
            break

        accepted = False
        step = t
        for _ in range(_MAX_BACKTRACKS):
            x_new = prox(x - step * g, step)
            delta = x_new - x
            dn2 = float(delta @ delta)
            if dn2 == 0.0:
                break
            f_new, g_new = fun_grad(x_new)
            evals += 1
            if np.isfinite(f_new) and f_new <= f + float(g @ delta) + dn2 / (2.0 * step):
                accepted = True
                break
            step *= 0.5
        if not accepted:
            message = "proximal step stalled"
            break

        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 0:
            t = min(max(float(s @ s) / sy, 1e-10), 1e10)
        else:
            t = min(step * 2.0, 1e10)
        x, f, g = x_new, f_new, g_new
    else:
        it = max_iter

    final_res = residual(x, g)
    if final_res <= tol:
        converged = True
        message = "converged"
    return OptResult(x=x, fun=f + penalty(x), residual=final_res, iterations=it,
                     evaluations=evals, converged=converged, message=message)
