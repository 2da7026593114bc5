"""Limited-memory BFGS with a projected backtracking line search.

Small and self-contained on purpose: trial points where the objective cannot
be evaluated (singular reduced Laplacian) are treated as rejected steps, and
a simple lower bound keeps iterates away from zero susceptance.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["LbfgsResult", "lbfgs"]


@dataclass
class LbfgsResult:
    x: np.ndarray
    fun: float
    grad_norm: float
    n_iter: int
    n_fev: int
    converged: bool
    message: str
    history: list[float] = field(default_factory=list)


def _two_loop(g, s_hist, y_hist, diag=None):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        rho = 1.0 / (y @ s)
        a = rho * (s @ q)
        q -= a * y
        alphas.append((rho, a))
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        if diag is None:
            q *= (s @ y) / (y @ y)
        else:
            q *= diag * ((s @ y) / (y @ (diag * y)))
    for (s, y), (rho, a) in zip(zip(s_hist, y_hist), reversed(alphas)):
        beta = rho * (y @ q)
        q += (a - beta) * s
    return -q


def _projected_grad(x, g, lower):
    if lower is None:
        return g
    return x - np.maximum(x - g, lower)


def lbfgs(
    fun_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    x0: np.ndarray,
    lower: float | None = None,
    memory: int = 10,
    max_iter: int = 500,
    gtol: float = 1e-8,
    c1: float = 1e-4,
    max_backtracks: int = 60,
    rejected: tuple[type[BaseException], ...] = (np.linalg.LinAlgError,),
    diag_scaling: bool = False,
) -> LbfgsResult:
    """Minimize ``fun_grad`` from ``x0``.

    ``fun_grad`` returns the objective and its gradient. Exceptions listed in
    ``rejected`` raised at a trial point shrink the step instead of aborting.
    Stops when the projected gradient 2-norm drops below ``gtol``.

    With ``diag_scaling`` the initial inverse Hessian is ``diag(x**2)``
    (rescaled each iteration), which suits positive variables spread over
    several orders of magnitude.
    """
    x = np.array(x0, dtype=float)
    if lower is not None:
        x = np.maximum(x, lower)
    f, g = fun_grad(x)
    n_fev = 1
    history = [f]
    s_hist: deque = deque(maxlen=memory)
    y_hist: deque = deque(maxlen=memory)

    pg_norm = float(np.linalg.norm(_projected_grad(x, g, lower)))
    it = 0
    message = "converged"
    while pg_norm >= gtol:
        if it >= max_iter:
            message = "maximum iterations reached"
            break
        diag = np.maximum(np.abs(x), 1e-6) ** 2 if diag_scaling else None
        d = _two_loop(g, list(s_hist), list(y_hist), diag)
        if not s_hist or g @ d >= 0:
            s_hist.clear()
            y_hist.clear()
            d = -g * (0.01 * max(1.0, np.linalg.norm(x)) / np.linalg.norm(g))

        step = 1.0
        accepted = False
        for _ in range(max_backtracks):
            trial = x + step * d
            if lower is not None:
                trial = np.maximum(trial, lower)
            move = trial - x
            slope = g @ move
            if slope >= 0 or not np.any(move):
                step *= 0.5
                continue
            try:
                f_new, g_new = fun_grad(trial)
            except rejected:
                n_fev += 1
                step *= 0.5
                continue
            n_fev += 1
            if np.isfinite(f_new) and f_new <= f + c1 * slope:
                accepted = True
                break
            step *= 0.5

        if not accepted:
            if s_hist:
                # stale curvature pairs can give a poor direction; retry as steepest descent
                s_hist.clear()
                y_hist.clear()
                continue
            message = "line search failed"
            break

        s, y = trial - x, g_new - g
        if s @ y > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
        x, f, g = trial, f_new, g_new
        history.append(f)
        it += 1
        pg_norm = float(np.linalg.norm(_projected_grad(x, g, lower)))

    return LbfgsResult(x=x, fun=float(f), grad_norm=pg_norm, n_iter=it, n_fev=n_fev,
                       converged=pg_norm < gtol, message=message if pg_norm >= gtol else "converged",
                       history=history)
