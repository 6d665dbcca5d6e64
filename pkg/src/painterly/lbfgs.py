"""Limited-memory BFGS with a monotone backtracking line search.

Two-loop recursion over the most recent curvature pairs, Armijo
sufficient-decrease backtracking (halving), and an optional activity
mask that freezes coordinates exactly.  The loss trace is non-increasing
by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ARMIJO_C = 1e-4
CURVATURE_EPS = 1e-10
MIN_STEP = 1e-20


class OptimizationError(RuntimeError):
    pass


@dataclass
class OptimizeReport:
    iterations_run: int
    initial_loss: float
    final_loss: float
    trace: list[float]
    reason: str  # max-iters | gradient-tol | line-search-failure | non-finite


def _two_loop(grad, s_list, y_list):
    q = grad.copy()
    alphas = []
    for s, y in zip(reversed(s_list), reversed(y_list)):
        rho = 1.0 / float(y @ s)
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    if s_list:
        s, y = s_list[-1], y_list[-1]
        q *= float(s @ y) / float(y @ y)
    for (s, y), a in zip(zip(s_list, y_list), reversed(alphas)):
        rho = 1.0 / float(y @ s)
        b = rho * float(y @ q)
        q += (a - b) * s
    return q


def lbfgs_minimize(objective, x0, max_iters=1000, history=10, grad_tol=1e-7,
                   active_mask=None, callback=None):
    """Minimize objective(x) -> (loss, grad) starting from the flat x0.

    Coordinates where ``active_mask`` is 0 are frozen: their gradient is
    zeroed and they are never updated, so they stay bit-identical to x0.
    Returns (x, OptimizeReport); the iterate is always finite.
    """
    x = np.array(x0, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise OptimizationError("x0 contains non-finite values")
    mask = None
    if active_mask is not None:
        mask = np.asarray(active_mask).astype(bool).ravel()
        if mask.shape != x.shape:
            raise OptimizationError("active_mask shape does not match x0")

    def evaluate(xv):
        loss, grad = objective(xv)
        grad = np.asarray(grad, dtype=np.float64).ravel()
        if mask is not None:
            grad = np.where(mask, grad, 0.0)
        return float(loss), grad

    loss, grad = evaluate(x)
    trace = [loss]
    if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
        return x, OptimizeReport(0, loss, loss, trace, "non-finite")

    s_list: list[np.ndarray] = []
    y_list: list[np.ndarray] = []
    reason = "max-iters"
    iters = 0

    for it in range(max_iters):
        gmax = float(np.max(np.abs(grad))) if grad.size else 0.0
        if gmax < grad_tol:
            reason = "gradient-tol"
            break

        direction = -_two_loop(grad, s_list, y_list)
        descent = float(grad @ direction)
        if descent >= 0.0:
            direction = -grad
            descent = float(grad @ direction)

        if s_list:
            step = 1.0
        else:
            step = min(1.0, 1.0 / max(float(np.sum(np.abs(grad))), 1e-12))

        accepted = False
        while step >= MIN_STEP:
            x_new = x + step * direction
            if mask is not None:
                x_new = np.where(mask, x_new, x)  # frozen stay bit-identical
            loss_new, grad_new = evaluate(x_new)
            if np.isfinite(loss_new) and np.all(np.isfinite(grad_new)) \
                    and loss_new <= loss + ARMIJO_C * step * descent:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            reason = "line-search-failure"
            break

        s = x_new - x
        y = grad_new - grad
        if float(y @ s) > CURVATURE_EPS:
            s_list.append(s)
            y_list.append(y)
            if len(s_list) > history:
                s_list.pop(0)
                y_list.pop(0)

        x, loss, grad = x_new, loss_new, grad_new
        trace.append(loss)
        iters = it + 1
        if callback is not None:
            callback(iters, loss)

    return x, OptimizeReport(iters, trace[0], trace[-1], trace, reason)
