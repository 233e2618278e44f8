"""Adam and full-batch L-BFGS with a strong-Wolfe line search."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .autodiff import DivisionError, Tensor, grad
from .layers import flat_parameters, set_flat_parameters


class Adam:
    """Bias-corrected Adam over a fixed, ordered list of parameter tensors."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self, grads):
        """Apply one update.  ``grads`` is a list aligned with ``params`` or a dict keyed by them."""
        if isinstance(grads, dict):
            grads = [grads[p] for p in self.params]
        if len(grads) != len(self.params):
            raise ValueError(f"got {len(grads)} gradients for {len(self.params)} parameters")
        for i, g in enumerate(grads):
            g = g.data if isinstance(g, Tensor) else np.asarray(g)
            if g.shape != self.params[i].data.shape:
                raise ValueError(f"gradient {i} has shape {g.shape}, parameter has {self.params[i].data.shape}")
            if not np.all(np.isfinite(g)):
                name = self.params[i].name or f"#{i}"
                raise FloatingPointError(f"non-finite gradient for parameter {name}")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for i, (p, g) in enumerate(zip(self.params, grads)):
            g = g.data if isinstance(g, Tensor) else np.asarray(g, dtype=np.float64)
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            update = self.lr * (self.m[i] / bc1) / (np.sqrt(self.v[i] / bc2) + self.eps)
            p.data = p.data - update


def adam_step(state: Adam, params, grads):
    """Functional alias: ``state`` must have been built for ``params``."""
    if [id(p) for p in params] != [id(p) for p in state.params]:
        raise ValueError("parameters do not match the optimizer state")
    state.step(grads)
    return params


def make_objective(params, loss_fn):
    """Wrap ``loss_fn() -> Tensor`` as ``f(vec) -> (loss, grad_vec)`` over ``params``."""
    params = list(params)

    def objective(vec):
        set_flat_parameters(params, vec)
        try:
            loss = loss_fn()
        except (FloatingPointError, DivisionError):
            # treated by the line search as an overshoot
            return math.inf, np.zeros_like(vec)
        gs = grad(loss, params)
        return float(loss.data), np.concatenate([g.data.reshape(-1) for g in gs])

    return objective


@dataclass
class LbfgsResult:
    x: np.ndarray
    loss_trace: list = field(default_factory=list)
    status: str = "max-epochs"
    epochs: int = 0
    n_evals: int = 0

    @property
    def loss(self):
        return self.loss_trace[-1]


def _cubic_interpolate(x1, f1, g1, x2, f2, g2, bounds=None):
    if bounds is not None:
        lo, hi = bounds
    else:
        lo, hi = (x1, x2) if x1 <= x2 else (x2, x1)
    if not all(math.isfinite(v) for v in (f1, f2, g1, g2)) or x1 == x2:
        return (lo + hi) / 2.0
    d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2)
    d2_sq = d1 * d1 - g1 * g2
    if d2_sq < 0:
        return (lo + hi) / 2.0
    d2 = math.sqrt(d2_sq)
    if x1 <= x2:
        denom = g2 - g1 + 2.0 * d2
        pos = x2 - (x2 - x1) * ((g2 + d2 - d1) / denom) if denom != 0 else (lo + hi) / 2.0
    else:
        denom = g1 - g2 + 2.0 * d2
        pos = x1 - (x1 - x2) * ((g1 + d2 - d1) / denom) if denom != 0 else (lo + hi) / 2.0
    if not math.isfinite(pos):
        return (lo + hi) / 2.0
    return min(max(pos, lo), hi)


def strong_wolfe(fun, x, t, d, f, g, gtd, c1=1e-4, c2=0.9, max_ls=25, tol_change=1e-12):
    """Bracketing/zoom line search along ``d`` from ``x``.

    Returns ``(f_new, g_new, t, n_evals, satisfied)``.  When the conditions are
    not met within ``max_ls`` trials the best bracket end is returned with
    ``satisfied=False``.
    """
    d_norm = np.abs(d).max()
    n_evals = 0

    def evaluate(step):
        nonlocal n_evals
        n_evals += 1
        fv, gv = fun(x + step * d)
        if not math.isfinite(fv) or not np.all(np.isfinite(gv)):
            return math.inf, np.zeros_like(gv), math.inf
        return fv, gv, float(gv @ d)

    f_new, g_new, gtd_new = evaluate(t)
    t_prev, f_prev, g_prev, gtd_prev = 0.0, f, g, gtd
    done = False
    ls_iter = 0
    bracket = None
    while ls_iter < max_ls:
        if f_new > f + c1 * t * gtd or (ls_iter > 1 and f_new >= f_prev):
            bracket = [t_prev, t], [f_prev, f_new], [g_prev, g_new], [gtd_prev, gtd_new]
            break
        if abs(gtd_new) <= -c2 * gtd:
            bracket = [t], [f_new], [g_new], [gtd_new]
            done = True
            break
        if gtd_new >= 0:
            bracket = [t_prev, t], [f_prev, f_new], [g_prev, g_new], [gtd_prev, gtd_new]
            break
        lo_step, hi_step = t + 0.01 * (t - t_prev), t * 10.0
        t_next = _cubic_interpolate(t_prev, f_prev, gtd_prev, t, f_new, gtd_new, (lo_step, hi_step))
        t_prev, f_prev, g_prev, gtd_prev = t, f_new, g_new, gtd_new
        t = t_next
        f_new, g_new, gtd_new = evaluate(t)
        ls_iter += 1
    if bracket is None:
        bracket = [0.0, t], [f, f_new], [g, g_new], [gtd, gtd_new]
    ts, fs, gs, gtds = (list(b) for b in bracket)

    insuf = False
    low, high = (0, 1) if len(fs) == 1 or fs[0] <= fs[-1] else (1, 0)
    while not done and ls_iter < max_ls and len(ts) == 2:
        if abs(ts[1] - ts[0]) * d_norm < tol_change:
            break
        t = _cubic_interpolate(ts[0], fs[0], gtds[0], ts[1], fs[1], gtds[1])
        hi_t, lo_t = max(ts), min(ts)
        eps = 0.1 * (hi_t - lo_t)
        if min(hi_t - t, t - lo_t) < eps:
            if insuf or t >= hi_t or t <= lo_t:
                t = hi_t - eps if abs(t - hi_t) < abs(t - lo_t) else lo_t + eps
                insuf = False
            else:
                insuf = True
        else:
            insuf = False
        f_new, g_new, gtd_new = evaluate(t)
        ls_iter += 1
        if f_new > f + c1 * t * gtd or f_new >= fs[low]:
            ts[high], fs[high], gs[high], gtds[high] = t, f_new, g_new, gtd_new
            low, high = (0, 1) if fs[0] <= fs[1] else (1, 0)
        else:
            if abs(gtd_new) <= -c2 * gtd:
                done = True
            elif gtd_new * (ts[high] - ts[low]) >= 0:
                ts[high], fs[high], gs[high], gtds[high] = ts[low], fs[low], gs[low], gtds[low]
            ts[low], fs[low], gs[low], gtds[low] = t, f_new, g_new, gtd_new
    if len(ts) == 1:
        low = 0
    return fs[low], gs[low], ts[low], n_evals, done


def _two_loop(g, s_hist, y_hist):
    q = -g.copy()
    rhos = [1.0 / float(y @ s) for s, y in zip(s_hist, y_hist)]
    alphas = []
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rhos)):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * y
    s, y = s_hist[-1], y_hist[-1]
    q *= float(s @ y) / float(y @ y)
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rhos), reversed(alphas)):
        b = rho * float(y @ q)
        q += (a - b) * s
    return q


def lbfgs_minimize(fun, x0, max_epochs=50, history=10, c1=1e-4, c2=0.9, max_ls=25,
                   tol_grad=1e-12, fallback_step=1e-3, callback=None) -> LbfgsResult:
    """Minimise ``fun(x) -> (loss, grad)`` from ``x0``.

    One epoch is one accepted step; the returned loss trace starts with the
    initial loss and only ever decreases.  Status is one of ``"converged"``
    (gradient below ``tol_grad``), ``"max-epochs"``, ``"stalled"`` (line
    search and the gradient fallback both failed) or ``"non-finite"``.
    """
    x = np.array(x0, dtype=np.float64)
    f, g = fun(x)
    result = LbfgsResult(x=x, loss_trace=[float(f)], n_evals=1)
    if not math.isfinite(f) or not np.all(np.isfinite(g)):
        result.status = "non-finite"
        return result
    s_hist, y_hist = deque(maxlen=history), deque(maxlen=history)
    while result.epochs < max_epochs:
        if np.abs(g).max() <= tol_grad:
            result.status = "converged"
            break
        if s_hist:
            d = _two_loop(g, s_hist, y_hist)
            t = 1.0
        else:
            d = -g
            t = min(1.0, 1.0 / np.abs(g).sum())
        gtd = float(g @ d)
        if gtd >= 0:
            # history went stale; restart from steepest descent
            s_hist.clear()
            y_hist.clear()
            d, gtd = -g, -float(g @ g)
            t = min(1.0, 1.0 / np.abs(g).sum())
        f_new, g_new, t, n, _ = strong_wolfe(fun, x, t, d, f, g, gtd, c1, c2, max_ls)
        result.n_evals += n
        if not f_new < f:
            # one steepest-descent attempt before giving up
            x_try = x - fallback_step * g
            f_new, g_new = fun(x_try)
            result.n_evals += 1
            if not (math.isfinite(f_new) and f_new < f):
                result.status = "stalled" if math.isfinite(f_new) else "non-finite"
                break
            step = x_try - x
            s_hist.clear()
            y_hist.clear()
        else:
            step = t * d
        y = g_new - g
        if float(step @ y) > 1e-10:
            s_hist.append(step)
            y_hist.append(y)
        x = x + step
        f, g = f_new, g_new
        result.epochs += 1
        result.loss_trace.append(float(f))
        if callback is not None:
            callback(result.epochs, f, x)
    else:
        result.status = "max-epochs"
    if result.status == "max-epochs" and np.abs(g).max() <= tol_grad:
        result.status = "converged"
    result.x = x
    return result


def minimize_parameters(params, loss_fn, max_epochs=50, **kwargs) -> LbfgsResult:
    """Run :func:`lbfgs_minimize` over tensor ``params`` and leave them at the result."""
    params = list(params)
    objective = make_objective(params, loss_fn)
    res = lbfgs_minimize(objective, flat_parameters(params), max_epochs, **kwargs)
    set_flat_parameters(params, res.x)
    return res
