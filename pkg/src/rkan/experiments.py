"""Training harnesses: 1-D regression, Lane-Emden and the Poisson-type elliptic PDE."""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import autodiff as ad
from .autodiff import DivisionError, Tensor, input_derivative, no_grad
from .layers import RKAN_KINDS, build_network
from .optim import Adam, minimize_parameters

TARGETS = {
    "F1": lambda x: x / (1.0 + x * x),
    "F2": lambda x: 1.0 / (1.0 + x * x),
    "F3": lambda x: np.exp(-x * x),
}

# first zeros of the Lane-Emden solutions for w = 0..4
LANE_EMDEN_ROOTS = {
    0: math.sqrt(6.0),
    1: math.pi,
    2: 3.65375374,
    3: 6.89684862,
    4: 14.97154635,
}

STATUSES = ("ok", "diverged", "no-root")
GRADCHECK_TOL = 1e-5


class NoRootError(ValueError):
    """No sign change on the scan grid."""


def mse(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


@dataclass
class NetworkConfig:
    layer: str = "jacobi-rkan"
    degree: int = 2
    den_degree: int = 2
    mapping: str | None = None
    squash: str | None = None
    architecture: tuple = (1, 10, 1)
    mode: str = "activation"

    def __post_init__(self):
        self.architecture = tuple(int(w) for w in self.architecture)
        if len(self.architecture) < 2:
            raise ValueError(f"architecture needs at least 2 widths, got {list(self.architecture)}")
        if self.degree < 0 or self.den_degree < 0:
            raise ValueError(f"degrees must be non-negative, got K={self.degree}, p={self.den_degree}")

    def build(self, seed):
        return build_network(self.architecture, self.layer, self.degree, self.den_degree,
                             self.mapping, self.squash, self.mode, seed)


@dataclass
class OptimizerConfig:
    name: str = "lbfgs"
    epochs: int = 50
    lr: float = 1e-3
    history: int = 10

    def __post_init__(self):
        if self.name not in ("lbfgs", "adam"):
            raise ValueError(f"unknown optimizer {self.name!r}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be non-negative, got {self.epochs}")


@dataclass
class TrainReport:
    experiment: str
    seed: int
    config: dict = field(default_factory=dict)
    loss_trace: list = field(default_factory=list)
    train_mse: float | None = None
    test_mse: float | None = None
    root: float | None = None
    root_err: float | None = None
    max_abs_err: float | None = None
    wall_s: float = 0.0
    status: str = "ok"
    epochs: int = 0

    def numbers_finite(self) -> bool:
        vals = [self.train_mse, self.test_mse, self.root, self.root_err, self.max_abs_err, self.wall_s]
        return all(v is None or math.isfinite(v) for v in vals)


def _finite_or_none(v):
    return float(v) if v is not None and math.isfinite(v) else None


def fit(params, loss_fn: Callable[[], Tensor], opt: OptimizerConfig):
    """Train ``params`` in place; returns ``(status, loss_trace, epochs)``."""
    params = list(params)
    # overflow on a diverging run is detected below, not warned about
    with np.errstate(over="ignore", invalid="ignore"):
        return _fit(params, loss_fn, opt)


def _fit(params, loss_fn, opt):
    if opt.name == "lbfgs":
        res = minimize_parameters(params, loss_fn, opt.epochs, history=opt.history)
        status = "diverged" if res.status == "non-finite" else "ok"
        return status, res.loss_trace, res.epochs
    state = Adam(params, lr=opt.lr)
    trace = []
    for epoch in range(opt.epochs):
        try:
            loss = loss_fn()
        except (FloatingPointError, DivisionError):
            return "diverged", trace, epoch
        value = float(loss.data)
        trace.append(value)
        if not math.isfinite(value):
            return "diverged", trace, epoch
        grads = ad.grad(loss, params)
        try:
            state.step(grads)
        except FloatingPointError:
            return "diverged", trace, epoch
    return "ok", trace, opt.epochs


def _predict(net, x):
    with no_grad():
        return net(Tensor(np.asarray(x, dtype=np.float64).reshape(len(x), -1))).data.ravel()


# ---------------------------------------------------------------- regression

@dataclass
class RegressionTask:
    target: str | Callable = "F1"
    n_train: int = 200
    n_test: int = 100
    domain: tuple = (-10.0, 10.0)
    seed: int = 0

    def function(self):
        if callable(self.target):
            return self.target
        if self.target not in TARGETS:
            raise ValueError(f"unknown target {self.target!r}; expected one of {tuple(TARGETS)}")
        return TARGETS[self.target]

    def streams(self):
        """Independent child seeds for train data, test data and network init."""
        return np.random.SeedSequence(self.seed).spawn(3)


def generate_regression_data(task: RegressionTask):
    f = task.function()
    lo, hi = task.domain
    train_ss, test_ss, _ = task.streams()
    x_train = np.random.default_rng(train_ss).uniform(lo, hi, task.n_train)
    x_test = np.random.default_rng(test_ss).uniform(lo, hi, task.n_test)
    return (x_train, f(x_train)), (x_test, f(x_test))


def train_regression(task: RegressionTask, net_cfg: NetworkConfig | None = None,
                     opt_cfg: OptimizerConfig | None = None) -> TrainReport:
    net_cfg = net_cfg or NetworkConfig()
    opt_cfg = opt_cfg or OptimizerConfig()
    if net_cfg.architecture[0] != 1 or net_cfg.architecture[-1] != 1:
        raise ValueError(f"regression needs a 1-in 1-out network, got {list(net_cfg.architecture)}")
    start = time.perf_counter()
    (x_tr, y_tr), (x_te, y_te) = generate_regression_data(task)
    net = net_cfg.build(task.streams()[2])
    X, Y = Tensor(x_tr.reshape(-1, 1)), Tensor(y_tr.reshape(-1, 1))

    def loss_fn():
        r = net(X) - Y
        return (r * r).mean()

    name = task.target if isinstance(task.target, str) else "custom"
    report = TrainReport("regression", task.seed,
                         config={"target": name, **asdict(net_cfg), **asdict(opt_cfg)})
    try:
        status, trace, epochs = fit(net.parameters(), loss_fn, opt_cfg)
        report.loss_trace, report.epochs = trace, epochs
        if status == "ok":
            report.train_mse = mse(_predict(net, x_tr), y_tr)
            report.test_mse = mse(_predict(net, x_te), y_te)
            if not report.numbers_finite():
                status = "diverged"
    except (FloatingPointError, DivisionError):
        status = "diverged"
    report.status = status
    if status != "ok":
        report.train_mse = report.test_mse = None
    report.wall_s = time.perf_counter() - start
    return report


# ---------------------------------------------------------------- Lane-Emden

@dataclass
class OdeTask:
    w: int = 0
    n_collocation: int = 1500
    domain: tuple = (0.0, 15.0)
    ic_value: float = 1.0
    ic_derivative: float = 0.0

    def __post_init__(self):
        if self.w < 0:
            raise ValueError(f"w must be non-negative, got {self.w}")

    def collocation(self):
        # origin left out: the xi-multiplied residual is regular there but the IC terms cover it
        lo, hi = self.domain
        return np.linspace(lo + (hi - lo) / self.n_collocation, hi, self.n_collocation)


def lane_emden_residual(net, w, points, ic_value=1.0, ic_derivative=0.0, method="jet") -> Tensor:
    """Mean squared ``xi F'' + 2 F' + xi F^w`` plus both initial-condition penalties."""
    if w < 0:
        raise ValueError(f"w must be non-negative, got {w}")
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 1)
    F, d1, d2 = input_derivative(net, pts, 2, method=method)
    xi = Tensor(pts[:, 0])
    source = F ** float(w) if w > 0 else 1.0
    r = xi * d2 + d1 * 2.0 + xi * source
    F0, g0 = input_derivative(net, np.zeros((1, 1)), 1, method=method)
    return (r * r).mean() + ((F0 - ic_value) ** 2).sum() + ((g0 - ic_derivative) ** 2).sum()


def find_first_root(f, domain=(0.0, 15.0), grid_n=10_000, tol=1e-12) -> float:
    """First zero of a scalar function on ``domain``: grid scan, then bisection.

    ``f`` maps a 1-D array of points to a 1-D array of values.
    """
    if grid_n < 2:
        raise ValueError(f"grid_n must be at least 2, got {grid_n}")
    grid = np.linspace(domain[0], domain[1], grid_n)
    vals = np.asarray(f(grid), dtype=np.float64).ravel()
    sign = np.sign(vals)
    for i in range(grid_n):
        if sign[i] == 0:
            return float(grid[i])
        if i + 1 < grid_n and sign[i] * sign[i + 1] < 0:
            lo, hi, f_lo = grid[i], grid[i + 1], vals[i]
            while hi - lo >= tol:
                mid = 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                f_mid = float(np.asarray(f(np.array([mid]))).ravel()[0])
                if f_mid == 0:
                    return float(mid)
                if np.sign(f_mid) == np.sign(f_lo):
                    lo, f_lo = mid, f_mid
                else:
                    hi = mid
            return float(0.5 * (lo + hi))
    raise NoRootError(f"no sign change on [{domain[0]}, {domain[1]}] with {grid_n} points")


def network_root(net, domain=(0.0, 15.0), grid_n=10_000):
    return find_first_root(lambda x: _predict(net, x), domain, grid_n)


def lane_emden_exact(w):
    """Closed-form solution for w in {0, 1}, else None."""
    if w == 0:
        return lambda x: 1.0 - x * x / 6.0
    if w == 1:
        return lambda x: np.sinc(np.asarray(x) / np.pi)
    return None


def solve_lane_emden(w, net_cfg: NetworkConfig | None = None, opt_cfg: OptimizerConfig | None = None,
                     seed=0, task: OdeTask | None = None) -> TrainReport:
    task = task or OdeTask(w)
    if not 0 <= w <= 4:
        raise ValueError(f"w must be in 0..4, got {w}")
    net_cfg = net_cfg or NetworkConfig(degree=6, architecture=(1, 10, 10, 1))
    opt_cfg = opt_cfg or OptimizerConfig(epochs=1000, history=50)
    start = time.perf_counter()
    net = net_cfg.build(seed)
    pts = task.collocation()
    report = TrainReport("lane-emden", seed, config={"w": w, **asdict(net_cfg), **asdict(opt_cfg)})

    def loss_fn():
        return lane_emden_residual(net, w, pts, task.ic_value, task.ic_derivative)

    try:
        status, trace, epochs = fit(net.parameters(), loss_fn, opt_cfg)
        report.loss_trace, report.epochs = trace, epochs
        if status == "ok":
            report.train_mse = _finite_or_none(trace[-1])
            exact = lane_emden_exact(w)
            if exact is not None:
                report.test_mse = mse(_predict(net, pts), exact(pts))
            try:
                report.root = network_root(net, task.domain)
                report.root_err = abs(report.root - LANE_EMDEN_ROOTS[w])
            except NoRootError:
                status = "no-root"
            if not report.numbers_finite():
                status = "diverged"
    except (FloatingPointError, DivisionError):
        status = "diverged"
    report.status = status
    report.wall_s = time.perf_counter() - start
    return report


# ---------------------------------------------------------------- elliptic PDE

@dataclass
class PdeTask:
    n: int = 50
    eval_n: int = 101
    boundary_value: float = 0.0

    def grid(self, n=None):
        g = np.linspace(0.0, 1.0, n or self.n)
        x, y = np.meshgrid(g, g, indexing="ij")
        return np.column_stack([x.ravel(), y.ravel()])

    def split(self):
        """Training grid as (interior points, boundary points)."""
        pts = self.grid()
        on_edge = np.any((pts == 0.0) | (pts == 1.0), axis=1)
        return pts[~on_edge], pts[on_edge]


def pde_source(pts):
    pts = np.asarray(pts)
    return np.sin(np.pi * pts[:, 0]) * np.sin(np.pi * pts[:, 1])


def pde_exact(pts):
    return -pde_source(pts) / (2.0 * np.pi ** 2)


def elliptic_pde_loss(net, interior, boundary, boundary_value=0.0, method="jet") -> Tensor:
    """Mean squared ``F_xx + F_yy - sin(pi x) sin(pi y)`` plus mean squared boundary value."""
    interior = np.asarray(interior, dtype=np.float64)
    loss = Tensor(0.0)
    if len(interior):
        _, _, fxx = input_derivative(net, interior, 2, axis=0, method=method)
        _, _, fyy = input_derivative(net, interior, 2, axis=1, method=method)
        r = fxx + fyy - pde_source(interior)
        loss = (r * r).mean()
    boundary = np.asarray(boundary, dtype=np.float64)
    if len(boundary):
        fb = net(Tensor(boundary)).reshape(-1) - boundary_value
        loss = loss + (fb * fb).mean()
    return loss


def solve_elliptic_pde(net_cfg: NetworkConfig | None = None, opt_cfg: OptimizerConfig | None = None,
                       seed=0, task: PdeTask | None = None) -> TrainReport:
    task = task or PdeTask()
    net_cfg = net_cfg or NetworkConfig(degree=4, architecture=(2, 10, 10, 1))
    opt_cfg = opt_cfg or OptimizerConfig(epochs=500)
    start = time.perf_counter()
    net = net_cfg.build(seed)
    interior, boundary = task.split()
    report = TrainReport("elliptic-pde", seed,
                         config={"train_grid": (task.n, task.n), "eval_grid": (task.eval_n, task.eval_n),
                                 **asdict(net_cfg), **asdict(opt_cfg)})

    def loss_fn():
        return elliptic_pde_loss(net, interior, boundary, task.boundary_value)

    try:
        status, trace, epochs = fit(net.parameters(), loss_fn, opt_cfg)
        report.loss_trace, report.epochs = trace, epochs
        if status == "ok":
            report.train_mse = _finite_or_none(trace[-1])
            evaluation = task.grid(task.eval_n)
            pred, exact = _predict(net, evaluation), pde_exact(evaluation)
            report.max_abs_err = float(np.max(np.abs(pred - exact)))
            report.test_mse = mse(pred, exact)
            if not report.numbers_finite():
                status = "diverged"
    except (FloatingPointError, DivisionError):
        status = "diverged"
    report.status = status
    report.wall_s = time.perf_counter() - start
    return report


# ---------------------------------------------------------------- gradient check

def relative_error(a, b, floor=1e-12) -> float:
    """Norm-wise relative difference of two arrays."""
    a, b = np.ravel(a), np.ravel(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), floor))


def finite_difference_grads(params, loss_fn, h=1e-5):
    out = []
    for p in params:
        base = np.array(p.data, dtype=np.float64)
        g = np.zeros(base.size)
        for i in range(base.size):
            bumped = base.reshape(-1).copy()
            bumped[i] += h
            p.data = bumped.reshape(base.shape)
            f_plus = float(loss_fn().data)
            bumped[i] -= 2.0 * h
            p.data = bumped.reshape(base.shape)
            f_minus = float(loss_fn().data)
            g[i] = (f_plus - f_minus) / (2.0 * h)
        p.data = base
        g = g.reshape(base.shape)
        out.append(g)
    return out


def gradient_check(layer_kind, seed=0, as_activation=False, in_dim=2, out_dim=3, degree=3,
                   den_degree=2, n_samples=5, h=1e-5) -> float:
    """Largest per-parameter relative error between reverse-mode and central differences."""
    from .layers import init_layer
    if layer_kind not in RKAN_KINDS:
        raise ValueError(f"gradient check covers rKAN kinds only, got {layer_kind!r}")
    rng = np.random.default_rng(seed)
    layer = init_layer(layer_kind, None if as_activation else in_dim, None if as_activation else out_dim,
                       degree, den_degree, seed=seed, as_activation=as_activation)
    # move every parameter off its structured initial value
    for p in layer.parameters():
        p.data = np.asarray(p.data + rng.uniform(-0.3, 0.3, p.data.shape))
    x = Tensor(rng.uniform(-1.5, 1.5, (n_samples, in_dim)))
    weights = rng.standard_normal((n_samples, in_dim if as_activation else out_dim))

    def loss_fn():
        y = layer(x)
        return (y * y).sum() * 0.5 + (y * weights).sum()

    params = layer.parameters()
    analytic = ad.grad(loss_fn(), params)
    with no_grad():
        numeric = finite_difference_grads(params, loss_fn, h)
    return max(relative_error(a.data, n) for a, n in zip(analytic, numeric))


def run_gradcheck(seed=0):
    """``{(kind, mode): max relative error}`` over every rKAN family in both modes."""
    return {(kind, mode): gradient_check(kind, seed, as_activation=(mode == "activation"))
            for kind in RKAN_KINDS for mode in ("kan", "activation")}


# ---------------------------------------------------------------- pole safety

def pole_stress_run(seed=0, epochs=200, perturbation=0.5, lr=1e-2, mode="activation"):
    """Adam on F1 with a Pade network whose denominators start far from constant.

    Returns the list of per-epoch losses; a non-finite entry means a pole escaped.
    """
    task = RegressionTask("F1", seed=seed)
    (x_tr, y_tr), _ = generate_regression_data(task)
    net = NetworkConfig("pade-rkan", 3, 2, architecture=(1, 10, 1), mode=mode).build(task.streams()[2])
    rng = np.random.default_rng(seed)
    for layer in net.layers:
        if hasattr(layer, "den_coeffs"):
            layer.den_coeffs.data = layer.den_coeffs.data + rng.uniform(
                -perturbation, perturbation, layer.den_coeffs.data.shape)
    X, Y = Tensor(x_tr.reshape(-1, 1)), Tensor(y_tr.reshape(-1, 1))
    params = net.parameters()
    state = Adam(params, lr=lr)
    losses = []
    for _ in range(epochs):
        r = net(X) - Y
        loss = (r * r).mean()
        losses.append(float(loss.data))
        state.step(ad.grad(loss, params))
    return losses
