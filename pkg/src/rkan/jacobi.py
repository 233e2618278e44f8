"""Jacobi polynomials with trainable, constrained alpha and beta."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, as_tensor, elu, softplus, stack

KAPPA = 1.0


def elu_constrain(raw, kappa=KAPPA):
    """Map an unconstrained value into ``(-kappa, inf)``.

    Floats in, float out; tensors in, differentiable tensor out.
    """
    if kappa <= 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    # kappa*expm1(raw) rounds to exactly -kappa below raw ~ -37; keep the bound strict
    floor = np.nextafter(-kappa, 0.0)
    if isinstance(raw, Tensor):
        out = elu(raw, kappa)
        low = out.data < floor
        if low.any():
            out = out + Tensor(np.where(low, floor - out.data, 0.0))
        return out
    raw = float(raw)
    return raw if raw > 0 else max(kappa * math.expm1(raw), float(floor))


def softplus_constrain(raw):
    """``log(1 + e^raw)``, strictly positive, overflow-safe."""
    if isinstance(raw, Tensor):
        return softplus(raw)
    raw = float(raw)
    return max(raw, 0.0) + math.log1p(math.exp(-abs(raw)))


def inverse_elu(value, kappa=KAPPA):
    if value <= -kappa:
        raise ValueError(f"value must exceed {-kappa}, got {value}")
    return value if value > 0 else math.log1p(value / kappa)


def inverse_softplus(value):
    if value <= 0:
        raise ValueError(f"value must be positive, got {value}")
    # log(e^v - 1) = v + log(1 - e^-v)
    return value + math.log(-math.expm1(-value))


def jacobi_explicit(n, alpha, beta, xi):
    """Slow reference evaluation of J_n^(alpha,beta)(xi) from the Gamma-function sum.

    Kept as a test oracle only.  The Gamma ratios are expanded into finite
    products and the alternating sum is accumulated in extended precision,
    since float64 cancellation costs about eight digits by n = 10.
    """
    if alpha <= -1 or beta <= -1:
        raise ValueError(f"alpha and beta must exceed -1, got alpha={alpha}, beta={beta}")
    if n < 0:
        raise ValueError(f"degree must be non-negative, got {n}")
    xi = np.asarray(xi, dtype=np.float64)
    if n == 0:
        return np.ones_like(xi) if xi.ndim else 1.0
    ld = np.longdouble
    a, ab = ld(alpha), ld(alpha) + ld(beta)
    t = (xi.astype(ld) - 1) / 2
    total = np.zeros_like(t)
    for m in range(n + 1):
        # Gamma(a+n+1)/Gamma(a+m+1) and Gamma(ab+n+m+1)/Gamma(ab+n+1)
        upper = np.prod([a + j for j in range(m + 1, n + 1)], dtype=ld)
        rising = np.prod([ab + n + j for j in range(1, m + 1)], dtype=ld)
        coef = ld(math.comb(n, m)) / ld(math.factorial(n)) * upper * rising
        total = total + coef * t ** m
    total = total.astype(np.float64)
    return total if xi.ndim else float(total)


@dataclass
class JacobiBasisConfig:
    """Degree bound plus the raw (unconstrained) trainable alpha and beta."""

    degree: int
    alpha_raw: Tensor = field(default_factory=lambda: Tensor(1.0, requires_grad=True))
    beta_raw: Tensor = field(default_factory=lambda: Tensor(1.0, requires_grad=True))

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError(f"degree must be non-negative, got {self.degree}")
        if not isinstance(self.alpha_raw, Tensor):
            self.alpha_raw = Tensor(self.alpha_raw, requires_grad=True)
        if not isinstance(self.beta_raw, Tensor):
            self.beta_raw = Tensor(self.beta_raw, requires_grad=True)

    @classmethod
    def from_effective(cls, degree, alpha, beta):
        """Build a config whose constrained alpha/beta equal the given values."""
        return cls(degree, Tensor(inverse_elu(alpha), requires_grad=True),
                   Tensor(inverse_elu(beta), requires_grad=True))

    @property
    def alpha(self) -> Tensor:
        return elu_constrain(self.alpha_raw)

    @property
    def beta(self) -> Tensor:
        return elu_constrain(self.beta_raw)

    def parameters(self):
        return [self.alpha_raw, self.beta_raw]


def jacobi_recurrence(degree, alpha, beta, xi) -> Tensor:
    """All degrees ``0..degree`` stacked on a new trailing axis.

    Uses the three-term recurrence; ``alpha`` and ``beta`` may be tensors, in
    which case the result is differentiable with respect to them.
    """
    if degree < 0:
        raise ValueError(f"degree must be non-negative, got {degree}")
    xi = as_tensor(xi)
    a = as_tensor(alpha)
    b = as_tensor(beta)
    ab = a + b
    cols = [Tensor(np.ones(xi.shape))]
    if degree >= 1:
        # closed form for n=1; the generic denominator vanishes when alpha+beta = -1
        cols.append((a + 1.0) + (ab + 2.0) * ((xi - 1.0) * 0.5))
    if degree >= 2:
        # coefficients for every n >= 2 at once, as length-(degree-1) tensors
        n = Tensor(np.arange(2, degree + 1, dtype=np.float64))
        s = n * 2.0 + ab
        lead = n * 2.0 * (n + ab) * (s - 2.0)
        c_x = (s - 1.0) * s / (n * 2.0 * (n + ab))
        c_0 = (s - 1.0) * (a * a - b * b) / lead
        c_prev = (n + (a - 1.0)) * (n + (b - 1.0)) * s * 2.0 / lead
        for j in range(degree - 1):
            cols.append((xi * c_x[j] + c_0[j]) * cols[-1] - cols[-2] * c_prev[j])
    return stack(cols, axis=-1)


def jacobi_all_degrees(config: JacobiBasisConfig, xi) -> Tensor:
    """Evaluate J_0..J_K at ``xi`` for ``config``; shape ``xi.shape + (K+1,)``."""
    return jacobi_recurrence(config.degree, config.alpha, config.beta, xi)
