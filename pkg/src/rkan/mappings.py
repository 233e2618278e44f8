"""Input-domain maps onto the Jacobi interval [-1, 1].

Each map accepts floats/arrays or tensors.  Scale parameters (``iota`` for the
semi-infinite and infinite maps, ``gamma`` for the fractional map) are the
already-positive effective values; :class:`MappingSpec` owns the raw
trainable scalars and applies the SoftPlus constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Jet, Tensor, as_tensor, exp, log, tanh
from .jacobi import inverse_softplus, softplus_constrain

KINDS = ("finite", "semi-log", "semi-alg", "semi-exp", "inf-log", "inf-alg", "fractional", "identity")
SEMI_KINDS = ("semi-log", "semi-alg", "semi-exp")
INF_KINDS = ("inf-log", "inf-alg")


def _value(x):
    return x.data if isinstance(x, (Tensor, Jet)) else np.asarray(x, dtype=np.float64)


def _wrap(result, *inputs):
    # plain numbers in, plain numbers out
    if any(isinstance(t, (Tensor, Jet)) for t in inputs):
        return result
    out = result.data
    return float(out) if out.ndim == 0 else out


def _check_scale(name, value):
    if np.any(_value(value) <= 0):
        raise ValueError(f"{name} must be positive")


def map_finite(xi, d0, d1):
    """Affine map of ``[d0, d1]`` onto ``[-1, 1]``."""
    if not d0 < d1:
        raise ValueError(f"need d0 < d1, got d0={d0}, d1={d1}")
    t = as_tensor(xi)
    return _wrap((t * 2.0 - (d0 + d1)) * (1.0 / (d1 - d0)), xi)


def map_semi(xi, kind, iota):
    """Semi-infinite maps of ``[0, inf)`` onto ``[-1, 1)``."""
    if np.any(_value(xi) < 0):
        raise ValueError("semi-infinite maps need xi >= 0")
    _check_scale("iota", iota)
    t, s = as_tensor(xi), as_tensor(iota)
    if kind == "semi-log":
        out = tanh(t / s) * 2.0 - 1.0
    elif kind == "semi-alg":
        out = (t - s) / (t + s)
    elif kind == "semi-exp":
        out = 1.0 - exp(-(t / s)) * 2.0
    else:
        raise ValueError(f"unknown semi-infinite map {kind!r}")
    return _wrap(out, xi, iota)


def map_infinite(xi, kind, iota):
    """Odd maps of the real line onto ``(-1, 1)``."""
    _check_scale("iota", iota)
    t, s = as_tensor(xi), as_tensor(iota)
    if kind == "inf-log":
        out = tanh(t / s)
    elif kind == "inf-alg":
        out = t / (t * t + s * s) ** 0.5
    else:
        raise ValueError(f"unknown infinite map {kind!r}")
    return _wrap(out, xi, iota)


def map_fractional(s, gamma):
    """``2 s^gamma - 1`` for ``s`` strictly inside ``(0, 1)``."""
    sv = _value(s)
    if np.any(sv <= 0) or np.any(sv >= 1):
        raise ValueError("fractional map needs 0 < s < 1")
    _check_scale("gamma", gamma)
    t, g = as_tensor(s), as_tensor(gamma)
    out = exp(log(t) * g) * 2.0 - 1.0
    return _wrap(out, s, gamma)


@dataclass
class MappingSpec:
    """Which map is active, with its raw trainable scale.

    ``iota_raw`` and ``gamma_raw`` default to the SoftPlus preimage of 1.
    """

    kind: str = "inf-alg"
    iota_raw: Tensor = field(default_factory=lambda: Tensor(inverse_softplus(1.0), requires_grad=True))
    gamma_raw: Tensor = field(default_factory=lambda: Tensor(inverse_softplus(1.0), requires_grad=True))
    d0: float = -1.0
    d1: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown mapping kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "finite" and not self.d0 < self.d1:
            raise ValueError(f"finite mapping needs d0 < d1, got {self.d0}, {self.d1}")
        if not isinstance(self.iota_raw, Tensor):
            self.iota_raw = Tensor(self.iota_raw, requires_grad=True)
        if not isinstance(self.gamma_raw, Tensor):
            self.gamma_raw = Tensor(self.gamma_raw, requires_grad=True)

    @property
    def iota(self) -> Tensor:
        return softplus_constrain(self.iota_raw)

    @property
    def gamma(self) -> Tensor:
        return softplus_constrain(self.gamma_raw)

    def parameters(self):
        if self.kind in SEMI_KINDS or self.kind in INF_KINDS:
            return [self.iota_raw]
        if self.kind == "fractional":
            return [self.gamma_raw]
        return []

    def __call__(self, xi):
        k = self.kind
        if k == "identity":
            return as_tensor(xi)
        if k == "finite":
            return map_finite(as_tensor(xi), self.d0, self.d1)
        if k in SEMI_KINDS:
            return map_semi(as_tensor(xi), k, self.iota)
        if k in INF_KINDS:
            return map_infinite(as_tensor(xi), k, self.iota)
        return map_fractional(as_tensor(xi), self.gamma)
