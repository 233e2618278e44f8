"""Rational KAN layers and the network container.

Two basis families are provided, each usable edge-wise (a full KAN layer with
one learnable univariate function per input/output pair) or as a shared
learnable activation placed between dense layers:

* rational Jacobi: ``J_k(phi(sigma(x); iota))`` with a rational map ``phi``;
* Pade: ``sum_i a_i J_i(sigma(x)) / sum_i b_i J_i(sigma(x))``.

Both have fractional variants in which a sigmoid-squashed input is raised to
a trainable positive power before entering the basis.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .jacobi import JacobiBasisConfig, inverse_softplus, jacobi_all_degrees, softplus_constrain
from .mappings import KINDS, SEMI_KINDS, MappingSpec

LAYER_KINDS = ("jacobi-rkan", "pade-rkan", "fjacobi-rkan", "fpade-rkan", "dense", "tanh", "relu", "sigmoid")
RKAN_KINDS = LAYER_KINDS[:4]
SQUASHES = ("identity", "tanh", "sigmoid")

PADE_EPS = 1e-8
# keeps s^gamma finite when a sigmoid saturates to exactly 0 or 1
_S_LO, _S_HI = 1e-12, 1.0 - 2.0 ** -53


def _squash(name, x):
    if name == "identity":
        return x
    if name == "tanh":
        return ad.tanh(x)
    if name == "sigmoid":
        return ad.sigmoid(x)
    raise ValueError(f"unknown squash {name!r}; expected one of {SQUASHES}")


def _clip_open_unit(s: Tensor) -> Tensor:
    lo = s.data < _S_LO
    hi = s.data > _S_HI
    if lo.any():
        s = ad.where(lo, Tensor(_S_LO), s)
    if hi.any():
        s = ad.where(hi, Tensor(_S_HI), s)
    return s


def safe_ratio(num, den, eps=PADE_EPS):
    """Pole-safe surrogate ``num * den / (den^2 + eps^2)`` for ``num / den``."""
    num, den = ad.as_tensor(num), ad.as_tensor(den)
    return num * den / (den * den + eps * eps)


def _check_finite(out: Tensor, layer):
    bad = ~np.isfinite(out.data)
    if bad.any():
        sample = int(np.argwhere(bad)[0][0])
        raise FloatingPointError(f"{layer}: non-finite output at sample {sample}")


def _uniform(rng, bound, shape):
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


class Layer:
    """Base class.  ``in_dim``/``out_dim`` are ``None`` for width-preserving layers."""

    in_dim = None
    out_dim = None

    def __call__(self, x):
        return self.forward(ad.as_tensor(x))

    def forward(self, x):
        raise NotImplementedError

    def parameters(self):
        return []


class Dense(Layer):
    def __init__(self, in_dim, out_dim, rng=None):
        if in_dim <= 0 or out_dim <= 0:
            raise ValueError(f"dims must be positive, got {in_dim}, {out_dim}")
        rng = np.random.default_rng(rng)
        self.in_dim, self.out_dim = in_dim, out_dim
        bound = 1.0 / math.sqrt(in_dim)
        self.weight = _uniform(rng, bound, (in_dim, out_dim))
        self.bias = _uniform(rng, bound, (out_dim,))

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ad.ShapeError("dense", x.shape, (None, self.in_dim))
        return x @ self.weight + ad.broadcast_to(self.bias, (x.shape[0], self.out_dim))

    def parameters(self):
        return [self.weight, self.bias]

    def __repr__(self):
        return f"Dense({self.in_dim}, {self.out_dim})"


class Activation(Layer):
    def __init__(self, name):
        if name not in ("tanh", "relu", "sigmoid", "identity"):
            raise ValueError(f"unknown activation {name!r}")
        self.name = name

    def forward(self, x):
        if self.name == "relu":
            return ad.relu(x)
        return _squash(self.name, x)

    def __repr__(self):
        return f"Activation({self.name!r})"


class _RationalBasis:
    """Shared input pipeline: squash, optional fractional power, map, Jacobi basis."""

    def _init_basis(self, degree, mapping, squash, fractional):
        if degree < 0:
            raise ValueError(f"degree must be non-negative, got {degree}")
        if squash not in SQUASHES:
            raise ValueError(f"unknown squash {squash!r}; expected one of {SQUASHES}")
        if mapping not in KINDS:
            raise ValueError(f"unknown mapping {mapping!r}")
        if fractional and squash != "sigmoid":
            raise ValueError("fractional variants need the positive-range sigmoid squash")
        self.basis = JacobiBasisConfig(degree)
        self.mapping = MappingSpec(mapping)
        self.squash = squash
        self.fractional = fractional
        self.gamma_raw = Tensor(inverse_softplus(1.0), requires_grad=True) if fractional else None

    @property
    def gamma(self):
        return softplus_constrain(self.gamma_raw)

    def _basis_columns(self, x):
        s = _squash(self.squash, x)
        if self.fractional:
            s = ad.exp(ad.log(_clip_open_unit(s)) * self.gamma)
        return jacobi_all_degrees(self.basis, self.mapping(s))

    def _basis_parameters(self):
        ps = self.basis.parameters() + self.mapping.parameters()
        if self.fractional:
            ps.append(self.gamma_raw)
        return ps


def _degree_cols(B, degree):
    if B.shape[-1] == degree + 1:
        return B
    return B[..., : degree + 1]


class JacobiRKanLayer(Layer, _RationalBasis):
    """Edge-wise rational Jacobi KAN layer.

    Output ``k`` is ``bias_k + sum_q sum_i c[k, q, i] J_i(phi(sigma(x_q)))``:
    one learnable univariate function per edge, combined linearly.
    """

    def __init__(self, in_dim, out_dim, degree, mapping="inf-alg", squash="identity",
                 fractional=False, rng=None):
        if in_dim <= 0 or out_dim <= 0:
            raise ValueError(f"dims must be positive, got {in_dim}, {out_dim}")
        if fractional and mapping not in SEMI_KINDS:
            raise ValueError("fractional Jacobi layers need a semi-infinite mapping")
        rng = np.random.default_rng(rng)
        self.in_dim, self.out_dim = in_dim, out_dim
        self._init_basis(degree, mapping, squash, fractional)
        bound = 1.0 / math.sqrt(in_dim * (degree + 1))
        self.edge_coeffs = _uniform(rng, bound, (out_dim, in_dim, degree + 1))
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ad.ShapeError("jacobi-rkan", x.shape, (None, self.in_dim))
        n, width = x.shape[0], self.in_dim * (self.basis.degree + 1)
        B = self._basis_columns(x).reshape(n, width)
        W = self.edge_coeffs.reshape(self.out_dim, width)
        return B @ W.T + ad.broadcast_to(self.bias, (n, self.out_dim))

    def parameters(self):
        return [self.edge_coeffs, self.bias] + self._basis_parameters()

    def __repr__(self):
        kind = "fjacobi" if self.fractional else "jacobi"
        return f"JacobiRKanLayer({self.in_dim}, {self.out_dim}, K={self.basis.degree}, {kind}, {self.mapping.kind})"


class PadeRKanLayer(Layer, _RationalBasis):
    """Edge-wise Pade KAN layer.

    Each edge ``(k, q)`` carries a numerator of degree ``K``; the denominator
    of degree ``p`` is shared by all edges leaving input ``q``.  Edge ratios
    are combined by the linear weights ``psi`` plus a bias.
    """

    def __init__(self, in_dim, out_dim, degree, den_degree, squash="tanh", fractional=False,
                 eps=PADE_EPS, rng=None):
        if in_dim <= 0 or out_dim <= 0:
            raise ValueError(f"dims must be positive, got {in_dim}, {out_dim}")
        if den_degree < 0:
            raise ValueError(f"denominator degree must be non-negative, got {den_degree}")
        if squash == "identity":
            raise ValueError("Pade layers need a bounded squash (tanh or sigmoid)")
        if fractional and squash != "sigmoid":
            raise ValueError("fractional variants need the positive-range sigmoid squash")
        rng = np.random.default_rng(rng)
        self.in_dim, self.out_dim = in_dim, out_dim
        self.den_degree = den_degree
        self.eps = eps
        self._init_basis(max(degree, den_degree), "fractional" if fractional else "identity",
                         squash, False)
        self.degree = degree
        # the fractional power is applied by the 2 s^gamma - 1 map itself
        self.fractional = fractional
        if fractional:
            self.gamma_raw = self.mapping.gamma_raw
        bound = 1.0 / math.sqrt(in_dim * (degree + 1))
        self.num_coeffs = _uniform(rng, bound, (out_dim, in_dim, degree + 1))
        den = np.zeros((in_dim, den_degree + 1))
        den[:, 0] = 1.0
        self.den_coeffs = Tensor(den, requires_grad=True)
        self.psi_weights = Tensor(np.ones((out_dim, in_dim)), requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    def _basis_columns(self, x):
        s = _squash(self.squash, x)
        if self.fractional:
            s = _clip_open_unit(s)
        return jacobi_all_degrees(self.basis, self.mapping(s))

    def denominator(self, x):
        """Shared per-input denominators, shape ``[n, in_dim]``."""
        x = ad.as_tensor(x)
        n = x.shape[0]
        Bd = _degree_cols(self._basis_columns(x), self.den_degree)
        theta = ad.broadcast_to(self.den_coeffs, (n, self.in_dim, self.den_degree + 1))
        return (Bd * theta).sum(axis=-1)

    def forward(self, x):
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ad.ShapeError("pade-rkan", x.shape, (None, self.in_dim))
        n, K1 = x.shape[0], self.degree + 1
        B = self._basis_columns(x)
        Bn = _degree_cols(B, self.degree)
        Bd = _degree_cols(B, self.den_degree)
        theta_d = ad.broadcast_to(self.den_coeffs, (n, self.in_dim, self.den_degree + 1))
        D = (Bd * theta_d).sum(axis=-1)
        # N_kq * D_q / (D_q^2 + eps^2) with psi folded into the numerator weights
        scale = D / (D * D + self.eps * self.eps)
        X = Bn * ad.broadcast_to(scale.reshape(n, self.in_dim, 1), (n, self.in_dim, K1))
        W = self.num_coeffs * ad.broadcast_to(
            self.psi_weights.reshape(self.out_dim, self.in_dim, 1), (self.out_dim, self.in_dim, K1))
        width = self.in_dim * K1
        out = X.reshape(n, width) @ W.reshape(self.out_dim, width).T
        out = out + ad.broadcast_to(self.bias, (n, self.out_dim))
        _check_finite(out, "pade-rkan")
        return out

    def parameters(self):
        ps = [self.num_coeffs, self.den_coeffs, self.psi_weights, self.bias] + self.basis.parameters()
        if self.fractional:
            ps.append(self.gamma_raw)
        return ps

    def __repr__(self):
        kind = "fpade" if self.fractional else "pade"
        return f"PadeRKanLayer({self.in_dim}, {self.out_dim}, [{self.degree}/{self.den_degree}], {kind})"


class JacobiActivation(Layer, _RationalBasis):
    """Learnable elementwise activation ``sum_i c_i J_i(phi(sigma(x)))``.

    One coefficient vector is shared by every unit.
    """

    def __init__(self, degree, mapping="inf-alg", squash="identity", fractional=False, rng=None):
        if fractional and mapping not in SEMI_KINDS:
            raise ValueError("fractional Jacobi activations need a semi-infinite mapping")
        rng = np.random.default_rng(rng)
        self._init_basis(degree, mapping, squash, fractional)
        self.coeffs = _uniform(rng, 1.0 / math.sqrt(degree + 1), (degree + 1,))

    def forward(self, x):
        K1 = self.basis.degree + 1
        B = self._basis_columns(x).reshape(x.size, K1)
        return (B @ self.coeffs.reshape(K1, 1)).reshape(x.shape)

    def parameters(self):
        return [self.coeffs] + self._basis_parameters()

    def __repr__(self):
        return f"JacobiActivation(K={self.basis.degree}, {self.mapping.kind})"


class PadeActivation(Layer, _RationalBasis):
    """Learnable elementwise Pade activation with shared coefficients."""

    def __init__(self, degree, den_degree, squash="tanh", fractional=False, eps=PADE_EPS, rng=None):
        if den_degree < 0:
            raise ValueError(f"denominator degree must be non-negative, got {den_degree}")
        if squash == "identity":
            raise ValueError("Pade activations need a bounded squash (tanh or sigmoid)")
        if fractional and squash != "sigmoid":
            raise ValueError("fractional variants need the positive-range sigmoid squash")
        rng = np.random.default_rng(rng)
        self._init_basis(max(degree, den_degree), "fractional" if fractional else "identity",
                         squash, False)
        self.degree, self.den_degree, self.eps = degree, den_degree, eps
        self.fractional = fractional
        if fractional:
            self.gamma_raw = self.mapping.gamma_raw
        self.num_coeffs = _uniform(rng, 1.0 / math.sqrt(degree + 1), (degree + 1,))
        den = np.zeros(den_degree + 1)
        den[0] = 1.0
        self.den_coeffs = Tensor(den, requires_grad=True)

    _basis_columns = PadeRKanLayer._basis_columns

    def forward(self, x):
        B = self._basis_columns(x).reshape(x.size, self.basis.degree + 1)
        N = _degree_cols(B, self.degree) @ self.num_coeffs.reshape(self.degree + 1, 1)
        D = _degree_cols(B, self.den_degree) @ self.den_coeffs.reshape(self.den_degree + 1, 1)
        out = safe_ratio(N, D, self.eps).reshape(x.shape)
        _check_finite(out, "pade activation")
        return out

    def parameters(self):
        ps = [self.num_coeffs, self.den_coeffs] + self.basis.parameters()
        if self.fractional:
            ps.append(self.gamma_raw)
        return ps

    def __repr__(self):
        return f"PadeActivation([{self.degree}/{self.den_degree}])"


def init_layer(kind, in_dim, out_dim, degree=3, den_degree=3, mapping=None, squash=None,
               seed=None, as_activation=False):
    """Build a freshly initialised layer of ``kind``; deterministic in ``seed``.

    ``mapping``/``squash`` default per family: Jacobi layers use ``inf-alg``
    with no squash, fractional Jacobi layers ``semi-alg`` behind a sigmoid,
    Pade layers a tanh squash and fractional Pade layers a sigmoid.
    """
    if kind not in LAYER_KINDS:
        raise ValueError(f"unknown layer kind {kind!r}; expected one of {LAYER_KINDS}")
    if in_dim is not None and in_dim <= 0 or out_dim is not None and out_dim <= 0:
        raise ValueError(f"dims must be positive, got {in_dim}, {out_dim}")
    rng = np.random.default_rng(seed)
    if kind == "dense":
        return Dense(in_dim, out_dim, rng)
    if kind in ("tanh", "relu", "sigmoid"):
        return Activation(kind)
    fractional = kind.startswith("f")
    if kind.endswith("jacobi-rkan"):
        mapping = mapping or ("semi-alg" if fractional else "inf-alg")
        squash = squash or ("sigmoid" if fractional else "identity")
        if as_activation:
            return JacobiActivation(degree, mapping, squash, fractional, rng)
        return JacobiRKanLayer(in_dim, out_dim, degree, mapping, squash, fractional, rng)
    squash = squash or ("sigmoid" if fractional else "tanh")
    if as_activation:
        return PadeActivation(degree, den_degree, squash, fractional, rng=rng)
    return PadeRKanLayer(in_dim, out_dim, degree, den_degree, squash, fractional, rng=rng)


class Network:
    """Left-to-right composition of layers with the width chain checked up front."""

    def __init__(self, layers, mode="kan"):
        if mode not in ("kan", "activation"):
            raise ValueError(f"unknown network mode {mode!r}")
        self.layers = list(layers)
        self.mode = mode
        width = None
        for i, layer in enumerate(self.layers):
            if layer.in_dim is not None:
                if width is not None and layer.in_dim != width:
                    raise ad.ShapeError(f"network layer {i}", (width,), (layer.in_dim,))
                width = layer.out_dim
        self.in_dim = next((l.in_dim for l in self.layers if l.in_dim is not None), None)
        self.out_dim = width

    def __call__(self, x):
        x = ad.as_tensor(x)
        if self.in_dim is not None and (x.ndim != 2 or x.shape[1] != self.in_dim):
            raise ad.ShapeError("network", x.shape, (None, self.in_dim))
        for layer in self.layers:
            x = layer(x)
        return x

    def parameters(self):
        return [p for layer in self.layers for p in layer.parameters()]

    def __repr__(self):
        inner = ", ".join(repr(l) for l in self.layers)
        return f"Network[{self.mode}]({inner})"


def build_network(architecture, layer="jacobi-rkan", degree=3, den_degree=3, mapping=None,
                  squash=None, mode="activation", seed=0):
    """Network for a width list such as ``[1, 10, 1]``.

    ``mode="activation"`` interleaves dense layers with the chosen activation
    (rKAN kinds become shared learnable activations); ``mode="kan"`` stacks
    edge-wise rKAN layers directly.
    """
    architecture = list(architecture)
    if len(architecture) < 2 or any(w <= 0 for w in architecture):
        raise ValueError(f"architecture needs >= 2 positive widths, got {architecture}")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seeds = ss.spawn(2 * len(architecture))
    layers = []
    if mode == "kan":
        if layer not in RKAN_KINDS:
            raise ValueError(f"kan mode needs an rKAN layer kind, got {layer!r}")
        for i, (a, b) in enumerate(zip(architecture[:-1], architecture[1:])):
            layers.append(init_layer(layer, a, b, degree, den_degree, mapping, squash, seeds[i]))
        return Network(layers, "kan")
    if mode != "activation":
        raise ValueError(f"unknown network mode {mode!r}")
    n = len(architecture) - 1
    for i, (a, b) in enumerate(zip(architecture[:-1], architecture[1:])):
        layers.append(Dense(a, b, np.random.default_rng(seeds[2 * i])))
        if i < n - 1 and layer != "dense":
            layers.append(init_layer(layer, None, None, degree, den_degree, mapping, squash,
                                     seeds[2 * i + 1], as_activation=True))
    return Network(layers, "activation")


def flat_parameters(params):
    return np.concatenate([p.data.reshape(-1) for p in params]) if params else np.zeros(0)


def set_flat_parameters(params, vec):
    vec = np.asarray(vec, dtype=np.float64)
    i = 0
    for p in params:
        n = p.data.size
        p.data = vec[i:i + n].reshape(p.data.shape).copy()
        i += n
    if i != vec.size:
        raise ValueError(f"vector length {vec.size} does not match {i} parameters")
