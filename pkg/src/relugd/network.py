"""One-hidden-layer rectified networks with hidden and output biases.

A network holds ``W`` (width x d), hidden biases ``B`` (width), output
weights ``Wout`` (width) and an output bias. Its realization is
``x -> <Wout, relu(W x + B)> + bias``.
"""
from dataclasses import dataclass

import numpy as np

from relugd import serialization
from relugd._backend import kernels
from relugd.errors import DimensionError, DomainError
from relugd.linalg import as_matrix, as_vector, ordered_sum

SOFTPLUS_BRANCH = 30.0


def _frozen(arr):
    out = np.array(arr, dtype=np.float64, order="C", copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class ShallowReluNet:
    """Parameters ``((W, B), (Wout, bias))`` of a width-``width`` network."""

    W: np.ndarray
    B: np.ndarray
    Wout: np.ndarray
    bias: float

    def __post_init__(self):
        W = as_matrix(self.W, "W")
        B = as_vector(self.B, "B")
        Wout = as_vector(self.Wout, "Wout")
        bias = float(self.bias)
        if not np.isfinite(bias):
            raise DomainError("output bias must be finite")
        if B.shape[0] != W.shape[0] or Wout.shape[0] != W.shape[0]:
            raise DimensionError(
                f"inconsistent widths: W {W.shape}, B {B.shape}, Wout {Wout.shape}")
        object.__setattr__(self, "W", _frozen(W))
        object.__setattr__(self, "B", _frozen(B))
        object.__setattr__(self, "Wout", _frozen(Wout))
        object.__setattr__(self, "bias", bias)

    @property
    def input_dim(self):
        return self.W.shape[1]

    @property
    def width(self):
        return self.W.shape[0]

    def replace(self, W=None, B=None, bias=None):
        """New network with the given trainable parts; ``Wout`` is shared as is."""
        new = object.__new__(ShallowReluNet)
        object.__setattr__(new, "W", self.W if W is None else _frozen(W))
        object.__setattr__(new, "B", self.B if B is None else _frozen(B))
        object.__setattr__(new, "Wout", self.Wout)
        object.__setattr__(new, "bias", self.bias if bias is None else float(bias))
        return new

    def __eq__(self, other):
        if not isinstance(other, ShallowReluNet):
            return NotImplemented
        return (np.array_equal(self.W, other.W) and np.array_equal(self.B, other.B)
                and np.array_equal(self.Wout, other.Wout) and self.bias == other.bias)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Inputs ``x`` (m x d, every row nonzero) and targets ``y`` (m)."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = as_matrix(self.x, "x")
        y = as_vector(self.y, "y")
        if y.shape[0] != x.shape[0]:
            raise DimensionError(f"{x.shape[0]} inputs but {y.shape[0]} targets")
        if np.any(np.all(x == 0.0, axis=1)):
            raise DomainError("input vectors must be nonzero")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))

    @property
    def input_dim(self):
        return self.x.shape[1]

    @property
    def m(self):
        return self.x.shape[0]


@dataclass(frozen=True)
class RiskGradient:
    """Partial derivatives of the empirical risk for ``W``, ``B`` and the output bias."""

    dW: np.ndarray
    dB: np.ndarray
    dBias: float


def num_params(input_dim, width):
    """Number of scalar parameters, ``width * d + 2 * width + 1``."""
    return width * input_dim + 2 * width + 1


def _check_dims(net, data):
    if net.input_dim != data.input_dim:
        raise DimensionError(
            f"network expects inputs of dimension {net.input_dim}, data has {data.input_dim}")


def rectifier(v):
    """Componentwise ``max(v, 0)``."""
    v = np.asarray(v, dtype=np.float64)
    return np.where(v > 0.0, v, 0.0)


def _check_t(t):
    if not t > 0:
        raise DomainError(f"smoothing parameter t must be positive, got {t}")


def softplus(z, t):
    """``phi_t(z) = ln(1 + t exp(t z)) / t``, evaluated without overflow."""
    _check_t(t)
    z = np.asarray(z, dtype=np.float64)
    tz = t * z
    hi = tz > SOFTPLUS_BRANCH
    tz_lo = np.where(hi, 0.0, tz)
    tz_hi = np.where(hi, tz, SOFTPLUS_BRANCH)
    low = np.log1p(t * np.exp(tz_lo)) / t
    high = z + np.log(t) / t + np.log1p(np.exp(-tz_hi) / t) / t
    out = np.where(hi, high, low)
    return float(out) if out.ndim == 0 else out


def softplus_deriv(z, t):
    """``phi_t'(z) = 1 / (1 + exp(-t z) / t)``, same branch split as :func:`softplus`."""
    _check_t(t)
    z = np.asarray(z, dtype=np.float64)
    tz = t * z
    hi = tz > SOFTPLUS_BRANCH
    tz_lo = np.where(hi, 0.0, tz)
    tz_hi = np.where(hi, tz, SOFTPLUS_BRANCH)
    e = t * np.exp(tz_lo)
    low = e / (1.0 + e)
    high = 1.0 / (1.0 + np.exp(-tz_hi) / t)
    out = np.where(hi, high, low)
    return float(out) if out.ndim == 0 else out


def hidden_preactivations(net, x):
    """``W x_j + B`` for every input row, shape (width, m)."""
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(x, dtype=np.float64)))
    if X.shape[1] != net.input_dim:
        raise DimensionError(f"expected inputs of dimension {net.input_dim}, got {X.shape[1]}")
    return kernels.preactivations(net.W, net.B, X)


def realize(net, x):
    """Network output ``<Wout, relu(W x + B)> + bias`` for a single input."""
    x = as_vector(x, "x")
    if x.shape[0] != net.input_dim:
        raise DimensionError(f"expected input of length {net.input_dim}, got {x.shape[0]}")
    Z = kernels.preactivations(net.W, net.B, x[None, :])
    return float(kernels.forward(Z, net.Wout, net.bias)[0])


def predictions(net, data):
    """Outputs ``f_j`` on every training input."""
    _check_dims(net, data)
    Z = kernels.preactivations(net.W, net.B, data.x)
    return kernels.forward(Z, net.Wout, net.bias)


def squared_error(net, data):
    """``||f - y||**2``."""
    r = predictions(net, data) - data.y
    return ordered_sum(r * r)


def empirical_risk(net, data):
    """Mean squared error ``(1/m) sum_j (f_j - y_j)**2``."""
    return squared_error(net, data) / data.m


def risk_gradient(net, data):
    """Exact gradient of the empirical risk, indicator ``1[z >= 0]`` at kinks.

    Output weights are not trained, so no component for them is returned.
    """
    _check_dims(net, data)
    Z = kernels.preactivations(net.W, net.B, data.x)
    resid = kernels.forward(Z, net.Wout, net.bias) - data.y
    dW, dB, dbias = kernels.gradient(Z, net.Wout, resid, data.x)
    return RiskGradient(dW=dW, dB=dB, dBias=float(dbias))


def smoothed_risk(net, data, t):
    """Empirical risk with ``phi_t`` in place of the rectifier."""
    _check_t(t)
    _check_dims(net, data)
    Z = kernels.preactivations(net.W, net.B, data.x)
    terms = net.Wout[:, None] * softplus(Z, t)
    f = np.cumsum(terms, axis=0)[-1] + net.bias
    r = f - data.y
    return ordered_sum(r * r) / data.m


def to_parameter_vector(net):
    """Flatten as row-major ``W``, then ``B``, ``Wout``, output bias."""
    return np.concatenate([net.W.ravel(), net.B, net.Wout, [net.bias]])


def from_parameter_vector(theta, input_dim, width):
    theta = as_vector(theta, "theta")
    if theta.shape[0] != num_params(input_dim, width):
        raise DimensionError(
            f"expected {num_params(input_dim, width)} parameters, got {theta.shape[0]}")
    k = width * input_dim
    return ShallowReluNet(
        W=theta[:k].reshape(width, input_dim),
        B=theta[k:k + width],
        Wout=theta[k + width:k + 2 * width],
        bias=theta[-1],
    )


def network_to_dict(net):
    return {
        "schema": serialization.schema_tag("network"),
        "d": int(net.input_dim),
        "width": int(net.width),
        "W": [float(v) for v in net.W.ravel()],
        "B": [float(v) for v in net.B],
        "Wout": [float(v) for v in net.Wout],
        "bias_out": float(net.bias),
    }


def network_from_dict(doc):
    serialization.check_schema(doc, "network")
    d, width = int(doc["d"]), int(doc["width"])
    W = np.array(doc["W"], dtype=np.float64)
    if W.size != d * width:
        raise DimensionError(f"W has {W.size} entries, expected {d * width}")
    return ShallowReluNet(W=W.reshape(width, d), B=doc["B"], Wout=doc["Wout"],
                          bias=doc["bias_out"])


def dataset_to_dict(data):
    return {
        "schema": serialization.schema_tag("dataset"),
        "d": int(data.input_dim),
        "m": int(data.m),
        "x": [[float(v) for v in row] for row in data.x],
        "y": [float(v) for v in data.y],
    }


def dataset_from_dict(doc):
    serialization.check_schema(doc, "dataset")
    data = Dataset(x=doc["x"], y=doc["y"])
    if data.input_dim != int(doc["d"]) or data.m != int(doc["m"]):
        raise DimensionError("dataset header (d, m) disagrees with its arrays")
    return data
