"""Random initialization and full-batch gradient descent with frozen output weights.

The hidden weights ``W``, hidden biases ``B`` and the output bias are updated
by plain gradient descent on the empirical risk; the output weights keep
their initial values for the whole run.
"""
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from relugd import serialization
from relugd._backend import kernels
from relugd.errors import DimensionError, DivergenceError, DomainError, SchemaError
from relugd.gram import inner_products
from relugd.linalg import lambda_min, ordered_sum
from relugd.network import ShallowReluNet, _check_dims
from relugd.rng import Stream

DIVERGENCE_FACTOR = 1e3

CSV_COLUMNS = ("n", "risk", "sq_err", "envelope", "max_drift_W", "max_drift_B",
               "lambda_min_G", "lambda_min_H")


@dataclass(frozen=True)
class TrainConfig:
    """Gradient descent settings.

    ``eta = 0`` is accepted and leaves every parameter unchanged. Gram
    eigenvalues are recorded at steps that are multiples of
    ``record_gram_every`` (never when it is 0).
    """

    eta: float
    steps: int
    seed: int = 0
    width: int = 1
    record_gram_every: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.eta) and self.eta >= 0.0):
            raise DomainError(f"eta must be finite and nonnegative, got {self.eta}")
        if int(self.steps) != self.steps or self.steps < 0:
            raise DomainError(f"steps must be a nonnegative integer, got {self.steps}")
        if int(self.width) != self.width or self.width < 1:
            raise DomainError(f"width must be a positive integer, got {self.width}")
        if int(self.record_gram_every) != self.record_gram_every or self.record_gram_every < 0:
            raise DomainError("record_gram_every must be a nonnegative integer")
        if not 0 <= int(self.seed) < 2**64:
            raise DomainError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


@dataclass
class GDTrajectory:
    """Recorded gradient descent run; index ``n`` runs over ``0..steps``.

    ``snapshots`` maps each Gram-recording step to the network at that step;
    ``lambda_G`` and ``lambda_H`` hold the smallest eigenvalues of the
    stochastic Gram matrices at ``gram_steps``.
    """

    eta: float
    input_norm_max: float
    predictions: np.ndarray
    risk: np.ndarray
    sq_err: np.ndarray
    max_drift_W: np.ndarray
    max_drift_B: np.ndarray
    max_drift_combined: np.ndarray
    initial: ShallowReluNet
    final: ShallowReluNet
    gram_steps: list = field(default_factory=list)
    lambda_G: list = field(default_factory=list)
    lambda_H: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)

    @property
    def steps(self):
        return len(self.risk) - 1


def initialize(d, width, seed, trial=0):
    """Draw ``W`` standard normal and ``Wout`` normal with variance ``1/width``; biases are 0.

    ``trial`` selects an independent sub-stream, so ``(seed, trial)`` pairs
    give independent networks.
    """
    if d < 1 or width < 1:
        raise DomainError(f"d and width must be positive, got d={d}, width={width}")
    W = Stream(seed, "W", trial).normal((width, d))
    Wout = Stream(seed, "Wout", trial).normal(width) / math.sqrt(width)
    return ShallowReluNet(W=W, B=np.zeros(width), Wout=Wout, bias=0.0)


def _step_from(net, Z, resid, X, eta):
    dW, dB, dbias = kernels.gradient(Z, net.Wout, resid, X)
    return net.replace(W=net.W - eta * dW, B=net.B - eta * dB, bias=net.bias - eta * dbias)


def gd_step(net, data, eta):
    """One gradient descent step; the output weights are returned unchanged."""
    _check_dims(net, data)
    Z = kernels.preactivations(net.W, net.B, data.x)
    resid = kernels.forward(Z, net.Wout, net.bias) - data.y
    return _step_from(net, Z, resid, data.x, eta)


def _input_norm_max(data):
    sq = data.x * data.x
    return max(math.sqrt(v) for v in np.cumsum(sq, axis=1)[:, -1])


def train(net0, data, config):
    """Run ``config.steps`` gradient descent steps from ``net0``.

    Risk, squared error and drifts are recorded every step from the network
    at that step. Raises :class:`DivergenceError` if the risk becomes
    non-finite or exceeds ``1e3`` times the initial risk.
    """
    _check_dims(net0, data)
    if net0.width != config.width:
        raise DimensionError(f"network width {net0.width} does not match config width {config.width}")
    steps = int(config.steps)
    m = data.m
    C = _input_norm_max(data)
    preds = np.empty((steps + 1, m))
    risk = np.empty(steps + 1)
    sq_err = np.empty(steps + 1)
    dW = np.empty(steps + 1)
    dB = np.empty(steps + 1)
    dC = np.empty(steps + 1)
    traj = GDTrajectory(eta=float(config.eta), input_norm_max=C, predictions=preds, risk=risk,
                        sq_err=sq_err, max_drift_W=dW, max_drift_B=dB, max_drift_combined=dC,
                        initial=net0, final=net0)
    every = int(config.record_gram_every)
    ip = inner_products(data.x) if every else None
    net = net0
    for n in range(steps + 1):
        Z = kernels.preactivations(net.W, net.B, data.x)
        f = kernels.forward(Z, net.Wout, net.bias)
        resid = f - data.y
        se = ordered_sum(resid * resid)
        r = se / m
        if not math.isfinite(r) or (n > 0 and r > DIVERGENCE_FACTOR * risk[0]):
            raise DivergenceError(n, r)
        preds[n] = f
        sq_err[n] = se
        risk[n] = r
        dW[n], dB[n], dC[n] = kernels.drifts(net.W, net0.W, net.B, net0.B, C)
        if every and n % every == 0:
            G = kernels.gram(Z, net.Wout)
            traj.gram_steps.append(n)
            traj.lambda_G.append(lambda_min(G))
            traj.lambda_H.append(lambda_min(ip * G))
            traj.snapshots[n] = net
        if n < steps:
            net = _step_from(net, Z, resid, data.x, config.eta)
    traj.final = net
    return traj


@dataclass(frozen=True)
class DriftReport:
    """Per-step drift bounds and whether the observed drifts satisfy them.

    ``premise[n]`` is true when every ``|Wout_k|`` is below the weight-bound
    threshold and the squared error stayed under the ``(lambda + mu)/m``
    envelope at all steps before ``n``; under that premise the bounds are
    guaranteed to hold at step ``n``.
    """

    bound_W: float
    bound_B: float
    holds_W: np.ndarray
    holds_B: np.ndarray
    premise: np.ndarray


def weight_drift_bound(traj, eps, lam, mu, C):
    """Evaluate ``4 C ||f(0) - y|| / (lam + mu) * (2 m ln(2 width / eps) / width)**0.5``.

    The bias bound is the same expression without the factor ``C``.
    """
    if not lam + mu > 0:
        raise DomainError(f"lambda + mu must be positive, got {lam + mu}")
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    m = traj.predictions.shape[1]
    width = traj.initial.width
    root = math.sqrt(2.0 * m * math.log(2.0 * width / eps) / width)
    r0 = math.sqrt(traj.sq_err[0])
    bound_B = 4.0 * r0 / (lam + mu) * root
    bound_W = 4.0 * C * r0 / (lam + mu) * root
    holds_W = traj.max_drift_W <= bound_W
    holds_B = traj.max_drift_B <= bound_B

    thr = math.sqrt(2.0 * math.log(2.0 * width / eps) / width)
    weights_ok = bool(np.all(np.abs(traj.initial.Wout) <= thr))
    rate = traj.eta * (lam + mu) / m
    premise = np.zeros(len(traj.risk), dtype=bool)
    if weights_ok and 0.0 <= rate < 1.0:
        ok = True
        for n in range(len(traj.risk)):
            premise[n] = ok
            ok = ok and traj.sq_err[n] <= (1.0 - rate) ** n * traj.sq_err[0]
    return DriftReport(bound_W=bound_W, bound_B=bound_B, holds_W=holds_W, holds_B=holds_B,
                       premise=premise)


def _fmt(v):
    return "" if v is None else repr(float(v))


def write_trajectory_csv(traj, path, envelope=None):
    """Write one row per step; ``envelope`` is an optional per-step sequence.

    The first line is a ``# schema=...`` comment, then the header. Floats are
    written with ``repr`` so they parse back bit-exactly; unrecorded values
    are empty.
    """
    gram = dict(zip(traj.gram_steps, zip(traj.lambda_G, traj.lambda_H)))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# schema={serialization.schema_tag('trajectory')}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for n in range(len(traj.risk)):
            lg, lh = gram.get(n, (None, None))
            env = None if envelope is None else envelope[n]
            writer.writerow([n, _fmt(traj.risk[n]), _fmt(traj.sq_err[n]), _fmt(env),
                             _fmt(traj.max_drift_W[n]), _fmt(traj.max_drift_B[n]),
                             _fmt(lg), _fmt(lh)])


def read_trajectory_csv(path):
    """Parse a trajectory CSV into a dict of column lists (``None`` for empty cells)."""
    with open(path, encoding="utf-8", newline="") as fh:
        first = fh.readline().strip()
        if not first.startswith("# schema="):
            raise SchemaError("trajectory CSV lacks a schema line")
        serialization.check_schema({"schema": first[len("# schema="):]}, "trajectory")
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise SchemaError(f"unexpected trajectory CSV header {header}")
        cols = {name: [] for name in CSV_COLUMNS}
        for row in reader:
            for name, cell in zip(CSV_COLUMNS, row):
                if name == "n":
                    cols[name].append(int(cell))
                else:
                    cols[name].append(float(cell) if cell else None)
    return cols
