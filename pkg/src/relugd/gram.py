"""Stochastic Gram matrices of a network and their deterministic limits.

For a network with output weights ``Wout`` the stochastic Gram matrix is
``G[i, j] = sum_k Wout[k]**2 * 1[z_ki >= 0 and z_kj >= 0]`` with hidden
pre-activations ``z``, and ``H[i, j] = <x_i, x_j> G[i, j]``. The deterministic
matrix ``Gbar[i, j]`` is the probability that a standard normal direction
``w`` has ``<w, x_i> >= 0`` and ``<w, x_j> >= 0``; ``lambda`` and ``mu`` are
the smallest eigenvalues of ``Gbar`` and ``Hbar``.
"""
import math
from dataclasses import dataclass

import numpy as np

from relugd import serialization
from relugd._backend import kernels
from relugd.errors import DimensionError, DomainError
from relugd.linalg import as_matrix, lambda_min
from relugd.network import Dataset, _check_dims
from relugd.rng import Stream

PARALLEL_TOL = 1e-12
MC_MIN_SAMPLES = 1000
MC_CHUNK = 1 << 16


def _inputs(data):
    return data.x if isinstance(data, Dataset) else as_matrix(data, "x")


def inner_products(x):
    """Matrix of ``<x_i, x_j>``, each entry summed over coordinates in ascending order."""
    X = _inputs(x)
    acc = np.outer(X[:, 0], X[:, 0])
    for ell in range(1, X.shape[1]):
        acc = acc + np.outer(X[:, ell], X[:, ell])
    return acc


@dataclass(frozen=True)
class IndependenceReport:
    """Outcome of the pairwise linear independence check (0-based indices)."""

    valid: bool
    zero_vectors: tuple
    dependent_pairs: tuple


def check_pairwise_independence(data):
    """Flag zero inputs and pairs with ``|<x_i, x_j>| >= (1 - 1e-12) ||x_i|| ||x_j||``."""
    X = _inputs(data)
    ip = inner_products(X)
    norms = np.sqrt(np.diag(ip))
    zeros = tuple(int(i) for i in np.flatnonzero(norms == 0.0))
    pairs = []
    m = X.shape[0]
    for i in range(m):
        for j in range(i + 1, m):
            if norms[i] == 0.0 or norms[j] == 0.0:
                continue
            if abs(ip[i, j]) >= (1.0 - PARALLEL_TOL) * norms[i] * norms[j]:
                pairs.append((i, j))
    return IndependenceReport(valid=not zeros and not pairs, zero_vectors=zeros,
                              dependent_pairs=tuple(pairs))


@dataclass(frozen=True)
class GramPair:
    """Stochastic Gram matrices ``G`` and ``H`` at GD step ``step``."""

    step: int
    G: np.ndarray
    H: np.ndarray


@dataclass(frozen=True)
class DeterministicGram:
    """``Gbar``, ``Hbar`` and their smallest eigenvalues.

    ``standard_errors`` holds per-entry binomial standard errors of ``Gbar``
    for the Monte Carlo method and is ``None`` for the closed form.
    """

    Gbar: np.ndarray
    Hbar: np.ndarray
    lam: float
    mu: float
    method: str
    samples: int = 0
    seed: int = None
    standard_errors: np.ndarray = None


def stochastic_gram(net, data, step=0):
    """``G`` and ``H`` for the current network; indicators include exact zero."""
    _check_dims(net, data)
    Z = kernels.preactivations(net.W, net.B, data.x)
    G = kernels.gram(Z, net.Wout)
    return GramPair(step=step, G=G, H=inner_products(data.x) * G)


def _finish(Gbar, ip, method, samples=0, seed=None, se=None):
    Hbar = ip * Gbar
    return DeterministicGram(Gbar=Gbar, Hbar=Hbar, lam=lambda_min(Gbar), mu=lambda_min(Hbar),
                             method=method, samples=samples, seed=seed, standard_errors=se)


def deterministic_gram_closed_form(data):
    """``Gbar[i, j] = (pi - arccos(cos_ij)) / (2 pi)`` with the cosine clamped to [-1, 1]."""
    X = _inputs(data)
    ip = inner_products(X)
    sq = np.diag(ip)
    if np.any(sq == 0.0):
        raise DomainError("input vectors must be nonzero")
    # one square root of the product rounds once, so x_j = -x_i gives cos = -1 exactly
    with np.errstate(over="ignore", under="ignore"):
        denom = np.sqrt(np.outer(sq, sq))
    bad = (denom == 0.0) | ~np.isfinite(denom)
    if np.any(bad):
        root = np.sqrt(sq)
        denom = np.where(bad, np.outer(root, root), denom)
    cos = np.clip(ip / denom, -1.0, 1.0)
    Gbar = (math.pi - np.arccos(cos)) / (2.0 * math.pi)
    Gbar = 0.5 * (Gbar + Gbar.T)
    np.fill_diagonal(Gbar, 0.5)
    return _finish(Gbar, ip, "closed_form")


def deterministic_gram_monte_carlo(data, samples, seed):
    """Estimate ``Gbar`` by the fraction of normal draws that activate on both inputs.

    Draws are processed in fixed-size chunks from a single stream, so the
    result depends only on ``(data, samples, seed)``.
    """
    samples = int(samples)
    if samples < MC_MIN_SAMPLES:
        raise DomainError(f"need at least {MC_MIN_SAMPLES} samples, got {samples}")
    X = _inputs(data)
    ip = inner_products(X)
    if np.any(np.diag(ip) == 0.0):
        raise DomainError("input vectors must be nonzero")
    m, d = X.shape
    stream = Stream(seed, "gram_mc")
    counts = np.zeros((m, m), dtype=np.int64)
    done = 0
    while done < samples:
        n = min(MC_CHUNK, samples - done)
        w = stream.normal((n, d))
        proj = w[:, 0:1] * X[:, 0][None, :]
        for ell in range(1, d):
            proj = proj + w[:, ell:ell + 1] * X[:, ell][None, :]
        act = (proj >= 0.0).astype(np.int64)
        counts += act.T @ act
        done += n
    Gbar = counts / samples
    se = np.sqrt(Gbar * (1.0 - Gbar) / samples)
    return _finish(Gbar, ip, "monte_carlo", samples=samples, seed=int(seed), se=se)


def gram_eigenvalues(dg):
    """``(lambda, mu)``, the smallest eigenvalues of ``Gbar`` and ``Hbar``."""
    return lambda_min(dg.Gbar), lambda_min(dg.Hbar)


def _rows(a):
    return [[float(v) for v in row] for row in a]


def gram_to_dict(dg):
    doc = {
        "schema": serialization.schema_tag("gram"),
        "method": dg.method,
        "samples": int(dg.samples),
        "seed": dg.seed,
        "m": int(dg.Gbar.shape[0]),
        "Gbar": _rows(dg.Gbar),
        "Hbar": _rows(dg.Hbar),
        "lambda": float(dg.lam),
        "mu": float(dg.mu),
        "standard_errors": None if dg.standard_errors is None else _rows(dg.standard_errors),
    }
    return doc


def gram_from_dict(doc):
    serialization.check_schema(doc, "gram")
    Gbar = np.array(doc["Gbar"], dtype=np.float64)
    Hbar = np.array(doc["Hbar"], dtype=np.float64)
    if Gbar.shape != Hbar.shape or Gbar.shape != (doc["m"], doc["m"]):
        raise DimensionError("Gram document has inconsistent shapes")
    se = doc.get("standard_errors")
    return DeterministicGram(Gbar=Gbar, Hbar=Hbar, lam=float(doc["lambda"]), mu=float(doc["mu"]),
                             method=doc["method"], samples=int(doc["samples"]), seed=doc["seed"],
                             standard_errors=None if se is None else np.array(se))
