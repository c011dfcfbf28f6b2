"""Convergence-rate certificate, step-size and width thresholds, and initialization events.

All formulas are evaluated in double precision exactly as written. Very
small or large inputs can push a threshold to zero or infinity; such values
are reported through :attr:`RateCertificate.nonfinite_fields` and
:attr:`RateCertificate.zero_fields` rather than clamped.
"""
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from relugd import serialization
from relugd._backend import kernels
from relugd.errors import ContractError, DomainError
from relugd.gram import stochastic_gram
from relugd.linalg import ordered_sum
from relugd.network import _check_dims

SQRT_2PI = math.sqrt(2.0 * math.pi)


def _positive(**kwargs):
    for name, value in kwargs.items():
        if not (math.isfinite(value) and value > 0):
            raise DomainError(f"{name} must be positive and finite, got {value}")


def _unit_interval(eps):
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")


def _ieee(*values):
    # float64 scalars follow IEEE overflow/underflow instead of raising
    return tuple(np.float64(v) for v in values)


def _norms(x):
    return np.sqrt(np.cumsum(x * x, axis=1)[:, -1])


def data_radii(data):
    """``(c, C)``: smallest and largest input norm."""
    norms = _norms(data.x)
    if norms.size == 0:
        raise DomainError("dataset is empty")
    return float(norms.min()), float(norms.max())


def input_sumsq(data):
    """``sum_i ||x_i||**2``."""
    return ordered_sum(np.cumsum(data.x * data.x, axis=1)[:, -1])


def target_norm(data):
    return math.sqrt(ordered_sum(data.y * data.y))


def capital_lambda(lam, mu, c, C, m, y_norm):
    """Rate constant: the minimum of ``(lam + mu)/m``,
    ``min{lam, mu, 1/lam, 1/mu} / (2**11 max{1, C**4} m)`` and
    ``c**2.5 min{1, lam**5, mu**5} / (2**36 max{1, C**20, ||y||**5} m**8)``.
    """
    _positive(lam=lam, mu=mu, c=c, C=C, m=m)
    if not (math.isfinite(y_norm) and y_norm >= 0):
        raise DomainError(f"y_norm must be nonnegative, got {y_norm}")
    lam, mu, c, C, m, y_norm = _ieee(lam, mu, c, C, m, y_norm)
    with np.errstate(all="ignore"):
        return float(_capital_lambda(lam, mu, c, C, m, y_norm))


def _capital_lambda(lam, mu, c, C, m, y_norm):
    t1 = (lam + mu) / m
    t2 = min(lam, mu, 1.0 / lam, 1.0 / mu) / (2.0**11 * max(1.0, C**4) * m)
    t3 = (c**2.5 * min(1.0, lam**5, mu**5)) / (2.0**36 * max(1.0, C**20, y_norm**5) * m**8)
    return min(t1, t2, t3)


@dataclass(frozen=True)
class Thresholds:
    """Step-size and width thresholds for a given failure probability ``eps``.

    ``eta_max_thm`` is a strict upper bound; ``ln_condition_rhs`` is compared
    with :func:`ln_condition_lhs` at the chosen width. The ``_cor`` values are
    the simplified sufficient conditions.
    """

    eta_max_thm: float
    dmin_thm: float
    ln_condition_rhs: float
    eta_max_cor: float
    dmin_cor: float


def theorem_thresholds(lam, mu, c, C, m, eps, sumsq_x, y_norm):
    _positive(lam=lam, mu=mu, c=c, C=C, m=m, sumsq_x=sumsq_x)
    _unit_interval(eps)
    if not (math.isfinite(y_norm) and y_norm >= 0):
        raise DomainError(f"y_norm must be nonnegative, got {y_norm}")
    args = _ieee(lam, mu, c, C, m, eps, sumsq_x, y_norm)
    with np.errstate(all="ignore"):
        values = _thresholds(*args)
    return Thresholds(*(float(v) for v in values))


def _thresholds(lam, mu, c, C, m, eps, sumsq_x, y_norm):
    s = lam + mu
    C2 = C * C
    C4 = C**4
    eta_thm = min(s / (8.0 * (6.0 * (1.0 + C2) / eps + 1.0)**2 * m), m / s)
    dmin_thm = 32.0 * math.log(12.0 * m * m / eps) * max(
        4.0 * m * m / (lam * lam), 4.0 * m * m * C4 / (mu * mu), m / lam, m * C2 / mu)
    prefactor = (math.pi * eps**3 * c * c * s * s) / (
        2.0**17 * 3.0**3 * max(1.0, C4) * m**3 * (0.5 * sumsq_x + y_norm * y_norm))
    sqrt_m_m = math.sqrt(m) + m
    inner = min(lam * lam / (m * m), mu * mu / (m * m * C4),
                s * s / ((1.0 + C2)**2 * sqrt_m_m * sqrt_m_m))
    rhs = prefactor * inner
    eta_cor = 2.0**-11 * min(1.0, 1.0 / C4) * min(lam, mu, 1.0 / lam, 1.0 / mu) * eps * eps / m
    dmin_cor = (2.0**36 * max(1.0, C**20, y_norm**5) * c**-2.5
                * max(1.0, lam**-5, mu**-5) * eps**-4 * m**8)
    return eta_thm, dmin_thm, rhs, eta_cor, dmin_cor


def ln_condition_lhs(width, eps):
    """``ln(12 width / eps) / width``; the width condition asks for this to be <= the rhs."""
    _unit_interval(eps)
    return math.log(12.0 * width / eps) / width


def event_width(lam, mu, C, m, eps):
    """Width above which the six initialization events jointly hold with probability >= 1 - 6 eps:
    ``32 ln(2 m**2 / eps) max{4m**2/lam**2, 4m**2 C**4/mu**2, m/lam, m C**2/mu}``.
    """
    _positive(lam=lam, mu=mu, C=C, m=m)
    _unit_interval(eps)
    return 32.0 * math.log(2.0 * m * m / eps) * max(
        4.0 * m * m / (lam * lam), 4.0 * m * m * C**4 / (mu * mu), m / lam, m * C * C / mu)


def event_radius(eps, c, C, lam, mu, m):
    """Largest admissible radius for the initialization events,
    ``sqrt(2 pi) eps c min{lam, mu / C**2} / (16 m**2)``.
    """
    _positive(c=c, C=C, lam=lam, mu=mu, m=m)
    _unit_interval(eps)
    return SQRT_2PI * eps * c * min(lam, mu / (C * C)) / (16.0 * m * m)


def radius_R(eps, c, C, lam, mu, m):
    """Drift radius with ``delta = eps/6``:
    ``min{sqrt(2 pi) delta c min{lam, mu/C**2} / (16 m**2),
    sqrt(2 pi) delta c (lam + mu) / (16 (1 + C**2)(sqrt(m) + m) m)}``.
    """
    _positive(c=c, C=C, lam=lam, mu=mu, m=m)
    _unit_interval(eps)
    eps, c, C, lam, mu, m = _ieee(eps, c, C, lam, mu, m)
    with np.errstate(all="ignore"):
        delta = eps / 6.0
        r1 = SQRT_2PI * delta * c * min(lam, mu / (C * C)) / (16.0 * m * m)
        r2 = SQRT_2PI * delta * c * (lam + mu) / (16.0 * (1.0 + C * C) * (np.sqrt(m) + m) * m)
    return float(min(r1, r2))


@dataclass(frozen=True)
class EventOutcome:
    name: str
    statistic: float
    threshold: float
    held: bool


@dataclass(frozen=True)
class EventReport:
    """The six initialization events; ``all_held`` is their conjunction."""

    events: tuple

    @property
    def all_held(self):
        return all(e.held for e in self.events)

    def __getitem__(self, name):
        for e in self.events:
            if e.name == name:
                return e
        raise KeyError(name)


def event_probe(net0, data, dg, eps, R):
    """Evaluate events A1..A6 for a freshly initialized network.

    A1  ``||f(0) - y||**2 <= (sum ||x_i||**2 / 2 + ||y||**2) / eps``
    A2  ``max_k |Wout_k| <= (2 ln(2 width / eps) / width)**0.5``
    A3  ``max_ij |G_ij(0) - Gbar_ij| <= min{lam, mu / C**2} / (4 m)``
    A4  ``sum_ij sum_k Wout_k**2 (1[|z_ki| <= R] + 1[|z_kj| <= R]) <= min{lam, mu / C**2} / 4``
    A5  ``sum_i sum_k Wout_k**2 1[|z_ki| <= R] <= 2 m R / (sqrt(2 pi) eps c)``
    A6  ``sum_k Wout_k**2 <= 1 / eps``

    Here ``z_ki = <W_k(0), x_i>``. Equality counts as held.
    """
    _check_dims(net0, data)
    _unit_interval(eps)
    _positive(R=R)
    if np.any(net0.B != 0.0) or net0.bias != 0.0:
        raise ContractError("event probe needs an initial network with zero biases")
    m = data.m
    width = net0.width
    c, C = data_radii(data)
    lam, mu = dg.lam, dg.mu
    gap = min(lam, mu / (C * C))
    Z = kernels.preactivations(net0.W, net0.B, data.x)
    f = kernels.forward(Z, net0.Wout, net0.bias)
    resid = f - data.y
    w2 = net0.Wout * net0.Wout

    events = []
    s1 = ordered_sum(resid * resid)
    t1 = (0.5 * input_sumsq(data) + ordered_sum(data.y * data.y)) / eps
    events.append(EventOutcome("A1", s1, t1, s1 <= t1))

    s2 = float(np.max(np.abs(net0.Wout)))
    t2 = math.sqrt(2.0 / width * math.log(2.0 * width / eps))
    events.append(EventOutcome("A2", s2, t2, s2 <= t2))

    G = stochastic_gram(net0, data).G
    s3 = float(np.max(np.abs(G - dg.Gbar)))
    t3 = gap / (4.0 * m)
    events.append(EventOutcome("A3", s3, t3, s3 <= t3))

    near = np.abs(Z) <= R
    # per-input mass sum_k Wout_k**2 1[|z_ki| <= R]
    mass = np.cumsum(np.where(near, w2[:, None], 0.0), axis=0)[-1]
    s4 = ordered_sum([mass[i] + mass[j] for i in range(m) for j in range(m)])
    t4 = gap / 4.0
    events.append(EventOutcome("A4", s4, t4, s4 <= t4))

    s5 = ordered_sum(mass)
    t5 = 2.0 * m * R / (SQRT_2PI * eps * c)
    events.append(EventOutcome("A5", s5, t5, s5 <= t5))

    s6 = ordered_sum(w2)
    t6 = 1.0 / eps
    events.append(EventOutcome("A6", s6, t6, s6 <= t6))
    return EventReport(events=tuple(events))


def rate_envelope(risk0, eta, rate_constant, n):
    """``(1 - eta * rate_constant)**n * risk0``; ``n`` may be an integer or an array.

    The power is evaluated as ``exp(n * log1p(-eta * rate_constant))``.
    """
    if not (math.isfinite(risk0) and risk0 >= 0):
        raise DomainError(f"risk0 must be nonnegative, got {risk0}")
    q = eta * rate_constant
    if not 0.0 < q < 1.0:
        raise DomainError(f"eta * rate_constant must lie in (0, 1), got {q}")
    n = np.asarray(n)
    if np.any(n < 0):
        raise DomainError("step index must be nonnegative")
    out = np.exp(n * math.log1p(-q)) * risk0
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LogInequalityReport:
    checked: int
    violations: tuple

    @property
    def holds(self):
        return not self.violations


def log_inequality_check(eps_grid, x_grid):
    """Check ``ln(x) <= x**eps / eps`` on every grid pair; report the violating pairs."""
    bad = []
    count = 0
    for eps in eps_grid:
        if not eps > 0:
            raise DomainError(f"eps must be positive, got {eps}")
        for x in x_grid:
            if not x > 0:
                raise DomainError(f"x must be positive, got {x}")
            count += 1
            if math.log(x) > x**eps / eps:
                bad.append((float(eps), float(x)))
    return LogInequalityReport(checked=count, violations=tuple(bad))


@dataclass(frozen=True)
class RateCertificate:
    c: float
    C: float
    lam: float
    mu: float
    m: int
    d: int
    y_norm: float
    eps: float
    capital_lambda: float
    eta_max_thm: float
    dmin_thm: float
    ln_condition_rhs: float
    eta_max_cor: float
    dmin_cor: float
    radius_R: float
    nonfinite_fields: tuple = field(default=())
    zero_fields: tuple = field(default=())


_THRESHOLD_FIELDS = ("capital_lambda", "eta_max_thm", "dmin_thm", "ln_condition_rhs",
                     "eta_max_cor", "dmin_cor", "radius_R")


def certify(data, dg, eps):
    """Assemble the certificate for a dataset and its deterministic Gram matrices."""
    _unit_interval(eps)
    c, C = data_radii(data)
    y_norm = target_norm(data)
    lam, mu = dg.lam, dg.mu
    _positive(lam=lam, mu=mu)
    th = theorem_thresholds(lam, mu, c, C, data.m, eps, input_sumsq(data), y_norm)
    values = dict(
        capital_lambda=capital_lambda(lam, mu, c, C, data.m, y_norm),
        eta_max_thm=th.eta_max_thm, dmin_thm=th.dmin_thm, ln_condition_rhs=th.ln_condition_rhs,
        eta_max_cor=th.eta_max_cor, dmin_cor=th.dmin_cor,
        radius_R=radius_R(eps, c, C, lam, mu, data.m),
    )
    nonfinite = tuple(k for k in _THRESHOLD_FIELDS if not math.isfinite(values[k]))
    zero = tuple(k for k in _THRESHOLD_FIELDS if values[k] == 0.0)
    return RateCertificate(c=c, C=C, lam=lam, mu=mu, m=data.m, d=data.input_dim, y_norm=y_norm,
                           eps=float(eps), nonfinite_fields=nonfinite, zero_fields=zero, **values)


def certificate_to_dict(cert, gram_method, mc_samples, seed):
    doc = {"schema": serialization.schema_tag("certificate")}
    for key, value in asdict(cert).items():
        if key == "lam":
            key = "lambda"
        doc[key] = list(value) if isinstance(value, tuple) else value
    for key in _THRESHOLD_FIELDS:
        if not math.isfinite(doc[key]):
            doc[key] = None  # listed in nonfinite_fields
    doc["provenance"] = {"gram_method": gram_method, "mc_samples": mc_samples, "seed": seed}
    return doc
