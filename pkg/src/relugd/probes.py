"""Monte Carlo checks of the probabilistic inequalities behind the convergence analysis.

Each probe draws from its own stream, keyed by the probe name (which
includes its parameters), and compares an empirical statistic with a bound
or target using an explicit standard-error slack: 5 SE for mean matching and
3 SE for one-sided tail bounds. A bound of at least 1 on a probability is
vacuous; such probes pass and carry ``vacuous=True``.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from relugd import serialization
from relugd.datasets import generate_dataset
from relugd.errors import DomainError
from relugd.linalg import ordered_sum
from relugd.network import Dataset, squared_error
from relugd.rng import Stream, probe_index
from relugd.training import initialize

CHUNK = 1 << 20
MEAN_SLACK = 5.0
TAIL_SLACK = 3.0
SCALES = {"quick": 10**5, "full": 10**7}
MGF_GRID = (-0.2, -0.1, 0.0, 0.1, 0.2)


@dataclass(frozen=True)
class ProbeResult:
    """Outcome of one probe.

    ``statistic`` and ``bound`` are the compared quantities; for grid probes
    they are taken at the grid point closest to failing, and ``details``
    holds the full grid.
    """

    name: str
    samples: int
    statistic: float
    bound: float
    se: float
    passed: bool
    vacuous: bool
    seed: int
    details: dict = field(default_factory=dict, compare=False)

    def to_dict(self):
        return {"name": self.name, "samples": self.samples, "statistic": self.statistic,
                "bound": self.bound, "se": self.se, "pass": self.passed,
                "vacuous": self.vacuous, "seed": self.seed}


def _stream(seed, name):
    return Stream(seed, "probe", probe_index(name))


def _chunks(total):
    done = 0
    while done < total:
        n = min(CHUNK, total - done)
        yield n
        done += n


def _mean_and_se(stream, samples, draw):
    # chunked sum and sum of squares of draw(stream, n)
    s = 0.0
    ss = 0.0
    for n in _chunks(samples):
        v = draw(stream, n)
        s += ordered_sum(v)
        ss += ordered_sum(v * v)
    mean = s / samples
    var = max(ss / samples - mean * mean, 0.0) * samples / max(samples - 1, 1)
    return mean, math.sqrt(var / samples)


def _frequency(stream, samples, event):
    hits = 0
    for n in _chunks(samples):
        hits += int(np.count_nonzero(event(stream, n)))
    p = hits / samples
    return p, math.sqrt(p * (1.0 - p) / samples)


def _tail_result(name, samples, seed, p, se, bound, details=None):
    vacuous = bound >= 1.0
    passed = vacuous or p <= bound + TAIL_SLACK * se
    return ProbeResult(name=name, samples=samples, statistic=p, bound=bound, se=se,
                       passed=passed, vacuous=vacuous, seed=seed, details=details or {})


def rectified_second_moment(sigma, samples, seed):
    """``E[relu(X)**2] = sigma**2 / 2`` for centered normal ``X`` with std ``sigma``."""
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if samples < 10**4:
        raise DomainError("need at least 1e4 samples")
    name = f"rectified_second_moment(sigma={sigma!r})"

    def draw(st, n):
        x = sigma * st.normal(n)
        r = np.where(x > 0.0, x, 0.0)
        return r * r

    mean, se = _mean_and_se(_stream(seed, name), samples, draw)
    target = sigma * sigma / 2.0
    return ProbeResult(name=name, samples=samples, statistic=mean, bound=target, se=se,
                       passed=abs(mean - target) <= MEAN_SLACK * se, vacuous=False, seed=seed)


def gaussian_tail(eps, samples, seed):
    """``P(|X| >= eps) <= 2 exp(-eps**2 / 2)`` for standard normal ``X``."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    name = f"gaussian_tail(eps={eps!r})"
    p, se = _frequency(_stream(seed, name), samples, lambda st, n: np.abs(st.normal(n)) >= eps)
    return _tail_result(name, samples, seed, p, se, 2.0 * math.exp(-eps * eps / 2.0))


def anti_concentration(eps, samples, seed):
    """``P(|X| <= eps) <= 2 eps / sqrt(2 pi)`` for standard normal ``X``."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    name = f"anti_concentration(eps={eps!r})"
    p, se = _frequency(_stream(seed, name), samples, lambda st, n: np.abs(st.normal(n)) <= eps)
    return _tail_result(name, samples, seed, p, se, 2.0 * eps / math.sqrt(2.0 * math.pi))


def subexp_parameters(sigmas):
    """``(nu, b)`` of ``sum_k sigma_k**2 Z_k**2 1[A_k]``: ``(2 (sum sigma**4)**0.5, 4 max sigma**2)``."""
    s = np.asarray(sigmas, dtype=np.float64)
    return 2.0 * math.sqrt(ordered_sum(s**4)), 4.0 * float(np.max(s * s))


def masked_chisq_sampler(p, sigmas=(1.0,)):
    """Sampler for ``Y = sum_k sigma_k**2 Z_k**2 1[A_k]`` with independent ``P(A_k) = p``.

    Returns ``(draw, mean)`` where ``draw(stream, n)`` gives ``n`` samples.
    """
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    sig2 = [float(s) * float(s) for s in sigmas]

    def draw(st, n):
        y = np.zeros(n)
        for s2 in sig2:
            z = st.normal(n)
            a = st.bernoulli(p, n)
            y = y + np.where(a, s2 * z * z, 0.0)
        return y

    return draw, p * math.fsum(sig2)


def subexp_mgf(p, lam_grid, samples, seed, sigmas=(1.0,)):
    """Centered MGF of ``Y = sum_k sigma_k**2 Z_k**2 1[A_k]`` against ``exp(lam**2 nu**2 / 2)``.

    With a single unit ``sigma`` this is ``Y = X**2 1[A]``, with ``(nu, b) = (2, 4)``.
    A grid point passes when ``mgf_hat <= bound * (1 + 5 se / mgf_hat)``.
    """
    nu, b = subexp_parameters(sigmas)
    lam_grid = tuple(float(v) for v in lam_grid)
    for lam in lam_grid:
        if not abs(lam) < 1.0 / b:
            raise DomainError(f"lambda {lam} outside (-1/b, 1/b) with b = {b}")
    draw, mean = masked_chisq_sampler(p, sigmas)
    name = f"subexp_mgf(p={p!r}, sigmas={tuple(sigmas)!r})"
    st = _stream(seed, name)
    k = len(lam_grid)
    lam_arr = np.array(lam_grid)
    s = np.zeros(k)
    ss = np.zeros(k)
    for n in _chunks(samples):
        centered = draw(st, n) - mean
        for idx, lam in enumerate(lam_grid):
            e = np.exp(lam * centered)
            s[idx] += ordered_sum(e)
            ss[idx] += ordered_sum(e * e)
    mgf = s / samples
    var = np.maximum(ss / samples - mgf * mgf, 0.0) * samples / max(samples - 1, 1)
    se = np.sqrt(var / samples)
    bound = np.exp(lam_arr * lam_arr * nu * nu / 2.0)
    ok = mgf <= bound * (1.0 + MEAN_SLACK * se / mgf)
    worst = int(np.argmax(mgf / bound))
    details = {"lambda": list(lam_grid), "mgf": mgf.tolist(), "se": se.tolist(),
               "bound": bound.tolist(), "nu": nu, "b": b}
    return ProbeResult(name=name, samples=samples, statistic=float(mgf[worst]),
                       bound=float(bound[worst]), se=float(se[worst]), passed=bool(np.all(ok)),
                       vacuous=False, seed=seed, details=details)


def subexp_tail_bound(nu, b, eps):
    """``2 exp(-min{eps**2 / nu**2, eps / b} / 2)``."""
    return 2.0 * math.exp(-0.5 * min(eps * eps / (nu * nu), eps / b))


def subexp_tail(nu, b, samplefn, eps_grid, samples, seed, mean, name="subexp_tail"):
    """Empirical ``P(|Y - mean| >= eps)`` against the sub-exponential tail bound on a grid.

    ``samplefn(stream, n)`` draws ``n`` samples of ``Y``. Grid points with a
    bound of at least 1 are vacuous; the probe is vacuous when all are.
    """
    if not (nu > 0 and b > 0):
        raise DomainError("nu and b must be positive")
    eps_grid = tuple(float(e) for e in eps_grid)
    name = f"{name}(nu={nu!r}, b={b!r})"
    st = _stream(seed, name)
    hits = np.zeros(len(eps_grid), dtype=np.int64)
    for n in _chunks(samples):
        dev = np.abs(samplefn(st, n) - mean)
        for idx, eps in enumerate(eps_grid):
            hits[idx] += int(np.count_nonzero(dev >= eps))
    p = hits / samples
    se = np.sqrt(p * (1.0 - p) / samples)
    bound = np.array([subexp_tail_bound(nu, b, e) for e in eps_grid])
    vac = bound >= 1.0
    ok = vac | (p <= bound + TAIL_SLACK * se)
    margin = np.where(vac, -np.inf, p - bound - TAIL_SLACK * se)
    worst = int(np.argmax(margin))
    details = {"eps": list(eps_grid), "probability": p.tolist(), "se": se.tolist(),
               "bound": bound.tolist(), "vacuous": vac.tolist()}
    return ProbeResult(name=name, samples=samples, statistic=float(p[worst]),
                       bound=float(bound[worst]), se=float(se[worst]), passed=bool(np.all(ok)),
                       vacuous=bool(np.all(vac)), seed=seed, details=details)


def init_risk_expectation(data, width, trials, seed, eps=0.1):
    """Mean of ``||f(0) - y||**2`` over fresh initializations against ``sum ||x_i||**2 / 2 + ||y||**2``.

    Also checks the Markov consequence
    ``P(||f(0) - y||**2 <= target / eps) >= 1 - eps`` (3 SE slack), recorded
    in ``details``; the probe passes only if both hold.
    """
    if trials < 100:
        raise DomainError("need at least 100 trials")
    if not isinstance(data, Dataset):
        raise DomainError("data must be a Dataset")
    target = 0.5 * ordered_sum(np.cumsum(data.x * data.x, axis=1)[:, -1]) + ordered_sum(data.y * data.y)
    # each trial uses its own (seed, trial) initialization streams
    vals = np.array([squared_error(initialize(data.input_dim, width, seed, t), data)
                     for t in range(trials)])
    mean = ordered_sum(vals) / trials
    dev = vals - mean
    se = math.sqrt(ordered_sum(dev * dev) / (trials - 1) / trials)
    frac = float(np.count_nonzero(vals <= target / eps)) / trials
    frac_se = math.sqrt(frac * (1.0 - frac) / trials)
    markov_ok = frac >= 1.0 - eps - TAIL_SLACK * frac_se
    mean_ok = abs(mean - target) <= MEAN_SLACK * se
    name = f"init_risk_expectation(width={width}, m={data.m}, d={data.input_dim})"
    details = {"markov_fraction": frac, "markov_bound": 1.0 - eps, "markov_se": frac_se,
               "markov_pass": markov_ok, "eps": eps}
    return ProbeResult(name=name, samples=trials, statistic=mean, bound=target, se=se,
                       passed=mean_ok and markov_ok, vacuous=False, seed=seed, details=details)


def weight_bound_threshold(width, eps):
    """``(2 ln(2 width / eps) / width)**0.5``."""
    return math.sqrt(2.0 / width * math.log(2.0 * width / eps))


def weight_bound_event(width, eps, trials, seed):
    """``P(max_k |Wout_k| <= threshold) >= 1 - eps`` for ``Wout_k`` normal with variance ``1/width``.

    ``details["exact"]`` is the exact probability ``erf(threshold sqrt(width / 2))**width``.
    """
    if trials < 100:
        raise DomainError("need at least 100 trials")
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    thr = weight_bound_threshold(width, eps)
    name = f"weight_bound_event(width={width}, eps={eps!r})"
    st = _stream(seed, name)
    per_chunk = max(1, CHUNK // width)
    hits = 0
    done = 0
    scale = 1.0 / math.sqrt(width)
    while done < trials:
        n = min(per_chunk, trials - done)
        w = st.normal((n, width)) * scale
        hits += int(np.count_nonzero(np.all(np.abs(w) <= thr, axis=1)))
        done += n
    p = hits / trials
    se = math.sqrt(p * (1.0 - p) / trials)
    bound = 1.0 - eps
    exact = math.erf(thr * math.sqrt(width / 2.0)) ** width
    return ProbeResult(name=name, samples=trials, statistic=p, bound=bound, se=se,
                       passed=p >= bound - TAIL_SLACK * se, vacuous=bound <= 0.0, seed=seed,
                       details={"threshold": thr, "exact": exact})


def run_suite(seed, scale="quick"):
    """Run every probe at the given scale; returns a list of :class:`ProbeResult`."""
    if scale not in SCALES:
        raise DomainError(f"scale must be one of {sorted(SCALES)}, got {scale!r}")
    n = SCALES[scale]
    results = []
    for sigma in (1.0, 2.0):
        results.append(rectified_second_moment(sigma, n, seed))
    for eps in (1.0, 2.0, 3.0, 4.0, 5.0):
        results.append(gaussian_tail(eps, n, seed))
    for eps in (0.1, 0.5, 2.0):
        results.append(anti_concentration(eps, n, seed))
    for p in (0.0, 0.5, 1.0):
        results.append(subexp_mgf(p, MGF_GRID, n, seed))
    hetero = (0.5, 1.0, 1.5)
    _, b_h = subexp_parameters(hetero)
    results.append(subexp_mgf(0.5, [f * 0.9 / b_h for f in (-1.0, -0.5, 0.0, 0.5, 1.0)], n, seed,
                              sigmas=hetero))
    eps_grid = tuple(float(e) for e in range(1, 21))
    for p in (0.5, 1.0):
        draw, mean = masked_chisq_sampler(p)
        results.append(subexp_tail(2.0, 4.0, draw, eps_grid, n, seed, mean,
                                   name=f"subexp_tail[p={p!r}]"))
    draw, mean = masked_chisq_sampler(0.5, hetero)
    nu_h, b_h = subexp_parameters(hetero)
    results.append(subexp_tail(nu_h, b_h, draw, eps_grid, n, seed, mean,
                               name="subexp_tail[p=0.5, sigmas=(0.5, 1.0, 1.5)]"))
    data = generate_dataset(3, 4, seed, norm_range=(0.5, 2.0))
    results.append(init_risk_expectation(data, 256, max(100, n // 100), seed))
    for eps in (0.1, 0.5):
        results.append(weight_bound_event(64, eps, max(100, n // 64), seed))
    return results


def suite_passed(results):
    """True iff every non-vacuous probe passed."""
    return all(r.passed or r.vacuous for r in results)


def report_to_dict(results, seed, scale):
    return {
        "schema": serialization.schema_tag("probes"),
        "seed": seed,
        "scale": scale,
        "all_pass": suite_passed(results),
        "probes": [r.to_dict() for r in results],
    }
