import math

import mpmath
import numpy as np
import pytest

from relugd import network as nw
from relugd.network import Dataset, ShallowReluNet


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_net(rng, d, width, bias_scale=0.5):
    return ShallowReluNet(
        W=rng.standard_normal((width, d)),
        B=bias_scale * rng.standard_normal(width),
        Wout=rng.standard_normal(width) / math.sqrt(width),
        bias=bias_scale * rng.standard_normal(),
    )


def random_dataset(rng, d, m):
    return Dataset(x=rng.standard_normal((m, d)), y=rng.standard_normal(m))


def angle_dataset(angles, y):
    x = np.array([[math.cos(a), math.sin(a)] for a in angles])
    return Dataset(x=x, y=np.asarray(y, dtype=float))


def loop_realize(W, B, Wout, bias, x):
    out = 0.0
    for k in range(len(B)):
        z = 0.0
        for ell in range(len(x)):
            z += W[k][ell] * x[ell]
        z += B[k]
        out += Wout[k] * (z if z > 0 else 0.0)
    return out + bias


def charpoly_roots(A, dps=50):
    """Eigenvalues as roots of the characteristic polynomial (Faddeev-LeVerrier in mpmath)."""
    with mpmath.workdps(dps):
        n = len(A)
        M = mpmath.matrix([[mpmath.mpf(float(v)) for v in row] for row in A])
        coeffs = [mpmath.mpf(1)]
        Mk = mpmath.zeros(n, n)
        I = mpmath.eye(n)
        for k in range(1, n + 1):
            Mk = M * Mk + coeffs[-1] * I
            AM = M * Mk
            c = -sum(AM[i, i] for i in range(n)) / k
            coeffs.append(c)
        roots = mpmath.polyroots(coeffs, maxsteps=200, extraprec=200)
        return sorted(float(mpmath.re(r)) for r in roots)


def cubic_roots_trig(A):
    """Eigenvalues of a symmetric 3x3 matrix by the trigonometric cubic formula in mpmath."""
    with mpmath.workdps(50):
        a = [[mpmath.mpf(float(v)) for v in row] for row in A]
        p1 = a[0][1] ** 2 + a[0][2] ** 2 + a[1][2] ** 2
        q = (a[0][0] + a[1][1] + a[2][2]) / 3
        p2 = (a[0][0] - q) ** 2 + (a[1][1] - q) ** 2 + (a[2][2] - q) ** 2 + 2 * p1
        p = mpmath.sqrt(p2 / 6)
        Bm = mpmath.matrix(3, 3)
        for i in range(3):
            for j in range(3):
                Bm[i, j] = (a[i][j] - (q if i == j else 0)) / p
        r = mpmath.det(Bm) / 2
        r = max(min(r, 1), -1)
        phi = mpmath.acos(r) / 3
        e1 = q + 2 * p * mpmath.cos(phi)
        e3 = q + 2 * p * mpmath.cos(phi + 2 * mpmath.pi / 3)
        e2 = 3 * q - e1 - e3
        return sorted(float(e) for e in (e1, e2, e3))


def smoothed_gradient(net, data, t):
    """Analytic gradient of the smoothed risk (W, B, bias), written as plain loops."""
    m = data.m
    dW = np.zeros_like(net.W)
    dB = np.zeros_like(net.B)
    db = 0.0
    for j in range(m):
        z = net.W @ data.x[j] + net.B
        f = float(np.dot(net.Wout, nw.softplus(z, t))) + net.bias
        r = f - data.y[j]
        g = nw.softplus_deriv(z, t)
        dW += (2.0 / m) * r * (net.Wout * g)[:, None] * data.x[j][None, :]
        dB += (2.0 / m) * r * net.Wout * g
        db += (2.0 / m) * r
    return dW, dB, db


def central_differences(risk_fn, net, h):
    theta = nw.to_parameter_vector(net)
    d, width = net.input_dim, net.width
    grad = np.zeros_like(theta)
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        grad[i] = (risk_fn(nw.from_parameter_vector(tp, d, width))
                   - risk_fn(nw.from_parameter_vector(tm, d, width))) / (2 * h)
    k = width * d
    return grad[:k].reshape(width, d), grad[k:k + width], grad[-1]


def off_kink_instance(rng, margin=1e-2):
    while True:
        d, width, m = rng.integers(1, 4), rng.integers(1, 7), rng.integers(1, 5)
        net = random_net(rng, d, width)
        data = random_dataset(rng, d, m)
        if np.all(np.abs(nw.hidden_preactivations(net, data.x)) > margin):
            return net, data


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "VERDICTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
