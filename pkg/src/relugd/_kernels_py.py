"""Pure-Python/numpy reference for the hot kernels.

Every reduction runs in ascending index order, one IEEE operation at a time,
so results are bit-identical to the compiled kernels in ``_kernels.pyx``.
Reductions over the hidden width use ``np.cumsum``, which accumulates
sequentially (unlike ``np.sum``, which sums pairwise).
"""
import math

import numpy as np

JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100


def preactivations(W, B, X):
    """Return ``Z[k, j] = sum_l W[k, l] * X[j, l] + B[k]`` (width x m)."""
    d = W.shape[1]
    acc = W[:, 0:1] * X[:, 0][None, :]
    for ell in range(1, d):
        acc = acc + W[:, ell:ell + 1] * X[:, ell][None, :]
    return acc + B[:, None]


def forward(Z, Wout, bias):
    """Network outputs ``f[j] = sum_k Wout[k] * relu(Z[k, j]) + bias``."""
    act = np.where(Z > 0.0, Z, 0.0)
    terms = Wout[:, None] * act
    return np.cumsum(terms, axis=0)[-1] + bias


def gradient(Z, Wout, resid, X):
    """Exact risk gradient with the closed-halfline indicator at kinks.

    Returns ``(dW, dB, dbias)``.
    """
    m = X.shape[0]
    scale = 2.0 / m
    coef = np.where(Z >= 0.0, resid[None, :] * Wout[:, None], 0.0)
    sW = coef[:, 0:1] * X[0][None, :]
    sB = coef[:, 0].copy()
    sb = resid[0]
    for j in range(1, m):
        sW = sW + coef[:, j:j + 1] * X[j][None, :]
        sB = sB + coef[:, j]
        sb = sb + resid[j]
    return scale * sW, scale * sB, scale * sb


def gram(Z, Wout):
    """Stochastic Gram matrix ``G[i, j] = sum_k Wout[k]**2 * 1[Z[k,i] >= 0, Z[k,j] >= 0]``."""
    m = Z.shape[1]
    w2 = Wout * Wout
    active = Z >= 0.0
    G = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            terms = np.where(active[:, i] & active[:, j], w2, 0.0)
            G[i, j] = G[j, i] = np.cumsum(terms)[-1]
    return G


def drifts(W, W0, B, B0, C):
    """Maximal per-neuron drifts ``(max_k |W_k - W0_k|, max_k |B_k - B0_k|, max_k C|dW_k| + |dB_k|)``."""
    dW = W - W0
    d = W.shape[1]
    sq = dW[:, 0] * dW[:, 0]
    for ell in range(1, d):
        sq = sq + dW[:, ell] * dW[:, ell]
    normW = np.sqrt(sq)
    absB = np.abs(B - B0)
    combined = C * normW + absB
    return float(normW.max()), float(absB.max()), float(combined.max())


def jacobi_eigenvalues(A):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending."""
    n = A.shape[0]
    a = [[float(A[i, j]) for j in range(n)] for i in range(n)]
    frob = 0.0
    for i in range(n):
        for j in range(n):
            frob += a[i][j] * a[i][j]
    frob = math.sqrt(frob)
    tol = JACOBI_TOL * frob
    for _ in range(JACOBI_MAX_SWEEPS):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p][q]
                if abs(apq) <= tol:
                    continue
                rotated = True
                app = a[p][p]
                aqq = a[q][q]
                theta = (aqq - app) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                a[p][p] = app - t * apq
                a[q][q] = aqq + t * apq
                a[p][q] = 0.0
                a[q][p] = 0.0
                for r in range(n):
                    if r == p or r == q:
                        continue
                    arp = a[r][p]
                    arq = a[r][q]
                    nrp = c * arp - s * arq
                    nrq = s * arp + c * arq
                    a[r][p] = nrp
                    a[p][r] = nrp
                    a[r][q] = nrq
                    a[q][r] = nrq
        if not rotated:
            break
    return np.array(sorted(a[i][i] for i in range(n)))
