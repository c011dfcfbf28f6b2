"""Seeded synthetic datasets with pairwise linearly independent inputs."""
import math

import numpy as np

from relugd.errors import DataGenerationError, DomainError
from relugd.gram import PARALLEL_TOL
from relugd.network import Dataset
from relugd.rng import Stream

MAX_RESAMPLE = 100


def _direction(stream, d):
    while True:
        v = stream.normal(d)
        sq = np.cumsum(v * v)[-1]
        if sq > 0.0:
            return v / math.sqrt(sq)


def _offends(u, others):
    # unit vectors, so the test reduces to |<u, v>| >= 1 - tol
    for v in others:
        if abs(np.cumsum(u * v)[-1]) >= 1.0 - PARALLEL_TOL:
            return True
    return False


def generate_dataset(d, m, seed, norm_range=(1.0, 1.0)):
    """Inputs uniform on spheres with radii uniform in ``norm_range``, targets standard normal.

    Any input parallel to an earlier one is redrawn, at most 100 times per
    input; :class:`DataGenerationError` is raised when that is not enough
    (for example ``d = 1`` and ``m >= 2``).
    """
    if d < 1 or m < 1:
        raise DomainError(f"d and m must be positive, got d={d}, m={m}")
    lo, hi = float(norm_range[0]), float(norm_range[1])
    if not (0.0 < lo <= hi and math.isfinite(hi)):
        raise DomainError(f"norm_range must satisfy 0 < lo <= hi, got {norm_range}")
    sx = Stream(seed, "data_x")
    resample = Stream(seed, "data_resample")
    dirs = []
    for i in range(m):
        u = _direction(sx, d)
        attempts = 0
        while _offends(u, dirs):
            if attempts == MAX_RESAMPLE:
                raise DataGenerationError(
                    f"could not draw input {i} independent of the others after {MAX_RESAMPLE} attempts")
            u = _direction(resample, d)
            attempts += 1
        dirs.append(u)
    radii = lo + (hi - lo) * Stream(seed, "data_radius").uniform(m)
    x = np.array(dirs) * radii[:, None]
    y = Stream(seed, "data_y").normal(m)
    return Dataset(x=x, y=y)
