"""Deterministic low-discrepancy sampling.

Verification reports must be bit-reproducible, so every sample set used by
the library comes from a Halton sequence with a fixed start offset rather
than from a stateful RNG.
"""

import numpy as np
from scipy.special import ndtri

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)


def radical_inverse(index: int, base: int) -> float:
    """Van der Corput radical inverse of a nonnegative index."""
    inv = 0.0
    scale = 1.0 / base
    while index > 0:
        index, digit = divmod(index, base)
        inv += digit * scale
        scale /= base
    return inv


def halton_sequence(count: int, dim: int, start: int = 20) -> np.ndarray:
    """`count` points of the `dim`-dimensional Halton sequence in (0,1)^dim.

    The first `start` indices are skipped; the early entries of the
    sequence are badly correlated across bases.
    """
    if dim > len(_PRIMES):
        raise ValueError(f"halton sampling supports dim <= {len(_PRIMES)}")
    if count < 0:
        raise ValueError("count must be nonnegative")
    pts = np.empty((count, dim))
    for j in range(dim):
        base = _PRIMES[j]
        pts[:, j] = [radical_inverse(i, base) for i in range(start, start + count)]
    return pts


def box_points(count: int, dim: int, halfwidth: float = 3.0, center=None,
               start: int = 20) -> np.ndarray:
    """Halton points mapped affinely into the cube center +- halfwidth."""
    pts = halton_sequence(count, dim, start=start)
    pts = (2.0 * pts - 1.0) * halfwidth
    if center is not None:
        pts = pts + np.asarray(center, dtype=float)
    return pts


def sphere_directions(count: int, dim: int, start: int = 101) -> np.ndarray:
    """Deterministic, roughly equidistributed unit vectors.

    Halton points are pushed through the normal quantile and normalized;
    the image of a spherically symmetric law is uniform on the sphere.
    """
    u = halton_sequence(count, dim, start=start)
    z = ndtri(np.clip(u, 1e-12, 1.0 - 1e-12))
    norms = np.linalg.norm(z, axis=1)
    # a zero row cannot occur after clipping, but guard the division anyway
    norms[norms < 1e-12] = 1.0
    return z / norms[:, None]
