"""Function descriptors on the trapped intervals.

A descriptor is a vectorised callable ``f(x, i, j)`` evaluated at image
points ``x = phi_{i,j}(y)`` lying in ``I_j``; the branch indices let
branch-dependent quantities such as the Jacobian be expressed uniformly.
"""

from __future__ import annotations

import numpy as np

from .ifs import IfsSystem


def _inverse_coeffs(ifs: IfsSystem, i, j):
    a, b, c, d = np.moveaxis(ifs.coef[np.asarray(i), np.asarray(j)], -1, 0)
    return a, c, a * d - b * c


def _branch_sign(ifs: IfsSystem, i, j):
    """Sign of a - c x' on phi_{i,j}(I_i); equals det * sign(c y + d) for y in I_i."""
    a, b, c, d = np.moveaxis(ifs.coef[np.asarray(i), np.asarray(j)], -1, 0)
    y = ifs.bounds[np.asarray(i)].mean(axis=-1)
    return np.sign((a * d - b * c) * (c * y + d))


def jacobian(ifs: IfsSystem):
    """J(x) = log |F'(x)| for the expanding inverse F = phi_{i,j}^{-1} on I_j."""
    if not ifs.is_mobius:
        def J(x, i, j):
            y = ifs.apply_inverse(i, j, x)
            return -np.log(np.abs(ifs.apply(i, j, y)[1]))
        return J

    def J(x, i, j):
        a, c, _ = _inverse_coeffs(ifs, i, j)
        # sign fixed per branch so the formula continues analytically to complex x
        return -2.0 * np.log(_branch_sign(ifs, i, j) * (a - c * x))
    return J


def jacobian_prime(ifs: IfsSystem):
    """Derivative of J along I_j (Moebius branches)."""
    def dJ(x, i, j):
        a, c, _ = _inverse_coeffs(ifs, i, j)
        return 2.0 * c / (a - c * x)
    return dJ


def scaled(f, k: float):
    def g(x, i, j):
        return k * f(x, i, j)
    return g


def zero(x, i, j):
    return np.zeros(np.broadcast(np.asarray(x), np.asarray(i), np.asarray(j)).shape)


def gkw_potential(ifs: IfsSystem, a: float):
    """V = (1 - a) J."""
    return scaled(jacobian(ifs), 1.0 - a)


def gkw_roof(ifs: IfsSystem):
    """tau = -J, the roof making |phi'|^s the spectral weight."""
    return scaled(jacobian(ifs), -1.0)


def gkw_tau_prime(ifs: IfsSystem):
    """Roof derivative tau'(x') = -2 c D / (a - c x') used by the canonical map.

    This is -D J' with D the branch determinant sign: it coincides with the
    derivative of the spectral roof -J for orientation preserving branches
    and flips sign for orientation reversing ones.
    """
    def tp(x, i, j):
        a, c, det = _inverse_coeffs(ifs, i, j)
        return -2.0 * c * np.sign(det) / (a - c * x)
    return tp


def constant(value: float):
    def f(x, i, j):
        return np.full(np.broadcast(np.asarray(x), np.asarray(i), np.asarray(j)).shape, float(value))
    return f
