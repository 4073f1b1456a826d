"""Duffy-type rules for the self-interaction of a grid cell with a weakly singular kernel."""
import itertools
import math
from functools import lru_cache

import numpy as np
from scipy import special


def shifted_legendre(order: int):
    """Gauss–Legendre points and weights on [0, 1]."""
    x, w = special.roots_legendre(order)
    return (x + 1) / 2, w / 2


@lru_cache(maxsize=64)
def cell_kernel_constant(d: int, alpha: float, order: int = 24) -> float:
    """κ_d(α) = ∫_{[0,1]^d}∫_{[0,1]^d} |x - y|^{α-d} dx dy.

    A cell of side h then carries the averaged kernel h^{α-d}·κ_d(α). The
    difference x - y reduces the double integral to
    2^d ∫_{[0,1]^d} |t|^{α-d} Π(1 - t_j) dt, which is split into d pyramids by the
    largest coordinate. On each pyramid t_j = t·s_j removes the singularity and
    leaves the weight t^{α-1}, integrated exactly by Gauss–Jacobi.
    """
    if not 0 < alpha < d + 2:
        raise ValueError(f"alpha must lie in (0, d + 2), got {alpha}")
    if d == 1:
        return 2.0 / (alpha * (alpha + 1))

    # integrand in t is (1 - t)·polynomial of degree d - 1, so d nodes are exact
    t, wt = special.roots_sh_jacobi(d + 1, alpha, alpha)
    s, ws = shifted_legendre(order)

    total = 0.0
    for idx in itertools.product(range(order), repeat=d - 1):
        s_vec = s[list(idx)]
        weight = math.prod(ws[list(idx)])
        radial = (1 + np.sum(s_vec ** 2)) ** ((alpha - d) / 2)
        poly = (1 - t) * np.prod(1 - np.outer(t, s_vec), axis=1)
        total += weight * radial * float(np.dot(wt, poly))
    return float(2 ** d * d * total)


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2) / special.gamma(d / 2 + 1)
