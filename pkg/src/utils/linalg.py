import logging
from typing import Callable, NamedTuple, Tuple

import numpy as np

from src.errors import ConvergenceError

logger = logging.getLogger(__name__)

LinearMap = Callable[[np.ndarray], np.ndarray]


class PowerIterationResult(NamedTuple):
    sigma: float
    vector: np.ndarray
    iterations: int
    converged: bool


def _norm(x: np.ndarray) -> float:
    return float(np.sqrt(np.vdot(x, x).real))


def power_iter(
        apply: LinearMap,
        apply_adjoint: LinearMap,
        x0: np.ndarray,
        max_iter: int = 1000,
        tol: float = 1e-8,
        label: str = "operator",
        raise_on_failure: bool = True,
) -> PowerIterationResult:
    """Spectral norm of a matrix-free linear map by power iteration on A^H A.

    Args:
        apply: x -> A x
        apply_adjoint: y -> A^H y
        x0: initial guess of the leading right singular vector
        max_iter: maximum number of iterations
        tol: relative change of ‖Ax‖/‖x‖ that stops the iteration
        label: name used in log messages
        raise_on_failure: raise ConvergenceError instead of returning an unconverged estimate

    Returns:
        PowerIterationResult with the norm estimate and the final right vector.
    """
    x = x0 / _norm(x0)
    ratio_old = np.inf
    for it in range(1, max_iter + 1):
        Ax = apply(x)
        ratio = _norm(Ax)
        if ratio == 0.0:
            logger.info(f"{label}: A x = 0 at iteration {it}, norm estimate 0")
            return PowerIterationResult(0.0, x, it, True)
        if abs(ratio - ratio_old) <= tol * ratio:
            logger.info(f"{label}: power iteration converged at {it} iterations, norm {ratio:.6e}")
            return PowerIterationResult(ratio, x, it, True)
        ratio_old = ratio
        x = apply_adjoint(Ax)
        x_norm = _norm(x)
        if x_norm == 0.0:
            return PowerIterationResult(0.0, x0 / _norm(x0), it, True)
        x = x / x_norm

    logger.error(f"{label}: power iteration did not converge in {max_iter} iterations (last {ratio_old:.6e})")
    if raise_on_failure:
        raise ConvergenceError(f"{label}: power iteration stalled", iterations=max_iter, last_iterate=ratio_old)
    return PowerIterationResult(float(ratio_old), x, max_iter, False)


def random_start(shape: Tuple[int, ...], seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def _dual(y: np.ndarray, p: float) -> np.ndarray:
    """Unit vector of the dual ℓ^{p'} ball attaining ⟨z, y⟩ = ‖y‖_p (batched over leading axes)."""
    magnitude = np.abs(y)
    norm = np.sum(magnitude ** p, axis=-1, keepdims=True) ** (1 / p)
    norm = np.where(norm == 0, 1.0, norm)
    phase = np.where(magnitude > 0, y / np.where(magnitude > 0, magnitude, 1.0), 0.0)
    return phase * (magnitude / norm) ** (p - 1)


def induced_pnorm(matrices: np.ndarray, p: float, max_iter: int = 100) -> Tuple[np.ndarray, int]:
    """Induced ℓ^p → ℓ^p norms of a stack of square matrices (..., m, m).

    Exact for p in {1, 2, inf}. For other p the result is a certified lower bound:
    the larger of the best column and the value reached by Boyd's fixed-point ascent.

    Returns:
        (norms with the stack shape, iterations used by the ascent)
    """
    if p == 1:
        return np.abs(matrices).sum(axis=-2).max(axis=-1), 0
    if np.isinf(p):
        return np.abs(matrices).sum(axis=-1).max(axis=-1), 0
    if p == 2:
        return np.linalg.norm(matrices, ord=2, axis=(-2, -1)), 0

    m = matrices.shape[-1]
    q = p / (p - 1)
    columns = (np.abs(matrices) ** p).sum(axis=-2) ** (1 / p)
    best = columns.max(axis=-1)

    adjoint = np.conj(np.swapaxes(matrices, -1, -2))
    x = np.full(matrices.shape[:-1], m ** (-1 / p), dtype=np.complex128)
    active = np.ones(matrices.shape[:-2], dtype=bool)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        y = np.einsum("...jk,...k->...j", matrices, x)
        z = np.einsum("...jk,...k->...j", adjoint, _dual(y, p))
        z_norm = np.sum(np.abs(z) ** q, axis=-1) ** (1 / q)
        stationary = z_norm <= np.real(np.sum(np.conj(z) * x, axis=-1)) * (1 + 1e-14)
        active &= ~stationary
        if not active.any():
            break
        x = np.where(active[..., None], _dual(z, q), x)
    values = np.sum(np.abs(np.einsum("...jk,...k->...j", matrices, x)) ** p, axis=-1) ** (1 / p)
    logger.info(f"induced ℓ^{p:g} norm ascent used {iterations} iterations")
    return np.maximum(best, values), iterations
