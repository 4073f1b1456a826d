import logging
import math
from typing import Any, Dict, Iterable, Optional, Tuple, Union

import numpy as np
import scipy.fft
from scipy.signal import fftconvolve

from src.config.settings import settings as default_settings
from src.errors import DegenerateInputError, DomainError, ParameterError
from src.models.fields import MatrixPotentialField, ScalarField
from src.models.grid import Grid
from src.models.operators import DyadicCube
from src.schemas import NormReport
from src.utils import spectral
from src.utils.linalg import induced_pnorm, power_iter, random_start
from src.utils.quadrature import cell_kernel_constant, unit_ball_volume

logger = logging.getLogger(__name__)

Field = Union[ScalarField, MatrixPotentialField]


def sobolev_hardy_bound_d3(lp_norm_3_2: float) -> float:
    """Hölder + sharp Sobolev bound on the Hardy-type constant in d = 3."""
    return 2 ** (4 / 3) / (3 * math.pi ** (4 / 3)) * lp_norm_3_2


def ks_combined_norm(q2: float, ks_value: float, beta: float) -> float:
    """Q₂(|V|)²·‖|V|^β‖_KS^{1/β}, the quantity raised to γ + d/2 in the Kerman–Sawyer enclosure."""
    return q2 ** 2 * ks_value ** (1 / beta)


def _levels(grid: Grid, max_level: int) -> range:
    return range(0, min(max_level, int(math.log2(grid.n))) + 1)


def _blocks(values: np.ndarray, d: int, level: int) -> np.ndarray:
    """Reshape (n,)*d into (cubes, m, ..., m) for the dyadic cubes of one level."""
    n = values.shape[0]
    count, m = 2 ** level, n // 2 ** level
    split = values.reshape(sum(((count, m) for _ in range(d)), ()))
    order = tuple(range(0, 2 * d, 2)) + tuple(range(1, 2 * d, 2))
    return split.transpose(order).reshape((count ** d,) + (m,) * d)


def _cube_index(flat: int, d: int, level: int) -> Tuple[int, ...]:
    return tuple(int(i) for i in np.unravel_index(flat, (2 ** level,) * d))


def _cube_argmax(grid: Grid, flat: int, level: int) -> Dict[str, Any]:
    cube = DyadicCube(level=level, index=_cube_index(flat, grid.d, level))
    return {"level": cube.level, "index": list(cube.index), "side": cube.side(grid)}


class WeightedNormService:
    """Potential-size functionals: L^p, Morrey–Campanato, Kerman–Sawyer, A_p and Hardy constants.

    Sup-type norms are taken over finite families (grid-centered balls with a
    radii set, torus dyadic cubes up to a level cap) and are flagged
    ``restricted_family`` in their reports.
    """

    def __init__(self, settings=None):
        self.settings = settings or default_settings

    def magnitude(self, V: Field) -> np.ndarray:
        """|V(x)|₂ for matrix fields, |f(x)| for scalar fields."""
        if isinstance(V, MatrixPotentialField):
            return V.operator_norm()
        return np.abs(V.samples)

    def _induced_norms(self, V: MatrixPotentialField, p: float) -> np.ndarray:
        norms, iterations = induced_pnorm(V.samples, p, max_iter=self.settings.tolerance.PNORM_MAX_ITER)
        if iterations:
            logger.info(f"|V(x)|_{p:g} lower bound via projected ascent, {iterations} iterations")
        return norms

    def matrix_pointwise_norm(self, V: MatrixPotentialField, p: float) -> ScalarField:
        if p <= 1:
            raise ParameterError(f"p must be > 1, got {p}")
        return ScalarField(grid=V.grid, samples=self._induced_norms(V, p))

    def lp_norm(self, V: Field, p: float) -> NormReport:
        if p < 1:
            raise ParameterError(f"p must be >= 1, got {p}")
        if isinstance(V, MatrixPotentialField):
            pointwise = np.real(self._induced_norms(V, p))
        else:
            pointwise = np.abs(V.samples)
        value = float((np.sum(pointwise ** p) * V.grid.cell_volume) ** (1 / p))
        return NormReport(
            kind="lp", params={"p": p}, value=value,
            settings={"pointwise_norm": f"induced l^{p:g}"},
        )

    # Balls

    def default_radii(self, grid: Grid) -> Tuple[float, ...]:
        factors = self.settings.norms.MC_RADII_FACTORS
        return tuple(sorted({min(f * grid.h, grid.L / 2) for f in factors}))

    def _check_radii(self, grid: Grid, radii: Optional[Iterable[float]]) -> Tuple[float, ...]:
        radii = self.default_radii(grid) if radii is None else tuple(sorted(set(float(r) for r in radii)))
        if not radii:
            raise ParameterError("radii set is empty")
        slack = 1e-12 * grid.L
        if radii[0] < grid.h - slack or radii[-1] > grid.L / 2 + slack:
            raise ParameterError(f"radii must lie in [h, L/2] = [{grid.h:g}, {grid.L / 2:g}]")
        return radii

    def _ball_sums(self, values: np.ndarray, grid: Grid, r: float) -> Tuple[np.ndarray, int]:
        """Σ over the closed torus ball B_r(x) of ``values``, for every center x, and the ball size."""
        indicator = (spectral.torus_distance(grid, np.zeros(grid.d)) <= r * (1 + 1e-12)).astype(float)
        sums = scipy.fft.ifftn(scipy.fft.fftn(values) * scipy.fft.fftn(indicator)).real
        return np.maximum(sums, 0.0), int(indicator.sum())

    def morrey_campanato_norm(
            self,
            V: Field,
            alpha: float,
            p: float,
            radii: Optional[Iterable[float]] = None,
    ) -> NormReport:
        grid = V.grid
        if alpha <= 0 or p < 1 or p > grid.d / alpha * (1 + 1e-12):
            raise ParameterError(f"need alpha > 0 and 1 <= p <= d/alpha, got alpha={alpha}, p={p}")
        radii = self._check_radii(grid, radii)
        powered = self.magnitude(V) ** p

        best, argmax = 0.0, None
        for r in radii:
            sums, _ = self._ball_sums(powered, grid, r)
            values = r ** alpha * (r ** (-grid.d) * sums * grid.cell_volume) ** (1 / p)
            flat = int(np.argmax(values))
            if values.flat[flat] > best or argmax is None:
                best = float(values.flat[flat])
                center = np.unravel_index(flat, grid.shape)
                argmax = {"center": [float(c * grid.h) for c in center], "radius": r}
        return NormReport(
            kind="morrey_campanato", params={"alpha": alpha, "p": p, "radii": list(radii)},
            value=best, argmax=argmax, restricted_family=True,
            settings={"ball": "closed torus ball, grid-centered"},
        )

    def maximal_regularize(
            self, V: ScalarField, p1: float, radii: Optional[Iterable[float]] = None
    ) -> ScalarField:
        """W = (M V^{p₁})^{1/p₁} over the ball family plus the single-cell ball."""
        if p1 <= 1:
            raise ParameterError(f"p1 must be > 1, got {p1}")
        grid = V.grid
        radii = self._check_radii(grid, radii)
        powered = np.abs(V.samples) ** p1
        maximal = powered.copy()
        for r in radii:
            sums, count = self._ball_sums(powered, grid, r)
            np.maximum(maximal, sums / count, out=maximal)
        return ScalarField(grid=grid, samples=maximal ** (1 / p1))

    # Dyadic cubes

    def _nonnegative(self, W: ScalarField) -> np.ndarray:
        values = W.samples
        if np.any(np.abs(values.imag) > 0) or np.any(values.real < 0):
            raise DomainError("expected a real nonnegative scalar field")
        return values.real

    def kerman_sawyer_norm(self, W: ScalarField, alpha: float, max_level: Optional[int] = None) -> NormReport:
        grid = W.grid
        d, h = grid.d, grid.h
        if not 0 < alpha < d:
            raise ParameterError(f"alpha must lie in (0, d), got {alpha}")
        max_level = self.settings.norms.KS_MAX_LEVEL if max_level is None else max_level
        if max_level < 0:
            raise ParameterError("max_level must be >= 0")
        values = self._nonnegative(W)
        if not np.any(values):
            raise DegenerateInputError("Kerman-Sawyer norm of the zero function")

        kappa = cell_kernel_constant(d, alpha, self.settings.norms.KS_QUADRATURE_ORDER)
        diagonal_kernel = h ** (alpha - d) * kappa

        best, argmax, diagonal_bound = 0.0, None, 0.0
        for level in _levels(grid, max_level):
            m = grid.n // 2 ** level
            blocks = _blocks(values, d, level)
            mass = blocks.reshape(len(blocks), -1).sum(axis=1) * grid.cell_volume

            offsets = np.arange(-(m - 1), m) * h
            mesh = np.meshgrid(*([offsets] * d), indexing="ij")
            r = np.sqrt(sum(o ** 2 for o in mesh))
            kernel = np.where(r > 0, r, 1.0) ** (alpha - d)
            kernel[(m - 1,) * d] = diagonal_kernel

            axes = tuple(range(1, d + 1))
            conv = fftconvolve(blocks, kernel[None], mode="same", axes=axes)
            double = (blocks * conv).reshape(len(blocks), -1).sum(axis=1) * grid.cell_volume ** 2
            diagonal = (blocks ** 2).reshape(len(blocks), -1).sum(axis=1) * grid.cell_volume ** 2 * diagonal_kernel

            occupied = mass > 0
            ratios = np.where(occupied, double / np.where(occupied, mass, 1.0), -np.inf)
            diagonal_bound = max(diagonal_bound, float(np.max(np.where(occupied, diagonal / np.where(occupied, mass, 1.0), 0.0))))
            flat = int(np.argmax(ratios))
            if ratios[flat] > best:
                best = float(ratios[flat])
                argmax = _cube_argmax(grid, flat, level)
        logger.info(f"Kerman-Sawyer norm {best:.6e} over levels <= {max_level} (alpha={alpha:g})")
        return NormReport(
            kind="kerman_sawyer", params={"alpha": alpha, "max_level": max_level}, value=best, argmax=argmax,
            restricted_family=True,
            settings={"cubes": "torus dyadic cubes", "quadrature": "cell midpoint"},
            diagnostics={"cell_kernel_constant": kappa, "diagonal_correction_bound": diagonal_bound},
        )

    def a_p_constant(self, w: ScalarField, p: float, max_level: Optional[int] = None) -> NormReport:
        if p <= 1:
            raise ParameterError(f"p must be > 1, got {p}")
        values = w.samples
        if np.any(np.abs(values.imag) > 0) or np.any(values.real <= 0):
            raise DomainError("A_p weight must be real and strictly positive")
        values = values.real
        grid = w.grid
        max_level = self.settings.norms.AP_MAX_LEVEL if max_level is None else max_level
        dual = values ** (-1 / (p - 1))

        best, argmax = 1.0, _cube_argmax(grid, 0, 0)
        for level in _levels(grid, max_level):
            avg_w = _blocks(values, grid.d, level).reshape(2 ** (level * grid.d), -1).mean(axis=1)
            avg_dual = _blocks(dual, grid.d, level).reshape(2 ** (level * grid.d), -1).mean(axis=1)
            q = avg_w * avg_dual ** (p - 1)
            flat = int(np.argmax(q))
            if q[flat] > best:
                best = float(q[flat])
                argmax = _cube_argmax(grid, flat, level)
        return NormReport(
            kind="a_p", params={"p": p, "max_level": max_level}, value=max(best, 1.0), argmax=argmax,
            restricted_family=True, settings={"cubes": "torus dyadic cubes plus the full torus"},
        )

    # Hardy-type constant

    def hardy_constant_estimate(
            self,
            V: Field,
            tol: Optional[float] = None,
            max_iter: Optional[int] = None,
            seed: Optional[int] = None,
    ) -> NormReport:
        """Largest ∫|V||f|² / ∫|∇f|² over mean-zero f, by power iteration."""
        grid = V.grid
        weight = self.magnitude(V)
        if not np.any(weight):
            raise DegenerateInputError("Hardy constant of the zero potential")
        tol = tol or self.settings.tolerance.HARDY_TOL
        max_iter = max_iter or self.settings.tolerance.POWER_ITERATION_MAX_ITER
        seed = self.settings.runtime.DEFAULT_SEED if seed is None else seed

        root = np.sqrt(weight)
        inverse_gradient = spectral.inverse_norm_multiplier(grid, 1)

        def apply(g: np.ndarray) -> np.ndarray:
            return root * spectral.apply_multiplier(g, grid, inverse_gradient)

        def apply_adjoint(y: np.ndarray) -> np.ndarray:
            return spectral.apply_multiplier(root * y, grid, inverse_gradient)

        result = power_iter(
            apply, apply_adjoint, random_start(grid.shape, seed), max_iter=max_iter, tol=tol,
            label="Hardy constant",
        )
        diagnostics: Dict[str, float] = {"iterations": result.iterations}
        if grid.d == 3 and isinstance(V, MatrixPotentialField):
            l32 = self.lp_norm(V, 1.5).value
            diagnostics["sobolev_holder_bound"] = sobolev_hardy_bound_d3(l32)
        return NormReport(
            kind="hardy", params={}, value=result.sigma ** 2, seed=seed,
            settings={"subspace": "mean-zero", "tol": tol},
            diagnostics=diagnostics,
        )

    def holder_chain_factor(self, d: int, alpha: float, p: float) -> float:
        """𝒱_d^{1/p - α/d}, the constant in ‖V‖_{𝓛^{α,p}} ≤ 𝒱_d^{1/p-α/d}‖V‖_{L^{d/α}}."""
        return unit_ball_volume(d) ** (1 / p - alpha / d)

