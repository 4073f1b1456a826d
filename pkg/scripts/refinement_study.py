import argparse
import logging

import numpy as np
from tqdm import tqdm

from src.config.settings import settings
from src.dependencies import get_enclosure_service, get_norm_service, get_potential_service, get_spectra_service
from src.models.enclosure import EnclosureSpec
from src.models.grid import LameParams, make_grid
from src.models.potential import PotentialSpec
from src.repositories.reports import ReportRepository
from src.services.spectra import ESSENTIAL

logger = logging.getLogger(__name__)
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)


def parse_args():
    parser = argparse.ArgumentParser(description="Track discrete spectra of -Δ* + V as the grid is refined.")
    parser.add_argument("--d", type=int, default=2)
    parser.add_argument("--sizes", type=int, nargs="+", default=[4, 8, 16])
    parser.add_argument("--gamma", type=float, default=0.5)
    parser.add_argument("--amplitude", type=float, default=0.5)
    parser.add_argument("--phase", type=float, default=np.pi / 4)
    parser.add_argument("--lambda", dest="lam", type=float, default=1.0)
    parser.add_argument("--mu", type=float, default=1.0)
    parser.add_argument("--out", default=settings.runtime.OUTPUT_DIR)
    return parser.parse_args()


def main():
    args = parse_args()
    params = LameParams(lam=args.lam, mu=args.mu)
    potential = PotentialSpec(family="complex_rotation", amplitude=args.amplitude, phase=args.phase)
    spec = EnclosureSpec(bound_kind="lebesgue", gamma=args.gamma, d=args.d, params=params, constant_mode="configured")

    norm_service = get_norm_service()
    enclosure_service = get_enclosure_service()
    potential_service = get_potential_service()
    spectra_service = get_spectra_service(enclosure_service=enclosure_service)

    rows = []
    for n in tqdm(args.sizes, desc="grids"):
        grid = make_grid(args.d, n, settings.grid.DEFAULT_L)
        V = potential_service.sample_potential(potential, grid)
        norm = norm_service.lp_norm(V, spec.lebesgue_p).value
        disk = enclosure_service.enclosure_disk(spec, norm)

        # Dense spectrum with containment verdicts
        H = spectra_service.assemble_hamiltonian(V, params, grid)
        report = spectra_service.spectrum_report(H, disk)
        discrete = [z for z, v in zip(report.eigenvalues, report.verdicts) if v != ESSENTIAL]

        rows.append({
            "n": n,
            "dimension": H.dimension,
            "norm": norm,
            "radius": disk.radius,
            "outside_tube": len(discrete),
            "violations": report.violations,
            "max_abs_imag": float(np.max(np.abs(report.eigenvalues.imag))),
            "empirical_constant": enclosure_service.empirical_constant(discrete, norm, spec.gamma, spec.d)
            if norm > 0 else 0.0,
        })
        logger.info(f"n={n}: {len(discrete)} eigenvalues off the tube, {report.violations} violations")

    repository = ReportRepository(args.out)
    repository.save_series(f"refinement_d{args.d}.csv", rows)


if __name__ == "__main__":
    main()
