import argparse
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from pydantic import ValidationError

from src.config.settings import settings
from src.dependencies import get_pipeline_service
from src.schemas import RunConfig
from src.services.pipeline import EXIT_USAGE

logger = logging.getLogger(__name__)
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)

COMMANDS = ("norms", "enclose", "bsnorm", "spectrum", "verify", "planewave")


def parse_grid(text: str) -> Dict[str, float]:
    """``d=2,n=8[,L=6.28]`` -> {"d": 2, "n": 8, "L": 6.28}."""
    out: Dict[str, float] = {}
    for item in text.split(","):
        key, sep, value = item.partition("=")
        key = key.strip()
        if not sep or key not in ("d", "n", "L"):
            raise argparse.ArgumentTypeError(f"expected d=..,n=..[,L=..], got {text!r}")
        out[key] = float(value) if key == "L" else int(value)
    return out


def parse_complex_pair(text: str) -> Tuple[float, float]:
    """``re,im`` or a bare real part."""
    parts = text.split(",")
    try:
        if len(parts) == 1:
            return float(parts[0]), 0.0
        if len(parts) == 2:
            return float(parts[0]), float(parts[1])
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected re,im, got {text!r}")


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lame-spectra",
        description="Eigenvalue enclosures and numerical checks for perturbed Lamé operators -Δ* + V on a torus.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="JSON run configuration; flags below override it")
    parser.add_argument("--out", dest="output_dir", help="Report directory")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--threads", type=int)

    grid = parser.add_argument_group("grid")
    grid.add_argument("--grid", type=parse_grid, help="d=2,n=8[,L=6.28]")
    grid.add_argument("--d", type=int, help="Spatial dimension (overrides --grid d)")

    bound = parser.add_argument_group("bound")
    bound.add_argument("--kind", choices=("lebesgue", "morrey_campanato", "kerman_sawyer"))
    bound.add_argument("--gamma", type=float)
    bound.add_argument("--p", type=float, help="Morrey-Campanato integrability exponent")
    bound.add_argument("--alpha", type=float)
    bound.add_argument("--constant-mode", choices=("explicit_d3", "configured"))
    bound.add_argument("--configured-constant", type=float)
    bound.add_argument("--c-F", dest="c_F", type=float)
    bound.add_argument("--c-KS", dest="c_KS", type=float)
    bound.add_argument("--riesz-C", dest="riesz_C", type=float)
    bound.add_argument("--riesz-source", dest="riesz_source", choices=("a_2", "empirical"),
                       help="c_V for the d = 3 stability conditions")

    material = parser.add_argument_group("material")
    material.add_argument("--lambda", dest="lam", type=float)
    material.add_argument("--mu", type=float)

    potential = parser.add_argument_group("potential")
    potential.add_argument("--potential", dest="family", help="Potential family")
    potential.add_argument("--amplitude", type=float)
    potential.add_argument("--width", type=float)
    potential.add_argument("--phase", type=float)
    potential.add_argument("--regularization", dest="potential_epsilon", type=float,
                           help="epsilon of the inverse-square family")
    potential.add_argument("--potential-path", dest="path", help="LFD1 file for the 'file' family")
    potential.add_argument("--potential-seed", dest="potential_seed", type=int)

    run = parser.add_argument_group("run")
    run.add_argument("--z", dest="z_values", type=parse_complex_pair, action="append",
                     help="Spectral parameter re,im (repeatable)")
    run.add_argument("--epsilon", dest="epsilons", type=float, action="append",
                     help="Imaginary shift for embedded z (repeatable)")
    run.add_argument("--suite", help="Verification suite, or 'all'")
    run.add_argument("--mode", dest="wave_mode", choices=("S", "P"))
    run.add_argument("--axis", dest="wave_axis", type=int)
    run.add_argument("--wave-z", dest="wave_z", type=float)
    run.add_argument("--weyl-scale", dest="weyl_scale", type=int)
    return parser


def _set(data: Dict[str, Any], path: Sequence[str], value: Any) -> None:
    if value is None:
        return
    for key in path[:-1]:
        data = data.setdefault(key, {})
    data[path[-1]] = value


def build_config_data(args: argparse.Namespace, base: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Merge CLI overrides into the JSON configuration."""
    data: Dict[str, Any] = dict(base or {})
    data["command"] = args.command
    for key, value in (args.grid or {}).items():
        _set(data, ("grid", key), value)
    overrides: List[Tuple[Tuple[str, ...], Any]] = [
        (("grid", "d"), args.d),
        (("output_dir",), args.output_dir),
        (("seed",), args.seed),
        (("threads",), args.threads),
        (("bound", "kind"), args.kind),
        (("bound", "gamma"), args.gamma),
        (("bound", "p"), args.p),
        (("bound", "alpha"), args.alpha),
        (("bound", "constant_mode"), args.constant_mode),
        (("constants", "configured_constant"), args.configured_constant),
        (("constants", "c_F"), args.c_F),
        (("constants", "c_KS"), args.c_KS),
        (("constants", "riesz_C"), args.riesz_C),
        (("constants", "riesz_source"), args.riesz_source),
        (("lame", "lambda"), args.lam),
        (("lame", "mu"), args.mu),
        (("potential", "family"), args.family),
        (("potential", "amplitude"), args.amplitude),
        (("potential", "width"), args.width),
        (("potential", "phase"), args.phase),
        (("potential", "epsilon"), args.potential_epsilon),
        (("potential", "path"), args.path),
        (("potential", "seed"), args.potential_seed),
        (("z_values",), args.z_values),
        (("epsilons",), args.epsilons),
        (("suite",), args.suite),
        (("wave_mode",), args.wave_mode),
        (("wave_axis",), args.wave_axis),
        (("wave_z",), args.wave_z),
        (("weyl_scale",), args.weyl_scale),
    ]
    for path, value in overrides:
        _set(data, path, value)
    lame = data.get("lame")
    if isinstance(lame, dict) and "lam" in lame and "lambda" in lame:
        lame.pop("lam")
    return data


def load_config_file(path: Path) -> Dict[str, Any]:
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValueError(f"{path} must hold a JSON object")
    return data


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else 0

    base: Dict[str, Any] = {}
    if args.config is not None:
        try:
            base = load_config_file(args.config)
        except json.JSONDecodeError as e:
            logger.error(f"{args.config}: malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}")
            return EXIT_USAGE
        except (OSError, ValueError) as e:
            logger.error(f"cannot read config {args.config}: {e}")
            return EXIT_USAGE

    try:
        config = RunConfig.model_validate(build_config_data(args, base))
    except ValidationError as e:
        logger.error(f"invalid run configuration: {e}")
        return EXIT_USAGE

    logger.info(f"Running {config.command} (seed {config.seed}, output {config.output_dir})")
    if settings.runtime.LAME_SPECTRA_CACHE:
        logger.info(f"Spectrum cache at {settings.runtime.LAME_SPECTRA_CACHE}")
    return get_pipeline_service().execute(config)


if __name__ == "__main__":
    raise SystemExit(main())
