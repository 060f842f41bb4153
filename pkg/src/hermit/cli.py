"""Command-line front end.

Precedence of settings: built-in defaults < ``--preset`` (divided by
``--scale``) < ``--config`` JSON file < individual flags.

Exit codes: 0 ok, 2 validation error, 3 I/O error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from hermit import __version__
from hermit.errors import ConfigurationError, NumericalError
from hermit.montecarlo import METHODS, ExperimentConfig, SweepResult, quantizer_metadata, sweep

log = logging.getLogger("hermit")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERICAL = 0, 2, 3, 4

PRESETS = {
    "fig3a": dict(B=256, U=32, S=64, q=4, AC=16, rho_db=25.0, propagation="los", methods=METHODS),
    "fig4a": dict(
        B=256, U=32, S=8, q=4, AC=16, rho_db=25.0, propagation="los",
        methods=("JL", "DEq", "HERMIT-PQ", "HERMIT-QQ"),
    ),
    "fig5a": dict(
        B=256, U=32, S=64, q=4, AC=16, rho_db=30.0, propagation="los",
        methods=("JL", "DEq", "HERMIT-QQ"),
    ),
}

CSV_HEADER = ["method", "snr_db", "bits", "bit_errors", "ber", "ci_low", "ci_high"]

_FIELD_TYPES = {
    "B": int, "U": int, "propagation": str, "methods": list, "q": int, "S": int, "AC": int,
    "rho_db": float, "snr_grid_db": list, "trials_per_point": int, "channels_per_point": int,
    "seed": int, "nlos_paths": int, "nlos_spread_deg": float,
}

_ALPHABET_METHOD = {"uq": "HERMIT-UQ", "pq": "HERMIT-PQ", "qq": "HERMIT-QQ"}


@dataclass
class RunManifest:
    out_dir: Path
    config_path: Path | None = None
    preset: str | None = None
    scale: int = 1
    overrides: dict = field(default_factory=dict)
    jobs: int = 1
    force: bool = False
    verbosity: int = 0


def _check_types(values: dict, source: str) -> dict:
    unknown = set(values) - set(_FIELD_TYPES)
    if unknown:
        raise ConfigurationError(f"unknown keys in {source}: {sorted(unknown)}")
    for key, value in values.items():
        expected = _FIELD_TYPES[key]
        ok = (
            isinstance(value, (int, float)) and not isinstance(value, bool)
            if expected is float
            else isinstance(value, (list, tuple)) if expected is list
            else isinstance(value, expected) and not isinstance(value, bool)
        )
        if not ok:
            raise ConfigurationError(f"{source}: {key} must be of type {expected.__name__}, got {value!r}")
    return values


def scaled_preset(name: str, scale: int) -> dict:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    if scale < 1:
        raise ConfigurationError("--scale must be a positive integer")
    values = dict(PRESETS[name])
    for key in ("B", "U", "S"):
        if values[key] % scale:
            raise ConfigurationError(f"--scale {scale} does not divide {key}={values[key]}")
        values[key] //= scale
    return values


def _number_list(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _method_list(text: str) -> list[str]:
    return [tok.strip() for tok in text.split(",") if tok.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hermit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a BER sweep and write CSV + JSON metadata")
    run.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    run.add_argument("--preset", choices=sorted(PRESETS))
    run.add_argument("--scale", type=int, default=1, help="divide the preset's B, U and S by N")
    run.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    run.add_argument("--jobs", type=int, default=1, help="worker processes")
    run.add_argument("--force", action="store_true", help="overwrite results in an existing directory")
    run.add_argument("-v", "--verbose", action="count", default=0)

    run.add_argument("--seed", type=int)
    run.add_argument("--methods", type=_method_list, help=f"comma-separated subset of {','.join(METHODS)}")
    run.add_argument("--snr", type=_number_list, dest="snr_grid_db", help="comma-separated SNR grid in dB")
    run.add_argument("--rho", type=float, dest="rho_db", help="relative jammer power in dB (-inf: no jammer)")
    run.add_argument("--bits", type=int, dest="q", help="ADC resolution")
    run.add_argument("--cluster", type=int, dest="S", help="cluster size S")
    run.add_argument("--ac", type=int, dest="AC", help="alphabet cardinality")
    run.add_argument("--alphabet", choices=sorted(_ALPHABET_METHOD), help="HERMIT variant to run")
    run.add_argument("--prop", choices=("los", "nlos"), dest="propagation")
    run.add_argument("--antennas", type=int, dest="B")
    run.add_argument("--users", type=int, dest="U")
    run.add_argument("--trials", type=int, dest="trials_per_point")
    run.add_argument("--channels", type=int, dest="channels_per_point")
    run.add_argument("--nlos-paths", type=int, dest="nlos_paths")
    run.add_argument("--nlos-spread", type=float, dest="nlos_spread_deg")
    return parser


def parse_and_validate(argv=None) -> tuple[RunManifest, ExperimentConfig]:
    args = build_parser().parse_args(argv)
    flag_values = {
        key: getattr(args, key)
        for key in _FIELD_TYPES
        if getattr(args, key, None) is not None
    }
    manifest = RunManifest(
        out_dir=args.out,
        config_path=args.config,
        preset=args.preset,
        scale=args.scale,
        overrides=flag_values,
        jobs=args.jobs,
        force=args.force,
        verbosity=args.verbose,
    )
    if manifest.jobs < 1:
        raise ConfigurationError("--jobs must be >= 1")

    values: dict = {}
    if args.preset:
        values.update(scaled_preset(args.preset, args.scale))
    elif args.scale != 1:
        raise ConfigurationError("--scale only applies together with --preset")
    if args.config:
        try:
            file_values = json.loads(args.config.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{args.config}: invalid JSON ({exc})") from exc
        if not isinstance(file_values, dict):
            raise ConfigurationError(f"{args.config}: top level must be an object")
        values.update(_check_types(file_values, str(args.config)))
    values.update(_check_types(flag_values, "command line"))

    if args.alphabet:
        wanted = _ALPHABET_METHOD[args.alphabet]
        methods = [m for m in values.get("methods", METHODS) if not m.startswith("HERMIT-")]
        values["methods"] = methods + [wanted]
    return manifest, ExperimentConfig(**values)


def write_csv(path: Path, result: SweepResult) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for curve in result.curves:
            low, high = curve.ci
            for k, snr in enumerate(curve.snr_db):
                writer.writerow([
                    curve.method, repr(float(snr)), int(curve.bits_total[k]), int(curve.bit_errors[k]),
                    repr(float(curve.ber[k])), repr(float(low[k])), repr(float(high[k])),
                ])


def metadata(config: ExperimentConfig, wall_time: float) -> dict:
    return {
        "config": config.to_dict(),
        "quantizer": quantizer_metadata(config.q),
        "versions": {
            "hermit": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_time_s": wall_time,
    }


PLOT_RECIPE = '''\
"""Plot BER curves from results.csv (generated by hermit)."""
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib.pyplot as plt

here = Path(__file__).parent
curves = defaultdict(list)
with open(here / "results.csv") as fh:
    for row in csv.DictReader(fh):
        curves[row["method"]].append((float(row["snr_db"]), float(row["ber"])))

fig, ax = plt.subplots()
for method, pts in curves.items():
    snr, ber = zip(*sorted(pts))
    ax.semilogy(snr, [max(b, 1e-7) for b in ber], marker="o", label=method)
ax.set_xlabel("average SNR [dB]")
ax.set_ylabel("uncoded BER")
ax.grid(True, which="both", alpha=0.3)
ax.legend()
fig.savefig(here / "ber.pdf")
'''


def format_table(result: SweepResult) -> str:
    snrs = result.config.snr_grid_db
    lines = ["method".ljust(12) + "".join(f"{s:>11g}" for s in snrs)]
    for curve in result.curves:
        lines.append(curve.method.ljust(12) + "".join(f"{b:>11.3e}" for b in curve.ber))
    return "\n".join(lines)


def execute(manifest: RunManifest, config: ExperimentConfig) -> int:
    out = manifest.out_dir
    csv_path = out / "results.csv"
    if csv_path.exists() and not manifest.force:
        raise FileExistsError(f"{csv_path} exists; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    result = sweep(config, jobs=manifest.jobs)
    wall = time.perf_counter() - start
    write_csv(csv_path, result)
    (out / "metadata.json").write_text(json.dumps(metadata(config, wall), indent=2) + "\n")
    (out / "plot_recipe.py").write_text(PLOT_RECIPE)
    print(format_table(result))
    log.info("wrote %s", csv_path)
    return EXIT_OK


def main(argv=None) -> int:
    try:
        manifest, config = parse_and_validate(argv)
    except ConfigurationError as exc:
        print(f"hermit: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"hermit: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    logging.basicConfig(
        level=logging.WARNING - 10 * min(manifest.verbosity, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return execute(manifest, config)
    except ConfigurationError as exc:
        print(f"hermit: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"hermit: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"hermit: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
