from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from .config import COMMANDS, ExperimentConfig, available_presets, build_config
from .errors import ConfigError, IntegrationError, NumericalError
from .experiments import run_experiment
from .tables import CsvTable
from .utils import configure_logging, ensure_dir

logger = logging.getLogger("cqed_pairsim.cli")

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_HELP = {
    "spectrum-scan": "Eigenenergies and overlap probabilities across a delta1 grid",
    "lz": "Landau-Zener sweep of delta1 through the psi_3/psi_4 anticrossing",
    "rabi": "Driven, damped master-equation run (photon number, gq2, flux)",
    "interference": "Minimal anticrossing gap against the coupling ratio g2/g1",
    "derived": "Closed-form derived quantities (beta, chi, Gs, half-Rabi time)",
}


def table_paths(out: Path, tables: Sequence[CsvTable]) -> List[Path]:
    """One table keeps `out`; several become <stem>_<name><suffix>."""
    if len(tables) == 1:
        return [out]
    return [out.with_name(f"{out.stem}_{t.name}{out.suffix}") for t in tables]


def sidecar_path(out: Path) -> Path:
    return out.with_name(out.name + ".config.toml")


def _emit(cfg: ExperimentConfig, tables: Sequence[CsvTable]) -> None:
    if cfg.output_path is None:
        for table in tables:
            sys.stdout.write(table.render())
        sys.stdout.flush()
        return
    out = Path(cfg.output_path).expanduser()
    ensure_dir(out.parent)
    for table, path in zip(tables, table_paths(out, tables)):
        table.write(path)
    sidecar = sidecar_path(out)
    sidecar.write_text(cfg.to_toml(), encoding="utf-8")
    logger.info("Effective config written to %s", sidecar)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser("cqed-pairsim")
    sub = parser.add_subparsers(dest="cmd", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=_HELP[name])
        p.add_argument("--config", "-c", help="Path to an experiment config TOML (dotted keys or tables)")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="Override one config key, e.g. --set model.g2_ghz=-0.2 (repeatable)",
        )
        p.add_argument("--preset", choices=available_presets(), help="Start from a shipped preset")
        p.add_argument("--out", help="CSV output path (default: stdout)")
        p.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> None:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose or 0)

    try:
        cfg = build_config(
            args.cmd,
            preset=args.preset,
            config_path=args.config,
            overrides=args.overrides,
            output_path=args.out,
        )
        tables = run_experiment(cfg)
        _emit(cfg, tables)
    except ConfigError as exc:
        logger.error("Configuration error%s: %s", f" ({exc.key})" if exc.key else "", exc)
        raise SystemExit(EXIT_CONFIG) from exc
    except IntegrationError as exc:
        logger.error("Integration failed at t=%.6g ns: %s", exc.time_reached, exc)
        raise SystemExit(EXIT_NUMERICAL) from exc
    except NumericalError as exc:
        logger.error("Numerical failure: %s", exc)
        raise SystemExit(EXIT_NUMERICAL) from exc
