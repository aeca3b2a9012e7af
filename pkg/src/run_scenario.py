from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

from src.config import PROCESSED_DIR, TOOLKIT_NAME, TOOLKIT_VERSION
from src.errors import ConfigurationError, ConfigValidationError, ToolkitError
from src.network.touchstone import TouchstoneFormat, read_touchstone, resample_network, write_touchstone
from src.scenario.schema import Grid, ScenarioConfig, load_scenario, validate_config
from src.scenario.sweeps import run_sweep
from src.utils.io import Provenance, config_hash, staged_outputs, step, write_json, write_table

logger = logging.getLogger("src.run_scenario")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_COMPUTE = 3
EXIT_IO = 4


def _error_json(kind: str, message: str, issues: Optional[list] = None) -> None:
    payload = {"status": "error", "kind": kind, "message": message}
    if issues is not None:
        payload["errors"] = issues
    sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def run(cfg: ScenarioConfig, out_dir: Path, workers: int) -> Path:
    kind = cfg.sweep.kind.value
    prov = Provenance(config_hash=config_hash(cfg.document), seed=cfg.seed)

    with step(f"SCENARIO: {kind}"):
        result = run_sweep(cfg, workers=workers)

    with step(f"WRITE: {out_dir}"):
        with staged_outputs(out_dir) as staging:
            for name, df in sorted(result.tables.items()):
                write_table(df, staging / name, prov)
                logger.info("[OK] %s (%d rows)", name, len(df))
            for name, text in sorted(result.texts.items()):
                (staging / name).write_text(text, encoding="utf-8", newline="\n")
                logger.info("[OK] %s", name)
            summary = {
                "kind": kind,
                "seed": cfg.seed,
                "config_sha256": prov.config_hash,
                "toolkit": f"{TOOLKIT_NAME} {TOOLKIT_VERSION}",
                "outputs": sorted(list(result.tables) + list(result.texts)),
                "results": result.summary,
            }
            write_json(summary, staging / "summary.json")
    return out_dir


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = load_scenario(Path(args.config))
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out_dir = Path(args.out) if args.out else (cfg.io.output_dir or PROCESSED_DIR / cfg.sweep.kind.value)
    run(cfg, out_dir, workers=args.workers)
    logger.info("[OK] outputs in %s", out_dir)
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    path = Path(args.config)
    if not path.exists():
        raise FileNotFoundError(f"Scenario config not found: {path}")
    report = validate_config(path.read_text(encoding="utf-8-sig"), base_dir=path.resolve().parent)
    sys.stdout.write(json.dumps(report.as_dict(), sort_keys=True) + "\n")
    for issue in report.issues:
        logger.warning("[FAIL] %s: %s", issue.path or "<document>", issue.message)
    if report.ok:
        logger.info("[OK] %s is valid", path)
    return EXIT_OK if report.ok else EXIT_CONFIG


def _cmd_convert(args: argparse.Namespace) -> int:
    net = read_touchstone(Path(args.input))
    fmt = TouchstoneFormat(args.format.upper())
    if args.unit:
        net = replace(net, unit=args.unit.upper())
    write_touchstone(net, Path(args.output), fmt=fmt)
    logger.info("[OK] %s -> %s (%s)", args.input, args.output, fmt.value)
    return EXIT_OK


def _cmd_resample(args: argparse.Namespace) -> int:
    net = read_touchstone(Path(args.input))
    grid = Grid(args.start, args.stop, args.step)
    if grid.count < 1 or args.step <= 0:
        raise ConfigurationError(f"invalid resample grid start={args.start} stop={args.stop} step={args.step}")
    out = resample_network(net, grid.values())
    write_touchstone(out, Path(args.output))
    logger.info("[OK] %s resampled to %d points -> %s", args.input, grid.count, args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Simulate and characterize resonantly phase-matched Josephson TWPAs.")
    parser.add_argument("--verbose", action="store_true", help="Debug logging on stderr.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="Run one scenario and write its CSV/JSON outputs.")
    p_run.add_argument("--config", required=True, help="Scenario JSON document.")
    p_run.add_argument("--out", help="Output directory (default: io.output_dir or data/processed/<kind>).")
    p_run.add_argument("--seed", type=int, help="Override the scenario seed.")
    p_run.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="Worker processes for sweeps.")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="Validate a scenario and print every problem found.")
    p_val.add_argument("--config", required=True)
    p_val.set_defaults(func=_cmd_validate)

    p_ts = sub.add_parser("touchstone", help="Touchstone helpers.")
    ts_sub = p_ts.add_subparsers(dest="touchstone_command", required=True)

    p_conv = ts_sub.add_parser("convert", help="Rewrite a .s2p in another number format.")
    p_conv.add_argument("--in", dest="input", required=True)
    p_conv.add_argument("--out", dest="output", required=True)
    p_conv.add_argument("--format", choices=["MA", "DB", "RI", "ma", "db", "ri"], required=True)
    p_conv.add_argument("--unit", choices=["HZ", "KHZ", "MHZ", "GHZ", "hz", "khz", "mhz", "ghz"])
    p_conv.set_defaults(func=_cmd_convert)

    p_res = ts_sub.add_parser("resample", help="Linear re/im interpolation onto a new grid.")
    p_res.add_argument("--in", dest="input", required=True)
    p_res.add_argument("--out", dest="output", required=True)
    p_res.add_argument("--start", type=float, required=True, help="Hz")
    p_res.add_argument("--stop", type=float, required=True, help="Hz")
    p_res.add_argument("--step", type=float, required=True, help="Hz")
    p_res.set_defaults(func=_cmd_resample)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return args.func(args)
    except ConfigValidationError as exc:
        _error_json("config", "scenario failed validation", [i.as_dict() for i in exc.issues])
        logger.error("[FAIL] %s", exc)
        return EXIT_CONFIG
    except ConfigurationError as exc:
        _error_json("config", str(exc))
        logger.error("[FAIL] %s", exc)
        return EXIT_CONFIG
    except ToolkitError as exc:
        _error_json("computation", f"{type(exc).__name__}: {exc}")
        logger.error("[FAIL] %s", exc)
        return EXIT_COMPUTE
    except (OSError, ValueError, KeyError) as exc:
        # ValueError and KeyError here come from unreadable input files (bad JSON/CSV)
        _error_json("io", f"{type(exc).__name__}: {exc}")
        logger.error("[FAIL] %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
