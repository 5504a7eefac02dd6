"""
Command-line surface: configuration ingestion, subcommand dispatch and report emission.

    python run.py <subcommand> [--config file] [--out dir] [--threads N]
                  [--tolerance t] [--manifest file] [--key value ...]

Any configuration key can be overridden with `--key value`; every run writes its
outputs plus manifest.json under one run directory.
"""

import argparse
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Optional

from config import Config, ExperimentConfig, config_from_mapping, load_config, parse_overrides
from experiments import ExperimentOrchestrator
from models.analytic import analytic_constants
from models.sampling import SeedSpec, sample_fixed_count, sample_ppp
from reports import ReportStore, config_hash, dumps, read_manifest
from utils.errors import InputError, TorusCoverError, exit_code_for

__all__ = ['dispatch', 'load_config', 'RunManifest', 'SUBCOMMANDS', 'DEFAULT_LEMMA_CONFIG']

logger = logging.getLogger(__name__)

SUBCOMMANDS = ('constants', 'sample', 'cover', 'scan', 'multiplicity', 'e123', 'second-moment', 'verify-lemmas')

# verify-lemmas without --config
DEFAULT_LEMMA_CONFIG = {
    'body': 'ball',
    'dimension': '3',
    'radius': '1',
    'torus_side': '4.5',
    'intensity': '1',
    'trials': '10',
    'master_seed': '0',
}


@dataclass
class RunManifest:
    subcommand: str
    config: Optional[Dict[str, Any]]
    master_seed: Optional[int]
    version: str
    started_at: str
    finished_at: Optional[str] = None
    outputs: Dict[str, str] = field(default_factory=dict)
    config_hash: Optional[str] = None
    threads: int = 1
    tolerance: Optional[float] = None
    volume_ratio_m: Optional[float] = None
    packing_volume_ratio: Optional[float] = None
    packing_volume_reference: Optional[float] = None
    performance: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class _ArgumentParser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so bad flags map to exit 1"""

    def error(self, message):
        raise InputError(message)


def create_cli_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog='toruscover', description="Random coverings of flat tori.",
                             formatter_class=argparse.ArgumentDefaultsHelpFormatter, add_help=False,
                             allow_abbrev=False)
    parser.add_argument('--config', help="Flat key=value experiment file.")
    parser.add_argument('--out', help="Run directory. Defaults to <output dir>/<subcommand>-<config hash>.")
    parser.add_argument('--threads', type=int, default=None, help="Worker threads for the trial loop.")
    parser.add_argument('--tolerance', type=float, default=None, help="Root-finding and quadrature tolerance.")
    parser.add_argument('--manifest', help="Re-run from a previous manifest.json.")
    return parser


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec='seconds')


def _resolve_config(subcommand: str, args, overrides: Dict[str, str]) -> Optional[ExperimentConfig]:
    if args.tolerance is not None:
        overrides.setdefault('tolerance', repr(args.tolerance))
    if args.manifest:
        if not os.path.isfile(args.manifest):
            raise InputError(f"manifest '{args.manifest}' does not exist", key='manifest')
        try:
            previous = read_manifest(args.manifest)
        except ValueError as e:
            raise InputError(f"manifest '{args.manifest}' is not valid JSON: {e}", key='manifest')
        if previous.get('subcommand') != subcommand:
            raise InputError(f"manifest was written by '{previous.get('subcommand')}', not '{subcommand}'",
                             key='manifest')
        if args.tolerance is None:
            args.tolerance = previous.get('tolerance')
        if previous.get('config') is None:
            return None
        return config_from_mapping(previous['config'], overrides)
    if args.config:
        return load_config(args.config, overrides)
    if subcommand == 'verify-lemmas':
        return config_from_mapping(DEFAULT_LEMMA_CONFIG, overrides)
    if subcommand == 'constants':
        return None
    raise InputError(f"'{subcommand}' needs --config or --manifest", key='config')


def _run_directory(subcommand: str, args, record: Optional[Dict[str, Any]]) -> str:
    if args.out:
        return args.out
    digest = config_hash({'subcommand': subcommand, 'config': record, 'tolerance': args.tolerance})
    return os.path.join(Config.OUTPUT_DIR, f"{subcommand}-{digest[:12]}")


# ---------------------------------------------------------------------------
# Subcommand handlers: (orchestrator, config, args, store) -> None
# ---------------------------------------------------------------------------

def _constants(orchestrator, config, args, store):
    tolerance = args.tolerance if args.tolerance is not None else (
        config.tolerance if config else Config.ROOT_TOLERANCE)
    delta = config.delta if config else 0.3
    payload = analytic_constants(tolerance, delta).to_dict()
    store.write_report(payload)
    print(dumps(payload), end='')


def _sample(orchestrator, config, args, store):
    torus = config.build_torus()
    intensity = config.single_intensity()
    seed = SeedSpec(config.master_seed, 0)
    if config.process == 'fixed_count':
        points = sample_fixed_count(torus, math.floor(intensity * torus.volume), seed, cap=config.sample_cap)
    else:
        points = sample_ppp(torus, intensity, seed, cap=config.sample_cap)
    store.write_points(points)
    logger.info(f"Sampled {len(points)} points")


def _cover(orchestrator, config, args, store):
    table = orchestrator.run_experiment('cover', config)
    store.write_trials(table.trial_frame())
    store.write_report({**table.summary(), 'rows': table.rows.to_dict(orient='records')})


def _scan(orchestrator, config, args, store):
    table = orchestrator.run_experiment('scan', config)
    store.write_scan(table.rows)
    store.write_trials(table.trial_frame())
    store.write_report(table.summary())


def _with_trials(name: str):
    def handler(orchestrator, config, args, store):
        result = orchestrator.run_experiment(name, config)
        store.write_trials(result.trial_frame())
        store.write_report(result.report)
    return handler


def _verify_lemmas(orchestrator, config, args, store):
    ledger = orchestrator.run_experiment('verify-lemmas', config)
    store.write_ledger(ledger.to_text())
    print(ledger.to_text(), end='')
    return ledger


HANDLERS: Dict[str, Callable] = {
    'constants': _constants,
    'sample': _sample,
    'cover': _cover,
    'scan': _scan,
    'multiplicity': _with_trials('multiplicity'),
    'e123': _with_trials('e123'),
    'second-moment': _with_trials('second-moment'),
    'verify-lemmas': _verify_lemmas,
}


def _execute(argv: List[str]) -> int:
    if not argv or argv[0] not in SUBCOMMANDS:
        name = argv[0] if argv else ''
        raise InputError(f"unknown subcommand '{name}'; expected one of {', '.join(SUBCOMMANDS)}",
                         key='subcommand')
    subcommand = argv[0]
    args, rest = create_cli_parser().parse_known_args(argv[1:])
    overrides = parse_overrides(rest)
    if args.threads is not None and args.threads < 1:
        raise InputError(f"--threads must be a positive integer, got {args.threads}", key='threads')
    if args.tolerance is not None and not args.tolerance > 0:
        raise InputError(f"--tolerance must be positive, got {args.tolerance}", key='tolerance')

    config = _resolve_config(subcommand, args, overrides)
    record = config.to_dict() if config is not None else None
    store = ReportStore(_run_directory(subcommand, args, record))
    orchestrator = ExperimentOrchestrator(args.threads)

    manifest = RunManifest(
        subcommand=subcommand,
        config=record,
        master_seed=config.master_seed if config else None,
        version=Config.VERSION,
        started_at=_now(),
        config_hash=config_hash(record) if record is not None else None,
        threads=orchestrator.runner.threads,
        tolerance=args.tolerance,
    )
    if config is not None:
        body = config.build_body()
        torus = config.build_torus()
        manifest.volume_ratio_m = config.torus_volume_ratio()
        manifest.packing_volume_ratio = torus.volume / body.volume()
        manifest.packing_volume_reference = float(4 ** config.dimension)

    logger.info(f"Running {subcommand} into {store.run_dir}")
    result = HANDLERS[subcommand](orchestrator, config, args, store)

    manifest.finished_at = _now()
    manifest.performance = orchestrator.runner.get_performance_insights()
    outputs = {**store.outputs, 'manifest.json': os.path.join(store.run_dir, 'manifest.json')}
    manifest.outputs = dict(sorted(outputs.items()))
    store.write_manifest(manifest.to_dict())

    if subcommand == 'verify-lemmas':
        result.raise_for_failures()
    return 0


def dispatch(argv: List[str]) -> int:
    """Run one subcommand; returns the process exit status"""
    try:
        return _execute(list(argv))
    except TorusCoverError as e:
        logger.debug("Run failed", exc_info=True)
        print(e.diagnostic(), file=sys.stderr)
        return exit_code_for(e)
    except Exception as e:
        logger.error(f"Unexpected error: {e}", exc_info=True)
        print(f"{type(e).__name__}: {str(e).splitlines()[0] if str(e) else ''}", file=sys.stderr)
        return exit_code_for(e)
