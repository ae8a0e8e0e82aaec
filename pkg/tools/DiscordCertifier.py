"""
🔬 Discord Certifier
====================
Command-line surface for minimal-discord sweeps under a Bell-value constraint! 🚀

Subcommands:
- sweep     basin-hopping sweep over p for one Bell expression → runs file
- bounds    local / quantum bound table for the expression registry
- discord   certified discord of a single state (matrix or StateParams JSON)
- report    min-curve, scatter and aggregate CSVs from a runs file

Exit codes: 0 success, 1 usage error, 2 runtime failure.

Part of: Discord Certifier tools
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

# Add tools directory to path for imports
current_dir = Path(__file__).resolve().parent
if str(current_dir) not in sys.path:
    sys.path.insert(0, str(current_dir))

try:
    from colab_compat import ColabCompat, safe_print, setup_logging
    from LinalgCore import LinalgError, as_matrix, require_hermitian
    from StateModel import PARAM_NAMES, StateModelError, StateParams, assemble_state
    from BellExpressions import (
        EXPRESSION_NAMES, EXPRESSION_SPECS, REGISTRY_SEESAW_RESTARTS, REGISTRY_SEESAW_SEED,
        UnknownExpressionError, get_expression, raw_expression, resolve_bounds,
    )
    from DiscordEngine import DEFAULT_GRID_N, DEFAULT_REFINE_STEPS, discord_certified
    from BasinHoppingOptimizer import DEFAULT_EPSILON, STEP_MODES
    from SweepHarness import (
        DEFAULT_P_STEPS, P_GRID_MARGIN, SweepConfig, SweepError, default_p_grid,
        p_grid_from_range, sweep,
    )
    from RunReports import ReportError, RunFileError, read_runs, write_report, write_runs
except ImportError:
    from tools.colab_compat import ColabCompat, safe_print, setup_logging
    from tools.LinalgCore import LinalgError, as_matrix, require_hermitian
    from tools.StateModel import PARAM_NAMES, StateModelError, StateParams, assemble_state
    from tools.BellExpressions import (
        EXPRESSION_NAMES, EXPRESSION_SPECS, REGISTRY_SEESAW_RESTARTS, REGISTRY_SEESAW_SEED,
        UnknownExpressionError, get_expression, raw_expression, resolve_bounds,
    )
    from tools.DiscordEngine import DEFAULT_GRID_N, DEFAULT_REFINE_STEPS, discord_certified
    from tools.BasinHoppingOptimizer import DEFAULT_EPSILON, STEP_MODES
    from tools.SweepHarness import (
        DEFAULT_P_STEPS, P_GRID_MARGIN, SweepConfig, SweepError, default_p_grid,
        p_grid_from_range, sweep,
    )
    from tools.RunReports import ReportError, RunFileError, read_runs, write_report, write_runs

logger = logging.getLogger(__name__)

# ============================================================================
# CONFIGURATION
# ============================================================================

VERSION = "1.0"
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2
STRATEGY_CHOICES = ("random", "near-quantum", "warm")


class UsageError(Exception):
    """Bad input files or flag combinations detected after parsing."""
    pass


# ============================================================================
# ARGUMENT PARSING
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='DiscordCertifier',
        description='🔬 DiscordCertifier - minimal quantum discord under a Bell-value constraint',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python DiscordCertifier.py bounds --expr chsh
  python DiscordCertifier.py sweep --expr chsh --p-steps 5 --restarts 2 --seed 7 --out runs.jsonl
  python DiscordCertifier.py sweep --config configs/chsh_desk.json --no-progress
  python DiscordCertifier.py discord phi_plus.json
  python DiscordCertifier.py report runs.jsonl --out report/
        """
    )
    parser.add_argument('--version', action='version', version=f'🔬 DiscordCertifier v{VERSION}')

    # Flags shared by every subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--verbose', '-v', action='count', default=0,
                        help='More logging (-v info, -vv debug)')
    common.add_argument('--no-progress', action='store_true',
                        help='Disable progress bars (useful for non-interactive environments)')

    sub = parser.add_subparsers(dest='command', required=True)

    # --- sweep -------------------------------------------------------------
    sp = sub.add_parser('sweep', parents=[common], help='Minimal-discord sweep over the fraction p')
    sp.add_argument('--expr', choices=EXPRESSION_NAMES, help='Bell expression')
    sp.add_argument('--config', type=str, help='SweepConfig JSON file (flags override it)')
    sp.add_argument('--p-min', type=float, help='Smallest fraction p (default p_L - 0.02)')
    sp.add_argument('--p-max', type=float, help='Largest fraction p (default 1.0)')
    sp.add_argument('--p-steps', type=int, help=f'Number of p points (default {DEFAULT_P_STEPS})')
    sp.add_argument('--restarts', type=int, help='Basin-hopping runs per p')
    sp.add_argument('--bh-iters', type=int, help='Local minimizations per basin-hopping run')
    sp.add_argument('--stepsize', type=float, help='Initial hop size')
    sp.add_argument('--temperature', type=float, help='Metropolis temperature (bits)')
    sp.add_argument('--strategy', choices=STRATEGY_CHOICES, help='Initialization strategy')
    sp.add_argument('--step-mode', choices=STEP_MODES, help='bounded (clamped) or default (unclamped) hops')
    sp.add_argument('--eps', type=float, help=f'Bell window half-width (default {DEFAULT_EPSILON})')
    sp.add_argument('--seed', type=int, help='Base seed')
    sp.add_argument('--out', type=str, help='Runs file (JSON Lines)')
    sp.add_argument('--record-timing', action='store_true',
                    help='Write measured wall times (runs files are no longer byte-reproducible)')

    # --- bounds ------------------------------------------------------------
    bp = sub.add_parser('bounds', parents=[common], help='Local and quantum bound table')
    bp.add_argument('--expr', choices=EXPRESSION_NAMES, action='append',
                    help='Expression (repeatable, default all)')
    bp.add_argument('--restarts', type=int, default=REGISTRY_SEESAW_RESTARTS, help='See-saw restarts')
    bp.add_argument('--seed', type=int, default=REGISTRY_SEESAW_SEED, help='See-saw seed')
    bp.add_argument('--out', type=str, help='Optional CSV output')

    # --- discord -----------------------------------------------------------
    dp = sub.add_parser('discord', parents=[common], help='Certified discord of one state')
    dp.add_argument('state', type=str, help='JSON: {"rho": [[[re, im], ...]]}, nested list, or StateParams')
    dp.add_argument('--grid-n', type=int, default=DEFAULT_GRID_N, help='Measurement grid resolution')
    dp.add_argument('--refine-steps', type=int, default=DEFAULT_REFINE_STEPS, help='Refinement steps')

    # --- report ------------------------------------------------------------
    rp = sub.add_parser('report', parents=[common], help='CSV plot data from a runs file')
    rp.add_argument('runs', type=str, help='Runs file (JSON Lines)')
    rp.add_argument('--out', type=str, help='Output folder (default: next to the runs file)')

    return parser


# ============================================================================
# SUBCOMMANDS
# ============================================================================

def _sweep_config(args) -> SweepConfig:
    """Config file values first, then explicit flags on top."""
    data = {}
    if args.config:
        data = SweepConfig.from_json(args.config).to_dict()
    if args.expr:
        data["expr_name"] = args.expr
    if "expr_name" not in data:
        raise UsageError(f"--expr or --config is required; valid expressions: {', '.join(EXPRESSION_NAMES)}")

    overrides = {
        "restarts": args.restarts,
        "bh_iterations": args.bh_iters,
        "stepsize": args.stepsize,
        "temperature": args.temperature,
        "strategy": args.strategy,
        "step_mode": args.step_mode,
        "epsilon": args.eps,
        "base_seed": args.seed,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})

    expr = get_expression(data["expr_name"])
    if any(v is not None for v in (args.p_min, args.p_max, args.p_steps)):
        p_min = args.p_min if args.p_min is not None else max(expr.p_local - P_GRID_MARGIN, 1e-3)
        p_max = args.p_max if args.p_max is not None else 1.0
        steps = args.p_steps if args.p_steps is not None else DEFAULT_P_STEPS
        data["p_grid"] = p_grid_from_range(p_min, p_max, steps)
    elif "p_grid" not in data:
        data["p_grid"] = default_p_grid(expr)
    return SweepConfig.from_dict(data)


def cmd_sweep(args) -> int:
    cfg = _sweep_config(args)
    compat = ColabCompat()
    if args.verbose:
        compat.print_environment()
    out = Path(args.out) if args.out else compat.ensure_output_folder() / f"{cfg.expr_name}_runs.jsonl"

    safe_print(f"📈 Sweep {cfg.expr_name}: {len(cfg.p_grid)} points × {cfg.restarts} restarts "
               f"({cfg.strategy}, seed {cfg.base_seed})")
    agg, records = sweep(cfg, show_progress=not args.no_progress)
    write_runs(records, out, include_timing=args.record_timing)

    safe_print(agg.to_frame().to_string(index=False))
    safe_print(f"💾 {len(records)} runs written to {out}")
    return EXIT_OK


def bounds_table(names: List[str], restarts: int, seed: int) -> pd.DataFrame:
    rows = []
    for name in names:
        if restarts == REGISTRY_SEESAW_RESTARTS and seed == REGISTRY_SEESAW_SEED:
            expr = get_expression(name)
        else:
            expr = resolve_bounds(raw_expression(name), EXPRESSION_SPECS[name][4],
                                  restarts=restarts, rng_seed=seed)
        rows.append({
            "expr": expr.name,
            "label": expr.label,
            "n_alice": expr.n_alice,
            "n_bob": expr.n_bob,
            "local_bound": expr.local_bound,
            "quantum_bound": expr.quantum_bound,
            "p_local": expr.p_local,
            "quantum_bound_source": expr.quantum_bound_source,
            "seesaw_quantum_bound": expr.seesaw_quantum_bound,
            "literature_quantum_bound": expr.literature_quantum_bound,
        })
    return pd.DataFrame(rows)


def cmd_bounds(args) -> int:
    names = args.expr or list(EXPRESSION_NAMES)
    table = bounds_table(names, args.restarts, args.seed)
    ColabCompat().display_dataframe(table)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(out, index=False, lineterminator="\n")
        safe_print(f"💾 Bound table written to {out}")
    return EXIT_OK


def load_state(path) -> np.ndarray:
    """
    Density matrix from a JSON file.

    Accepts {"rho": ...}, a bare nested list (real entries or [re, im] pairs)
    or a StateParams object with the 15 canonical keys.

    Raises:
        UsageError: If the file matches none of these layouts
    """
    with open(path, 'r', encoding='utf-8') as f:
        data = json.load(f)
    if isinstance(data, dict) and set(data) == set(PARAM_NAMES):
        return assemble_state(StateParams.from_dict(data))
    if isinstance(data, dict) and "rho" in data:
        data = data["rho"]
    if not isinstance(data, list):
        raise UsageError(f"{path}: expected a density matrix or StateParams JSON")

    raw = np.asarray(data, dtype=float)
    if raw.ndim == 3 and raw.shape[-1] == 2:
        rho = raw[..., 0] + 1j * raw[..., 1]
    elif raw.ndim == 2:
        rho = raw.astype(complex)
    else:
        raise UsageError(f"{path}: matrix entries must be reals or [re, im] pairs")
    rho = as_matrix(rho, 4)
    require_hermitian(rho)
    return rho


def cmd_discord(args) -> int:
    rho = load_state(args.state)
    result = discord_certified(rho, grid_n=args.grid_n, refine_steps=args.refine_steps)
    safe_print(json.dumps(result.to_dict(), indent=2))
    return EXIT_OK


def cmd_report(args) -> int:
    runs_path = Path(args.runs)
    records = read_runs(runs_path)
    out_dir = Path(args.out) if args.out else runs_path.parent / f"{runs_path.stem}_report"
    summary = write_report(records, out_dir)

    safe_print(f"📊 {len(records)} runs from {runs_path}")
    for name, info in summary.items():
        if name == "aggregate":
            continue
        safe_print(f"   {name}: envelope fraction {info['envelope_fraction']:.3f}")
    safe_print(f"💾 Reports written to {out_dir}")
    return EXIT_OK


COMMANDS = {
    'sweep': cmd_sweep,
    'bounds': cmd_bounds,
    'discord': cmd_discord,
    'report': cmd_report,
}


# ============================================================================
# MAIN
# ============================================================================

def cli_dispatch(argv: Optional[List[str]] = None) -> int:
    """Parse argv, run the subcommand and map failures to exit codes."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    setup_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, UnknownExpressionError, SweepError, StateModelError, LinalgError,
            RunFileError, ReportError, FileNotFoundError, json.JSONDecodeError) as e:
        safe_print(f"❌ {e}")
        return EXIT_USAGE
    except Exception as e:
        logger.debug("Runtime failure", exc_info=True)
        safe_print(f"❌ Fatal error: {e}")
        return EXIT_RUNTIME


def main() -> int:
    return cli_dispatch(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
