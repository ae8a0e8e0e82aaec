"""
🗂️ Run Reports
==============
Run-file persistence and plot-data tables for discord sweeps! 📊

Run files are JSON Lines: one RunRecord per line, floats written with
Python's shortest round-trip repr. Reports are CSV (LF endings, header
always present):
- <expr>_min_curve.csv  p,min_discord,count_feasible
- <expr>_scatter.csv    bell_value,discord,feasible,strategy,seed
- aggregate.csv         expr,p,min_discord,count_feasible,count_total

Part of: Discord Certifier tools
"""

import json
import logging
import sys
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

# Add tools directory to path for imports
current_dir = Path(__file__).resolve().parent
if str(current_dir) not in sys.path:
    sys.path.insert(0, str(current_dir))

try:
    from BellExpressions import EXPRESSION_NAMES
    from SweepHarness import RunRecord, aggregate
except ImportError:
    from tools.BellExpressions import EXPRESSION_NAMES
    from tools.SweepHarness import RunRecord, aggregate

logger = logging.getLogger(__name__)

# ============================================================================
# CONFIGURATION
# ============================================================================

MIN_CURVE_COLUMNS = ["p", "min_discord", "count_feasible"]
SCATTER_COLUMNS = ["bell_value", "discord", "feasible", "strategy", "seed"]
AGGREGATE_COLUMNS = ["expr", "p", "min_discord", "count_feasible", "count_total"]
ENVELOPE_BINS = 40
ENVELOPE_TOL = 0.03


class RunFileError(Exception):
    """Malformed run file line."""
    pass


class ReportError(Exception):
    """Report precondition violated (e.g. records from several expressions)."""
    pass


# ============================================================================
# RUN FILES
# ============================================================================

def _record_line(record: RunRecord, include_timing: bool) -> str:
    data = record.to_dict()
    if not include_timing:
        data["wall_time"] = 0.0
    return json.dumps(data, ensure_ascii=False)


def write_runs(records: Iterable[RunRecord], path, include_timing: bool = True) -> Path:
    """
    Write records as JSON Lines, replacing any existing file.

    With include_timing=False wall_time is written as 0.0, so identical
    sweeps produce identical bytes.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for record in records:
            f.write(_record_line(record, include_timing) + "\n")
    return path


def append_runs(records: Iterable[RunRecord], path, include_timing: bool = True) -> Path:
    """Append records to a run file (single writer)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'a', encoding='utf-8', newline='\n') as f:
        for record in records:
            f.write(_record_line(record, include_timing) + "\n")
    return path


def read_runs(path) -> List[RunRecord]:
    """
    Load every record from a run file.

    A trailing line without a newline that fails to parse is treated as a
    write in progress and skipped.

    Raises:
        RunFileError: Naming the 1-based line number of a malformed line
    """
    text = Path(path).read_text(encoding='utf-8')
    lines = text.split("\n")
    complete = text.endswith("\n") or text == ""
    records: List[RunRecord] = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        is_partial_tail = number == len(lines) and not complete
        try:
            records.append(RunRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            if is_partial_tail:
                logger.warning(f"⚠️ Ignoring partial trailing line {number} in {path}")
                continue
            raise RunFileError(f"❌ {path}: malformed run record on line {number}: {e}") from e
    return records


# ============================================================================
# PLOT DATA
# ============================================================================

def _single_expression(records: Sequence[RunRecord], expr_name: Optional[str]) -> Optional[str]:
    names = {r.expr_name for r in records}
    if expr_name is not None:
        names.add(expr_name)
    if len(names) > 1:
        raise ReportError(f"❌ Records span several expressions: {sorted(names)}")
    return next(iter(names), None)


def _to_csv(df: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, lineterminator="\n")
    return path


def emit_min_curve(records: Sequence[RunRecord], expr_name: Optional[str] = None,
                   path=None) -> pd.DataFrame:
    """
    Per-p minimum certified discord, ascending in p.

    Points with no feasible record get an empty min and count 0.

    Raises:
        ReportError: If records come from more than one expression
    """
    name = _single_expression(records, expr_name)
    table = aggregate(name or "", records).to_frame()[MIN_CURVE_COLUMNS]
    if path is not None:
        _to_csv(table, path)
    return table


def emit_scatter(records: Sequence[RunRecord], expr_name: Optional[str] = None,
                 path=None) -> pd.DataFrame:
    """
    One row per valid-state record: achieved Bell value against certified discord.

    Records whose state never decoded (no certified discord) are left out;
    infeasible records with a valid state stay in, flagged.
    """
    _single_expression(records, expr_name)
    table = pd.DataFrame(
        [{"bell_value": r.bell_achieved, "discord": r.discord_certified,
          "feasible": r.feasible, "strategy": r.strategy, "seed": r.seed}
         for r in records if r.discord_certified is not None],
        columns=SCATTER_COLUMNS,
    )
    if path is not None:
        _to_csv(table, path)
    return table


def envelope_fraction(records: Sequence[RunRecord], bins: int = ENVELOPE_BINS,
                      tol: float = ENVELOPE_TOL) -> float:
    """
    Fraction of scatter points within tol of the lower or upper discord envelope.

    Envelopes are the per-bin min and max discord after binning by Bell value.
    """
    points = [(r.bell_achieved, r.discord_certified) for r in records
              if r.discord_certified is not None and np.isfinite(r.bell_achieved)]
    if not points:
        return 0.0
    df = pd.DataFrame(points, columns=["bell", "discord"])
    df["bin"] = pd.cut(df["bell"], bins=bins, labels=False, include_lowest=True)
    low = df.groupby("bin")["discord"].transform("min")
    high = df.groupby("bin")["discord"].transform("max")
    near = ((df["discord"] - low) <= tol) | ((high - df["discord"]) <= tol)
    return float(near.mean())


def aggregate_table(records: Sequence[RunRecord]) -> pd.DataFrame:
    """Cross-expression min-discord table in canonical expression order."""
    order = {name: i for i, name in enumerate(EXPRESSION_NAMES)}
    names = sorted({r.expr_name for r in records}, key=lambda n: (order.get(n, len(order)), n))
    frames = []
    for name in names:
        frame = aggregate(name, [r for r in records if r.expr_name == name]).to_frame()
        frame.insert(0, "expr", name)
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=AGGREGATE_COLUMNS)
    return pd.concat(frames, ignore_index=True)[AGGREGATE_COLUMNS]


def write_report(records: Sequence[RunRecord], out_dir) -> Dict[str, dict]:
    """
    Write every report table for a run corpus.

    Returns:
        expr → {"min_curve": path, "scatter": path, "envelope_fraction": float},
        plus "aggregate" → {"path": path}
    """
    out_dir = Path(out_dir)
    summary: Dict[str, dict] = {}
    table = aggregate_table(records)
    for name in table["expr"].drop_duplicates():
        subset = [r for r in records if r.expr_name == name]
        summary[name] = {
            "min_curve": _to_csv(emit_min_curve(subset, name), out_dir / f"{name}_min_curve.csv"),
            "scatter": _to_csv(emit_scatter(subset, name), out_dir / f"{name}_scatter.csv"),
            "envelope_fraction": envelope_fraction(subset),
        }
    summary["aggregate"] = {"path": _to_csv(table, out_dir / "aggregate.csv")}
    return summary
