"""Reading and writing the CSV and JSON artifacts.

Every CSV is UTF-8 with LF line endings and a mandatory header. Floats are written with 17 significant digits, so
writing and re-reading a finite value gives back the same double.
"""
import json
import logging
import re
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ._errors import ConflictError, ParseError
from ._gibbs import ChainOutput
from ._panel import ForecastPanel
from ._utils import check_exists, check_type

logger = logging.getLogger(__name__)

FORECAST_COLUMNS = ["quantity_id", "instrument_id", "forecast"]
ACTUAL_COLUMNS = ["quantity_id", "actual"]
ESTIMATE_COLUMNS = ["quantity_id", "point_estimate", "ci_low", "ci_high", "n_samples"]
GROUP_COLUMNS = ["quantity_id", "group"]

FLOAT_FORMAT = "%.17g"

_LINE = re.compile(r"line (\d+)")

PathLike = Union[str, Path]


def default_actuals_path(forecasts_path: PathLike) -> Path:
    """``X.csv`` -> ``X_actuals.csv`` in the same directory."""
    p = Path(forecasts_path)
    return p.with_name(f"{p.stem}_actuals{p.suffix or '.csv'}")


def _read_table(path: PathLike, columns: Sequence[str], name: str, exact: bool = True) -> pd.DataFrame:
    check_exists(path, name)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise ParseError("file is empty; a header row is required", path, 1)
    except pd.errors.ParserError as e:
        match = _LINE.search(str(e))
        raise ParseError(f"malformed row ({e})", path, int(match.group(1)) if match else None) from e
    except UnicodeDecodeError as e:
        raise ParseError(f"not valid UTF-8 ({e.reason})", path) from e

    header = [c.strip() for c in frame.columns]
    if (exact and header != list(columns)) or (not exact and not set(columns) <= set(header)):
        raise ParseError(f"expected header {','.join(columns)}; found {','.join(header)}", path, 1)
    frame.columns = header
    for column in ("quantity_id", "instrument_id"):
        if column in frame.columns:
            frame[column] = frame[column].str.strip()
            blank = np.flatnonzero((frame[column] == "").to_numpy())
            if blank.size:
                raise ParseError(f"empty {column}", path, int(blank[0]) + 2)
    return frame


def _floats(frame: pd.DataFrame, column: str, path: PathLike) -> np.ndarray:
    text = frame[column].str.strip()
    try:
        values = text.astype(float).to_numpy()
    except ValueError:
        bad = np.flatnonzero(pd.to_numeric(text, errors="coerce").isna().to_numpy())
        row = int(bad[0]) if bad.size else 0
        raise ParseError(f"{column} value {text.iloc[row]!r} is not a number", path, row + 2)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ParseError(f"{column} value {text.iloc[bad[0]]!r} is not finite", path, int(bad[0]) + 2)
    return values


def _check_unique(frame: pd.DataFrame, key: List[str], path: PathLike):
    duplicated = np.flatnonzero(frame.duplicated(subset=key).to_numpy())
    if duplicated.size:
        row = int(duplicated[0])
        raise ConflictError(tuple(frame.iloc[row][key]), path, row + 2)


def parse_actuals_csv(path: PathLike) -> Dict[str, float]:
    """Read a ``quantity_id,actual`` file."""
    frame = _read_table(path, ACTUAL_COLUMNS, "actuals file")
    _check_unique(frame, ["quantity_id"], path)
    return dict(zip(frame["quantity_id"], _floats(frame, "actual", path).tolist()))


def parse_forecast_csv(path: PathLike,
                       actuals_path: Optional[PathLike] = None,
                       instruments: Optional[Sequence[str]] = None) -> ForecastPanel:
    """Read a ``quantity_id,instrument_id,forecast`` file into a panel.

    Parameters
    ----------
    path : str or Path
    actuals_path : str or Path, optional
        ``quantity_id,actual`` file. Defaults to the sibling ``<stem>_actuals.csv``; if that does not exist either, the
        panel has no actuals.
    instruments : sequence of str, optional
        Fixed instrument ordering, passed to :class:`ForecastPanel`.

    Raises
    ------
    ParseError
        Malformed header or row, with the offending line number (the header is line 1).
    ConflictError
        A (quantity_id, instrument_id) pair appears twice.
    """
    frame = _read_table(path, FORECAST_COLUMNS, "forecasts file")
    forecasts = _floats(frame, "forecast", path)
    _check_unique(frame, ["quantity_id", "instrument_id"], path)

    if actuals_path is None:
        sibling = default_actuals_path(path)
        actuals = parse_actuals_csv(sibling) if sibling.is_file() else None
        if actuals is None:
            logger.debug(f"No actuals file next to {path}.")
    else:
        actuals = parse_actuals_csv(actuals_path)

    panel = ForecastPanel(frame["quantity_id"].tolist(), frame["instrument_id"].tolist(), forecasts, actuals,
                          instruments)
    logger.info(f"Read {panel} from {path}.")
    return panel


def parse_estimates_csv(path: PathLike) -> Dict[str, float]:
    """Point estimates from a file with a ``quantity_id`` column and a ``point_estimate`` (or ``actual``) column.

    Estimates files written by ``infer`` and actuals files are both accepted.
    """
    frame = _read_table(path, ["quantity_id"], "predictions file", exact=False)
    column = next((c for c in ("point_estimate", "actual") if c in frame.columns), None)
    if column is None:
        raise ParseError("expected a point_estimate or actual column", path, 1)
    _check_unique(frame, ["quantity_id"], path)
    return dict(zip(frame["quantity_id"], _floats(frame, column, path).tolist()))


def parse_groups_csv(path: PathLike) -> Dict[str, str]:
    frame = _read_table(path, GROUP_COLUMNS, "groups file")
    _check_unique(frame, ["quantity_id"], path)
    return dict(zip(frame["quantity_id"], frame["group"].str.strip()))


def parse_quantity_list(path: PathLike) -> List[str]:
    """One quantity id per line; blank lines are skipped."""
    check_exists(path, "quantity list")
    with open(path, encoding="utf-8") as f:
        return [line.strip() for line in f if line.strip()]


def write_csv(frame: pd.DataFrame, path: PathLike):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")


def write_json(document: Mapping, path: PathLike):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(document, f, indent=2, default=_json_default)
        f.write("\n")


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_panel_csv(panel: ForecastPanel, path: PathLike, actuals_path: Optional[PathLike] = None) -> Path:
    """Write the panel's forecasts and, if it has any, its actuals (to the sibling file by default).

    Returns
    -------
    Path
        Where the actuals went, or the default location if there were none to write.
    """
    check_type("panel", panel, ForecastPanel)
    forecasts, actuals = panel.to_frames()
    write_csv(forecasts, path)
    actuals_path = default_actuals_path(path) if actuals_path is None else Path(actuals_path)
    if len(actuals):
        write_csv(actuals, actuals_path)
    return actuals_path


def write_estimates_csv(chains: Mapping[str, ChainOutput], path: PathLike):
    rows = [(q, c.point_estimate, c.ci_low, c.ci_high, c.n_samples) for q, c in chains.items()]
    write_csv(pd.DataFrame(rows, columns=ESTIMATE_COLUMNS), path)


def write_point_estimates_csv(predictions: Mapping[str, float], path: PathLike):
    frame = pd.DataFrame({"quantity_id": list(predictions.keys()),
                          "point_estimate": np.fromiter(predictions.values(), dtype=float, count=len(predictions))})
    write_csv(frame, path)
