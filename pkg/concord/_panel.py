"""The sparse (quantity x instrument) forecast panel shared by the learning, inference and baseline code."""
import logging
from typing import Dict, Iterable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from ._errors import ConflictError, DataError, InvalidInputError

logger = logging.getLogger(__name__)


class ForecastPanel:
    """Sparse panel of forecast changes, optionally with the actual change of every quantity.

    Entries are stored as three aligned arrays: the integer position of each entry's quantity in
    :attr:`quantities`, the integer position of its instrument in :attr:`instruments`, and the forecast value.

    Parameters
    ----------
    quantity_ids : sequence of str
        Quantity of each entry.
    instrument_ids : sequence of str
        Instrument of each entry.
    forecasts : sequence of float
        Forecast change of each entry.
    actuals : mapping of str to float, optional
        Actual change of each quantity. Quantities that only appear here become quantities without readings.
    instruments : sequence of str, optional
        Fix the instrument ordering, e.g. to align a test panel with a training panel. Entries whose instrument is
        not listed raise ``InvalidInputError``.
    """

    def __init__(self,
                 quantity_ids: Sequence,
                 instrument_ids: Sequence,
                 forecasts: Sequence[float],
                 actuals: Optional[Mapping] = None,
                 instruments: Optional[Sequence] = None):

        quantity_ids = [str(q) for q in quantity_ids]
        instrument_ids = [str(a) for a in instrument_ids]
        forecasts = np.asarray(forecasts, dtype=float).reshape(-1)
        if not len(quantity_ids) == len(instrument_ids) == forecasts.size:
            raise InvalidInputError("quantity_ids, instrument_ids and forecasts must have equal lengths.")
        if not np.all(np.isfinite(forecasts)):
            raise InvalidInputError("Forecast values must be finite.")

        actuals = {} if actuals is None else {str(k): float(v) for k, v in actuals.items()}

        q_codes, q_uniques = pd.factorize(pd.Series(quantity_ids, dtype=object), sort=False)
        quantities = list(q_uniques)
        extra = [q for q in actuals if q not in set(quantities)]
        if extra:
            logger.warning(f"{len(extra)} quantities have actuals but no forecasts.")
        self.quantities = quantities + extra

        if instruments is None:
            a_codes, a_uniques = pd.factorize(pd.Series(instrument_ids, dtype=object), sort=False)
            self.instruments = list(a_uniques)
        else:
            self.instruments = [str(a) for a in instruments]
            lookup = {a: pos for pos, a in enumerate(self.instruments)}
            unknown = sorted(set(instrument_ids) - set(lookup))
            if unknown:
                raise InvalidInputError(f"Instruments {unknown[:5]} are not in the supplied instrument list.")
            a_codes = np.array([lookup[a] for a in instrument_ids], dtype=np.int64)

        self.quantity_index = np.asarray(q_codes, dtype=np.int64)
        self.instrument_index = np.asarray(a_codes, dtype=np.int64)
        self.forecasts = forecasts

        pairs = self.quantity_index * max(len(self.instruments), 1) + self.instrument_index
        unique_pairs, counts = np.unique(pairs, return_counts=True)
        if np.any(counts > 1):
            dup_pair = unique_pairs[counts > 1][0]
            dup_rows = np.flatnonzero(pairs == dup_pair)
            key = (quantity_ids[dup_rows[0]], instrument_ids[dup_rows[0]])
            # entries need not come from a file; the CSV readers report duplicates with their line first
            raise ConflictError(key)

        self.actual_values = np.array([actuals.get(q, np.nan) for q in self.quantities], dtype=float)
        self._quantity_lookup = {q: pos for pos, q in enumerate(self.quantities)}

    def __repr__(self):
        return (f"<ForecastPanel: {self.n_entries} entries, {self.n_quantities} quantities, "
                f"{self.n_instruments} instruments>")

    def __len__(self):
        return self.n_entries

    @property
    def n_entries(self) -> int:
        return int(self.forecasts.size)

    @property
    def n_quantities(self) -> int:
        return len(self.quantities)

    @property
    def n_instruments(self) -> int:
        return len(self.instruments)

    @property
    def has_actuals(self) -> bool:
        """Whether every quantity with at least one entry has an actual."""
        observed = np.unique(self.quantity_index)
        return bool(np.all(np.isfinite(self.actual_values[observed])))

    @property
    def actuals(self) -> Dict[str, float]:
        return {q: float(v) for q, v in zip(self.quantities, self.actual_values) if np.isfinite(v)}

    @property
    def sign_flags(self) -> Dict[str, int]:
        """xi = 1 if the actual change is strictly positive, else 0."""
        return {q: int(v > 0) for q, v in self.actuals.items()}

    @property
    def entry_actuals(self) -> np.ndarray:
        return self.actual_values[self.quantity_index]

    @property
    def entry_signs(self) -> np.ndarray:
        return (self.entry_actuals > 0).astype(np.int64)

    @property
    def readings_per_quantity(self) -> np.ndarray:
        return np.bincount(self.quantity_index, minlength=self.n_quantities)

    def require_actuals(self, name: str = "panel"):
        """Raise ``DataError`` unless every entry's quantity has an actual."""
        if self.n_entries == 0:
            raise DataError(f"The {name} is empty.")
        if not self.has_actuals:
            missing = [q for q, v in zip(self.quantities, self.actual_values) if not np.isfinite(v)]
            raise DataError(f"The {name} lacks actuals for {len(missing)} quantities, e.g. {missing[:5]}.")

    def consensus(self) -> np.ndarray:
        """Uniform average of the readings of every quantity (nan for quantities without readings)."""
        counts = self.readings_per_quantity
        totals = np.bincount(self.quantity_index, weights=self.forecasts, minlength=self.n_quantities)
        with np.errstate(invalid="ignore", divide="ignore"):
            return totals / counts

    def readings_for(self, quantity_id: str) -> Dict[str, float]:
        """Map instrument id to reading for one quantity."""
        position = self._quantity_lookup[str(quantity_id)]
        rows = np.flatnonzero(self.quantity_index == position)
        return {self.instruments[self.instrument_index[r]]: float(self.forecasts[r]) for r in rows}

    def iter_readings(self) -> Iterable:
        """Yield ``(quantity_id, {instrument_id: reading})`` for every quantity, in panel order."""
        order = np.argsort(self.quantity_index, kind="stable")
        bounds = np.searchsorted(self.quantity_index[order], np.arange(self.n_quantities + 1))
        for position, quantity in enumerate(self.quantities):
            rows = order[bounds[position]:bounds[position + 1]]
            yield quantity, {self.instruments[self.instrument_index[r]]: float(self.forecasts[r]) for r in rows}

    def instrument_positions(self, instruments: Sequence[str]) -> np.ndarray:
        """Position of each entry's instrument inside ``instruments``, or -1 when it is not listed."""
        lookup = {str(a): pos for pos, a in enumerate(instruments)}
        mapping = np.array([lookup.get(a, -1) for a in self.instruments], dtype=np.int64)
        if self.n_entries == 0:
            return np.zeros(0, dtype=np.int64)
        return mapping[self.instrument_index]

    def _from_rows(self, rows: np.ndarray, quantities: Optional[Sequence[str]] = None) -> "ForecastPanel":
        q_ids = [self.quantities[i] for i in self.quantity_index[rows]]
        a_ids = [self.instruments[i] for i in self.instrument_index[rows]]
        keep = set(q_ids) if quantities is None else set(quantities)
        actuals = {q: v for q, v in self.actuals.items() if q in keep}
        return ForecastPanel(q_ids, a_ids, self.forecasts[rows], actuals)

    def select_quantities(self, quantity_ids: Iterable[str]) -> "ForecastPanel":
        """Sub-panel restricted to the given quantities (unknown ids are ignored)."""
        wanted = {str(q) for q in quantity_ids}
        positions = np.array([i for i, q in enumerate(self.quantities) if q in wanted], dtype=np.int64)
        rows = np.flatnonzero(np.isin(self.quantity_index, positions))
        return self._from_rows(rows, [self.quantities[i] for i in positions])

    def without_actuals(self) -> "ForecastPanel":
        q_ids = [self.quantities[i] for i in self.quantity_index]
        a_ids = [self.instruments[i] for i in self.instrument_index]
        return ForecastPanel(q_ids, a_ids, self.forecasts)

    def to_frames(self):
        """Return ``(forecasts, actuals)`` as pandas DataFrames in the long CSV layout."""
        forecasts = pd.DataFrame({
            "quantity_id": [self.quantities[i] for i in self.quantity_index],
            "instrument_id": [self.instruments[i] for i in self.instrument_index],
            "forecast": self.forecasts,
        })
        actuals = pd.DataFrame({
            "quantity_id": list(self.actuals.keys()),
            "actual": np.fromiter(self.actuals.values(), dtype=float, count=len(self.actuals)),
        })
        return forecasts, actuals
