"""Predictions produced outside the toolkit, keyed by (parent_index, sample_ordinal)."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..errors import PredictionJoinError

COLUMNS = ["parent_index", "sample_ordinal", "predicted_label"]


class PredictionTable:
    def __init__(self, mapping, source=None):
        self.mapping = dict(mapping)
        self.source = source

    def __len__(self):
        return len(self.mapping)

    def join(self, parent_index, sample_ordinal):
        """Labels for the given identifiers, in the given order."""
        keys = list(zip(np.asarray(parent_index).tolist(), np.asarray(sample_ordinal).tolist()))
        missing = [k for k in keys if k not in self.mapping]
        if missing:
            shown = ", ".join(f"({p}, {s})" for p, s in missing[:20])
            more = f" and {len(missing) - 20} more" if len(missing) > 20 else ""
            raise PredictionJoinError(f"predictions missing for {shown}{more}")
        unknown = set(self.mapping) - set(keys)
        if unknown:
            shown = ", ".join(f"({p}, {s})" for p, s in sorted(unknown)[:20])
            raise PredictionJoinError(f"predictions for unknown identifiers {shown}")
        return np.array([self.mapping[k] for k in keys], dtype=np.int64)


def load_external_predictions(path):
    """Read a ``parent_index,sample_ordinal,predicted_label`` CSV (header required)."""
    path = Path(path)
    if not path.is_file():
        raise PredictionJoinError(f"no such file: {path}")
    mapping = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header[:3] != COLUMNS:
            raise PredictionJoinError(f"{path}: header must start with {','.join(COLUMNS)}")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                key = (int(row[0]), int(row[1]))
                label = int(row[2])
            except (ValueError, IndexError):
                raise PredictionJoinError(f"{path}: line {line}: malformed row {row}") from None
            if key in mapping:
                raise PredictionJoinError(f"{path}: line {line}: duplicate row for {key}")
            mapping[key] = label
    return PredictionTable(mapping, source=str(path))
