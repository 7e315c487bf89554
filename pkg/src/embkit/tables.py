"""Minimal column table used by simulations and the CLI for CSV output."""

from dataclasses import dataclass

import numpy as np


@dataclass
class Table:
    """Named columns of equal length; writes comma-delimited CSV with header."""

    columns: list
    data: np.ndarray  # shape (rows, len(columns))

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=np.float64))
        if self.data.shape[1] != len(self.columns):
            raise ValueError("column names do not match data width")

    def column(self, name):
        return self.data[:, self.columns.index(name)]

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.data:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
