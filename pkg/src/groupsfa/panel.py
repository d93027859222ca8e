"""Balanced panel container and its CSV round trip.

The on-disk format is long CSV with a header row: firm_id, t, y, x1..xp.
Values are written with shortest round-trip precision so simulate/ingest
is bit exact for finite doubles.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


@dataclass
class PanelData:
    """Balanced panel: y is (N, T), x is (N, T, p), one label per firm."""

    y: np.ndarray
    x: np.ndarray
    firm_ids: list = field(default=None)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        if self.y.ndim != 2:
            raise InputError(f"y must be (N, T), got shape {self.y.shape}")
        if self.x.ndim != 3:
            raise InputError(f"x must be (N, T, p), got shape {self.x.shape}")
        if self.x.shape[:2] != self.y.shape:
            raise InputError(
                f"x shape {self.x.shape} inconsistent with y shape {self.y.shape}"
            )
        if not np.all(np.isfinite(self.y)) or not np.all(np.isfinite(self.x)):
            raise InputError("panel contains non-finite cells")
        if self.firm_ids is None:
            self.firm_ids = [str(i + 1) for i in range(self.y.shape[0])]
        if len(self.firm_ids) != self.y.shape[0]:
            raise InputError("firm_ids length does not match N")

    @property
    def N(self):
        return self.y.shape[0]

    @property
    def T(self):
        return self.y.shape[1]

    @property
    def p(self):
        return self.x.shape[2]


def write_panel_csv(panel, path):
    """Write a panel as long CSV with header firm_id,t,y,x1..xp."""
    header = ["firm_id", "t", "y"] + [f"x{l + 1}" for l in range(panel.p)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(panel.N):
            fid = panel.firm_ids[i]
            for t in range(panel.T):
                row = [fid, t + 1, repr(float(panel.y[i, t]))]
                row += [repr(float(v)) for v in panel.x[i, t]]
                w.writerow(row)


def read_panel_csv(path, firm_col="firm_id", time_col="t", y_col="y", x_cols=None):
    """Read a long CSV into a PanelData, validating balance.

    When ``x_cols`` is None, columns named x1, x2, ... are used in index
    order. Missing (firm, time) cells and non-numeric values are input
    errors; the time index must be the same set of values for every firm.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise InputError(f"{path}: empty file")
        for col in (firm_col, time_col, y_col):
            if col not in reader.fieldnames:
                raise InputError(f"{path}: missing column {col!r}")
        if x_cols is None:
            x_cols = sorted(
                (c for c in reader.fieldnames if c.startswith("x") and c[1:].isdigit()),
                key=lambda c: int(c[1:]),
            )
        if not x_cols:
            raise InputError(f"{path}: no regressor columns found")
        for col in x_cols:
            if col not in reader.fieldnames:
                raise InputError(f"{path}: missing regressor column {col!r}")
        cells = {}
        firm_order = []
        times = set()
        for lineno, rec in enumerate(reader, start=2):
            fid = rec[firm_col]
            try:
                t = int(rec[time_col])
                yv = float(rec[y_col])
                xv = [float(rec[c]) for c in x_cols]
            except (TypeError, ValueError) as exc:
                raise InputError(f"{path}:{lineno}: non-numeric cell ({exc})") from exc
            if fid not in cells:
                cells[fid] = {}
                firm_order.append(fid)
            if t in cells[fid]:
                raise InputError(f"{path}:{lineno}: duplicate cell ({fid}, {t})")
            cells[fid][t] = (yv, xv)
            times.add(t)

    if not cells:
        raise InputError(f"{path}: no data rows")
    t_sorted = sorted(times)
    missing = [
        (fid, t) for fid in firm_order for t in t_sorted if t not in cells[fid]
    ]
    if missing:
        shown = ", ".join(f"({f}, {t})" for f, t in missing[:10])
        more = "" if len(missing) <= 10 else f" and {len(missing) - 10} more"
        raise InputError(f"{path}: unbalanced panel, missing cells {shown}{more}")

    N, T, p = len(firm_order), len(t_sorted), len(x_cols)
    y = np.empty((N, T))
    x = np.empty((N, T, p))
    for i, fid in enumerate(firm_order):
        for j, t in enumerate(t_sorted):
            yv, xv = cells[fid][t]
            y[i, j] = yv
            x[i, j] = xv
    return PanelData(y=y, x=x, firm_ids=firm_order)
