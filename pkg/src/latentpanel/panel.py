"""Treatment-panel data model, validation, and wide-format CSV I/O.

A panel is an N x T outcome matrix paired with an N x T binary treatment
matrix and a count ``t0`` of pre-treatment periods. Treatment is an
absorbing state (once a unit turns on it stays on) and nothing is treated
at or before period ``t0``. Units are carried as opaque labels; all
internal indexing is positional.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ShapeError

__all__ = [
    "Panel",
    "PeriodSlice",
    "Violation",
    "validate",
    "load_csv",
    "write_csv",
    "slice_period",
]


@dataclass(frozen=True)
class Panel:
    outcomes: np.ndarray  # (N, T) float64
    treatment: np.ndarray  # (N, T) int8 in {0, 1}
    t0: int
    labels: tuple = field(default=())

    def __post_init__(self):
        y = np.ascontiguousarray(np.asarray(self.outcomes, dtype=np.float64))
        w = np.ascontiguousarray(np.asarray(self.treatment, dtype=np.int8))
        if y.ndim != 2 or w.ndim != 2:
            raise ShapeError("outcomes and treatment must be 2-D matrices")
        if y.shape != w.shape:
            raise ShapeError(
                f"outcomes shape {y.shape} != treatment shape {w.shape}"
            )
        if not 1 <= self.t0 < y.shape[1]:
            raise DataError(
                f"t0 must satisfy 1 <= t0 < T; got t0={self.t0}, T={y.shape[1]}"
            )
        labels = self.labels or tuple(str(i) for i in range(y.shape[0]))
        if len(labels) != y.shape[0]:
            raise ShapeError("labels length must match the number of units")
        y.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "outcomes", y)
        object.__setattr__(self, "treatment", w)
        object.__setattr__(self, "labels", tuple(labels))

    @property
    def n(self) -> int:
        return self.outcomes.shape[0]

    @property
    def t(self) -> int:
        return self.outcomes.shape[1]

    def pre_outcomes(self) -> np.ndarray:
        """View of the first t0 outcome columns."""
        return self.outcomes[:, : self.t0]


@dataclass(frozen=True)
class PeriodSlice:
    t: int  # 1-based period index, t > t0
    y: np.ndarray
    w: np.ndarray
    n1: int


@dataclass(frozen=True)
class Violation:
    kind: str
    unit: int
    period: int
    message: str


def validate(panel: Panel) -> list[Violation]:
    """Check panel admissibility; an empty list means the panel is valid.

    Shape mismatches raise at construction; this reports breaches of the
    data invariants (treatment monotone within each row, no treatment at
    or before t0, finite outcomes) with (unit, period) coordinates.
    """
    out = []
    w = panel.treatment
    cell_bad = (w != 0) & (w != 1)
    for i, t in zip(*np.nonzero(cell_bad)):
        out.append(
            Violation(
                "treatment-domain",
                int(i),
                int(t) + 1,
                f"treatment not in {{0,1}} at unit {i}, period {t + 1}",
            )
        )
    # absorbing state: a 1 followed by a 0 within a row
    drops = (w[:, :-1] == 1) & (w[:, 1:] == 0)
    for i, t in zip(*np.nonzero(drops)):
        out.append(
            Violation(
                "non-monotone",
                int(i),
                int(t) + 2,
                f"non-monotone treatment at unit {i} (drops at period {t + 2})",
            )
        )
    early = w[:, : panel.t0] == 1
    for i, t in zip(*np.nonzero(early)):
        out.append(
            Violation(
                "pre-period-treatment",
                int(i),
                int(t) + 1,
                f"treatment before T0+1 at unit {i} (period {t + 1})",
            )
        )
    nonfinite = ~np.isfinite(panel.outcomes)
    for i, t in zip(*np.nonzero(nonfinite)):
        out.append(
            Violation(
                "non-finite-outcome",
                int(i),
                int(t) + 1,
                f"non-finite outcome at unit {i}, period {t + 1}",
            )
        )
    return out


def slice_period(panel: Panel, t: int) -> PeriodSlice:
    """Extract the outcome/treatment columns of a post-treatment period.

    ``t`` is 1-based and must lie in (t0, T]. Estimation needs both groups
    nonempty at t, so a degenerate treatment composition raises.
    """
    if not panel.t0 < t <= panel.t:
        raise DataError(
            f"period {t} outside post-treatment range ({panel.t0}, {panel.t}]",
            stage="slice",
        )
    y = panel.outcomes[:, t - 1]
    w = panel.treatment[:, t - 1].astype(np.float64)
    n1 = int(w.sum())
    if n1 == 0 or n1 == panel.n:
        raise DataError(
            f"degenerate treatment composition at period {t}: "
            f"{n1} of {panel.n} treated",
            stage="slice",
        )
    return PeriodSlice(t=t, y=y, w=w, n1=n1)


def _read_matrix(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as err:
        raise DataError(f"cannot read {path}: {err}") from None
    if not rows or len(rows) < 2:
        raise DataError(f"{path}: empty or header-only CSV")
    header = rows[0]
    width = len(header)
    labels = []
    cells = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise DataError(f"{path}: ragged row {r} ({len(row)} != {width} cells)")
        labels.append(row[0])
        cells.append(row[1:])
    return labels, cells, header[1:]


def load_csv(outcomes_path, treatment_path, t0: int) -> Panel:
    """Load a panel from wide-format CSVs (header ``unit,p1,...,pT``).

    Outcome cells must be numeric, treatment cells the literal ``0``/``1``.
    Validation runs on the result and any violation is raised as an error.
    """
    labels_y, cells_y, _ = _read_matrix(outcomes_path)
    labels_w, cells_w, _ = _read_matrix(treatment_path)
    ny, ty = len(cells_y), len(cells_y[0])
    nw, tw = len(cells_w), len(cells_w[0])
    if (ny, ty) != (nw, tw):
        raise ShapeError(
            f"outcomes {ny}x{ty} but treatment {nw}x{tw}"
        )
    if not 1 <= t0 < ty:
        raise DataError(f"t0 must satisfy 1 <= t0 < T={ty}; got {t0}")
    y = np.empty((ny, ty))
    for i, row in enumerate(cells_y):
        for j, cell in enumerate(row):
            try:
                y[i, j] = float(cell)
            except ValueError:
                raise DataError(
                    f"{outcomes_path}: non-numeric outcome {cell!r} at "
                    f"row {i + 2}, column {j + 2}"
                ) from None
    w = np.empty((ny, ty), dtype=np.int8)
    for i, row in enumerate(cells_w):
        for j, cell in enumerate(row):
            v = cell.strip()
            if v not in ("0", "1"):
                raise DataError(
                    f"{treatment_path}: treatment cell {cell!r} not in {{0,1}} "
                    f"at row {i + 2}, column {j + 2}"
                )
            w[i, j] = int(v)
    panel = Panel(y, w, t0, labels=tuple(labels_y))
    violations = validate(panel)
    if violations:
        lines = "; ".join(v.message for v in violations[:10])
        raise DataError(
            f"panel invariants violated ({len(violations)} problems): {lines}"
        )
    return panel


def write_csv(panel: Panel, outcomes_path, treatment_path) -> None:
    """Inverse of load_csv; outcomes use 17 significant digits (round-trip safe)."""
    header = ["unit"] + [f"p{t + 1}" for t in range(panel.t)]
    with open(outcomes_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for i in range(panel.n):
            wr.writerow(
                [panel.labels[i]] + [f"{v:.17g}" for v in panel.outcomes[i]]
            )
    with open(treatment_path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(header)
        for i in range(panel.n):
            wr.writerow([panel.labels[i]] + [str(int(v)) for v in panel.treatment[i]])
