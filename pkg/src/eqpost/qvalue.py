"""q-value estimates from posterior probabilities of equivalence.

For a cutoff ``t`` the genes with ``p_i >= t`` are declared equivalent and the
estimated false discovery rate is the mean of ``1 - p_i`` over that set.

Sums are accumulated exactly (as integers in units of 2**-1074) and divided
with correct rounding, so the result does not depend on summation order and
the estimates are exactly monotone in the cutoff.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple, Union

from .panel import format_float

_SHIFT = 1074  # every finite double is an integer multiple of 2**-1074
_ONE = 1 << _SHIFT


def _units(x: float) -> int:
    num, den = float(x).as_integer_ratio()
    return num << (_SHIFT - (den.bit_length() - 1))


def _mean_units(total: int, count: int) -> float:
    return total / (count << _SHIFT)  # int / int is correctly rounded


def q_value_at(t: float, ps: Iterable[float]) -> float:
    """Estimated q-value for the cutoff ``t``."""
    total = 0
    count = 0
    for p in ps:
        if p >= t:
            total += _ONE - _units(p)
            count += 1
    if count == 0:
        raise ValueError(f"no posterior probability reaches the cutoff {t!r}")
    return _mean_units(total, count)


@dataclass(frozen=True)
class QRow:
    gene_id: str
    p: float
    q_hat: float


@dataclass(frozen=True)
class QValueTable:
    rows: Tuple[QRow, ...]

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["gene_id", "p_equiv", "q_value"])
        for r in self.rows:
            w.writerow([r.gene_id, format_float(r.p), format_float(r.q_hat)])
        return buf.getvalue()

    def write_csv(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def build_table(scored: Sequence[Tuple[str, float]]) -> QValueTable:
    """Rank genes by ``p`` (descending, ties by gene id) and attach q-values.

    Tied probabilities form one discovery set and share one q-value.
    """
    items = [(gid, float(p)) for gid, p in scored]
    if not items:
        raise ValueError("nothing to rank")
    for gid, p in items:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"gene {gid!r}: probability {p!r} outside [0, 1]")
    items.sort(key=lambda r: (-r[1], str(r[0])))

    rows: List[QRow] = []
    total = 0
    k = 0
    n = len(items)
    while k < n:
        p = items[k][1]
        j = k
        while j < n and items[j][1] == p:
            total += _ONE - _units(items[j][1])
            j += 1
        q = _mean_units(total, j)
        rows.extend(QRow(gid, pv, q) for gid, pv in items[k:j])
        k = j
    return QValueTable(tuple(rows))
