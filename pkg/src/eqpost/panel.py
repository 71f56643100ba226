"""Gene panels (arrays of ``(y_i, sigma2_i)``) and their on-disk formats.

Panel CSV::

    gene_id,mean_log_ratio,variance[,spot_type]

Parameter file: ``key=value`` lines, ``pi1..pi3``, ``mu1..mu3``,
``tau2_1..tau2_3``, ``loglik`` and fit metadata.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Sequence, Union

import numpy as np

from .posterior import GeneObservation, MixturePrior

PANEL_COLUMNS = ("gene_id", "mean_log_ratio", "variance")


class PanelFormatError(ValueError):
    """Malformed or invalid panel/parameter input."""


@dataclass(frozen=True)
class Panel:
    ids: tuple
    y: np.ndarray
    sigma2: np.ndarray
    spot_type: Optional[tuple] = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        s2 = np.asarray(self.sigma2, dtype=float)
        if y.shape != s2.shape or y.ndim != 1 or len(self.ids) != y.size:
            raise PanelFormatError("ids, y and sigma2 must be 1-d and of equal length")
        if not np.all(np.isfinite(y)):
            raise PanelFormatError("mean log ratios must be finite")
        if not np.all((s2 > 0) & np.isfinite(s2)):
            raise PanelFormatError("variances must be positive and finite")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "sigma2", s2)
        object.__setattr__(self, "ids", tuple(self.ids))

    def __len__(self):
        return self.y.size

    @classmethod
    def from_arrays(cls, y, sigma2, ids=None) -> "Panel":
        y = np.asarray(y, dtype=float)
        if ids is None:
            ids = tuple(f"g{i}" for i in range(y.size))
        return cls(tuple(ids), y, np.asarray(sigma2, dtype=float))

    @classmethod
    def from_observations(cls, obs: Sequence[GeneObservation]) -> "Panel":
        spot = tuple(o.spot_type for o in obs)
        return cls(
            tuple(o.id for o in obs),
            np.array([o.y for o in obs], dtype=float),
            np.array([o.sigma2 for o in obs], dtype=float),
            spot if any(s is not None for s in spot) else None,
        )

    def observations(self):
        spot = self.spot_type or (None,) * len(self)
        return [
            GeneObservation(i, float(y), float(s2), st)
            for i, y, s2, st in zip(self.ids, self.y, self.sigma2, spot)
        ]


def as_panel(data) -> Panel:
    """Accept a :class:`Panel` or a sequence of :class:`GeneObservation`."""
    if isinstance(data, Panel):
        return data
    data = list(data)
    if not data:
        raise PanelFormatError("panel is empty")
    return Panel.from_observations(data)


def format_float(x: float) -> str:
    """Shortest repr that round-trips; locale independent."""
    return repr(float(x))


def read_panel_csv(path: Union[str, Path], min_rows: int = 1) -> Panel:
    ids, ys, s2s, spots = [], [], [], []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelFormatError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if tuple(header[:3]) != PANEL_COLUMNS or len(header) > 4 or (
            len(header) == 4 and header[3] != "spot_type"
        ):
            raise PanelFormatError(
                f"{path}: line 1: expected header gene_id,mean_log_ratio,variance[,spot_type], "
                f"got {','.join(header)}"
            )
        has_spot = len(header) == 4
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise PanelFormatError(
                    f"{path}: line {lineno}: expected {len(header)} fields, got {len(row)}"
                )
            gid = row[0].strip()
            if not gid:
                raise PanelFormatError(f"{path}: line {lineno}: empty gene_id")
            if gid in seen:
                raise PanelFormatError(f"{path}: line {lineno}: duplicate gene_id {gid!r}")
            seen.add(gid)
            try:
                y = float(row[1])
                s2 = float(row[2])
            except ValueError:
                raise PanelFormatError(
                    f"{path}: line {lineno}: non-numeric value in {row[1:3]}"
                ) from None
            if not math.isfinite(y):
                raise PanelFormatError(f"{path}: line {lineno}: mean_log_ratio must be finite")
            if not (s2 > 0 and math.isfinite(s2)):
                raise PanelFormatError(f"{path}: line {lineno}: variance must be positive, got {row[2]}")
            ids.append(gid)
            ys.append(y)
            s2s.append(s2)
            if has_spot:
                spots.append(row[3].strip() or None)
    if len(ids) < min_rows:
        raise PanelFormatError(f"{path}: need at least {min_rows} rows, got {len(ids)}")
    return Panel(tuple(ids), np.array(ys), np.array(s2s), tuple(spots) if has_spot else None)


def write_panel_csv(panel: Panel, path: Union[str, Path]) -> None:
    has_spot = panel.spot_type is not None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(PANEL_COLUMNS + (("spot_type",) if has_spot else ()))
    for k, (gid, y, s2) in enumerate(zip(panel.ids, panel.y, panel.sigma2)):
        row = [gid, format_float(y), format_float(s2)]
        if has_spot:
            row.append(panel.spot_type[k] or "")
        w.writerow(row)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


PARAM_KEYS = ("pi1", "pi2", "pi3", "mu1", "mu2", "mu3", "tau2_1", "tau2_2", "tau2_3")


def write_params(path: Union[str, Path], prior: MixturePrior, extra: Optional[Dict[str, object]] = None) -> None:
    values = list(prior.weights) + list(prior.means) + list(prior.variances)
    lines = [f"{k}={format_float(v)}" for k, v in zip(PARAM_KEYS, values)]
    for k, v in (extra or {}).items():
        if isinstance(v, float):
            v = format_float(v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{k}={v}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_params(path: Union[str, Path]):
    """Return ``(prior, metadata)`` from a parameter file."""
    meta: Dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise PanelFormatError(f"{path}: line {lineno}: expected key=value")
            k, v = line.split("=", 1)
            meta[k.strip()] = v.strip()
    missing = [k for k in PARAM_KEYS if k not in meta]
    if missing:
        raise PanelFormatError(f"{path}: missing parameters {missing}")
    try:
        vals = [float(meta.pop(k)) for k in PARAM_KEYS]
    except ValueError as exc:
        raise PanelFormatError(f"{path}: {exc}") from None
    try:
        prior = MixturePrior(tuple(vals[0:3]), tuple(vals[3:6]), tuple(vals[6:9]))
    except ValueError as exc:
        raise PanelFormatError(f"{path}: {exc}") from None
    return prior, meta
