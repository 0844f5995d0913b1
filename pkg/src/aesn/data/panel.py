"""Panel container, CSV ingestion and the log-thousands transform."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from ..errors import DataError
from ..graph import Graph, from_edge_list

logger = logging.getLogger(__name__)

RAW = "raw"
LOG_THOUSANDS = "log_thousands"
TRANSFORMS = (RAW, LOG_THOUSANDS)


def month_index(stamp: str) -> int:
    """``'YYYY-MM'`` to a running month count."""
    try:
        year, month = stamp.split("-")
        y, m = int(year), int(month)
    except (ValueError, AttributeError):
        raise DataError(f"bad month stamp {stamp!r}, expected YYYY-MM") from None
    if not 1 <= m <= 12 or len(year) != 4 or len(month) != 2:
        raise DataError(f"bad month stamp {stamp!r}, expected YYYY-MM")
    return y * 12 + m - 1


def month_stamp(index: int) -> str:
    return f"{index // 12:04d}-{index % 12 + 1:02d}"


def month_range(start: str, n: int) -> tuple[str, ...]:
    k = month_index(start)
    return tuple(month_stamp(k + i) for i in range(n))


@dataclass(frozen=True)
class Panel:
    """Complete ``T x n_s`` monthly panel.

    ``values[t, s]`` is region ``region_ids[s]`` at month ``times[t]``.
    """

    region_ids: tuple[str, ...]
    times: tuple[str, ...]
    values: np.ndarray
    transform_state: str = RAW

    def __post_init__(self):
        object.__setattr__(self, "region_ids", tuple(str(r) for r in self.region_ids))
        object.__setattr__(self, "times", tuple(self.times))
        v = np.array(self.values, dtype=float)
        if v.shape != (len(self.times), len(self.region_ids)):
            raise DataError(
                f"values shape {v.shape} does not match {len(self.times)} times x {len(self.region_ids)} regions"
            )
        if len(set(self.region_ids)) != len(self.region_ids):
            raise DataError("duplicate region ids")
        if not np.all(np.isfinite(v)):
            raise DataError("panel contains missing or non-finite values")
        idx = [month_index(t) for t in self.times]
        if any(b - a != 1 for a, b in zip(idx, idx[1:])):
            raise DataError("months must be strictly increasing and contiguous")
        if self.transform_state not in TRANSFORMS:
            raise DataError(f"unknown transform state {self.transform_state!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def T(self) -> int:
        return len(self.times)

    @property
    def n_s(self) -> int:
        return len(self.region_ids)

    def head(self, n: int) -> "Panel":
        """First ``n`` months."""
        if not 1 <= n <= self.T:
            raise DataError(f"cannot take {n} of {self.T} months")
        return replace(self, times=self.times[:n], values=self.values[:n])

    def window(self, start: int, stop: int) -> "Panel":
        if not 0 <= start < stop <= self.T:
            raise DataError(f"bad window [{start}, {stop}) for T={self.T}")
        return replace(self, times=self.times[start:stop], values=self.values[start:stop])

    def with_values(self, values: np.ndarray) -> "Panel":
        return replace(self, values=values)

    def permute(self, order: Sequence[int]) -> "Panel":
        """Reorder regions; new region ``i`` is old region ``order[i]``."""
        order = list(order)
        return replace(self, region_ids=tuple(self.region_ids[i] for i in order), values=self.values[:, order])

    def to_frame(self) -> pd.DataFrame:
        """Long format with columns ``region_id, time, value``."""
        T, n = self.values.shape
        return pd.DataFrame({
            "region_id": np.tile(np.array(self.region_ids, dtype=object), T),
            "time": np.repeat(np.array(self.times, dtype=object), n),
            "value": self.values.reshape(-1),
        })


def panel_from_long(df: pd.DataFrame, source: str = "input") -> Panel:
    """Pivot long records to a panel, dropping regions with any missing month."""
    if df.empty:
        raise DataError(f"{source}: no records")
    dup = df.duplicated(subset=["region_id", "time"])
    if dup.any():
        row = df[dup].iloc[0]
        raise DataError(f"{source}: duplicate cell ({row['region_id']}, {row['time']})")
    df = df.dropna(subset=["value"])
    months = sorted({month_index(t) for t in df["time"]})
    times = [month_stamp(m) for m in range(months[0], months[-1] + 1)]
    wide = df.pivot(index="time", columns="region_id", values="value").reindex(index=times)
    complete = wide.columns[wide.notna().all(axis=0)]
    dropped = len(wide.columns) - len(complete)
    if dropped:
        logger.info("%s: dropped %d region(s) with missing months", source, dropped)
    if len(complete) == 0:
        raise DataError(f"{source}: no region has a complete record")
    wide = wide[complete]
    # Dropping regions can leave leading/trailing months that nobody observed.
    return Panel(region_ids=tuple(wide.columns), times=tuple(wide.index), values=wide.to_numpy())


def load_long_csv(path: str | Path) -> Panel:
    """Read a ``region_id,time,value`` CSV (time as ``YYYY-MM``)."""
    try:
        df = pd.read_csv(path, dtype={"region_id": str, "time": str}, float_precision="round_trip")
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise DataError(f"{path}: {exc}") from None
    missing = {"region_id", "time", "value"} - set(df.columns)
    if missing:
        raise DataError(f"{path}: missing column(s) {sorted(missing)}")
    try:
        df["value"] = pd.to_numeric(df["value"], errors="raise")
    except (ValueError, TypeError) as exc:
        raise DataError(f"{path}: unparseable value ({exc})") from None
    if df["region_id"].isna().any() or df["time"].isna().any():
        raise DataError(f"{path}: blank region_id or time")
    for t in df["time"].unique():
        month_index(t)
    return panel_from_long(df[["region_id", "time", "value"]], source=str(path))


def write_long_csv(p: Panel, path: str | Path) -> None:
    # repr-precision floats keep the round trip lossless.
    p.to_frame().to_csv(path, index=False, float_format="%.17g")


def load_edge_csv(path: str | Path, region_ids: Sequence[str]) -> Graph:
    """Read a ``src,dst`` CSV of region ids and map it onto ``region_ids`` order.

    Edges touching regions absent from the panel (for instance dropped for
    missing data) are skipped.
    """
    try:
        df = pd.read_csv(path, dtype=str)
    except pd.errors.EmptyDataError:
        df = pd.DataFrame(columns=["src", "dst"])
    except pd.errors.ParserError as exc:
        raise DataError(f"{path}: {exc}") from None
    if not {"src", "dst"} <= set(df.columns):
        raise DataError(f"{path}: expected header src,dst")
    pos = {r: i for i, r in enumerate(region_ids)}
    edges, skipped = [], 0
    for a, b in zip(df["src"], df["dst"]):
        if a in pos and b in pos:
            if a == b:
                raise DataError(f"{path}: self-loop on region {a}")
            edges.append((pos[a], pos[b]))
        else:
            skipped += 1
    if skipped:
        logger.info("%s: skipped %d edge(s) to regions not in the panel", path, skipped)
    return from_edge_list(edges, len(region_ids))


def write_edge_csv(g: Graph, region_ids: Sequence[str], path: str | Path) -> None:
    pd.DataFrame(
        [(region_ids[i], region_ids[j]) for i, j in g.edges], columns=["src", "dst"]
    ).to_csv(path, index=False)


def to_log_thousands(p: Panel) -> Panel:
    """``v -> ln(v / 1000)``; raw values must be strictly positive."""
    if p.transform_state != RAW:
        raise DataError(f"panel is already {p.transform_state}")
    if np.any(p.values <= 0):
        raise DataError("log transform needs strictly positive values")
    return replace(p, values=np.log(p.values / 1000.0), transform_state=LOG_THOUSANDS)


def from_log_thousands(p: Panel) -> Panel:
    if p.transform_state != LOG_THOUSANDS:
        raise DataError(f"panel is {p.transform_state}, not {LOG_THOUSANDS}")
    return replace(p, values=1000.0 * np.exp(p.values), transform_state=RAW)


def inverse_transform(values: np.ndarray, state: str) -> np.ndarray:
    """Map model-scale values back to the original scale."""
    if state == LOG_THOUSANDS:
        return 1000.0 * np.exp(values)
    return np.asarray(values, dtype=float)
