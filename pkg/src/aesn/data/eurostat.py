"""Minimal client for the Eurostat dissemination API (JSON-stat 2.0).

Only what is needed to pull a monthly NUTS-2 panel such as
``tour_occ_nin2m`` (nights spent at tourist accommodation).
"""

from __future__ import annotations

import logging
import time
from typing import Any, Mapping

import numpy as np
import pandas as pd
import requests

from ..errors import DataError
from .panel import Panel, month_index, panel_from_long

logger = logging.getLogger(__name__)

BASE_URL = "https://ec.europa.eu/eurostat/api/dissemination/statistics/1.0/data"
DEFAULT_DATASET = "tour_occ_nin2m"
# Totals over residence and accommodation type, counted in nights.
DEFAULT_FILTERS = {"unit": "NR", "c_resid": "TOTAL", "nace_r2": "I551-I553"}


class EurostatError(DataError):
    """Base class for Eurostat client failures."""


class EurostatHTTPError(EurostatError):
    """Transport failure or non-success HTTP status."""


class EurostatSchemaError(EurostatError):
    """Response is not the JSON-stat layout this parser understands."""


class EurostatEmptyError(EurostatError):
    """The query matched no observations."""


def _month(label: str) -> str:
    # Eurostat monthly labels are "2020-01" (current API) or "2020M01" (legacy).
    s = str(label).replace("M", "-")
    month_index(s)
    return s


def parse_jsonstat(doc: Mapping[str, Any], nuts_level: int | None = 2) -> Panel:
    """Turn a JSON-stat 2.0 dataset into a raw-scale :class:`Panel`.

    Every dimension other than ``geo`` and ``time`` must be filtered down to
    a single category.  Regions with a missing month are dropped.
    """
    try:
        ids = list(doc["id"])
        size = [int(s) for s in doc["size"]]
        dims = doc["dimension"]
        values = doc.get("value")
    except (KeyError, TypeError) as exc:
        raise EurostatSchemaError(f"missing JSON-stat field: {exc}") from None
    if len(ids) != len(size) or "geo" not in ids or "time" not in ids:
        raise EurostatSchemaError("expected 'geo' and 'time' dimensions with matching sizes")
    for d, n in zip(ids, size):
        if d not in ("geo", "time") and n != 1:
            raise EurostatSchemaError(
                f"dimension {d!r} has {n} categories; add a filter selecting one"
            )
    labels = {}
    for d, n in zip(ids, size):
        try:
            index = dims[d]["category"]["index"]
        except (KeyError, TypeError):
            raise EurostatSchemaError(f"dimension {d!r} has no category index") from None
        if isinstance(index, list):
            index = {code: i for i, code in enumerate(index)}
        order = [None] * n
        for code, i in index.items():
            if not 0 <= int(i) < n:
                raise EurostatSchemaError(f"category index {i} out of range in {d!r}")
            order[int(i)] = code
        labels[d] = order

    total = int(np.prod(size))
    flat = np.full(total, np.nan)
    if isinstance(values, list):
        if len(values) != total:
            raise EurostatSchemaError(f"value array has {len(values)} entries, expected {total}")
        flat[:] = [np.nan if v is None else float(v) for v in values]
    elif isinstance(values, dict):
        for k, v in values.items():
            i = int(k)
            if not 0 <= i < total:
                raise EurostatSchemaError(f"value key {k} out of range")
            if v is not None:
                flat[i] = float(v)
    else:
        raise EurostatSchemaError("missing 'value' member")
    if np.all(np.isnan(flat)):
        raise EurostatEmptyError("response contains no observations")

    cube = flat.reshape(size)
    g_ax, t_ax = ids.index("geo"), ids.index("time")
    grid = np.moveaxis(cube, (g_ax, t_ax), (0, 1)).reshape(size[g_ax], size[t_ax])
    geo, months = labels["geo"], [_month(t) for t in labels["time"]]
    keep = [i for i, code in enumerate(geo) if nuts_level is None or len(code) == 2 + nuts_level]
    if not keep:
        raise EurostatEmptyError(f"no NUTS-{nuts_level} regions in response")
    df = pd.DataFrame({
        "region_id": np.repeat([geo[i] for i in keep], len(months)),
        "time": np.tile(months, len(keep)),
        "value": grid[keep].reshape(-1),
    })
    return panel_from_long(df, source="eurostat")


def fetch_eurostat(
    dataset_code: str = DEFAULT_DATASET,
    filters: Mapping[str, str] | None = None,
    date_range: tuple[str, str] = ("2020-01", "2023-12"),
    retries: int = 2,
    timeout: float = 30.0,
    session: requests.Session | None = None,
) -> Panel:
    """Download a monthly NUTS-2 panel.

    ``retries`` bounds the number of re-attempts after a transport or 5xx
    failure; 4xx responses are reported immediately.
    """
    params = {"format": "JSON", "lang": "EN", "geoLevel": "nuts2", "freq": "M",
              "sinceTimePeriod": date_range[0], "untilTimePeriod": date_range[1]}
    params.update(DEFAULT_FILTERS if filters is None else filters)
    http = session or requests.Session()
    url = f"{BASE_URL}/{dataset_code}"
    last = None
    for attempt in range(retries + 1):
        try:
            resp = http.get(url, params=params, timeout=timeout)
        except requests.RequestException as exc:
            last = f"{type(exc).__name__}: {exc}"
        else:
            if resp.status_code == 200:
                try:
                    doc = resp.json()
                except ValueError:
                    raise EurostatSchemaError("response is not JSON") from None
                return parse_jsonstat(doc)
            last = f"HTTP {resp.status_code}"
            if resp.status_code < 500:
                break
        if attempt < retries:
            logger.warning("Eurostat request failed (%s), retry %d/%d", last, attempt + 1, retries)
            time.sleep(min(2.0 ** attempt, 10.0))
    raise EurostatHTTPError(f"Eurostat request for {dataset_code} failed: {last}")
