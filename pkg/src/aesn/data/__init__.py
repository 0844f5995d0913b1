"""Panel data: ingestion, transforms, synthetic generation, Eurostat access."""

from .eurostat import fetch_eurostat, parse_jsonstat
from .panel import (
    LOG_THOUSANDS,
    RAW,
    Panel,
    from_log_thousands,
    load_edge_csv,
    load_long_csv,
    to_log_thousands,
    write_edge_csv,
    write_long_csv,
)
from .synth import SynthComponents, synth_generate

__all__ = [
    "LOG_THOUSANDS", "RAW", "Panel", "SynthComponents", "fetch_eurostat",
    "from_log_thousands", "load_edge_csv", "load_long_csv", "parse_jsonstat",
    "synth_generate", "to_log_thousands", "write_edge_csv", "write_long_csv",
]
