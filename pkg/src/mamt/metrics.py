"""Line-delimited metric records plus run summaries.

One JSON record per update iteration (and per evaluation), so runs are
stream-appendable and byte-comparable. Records carry only deterministic
payload: counters and values, no wall-clock timestamps.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, List


class MetricsWriter:
    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w")

    def write(self, record: dict) -> None:
        self._fh.write(json.dumps(record, sort_keys=True) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_records(path) -> List[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def series(records: Iterable[dict], key: str) -> List[float]:
    """Values of one metric across records, skipping records that lack it."""
    return [r[key] for r in records if key in r]


def write_summary(path, summary: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)


def read_summary(path) -> dict:
    with open(path) as fh:
        return json.load(fh)
