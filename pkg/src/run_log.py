"""Line-delimited JSON log of training events."""
import json
import math
from pathlib import Path
from typing import Any, Dict, List


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if hasattr(value, "item"):
        return _jsonable(value.item())
    return value


class RunLog:
    """Appends one JSON object per line; every record carries an 'event' key."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def write(self, event: str, **fields: Any) -> Dict[str, Any]:
        record = {"event": event}
        record.update({key: _jsonable(value) for key, value in fields.items()})
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
        return record


def read_log(path, event: str = None) -> List[Dict[str, Any]]:
    """Records of a log file, optionally filtered by event name."""
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            if event is None or record.get("event") == event:
                records.append(record)
    return records
