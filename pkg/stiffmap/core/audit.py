import json
import os
from datetime import datetime
from typing import Any, Dict, Optional

import numpy as np


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


class RunAuditLogger:
    """Appends one JSON object per run event to a log file."""

    def __init__(self, log_file: Optional[str] = None):
        self.log_file = log_file
        if log_file:
            parent = os.path.dirname(log_file)
            if parent:
                os.makedirs(parent, exist_ok=True)

    @property
    def enabled(self) -> bool:
        return bool(self.log_file)

    def log_event(self, event_type: str, data: Dict[str, Any]):
        """Logs a structured event to the audit file."""
        if not self.log_file:
            return
        log_entry = {
            "timestamp": datetime.now().isoformat(),
            "event": event_type,
            **{k: (None if isinstance(v, float) and not np.isfinite(v) else v) for k, v in data.items()},
        }

        with open(self.log_file, "a", encoding="utf-8") as f:
            f.write(json.dumps(log_entry, ensure_ascii=False, default=_jsonable) + "\n")
