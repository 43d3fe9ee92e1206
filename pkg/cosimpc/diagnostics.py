from __future__ import annotations

import platform
import re
import sys
import time
from typing import Any

import numpy as np
import pandas as pd
import pydantic

from cosimpc import __version__

REPORT_SCHEMA = "cosimpc.report.v1"

PATH_RE = re.compile(r"(/Users/[^,\s]+|/home/[^,\s]+|/root(?:/[^,\s]*)?|[A-Za-z]:\\[^,\s]+)")


def redact_value(value: Any) -> Any:
    """Redact home-directory paths from report payloads."""

    if isinstance(value, str):
        return PATH_RE.sub("[redacted-path]", value)
    if isinstance(value, (list, tuple)):
        return [redact_value(item) for item in value]
    if isinstance(value, dict):
        return {str(key): redact_value(item) for key, item in value.items()}
    return value


def environment_info() -> dict:
    """Platform and library versions embedded in every report."""

    bundle = {
        "schema": REPORT_SCHEMA,
        "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "cosimpc": __version__,
        "runtime": {
            "platform": platform.system(),
            "platform_release": platform.release(),
            "machine": platform.machine(),
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "pandas": pd.__version__,
            "pydantic": pydantic.VERSION,
        },
        "redaction": {"paths": True},
    }
    return redact_value(bundle)
