from __future__ import annotations

import json
import sqlite3
import time
from pathlib import Path
from typing import Any

from cosimpc.config import app_data_path


def default_history_db() -> Path:
    return app_data_path("history.sqlite3")


def connect_history(db_path: str | Path | None = None) -> sqlite3.Connection:
    """Open the local run history database and ensure its schema exists."""

    path = Path(db_path or default_history_db()).expanduser()
    path.parent.mkdir(parents=True, exist_ok=True)
    connection = sqlite3.connect(path)
    connection.execute(
        """
        CREATE TABLE IF NOT EXISTS runs (
            id INTEGER PRIMARY KEY AUTOINCREMENT,
            command TEXT NOT NULL,
            scenario_path TEXT,
            scenario_hash TEXT,
            started_at REAL NOT NULL,
            wall_time_s REAL NOT NULL,
            status TEXT NOT NULL,
            kpi_json TEXT NOT NULL
        )
        """
    )
    return connection


def save_run(
    command: str,
    scenario_path: str | None,
    scenario_hash: str | None,
    started_at: float,
    wall_time_s: float,
    status: str,
    kpis: dict[str, Any] | None = None,
    db_path: str | Path | None = None,
) -> int:
    """Persist one CLI run and return its database id."""

    with connect_history(db_path) as connection:
        cursor = connection.execute(
            """
            INSERT INTO runs (
                command,
                scenario_path,
                scenario_hash,
                started_at,
                wall_time_s,
                status,
                kpi_json
            )
            VALUES (?, ?, ?, ?, ?, ?, ?)
            """,
            (
                command,
                scenario_path,
                scenario_hash,
                float(started_at),
                float(wall_time_s),
                status,
                json.dumps(kpis or {}),
            ),
        )
        return int(cursor.lastrowid)


def list_runs(limit: int = 10, db_path: str | Path | None = None) -> list[dict[str, Any]]:
    """Return the most recent runs, newest first."""

    with connect_history(db_path) as connection:
        rows = connection.execute(
            """
            SELECT id, command, scenario_path, scenario_hash, started_at, wall_time_s, status, kpi_json
            FROM runs
            ORDER BY started_at DESC, id DESC
            LIMIT ?
            """,
            (limit,),
        ).fetchall()

    return [
        {
            "id": row[0],
            "command": row[1],
            "scenario_path": row[2],
            "scenario_hash": row[3],
            "started_at": row[4],
            "wall_time_s": row[5],
            "status": row[6],
            "kpis": json.loads(row[7]),
        }
        for row in rows
    ]


def format_started_at(started_at: float) -> str:
    return time.strftime("%Y-%m-%d %H:%M:%S", time.localtime(started_at))
