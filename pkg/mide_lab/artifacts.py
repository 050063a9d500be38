"""Run artifacts: CSV tables, binary fields, the data package manifest and the
duckdb status query over them."""

import hashlib
import json
import threading
from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import duckdb
from frictionless import Package, Resource

from mide_lab.grid import GridFunction
from mide_lab.logs import log
from mide_lab.tables import schema_for, write_table

MANIFEST = "datapackage.json"
PASSING_STATUSES = ("PASS", "INFO", "UNCHARACTERIZED")
TRACKED_PACKAGES = ("mide-lab", "numpy", "scipy", "sympy", "pydantic", "frictionless", "duckdb")


def _version(name: str) -> str:
    try:
        return version(name)
    except PackageNotFoundError:
        return "unknown"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class ArtifactWriter:
    """Writes artifacts under one directory and remembers them for the manifest.

    Writes are serialized so experiment trials may run concurrently.
    """

    out_dir: Path
    tables: dict[str, dict[str, type]] = field(default_factory=dict)
    fields: list[str] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def table(self, name: str, columns: dict[str, type], rows: list[dict]) -> Path:
        path = self.out_dir / f"{name}.csv"
        with self._lock:
            write_table(path, columns, rows)
            self.tables[name] = columns
        log.debug("Wrote table", table=name, rows=len(rows))
        return path

    def field(self, name: str, u: GridFunction) -> Path:
        path = self.out_dir / f"{name}.grid"
        with self._lock:
            u.write_binary(path)
            self.fields.append(name)
        return path

    def manifest(self, experiment: str, kind: str, seed: int, config_hash: str) -> Path:
        """datapackage.json listing every artifact with its hash."""
        resources = [
            Resource(
                name=name.replace("_", "-"),
                path=f"{name}.csv",
                format="csv",
                schema=schema_for(columns),
            )
            for name, columns in sorted(self.tables.items())
        ]
        descriptor = Package(name=experiment, resources=resources).to_descriptor()
        artifacts = [f"{name}.csv" for name in sorted(self.tables)]
        artifacts += [f"{name}.grid" for name in sorted(self.fields)]
        descriptor["sha256"] = {path: _sha256(self.out_dir / path) for path in artifacts}
        descriptor["run"] = {
            "kind": kind,
            "seed": seed,
            "config_sha256": config_hash,
            "versions": {name: _version(name) for name in TRACKED_PACKAGES},
        }
        path = self.out_dir / MANIFEST
        path.write_text(json.dumps(descriptor, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path


def _csv_source(path: Path) -> str:
    quoted = str(path).replace("'", "''")
    return f"read_csv('{quoted}', header=true, all_varchar=true)"


def failed_rows(out_dir: Path) -> dict[str, int]:
    """Count of rows that did not pass, per table carrying a `status` column.

    INFO rows carry no expectation and UNCHARACTERIZED rows have no verdict;
    any other status counts against the run.
    """
    con = duckdb.connect(":memory:")
    failures = {}
    for path in sorted(out_dir.glob("*.csv")):
        source = _csv_source(path)
        columns = [c[0] for c in con.execute(f"SELECT * FROM {source} LIMIT 0").description]
        if "status" not in columns:
            continue
        (count,) = con.execute(
            f"SELECT COUNT(*) FROM {source} WHERE NOT list_contains(?::VARCHAR[], coalesce(status, ''))",
            [list(PASSING_STATUSES)],
        ).fetchone()
        failures[path.stem] = int(count)
    return failures


def exit_status(out_dir: Path) -> int:
    """0 when no assertion row failed, 1 otherwise."""
    failures = failed_rows(out_dir)
    failing = {name: count for name, count in failures.items() if count}
    if failing:
        log.warning("Assertion rows failed", **failing)
        return 1
    return 0
