"""Read and write tidy CSV tables through frictionless."""

from pathlib import Path
from typing import Any

from frictionless import Resource, Schema, fields

_FIELD_TYPES = {
    int: fields.IntegerField,
    float: fields.NumberField,
    bool: fields.BooleanField,
    str: fields.StringField,
}


def schema_for(columns: dict[str, type]) -> Schema:
    """Build a Table Schema from a column-name -> python type mapping."""
    return Schema(
        fields=[_FIELD_TYPES[kind](name=name) for name, kind in columns.items()]
    )


def _cell(value: Any) -> Any:
    # numpy scalars are not understood by the frictionless writers
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        return value.item()
    return value


def write_table(path: Path, columns: dict[str, type], rows: list[dict]) -> Path:
    """Write rows as a CSV with a header row; column order follows `columns`."""
    path.parent.mkdir(parents=True, exist_ok=True)
    header = list(columns)
    data = [header] + [[_cell(row.get(name)) for name in header] for row in rows]
    resource = Resource(data=data, schema=schema_for(columns))
    resource.write(str(path))
    return path


def read_table(path: Path) -> list[dict]:
    """Read a CSV written by `write_table`, with types inferred by frictionless."""
    if not path.exists():
        raise ValueError(f"Table not found: {path}")
    with Resource(str(path)) as resource:
        return [row.to_dict() for row in resource.read_rows()]
