"""
Points files: UTF-8 text with one `x y z` point per line. Blank lines and
anything after a `#` are ignored.
"""

import os
from pathlib import Path
from tempfile import NamedTemporaryFile

import numpy as np

from pointkan.errors import InvalidInputError, PointsFileParseError
from pointkan.geometry import PointCloud


def parse_points(lines, source="<points>") -> np.ndarray:
    points = []
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 3:
            detail = f"expecting 3 coordinates, found {len(fields)} in {raw.strip()!r}"
            raise PointsFileParseError(source, number, detail)
        try:
            points.append([float(x) for x in fields])
        except ValueError:
            detail = f"coordinates must be decimal numbers, not {raw.strip()!r}"
            raise PointsFileParseError(source, number, detail) from None
    if not points:
        msg = f"{source}: no points found"
        raise InvalidInputError(msg)
    return np.array(points)


def load_points_file(path: Path, label: int | None = None) -> PointCloud:
    with path.open(encoding="utf-8") as fh:
        return PointCloud(parse_points(fh, str(path)), label)


def format_points(points: np.ndarray, extra_columns=()) -> str:
    """One line per point, coordinates at 17 significant digits"""
    rows = []
    for i, (x, y, z) in enumerate(points):
        fields = [f"{x:.17g}", f"{y:.17g}", f"{z:.17g}"]
        fields.extend(str(col[i]) for col in extra_columns)
        rows.append(" ".join(fields) + "\n")
    return "".join(rows)


def atomic_write(path: Path, data: str | bytes) -> None:
    """Writes to a temporary file in the same directory then renames it"""
    path.parent.mkdir(parents=True, exist_ok=True)
    binary = isinstance(data, bytes)
    with NamedTemporaryFile(
        "wb" if binary else "w",
        encoding=None if binary else "utf-8",
        dir=path.parent,
        prefix=f".{path.name}.",
        delete=False,
    ) as tmp:
        tmp.write(data)
    os.replace(tmp.name, path)


def save_points_file(path: Path, cloud: PointCloud) -> None:
    atomic_write(path, format_points(cloud.points))
