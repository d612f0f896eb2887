"""
Dataset manifests: a `classes: name0,name1,...` header line followed by one
`relative/path.xyz <label>` line per cloud. Paths are relative to the
directory holding the manifest.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

from pointkan.errors import ManifestError
from pointkan.geometry import PointCloud, centroid_normalize
from pointkan.points_file import atomic_write, load_points_file

log = logging.getLogger(__name__)


@dataclass
class DatasetManifest:
    class_names: list[str]
    entries: list[tuple[str, int]] = field(default_factory=list)
    root: Path = Path()

    def __post_init__(self):
        if not self.class_names:
            msg = "A manifest needs at least one class name"
            raise ManifestError(msg)
        for path, label in self.entries:
            self._check_label(path, label)

    def _check_label(self, path, label):
        if not 0 <= label < len(self.class_names):
            msg = (
                f"Label {label} for {path!r} is outside the"
                f" {len(self.class_names)} classes"
            )
            raise ManifestError(msg)

    def __len__(self):
        return len(self.entries)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    @property
    def labels(self) -> list[int]:
        return [label for _, label in self.entries]

    def add(self, path: str, label: int) -> None:
        self._check_label(path, label)
        self.entries.append((path, label))

    def to_text(self) -> str:
        lines = ["classes: " + ",".join(self.class_names)]
        lines.extend(f"{path} {label}" for path, label in self.entries)
        return "\n".join(lines) + "\n"

    def save(self, path: Path) -> None:
        atomic_write(path, self.to_text())

    def load_clouds(self, normalize=True) -> list[PointCloud]:
        """
        Reads every points file in manifest order, by default centering and
        scaling each cloud to the unit ball.
        """
        clouds = []
        for rel, label in self.entries:
            cloud = load_points_file(self.root / rel, label)
            clouds.append(centroid_normalize(cloud) if normalize else cloud)
        log.info(f"Loaded {len(clouds)} clouds from {self.root}")
        return clouds


def parse_manifest(text: str, source="<manifest>", root=Path()) -> DatasetManifest:
    manifest = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}: line {number}"
        if manifest is None:
            if not line.startswith("classes:"):
                msg = f"{where}: expecting 'classes: name0,name1,...' header"
                raise ManifestError(msg)
            names = [n.strip() for n in line.removeprefix("classes:").split(",")]
            manifest = DatasetManifest([n for n in names if n], root=root)
            continue
        parts = line.rsplit(None, 1)
        if len(parts) != 2 or not parts[1].isdigit():
            msg = f"{where}: expecting '<path> <label>', got {raw.strip()!r}"
            raise ManifestError(msg)
        manifest.add(parts[0], int(parts[1]))
    if manifest is None:
        msg = f"{source}: no 'classes:' header found"
        raise ManifestError(msg)
    return manifest


def load_manifest(path: Path) -> DatasetManifest:
    """Reads a manifest, checking every referenced points file exists"""
    manifest = parse_manifest(path.read_text(encoding="utf-8"), str(path), path.parent)
    if missing := [p for p, _ in manifest.entries if not (manifest.root / p).is_file()]:
        msg = f"{path}: missing points file {missing[0]!r}"
        if len(missing) > 1:
            msg += f" and {len(missing) - 1} more"
        raise ManifestError(msg)
    return manifest
