from pathlib import Path
from textwrap import dedent

import numpy as np
import pytest

from pointkan.errors import ManifestError
from pointkan.manifest import DatasetManifest, load_manifest, parse_manifest


def test_parse_manifest():
    text = dedent(
        """
        # three shapes
        classes: sphere, cube,cylinder
        sphere/a.xyz 0
        dir with space/b.xyz 2
        """
    )
    manifest = parse_manifest(text, root=Path("/data"))
    assert manifest.class_names == ["sphere", "cube", "cylinder"]
    assert manifest.entries == [("sphere/a.xyz", 0), ("dir with space/b.xyz", 2)]
    assert manifest.labels == [0, 2]
    assert manifest.num_classes == 3
    assert len(manifest) == 2
    assert parse_manifest(manifest.to_text()).entries == manifest.entries


@pytest.mark.parametrize(
    ("text", "message"),
    [
        ("", "no 'classes:' header"),
        ("a.xyz 0\n", "line 1: expecting 'classes:"),
        ("classes: a,b\nx.xyz\n", "line 2: expecting '<path> <label>'"),
        ("classes: a,b\nx.xyz one\n", "line 2"),
        ("classes: a,b\nx.xyz 2\n", "outside the 2 classes"),
        ("classes:\n", "at least one class"),
    ],
)
def test_manifest_errors(text, message):
    with pytest.raises(ManifestError, match=message):
        parse_manifest(text)


def test_load_manifest_checks_files(tmp_path):
    (tmp_path / "a.xyz").write_text("0 0 0\n1 1 1\n")
    manifest_file = tmp_path / "train.manifest"
    manifest_file.write_text("classes: x,y\na.xyz 1\nmissing.xyz 0\ngone.xyz 0\n")
    with pytest.raises(ManifestError, match="missing points file 'missing.xyz' and 1 more"):
        load_manifest(manifest_file)

    manifest_file.write_text("classes: x,y\na.xyz 1\n")
    (cloud,) = load_manifest(manifest_file).load_clouds()
    assert cloud.label == 1
    corner = 1 / np.sqrt(3)
    np.testing.assert_allclose(cloud.points, [[-corner] * 3, [corner] * 3], rtol=1e-12)
    raw = load_manifest(manifest_file).load_clouds(normalize=False)[0]
    assert raw.points.tolist() == [[0, 0, 0], [1, 1, 1]]


def test_save_manifest(tmp_path):
    manifest = DatasetManifest(["a", "b"], root=tmp_path)
    manifest.add("a/0.xyz", 0)
    manifest.add("b/0.xyz", 1)
    with pytest.raises(ManifestError):
        manifest.add("c/0.xyz", 2)
    manifest.save(tmp_path / "m.manifest")
    assert (tmp_path / "m.manifest").read_text() == "classes: a,b\na/0.xyz 0\nb/0.xyz 1\n"
