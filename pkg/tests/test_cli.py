import json
import sys
from pathlib import Path

import pytest

from pointkan.blocks.sensitivity import flag_count
from pointkan.cli.main import cli, pointkan_main
from pointkan.geometry import PERTURBATIONS


def ndjson_rows(output):
    return [json.loads(line) for line in output.splitlines() if line.startswith("{")]


def invoke_ok(runner, args):
    result = runner.invoke(pointkan_main, args)
    assert result.exit_code == 0, result.output or repr(result.exception)
    return result


def test_synth(runner):
    result = invoke_ok(
        runner,
        [
            "synth",
            "--out",
            "shapes",
            "--shapes",
            "sphere, torus",
            "--per-class",
            "2",
            "--test-per-class",
            "1",
            "--points",
            "16",
        ],
    )
    assert "4 training clouds in shapes/train.manifest" in result.output
    assert "2 test clouds in shapes/test.manifest" in result.output
    assert Path("shapes/torus/train_0001.xyz").is_file()
    assert Path("shapes/train.manifest").read_text().startswith("classes: sphere,torus\n")


def test_synth_unknown_shape(runner):
    result = runner.invoke(pointkan_main, ["synth", "--out", "x", "--shapes", "pyramid"])
    assert result.exit_code == 1
    assert "Unknown shape 'pyramid'" in str(result.exception)


def test_train_eval_robustness(runner, shapes_dir):
    train_args = [
        "train",
        "--data",
        str(shapes_dir / "train.manifest"),
        "--test-data",
        str(shapes_dir / "test.manifest"),
        "--out",
        "model.pkan",
        "--epochs",
        "2",
        "--backend",
        "rational",
        "--epoch-log",
        "epochs.log",
    ]
    result = invoke_ok(runner, train_args)
    epoch_lines = [ln for ln in result.output.splitlines() if ln.startswith("epoch ")]
    assert len(epoch_lines) == 2
    assert epoch_lines[0].split()[2::2] == ["loss", "train_acc", "test_acc"]
    assert Path("epochs.log").read_text().splitlines() == epoch_lines
    assert "parameters to model.pkan" in result.output

    result = invoke_ok(
        runner,
        ["eval", "--checkpoint", "model.pkan", "--data", str(shapes_dir / "test.manifest")],
    )
    rows = ndjson_rows(result.output)
    assert sorted(r["class"] for r in rows) == ["cube", "cylinder", "sphere"]
    assert {r["count"] for r in rows} == {2}
    assert "over 6 clouds" in result.output.splitlines()[-1]
    assert result.output.splitlines()[-1].startswith("OA ")

    result = invoke_ok(
        runner,
        [
            "robustness",
            "--checkpoint",
            "model.pkan",
            "--data",
            str(shapes_dir / "test.manifest"),
            "--perturbation",
            "noise",
        ],
    )
    assert [r["perturbation"] for r in ndjson_rows(result.output)] == ["none", "noise"]

    result = invoke_ok(
        runner,
        [
            "robustness",
            "--checkpoint",
            "model.pkan",
            "--data",
            str(shapes_dir / "test.manifest"),
            "--format",
            "txt",
        ],
    )
    for name in PERTURBATIONS:
        assert name in result.output


def test_eval_wrong_number_of_classes(runner, shapes_dir):
    invoke_ok(
        runner,
        [
            "synth",
            "--out",
            "two",
            "--shapes",
            "sphere,cube",
            "--per-class",
            "2",
            "--test-per-class",
            "0",
            "--points",
            "64",
        ],
    )
    invoke_ok(
        runner,
        ["train", "--data", "two/train.manifest", "--out", "two.pkan", "--epochs", "0"],
    )
    result = runner.invoke(
        pointkan_main,
        ["eval", "--checkpoint", "two.pkan", "--data", str(shapes_dir / "test.manifest")],
    )
    assert result.exit_code == 1
    assert "Dataset has 3 classes but the model scores 2" in str(result.exception)


def test_errors_exit_with_a_message(runner, shapes_dir, monkeypatch):
    Path("bad.pkan").write_bytes(b"not a model")
    args = ["eval", "--checkpoint", "bad.pkan", "--data", str(shapes_dir / "test.manifest")]
    monkeypatch.setattr(sys, "argv", ["pointkan", *args])
    with pytest.raises(SystemExit) as exc:
        cli()
    assert str(exc.value.code).startswith("CheckpointError: bad.pkan: not a checkpoint")


def test_usage_errors(runner):
    result = runner.invoke(pointkan_main, ["train", "--bogus"])
    assert result.exit_code == 2
    result = runner.invoke(pointkan_main, ["gradcheck", "--kind", "conv"])
    assert result.exit_code == 2
    result = runner.invoke(pointkan_main, ["bench", "--dims", "4,x"])
    assert result.exit_code == 2
    assert "expecting comma separated integers" in result.output


def test_gradcheck(runner):
    result = invoke_ok(runner, ["gradcheck", "--cases", "1", "--kind", "s_pool", "--kind", "dwconv"])
    rows = ndjson_rows(result.output)
    assert [r["kind"] for r in rows] == ["s_pool", "dwconv"]
    assert all(r["passed"] for r in rows)

    result = invoke_ok(runner, ["gradcheck", "--cases", "1", "--kind", "resp", "--format", "TXT"])
    assert "1 configuration checked" in result.output


def test_gradcheck_failure_exits(runner):
    result = runner.invoke(
        pointkan_main, ["gradcheck", "--cases", "1", "--kind", "kan_layer", "--tol", "1e-300"]
    )
    assert result.exit_code == 1
    assert "Gradient check failed for 1 configuration" in result.output


def test_bench(runner):
    args = ["bench", "--dims", "4,8", "--num-points", "64", "--num-classes", "3"]
    rows = ndjson_rows(invoke_ok(runner, [*args, "--format", "NDJSON"]).output)
    layers = [r for r in rows if "kind" in r]
    models = [r for r in rows if "backend" in r]
    assert len(layers) == 2 * 3
    assert [r["backend"] for r in models] == ["bspline", "rational", "mlp"]
    assert all("convention" in r for r in models)
    assert {r["ratio_to_mlp"] for r in layers if r["kind"] == "mlp"} == {1.0}
    # d = 4 at grid 5 order 3: 16 edges of 10 weights plus 4 biases
    vanilla = next(r for r in layers if r["kind"] == "vanilla_kan" and r["d_in"] == 4)
    assert vanilla["formula_params"] == 16 * 10 + 4

    pairs = ndjson_rows(invoke_ok(runner, [*args, "--pairs", "--groups", "2,3"]).output)
    # Group count 3 divides neither width
    assert len([r for r in pairs if "kind" in r]) == 4 * 3

    text = invoke_ok(runner, [*args, "--format", "TXT"]).output
    assert "FLOP convention" in text


def test_bench_pairs_grid(runner):
    args = "bench --pairs --dims 16,64,256 --groups 1,4,8 --num-points 64 --num-classes 3"
    rows = ndjson_rows(invoke_ok(runner, [*args.split(), "--format", "NDJSON"]).output)
    layers = [r for r in rows if "kind" in r]
    assert len(layers) == 9 * 5
    by_key = {(r["kind"], r["d_in"], r["d_out"], r["groups"]): r for r in layers}
    for a in (16, 64, 256):
        for b in (16, 64, 256):
            mlp = by_key[("mlp", a, b, None)]
            vanilla = by_key[("vanilla_kan", a, b, None)]
            assert mlp["formula_params"] == mlp["stored_params"] == a * b + b
            assert vanilla["formula_params"] == vanilla["stored_params"] == a * b * 10 + b
            # G + k + 2 weights per edge against one, biases aside
            assert vanilla["formula_params"] - b == 10 * (mlp["formula_params"] - b)
            assert vanilla["ratio_to_mlp"] == pytest.approx((10 * a * b + b) / (a * b + b))
            for g in (1, 4, 8):
                eff = by_key[("efficient_kan", a, b, g)]
                assert eff["formula_params"] == a * b + b + 4 + 5 * g
                assert eff["stored_params"] == eff["formula_params"] + g
                assert eff["ratio_to_mlp"] < vanilla["ratio_to_mlp"]


@pytest.mark.parametrize("backend", ["bspline", "mlp"])
def test_sensitivity(runner, backend):
    result = invoke_ok(
        runner,
        ["sensitivity", "--num-points", "64", "--backend", backend, "--out", "scores.txt"],
    )
    flagged = flag_count(64, 80)
    assert f"Flagged {flagged} of 64 points above the 80th percentile ({backend} backend)" in (
        result.output
    )
    lines = Path("scores.txt").read_text().splitlines()
    assert len(lines) == 64
    assert {len(ln.split()) for ln in lines} == {5}
    assert sum(int(ln.split()[4]) for ln in lines) == flagged
    assert min(float(ln.split()[3]) for ln in lines) >= 0


def test_sensitivity_of_a_points_file(runner):
    invoke_ok(runner, "synth --out s --shapes cone --per-class 1 --test-per-class 0 --points 32".split())
    args = "sensitivity --points s/cone/train_0000.xyz --percentile 50 --out cone.txt"
    invoke_ok(runner, args.split())
    assert sum(int(ln.split()[4]) for ln in Path("cone.txt").read_text().splitlines()) == 16


def test_fewshot_episodes(runner):
    synth_args = "synth --out many --shapes sphere,cube,torus --per-class 22 --test-per-class 0"
    invoke_ok(runner, [*synth_args.split(), "--points", "16"])
    args = "fewshot --data many/train.manifest --way 2 --shot 2 --trials 3 --episodes-only".split()
    result = invoke_ok(runner, args)
    lines = result.output.splitlines()
    assert len(lines) == 3
    for i, line in enumerate(lines, start=1):
        assert line.startswith(f"episode {i} classes ")
        assert line.endswith("train 4 test 40")
    assert invoke_ok(runner, args).output == result.output

    result = runner.invoke(pointkan_main, [*args[:-1], "--shot", "3"])
    assert result.exit_code == 1
    assert "need 2 classes with at least 23 instances" in str(result.exception)


def test_fewshot_trains_every_trial(runner):
    synth_args = "synth --out few --shapes sphere,cube,cylinder --per-class 22 --test-per-class 0"
    invoke_ok(runner, [*synth_args.split(), "--points", "64"])
    args = "fewshot --data few/train.manifest --way 2 --shot 2 --trials 2 --epochs 1 --backend mlp"
    result = invoke_ok(runner, args.split())
    lines = result.output.splitlines()
    assert len(lines) == 5
    assert [line.split(" classes ")[0] for line in lines[:2]] == ["episode 1", "episode 2"]
    trials = [float(line.removeprefix(f"trial {i} accuracy ")) for i, line in enumerate(lines[2:4], start=1)]
    assert all(0.0 <= acc <= 1.0 for acc in trials)

    mean, pm, std, *rest = lines[4].removeprefix("accuracy ").split()
    assert pm == "±"
    assert rest == ["over", "2", "trials"]
    assert float(mean) == pytest.approx(sum(trials) / 2, abs=1e-4)
    assert float(std) == pytest.approx(abs(trials[0] - trials[1]) / 2, abs=1e-4)
    assert invoke_ok(runner, args.split()).output == result.output
