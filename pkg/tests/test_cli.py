import json

import pytest

from svmpool.cli import apply_env, build_parser, main
from svmpool.dataio import read_container


@pytest.fixture
def dataset(tmp_path):
    path = tmp_path / "ds.json"
    assert main(["synth", "--out", str(path), "--classes", "3", "--per-class", "6"]) == 0
    return path


def test_synth_writes_manifest_and_blob(dataset):
    assert dataset.exists() and dataset.with_suffix(".f32").exists()


def test_pool_echoes_resolved_config(dataset, tmp_path, capsys):
    out = tmp_path / "d.bin"
    assert main(["pool", "--data", str(dataset), "--out", str(out),
                 "--eta", "0.9", "--c-fixed", "10"]) == 0
    echoed = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert echoed["pool"]["eta"] == 0.9 and echoed["pool"]["c_fixed"] == 10.0
    head, arrays = read_container(out, "SVMPDESC", 1)
    assert head["config"] == echoed
    assert arrays["descriptors"].shape == (18, 129)
    assert list(arrays["final_C"]) == [10.0] * 18


def test_eval_lists_fold_accuracies(dataset, tmp_path):
    out = tmp_path / "r.json"
    assert main(["eval", "--data", str(dataset), "--out", str(out), "--folds", "3"]) == 0
    report = json.loads(out.read_text())
    assert len(report["fold_accuracies"]) == 3
    assert report["mean_accuracy"] == pytest.approx(sum(report["fold_accuracies"]) / 3)
    assert len(report["confusion"]) == 3 and len(report["per_class_accuracy"]) == 3
    assert report["config"]["eval"]["c2"] == 10.0
    timings = json.loads((tmp_path / "r.json.timings.json").read_text())
    assert "pool_svmp" in timings


def test_train_then_score(dataset, tmp_path):
    model = tmp_path / "m.bin"
    assert main(["train", "--data", str(dataset), "--out", str(model), "--pipeline", "svmp"]) == 0
    out = tmp_path / "s.json"
    assert main(["eval", "--data", str(dataset), "--out", str(out), "--model", str(model)]) == 0
    report = json.loads(out.read_text())
    assert report["config"]["pipeline"] == "svmp"
    assert 0.0 <= report["overall_accuracy"] <= 1.0


def test_report_table(dataset, tmp_path, capsys):
    out = tmp_path / "t.json"
    assert main(["report", "--data", str(dataset), "--out", str(out),
                 "--pipelines", "avg,max,svmp", "--eta-sweep", "0.5,0.9"]) == 0
    report = json.loads(out.read_text())
    assert [r["pipeline"] for r in report["table"]] == ["avg", "max", "svmp"]
    assert [r["eta"] for r in report["eta_sweep"]] == [0.5, 0.9]
    assert "svmp" in capsys.readouterr().out


def test_inputs_not_mutated(dataset, tmp_path):
    before = dataset.read_bytes(), dataset.with_suffix(".f32").read_bytes()
    main(["eval", "--data", str(dataset), "--out", str(tmp_path / "r.json"), "--pipeline", "avg"])
    assert (dataset.read_bytes(), dataset.with_suffix(".f32").read_bytes()) == before


def test_resampling_bag_sizes(dataset, tmp_path):
    out = tmp_path / "d.bin"
    assert main(["pool", "--data", str(dataset), "--out", str(out), "--pos-bag-size", "10",
                 "--neg-bag-size", "20"]) == 0
    head, _ = read_container(out, "SVMPDESC", 1)
    assert head["dataset"]["negative_frames"] == 20


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_exit_codes(dataset, tmp_path, capsys):
    assert main(["eval", "--data", str(tmp_path / "none.json"), "--out", str(tmp_path / "x")]) == 3
    assert _error(capsys)["category"] == "data"
    assert main(["pool", "--data", str(dataset), "--out", str(tmp_path / "x"), "--eta", "1.5"]) == 2
    assert _error(capsys)["category"] == "usage"
    assert main(["eval", "--data", str(dataset), "--out", str(tmp_path / "x"), "--folds", "1"]) == 2
    assert main(["report", "--data", str(dataset), "--out", str(tmp_path / "x"),
                 "--pipelines", "avg,median"]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["pool", "--data", str(dataset)])
    assert exc.value.code == 2
    assert not (tmp_path / "x").exists()

    blob = dataset.with_suffix(".f32")
    blob.write_bytes(blob.read_bytes()[:-4])
    assert main(["pool", "--data", str(dataset), "--out", str(tmp_path / "x")]) == 3
    assert _error(capsys)["error"] == "CorruptFile"


def test_numerical_exit_code(dataset, tmp_path, monkeypatch, capsys):
    import svmpool.cli as cli
    from svmpool.errors import NotPSD

    def boom(*a, **k):
        raise NotPSD("indefinite")

    monkeypatch.setattr(cli, "cross_validate", boom)
    assert main(["eval", "--data", str(dataset), "--out", str(tmp_path / "x")]) == 4
    assert _error(capsys)["category"] == "numerical"


def test_env_overrides(monkeypatch, dataset, tmp_path):
    parser = build_parser()
    apply_env(parser, {"SVMPOOL_C2": "2.5", "SVMPOOL_FOLDS": "4", "SVMPOOL_KERNEL": "rbf"})
    args = parser.parse_args(["eval", "--data", "x", "--out", "y"])
    assert args.c2 == 2.5 and args.folds == 4
    args = parser.parse_args(["eval", "--data", "x", "--out", "y", "--c2", "7"])
    assert args.c2 == 7.0
    assert parser.parse_args(["pool", "--data", "x", "--out", "y"]).kernel == "rbf"

    monkeypatch.setenv("SVMPOOL_ETA", "0.5")
    out = tmp_path / "d.bin"
    assert main(["pool", "--data", str(dataset), "--out", str(out)]) == 0
    head, _ = read_container(out, "SVMPDESC", 1)
    assert head["config"]["pool"]["eta"] == 0.5
    monkeypatch.setenv("SVMPOOL_KERNEL", "poly")
    assert main(["pool", "--data", str(dataset), "--out", str(out)]) == 2
