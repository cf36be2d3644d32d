import json

import numpy as np
import pytest

from magnet import io as mio
from magnet.benchmark import read_csv
from magnet.cli import main
from magnet.errors import SchemaError, VersionMismatch
from magnet.estimator import ActorConfig, evaluate_accuracy, predict_proba, train_magnet
from magnet.synth import generate_setting1, generate_setting2

SMALL = ["--n", "40", "--nodes", "8", "--important", "3", "--feat-dim", "4"]


@pytest.fixture(scope="module")
def small_dataset():
    return generate_setting1(40, 8, 3, 4, seed=1)


def _same_dataset(a, b):
    return (
        a.adjacency == b.adjacency
        and np.array_equal(a.features, b.features)
        and np.array_equal(a.labels, b.labels)
        and np.array_equal(a.important_nodes, b.important_nodes)
        and a.meta == b.meta
    )


# --- datasets ----------------------------------------------------------------


@pytest.mark.parametrize("gen", [generate_setting1, generate_setting2])
def test_dataset_roundtrip_bitwise(tmp_path, gen):
    ds = gen(15, 9, 3, 6, seed=4)
    path = tmp_path / "d.json"
    mio.save_dataset(ds, path, {"seed": 4})
    back = mio.load_dataset(path)
    assert _same_dataset(ds, back)
    assert back.features.tobytes() == ds.features.tobytes()
    doc = json.loads(path.read_text())
    assert doc["schema_version"] == mio.SCHEMA_VERSION
    assert doc["run_config"] == {"seed": 4}


def _doc(ds):
    return json.loads(json.dumps(mio.dataset_to_dict(ds)))


def test_label_zero_rejected(small_dataset):
    doc = _doc(small_dataset)
    doc["instances"][2]["label"] = 0
    with pytest.raises(SchemaError) as err:
        mio.dataset_from_dict(doc)
    assert err.value.path == "$.instances[2].label"


def test_reversed_duplicate_edge_rejected(small_dataset):
    doc = _doc(small_dataset)
    i, j = doc["adjacency"][0]
    doc["adjacency"].append([j, i])
    with pytest.raises(SchemaError) as err:
        mio.dataset_from_dict(doc)
    assert err.value.path == f"$.adjacency[{len(doc['adjacency']) - 1}]"


def test_dataset_schema_errors(small_dataset, tmp_path):
    doc = _doc(small_dataset)
    del doc["n_nodes"]
    with pytest.raises(SchemaError):
        mio.dataset_from_dict(doc)
    doc = _doc(small_dataset)
    doc["instances"][0]["features"] = doc["instances"][0]["features"][:-1]
    with pytest.raises(SchemaError) as err:
        mio.dataset_from_dict(doc)
    assert err.value.path == "$.instances[0].features"
    path = tmp_path / "v.json"
    doc = _doc(small_dataset)
    doc["schema_version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(VersionMismatch):
        mio.load_dataset(path)


# --- models ------------------------------------------------------------------


@pytest.mark.parametrize(
    "cfg", [ActorConfig(), ActorConfig(head="mlp", head_epochs=30), ActorConfig(w_mode="trained", head_epochs=20)]
)
def test_model_roundtrip_predictions(tmp_path, small_dataset, cfg):
    model = train_magnet(small_dataset, cfg)
    path = tmp_path / "m.json"
    mio.save_model(model, path)
    back = mio.load_model(path)
    probe = np.random.default_rng(0).normal(size=(10, 8, 4))
    a = predict_proba(model, small_dataset.adjacency, probe)
    b = predict_proba(back, small_dataset.adjacency, probe)
    assert a.tobytes() == b.tobytes()
    doc = json.loads(path.read_text())
    for key in ("schema_version", "K", "w_mode", "W", "critics", "alphas", "head", "diagnostics", "label_convention"):
        assert key in doc
    assert {"epsilons", "betas"} <= set(doc["diagnostics"])


def test_truncated_model_file(tmp_path, small_dataset):
    path = tmp_path / "m.json"
    mio.save_model(train_magnet(small_dataset), path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(SchemaError):
        mio.load_model(path)


def test_alphas_length_mismatch(tmp_path, small_dataset):
    path = tmp_path / "m.json"
    mio.save_model(train_magnet(small_dataset), path)
    doc = json.loads(path.read_text())
    doc["alphas"] = doc["alphas"][:-1]
    path.write_text(json.dumps(doc))
    with pytest.raises(SchemaError) as err:
        mio.load_model(path)
    assert err.value.path.startswith("$.alphas")


def test_model_files_are_deterministic(tmp_path, small_dataset):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    mio.save_model(train_magnet(small_dataset), a)
    mio.save_model(train_magnet(small_dataset), b)
    assert a.read_bytes() == b.read_bytes()


# --- CLI ---------------------------------------------------------------------


def test_cli_generate_standard_configuration(tmp_path):
    out = tmp_path / "t1.json"
    code = main(["generate", "--setting", "1", "--n", "100", "--important", "10", "--nodes", "30",
                 "--seed", "3", "--out", str(out)])
    assert code == 0
    ds = mio.load_dataset(out)
    assert (ds.n, ds.n_nodes, len(ds.important_nodes), ds.feat_dim) == (100, 30, 10, 25)
    doc = json.loads(out.read_text())
    assert doc["run_config"]["seed"] == 3 and doc["run_config"]["command"] == "generate"


def test_cli_pipeline_and_evaluate_matches_in_process(tmp_path, capsys):
    data, model = tmp_path / "d.json", tmp_path / "m.json"
    assert main(["generate", *SMALL, "--seed", "2", "--out", str(data)]) == 0
    assert main(["train", "--data", str(data), "--seed", "2", "--out", str(model)]) == 0
    capsys.readouterr()
    assert main(["evaluate", "--data", str(data), "--model", str(model)]) == 0
    reported = json.loads(capsys.readouterr().out)
    in_process = evaluate_accuracy(mio.load_model(model), mio.load_dataset(data))
    assert reported["accuracy"] == in_process
    trained_here = train_magnet(mio.load_dataset(data), ActorConfig(seed=2))
    assert in_process == evaluate_accuracy(trained_here, mio.load_dataset(data))

    ex = tmp_path / "e.json"
    assert main(["explain", "--data", str(data), "--model", str(model), "--seed", "0", "--iters", "10",
                 "--out", str(ex)]) == 0
    doc = mio.load_explanation(ex)
    assert len(doc["loss_trajectory"]) == 10
    assert {"edge_scores", "feature_scores", "kept_edges", "kept_nodes", "kept_features"} <= set(doc)


def test_cli_split_evaluates_held_out_part(tmp_path, capsys):
    data, model = tmp_path / "d.json", tmp_path / "m.json"
    main(["generate", *SMALL, "--seed", "5", "--out", str(data)])
    main(["train", "--data", str(data), "--seed", "5", "--split", "0.7", "--out", str(model)])
    capsys.readouterr()
    main(["evaluate", "--data", str(data), "--model", str(model), "--seed", "5", "--split", "0.7"])
    reported = json.loads(capsys.readouterr().out)
    _, test = mio.load_dataset(data).split(0.7, 5)
    assert reported["n"] == test.n == 12
    assert reported["accuracy"] == evaluate_accuracy(mio.load_model(model), test)


def test_cli_benchmark_deterministic_and_report(tmp_path):
    args = ["benchmark", *SMALL, "--seed", "7", "--repeats", "1", "--iters", "15"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main([*args, "--out", str(a)]) == 0
    assert main([*args, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == "setting,n,nodes,important,method,metric,mean,sd,repeats"
    rows = read_csv(a)
    assert {r["metric"] for r in rows} == {"accuracy", "recovery", "rm", "am"}
    assert json.loads(a.with_suffix(".config.json").read_text())["run_config"]["seed"] == 7

    svg = tmp_path / "r.svg"
    assert main(["report", "--data", str(a), "--out", str(svg)]) == 0
    assert svg.read_text().startswith("<svg")
    assert "accuracy" in svg.with_suffix(".txt").read_text()


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["generate", "--seed", "1", "--important", "30", "--nodes", "30", "--out", str(tmp_path / "x")]) == 2
    assert "--important" in capsys.readouterr().err
    assert main(["generate", "--seed", "1", "--n", "0", "--out", str(tmp_path / "x")]) == 2
    assert "--n" in capsys.readouterr().err
    assert main(["generate", "--out", str(tmp_path / "x")]) == 2  # seed is mandatory
    assert main(["train", "--data", str(tmp_path / "missing.json"), "--seed", "1", "--out", "m"]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{\"schema_version\": 1, \"kind\": \"dataset\"}")
    assert main(["train", "--data", str(bad), "--seed", "1", "--out", str(tmp_path / "m")]) == 2
    assert "$.n_nodes" in capsys.readouterr().err
    assert main(["explain", "--data", str(bad), "--model", str(bad), "--seed", "1",
                 "--omega-end", "0", "--out", "e"]) == 2
    assert "--omega-end" in capsys.readouterr().err


def test_cli_runtime_error_exit_code(tmp_path):
    data = tmp_path / "d.json"
    ds = generate_setting1(6, 5, 2, 3, seed=0)
    ds = type(ds)(ds.adjacency, ds.features, np.ones(6, dtype=int), ds.important_nodes, ds.meta)
    mio.save_dataset(ds, data)
    # a single-class training set is a runtime failure, not a validation error
    assert main(["train", "--data", str(data), "--seed", "0", "--out", str(tmp_path / "m.json")]) == 1
