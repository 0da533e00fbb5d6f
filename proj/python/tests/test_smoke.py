import json

import numpy as np
import pytest

import dmldeep


@pytest.fixture(scope="module")
def data():
    return dmldeep.generate({"n": 2000, "explainable_fraction": 1.0, "feature_dim": 3}, seed=4)


def test_generate_shapes(data):
    assert data.n == 2000
    assert data.modalities() == ["tab", "txt", "img"]
    assert data.block("txt").shape == (2000, 3)
    assert data.columns("img") == ["f0", "f1", "f2"]
    assert data.violations() == []
    oracle = data.oracle()
    np.testing.assert_allclose(data.y, 0.5 * data.d + oracle["g0"] + oracle["eps"], atol=1e-12)
    assert json.loads(data.manifest_json())["theta0"] == 0.5


def test_bounds_and_plim(data):
    b = dmldeep.oracle_bounds(data)
    assert 0.6 < b["r2_d"] < 0.73
    assert b["ols_theta"] == pytest.approx(dmldeep.ols_baseline(data.y, data.d))
    assert dmldeep.attenuated_theta_plim({"explainable_fraction": 1.0}) == pytest.approx(0.5)


def test_estimate(data):
    single = dmldeep.estimate(data, {"kind": "ridge", "penalty": 0.1})
    assert single["ci"][0] < single["theta_hat"] < single["ci"][1]
    assert abs(single["theta_hat"] - 0.5) < 4 * single["se"]
    kfold = dmldeep.estimate(data, {"kind": "oracle"}, scheme={"kind": "kfold", "folds": 3, "repeats": 2})
    assert len(kfold["repeats"]) == 2
    assert kfold["split_descriptor"].startswith("kfold(K=3) x2")


def test_benchmark_and_trace(data):
    config = {
        "roster": [
            {"name": "Lin", "spec": {"kind": "ridge"}, "modalities": ["tab"]},
            {"name": "Oracle", "spec": {"kind": "oracle"}},
        ],
        "scheme": {"repeats": 2},
    }
    report = dmldeep.benchmark(data, config)
    assert [r["name"] for r in report["rows"]] == ["Lin", "Oracle"]
    points = dmldeep.trace(data, {"kind": "fusion", "epochs": 3, "encoder_widths": [8], "embedding_dim": 4})
    assert [p["epoch"] for p in points] == [1, 2, 3]


def test_orthogonality(data):
    dl, dm = dmldeep.orthogonality_check(data, 0.01, 1)
    assert abs(dl) < 0.1 and abs(dm) < 0.1


def test_embedding_import_round_trip(data, tmp_path):
    dmldeep.write_dataset(data, str(tmp_path / "ds"))
    ds = dmldeep.read_dataset(str(tmp_path / "ds"))
    np.testing.assert_array_equal(ds.y, data.y)
    emb = np.arange(ds.n * 4, dtype=float).reshape(ds.n, 4) / 7.0
    lines = ["id," + ",".join(f"e{k}" for k in range(4))]
    lines += [f"{i}," + ",".join(repr(float(v)) for v in row) for i, row in zip(ds.ids, emb)]
    (tmp_path / "emb.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(dmldeep.ValidationError, match="--replace"):
        dmldeep.import_embeddings(ds, str(tmp_path / "emb.csv"), "txt")
    dmldeep.import_embeddings(ds, str(tmp_path / "emb.csv"), "txt", replace=True)
    np.testing.assert_array_equal(ds.block("txt"), emb)
    assert ds.columns("txt") == ["e0", "e1", "e2", "e3"]


def test_errors(data):
    with pytest.raises(dmldeep.ValidationError):
        dmldeep.estimate(data, {"kind": "forest"})
    with pytest.raises(dmldeep.SchemaError):
        dmldeep.estimate(data, {"kind": "ridge"}, modalities=["audio"])
    with pytest.raises(dmldeep.IoError):
        dmldeep.read_dataset("/nonexistent/dmldeep")
    assert issubclass(dmldeep.SchemaError, dmldeep.ValidationError)
