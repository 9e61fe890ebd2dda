import json
import logging
from dataclasses import replace

import numpy as np
import pytest

from asdpipe.backend import BackendConfig
from asdpipe.corpus import generate_synthetic
from asdpipe.exceptions import ConfigError, CorruptionError, MarkerError
from asdpipe.frontend import load_embeddings
from asdpipe.pipeline import (
    RECIPES,
    RunConfig,
    run_all,
    run_step1_train,
    run_step2_extract,
    run_step3_score,
    run_step4_evaluate,
    trial_dir,
    validate_marker,
)
from asdpipe.pipeline.runner import read_scores, recipe_dir

from conftest import small_spec

FAST = {"ae": {"epochs": 2, "hidden_units": 16, "n_hidden": 1},
        "dis": {"epochs": 2, "batch_size": 16}}


@pytest.fixture(scope="module")
def manifests(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    generate_synthetic(small_spec(), root / "c23")
    generate_synthetic(small_spec(2, target_domain=False), root / "c20")
    return {2023: root / "c23" / "manifest.jsonl", 2020: root / "c20" / "manifest.jsonl"}


def make_cfg(manifests, tmp_path, recipe, year=2023, **kw):
    kind = RECIPES[recipe]["kind"]
    kw.setdefault("frontend", FAST.get(kind, {}))
    kw.setdefault("seeds", (0,))
    return RunConfig(year=year, recipe=recipe, manifest=str(manifests[year]), workdir=str(tmp_path / "w"), **kw)


def test_config_validation(manifests):
    base = dict(year=2023, manifest=str(manifests[2023]))
    with pytest.raises(ConfigError):
        RunConfig(recipe="nope", **base)
    with pytest.raises(ConfigError):
        RunConfig(recipe="raw_spec", seeds=(1, 1), **base)
    with pytest.raises(ConfigError):
        RunConfig(recipe="raw_spec", year=2023)
    with pytest.raises(ConfigError):
        RunConfig(recipe="ae", backend=BackendConfig(kind="knn"), **base)
    with pytest.raises(ConfigError):
        RunConfig(recipe="raw_spec", backend=BackendConfig(kind="copy"), **base)
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"recipe": "raw_spec", "year": 2023, "manifest": "m", "colour": 1})
    assert RunConfig(recipe="raw_spec", **base).seeds == (0, 1, 2, 3)
    assert RunConfig(recipe="ae", **base).backend.kind == "copy"


def test_recipe_defaults():
    assert set(RECIPES) == {"ae", "dis_spec_adacos_fixed_wo_mixup", "dis_spec_adacos_fixed", "dis_spec_scac_fixed",
                            "dis_spec_scac_trainable", "dis_spec_subspaceloss", "dis_multispec_scac_trainable",
                            "raw_spec"}
    assert RECIPES["dis_spec_adacos_fixed_wo_mixup"]["params"]["mixup_prob"] == 0.0
    assert len(RECIPES["dis_multispec_scac_trainable"]["params"]["branches"]) == 4


def test_config_hash_scope(manifests, tmp_path):
    cfg = make_cfg(manifests, tmp_path, "raw_spec")
    h = cfg.config_hash()
    assert replace(cfg, seeds=(5, 6), workdir="/elsewhere", n_jobs=3).config_hash() == h
    assert replace(cfg, backend=BackendConfig(kind="knn")).config_hash() != h
    assert replace(cfg, frontend={"n_mels": 64}).config_hash() != h
    assert RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))).config_hash() == h


def test_config_file_relative_paths(manifests, tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"year": 2023, "recipe": "raw_spec", "manifest": str(manifests[2023]),
                             "workdir": "out", "backend": {"kind": "knn", "k": 2}}))
    cfg = RunConfig.load(p)
    assert cfg.workdir == str(tmp_path / "out") and cfg.backend.k == 2
    cfg2 = cfg.with_overrides(recipe="ae", seeds=(3,))
    assert cfg2.backend.kind == "copy" and cfg2.seeds == (3,)


def test_raw_recipe_steps(manifests, tmp_path):
    cfg = make_cfg(manifests, tmp_path, "raw_spec")
    m1 = json.loads(run_step1_train(cfg, 0).read_text())
    assert m1["status"] == "skipped"
    run_step2_extract(cfg, 0)
    tdir = trial_dir(cfg, 0)
    for mt in ("machine00", "machine01", "machine02"):
        for split in ("train", "test"):
            assert load_embeddings(tdir / mt / split).dim == 128
    before = {p: p.read_bytes() for p in tdir.rglob("*") if p.is_file()}
    run_step2_extract(cfg, 0)
    assert {p: p.read_bytes() for p in tdir.rglob("*") if p.is_file()} == before


def test_ae_steps_and_copy_backend(manifests, tmp_path):
    cfg = make_cfg(manifests, tmp_path, "ae")
    run_step1_train(cfg, 0)
    tdir = trial_dir(cfg, 0)
    assert len(list((tdir / "_ckpt").glob("*.ckpt"))) == 3
    run_step2_extract(cfg, 0)
    run_step3_score(cfg, 0)
    for mt in ("machine00", "machine01", "machine02"):
        es = load_embeddings(tdir / mt / "test")
        table = read_scores(tdir / "_scores" / f"{mt}.csv")
        assert table.clip_id == list(es.column("clip_id"))
        assert np.allclose(table.score, es.X[:, 0], rtol=1e-8, atol=0)
        assert es.checkpoint_sha256 is not None


def test_dis_single_checkpoint_and_corruption(manifests, tmp_path):
    cfg = make_cfg(manifests, tmp_path, "dis_spec_scac_trainable")
    m1 = json.loads(run_step1_train(cfg, 0).read_text())
    tdir = trial_dir(cfg, 0)
    assert [p.name for p in (tdir / "_ckpt").iterdir()] == ["frontend.ckpt"]
    assert len(m1["info"]["classes"]) == 3
    ck = tdir / "_ckpt" / "frontend.ckpt"
    data = bytearray(ck.read_bytes())
    data[-1] ^= 0xFF
    ck.write_bytes(bytes(data))
    with pytest.raises(CorruptionError):
        run_step2_extract(cfg, 0)


def test_marker_chain(manifests, tmp_path):
    cfg = make_cfg(manifests, tmp_path, "raw_spec")
    with pytest.raises(MarkerError):
        run_step2_extract(cfg, 0)
    with pytest.raises(MarkerError):
        run_step4_evaluate(cfg)
    run_step1_train(cfg, 0)
    run_step2_extract(cfg, 0)
    run_step3_score(cfg, 0)
    validate_marker(cfg, 0, 3)
    run_step1_train(cfg, 0)  # re-running a step invalidates its successors
    with pytest.raises(MarkerError):
        validate_marker(cfg, 0, 2)


def test_scores_deterministic(manifests, tmp_path):
    cfg = make_cfg(manifests, tmp_path, "raw_spec")
    run_all(cfg)
    path = trial_dir(cfg, 0) / "_scores" / "machine00.csv"
    first = path.read_bytes()
    run_step3_score(cfg, 0)
    assert path.read_bytes() == first


def test_identical_trials_zero_std_and_report(manifests, tmp_path):
    cfg = make_cfg(manifests, tmp_path, "raw_spec", seeds=(0, 1, 2, 3), backend=BackendConfig(kind="knn"))
    report = run_all(cfg)
    assert report["cross_trial"]["dev"]["std"] == 0.0
    assert 0.0 <= report["cross_trial"]["dev"]["mean"] <= 1.0
    assert {u["machine_type"] for u in report["trials"][0]["units"]} == {"machine00", "machine01", "machine02"}
    text = (recipe_dir(cfg) / "report.json").read_text()
    assert str(tmp_path) not in text


def test_2020_degrades_smote(manifests, tmp_path, caplog):
    cfg = make_cfg(manifests, tmp_path, "raw_spec", year=2020)
    assert cfg.backend.kind == "knn_smote"
    with caplog.at_level(logging.INFO, logger="asdpipe"):
        report = run_all(cfg)
    assert any("plain knn" in r.message for r in caplog.records)
    marker = json.loads((trial_dir(cfg, 0) / "_markers" / "step3.json").read_text())
    assert marker["info"]["backend"]["kind"] == "knn"
    assert set(report["trials"][0]["units"][0]["metrics"]) == {"s_auc", "s_pauc"}


def test_inline_synth_corpus(tmp_path):
    spec = small_spec(2).to_dict()
    cfg = RunConfig(year=2023, recipe="raw_spec", synth=spec, workdir=str(tmp_path / "w"), seeds=(0,))
    report = run_all(cfg)
    assert len(list((tmp_path / "w" / "corpora").iterdir())) == 1
    assert report["cross_trial"]["dev"]["mean"] > 0.5


def test_parallel_trials_match_serial(manifests, tmp_path):
    serial = make_cfg(manifests, tmp_path / "a", "raw_spec", seeds=(0, 1))
    parallel = replace(serial, workdir=str(tmp_path / "b"), n_jobs=2)
    assert run_all(serial) == run_all(parallel)


@pytest.mark.parametrize("recipe", sorted(RECIPES))
def test_every_recipe_runs(recipe, manifests, tmp_path):
    report = run_all(make_cfg(manifests, tmp_path, recipe))
    assert 0.0 <= report["cross_trial"]["dev"]["mean"] <= 1.0
