"""The four pipeline steps with hash-checked completion markers.

Layout under the workdir::

    corpora/<spec-hash>/                      synthetic corpus (when configured inline)
    runs/<config-hash>/run.json               resolved config snapshot
    runs/<config-hash>/<recipe>/report.{json,csv}
    runs/<config-hash>/<recipe>/seed<k>/<machine_type>/{train,test}/   feature stores
    runs/<config-hash>/<recipe>/seed<k>/_ckpt/  _scores/  _markers/
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from ..backend import KNNBackend
from ..corpus import SynthSpec, generate_synthetic, load_manifest
from ..corpus.records import YearCondition
from ..exceptions import ConfigError, CorruptionError, MarkerError
from ..frontend import (
    AutoEncoderFrontend,
    DiscriminativeFrontend,
    MetaLabelEncoder,
    RawSpecFrontend,
    extract,
    load_embeddings,
    load_waveforms,
    store_embeddings,
)
from ..metrics import ScoreTable
from ..report import build_report, evaluate_trial, save_report
from ..utils import sha256_file
from .config import RunConfig

log = logging.getLogger("asdpipe")

STEP_NAMES = {1: "train", 2: "extract", 3: "score"}


def derive_seed(seed: int, *parts) -> int:
    """Stable 32-bit sub-seed for (trial seed, machine type, purpose...)."""
    text = ":".join([str(int(seed)), *map(str, parts)])
    return int(hashlib.sha256(text.encode("utf-8")).hexdigest()[:8], 16)


# --- locations ------------------------------------------------------------------

def run_root(cfg: RunConfig) -> Path:
    return Path(cfg.workdir) / "runs" / cfg.config_hash()[:12]


def recipe_dir(cfg: RunConfig) -> Path:
    return run_root(cfg) / cfg.recipe


def trial_dir(cfg: RunConfig, seed: int) -> Path:
    return recipe_dir(cfg) / f"seed{int(seed)}"


def _marker_path(tdir: Path, step: int) -> Path:
    return tdir / "_markers" / f"step{step}.json"


# --- corpus -------------------------------------------------------------------

def corpus_manifest(cfg: RunConfig) -> Path:
    """Manifest path; synthesises the inline corpus once per spec."""
    if cfg.manifest is not None:
        return Path(cfg.manifest)
    spec = SynthSpec.from_dict(cfg.synth)
    blob = json.dumps(spec.to_dict(), sort_keys=True).encode("utf-8")
    out = Path(cfg.workdir) / "corpora" / hashlib.sha256(blob).hexdigest()[:12]
    done = out / "synth_spec.json"
    if not done.exists():
        tmp = out.with_name(out.name + ".partial")
        shutil.rmtree(tmp, ignore_errors=True)
        generate_synthetic(spec, tmp)
        shutil.rmtree(out, ignore_errors=True)
        tmp.rename(out)
    return out / "manifest.jsonl"


def load_corpus(cfg: RunConfig):
    return load_manifest(corpus_manifest(cfg), cfg.year)


def _by_machine(records):
    out: dict = {}
    for r in records:
        out.setdefault(r.machine_type, []).append(r)
    return dict(sorted(out.items()))


# --- markers ------------------------------------------------------------------

def _hashes(tdir: Path, paths) -> dict:
    return {p.relative_to(tdir).as_posix(): sha256_file(p) for p in sorted(paths)}


def write_marker(cfg: RunConfig, seed: int, step: int, status: str, outputs: dict, info=None) -> Path:
    tdir = trial_dir(cfg, seed)
    inputs = {}
    if step > 1:
        prev = _marker_path(tdir, step - 1)
        inputs[prev.relative_to(tdir).as_posix()] = sha256_file(prev)
    marker = {
        "step": step,
        "name": STEP_NAMES[step],
        "status": status,
        "config_hash": cfg.config_hash(),
        "seed": int(seed),
        "inputs": inputs,
        "outputs": outputs,
        "info": info or {},
    }
    path = _marker_path(tdir, step)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(marker, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path


def validate_marker(cfg: RunConfig, seed: int, step: int) -> dict:
    """Check a step's marker, its predecessor chain and every recorded hash."""
    tdir = trial_dir(cfg, seed)
    path = _marker_path(tdir, step)
    if not path.exists():
        raise MarkerError(f"seed {seed}: step {step} ({STEP_NAMES[step]}) has not completed; run it first")
    try:
        marker = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorruptionError(f"unreadable marker {path}: {exc}") from None
    if marker.get("config_hash") != cfg.config_hash() or marker.get("seed") != int(seed):
        raise MarkerError(f"marker {path} belongs to another configuration")
    if step > 1:
        validate_marker(cfg, seed, step - 1)
    for rel, digest in {**marker["inputs"], **marker["outputs"]}.items():
        f = tdir / rel
        if not f.exists():
            raise CorruptionError(f"seed {seed}: {rel} recorded by step {step} is missing")
        if sha256_file(f) != digest:
            raise CorruptionError(f"seed {seed}: {rel} does not match the hash recorded by step {step}")
    return marker


def _invalidate_from(tdir: Path, step: int) -> None:
    for s in range(step, 4):
        _marker_path(tdir, s).unlink(missing_ok=True)


# --- step 1 ---------------------------------------------------------------------

def _frontend_factory(cfg: RunConfig):
    params = cfg.frontend_params()
    if cfg.kind == "ae":
        return lambda seed: AutoEncoderFrontend(**params, random_state=seed)
    if cfg.kind == "dis":
        return lambda seed: DiscriminativeFrontend(**params, random_state=seed)
    return lambda seed: RawSpecFrontend(**params)


def run_step1_train(cfg: RunConfig, seed: int) -> Path:
    records, _ = load_corpus(cfg)
    tdir = trial_dir(cfg, seed)
    _invalidate_from(tdir, 1)
    train = [r for r in records if r.split == "train"]
    make = _frontend_factory(cfg)
    try:
        make(seed).set_params()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad frontend parameters: {exc}") from None
    if cfg.kind == "raw":
        log.info("seed %d: raw features need no training; step 1 skipped", seed)
        return write_marker(cfg, seed, 1, "skipped", {})
    ckdir = tdir / "_ckpt"
    shutil.rmtree(ckdir, ignore_errors=True)
    ckdir.mkdir(parents=True)
    info = {}
    with threadpool_limits(limits=1):
        if cfg.kind == "ae":
            for mt, recs in _by_machine(train).items():
                log.info("seed %d: training autoencoder for %s on %d clips", seed, mt, len(recs))
                est = make(derive_seed(seed, mt, "frontend")).fit(load_waveforms(recs))
                est.save(ckdir / f"{mt}.ckpt")
                info[mt] = {"final_loss": float(est.loss_curve_[-1])}
        else:
            encoder = MetaLabelEncoder(missing=cfg.label_missing)
            y = encoder.fit_transform(train)
            log.info("seed %d: training one frontend on %d clips, %d classes", seed, len(train), len(encoder.classes_))
            est = make(seed).fit(load_waveforms(train), y)
            est.save(ckdir / "frontend.ckpt")
            info = {"classes": encoder.classes_, "train_accuracy": float(est.train_accuracy_)}
    return write_marker(cfg, seed, 1, "done", _hashes(tdir, ckdir.glob("*.ckpt")), info)


# --- step 2 ---------------------------------------------------------------------

def run_step2_extract(cfg: RunConfig, seed: int) -> Path:
    marker = validate_marker(cfg, seed, 1)
    records, _ = load_corpus(cfg)
    tdir = trial_dir(cfg, seed)
    _invalidate_from(tdir, 2)
    ckdir = tdir / "_ckpt"
    shared = None
    if cfg.kind == "dis":
        shared = DiscriminativeFrontend.load(ckdir / "frontend.ckpt")
    elif cfg.kind == "raw":
        shared = _frontend_factory(cfg)(seed)
    outputs = []
    with threadpool_limits(limits=1):
        for mt, recs in _by_machine(records).items():
            if cfg.kind == "ae":
                path = ckdir / f"{mt}.ckpt"
                if not path.exists():
                    raise MarkerError(f"seed {seed}: no autoencoder checkpoint for {mt}")
                frontend, ck = AutoEncoderFrontend.load(path), marker["outputs"][f"_ckpt/{mt}.ckpt"]
            elif cfg.kind == "dis":
                frontend, ck = shared, marker["outputs"]["_ckpt/frontend.ckpt"]
            else:
                frontend, ck = shared, None
            for split in ("train", "test"):
                part = [r for r in recs if r.split == split]
                if not part:
                    continue
                es = extract(frontend, part, recipe_id=cfg.recipe, seed=int(seed), checkpoint_sha256=ck)
                d = tdir / mt / split
                shutil.rmtree(d, ignore_errors=True)
                store_embeddings(es, d)
                outputs += [d / "header.json", d / "embeddings.f32le", d / "meta.jsonl"]
            log.info("seed %d: stored features for %s", seed, mt)
    return write_marker(cfg, seed, 2, "done", _hashes(tdir, outputs))


# --- step 3 ---------------------------------------------------------------------

def effective_backend(cfg: RunConfig):
    b = cfg.backend
    if b.kind == "knn_smote" and not YearCondition.for_year(cfg.year).uses_target_domain:
        log.info("no target domain in %d data; knn_smote runs as plain knn", cfg.year)
        return replace(b, kind="knn")
    return b


def run_step3_score(cfg: RunConfig, seed: int) -> Path:
    validate_marker(cfg, seed, 2)
    tdir = trial_dir(cfg, seed)
    _invalidate_from(tdir, 3)
    backend_cfg = effective_backend(cfg)
    sdir = tdir / "_scores"
    shutil.rmtree(sdir, ignore_errors=True)
    sdir.mkdir(parents=True)
    machine_types = sorted(p.parent.parent.name for p in tdir.glob("*/test/header.json"))
    outputs = []
    with threadpool_limits(limits=1):
        for mt in machine_types:
            train, test = load_embeddings(tdir / mt / "train"), load_embeddings(tdir / mt / "test")
            backend = KNNBackend.from_config(backend_cfg, random_state=derive_seed(seed, mt, "backend"))
            try:
                backend.fit(train.X, train.column("domain"))
                scores = backend.anomaly_score(test.X)
            except Exception:
                log.error("seed %d: backend failed for machine type %s", seed, mt)
                raise
            path = sdir / f"{mt}.csv"
            ScoreTable.from_meta(test.meta, scores).to_csv(path)
            outputs.append(path)
    return write_marker(cfg, seed, 3, "done", _hashes(tdir, outputs), {"backend": backend_cfg.to_dict()})


def read_scores(path, subsets=None) -> ScoreTable:
    cols: dict = {k: [] for k in ("clip_id", "machine_type", "section", "domain", "label")}
    scores = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            for k in cols:
                cols[k].append(row[k])
            scores.append(float(row["score"]))
    subset = [subsets.get(c, "dev") for c in cols["clip_id"]] if subsets else []
    return ScoreTable(**cols, score=np.asarray(scores), subset=subset)


def trial_scores(cfg: RunConfig, seed: int, records=None) -> ScoreTable:
    marker = validate_marker(cfg, seed, 3)
    if records is None:
        records, _ = load_corpus(cfg)
    subsets = {r.clip_id: r.subset for r in records}
    tdir = trial_dir(cfg, seed)
    return ScoreTable.concat(read_scores(tdir / rel, subsets) for rel in sorted(marker["outputs"]))


# --- step 4 ---------------------------------------------------------------------

def run_step4_evaluate(cfg: RunConfig) -> dict:
    records, condition = load_corpus(cfg)
    for seed in cfg.seeds:
        validate_marker(cfg, seed, 3)
    trials = []
    for seed in cfg.seeds:
        table = trial_scores(cfg, seed, records)
        trials.append(evaluate_trial(table, condition, int(seed), cfg.pauc_p, cfg.pauc_standardized,
                                     cfg.two_stage_2020))
    report = build_report(cfg.year, cfg.recipe, trials, cfg.two_stage_2020)
    save_report(report, recipe_dir(cfg))
    return report


# --- orchestration --------------------------------------------------------------

def write_run_snapshot(cfg: RunConfig) -> Path:
    root = run_root(cfg)
    root.mkdir(parents=True, exist_ok=True)
    snap = {"config": cfg.identity(), "config_hash": cfg.config_hash()}
    path = root / "run.json"
    path.write_text(json.dumps(snap, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path


def run_trial(cfg: RunConfig, seed: int) -> None:
    run_step1_train(cfg, seed)
    run_step2_extract(cfg, seed)
    run_step3_score(cfg, seed)


def _run_trial_job(args):
    cfg, seed = args
    run_trial(cfg, seed)
    return seed


def run_all(cfg: RunConfig) -> dict:
    """Steps 1-3 for every seed, then the cross-trial evaluation."""
    corpus_manifest(cfg)
    load_corpus(cfg)
    write_run_snapshot(cfg)
    n_jobs = max(1, min(int(cfg.n_jobs), len(cfg.seeds)))
    if n_jobs == 1:
        for seed in cfg.seeds:
            run_trial(cfg, seed)
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            list(pool.map(_run_trial_job, [(cfg, s) for s in cfg.seeds]))
    return run_step4_evaluate(cfg)


def dev_aggregate(report) -> float:
    agg = report["cross_trial"]["dev"]
    return math.nan if agg is None else agg["mean"]
