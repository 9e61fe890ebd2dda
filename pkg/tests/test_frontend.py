import time

import numpy as np
import pytest
from sklearn.base import clone

from asdpipe.corpus import read_wav
from asdpipe.exceptions import CorruptionError, ValidationError
from asdpipe.frontend import (
    AutoEncoderFrontend,
    DiscriminativeFrontend,
    EmbeddingSet,
    MetaLabelEncoder,
    RawSpecFrontend,
    extract,
    load_embeddings,
    load_waveforms,
    store_embeddings,
)
from asdpipe.frontend.features import branch_dim, spectrum_vector

TONE = 0.5 * np.sin(2 * np.pi * 250 * np.arange(16000) / 16000)  # every 512-hop frame identical


@pytest.fixture(scope="module")
def train_set(small_corpus):
    _, records = small_corpus
    train = [r for r in records if r.split == "train"]
    return train, load_waveforms(train)


@pytest.fixture(scope="module")
def dis(train_set):
    train, waves = train_set
    y = MetaLabelEncoder().fit_transform(train)
    est = DiscriminativeFrontend(epochs=16, batch_size=16, random_state=3).fit(waves, y)
    return est, waves, y


def test_ae_layout():
    ae = AutoEncoderFrontend()
    assert ae.input_dim == 640
    assert ae.layer_dims() == [640, 128, 128, 128, 128, 8, 128, 128, 128, 128, 640]
    assert len(ae.layer_dims()) - 1 == 10


def test_ae_memorises_constant_windows():
    ae = AutoEncoderFrontend(epochs=300, batch_size=32, learning_rate=3e-3, dtype="float64").fit([TONE])
    w = ae.windows(TONE)
    assert ae.loss_curve_[-1] < 1e-4
    assert np.max(np.abs(ae.net_(w) - w)) < 1e-2
    assert ae.anomaly_score([TONE])[0] < 1e-2


def test_ae_training_curve_and_noise_monotonicity(small_corpus):
    _, records = small_corpus
    mt = records[0].machine_type
    train = load_waveforms([r for r in records if r.machine_type == mt and r.split == "train"])
    normals = load_waveforms([r for r in records if r.machine_type == mt and r.label == "normal"])[:20]
    ae = AutoEncoderFrontend(random_state=1).fit(train)
    assert ae.loss_curve_[-1] <= 0.5 * ae.loss_curve_[0]
    rng = np.random.default_rng(0)
    base = ae.anomaly_score(normals)
    noisy = ae.anomaly_score([c + rng.standard_normal(c.size) for c in normals])
    assert len(normals) == 20
    assert np.all(base >= 0)
    assert np.all(noisy > base)


def test_ae_short_clip():
    with pytest.raises(ValidationError):
        AutoEncoderFrontend(epochs=1).fit([np.zeros(2000)])


def test_ae_checkpoint_round_trip(tmp_path):
    ae = AutoEncoderFrontend(epochs=2, hidden_units=16, n_hidden=1).fit([TONE])
    ae.save(tmp_path / "a.ckpt")
    back = AutoEncoderFrontend.load(tmp_path / "a.ckpt")
    assert back.get_params() == ae.get_params()
    assert np.array_equal(back.transform([TONE]), ae.transform([TONE]))


def test_ae_deterministic():
    a = AutoEncoderFrontend(epochs=3, hidden_units=16, n_hidden=1, random_state=4).fit([TONE])
    b = clone(a).fit([TONE])
    assert a.loss_curve_ == b.loss_curve_
    assert all(p.tobytes() == q.tobytes() for p, q in zip(a.net_.parameters(), b.net_.parameters()))


def test_dis_embedding_dims():
    assert DiscriminativeFrontend().embedding_dim == 256
    multi = DiscriminativeFrontend(branches=("spectrum", "spectrogram_256", "spectrogram_512", "spectrogram_1024"))
    assert multi.embedding_dim == 512
    assert branch_dim("spectrogram_1024") == 2 * 500
    assert branch_dim("spectrum") == 1024


def test_dis_training(dis):
    est, waves, y = dis
    assert est.train_accuracy_ > 0.9
    E = est.transform(waves)
    assert E.shape == (len(waves), 256) and np.all(np.isfinite(E))
    for row in est.scale_history_:
        assert all(1.0 <= s <= 50.0 for s in row)
    assert np.allclose(np.linalg.norm(est.head_.centers, axis=1), 1.0, atol=1e-6)


def test_dis_deterministic_and_round_trip(dis, tmp_path):
    est, waves, y = dis
    again = clone(est).fit(waves, y)
    assert np.array_equal(again.transform(waves[:5]), est.transform(waves[:5]))
    d1 = est.save(tmp_path / "a.ckpt")
    back = DiscriminativeFrontend.load(tmp_path / "a.ckpt")
    assert np.array_equal(back.transform(waves[:5]), est.transform(waves[:5]))
    assert back.save(tmp_path / "b.ckpt") == d1


def test_dis_subspace_and_arcface(train_set):
    train, waves = train_set
    y = MetaLabelEncoder().fit_transform(train)
    est = DiscriminativeFrontend(epochs=2, batch_size=16, use_subspace_loss=True, center_mode="fixed").fit(waves, y)
    assert len(est.branch_heads_) == 2 and all(h.trainable for h in est.branch_heads_)
    for h in est.branch_heads_:
        assert np.allclose(np.linalg.norm(h.centers, axis=1), 1.0, atol=1e-6)
    arc = DiscriminativeFrontend(epochs=1, batch_size=16, loss="arcface", use_spec_augment=True).fit(waves[:20], y[:20])
    assert arc.head_.scale == 30.0


def test_dis_needs_two_labels(train_set):
    _, waves = train_set
    with pytest.raises(ValidationError):
        DiscriminativeFrontend(epochs=1).fit(waves[:4], np.zeros(4, dtype=int))


def test_raw_spec(small_corpus):
    _, records = small_corpus
    raw = RawSpecFrontend()
    X = raw.fit().transform(load_waveforms(records[:3]))
    assert X.shape == (3, 128)
    assert not raw.transform([np.zeros(16000)]).any()


def test_spectrum_vector_peak():
    x = np.sin(2 * np.pi * 1000 * np.arange(16000) / 16000)
    v = spectrum_vector(x)
    # 1000 Hz is bin 512 of 8192; bins 103..4096 survive the band (3994 of them),
    # pooled in 922 chunks of 4 then 102 of 3, so bin 512 lands in chunk (512 - 103) // 4
    assert np.argmax(v) == (512 - 103) // 4


def test_label_encoder_policies(small_corpus):
    _, records = small_corpus
    enc = MetaLabelEncoder()
    y = enc.fit_transform(records)
    keys = [enc.key(r) for r in records]
    for a, b, ka, kb in zip(y, y[1:], keys, keys[1:]):
        assert (a == b) == (ka == kb)
    assert all(k.endswith("|noattr") for k in enc.classes_)
    r = dict(clip_id="x", machine_type="fan", section="00", attributes={"b": "2", "a": "1"})
    assert enc.key(r) == "fan|00|a=1,b=2"
    assert MetaLabelEncoder("ignore").key(dict(r, attributes={})) == "fan|00"
    with pytest.raises(ValidationError):
        enc.transform([dict(r, machine_type="pump")])


def test_store_round_trip(tmp_path, small_corpus):
    _, records = small_corpus
    X = np.random.default_rng(0).standard_normal((len(records), 7)).astype(np.float32)
    es = EmbeddingSet.from_records(X, records, recipe_id="r", seed=1, checkpoint_sha256="ab")
    store_embeddings(es, tmp_path / "s")
    first = {p.name: p.read_bytes() for p in (tmp_path / "s").iterdir()}
    back = load_embeddings(tmp_path / "s")
    assert back.X.tobytes() == X.tobytes() and back.meta == es.meta
    store_embeddings(back, tmp_path / "s")
    assert {p.name: p.read_bytes() for p in (tmp_path / "s").iterdir()} == first


def test_store_corruption(tmp_path, small_corpus):
    _, records = small_corpus
    es = EmbeddingSet.from_records(np.ones((3, 2)), records[:3])
    store_embeddings(es, tmp_path / "s")
    blob = tmp_path / "s" / "embeddings.f32le"
    blob.write_bytes(blob.read_bytes()[:8])  # 2 rows for a 3-row header
    with pytest.raises(CorruptionError):
        load_embeddings(tmp_path / "s")
    store_embeddings(es, tmp_path / "s")
    blob.write_bytes(b"\0" * 24)
    with pytest.raises(CorruptionError, match="hash"):
        load_embeddings(tmp_path / "s")


def test_store_benchmark(tmp_path):
    rows = [{"clip_id": str(i), "machine_type": "m", "section": "00", "domain": "source", "split": "test",
             "label": "normal", "subset": "dev"} for i in range(10000)]
    es = EmbeddingSet(np.random.default_rng(0).standard_normal((10000, 512)), rows)
    t = time.perf_counter()
    store_embeddings(es, tmp_path / "b")
    load_embeddings(tmp_path / "b")
    assert time.perf_counter() - t < 2.0


def test_extract_is_deterministic(small_corpus):
    _, records = small_corpus
    raw = RawSpecFrontend()
    a = extract(raw, records[:4], recipe_id="raw_spec", seed=0)
    b = extract(raw, records[:4], recipe_id="raw_spec", seed=0)
    assert a.X.tobytes() == b.X.tobytes() and a.meta == b.meta
    assert [m["clip_id"] for m in a.meta] == [r.clip_id for r in records[:4]]


def test_load_waveforms_lists_failures(tmp_path, small_corpus):
    _, records = small_corpus
    from dataclasses import replace
    bad = [replace(records[0], audio_path=str(tmp_path / "missing.wav")),
           replace(records[1], clip_id="other", audio_path=str(tmp_path / "nope.wav"))]
    with pytest.raises(ValidationError) as ei:
        load_waveforms(bad)
    assert "2 clip(s)" in str(ei.value)
    x, fs = read_wav(records[0].audio_path)
    with pytest.raises(ValidationError, match="sample rate"):
        load_waveforms(records[:1], sample_rate=8000)
