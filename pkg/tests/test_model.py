import numpy as np
import pytest

from twem import nn
from twem.corpus import load_csv
from twem.embed import load_pretrained
from twem.errors import FormatError, TrainingError
from twem.evaluation import weighted_f1
from twem.model import (MAGIC, TrainConfig, forward, load_model, loss_and_backward, param_count,
                        param_count_note, predict, predict_proba, save_model, train)
from twem.text import apply_scheme

from conftest import desk_model, random_batch


def full_graph_grad_error(model, indices, mask, labels, corrupt=None):
    def loss_and_grad():
        for p in model.params():
            p.zero_grad()
        _, cache = forward(model, indices, mask)
        loss = loss_and_backward(model, cache, labels)
        if corrupt is not None:
            corrupt(model)
        return loss
    return {name: nn.grad_check(loss_and_grad, [p]) for name, p in model.named_params().items()}


def test_probabilities_sum_to_one(rng):
    model = desk_model()
    idx, mask = random_batch(rng, 16, 5, 20)
    probs, _ = forward(model, idx, mask)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-6)


def test_duplicate_rows_identical(rng):
    model = desk_model()
    idx, mask = random_batch(rng, 1, 5, 20)
    probs, _ = forward(model, np.repeat(idx, 2, 0), np.repeat(mask, 2, 0))
    np.testing.assert_array_equal(probs[0], probs[1])


def test_single_token_max_equals_mean():
    model = desk_model()
    _, cache = forward(model, np.array([[3, 0, 0, 0, 0]]), np.array([[1, 0, 0, 0, 0]]))
    D = model.dim
    np.testing.assert_array_equal(cache.d[0, :D], cache.d[0, D:])


def test_full_graph_gradient_check(rng):
    model = desk_model()
    idx, mask = random_batch(rng, 6, 5, 20)
    labels = rng.integers(0, 3, size=6)
    errors = full_graph_grad_error(model, idx, mask, labels)
    assert max(errors.values()) < 1e-4, errors


def test_gradient_check_catches_broken_embedding_gradient(rng):
    model = desk_model()
    idx, mask = random_batch(rng, 6, 5, 20)
    labels = rng.integers(0, 3, size=6)

    def corrupt(m):
        m.embeddings.grad *= 1.5
    errors = full_graph_grad_error(model, idx, mask, labels, corrupt)
    assert errors["embeddings"] > 1e-2


def test_pad_row_gets_no_gradient(rng):
    model = desk_model()
    idx, mask = random_batch(rng, 8, 5, 20)
    _, cache = forward(model, idx, mask)
    loss_and_backward(model, cache, rng.integers(0, 3, size=8))
    assert np.all(model.embeddings.grad[0] == 0)


def test_permutation_and_padding_invariance(rng):
    model = desk_model(dtype=np.float32)
    for _ in range(50):
        T = int(rng.integers(1, 6))
        seq = rng.integers(1, 20, size=T)
        base = np.zeros((1, 5), dtype=np.int64)
        base[0, :T] = seq
        m = (np.arange(5) < T).astype(np.int8)[None]
        perm = base.copy()
        perm[0, :T] = rng.permutation(seq)
        p0 = forward(model, base, m)[0]
        p1 = forward(model, perm, m)[0]
        assert p0.argmax() == p1.argmax()
        np.testing.assert_allclose(p0, p1, rtol=1e-5)
        wide = np.zeros((1, 9), dtype=np.int64)
        wide[0, :5] = base[0]
        wm = np.zeros((1, 9), dtype=np.int8)
        wm[0, :5] = m[0]
        np.testing.assert_allclose(forward(model, wide, wm)[0], p0, rtol=1e-6)


def test_param_count_formula():
    assert param_count(n_classes=3) == 123_053
    assert param_count(n_classes=2) == 123_002
    assert param_count(desk_model()) == (64 + 8) + (160 + 10) + (100 + 10) + (30 + 3) == 385
    assert param_count(desk_model()) == param_count(dim=8, hidden=10, n_classes=3)
    note = param_count_note(3)
    assert "123,053" in note and "~100k" in note and "23,053" in note


def test_predict_tie_and_argmax():
    probs = np.array([[0.2, 0.5, 0.3], [0.5, 0.5, 0.0]])
    assert probs.argmax(axis=1).tolist() == [1, 0]


def test_invalid_config_rejected():
    with pytest.raises(Exception):
        TrainConfig(dropout=1.0)
    with pytest.raises(Exception):
        TrainConfig(val_fraction=0.6)
    with pytest.raises(ValueError):
        TrainConfig(scheme="bogus")


def _fixture_data(fixture_dir):
    ds = load_csv(fixture_dir / "corpus.csv", "text", "label", ["neutral", "signal"])
    seqs = [apply_scheme(ex.text) for ex in ds.examples]
    pre = load_pretrained(fixture_dir / "embeddings.txt", 16)
    return ds, seqs, pre


FIXTURE_CFG = dict(lr=0.005, batch_size=16, epochs=15)


@pytest.mark.slow
def test_training_on_fixture_generalises(fixture_dir):
    ds, seqs, pre = _fixture_data(fixture_dir)
    train_idx = [i for i in range(len(seqs)) if i % 5]
    test_idx = [i for i in range(len(seqs)) if i % 5 == 0]
    labels = ds.labels
    model, hist = train([seqs[i] for i in train_idx], labels[train_idx], ds.label_names, pre,
                        TrainConfig(seed=3, **FIXTURE_CFG), allow_unk=True)
    assert len(hist.train_loss) == len(hist.val_loss) == 15
    assert hist.selected_epoch == int(np.argmin(hist.val_loss))
    preds = predict(model, [seqs[i] for i in test_idx])
    assert weighted_f1(labels[test_idx], preds, 2) >= 0.95
    train_preds = predict(model, [seqs[i] for i in train_idx])
    assert (train_preds == labels[train_idx]).mean() >= 0.95


def test_zero_epochs_returns_initial_model(fixture_dir):
    ds, seqs, pre = _fixture_data(fixture_dir)
    model, hist = train(seqs, ds.labels, ds.label_names, pre, TrainConfig(epochs=0, seed=1))
    fresh, _ = train(seqs, ds.labels, ds.label_names, pre, TrainConfig(epochs=0, seed=1))
    assert hist.train_loss == [] and hist.selected_epoch is None
    for a, b in zip(model.params(), fresh.params()):
        np.testing.assert_array_equal(a.value, b.value)


def test_training_is_deterministic(fixture_dir):
    ds, seqs, pre = _fixture_data(fixture_dir)
    cfg = TrainConfig(seed=9, epochs=3, batch_size=32)
    m1, h1 = train(seqs[:80], ds.labels[:80], ds.label_names, pre, cfg)
    m2, h2 = train(seqs[:80], ds.labels[:80], ds.label_names, pre, cfg)
    assert h1 == h2
    for a, b in zip(m1.params(), m2.params()):
        assert a.value.tobytes() == b.value.tobytes()


def test_single_class_training_rejected(fixture_dir):
    ds, seqs, pre = _fixture_data(fixture_dir)
    neutral = [i for i, ex in enumerate(ds.examples) if ex.label == 0][:20]
    with pytest.raises(TrainingError):
        train([seqs[i] for i in neutral], ds.labels[neutral], ds.label_names, pre,
              TrainConfig(epochs=1))


def test_embeddings_are_fine_tuned(fixture_dir):
    ds, seqs, pre = _fixture_data(fixture_dir)
    model, _ = train(seqs, ds.labels, ds.label_names, pre, TrainConfig(seed=2, epochs=1, batch_size=64))
    i = model.vocab.index["zorblax"]
    assert not np.allclose(model.embeddings.value[i], pre["zorblax"].astype(np.float32))
    np.testing.assert_array_equal(model.embeddings.value[0], 0)


def test_save_load_round_trip(tmp_path, rng):
    model = desk_model(dtype=np.float32)
    p1, p2 = tmp_path / "a.twem", tmp_path / "b.twem"
    save_model(model, p1)
    loaded = load_model(p1)
    save_model(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert p1.read_bytes().startswith(MAGIC)
    assert loaded.hidden == 10 and loaded.label_names == model.label_names
    assert loaded.vocab.tokens == model.vocab.tokens
    idx, mask = random_batch(rng, 100, 5, 20)
    np.testing.assert_array_equal(predict_proba(model, idx, mask), predict_proba(loaded, idx, mask))


def test_load_rejects_wrong_magic(tmp_path):
    model = desk_model(dtype=np.float32)
    path = tmp_path / "m.twem"
    save_model(model, path)
    path.write_bytes(b"TWEM2\n" + path.read_bytes()[len(MAGIC):])
    with pytest.raises(FormatError, match="magic"):
        load_model(path)


def test_load_truncated_tensor_names_it(tmp_path):
    model = desk_model(dtype=np.float32)
    path = tmp_path / "m.twem"
    save_model(model, path)
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(FormatError, match="out_b"):
        load_model(path)
