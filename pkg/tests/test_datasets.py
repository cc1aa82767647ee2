import json

import numpy as np
import pytest
from pyEvade import *
from pyEvade.datasetAPI import _split_sizes

RECORDS = [
    {"id": "app-1", "label": 1, "features": ["SEND_SMS", "READ_CONTACTS"]},
    {"id": "app-2", "label": 0, "features": ["INTERNET"]},
    {"id": "app-3", "label": 1, "features": ["SEND_SMS", "INTERNET", "BOOT_COMPLETED"]},
    {"id": "app-4", "label": 0, "features": []},
]


def write_lines(path, lines):
    with open(path, "wt", encoding="utf-8") as fd:
        for line in lines:
            fd.write(line)
            fd.write("\n")
    return str(path)


@pytest.fixture
def setup_data(tmp_path):
    print("\nSetting up resources...")
    dataset_path = write_lines(tmp_path / "apps.jsonl", [json.dumps(r) for r in RECORDS])
    vocab_path = write_lines(tmp_path / "apps.vocab", ["INTERNET", "SEND_SMS", "READ_CONTACTS", "CAMERA"])
    yield {"dataset": dataset_path, "vocab": vocab_path, "dir": tmp_path}
    print("\nTearing down resources...")


def test_load_dataset_builds_sorted_vocabulary(setup_data):
    d = load_dataset(setup_data["dataset"])
    assert d.vocab.names == ["BOOT_COMPLETED", "INTERNET", "READ_CONTACTS", "SEND_SMS"]
    assert d.n == 4
    assert d.m == 4
    assert d.ids == ["app-1", "app-2", "app-3", "app-4"]
    assert list(d.y) == [1, 0, 1, 0]
    assert devectorize(d.vocab, d.X[0]) == {"SEND_SMS", "READ_CONTACTS"}
    assert d.X[3].sum() == 0
    assert d.report.records == 4
    assert d.report.unknown_features == 0


def test_load_dataset_with_vocabulary_drops_unknown(setup_data):
    vocab = load_vocabulary(setup_data["vocab"])
    assert vocab.names == ["INTERNET", "SEND_SMS", "READ_CONTACTS", "CAMERA"]
    d = load_dataset(setup_data["dataset"], vocab)
    assert d.m == 4
    assert d.report.unknown_features == 1
    assert d.report.unknown_names == {"BOOT_COMPLETED"}
    assert list(d.X[2]) == [1, 1, 0, 0]
    assert list(d.X[:, 3]) == [0, 0, 0, 0]


def test_vectorize_round_trip(setup_data):
    vocab = load_vocabulary(setup_data["vocab"])
    x = vectorize(vocab, ["CAMERA", "INTERNET", "NOT_A_FEATURE"])
    assert list(x) == [1, 0, 0, 1]
    assert devectorize(vocab, x) == {"CAMERA", "INTERNET"}
    with pytest.raises(DimensionMismatchException):
        devectorize(vocab, np.zeros(3, dtype=np.uint8))


def test_dataset_file_round_trip(setup_data):
    d = load_dataset(setup_data["dataset"])
    path = str(setup_data["dir"] / "copy.jsonl")
    save_dataset(d, path)
    again = load_dataset(path, d.vocab)
    assert again.ids == d.ids
    assert np.array_equal(again.X, d.X)
    assert np.array_equal(again.y, d.y)


def test_bad_label_reports_line_number(setup_data):
    path = write_lines(setup_data["dir"] / "bad.jsonl", [
        json.dumps(RECORDS[0]),
        json.dumps({"id": "x", "label": 2, "features": []}),
    ])
    with pytest.raises(DatasetFormatException) as e:
        load_dataset(path)
    assert e.value.line_number == 2
    assert "line 2" in str(e.value)


def test_boolean_label_is_rejected(setup_data):
    path = write_lines(setup_data["dir"] / "bool.jsonl", [json.dumps({"id": "x", "label": True, "features": ["A"]})])
    with pytest.raises(DatasetFormatException):
        load_dataset(path)


def test_invalid_json_and_missing_fields(setup_data):
    path = write_lines(setup_data["dir"] / "broken.jsonl", ["{not json"])
    with pytest.raises(DatasetFormatException) as e:
        load_dataset(path)
    assert e.value.line_number == 1
    path = write_lines(setup_data["dir"] / "missing.jsonl", [json.dumps({"id": "x", "features": ["A"]})])
    with pytest.raises(DatasetFormatException) as e:
        load_dataset(path)
    assert "label" in str(e.value)


def test_duplicate_ids_and_empty_file(setup_data):
    path = write_lines(setup_data["dir"] / "dup.jsonl", [json.dumps(RECORDS[0]), json.dumps(RECORDS[0])])
    with pytest.raises(DatasetFormatException) as e:
        load_dataset(path)
    assert e.value.line_number == 2
    path = write_lines(setup_data["dir"] / "empty.jsonl", [""])
    with pytest.raises(DatasetFormatException):
        load_dataset(path)


def test_vocabulary_file_errors(setup_data):
    path = write_lines(setup_data["dir"] / "dup.vocab", ["A", "B", "A"])
    with pytest.raises(DatasetFormatException) as e:
        load_vocabulary(path)
    assert e.value.line_number == 3
    with pytest.raises(ValueError):
        FeatureVocabulary([])


def test_dataset_is_immutable(setup_data):
    d = load_dataset(setup_data["dataset"])
    with pytest.raises(ValueError):
        d.X[0, 0] = 1


def test_dataset_rejects_bad_shapes():
    vocab = FeatureVocabulary(["a", "b", "c"])
    with pytest.raises(DimensionMismatchException):
        Dataset(vocab, np.zeros((2, 4)), [0, 1], ["x", "y"])
    with pytest.raises(ValueError):
        Dataset(vocab, np.zeros((2, 3)), [0, 1, 1], ["x", "y"])
    with pytest.raises(ValueError):
        Dataset(vocab, np.full((1, 3), 2), [0], ["x"])


def test_split_is_stratified_and_disjoint():
    d = generate_synthetic(SyntheticSpec(n=500, m=50, n_signal=10, malware_fraction=0.3), seed=3)
    split = split_dataset(d, seed=11)
    assert split.train.n + split.validation.n + split.test.n == d.n
    ids = [set(split.train.ids), set(split.validation.ids), set(split.test.ids)]
    assert not ids[0] & ids[1]
    assert not ids[0] & ids[2]
    assert not ids[1] & ids[2]
    source = float(np.sum(d.y == MALWARE))
    for part in (split.train, split.validation, split.test):
        expected = source / d.n * part.n
        assert abs(float(np.sum(part.y == MALWARE)) - expected) <= 1.0
    assert abs(split.train.n - 0.6 * d.n) <= 2


def test_split_is_deterministic_per_seed():
    d = generate_synthetic(SyntheticSpec(n=200, m=30, n_signal=6), seed=1)
    a = split_dataset(d, seed=5)
    b = split_dataset(d, seed=5)
    c = split_dataset(d, seed=6)
    assert a.test.ids == b.test.ids
    assert a.train.ids == b.train.ids
    assert a.test.ids != c.test.ids


def test_split_edge_cases():
    vocab = FeatureVocabulary(["a", "b"])
    tiny = Dataset(vocab, np.zeros((4, 2)), [0, 0, 1, 1], ["1", "2", "3", "4"])
    with pytest.raises(ValueError):
        split_dataset(tiny, seed=0)
    one_class = Dataset(vocab, np.zeros((8, 2)), [0] * 7 + [1], [str(i) for i in range(8)])
    with pytest.raises(ValueError):
        split_dataset(one_class, seed=0)
    smallest = Dataset(vocab, np.zeros((6, 2)), [0, 0, 0, 1, 1, 1], [str(i) for i in range(6)])
    split = split_dataset(smallest, seed=0)
    assert split.train.n == 2
    assert split.validation.n == 2
    assert split.test.n == 2
    for part in (split.train, split.validation, split.test):
        assert sorted(part.y.tolist()) == [BENIGN, MALWARE]


def test_small_classes_keep_a_member_in_every_part():
    assert _split_sizes(3) == (1, 1, 1)
    assert _split_sizes(4) == (2, 1, 1)
    assert _split_sizes(7) == (5, 1, 1)
    assert _split_sizes(10) == (6, 2, 2)
    assert _split_sizes(12) == (8, 2, 2)
    vocab = FeatureVocabulary(["a", "b"])
    d = Dataset(vocab, np.zeros((13, 2)), [0] * 10 + [1] * 3, [f"s{i:02d}" for i in range(13)])
    split = split_dataset(d, seed=2)
    assert [part.n for part in (split.train, split.validation, split.test)] == [7, 3, 3]
    for part in (split.train, split.validation, split.test):
        assert np.sum(part.y == MALWARE) == 1


def test_kfold_covers_every_sample_once():
    d = generate_synthetic(SyntheticSpec(n=200, m=20, n_signal=4), seed=2)
    seen = []
    for train, test in kfold_splits(d, k=10, seed=4):
        assert train.n + test.n == d.n
        assert not set(train.ids) & set(test.ids)
        assert 1 <= np.sum(test.y == MALWARE) <= 11
        seen.extend(test.ids)
    assert sorted(seen) == sorted(d.ids)


def test_partition_and_helpers():
    d = generate_synthetic(SyntheticSpec(n=100, m=20, n_signal=4, malware_fraction=0.25), seed=0)
    parts = partition_by_class(d)
    assert parts.benign.n == 75
    assert parts.malware.n == 25
    assert d.malware_fraction() == pytest.approx(0.25)
    assert d.has_both_classes()
    both = parts.benign.concat(parts.malware)
    assert both.n == d.n
    restricted = d.restrict([3, 1])
    assert restricted.vocab.names == [d.vocab.names[3], d.vocab.names[1]]
    assert np.array_equal(restricted.X[:, 0], d.X[:, 3])


def test_synthetic_is_deterministic():
    spec = SyntheticSpec(n=300, m=40, n_signal=8)
    a = generate_synthetic(spec, seed=9)
    b = generate_synthetic(spec, seed=9)
    c = generate_synthetic(spec, seed=10)
    assert np.array_equal(a.X, b.X)
    assert np.array_equal(a.y, b.y)
    assert not np.array_equal(a.X, c.X)


def test_synthetic_signal_matches_templates():
    spec = SyntheticSpec(n=2000, m=60, n_signal=10, flip_noise=0.05, malware_fraction=0.5)
    d = generate_synthetic(spec, seed=1)
    assert len(d.signal.benign) == 5
    assert len(d.signal.malware) == 5
    assert np.sum(d.y == MALWARE) == 1000
    benign = d.X[d.y == BENIGN]
    malware = d.X[d.y == MALWARE]
    for j in d.signal.benign:
        assert benign[:, j].mean() > 0.9
        assert malware[:, j].mean() < 0.1
    for j in d.signal.malware:
        assert malware[:, j].mean() > 0.9
        assert benign[:, j].mean() < 0.1
    noise = np.setdiff1d(np.arange(spec.m), d.signal.all)
    rates = d.X[:, noise].mean(axis=0)
    assert rates.min() > 0.0
    assert rates.max() < 0.36


def test_synthetic_without_noise_is_separable():
    d = generate_synthetic(SyntheticSpec(n=200, m=30, n_signal=6, flip_noise=0.0), seed=4)
    column = d.signal.malware[0]
    assert np.array_equal(d.X[:, column], d.y.astype(np.uint8))


def test_synthetic_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(m=10, n_signal=11)
    with pytest.raises(ValueError):
        SyntheticSpec(malware_fraction=1.0)
    with pytest.raises(ValueError):
        SyntheticSpec(flip_noise=0.7)
