import csv
import json

import numpy as np
import pytest
from pyEvade import *
from pyEvade.experimentAPI import CELL_COLUMNS, SUMMARY_COLUMNS, PLOT_METRICS, load_datasets


@pytest.fixture
def setup_data():
    print("\nSetting up resources...")
    cfg = ExperimentConfig(synthetic=SyntheticSpec(n=200, m=40, n_signal=8, flip_noise=0.05),
                           classifiers=["logreg", "rf"], scenarios=["trivial", "distribution", "knn", "lr"],
                           lambdas=[10, 20], repetitions=2, seed=3, top=30, rank_trees=10, progress=False,
                           train_config=TrainConfig(n_trees=5, epochs=20),
                           attack_config=AttackConfig(train_config=TrainConfig(epochs=20)))
    yield cfg
    print("\nTearing down resources...")


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fd:
        return list(csv.DictReader(fd))


def test_config_validation():
    with pytest.raises(RuntimeError):
        ExperimentConfig()
    spec = SyntheticSpec(n=100, m=20, n_signal=4)
    with pytest.raises(RuntimeError):
        ExperimentConfig(synthetic=spec, lambdas=[0])
    with pytest.raises(RuntimeError):
        ExperimentConfig(synthetic=spec, eval_mode="loo")
    with pytest.raises(ValueError):
        ExperimentConfig(synthetic=spec, scenarios=["bogus"])
    cfg = ExperimentConfig(synthetic=spec, eval_mode="cv10", repetitions=3)
    assert cfg.effective_repetitions == 10
    assert cfg.as_dict()["repetitions"] == 10
    assert "workers" not in cfg.as_dict()


def test_run_produces_every_cell(setup_data):
    report = run_experiment(setup_data)
    assert report.failures() == []
    baseline = report.cells("baseline")
    assert len(baseline) == 2 * 2
    per_phase = 2 * 2 * 2 * 4
    for phase in ("attack", "adversarial-training", "gan"):
        assert len(report.cells(phase)) == per_phase
    assert len(report.rows) == len(baseline) + 3 * per_phase
    assert report.feature_counts == {"synthetic": 30}
    for row in report.cells("attack"):
        assert row["status"] == "ok"
        assert 0.0 <= row["evasion_rate"] <= 1.0
        assert row["n_eval"] == row["tp"] + row["tn"] + row["fp"] + row["fn"]
    for row in baseline:
        assert row["accuracy"] > 0.8


def test_rows_are_in_canonical_order(setup_data):
    report = run_experiment(setup_data)
    keys = [(r["dataset"], r["classifier"], r["repetition"]) for r in report.rows]
    assert keys == sorted(keys)
    block = [r for r in report.rows if r["classifier"] == "logreg" and r["repetition"] == 0]
    assert block[0]["phase"] == "baseline"
    attack = [(r["scenario"], r["lambda"]) for r in block if r["phase"] == "attack"]
    assert attack == [(s, lam) for s in ("trivial", "distribution", "knn", "lr") for lam in (10.0, 20.0)]


def test_results_do_not_depend_on_workers(setup_data):
    one = run_experiment(setup_data)
    two = run_experiment(setup_data.replace(workers=2))
    assert one.rows == two.rows
    assert one.aggregate() == two.aggregate()


def test_results_do_not_depend_on_other_scenarios(setup_data):
    full = run_experiment(setup_data)
    only = run_experiment(setup_data.replace(scenarios=["knn"]))
    pick = [r for r in full.cells("attack") if r["scenario"] == "knn"]
    assert pick == only.cells("attack")


def test_sweep_matches_single_run(setup_data):
    cfg = setup_data.replace(classifiers=["logreg"], repetitions=1, defenses=[])
    assert sweep_lambda(cfg).rows == run_experiment(cfg).rows


def test_failing_block_is_reported():
    vocab = FeatureVocabulary(["a", "b", "c"])
    rng = np.random.default_rng(0)
    benign_only = Dataset(vocab, rng.integers(0, 2, size=(30, 3)), [0] * 30, [f"s{i:02d}" for i in range(30)])
    cfg = ExperimentConfig(datasets={"benign": ("unused", None)}, classifiers=["logreg"], scenarios=["trivial"],
                           lambdas=[10], repetitions=1, progress=False, defenses=[])
    report = run_experiment(cfg, {"benign": benign_only})
    failed = report.failures()
    assert [r["phase"] for r in failed] == ["baseline", "attack"]
    assert all(r["error"] for r in failed)
    summary = report.aggregate()
    assert summary[0]["repetitions"] == 0
    assert summary[0]["failures"] == 1
    assert summary[0]["accuracy"] is None


def test_emit_report_files(setup_data, tmp_path):
    cfg = setup_data.replace(classifiers=["logreg"], repetitions=1)
    report = run_experiment(cfg)
    written = emit_report(report, tmp_path / "out")
    names = sorted(p.name for p in written)
    expected = ["cells.csv", "report.json", "summary.csv", "table_fpr_synthetic_logreg.csv", "timings.csv"] + \
               [f"plot_synthetic_logreg_{metric}.csv" for metric in PLOT_METRICS]
    assert names == sorted(expected)

    cells = read_rows(tmp_path / "out" / "cells.csv")
    assert list(cells[0]) == CELL_COLUMNS
    assert len(cells) == len(report.rows)
    assert {row["lambda"] for row in cells if row["phase"] == "attack"} == {"10", "20"}
    assert list(read_rows(tmp_path / "out" / "summary.csv")[0]) == SUMMARY_COLUMNS

    table = read_rows(tmp_path / "out" / "table_fpr_synthetic_logreg.csv")
    assert [row["scenario"] for row in table] == ["trivial", "distribution", "knn", "lr"]
    assert list(table[0]) == ["scenario", "3", "6"]

    plot = read_rows(tmp_path / "out" / "plot_synthetic_logreg_evasion_rate.csv")
    assert [row["lambda"] for row in plot] == ["10", "20"]

    with open(tmp_path / "out" / "report.json", encoding="utf-8") as fd:
        document = json.load(fd)
    assert document["cells"] == len(report.rows)
    assert document["failures"] == []
    assert document["feature_counts"] == {"synthetic": 30}
    assert "timings.csv" not in document["files"]


def test_reruns_are_byte_identical(setup_data, tmp_path):
    cfg = setup_data.replace(classifiers=["logreg"], repetitions=1, lambdas=[10])
    first = emit_report(run_experiment(cfg), tmp_path / "a")
    emit_report(run_experiment(cfg.replace(workers=2)), tmp_path / "b")
    for path in first:
        if path.name == "timings.csv":
            continue
        assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes(), path.name


def test_synthetic_dataset_seed(setup_data):
    a = load_datasets(setup_data)["synthetic"]
    b = load_datasets(setup_data.replace(seed=4))["synthetic"]
    c = load_datasets(setup_data.replace(seed=4, synthetic_seed=derive_seed(3, "synthetic")))["synthetic"]
    assert not np.array_equal(a.X, b.X)
    assert np.array_equal(a.X, c.X)


def test_from_properties(tmp_path, monkeypatch):
    d = generate_synthetic(SyntheticSpec(n=60, m=20, n_signal=4), seed=1)
    save_dataset(d, str(tmp_path / "small.jsonl"))
    save_vocabulary(d.vocab, str(tmp_path / "small.vocab"))
    path = tmp_path / "evade.properties"
    path.write_text("[experiment]\n"
                    "classifiers = svm, logreg\n"
                    "scenarios = trivial, knn\n"
                    "lambdas = 1, 5, 20\n"
                    "repetitions = 4\n"
                    "seed = 1\n"
                    "workers = 8\n"
                    "top = 50\n"
                    "defenses = gan\n"
                    "progress = false\n"
                    "[datasets]\n"
                    "small = small.jsonl\n"
                    "small.vocab = small.vocab\n"
                    "[synthetic]\n"
                    "enabled = false\n"
                    "[models]\n"
                    "n_trees = 9\n"
                    "[attacks]\n"
                    "k = 4\n", encoding="utf-8")
    monkeypatch.setenv("EVADE_SEED", "9")
    monkeypatch.setenv("EVADE_WORKERS", "5")
    monkeypatch.delenv("EVADE_OUTPUT", raising=False)
    cfg = ExperimentConfig.from_properties(str(path), workers=2)
    assert cfg.seed == 9
    assert cfg.workers == 2
    assert cfg.output == "evade-output"
    assert cfg.classifiers == [ModelKind.SVM, ModelKind.LOGREG]
    assert cfg.scenarios == [Scenario.TRIVIAL, Scenario.KNN]
    assert cfg.lambdas == [1.0, 5.0, 20.0]
    assert cfg.repetitions == 4
    assert cfg.top == 50
    assert cfg.defenses == [DefenseMethod.GAN]
    assert cfg.progress is False
    assert cfg.synthetic is None
    assert cfg.train_config.n_trees == 9
    assert cfg.attack_config.k == 4
    assert cfg.datasets == {"small": (str(tmp_path / "small.jsonl"), str(tmp_path / "small.vocab"))}
    assert load_datasets(cfg)["small"].m == 20
    monkeypatch.delenv("EVADE_WORKERS")
    assert ExperimentConfig.from_properties(str(path)).workers == 8


def test_missing_config_file_is_an_error(tmp_path):
    with pytest.raises(RuntimeError):
        ExperimentConfig.from_properties(str(tmp_path / "nowhere.properties"))


def test_jsma_evasion_is_measured_on_its_network(setup_data):
    cfg = setup_data.replace(classifiers=["rf"], scenarios=["jsma"], lambdas=[10], repetitions=1, defenses=[])
    [row] = run_experiment(cfg).cells("attack")

    data = load_datasets(cfg)["synthetic"]
    rep_seed = derive_seed(cfg.seed, "synthetic", "repetition", 0)
    split = split_dataset(data, derive_seed(rep_seed, "split"))
    top = select_top(rank_features(split.train, cfg.rank_trees, derive_seed(rep_seed, "rank")), cfg.top)
    train, test = split.train.restrict(top.order), split.test.restrict(top.order)
    victim = train_model("rf", train, cfg.train_config.replace(seed=derive_seed(rep_seed, "model", "rf")))
    mlp = train_mlp(train, cfg.attack_config.train_config.replace(seed=derive_seed(rep_seed, "jsma")))
    attack_cfg = cfg.attack_config.replace(lambda_percent=10.0, seed=derive_seed(rep_seed, "attack", "jsma", 10.0))
    advset = attack_jsma(AttackContext(train, test, mlp), attack_cfg)

    assert row["evasion_rate"] == pytest.approx(advset.evasion_rate())
    assert row["victim_evasion_rate"] == pytest.approx(evaluate_objective(advset, victim))


def test_defense_rows_report_held_out_accuracy(setup_data):
    cfg = setup_data.replace(classifiers=["logreg"], scenarios=["trivial", "distribution"], repetitions=1)
    report = run_experiment(cfg)
    for row in report.cells("adversarial-training"):
        assert 0.0 <= row["held_out_accuracy"] <= 1.0
    for row in report.cells("attack"):
        assert row["victim_evasion_rate"] == row["evasion_rate"]
        assert row["fpr_benign"] >= 0.0
    assert report.cells("gan")[0]["held_out_accuracy"] is None


def desk_config(**kwargs) -> ExperimentConfig:
    values = dict(synthetic=SyntheticSpec(n=2000, m=300, n_signal=40), classifiers=["rf"], lambdas=[10],
                  repetitions=3, seed=0, progress=False, workers=3, defenses=[])
    values.update(kwargs)
    return ExperimentConfig(**values)


def summary_of(report: RunReport) -> dict:
    return {(row["phase"], row["scenario"]): row for row in report.aggregate()}


@pytest.fixture(scope="module")
def desk_report():
    print("\nSetting up resources...")
    report = run_experiment(desk_config(scenarios=["distribution", "lr", "jsma"],
                                        defenses=["adversarial-training", "gan"]))
    yield report
    print("\nTearing down resources...")


@pytest.mark.slow
def test_desk_attacks_degrade_the_forest(desk_report):
    assert desk_report.failures() == []
    summary = summary_of(desk_report)
    baseline = summary[("baseline", "none")]
    distribution = summary[("attack", "distribution")]
    assert baseline["accuracy"] - distribution["accuracy"] >= 0.05
    assert distribution["fpr_benign"] - baseline["fpr_benign"] >= 0.05
    lr = summary[("attack", "lr")]
    assert lr["accuracy"] < baseline["accuracy"]
    assert lr["fpr_benign"] > baseline["fpr_benign"]


@pytest.mark.slow
def test_desk_defenses_recover_half_the_drop(desk_report):
    summary = summary_of(desk_report)
    baseline = summary[("baseline", "none")]["accuracy"]
    attacked = summary[("attack", "distribution")]["accuracy"]
    for phase in ("adversarial-training", "gan"):
        defended = summary[(phase, "distribution")]["accuracy"]
        assert defended - attacked >= 0.5 * (baseline - attacked), phase


@pytest.mark.slow
def test_desk_jsma_tracks_the_distribution_attack(desk_report):
    summary = summary_of(desk_report)
    jsma = summary[("attack", "jsma")]["evasion_rate"]
    distribution = summary[("attack", "distribution")]["evasion_rate"]
    assert abs(jsma - distribution) <= 0.15


@pytest.mark.slow
def test_desk_poison_timings():
    report = run_experiment(desk_config(scenarios=["trivial", "knn", "aco"], repetitions=1, workers=1))
    seconds = {row["scenario"]: row["seconds"] for row in report.timings if row["phase"] == "poison"}
    assert seconds["knn"] < seconds["aco"]
    assert seconds["trivial"] < seconds["aco"]


@pytest.mark.slow
def test_desk_attacks_stay_within_budget():
    limits = {Scenario.JSMA: 20, Scenario.ACO: 300}
    for seed in (0, 1, 2):
        data = generate_synthetic(SyntheticSpec(n=2000, m=300, n_signal=40), seed=seed)
        split = split_dataset(data, seed=seed + 10)
        top = select_top(rank_features(split.train, seed=seed), 300)
        train, test = split.train.restrict(top.order), split.test.restrict(top.order)
        ranking = to_subspace(top)
        forest = train_random_forest(train, TrainConfig(seed=seed))
        mlp = train_mlp(train, TrainConfig(seed=seed))
        rows = {sid: i for i, sid in enumerate(test.ids)}
        for scenario in Scenario:
            model = mlp if scenario == Scenario.JSMA else forest
            advset = run_attack(scenario, AttackContext(train, test, model), AttackConfig(lambda_percent=10, seed=seed),
                                ranking)
            limit = limits.get(scenario, percent_count(10, 300))
            for s in advset:
                x = test.X[rows[s.original_id]]
                assert np.all(s.x_star >= x), scenario
                assert len(s.delta) <= limit, scenario
                assert s.evaded == (model.predict(s.x_star) == BENIGN), scenario
