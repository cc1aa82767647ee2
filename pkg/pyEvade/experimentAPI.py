"""
pyEvade experiment module definition

Orchestrates the protocol: ingest, rank, train, attack, defend and evaluate, repeated over seeded
splits and a sweep of lambda values, then writes per-cell CSV rows, mean aggregates, table and
plot data files and a JSON master report.

author:     pyEvade developers
licence:    Apache License 2.0

"""
import csv
import threading
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from pathlib import Path
from typing import Optional

from tqdm import tqdm

from pyEvade.common import *
from pyEvade.datasetAPI import Dataset, DatasetSplit, SyntheticSpec, load_dataset, load_vocabulary, \
    split_dataset, kfold_splits, generate_synthetic
from pyEvade.rankingAPI import rank_features, select_top, to_subspace
from pyEvade.modelAPI import TrainConfig, train_model, train_mlp, train_logistic_regression
from pyEvade.attackAPI import AttackConfig, AttackContext, run_attack, poison_dataset, evaluate_objective
from pyEvade.defenseAPI import adversarial_training, gan_defense
from pyEvade.metricsAPI import METRIC_COLUMNS, evaluate

logger = logging.getLogger(__name__)

DEFAULT_LAMBDAS = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 20]
DEFAULT_CLASSIFIERS = [ModelKind.FOREST, ModelKind.BAGGING, ModelKind.SVM]
DEFAULT_OUTPUT = "evade-output"
SYNTHETIC_DATASET = "synthetic"

PHASES = ["baseline", "validation", "attack", DefenseMethod.ADVERSARIAL_TRAINING.value, DefenseMethod.GAN.value]
SCENARIO_ORDER = [s.value for s in Scenario]
NO_SCENARIO = "none"

CELL_EXTRAS = ["evasion_rate", "victim_evasion_rate", "mean_flips", "held_out_accuracy"]
CELL_COLUMNS = ["dataset", "classifier", "repetition", "phase", "scenario", "lambda", "status", "error",
                "n_eval"] + METRIC_COLUMNS + CELL_EXTRAS + ["tp", "tn", "fp", "fn"]
SUMMARY_COLUMNS = ["dataset", "classifier", "phase", "scenario", "lambda", "repetitions", "failures"] + \
                  METRIC_COLUMNS + CELL_EXTRAS
TIMING_COLUMNS = ["dataset", "classifier", "repetition", "scenario", "lambda", "phase", "seconds"]
PLOT_METRICS = ["accuracy", "fpr_paper", "fpr_benign", "evasion_rate"]
AVERAGED = METRIC_COLUMNS + CELL_EXTRAS


class ExperimentConfig:
    """
    Everything a sweep needs

    datasets maps a dataset name to (path, optional vocabulary path); synthetic adds a generated
    dataset named "synthetic". eval_mode is "split" (60/20/20 repeated) or "cv10" (stratified folds).
    """

    def __init__(self, datasets: Optional[dict] = None, synthetic: Optional[SyntheticSpec] = None,
                 classifiers: Optional[list] = None, scenarios: Optional[list] = None,
                 lambdas: Optional[list] = None, repetitions: int = 10, seed: int = 0,
                 output: str = DEFAULT_OUTPUT, workers: int = 1, top: int = 300, rank_trees: int = 100,
                 eval_mode: str = "split", validation: bool = False, defenses: Optional[list] = None,
                 progress: bool = True, train_config: Optional[TrainConfig] = None,
                 attack_config: Optional[AttackConfig] = None, synthetic_seed: Optional[int] = None):
        self.datasets = datasets or {}
        self.synthetic = synthetic
        self.classifiers = [ModelKind(c) for c in (classifiers or DEFAULT_CLASSIFIERS)]
        self.scenarios = [Scenario(s) for s in (scenarios or list(Scenario))]
        self.lambdas = [float(v) for v in (lambdas or DEFAULT_LAMBDAS)]
        self.repetitions = int(repetitions)
        self.seed = int(seed)
        self.output = output
        self.workers = max(1, int(workers))
        self.top = int(top)
        self.rank_trees = int(rank_trees)
        self.eval_mode = eval_mode
        self.validation = bool(validation)
        self.defenses = [DefenseMethod(d) for d in (defenses if defenses is not None else list(DefenseMethod))]
        self.progress = bool(progress)
        self.train_config = train_config or TrainConfig()
        self.attack_config = attack_config or AttackConfig()
        self.synthetic_seed = synthetic_seed
        self.validate()

    def validate(self):
        if self.repetitions < 1:
            msg = f"repetitions must be at least 1, got {self.repetitions}"
        elif any(not 0 < v <= 100 for v in self.lambdas):
            msg = f"lambda values must lie in (0, 100], got {self.lambdas}"
        elif self.eval_mode not in ("split", "cv10"):
            msg = f"eval mode must be split or cv10, got {self.eval_mode}"
        elif not self.datasets and self.synthetic is None:
            msg = "No dataset configured: add a [datasets] entry or enable [synthetic]"
        else:
            return
        logger.error(msg)
        raise RuntimeError(msg)

    @property
    def effective_repetitions(self) -> int:
        return 10 if self.eval_mode == "cv10" else self.repetitions

    def replace(self, **kwargs) -> 'ExperimentConfig':
        values = dict(datasets=self.datasets, synthetic=self.synthetic, classifiers=self.classifiers,
                      scenarios=self.scenarios, lambdas=self.lambdas, repetitions=self.repetitions, seed=self.seed,
                      output=self.output, workers=self.workers, top=self.top, rank_trees=self.rank_trees,
                      eval_mode=self.eval_mode, validation=self.validation, defenses=self.defenses,
                      progress=self.progress, train_config=self.train_config, attack_config=self.attack_config,
                      synthetic_seed=self.synthetic_seed)
        values.update(kwargs)
        return ExperimentConfig(**values)

    def as_dict(self) -> dict:
        """
        Config echo for report.json, output location and worker count are left out so reports compare equal
        """
        return {
            "datasets": {name: list(entry) for name, entry in sorted(self.datasets.items())},
            "synthetic": None if self.synthetic is None else {
                "n": self.synthetic.n, "m": self.synthetic.m, "n_signal": self.synthetic.n_signal,
                "flip_noise": self.synthetic.flip_noise, "malware_fraction": self.synthetic.malware_fraction},
            "classifiers": [c.value for c in self.classifiers],
            "scenarios": [s.value for s in self.scenarios],
            "lambdas": self.lambdas,
            "repetitions": self.effective_repetitions,
            "seed": self.seed,
            "top": self.top,
            "rank_trees": self.rank_trees,
            "eval_mode": self.eval_mode,
            "validation": self.validation,
            "defenses": [d.value for d in self.defenses],
            "models": self.train_config.as_dict(),
            "attacks": self.attack_config.as_dict(),
        }

    @classmethod
    def from_properties(cls, path: str = DEFAULT_CONFIG_PATH, workers=None, seed=None, output=None,
                        progress=None) -> 'ExperimentConfig':
        """
        Read an experiment properties file

        Settings are looked up in the method arguments, then the environment variables
        EVADE_WORKERS, EVADE_SEED and EVADE_OUTPUT, then the properties file, then the defaults.

        :param path: properties file
        :return: ExperimentConfig
        """
        config = read_properties(path)
        base = Path(path).parent if path else Path(".")

        def setting(value, env_name, key, default=None):
            return resolve_setting(value, env_name, config, "experiment", key, default)

        datasets = {}
        if config.has_section("datasets"):
            for name, value in config["datasets"].items():
                if name.endswith(".vocab"):
                    continue
                vocab = config["datasets"].get(f"{name}.vocab")
                datasets[name] = (str(base / value), str(base / vocab) if vocab else None)

        synthetic = None
        synthetic_seed = None
        if config.has_section("synthetic") and strtobool(config["synthetic"].get("enabled", "true")):
            section = config["synthetic"]
            synthetic = SyntheticSpec(n=int(section.get("n", 2000)), m=int(section.get("m", 300)),
                                      n_signal=int(section.get("signal", 40)),
                                      flip_noise=float(section.get("noise", 0.05)),
                                      malware_fraction=float(section.get("malware_fraction", 0.5)))
            if "seed" in section:
                synthetic_seed = int(section["seed"])

        master_seed = int(setting(seed, ENV_SEED, "seed", 0))
        lambdas = [float(v) for v in split_list(setting(None, None, "lambdas"))] or None
        cfg = cls(datasets=datasets, synthetic=synthetic,
                  classifiers=split_list(setting(None, None, "classifiers")) or None,
                  scenarios=split_list(setting(None, None, "scenarios")) or None,
                  lambdas=lambdas,
                  repetitions=int(setting(None, None, "repetitions", 10)),
                  seed=master_seed,
                  output=setting(output, ENV_OUTPUT, "output", DEFAULT_OUTPUT),
                  workers=int(setting(workers, ENV_WORKERS, "workers", os.cpu_count() or 1)),
                  top=int(setting(None, None, "top", 300)),
                  rank_trees=int(setting(None, None, "rank_trees", 100)),
                  eval_mode=setting(None, None, "eval", "split"),
                  validation=strtobool(setting(None, None, "validation", "false")),
                  defenses=split_list(setting(None, None, "defenses", ",".join(d.value for d in DefenseMethod))),
                  progress=strtobool(setting(progress, None, "progress", "true")),
                  train_config=TrainConfig.from_properties(config),
                  attack_config=AttackConfig.from_properties(config),
                  synthetic_seed=synthetic_seed)
        logger.info(f"Experiment configuration read from {path}")
        return cfg


class RunReport:
    """
    Per-cell rows, phase timings and the config echo of one run
    """

    def __init__(self, config: ExperimentConfig, rows: list, timings: list, feature_counts: dict):
        self.config = config
        self.rows = sorted(rows, key=_row_key)
        self.timings = sorted(timings, key=_timing_key)
        self.feature_counts = feature_counts

    def failures(self) -> list:
        return [row for row in self.rows if row["status"] != "ok"]

    def cells(self, phase: Optional[str] = None) -> list:
        return [row for row in self.rows if phase is None or row["phase"] == phase]

    def aggregate(self) -> list:
        """
        Arithmetic means over repetitions of every (dataset, classifier, phase, scenario, lambda) group
        """
        groups = {}
        for row in self.rows:
            key = (row["dataset"], row["classifier"], row["phase"], row["scenario"], row["lambda"])
            groups.setdefault(key, []).append(row)
        summary = []
        for key in sorted(groups, key=lambda k: _row_key(dict(zip(("dataset", "classifier", "phase", "scenario",
                                                                     "lambda"), k), repetition=0))):
            rows = groups[key]
            ok = [row for row in rows if row["status"] == "ok"]
            entry = dict(zip(("dataset", "classifier", "phase", "scenario", "lambda"), key))
            entry["repetitions"] = len(ok)
            entry["failures"] = len(rows) - len(ok)
            for column in AVERAGED:
                values = [row[column] for row in ok if row.get(column) is not None]
                entry[column] = float(np.mean(values)) if values else None
            summary.append(entry)
        return summary

    def __str__(self):
        return f"RunReport(cells={len(self.rows)}, failures={len(self.failures())})"

    def __repr__(self):
        return self.__str__()


def _row_key(row: dict) -> tuple:
    scenario = row.get("scenario", NO_SCENARIO)
    lam = row.get("lambda")
    return (row["dataset"], row["classifier"], int(row.get("repetition", 0)), PHASES.index(row["phase"]),
            SCENARIO_ORDER.index(scenario) if scenario in SCENARIO_ORDER else -1,
            -1.0 if lam is None else float(lam))


def _timing_key(row: dict) -> tuple:
    lam = row.get("lambda")
    return (row["dataset"], row["classifier"], row["repetition"], row["scenario"],
            -1.0 if lam is None else float(lam), row["phase"])


class ResultCollector:
    """
    Thread-safe sink for cell rows and timings written by concurrent workers
    """

    def __init__(self):
        self._lock = threading.Lock()
        self.rows = []
        self.timings = []
        self.feature_counts = {}

    def add(self, row: dict):
        with self._lock:
            self.rows.append(row)

    def time(self, timing: dict):
        with self._lock:
            self.timings.append(timing)

    def features(self, dataset: str, count: int):
        with self._lock:
            self.feature_counts[dataset] = count


def _row(base: dict, phase: str, scenario: Optional[Scenario] = None, lam: Optional[float] = None,
         metrics=None, error: Optional[Exception] = None, **extra) -> dict:
    row = {column: None for column in CELL_COLUMNS}
    row.update(base)
    row["phase"] = phase
    row["scenario"] = scenario.value if scenario is not None else NO_SCENARIO
    row["lambda"] = lam
    row["status"] = "ok" if error is None else "failed"
    row["error"] = None if error is None else f"{type(error).__name__}: {error}"
    if metrics is not None:
        row.update(metrics.as_row())
        row.update({"tp": metrics.counts.tp, "tn": metrics.counts.tn, "fp": metrics.counts.fp,
                    "fn": metrics.counts.fn, "n_eval": metrics.counts.total})
    row.update(extra)
    return row


class _Timer:
    def __init__(self, collector: ResultCollector, base: dict, phase: str, scenario=None, lam=None):
        self.collector = collector
        self.timing = dict(base, phase=phase, scenario=scenario.value if scenario else NO_SCENARIO, **{"lambda": lam})

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        self.timing["seconds"] = max(0.0, time.perf_counter() - self.start)
        self.collector.time(self.timing)
        return False


def load_datasets(cfg: ExperimentConfig) -> dict:
    """
    The configured datasets by name, the synthetic one included when enabled
    """
    datasets = {}
    for name, (path, vocab_path) in sorted(cfg.datasets.items()):
        vocab = load_vocabulary(vocab_path) if vocab_path else None
        datasets[name] = load_dataset(path, vocab)
    if cfg.synthetic is not None:
        seed = cfg.synthetic_seed if cfg.synthetic_seed is not None else derive_seed(cfg.seed, SYNTHETIC_DATASET)
        datasets[SYNTHETIC_DATASET] = generate_synthetic(cfg.synthetic, seed)
    return datasets


def _split_for(cfg: ExperimentConfig, data: Dataset, repetition: int, rep_seed: int, folds: Optional[list]):
    if cfg.eval_mode == "cv10":
        train, test = folds[repetition]
        empty = data.subset(np.zeros(0, dtype=np.int64))
        return DatasetSplit(train, empty, test, rep_seed)
    return split_dataset(data, derive_seed(rep_seed, "split"))


def attack_evasion(advset, model) -> Optional[float]:
    """
    Share of the crafted samples the model assigns the target label, None for an empty set

    evasion_rate is measured against the model the samples were crafted on (the shared MLP for
    jsma), victim_evasion_rate against the classifier under test.
    """
    return evaluate_objective(advset, model) if len(advset) else None


def _run_block(cfg: ExperimentConfig, name: str, data: Dataset, kind: ModelKind, repetition: int,
               folds: Optional[list], collector: ResultCollector):
    """
    One (dataset, classifier, repetition) block: baseline, then every lambda x scenario cell
    """
    base = {"dataset": name, "classifier": kind.value, "repetition": repetition}
    rep_seed = derive_seed(cfg.seed, name, "repetition", repetition)
    try:
        split = _split_for(cfg, data, repetition, rep_seed, folds)
        if not set(split.train.ids).isdisjoint(split.test.ids):
            msg = f"Training and test samples overlap in {name} repetition {repetition}"
            logger.error(msg)
            raise RuntimeError(msg)
        top = select_top(rank_features(split.train, cfg.rank_trees, derive_seed(rep_seed, "rank")), cfg.top)
        collector.features(name, len(top.order))
        ranking = to_subspace(top)
        train, validation, test = (d.restrict(top.order) for d in (split.train, split.validation, split.test))
        with _Timer(collector, base, "train"):
            model = train_model(kind, train, cfg.train_config.replace(seed=derive_seed(rep_seed, "model", kind.value)))
        with _Timer(collector, base, "test"):
            collector.add(_row(base, "baseline", metrics=evaluate(model, test)))
        if cfg.validation and validation.n:
            collector.add(_row(base, "validation", metrics=evaluate(model, validation)))
    except Exception as e:
        logger.error(f"Block {base} failed: {e}")
        collector.add(_row(base, "baseline", error=e))
        for lam in cfg.lambdas:
            for scenario in cfg.scenarios:
                collector.add(_row(base, "attack", scenario, lam, error=e))
        return

    shared = {}

    def discriminator():
        if "discriminator" not in shared:
            shared["discriminator"] = train_logistic_regression(train, cfg.attack_config.train_config)
        return shared["discriminator"]

    def jsma_model():
        if kind == ModelKind.MLP:
            return model
        if "mlp" not in shared:
            shared["mlp"] = train_mlp(train, cfg.attack_config.train_config.replace(
                seed=derive_seed(rep_seed, "jsma")))
        return shared["mlp"]

    for lam in cfg.lambdas:
        gan = None
        for scenario in cfg.scenarios:
            try:
                attack_cfg = cfg.attack_config.replace(lambda_percent=lam,
                                                       seed=derive_seed(rep_seed, "attack", scenario.value, lam))
                if scenario == Scenario.JSMA:
                    ctx = AttackContext(train, test, jsma_model())
                else:
                    needs_discriminator = scenario in (Scenario.LR, Scenario.ACO)
                    ctx = AttackContext(train, test, model, discriminator=discriminator() if needs_discriminator
                                        else None)
                with _Timer(collector, base, "poison", scenario, lam):
                    advset = run_attack(scenario, ctx, attack_cfg, ranking)
                poisoned = poison_dataset(test, advset)
                collector.add(_row(base, "attack", scenario, lam, evaluate(model, poisoned),
                                   evasion_rate=attack_evasion(advset, ctx.model),
                                   victim_evasion_rate=attack_evasion(advset, model),
                                   mean_flips=advset.mean_flips()))
            except Exception as e:
                logger.error(f"Attack cell {base} {scenario.value} lambda={lam} failed: {e}")
                collector.add(_row(base, "attack", scenario, lam, error=e))
                continue

            if DefenseMethod.ADVERSARIAL_TRAINING in cfg.defenses:
                phase = DefenseMethod.ADVERSARIAL_TRAINING.value
                try:
                    with _Timer(collector, base, "defense", scenario, lam):
                        report = adversarial_training(train, advset, poisoned, model, cfg.train_config,
                                                      derive_seed(rep_seed, "defense", phase, scenario.value, lam))
                    collector.add(_row(base, phase, scenario, lam, report.post_metrics,
                                       held_out_accuracy=report.held_out_metrics.accuracy
                                       if report.held_out_metrics else None))
                except Exception as e:
                    logger.error(f"Defense cell {base} {phase} {scenario.value} lambda={lam} failed: {e}")
                    collector.add(_row(base, phase, scenario, lam, error=e))

            if DefenseMethod.GAN in cfg.defenses:
                phase = DefenseMethod.GAN.value
                try:
                    if gan is None:
                        with _Timer(collector, base, "defense", None, lam):
                            gan = gan_defense(train, ranking, lam, derive_seed(rep_seed, "defense", phase, lam),
                                              model=model, victim_kind=kind,
                                              cfg=cfg.train_config.replace(seed=derive_seed(rep_seed, phase)))
                    report, synthetic = gan
                    evaluation = poisoned.concat(synthetic.to_dataset(train.vocab, synthetic.held_out_ids))
                    collector.add(_row(base, phase, scenario, lam, evaluate(report.model_new, evaluation)))
                except Exception as e:
                    logger.error(f"Defense cell {base} {phase} {scenario.value} lambda={lam} failed: {e}")
                    collector.add(_row(base, phase, scenario, lam, error=e))


def run_experiment(cfg: ExperimentConfig, datasets: Optional[dict] = None) -> RunReport:
    """
    Run every (dataset, classifier, repetition) block, up to cfg.workers at a time

    Seeds are derived master -> repetition -> phase -> sample, so results do not depend on the
    worker count or on which other scenarios are configured.

    :param cfg: ExperimentConfig
    :param datasets: already loaded datasets by name, loaded from cfg when None
    :return: RunReport
    """
    datasets = datasets if datasets is not None else load_datasets(cfg)
    collector = ResultCollector()
    blocks = []
    for name, data in sorted(datasets.items()):
        folds = None
        if cfg.eval_mode == "cv10":
            folds = list(kfold_splits(data, 10, derive_seed(cfg.seed, name, "kfold")))
        for kind in cfg.classifiers:
            for repetition in range(cfg.effective_repetitions):
                blocks.append((name, data, kind, repetition, folds))
    logger.info(f"Running {len(blocks)} blocks with {cfg.workers} workers")
    with ThreadPoolExecutor(max_workers=cfg.workers) as executor:
        futures = [executor.submit(_run_block, cfg, name, data, kind, repetition, folds, collector)
                   for name, data, kind, repetition, folds in blocks]
        for future in tqdm(as_completed(futures), total=len(futures), desc="Experiment", disable=not cfg.progress):
            future.result()
    report = RunReport(cfg, collector.rows, collector.timings, collector.feature_counts)
    logger.info(f"Experiment finished: {len(report.rows)} cells, {len(report.failures())} failures")
    return report


def sweep_lambda(cfg: ExperimentConfig, datasets: Optional[dict] = None) -> RunReport:
    """
    Run the experiment once per lambda value and merge the runs

    Baseline rows do not depend on lambda and are kept once.
    """
    datasets = datasets if datasets is not None else load_datasets(cfg)
    rows = {}
    timings = []
    feature_counts = {}
    for lam in cfg.lambdas:
        report = run_experiment(cfg.replace(lambdas=[lam]), datasets)
        for row in report.rows:
            rows.setdefault(_row_key(row), row)
        timings.extend(report.timings)
        feature_counts.update(report.feature_counts)
    return RunReport(cfg, list(rows.values()), timings, feature_counts)


def _fmt(value, column: str = "") -> str:
    if value is None:
        return ""
    if column == "lambda":
        return f"{float(value):g}"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6f}"
    return str(value)


def _write_csv(path: Path, columns: list, rows: list):
    with open(path, newline="", mode="wt", encoding="utf-8") as csv_file:
        writer = csv.DictWriter(csv_file, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({column: _fmt(row.get(column), column) for column in columns})


def emit_report(r: RunReport, directory) -> list:
    """
    Write the report files

    cells.csv, summary.csv, one table_fpr_<dataset>_<classifier>.csv per pair (rows are scenarios,
    columns feature counts), plot_<dataset>_<classifier>_<metric>.csv data series, report.json and
    timings.csv. Everything except timings.csv is byte-identical for identical runs.

    :param r: RunReport
    :param directory: output directory, created when missing
    :return: list of written paths
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []

    _write_csv(directory / "cells.csv", CELL_COLUMNS, r.rows)
    written.append(directory / "cells.csv")
    summary = r.aggregate()
    _write_csv(directory / "summary.csv", SUMMARY_COLUMNS, summary)
    written.append(directory / "summary.csv")

    attack = [row for row in summary if row["phase"] == "attack"]
    pairs = sorted({(row["dataset"], row["classifier"]) for row in attack})
    lambdas = sorted({row["lambda"] for row in attack})
    for dataset, classifier in pairs:
        cells = {(row["scenario"], row["lambda"]): row for row in attack
                 if row["dataset"] == dataset and row["classifier"] == classifier}
        scenarios = [s for s in SCENARIO_ORDER if any(key[0] == s for key in cells)]
        subspace = r.feature_counts.get(dataset, 0)
        counts = [str(percent_count(lam, subspace)) for lam in lambdas]
        table = []
        for scenario in scenarios:
            entry = {"scenario": scenario}
            for lam, count in zip(lambdas, counts):
                cell = cells.get((scenario, lam))
                entry[count] = cell["fpr_paper"] if cell else None
            table.append(entry)
        path = directory / f"table_fpr_{sanitize(dataset)}_{sanitize(classifier)}.csv"
        _write_csv(path, ["scenario"] + list(dict.fromkeys(counts)), table)
        written.append(path)
        for metric in PLOT_METRICS:
            series = []
            for lam in lambdas:
                point = {"lambda": lam}
                for scenario in scenarios:
                    cell = cells.get((scenario, lam))
                    point[scenario] = cell[metric] if cell else None
                series.append(point)
            path = directory / f"plot_{sanitize(dataset)}_{sanitize(classifier)}_{metric}.csv"
            _write_csv(path, ["lambda"] + scenarios, series)
            written.append(path)

    document = {
        "config": r.config.as_dict(),
        "feature_counts": r.feature_counts,
        "cells": len(r.rows),
        "failures": [{k: row[k] for k in ("dataset", "classifier", "repetition", "phase", "scenario", "lambda",
                                          "error")} for row in r.failures()],
        "summary": summary,
        "files": sorted(p.name for p in written),
    }
    write_json(document, directory / "report.json")
    written.append(directory / "report.json")

    _write_csv(directory / "timings.csv", TIMING_COLUMNS, r.timings)
    written.append(directory / "timings.csv")
    logger.info(f"Wrote {len(written)} report files to {directory}")
    return written


class ExperimentAPI:
    """
    Entry point for configured sweeps

    Settings come from the method arguments, the EVADE_* environment variables or the
    evade.properties file, in that order.
    """

    def __init__(self, config_path: str = DEFAULT_CONFIG_PATH, workers: Optional[int] = None,
                 seed: Optional[int] = None, output: Optional[str] = None, progress: Optional[bool] = None):
        self.config = ExperimentConfig.from_properties(config_path, workers, seed, output, progress)

    def run(self) -> RunReport:
        return run_experiment(self.config)

    def sweep(self) -> RunReport:
        return sweep_lambda(self.config)

    def emit(self, report: RunReport, directory: Optional[str] = None) -> list:
        return emit_report(report, directory or self.config.output)

    def __str__(self):
        return f"""
            Datasets:       {", ".join(sorted(self.config.datasets)) or "-"}
            Synthetic:      {self.config.synthetic is not None}
            Classifiers:    {", ".join(c.value for c in self.config.classifiers)}
            Scenarios:      {", ".join(s.value for s in self.config.scenarios)}
            Repetitions:    {self.config.effective_repetitions}
            Workers:        {self.config.workers}
            """

    def __repr__(self):
        return self.__str__()
