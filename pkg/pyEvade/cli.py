"""
pyEvade command line definition

The `evade` command: ingest, synth, rank, train, attack, defend and experiment subcommands
over the library modules.

author:     pyEvade developers
licence:    Apache License 2.0

"""
import argparse
import sys
from typing import Optional

from pyEvade.common import *
from pyEvade.datasetAPI import Dataset, SyntheticSpec, load_dataset, load_vocabulary, save_dataset, \
    save_vocabulary, generate_synthetic
from pyEvade.rankingAPI import FeatureRanking, rank_features, select_top, to_subspace, save_ranking, \
    load_ranking, DEFAULT_TOP
from pyEvade.modelAPI import ClassifierHandle, TrainConfig, train_model, save_model, load_model
from pyEvade.attackAPI import AttackConfig, AttackContext, run_attack, save_adversarial, load_adversarial, \
    poison_dataset
from pyEvade.defenseAPI import adversarial_training, gan_defense
from pyEvade.metricsAPI import evaluate
from pyEvade.experimentAPI import ExperimentConfig, run_experiment, sweep_lambda, emit_report

logger = logging.getLogger(__name__)


def _configure_logging(verbosity: int):
    level = logging.WARNING
    if verbosity == 1:
        level = logging.INFO
    elif verbosity >= 2:
        level = logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _load(args, path: str) -> Dataset:
    vocab = load_vocabulary(args.vocab) if args.vocab else None
    return load_dataset(path, vocab)


def _working_space(data: Dataset, model: ClassifierHandle, ranking: FeatureRanking) -> tuple:
    """
    Match the data and ranking to the columns the model was trained on

    A model trained on the full vocabulary keeps the ranking as is. A model trained on the ranked
    subspace gets the data restricted to ranking.order and the ranking re-expressed in subspace columns.
    """
    if model.m == data.m:
        return data, ranking
    if model.m == len(ranking.order):
        return data.restrict(ranking.order), to_subspace(ranking)
    raise DimensionMismatchException(model.m, data.m, "evade")


def _ingest(args) -> int:
    d = _load(args, args.input)
    save_dataset(d, args.out)
    if args.vocab_out:
        save_vocabulary(d.vocab, args.vocab_out)
    print(d.report)
    return 0


def _synth(args) -> int:
    spec = SyntheticSpec(n=args.n, m=args.m, n_signal=args.signal, flip_noise=args.noise,
                         malware_fraction=args.malware_fraction)
    d = generate_synthetic(spec, args.seed)
    save_dataset(d, args.out)
    if args.vocab_out:
        save_vocabulary(d.vocab, args.vocab_out)
    print(d)
    return 0


def _rank(args) -> int:
    train = _load(args, args.train)
    ranking = select_top(rank_features(train, n_trees=args.trees, seed=args.seed), args.top)
    save_ranking(ranking, args.out)
    print(ranking)
    return 0


def _train(args) -> int:
    train = _load(args, args.train)
    if args.ranking:
        train = train.restrict(load_ranking(args.ranking).order)
    cfg = TrainConfig.from_properties(read_properties(args.config), seed=args.seed)
    model = train_model(args.algo, train, cfg)
    save_model(model, args.out)
    print(evaluate(model, train))
    return 0


def _attack(args) -> int:
    model = load_model(args.model)
    ranking = load_ranking(args.ranking)
    targets, subspace = _working_space(_load(args, args.data), model, ranking)
    train = targets
    if args.train:
        train, _ = _working_space(_load(args, args.train), model, ranking)
    config = read_properties(args.config)
    cfg = AttackConfig.from_properties(config, lambda_percent=args.lambda_percent, seed=args.seed,
                                       train_config=TrainConfig.from_properties(config, seed=args.seed))
    if args.k is not None:
        cfg = cfg.replace(k=args.k)
    if args.fraction is not None:
        cfg = cfg.replace(malware_fraction=args.fraction)
    advset = run_attack(args.scenario, AttackContext(train, targets, model), cfg, subspace)
    save_adversarial(advset, args.out)
    print(advset)
    return 0


def _defend(args) -> int:
    model = load_model(args.model)
    ranking = load_ranking(args.ranking) if args.ranking else None
    train = _load(args, args.train)
    source = _load(args, args.data) if args.data else train
    if ranking is not None:
        train, subspace = _working_space(train, model, ranking)
        source, _ = _working_space(source, model, ranking)
    elif model.m != train.m:
        raise DimensionMismatchException(model.m, train.m, "evade defend")
    evaluation = None
    advset = None
    if args.adv:
        advset = load_adversarial(args.adv, source)
        evaluation = poison_dataset(source, advset)
    cfg = TrainConfig.from_properties(read_properties(args.config), seed=args.seed)
    if DefenseMethod(args.method) == DefenseMethod.ADVERSARIAL_TRAINING:
        if advset is None:
            msg = "adversarial-training needs --adv"
            logger.error(msg)
            raise RuntimeError(msg)
        report = adversarial_training(train, advset, evaluation, model, cfg, args.seed)
    else:
        if ranking is None:
            msg = "gan needs --ranking"
            logger.error(msg)
            raise RuntimeError(msg)
        report, _ = gan_defense(train, subspace, args.lambda_percent, args.seed, evaluation, model,
                                victim_kind=model.kind, cfg=cfg)
    save_model(report.model_new, args.out)
    if args.report:
        write_json(report.as_dict(), args.report)
    print(report)
    return 0


def _experiment(args) -> int:
    cfg = ExperimentConfig.from_properties(args.config, workers=args.workers, seed=args.seed, output=args.output,
                                           progress=False if args.no_progress else None)
    report = sweep_lambda(cfg) if args.sweep else run_experiment(cfg)
    written = emit_report(report, cfg.output)
    print(f"{report}, {len(written)} files written to {cfg.output}")
    return 0 if not report.failures() else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="evade",
                                     description="Adversarial evasion attacks and defenses for malware classifiers")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG logging")
    commands = parser.add_subparsers(dest="command", required=True)
    vocab = argparse.ArgumentParser(add_help=False)
    vocab.add_argument("--vocab", help="Vocabulary file, one feature name per line, shared by every dataset read")

    ingest = commands.add_parser("ingest", parents=[vocab], help="Read a JSONL feature dataset and write it normalised")
    ingest.add_argument("--input", required=True, help="JSONL records {id, label, features}")
    ingest.add_argument("--vocab-out", help="Write the vocabulary used here")
    ingest.add_argument("--out", required=True)
    ingest.set_defaults(func=_ingest)

    synth = commands.add_parser("synth", help="Generate a synthetic dataset")
    synth.add_argument("--n", type=int, default=2000)
    synth.add_argument("--m", type=int, default=300)
    synth.add_argument("--signal", type=int, default=40)
    synth.add_argument("--noise", type=float, default=0.05)
    synth.add_argument("--malware-fraction", type=float, default=0.5)
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--vocab-out")
    synth.add_argument("--out", required=True)
    synth.set_defaults(func=_synth)

    rank = commands.add_parser("rank", parents=[vocab], help="Rank features and keep the top ones")
    rank.add_argument("--train", required=True)
    rank.add_argument("--top", type=int, default=DEFAULT_TOP)
    rank.add_argument("--trees", type=int, default=100)
    rank.add_argument("--seed", type=int, default=0)
    rank.add_argument("--out", required=True)
    rank.set_defaults(func=_rank)

    train = commands.add_parser("train", parents=[vocab], help="Train a classifier")
    train.add_argument("--algo", required=True, choices=[k.value for k in ModelKind])
    train.add_argument("--train", required=True)
    train.add_argument("--ranking", help="Train on the ranked subspace only")
    train.add_argument("--config", default=DEFAULT_CONFIG_PATH, help="Properties file with a [models] section")
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--out", required=True)
    train.set_defaults(func=_train)

    attack = commands.add_parser("attack", parents=[vocab], help="Craft adversarial samples")
    attack.add_argument("--scenario", required=True, choices=[s.value for s in Scenario])
    attack.add_argument("--model", required=True)
    attack.add_argument("--data", required=True, help="Samples under attack")
    attack.add_argument("--train", help="Attacker's training data, defaults to --data")
    attack.add_argument("--ranking", required=True)
    attack.add_argument("--lambda", dest="lambda_percent", type=float, default=10.0)
    attack.add_argument("--k", type=int)
    attack.add_argument("--fraction", type=float, help="Share of malware attacked by knn and lr")
    attack.add_argument("--config", default=DEFAULT_CONFIG_PATH, help="Properties file with an [attacks] section")
    attack.add_argument("--seed", type=int, default=0)
    attack.add_argument("--out", required=True)
    attack.set_defaults(func=_attack)

    defend = commands.add_parser("defend", parents=[vocab], help="Retrain a model against adversarial samples")
    defend.add_argument("--method", required=True, choices=[d.value for d in DefenseMethod])
    defend.add_argument("--model", required=True)
    defend.add_argument("--train", required=True)
    defend.add_argument("--data", help="Dataset the adversarial samples were crafted from, defaults to --train")
    defend.add_argument("--adv", help="Adversarial JSONL file")
    defend.add_argument("--ranking")
    defend.add_argument("--lambda", dest="lambda_percent", type=float, default=10.0)
    defend.add_argument("--config", default=DEFAULT_CONFIG_PATH)
    defend.add_argument("--seed", type=int, default=0)
    defend.add_argument("--out", required=True)
    defend.add_argument("--report")
    defend.set_defaults(func=_defend)

    experiment = commands.add_parser("experiment", help="Run a configured experiment sweep")
    experiment.add_argument("--config", default=DEFAULT_CONFIG_PATH)
    experiment.add_argument("--workers", type=int)
    experiment.add_argument("--seed", type=int)
    experiment.add_argument("--output")
    experiment.add_argument("--sweep", action="store_true", help="Run once per lambda and merge the runs")
    experiment.add_argument("--no-progress", action="store_true")
    experiment.set_defaults(func=_experiment)
    return parser


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    try:
        return args.func(args)
    except (DatasetFormatException, DimensionMismatchException, DivergenceException, DegenerateModelException,
            RuntimeError, ValueError, OSError) as e:
        print(f"evade: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
