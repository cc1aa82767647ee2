"""
pyEvade defense module definition

Harden a compromised classifier by adversarial retraining, or by retraining on synthetic
malware produced by a generator/discriminator loop over feature flips.

author:     pyEvade developers
licence:    Apache License 2.0

"""
from typing import Optional

from pyEvade.common import *
from pyEvade.datasetAPI import Dataset, partition_by_class
from pyEvade.modelAPI import ClassifierHandle, TrainConfig, train_model, train_random_forest, \
    train_logistic_regression
from pyEvade.rankingAPI import FeatureRanking, benign_prefix
from pyEvade.attackAPI import AdversarialSet, AdversarialSample, nearest_to_boundary, walk_shared
from pyEvade.metricsAPI import MetricsReport, evaluate

logger = logging.getLogger(__name__)

SYNTHETIC_SUFFIX = "#gan"


class SyntheticSet:
    """
    Generator output: malware variants the discriminator took for benign, relabelled malware

    Each sample keeps its provenance, the originating malware id and the flips applied.
    """

    def __init__(self, samples: list, train_ids: list, held_out_ids: list):
        self.samples = sorted(samples, key=lambda s: s.original_id)
        self.train_ids = list(train_ids)
        self.held_out_ids = list(held_out_ids)

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @staticmethod
    def sample_id(sample: AdversarialSample) -> str:
        return f"{sample.original_id}{SYNTHETIC_SUFFIX}"

    def to_dataset(self, vocab, ids: Optional[list] = None) -> Dataset:
        """
        The synthetic samples labelled malware, optionally restricted to the given synthetic ids
        """
        wanted = None if ids is None else set(ids)
        chosen = [s for s in self.samples if wanted is None or self.sample_id(s) in wanted]
        if not chosen:
            return Dataset(vocab, np.zeros((0, vocab.m), dtype=np.uint8), [], [])
        return Dataset(vocab, np.vstack([s.x_star for s in chosen]), [MALWARE] * len(chosen),
                       [self.sample_id(s) for s in chosen])

    def __str__(self):
        return f"SyntheticSet(samples={len(self.samples)}, train={len(self.train_ids)}, " \
               f"held_out={len(self.held_out_ids)})"

    def __repr__(self):
        return self.__str__()


class DefenseReport:
    """
    Result of one defense, pre and post metrics are computed on the same evaluation set

    held_out_metrics score the new model on the evaluation samples it was not trained on.
    """

    def __init__(self, method: DefenseMethod, model_new: ClassifierHandle, pre_metrics: Optional[MetricsReport],
                 post_metrics: Optional[MetricsReport], synthetic_count: int, training_ids: list,
                 held_out_ids: Optional[list] = None, held_out_metrics: Optional[MetricsReport] = None):
        self.method = method
        self.model_new = model_new
        self.pre_metrics = pre_metrics
        self.post_metrics = post_metrics
        self.synthetic_count = synthetic_count
        self.training_ids = training_ids
        self.held_out_ids = held_out_ids or []
        self.held_out_metrics = held_out_metrics

    def as_dict(self) -> dict:
        return {
            "method": self.method.value,
            "model": self.model_new.kind.value,
            "synthetic_count": self.synthetic_count,
            "training_samples": len(self.training_ids),
            "held_out_ids": self.held_out_ids,
            "pre_metrics": self.pre_metrics.as_dict() if self.pre_metrics else None,
            "post_metrics": self.post_metrics.as_dict() if self.post_metrics else None,
            "held_out_metrics": self.held_out_metrics.as_dict() if self.held_out_metrics else None,
        }

    def __str__(self):
        pre = self.pre_metrics.accuracy if self.pre_metrics else None
        post = self.post_metrics.accuracy if self.post_metrics else None
        return f"""
            Defense:            {self.method.value}
            Model:              {self.model_new.kind.value}
            Synthetic Samples:  {self.synthetic_count}
            Accuracy Before:    {pre}
            Accuracy After:     {post}
            """

    def __repr__(self):
        return self.__str__()


def _draw(d: Dataset, fraction: float, rng: np.random.Generator) -> Dataset:
    count = int(math.floor(fraction * d.n + 0.5))
    return d.subset(np.sort(rng.choice(d.n, size=count, replace=False)))


def compare(model: Optional[ClassifierHandle], model_new: ClassifierHandle, evaluation: Optional[Dataset]) -> tuple:
    """
    (pre, post) metrics of the old and the retrained model on one evaluation set
    """
    if evaluation is None or evaluation.n == 0:
        return None, None
    pre = evaluate(model, evaluation) if model is not None else None
    return pre, evaluate(model_new, evaluation)


def unseen_rows(evaluation: Dataset, training_ids) -> np.ndarray:
    """
    Row indices of the evaluation samples whose id is not among training_ids
    """
    seen = set(training_ids)
    return np.array([i for i, sid in enumerate(evaluation.ids) if sid not in seen], dtype=np.int64)


def adversarial_training(train: Dataset, advset: AdversarialSet, evaluation: Optional[Dataset] = None,
                         model: Optional[ClassifierHandle] = None, cfg: Optional[TrainConfig] = None,
                         seed: int = 0, fraction: float = 0.6) -> DefenseReport:
    """
    Retrain a random forest on 60% of the original data plus 60% of the adversarial samples

    The two draws are independent and seeded. Adversarial samples carry malware labels.

    :param train: original training Dataset
    :param advset: crafted samples
    :param evaluation: Dataset the pre and post metrics are computed on, usually the poisoned test set
        (held_out_metrics leave out the crafted samples drawn into training)
    :param model: the compromised model, for the pre metrics
    :param cfg: TrainConfig of the new forest
    :param seed: draw seed
    :param fraction: share of each source drawn
    :return: DefenseReport
    """
    cfg = cfg or TrainConfig(seed=seed)
    adversarial = advset.to_dataset(train.vocab)
    original = _draw(train, fraction, rng_for(seed, "adversarial-training", "original"))
    crafted = _draw(adversarial, fraction, rng_for(seed, "adversarial-training", "adversarial"))
    union = original.concat(crafted)
    if union.n == 0:
        msg = "Adversarial training has no samples to learn from"
        logger.error(msg)
        raise ValueError(msg)
    model_new = train_random_forest(union, cfg.replace(seed=derive_seed(seed, "adversarial-training", "model")))
    model_new.feature_names = list(train.vocab.names)
    pre, post = compare(model, model_new, evaluation)
    held_out = None
    if evaluation is not None:
        unseen = unseen_rows(evaluation, crafted.ids)
        held_out = evaluate(model_new, evaluation.subset(unseen)) if len(unseen) else None
    logger.info(f"Adversarial training on {original.n} original and {crafted.n} adversarial samples")
    return DefenseReport(DefenseMethod.ADVERSARIAL_TRAINING, model_new, pre, post, crafted.n, union.ids,
                         held_out_metrics=held_out)


def generate_synthetic_set(train: Dataset, ranking: FeatureRanking, lambda_percent: float, seed: int = 0,
                           cfg: Optional[TrainConfig] = None, malware_fraction: float = 0.1,
                           holdout: float = 0.2) -> SyntheticSet:
    """
    Generator/discriminator loop

    A logistic regression discriminator is fitted on the training data. The malware samples nearest
    its boundary are pushed one ranked benign feature at a time, highest rank first, until the
    discriminator calls them benign; those that get there form the synthetic set, split into a
    training part and a held-out part.

    :param train: Dataset
    :param ranking: FeatureRanking of the working subspace
    :param lambda_percent: share of ranked benign features the generator may flip
    :param seed: seed of the split
    :param cfg: TrainConfig of the discriminator
    :param malware_fraction: share of training malware pushed by the generator
    :param holdout: share of synthetic samples held out for evaluation
    :return: SyntheticSet
    """
    cfg = cfg or TrainConfig(seed=seed)
    discriminator = train_logistic_regression(train, cfg)
    if discriminator.norm == 0.0:
        raise DegenerateModelException(discriminator.kind.value, "weight vector is zero")
    malware = partition_by_class(train).malware
    if malware.n == 0:
        msg = "No training malware to build the less likely set from"
        logger.error(msg)
        raise ValueError(msg)
    less_likely = malware.subset(nearest_to_boundary(discriminator, malware, malware_fraction))
    candidates = benign_prefix(ranking, lambda_percent)
    pushed = walk_shared(list(less_likely), candidates, discriminator, BENIGN)
    successes = [s for s in pushed if s.evaded]

    ids = [SyntheticSet.sample_id(s) for s in sorted(successes, key=lambda s: s.original_id)]
    order = rng_for(seed, "gan", "split").permutation(len(ids))
    n_train = int(math.floor((1.0 - holdout) * len(ids) + 0.5))
    train_ids = sorted(ids[i] for i in order[:n_train])
    held_out_ids = sorted(ids[i] for i in order[n_train:])
    logger.info(f"Generator produced {len(successes)} synthetic samples from {less_likely.n} less likely samples")
    return SyntheticSet(successes, train_ids, held_out_ids)


def gan_defense(train: Dataset, ranking: FeatureRanking, lambda_percent: float, seed: int = 0,
                evaluation: Optional[Dataset] = None, model: Optional[ClassifierHandle] = None,
                victim_kind=ModelKind.FOREST, cfg: Optional[TrainConfig] = None,
                malware_fraction: float = 0.1) -> tuple:
    """
    Retrain the victim kind on the training data plus 80% of the synthetic set

    Pre and post metrics are computed on the evaluation set extended by the held-out 20%.

    :return: (DefenseReport, SyntheticSet)
    """
    cfg = cfg or TrainConfig(seed=seed)
    synthetic = generate_synthetic_set(train, ranking, lambda_percent, seed, cfg, malware_fraction)
    augmented = train.concat(synthetic.to_dataset(train.vocab, synthetic.train_ids))
    model_new = train_model(victim_kind, augmented, cfg.replace(seed=derive_seed(seed, "gan", "model")))
    if evaluation is not None:
        evaluation = evaluation.concat(synthetic.to_dataset(train.vocab, synthetic.held_out_ids))
    pre, post = compare(model, model_new, evaluation)
    report = DefenseReport(DefenseMethod.GAN, model_new, pre, post, len(synthetic.train_ids), augmented.ids,
                           synthetic.held_out_ids)
    return report, synthetic
