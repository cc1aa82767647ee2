"""
pyEvade attack module definition

Craft adversarial malware samples using only 0 -> 1 feature additions: the trivial, distribution,
nearest-neighbour, discriminator (LR) and ant-colony attacks plus the Jacobian saliency baseline.

author:     pyEvade developers
licence:    Apache License 2.0

"""
import json
from typing import Optional

from pyEvade.common import *
from pyEvade.datasetAPI import Dataset, Sample, partition_by_class
from pyEvade.modelAPI import ClassifierHandle, LinearDiscriminator, MlpModel, TrainConfig, \
    train_logistic_regression, mlp_input_gradient, softmax, knn_rows
from pyEvade.rankingAPI import FeatureRanking, LambdaSet, lambda_features

logger = logging.getLogger(__name__)


class AcoParams:
    """
    Ant colony search settings

    threshold=None uses the attacked sample's own boundary distance. The flip-set cardinality grows
    after `patience` iterations without an evasive candidate, or at once when no candidate is accepted.
    """

    def __init__(self, max_iter: int = 1000, evaporation: float = 0.1, deposit: float = 0.99, n_ants: int = 20,
                 max_variables: int = 300, threshold: Optional[float] = None, patience: int = 5):
        self.max_iter = int(max_iter)
        self.evaporation = float(evaporation)
        self.deposit = float(deposit)
        self.n_ants = int(n_ants)
        self.max_variables = int(max_variables)
        self.threshold = None if threshold is None else float(threshold)
        self.patience = int(patience)
        if not 0.0 < self.evaporation < 1.0:
            msg = f"ACO evaporation must lie in (0, 1), got {self.evaporation}"
            logger.error(msg)
            raise ValueError(msg)
        if self.threshold is not None and self.threshold < 0:
            msg = "ACO threshold must be nonnegative"
            logger.error(msg)
            raise ValueError(msg)

    def as_dict(self) -> dict:
        return {"max_iter": self.max_iter, "evaporation": self.evaporation, "deposit": self.deposit,
                "n_ants": self.n_ants, "max_variables": self.max_variables, "threshold": self.threshold,
                "patience": self.patience}


class AttackConfig:
    """
    Settings shared by every scenario

    train_config is used for the attacker's own models: the logistic regression discriminator and
    the network crafted against by JSMA when the victim is not one.
    """

    def __init__(self, lambda_percent: float = 10.0, k: int = 10, malware_fraction: float = 0.1,
                 aco: Optional[AcoParams] = None, jsma_max_mods: int = 20, seed: int = 0,
                 train_config: Optional[TrainConfig] = None):
        self.lambda_percent = float(lambda_percent)
        self.k = int(k)
        self.malware_fraction = float(malware_fraction)
        self.aco = aco or AcoParams()
        self.jsma_max_mods = int(jsma_max_mods)
        self.seed = int(seed)
        self.train_config = train_config or TrainConfig(seed=seed)
        if not 0.0 < self.malware_fraction <= 1.0:
            msg = f"malware_fraction must lie in (0, 1], got {self.malware_fraction}"
            logger.error(msg)
            raise ValueError(msg)

    def replace(self, **kwargs) -> 'AttackConfig':
        values = {"lambda_percent": self.lambda_percent, "k": self.k, "malware_fraction": self.malware_fraction,
                  "aco": self.aco, "jsma_max_mods": self.jsma_max_mods, "seed": self.seed,
                  "train_config": self.train_config}
        values.update(kwargs)
        return AttackConfig(**values)

    def as_dict(self) -> dict:
        return {"lambda_percent": self.lambda_percent, "k": self.k, "malware_fraction": self.malware_fraction,
                "aco": self.aco.as_dict(), "jsma_max_mods": self.jsma_max_mods, "seed": self.seed}

    @classmethod
    def from_properties(cls, config, section: str = "attacks", **overrides) -> 'AttackConfig':
        values = {}
        aco = {}
        if config is not None and config.has_section(section):
            items = config[section]
            for key, kind in (("lambda_percent", float), ("k", int), ("malware_fraction", float),
                              ("jsma_max_mods", int)):
                if key in items:
                    values[key] = kind(items[key])
            for key, kind in (("max_iter", int), ("evaporation", float), ("deposit", float), ("n_ants", int),
                              ("max_variables", int), ("threshold", float), ("patience", int)):
                if f"aco_{key}" in items:
                    aco[key] = kind(items[f"aco_{key}"])
        values["aco"] = AcoParams(**aco)
        values.update(overrides)
        return cls(**values)


class AttackContext:
    """
    White-box knowledge of the attacker: the training data, the feature space and the victim model

    targets holds the samples under attack (the test split); discriminator may be supplied to share
    one logistic regression between the LR and ACO scenarios.
    """

    def __init__(self, train: Dataset, targets: Dataset, model: ClassifierHandle, target_label: int = BENIGN,
                 discriminator: Optional[LinearDiscriminator] = None):
        if train is None or targets is None or model is None:
            msg = "An attack context needs the training data, the targets and the victim model"
            logger.error(msg)
            raise ValueError(msg)
        if train.m != model.m or targets.m != model.m:
            raise DimensionMismatchException(model.m, targets.m, "AttackContext")
        self.train = train
        self.targets = targets
        self.model = model
        self.features = train.vocab
        self.target_label = target_label
        self.discriminator = discriminator

    def target_malware(self) -> Dataset:
        return partition_by_class(self.targets).malware


class AdversarialSample:
    """
    One crafted sample, delta lists the flipped features in flip order
    """

    def __init__(self, original_id: str, x_star: np.ndarray, y_star: int, delta: list, evaded: bool,
                 variant: int = 0):
        self.original_id = original_id
        self.x_star = x_star
        self.y_star = y_star
        self.delta = [int(j) for j in delta]
        self.evaded = bool(evaded)
        self.variant = int(variant)

    @property
    def id(self) -> str:
        return f"{self.original_id}#{self.variant}"

    def __str__(self):
        return f"""
            Original:   {self.original_id}
            Variant:    {self.variant}
            Flipped:    {self.delta}
            Evaded:     {self.evaded}
            """

    def __repr__(self):
        return self.__str__()


class AdversarialSet:
    """
    Crafted samples of one scenario in canonical (original_id, variant) order
    """

    def __init__(self, samples: list, scenario: Scenario, config: Optional[dict] = None,
                 lambda_set: Optional[LambdaSet] = None):
        self.samples = sorted(samples, key=lambda s: (s.original_id, s.variant))
        self.scenario = Scenario(scenario)
        self.config = config or {}
        self.lambda_set = lambda_set

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def evasion_rate(self) -> Optional[float]:
        return evasion_rate(self)

    def mean_flips(self) -> Optional[float]:
        if not self.samples:
            return None
        return float(np.mean([len(s.delta) for s in self.samples]))

    def to_dataset(self, vocab) -> Dataset:
        """
        The crafted samples with corrected malware labels, ids are <original_id>#<variant>
        """
        if not self.samples:
            return Dataset(vocab, np.zeros((0, vocab.m), dtype=np.uint8), [], [])
        X = np.vstack([s.x_star for s in self.samples])
        return Dataset(vocab, X, [MALWARE] * len(self.samples), [s.id for s in self.samples])

    def __str__(self):
        return f"AdversarialSet(scenario={self.scenario.value}, samples={len(self.samples)}, " \
               f"evasion_rate={self.evasion_rate()})"

    def __repr__(self):
        return self.__str__()


def _zero_candidates(x, candidates) -> list:
    seen = set()
    zero = []
    for j in candidates:
        j = int(j)
        if j not in seen and x[j] == 0:
            zero.append(j)
        seen.add(j)
    return zero


def walk_candidates(samples: list, candidate_lists: list, model: ClassifierHandle, y_star: int) -> list:
    """
    flip_until_evasion for many samples with one batched prediction

    Row i of a sample's prefix block holds the sample with its first i zero candidates flipped,
    so the first evading row is exactly where the sequential walk would stop.
    """
    blocks = []
    flips = []
    for sample, candidates in zip(samples, candidate_lists):
        zero = _zero_candidates(sample.x, candidates)
        block = np.repeat(sample.x.reshape(1, -1), len(zero) + 1, axis=0)
        if zero:
            block[:, zero] = np.tri(len(zero) + 1, len(zero), -1, dtype=np.uint8)
        blocks.append(block)
        flips.append(zero)
    if not blocks:
        return []
    predictions = model.predict_many(np.vstack(blocks))
    results = []
    offset = 0
    for sample, block, zero in zip(samples, blocks, flips):
        hits = np.flatnonzero(predictions[offset:offset + len(block)] == y_star)
        offset += len(block)
        stop = int(hits[0]) if len(hits) else len(zero)
        results.append(AdversarialSample(sample.id, block[stop].copy(), y_star, zero[:stop], len(hits) > 0))
    return results


def walk_shared(samples: list, candidates, model: ClassifierHandle, y_star: int) -> list:
    """
    walk_candidates for one candidate list shared by every sample

    Prefixes are checked in blocks of doubling width, 1, 2, 4, ... candidates, and each block is
    predicted only for the samples that have not reached y_star yet. A prefix whose last candidate
    was already set repeats the previous row, so the first hit is where the sequential walk stops.
    """
    if not samples:
        return []
    candidates = np.asarray(candidates, dtype=np.int64).reshape(-1)
    original = np.vstack([s.x for s in samples])
    X = original.copy()
    n, m = X.shape
    applied = np.zeros(n, dtype=np.int64)
    evaded = model.predict_many(X) == y_star
    active = np.flatnonzero(~evaded)
    start, width = 0, 1
    while len(active) and start < len(candidates):
        block = candidates[start:start + width]
        rows = np.repeat(X[active][:, None, :], len(block), axis=1)
        for c, j in enumerate(block):
            rows[:, c:, j] = 1
        hits = (model.predict_many(rows.reshape(-1, m)) == y_star).reshape(len(active), len(block))
        found = hits.any(axis=1)
        last = np.where(found, hits.argmax(axis=1), len(block) - 1)
        X[active] = rows[np.arange(len(active)), last]
        applied[active] = start + last + 1
        evaded[active[found]] = True
        active = active[~found]
        start += len(block)
        width *= 2
    results = []
    for i, sample in enumerate(samples):
        delta = [int(j) for j in candidates[:applied[i]] if original[i, j] == 0]
        results.append(AdversarialSample(sample.id, X[i].copy(), y_star, delta, bool(evaded[i])))
    return results


def flip_until_evasion(x: Sample, candidates, model: ClassifierHandle, y_star: int = BENIGN) -> AdversarialSample:
    """
    Flip candidate features from 0 to 1 in order until the model predicts y_star

    A sample already predicted y_star is returned unchanged. Candidates already set are skipped.

    :param x: the malware Sample
    :param candidates: ordered feature indices
    :param model: victim ClassifierHandle
    :param y_star: target label
    :return: AdversarialSample
    """
    if len(x.x) != model.m:
        raise DimensionMismatchException(model.m, len(x.x), "flip_until_evasion")
    return walk_candidates([x], [list(candidates)], model, y_star)[0]


def _lambda_seed(cfg: AttackConfig, scenario: Scenario) -> int:
    return derive_seed(cfg.seed, "attack", scenario.value)


def _subspace(ctx: AttackContext, ranking: Optional[FeatureRanking]) -> FeatureRanking:
    if ranking is not None:
        return ranking
    bias = np.zeros(ctx.model.m)
    return FeatureRanking(np.arange(ctx.model.m), np.full(ctx.model.m, 1.0 / ctx.model.m), bias)


def _flip_all(ctx: AttackContext, cfg: AttackConfig, targets: Dataset, lambda_set: LambdaSet,
              scenario: Scenario) -> AdversarialSet:
    samples = list(targets)
    crafted = walk_shared(samples, lambda_set.indices, ctx.model, ctx.target_label)
    advset = AdversarialSet(crafted, scenario, cfg.as_dict(), lambda_set)
    logger.info(f"{scenario.value} attack with {len(lambda_set)} features: "
                f"{sum(s.evaded for s in crafted)} of {len(crafted)} samples evaded")
    return advset


def _require_malware(targets: Dataset, scenario: Scenario):
    if targets.n == 0:
        msg = f"The {scenario.value} attack found no malware samples to craft"
        logger.error(msg)
        raise ValueError(msg)


def attack_trivial(ctx: AttackContext, cfg: AttackConfig, ranking: Optional[FeatureRanking] = None) -> AdversarialSet:
    """
    Flip a uniformly random lambda set on every target malware sample
    """
    malware = ctx.target_malware()
    _require_malware(malware, Scenario.TRIVIAL)
    lambda_set = lambda_features(_subspace(ctx, ranking), cfg.lambda_percent, LambdaMode.RANDOM,
                                 _lambda_seed(cfg, Scenario.TRIVIAL))
    return _flip_all(ctx, cfg, malware, lambda_set, Scenario.TRIVIAL)


def attack_distribution(ctx: AttackContext, cfg: AttackConfig, ranking: FeatureRanking) -> AdversarialSet:
    """
    Flip a ranked benign-typical lambda set on every target malware sample
    """
    malware = ctx.target_malware()
    _require_malware(malware, Scenario.DISTRIBUTION)
    lambda_set = lambda_features(ranking, cfg.lambda_percent, LambdaMode.RANKED_BENIGN,
                                 _lambda_seed(cfg, Scenario.DISTRIBUTION))
    return _flip_all(ctx, cfg, malware, lambda_set, Scenario.DISTRIBUTION)


def knn_variant(x, neighbor, mask) -> np.ndarray:
    """
    x with the neighbour's set features inside mask copied on, 0 -> 1 only
    """
    return (np.asarray(x) | (np.asarray(neighbor) & np.asarray(mask))).astype(np.uint8)


def attack_knn(ctx: AttackContext, cfg: AttackConfig, ranking: FeatureRanking) -> AdversarialSet:
    """
    Nearest benign neighbour attack

    A random malware_fraction of the target malware is selected. For each, the k Manhattan-nearest
    benign training samples each give one variant: the neighbour's set features among the lambda
    top-ranked features are copied onto the malware sample.

    :param ctx: AttackContext
    :param cfg: AttackConfig, lambda_percent, k and malware_fraction apply
    :param ranking: FeatureRanking of the working subspace
    :return: AdversarialSet with up to k variants per selected sample
    """
    malware = ctx.target_malware()
    _require_malware(malware, Scenario.KNN)
    pool = partition_by_class(ctx.train).benign
    if pool.n < cfg.k:
        msg = f"KNN attack needs at least k={cfg.k} benign training samples, got {pool.n}"
        logger.error(msg)
        raise ValueError(msg)
    count = fraction_count(cfg.malware_fraction, malware.n)
    selected = np.sort(rng_for(cfg.seed, "attack", Scenario.KNN.value).choice(malware.n, count, replace=False))
    top = ranking.order[:percent_count(cfg.lambda_percent, len(ranking.order))]
    mask = np.zeros(ctx.model.m, dtype=np.uint8)
    mask[top] = 1

    origins, rows = [], []
    for i in selected:
        x = malware.X[i]
        neighbors, _ = knn_rows(x, pool, cfg.k)
        for variant, r in enumerate(neighbors):
            origins.append((malware.ids[i], variant, x))
            rows.append(knn_variant(x, pool.X[r], mask))
    X_star = np.vstack(rows)
    evaded = ctx.model.predict_many(X_star) == ctx.target_label
    crafted = []
    for (original_id, variant, x), x_star, hit in zip(origins, X_star, evaded):
        delta = [int(j) for j in np.flatnonzero(x_star != x)]
        crafted.append(AdversarialSample(original_id, x_star, ctx.target_label, delta, bool(hit), variant))
    logger.info(f"knn attack: {int(evaded.sum())} of {len(crafted)} variants from {count} samples evaded")
    return AdversarialSet(crafted, Scenario.KNN, cfg.as_dict(), LambdaSet(cfg.lambda_percent, top,
                                                                          LambdaMode.RANDOM))


def fit_discriminator(ctx: AttackContext, cfg: AttackConfig) -> LinearDiscriminator:
    """
    The logistic regression discriminator on the attacker's training data, cached on the context
    """
    if ctx.discriminator is None:
        ctx.discriminator = train_logistic_regression(ctx.train, cfg.train_config)
    if ctx.discriminator.norm == 0.0:
        raise DegenerateModelException(ctx.discriminator.kind.value,
                                       "weight vector is zero, no sample is nearer the boundary than another")
    return ctx.discriminator


def nearest_to_boundary(discriminator: LinearDiscriminator, samples: Dataset, fraction: float) -> np.ndarray:
    """
    Row indices of the fraction of samples with the smallest |w.x + b| / ||w||, ties to the lower id
    """
    distances = discriminator.distance(samples.X)
    order = np.lexsort((np.asarray(samples.ids, dtype=str), distances))
    return order[:fraction_count(fraction, samples.n)]


def attack_lr(ctx: AttackContext, cfg: AttackConfig, ranking: FeatureRanking) -> AdversarialSet:
    """
    Flip the ranked benign lambda set on the malware samples nearest the discriminator boundary
    """
    malware = ctx.target_malware()
    _require_malware(malware, Scenario.LR)
    discriminator = fit_discriminator(ctx, cfg)
    selected = malware.subset(nearest_to_boundary(discriminator, malware, cfg.malware_fraction))
    lambda_set = lambda_features(ranking, cfg.lambda_percent, LambdaMode.RANKED_BENIGN,
                                 _lambda_seed(cfg, Scenario.LR))
    return _flip_all(ctx, cfg, selected, lambda_set, Scenario.LR)


def aco_accepts(s0: float, s: np.ndarray, threshold: float, norm: float) -> np.ndarray:
    """
    Candidate predicate of the ant colony search

    The candidate's boundary distance |s| / ||w|| must not exceed threshold, and its margin must lie
    between the original margin s0 and the boundary side, i.e. s <= max(s0, 0).
    """
    s = np.asarray(s, dtype=np.float64)
    return (np.abs(s) / norm <= threshold + 1e-12) & (s <= max(s0, 0.0) + 1e-12)


def aco_search(sample: Sample, model: ClassifierHandle, discriminator: LinearDiscriminator, variables,
               bias, params: AcoParams, rng: np.random.Generator, y_star: int = BENIGN) -> AdversarialSample:
    """
    Ant colony search for a flip-set that makes the victim predict y_star

    Ants draw flip-sets of the current cardinality from the zero-valued variables with probability
    proportional to pheromone x benign bias. Accepted candidates (aco_accepts) are checked against
    the victim. Pheromone evaporates every iteration; each accepted flip-set then receives
    deposit x its relative margin reduction. On failure the best accepted candidate is returned
    with evaded=False, or the sample unchanged when nothing was ever accepted.

    :param sample: malware Sample
    :param model: victim ClassifierHandle
    :param discriminator: LinearDiscriminator giving boundary distances
    :param variables: ranked feature indices the search may flip
    :param bias: benign bias of every feature
    :param params: AcoParams
    :param rng: generator for the ants
    :param y_star: target label
    :return: AdversarialSample
    """
    x = sample.x
    if model.predict(x) == y_star:
        return AdversarialSample(sample.id, x.copy(), y_star, [], True)
    norm = discriminator.norm
    if norm == 0.0:
        raise DegenerateModelException(discriminator.kind.value, "weight vector is zero")
    free = np.asarray(_zero_candidates(x, list(variables)[:params.max_variables]), dtype=np.int64)
    if len(free) == 0:
        return AdversarialSample(sample.id, x.copy(), y_star, [], False)

    s0 = float(discriminator.decision_score(x))
    threshold = params.threshold if params.threshold is not None else abs(s0) / norm
    attractiveness = np.maximum(np.asarray(bias, dtype=np.float64)[free], 1e-6)
    pheromone = np.ones(len(free))
    cardinality = 1
    stall = 0
    best = None
    for iteration in range(params.max_iter):
        size = min(cardinality, len(free))
        weight = pheromone * attractiveness
        keys = np.log(weight / weight.sum()) + rng.gumbel(size=(params.n_ants, len(free)))
        chosen = np.argsort(-keys, axis=1, kind="stable")[:, :size]
        candidates = np.repeat(x.reshape(1, -1), params.n_ants, axis=0)
        candidates[np.arange(params.n_ants)[:, None], free[chosen]] = 1
        margins = discriminator.scores(candidates)
        accepted = np.flatnonzero(aco_accepts(s0, margins, threshold, norm))
        pheromone *= (1.0 - params.evaporation)
        if len(accepted) == 0:
            if size == len(free):
                break
            cardinality += 1
            stall = 0
            continue
        reduction = np.clip((s0 - margins[accepted]) / max(abs(s0), 1e-12), 0.0, None)
        for ant, gain in zip(accepted, reduction):
            pheromone[chosen[ant]] += params.deposit * gain
        hits = accepted[model.predict_many(candidates[accepted]) == y_star]
        if len(hits):
            ant = int(hits[0])
            delta = [int(j) for j in free[chosen[ant]]]
            logger.debug(f"ACO evaded {sample.id} after {iteration + 1} iterations with {len(delta)} flips")
            return AdversarialSample(sample.id, candidates[ant].copy(), y_star, delta, True)
        lowest = int(accepted[np.argmin(margins[accepted])])
        if best is None or margins[lowest] < best[0]:
            best = (float(margins[lowest]), candidates[lowest].copy(), [int(j) for j in free[chosen[lowest]]])
        stall += 1
        if stall >= params.patience and cardinality < len(free):
            cardinality += 1
            stall = 0
    if best is None:
        return AdversarialSample(sample.id, x.copy(), y_star, [], False)
    return AdversarialSample(sample.id, best[1], y_star, best[2], False)


def attack_aco(ctx: AttackContext, cfg: AttackConfig, ranking: FeatureRanking) -> AdversarialSet:
    """
    Ant colony attack on the malware samples nearest the discriminator boundary

    Each selected sample is searched independently with its own derived seed over the top
    max_variables ranked features.
    """
    malware = ctx.target_malware()
    _require_malware(malware, Scenario.ACO)
    discriminator = fit_discriminator(ctx, cfg)
    selected = malware.subset(nearest_to_boundary(discriminator, malware, cfg.malware_fraction))
    variables = ranking.order[:cfg.aco.max_variables]
    crafted = []
    for sample in selected:
        rng = rng_for(cfg.seed, "attack", Scenario.ACO.value, sample.id)
        crafted.append(aco_search(sample, ctx.model, discriminator, variables, ranking.benign_bias, cfg.aco, rng,
                                  ctx.target_label))
    logger.info(f"aco attack: {sum(s.evaded for s in crafted)} of {len(crafted)} samples evaded")
    return AdversarialSet(crafted, Scenario.ACO, cfg.as_dict())


def jsma_softmax(logits) -> np.ndarray:
    """
    (e^x0, e^x1) / (e^x0 + e^x1) with max subtraction
    """
    return softmax(np.asarray(logits, dtype=np.float64).reshape(-1))


def jsma_jacobian(model: MlpModel, x) -> np.ndarray:
    """
    2 x m Jacobian of the softmax outputs with respect to the input
    """
    if not isinstance(model, MlpModel):
        msg = "The Jacobian saliency attack needs an MLP model"
        logger.error(msg)
        raise ValueError(msg)
    return mlp_input_gradient(model, x)


def jsma_select(jacobian, x, target: int = BENIGN) -> tuple:
    """
    :return: (index of the zero-valued feature with the largest target-class gradient, True when all
             those gradients are negative)
    """
    x = np.asarray(x).reshape(-1)
    jacobian = np.asarray(jacobian)
    if jacobian.shape[-1] != len(x):
        raise DimensionMismatchException(jacobian.shape[-1], len(x), "jsma_select_index")
    zero = np.flatnonzero(x == 0)
    if len(zero) == 0:
        msg = "No zero-valued feature left to flip"
        logger.error(msg)
        raise ValueError(msg)
    gradient = jacobian[target, zero]
    best = int(zero[int(np.argmax(gradient))])
    return best, bool(np.all(gradient < 0))


def jsma_select_index(jacobian, x) -> int:
    """
    argmax of the benign-class output gradient over the zero-valued features, ties to the lower index
    """
    index, all_negative = jsma_select(jacobian, x)
    if all_negative:
        logger.debug(f"All candidate gradients are negative, flipping the least harmful feature {index}")
    return index


def jsma_craft(sample: Sample, model: MlpModel, max_mods: int = 20, y_star: int = BENIGN) -> AdversarialSample:
    x = sample.x.copy()
    delta = []
    evaded = model.predict(x) == y_star
    while not evaded and len(delta) < max_mods and np.any(x == 0):
        j = jsma_select_index(jsma_jacobian(model, x), x)
        x[j] = 1
        delta.append(j)
        evaded = model.predict(x) == y_star
    return AdversarialSample(sample.id, x, y_star, delta, evaded)


def attack_jsma(ctx: AttackContext, cfg: AttackConfig, ranking: Optional[FeatureRanking] = None) -> AdversarialSet:
    """
    Jacobian saliency attack against the MLP in the context, at most jsma_max_mods flips per sample
    """
    if not isinstance(ctx.model, MlpModel):
        msg = "attack_jsma needs an MLP model in the attack context"
        logger.error(msg)
        raise ValueError(msg)
    malware = ctx.target_malware()
    _require_malware(malware, Scenario.JSMA)
    crafted = [jsma_craft(sample, ctx.model, cfg.jsma_max_mods, ctx.target_label) for sample in malware]
    logger.info(f"jsma attack: {sum(s.evaded for s in crafted)} of {len(crafted)} samples evaded")
    return AdversarialSet(crafted, Scenario.JSMA, cfg.as_dict())


ATTACKS = {
    Scenario.TRIVIAL: attack_trivial,
    Scenario.DISTRIBUTION: attack_distribution,
    Scenario.KNN: attack_knn,
    Scenario.LR: attack_lr,
    Scenario.ACO: attack_aco,
    Scenario.JSMA: attack_jsma,
}


def run_attack(scenario, ctx: AttackContext, cfg: AttackConfig, ranking: FeatureRanking) -> AdversarialSet:
    """
    Run one scenario by name, e.g. run_attack("distribution", ctx, cfg, ranking)
    """
    scenario = Scenario(scenario)
    return ATTACKS[scenario](ctx, cfg, ranking)


def evaluate_objective(advset: AdversarialSet, model: ClassifierHandle) -> float:
    """
    Share of crafted samples the model assigns the target label
    """
    if len(advset) == 0:
        msg = "Cannot evaluate the objective of an empty adversarial set"
        logger.error(msg)
        raise ValueError(msg)
    X = np.vstack([s.x_star for s in advset])
    y_star = np.array([s.y_star for s in advset])
    return float(np.mean(model.predict_many(X) == y_star))


def evasion_rate(advset: AdversarialSet) -> Optional[float]:
    if len(advset) == 0:
        return None
    return float(np.mean([s.evaded for s in advset]))


def poison_dataset(test: Dataset, advset: AdversarialSet) -> Dataset:
    """
    The test set with every attacked malware sample replaced by its crafted variants
    """
    attacked = {s.original_id for s in advset}
    keep = np.array([i for i, sid in enumerate(test.ids) if sid not in attacked], dtype=np.int64)
    return test.subset(keep).concat(advset.to_dataset(test.vocab))


def save_adversarial(advset: AdversarialSet, path: str):
    """
    Write one JSON line per crafted sample
    """
    with open(path, "wt", encoding="utf-8", newline="\n") as fd:
        for s in advset:
            fd.write(json.dumps({"original_id": s.original_id, "variant": s.variant, "flipped": s.delta,
                                 "evaded": s.evaded, "scenario": advset.scenario.value}))
            fd.write("\n")
    logger.info(f"Wrote {len(advset)} adversarial samples to {path}")


def load_adversarial(path: str, source: Dataset, y_star: int = BENIGN) -> AdversarialSet:
    """
    Read an adversarial JSONL file, x_star is rebuilt from the source dataset and the flipped features
    """
    rows = {sid: i for i, sid in enumerate(source.ids)}
    samples = []
    scenario = None
    with open(path, "rt", encoding="utf-8") as fd:
        for line_number, line in enumerate(fd, start=1):
            if line.strip() == "":
                continue
            try:
                record = json.loads(line)
                original_id = str(record["original_id"])
                flipped = [int(j) for j in record["flipped"]]
                evaded = bool(record["evaded"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise DatasetFormatException(path, line_number, f"invalid adversarial record ({e})")
            if original_id not in rows:
                raise DatasetFormatException(path, line_number, f"unknown original id {original_id}")
            x_star = source.X[rows[original_id]].copy()
            if any(j < 0 or j >= source.m for j in flipped):
                raise DatasetFormatException(path, line_number, "flipped feature index out of range")
            x_star[flipped] = 1
            scenario = record.get("scenario", scenario)
            samples.append(AdversarialSample(original_id, x_star, y_star, flipped, evaded,
                                             int(record.get("variant", 0))))
    return AdversarialSet(samples, Scenario(scenario or Scenario.TRIVIAL.value))
