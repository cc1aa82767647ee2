"""
pyEvade ranking module definition

Rank features by regression-forest importance, select the working subspace and produce
the lambda feature sets attacks are allowed to flip.

author:     pyEvade developers
licence:    Apache License 2.0

"""
from typing import Optional

from pyEvade.common import *
from pyEvade.modelAPI import grow_tree, MSE

logger = logging.getLogger(__name__)

DEFAULT_TOP = 300


class FeatureRanking:
    """
    Feature indices in descending importance

    order and scores are aligned; benign_bias covers the whole feature space and holds
    P(feature=1 | benign) - P(feature=1 | malware).
    """

    def __init__(self, order, scores, benign_bias, features: Optional[list] = None):
        self.order = np.asarray(order, dtype=np.int64)
        self.scores = np.asarray(scores, dtype=np.float64)
        self.benign_bias = np.asarray(benign_bias, dtype=np.float64)
        self.features = features
        if len(self.order) != len(self.scores):
            msg = "Ranking order and scores must have the same length"
            logger.error(msg)
            raise ValueError(msg)
        if len(np.unique(self.order)) != len(self.order):
            msg = "Ranking order contains duplicate features"
            logger.error(msg)
            raise ValueError(msg)

    @property
    def m(self) -> int:
        return len(self.benign_bias)

    def __len__(self):
        return len(self.order)

    def score_of(self, feature: int) -> float:
        hits = np.flatnonzero(self.order == feature)
        return float(self.scores[hits[0]]) if len(hits) else 0.0

    def names(self) -> list:
        if self.features is None:
            return [str(j) for j in self.order]
        return [self.features[j] for j in self.order]

    def __str__(self):
        top = ", ".join(self.names()[:5])
        return f"""
            Ranked Features:    {len(self.order)} of {self.m}
            Top:                {top}
            """

    def __repr__(self):
        return self.__str__()


class LambdaSet:
    """
    The features an attack may flip, ceil(lambda_percent x subspace size / 100) of them
    """

    def __init__(self, lambda_percent: float, indices, mode: LambdaMode):
        self.lambda_percent = float(lambda_percent)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.mode = mode

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(int(i) for i in self.indices)

    def __str__(self):
        return f"LambdaSet(lambda={self.lambda_percent}%, mode={self.mode.value}, size={len(self.indices)})"

    def __repr__(self):
        return self.__str__()


def benign_bias(train) -> np.ndarray:
    benign = train.X[train.y == BENIGN]
    malware = train.X[train.y == MALWARE]
    return benign.mean(axis=0) - malware.mean(axis=0)


def _descending(values) -> np.ndarray:
    values = np.asarray(values)
    return np.lexsort((np.arange(len(values)), -values))


def rank_features(train, n_trees: int = 100, seed: int = 0, max_depth: int = 12, min_leaf: int = 5,
                  max_features: Optional[int] = None) -> FeatureRanking:
    """
    Rank features by the variance decrease they bring to a forest of regression trees

    Each tree is fitted on a bootstrap sample with the numeric label as target. Per-tree
    importances are normalised, averaged over trees and normalised again to sum to 1.

    :param train: Dataset
    :param n_trees: number of regression trees
    :param seed: ranking seed
    :param max_depth: maximum tree depth
    :param min_leaf: minimum rows per leaf
    :param max_features: candidate features per split, ceil(sqrt(m)) by default
    :return: FeatureRanking over every feature
    """
    if train.n == 0 or not train.has_both_classes():
        msg = "Feature ranking needs training data holding both classes"
        logger.error(msg)
        raise ValueError(msg)
    max_features = max_features or int(math.ceil(math.sqrt(train.m)))
    importance = np.zeros(train.m, dtype=np.float64)
    for t in range(n_trees):
        rng = rng_for(seed, "rank", "tree", t)
        rows = rng.integers(0, train.n, size=train.n)
        tree = grow_tree(train.X[rows], train.y[rows], MSE, max_features, max_depth, min_leaf, rng)
        total = tree.importance.sum()
        if total > 0:
            importance += tree.importance / total
    total = importance.sum()
    if total <= 0:
        raise DegenerateModelException("ranker", "no feature separates the training samples")
    importance /= total
    order = _descending(importance)
    logger.info(f"Ranked {train.m} features with {n_trees} regression trees")
    return FeatureRanking(order, importance[order], benign_bias(train), list(train.vocab.names))


def select_top(r: FeatureRanking, count: int = DEFAULT_TOP) -> FeatureRanking:
    """
    Keep the first count ranked features, scores are renormalised over the kept features
    """
    if count < 1:
        msg = f"select_top count must be at least 1, got {count}"
        logger.error(msg)
        raise ValueError(msg)
    k = min(count, len(r.order))
    scores = r.scores[:k]
    total = scores.sum()
    if total > 0:
        scores = scores / total
    return FeatureRanking(r.order[:k], scores, r.benign_bias, r.features)


def to_subspace(r: FeatureRanking) -> FeatureRanking:
    """
    Re-express a ranking in the columns of Dataset.restrict(r.order), where ranked feature i becomes column i
    """
    features = None if r.features is None else [r.features[j] for j in r.order]
    return FeatureRanking(np.arange(len(r.order)), r.scores, r.benign_bias[r.order], features)


def benign_order(r: FeatureRanking) -> np.ndarray:
    """
    The ranked features ordered by importance x positive benign bias

    Features without a positive bias keep their importance order at the tail.
    """
    weight = r.scores * np.maximum(r.benign_bias[r.order], 0.0)
    return r.order[_descending(weight)]


def _lambda_count(r: FeatureRanking, lambda_percent: float) -> int:
    if not 0 < lambda_percent <= 100:
        msg = f"lambda_percent must lie in (0, 100], got {lambda_percent}"
        logger.error(msg)
        raise ValueError(msg)
    count = percent_count(lambda_percent, len(r.order))
    if count == 0:
        msg = f"lambda {lambda_percent}% of {len(r.order)} features is an empty set"
        logger.error(msg)
        raise ValueError(msg)
    return count


def benign_prefix(r: FeatureRanking, lambda_percent: float) -> np.ndarray:
    """
    The first lambda percent of benign_order(), in descending rank order
    """
    return benign_order(r)[:_lambda_count(r, lambda_percent)]


def lambda_features(r: FeatureRanking, lambda_percent: float, mode=LambdaMode.RANDOM, seed: int = 0) -> LambdaSet:
    """
    Draw the lambda feature set

    random: a seeded permutation of the ranked subspace. ranked_benign: a seeded permutation of
    the top decile of benign_order(), followed by the rest of benign_order(). In both modes the set
    is a prefix of one fixed sequence, so sets for growing lambda under one seed are nested.

    :param r: FeatureRanking of the working subspace
    :param lambda_percent: share of the subspace in percent, in (0, 100]
    :param mode: LambdaMode
    :param seed: draw seed
    :return: LambdaSet
    """
    mode = LambdaMode(mode)
    count = _lambda_count(r, lambda_percent)
    if mode == LambdaMode.RANDOM:
        sequence = rng_for(seed, "lambda", mode.value).permutation(r.order)
    else:
        ordered = benign_order(r)
        decile = percent_count(10, len(ordered))
        head = rng_for(seed, "lambda", mode.value).permutation(ordered[:decile])
        sequence = np.concatenate([head, ordered[decile:]])
    return LambdaSet(lambda_percent, sequence[:count], mode)


def save_ranking(r: FeatureRanking, path: str):
    write_json({"order": [int(j) for j in r.order], "scores": [float(s) for s in r.scores],
                "benign_bias": [float(b) for b in r.benign_bias], "features": r.features}, path)
    logger.info(f"Saved ranking of {len(r.order)} features to {path}")


def load_ranking(path: str) -> FeatureRanking:
    document = read_json(path)
    for key in ("order", "scores", "benign_bias"):
        if key not in document:
            msg = f"Ranking file {path} has no '{key}' array"
            logger.error(msg)
            raise RuntimeError(msg)
    return FeatureRanking(document["order"], document["scores"], document["benign_bias"], document.get("features"))
