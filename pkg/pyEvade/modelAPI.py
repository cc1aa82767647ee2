"""
pyEvade model module definition

From-scratch classifiers used as victims, discriminators and defense learners: decision tree,
random forest, bagging ensemble, linear SVM, logistic regression, a small feed-forward network
and Manhattan nearest-neighbour queries.

Every handle exposes predict() and decision_score() with predict(x) == (decision_score(x) > threshold).

author:     pyEvade developers
licence:    Apache License 2.0

"""
import pickle
from typing import Optional

from pyEvade.common import *

logger = logging.getLogger(__name__)

GINI = "gini"
MSE = "mse"

THRESHOLDS = {
    ModelKind.TREE: 0.5,
    ModelKind.FOREST: 0.5,
    ModelKind.BAGGING: 0.5,
    ModelKind.SVM: 0.0,
    ModelKind.LOGREG: 0.0,
    ModelKind.MLP: 0.5,
}

_EPS = 1e-12


class TrainConfig:
    """
    Hyper-parameters shared by all trainers

    max_split_features=None searches every feature at each split.
    """

    def __init__(self, n_trees: int = 100, max_split_features: Optional[int] = 3, max_depth: int = 20,
                 min_leaf: int = 2, learning_rate: float = 0.1, epochs: int = 200, regularization: float = 1e-4,
                 batch_size: int = 32, hidden_units: int = 200, bootstrap: bool = True, seed: int = 0):
        self.n_trees = int(n_trees)
        self.max_split_features = None if max_split_features is None else int(max_split_features)
        self.max_depth = int(max_depth)
        self.min_leaf = int(min_leaf)
        self.learning_rate = float(learning_rate)
        self.epochs = int(epochs)
        self.regularization = float(regularization)
        self.batch_size = int(batch_size)
        self.hidden_units = int(hidden_units)
        self.bootstrap = bool(bootstrap)
        self.seed = int(seed)
        if self.n_trees < 1:
            msg = f"n_trees must be at least 1, got {self.n_trees}"
            logger.error(msg)
            raise ValueError(msg)
        if self.learning_rate <= 0 or self.regularization < 0:
            msg = "learning_rate must be positive and regularization nonnegative"
            logger.error(msg)
            raise ValueError(msg)

    def replace(self, **kwargs) -> 'TrainConfig':
        values = self.as_dict()
        values.update(kwargs)
        return TrainConfig(**values)

    def as_dict(self) -> dict:
        return {"n_trees": self.n_trees, "max_split_features": self.max_split_features,
                "max_depth": self.max_depth, "min_leaf": self.min_leaf, "learning_rate": self.learning_rate,
                "epochs": self.epochs, "regularization": self.regularization, "batch_size": self.batch_size,
                "hidden_units": self.hidden_units, "bootstrap": self.bootstrap, "seed": self.seed}

    @classmethod
    def from_properties(cls, config, section: str = "models", **overrides) -> 'TrainConfig':
        """
        Build a config from a properties file section, unknown keys are ignored
        """
        values = {}
        if config is not None and config.has_section(section):
            items = config[section]
            for key in ("n_trees", "max_depth", "min_leaf", "epochs", "batch_size", "hidden_units", "seed"):
                if key in items:
                    values[key] = int(items[key])
            for key in ("learning_rate", "regularization"):
                if key in items:
                    values[key] = float(items[key])
            if "max_split_features" in items:
                value = items["max_split_features"].strip().lower()
                values["max_split_features"] = None if value in ("", "all", "none") else int(value)
            if "bootstrap" in items:
                values["bootstrap"] = strtobool(items["bootstrap"])
        values.update(overrides)
        return cls(**values)

    def __str__(self):
        return f"TrainConfig({', '.join(f'{k}={v}' for k, v in self.as_dict().items())})"

    def __repr__(self):
        return self.__str__()


class DecisionTree:
    """
    A binary tree stored as flat node arrays

    feature[i] is -1 at leaves; rows with x[feature[i]] == 1 go right, the others left.
    value[i] is the class-1 probability (classification) or the mean target (regression).
    """

    def __init__(self, feature, left, right, value, n_samples, importance):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.float64)
        self.n_samples = np.asarray(n_samples, dtype=np.int64)
        self.importance = np.asarray(importance, dtype=np.float64)

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depths = np.zeros(self.node_count, dtype=np.int64)
        for i in range(self.node_count):
            if self.feature[i] >= 0:
                depths[self.left[i]] = depths[i] + 1
                depths[self.right[i]] = depths[i] + 1
        return int(depths.max())

    def apply(self, X) -> np.ndarray:
        """
        Leaf index reached by every row of X
        """
        X = np.asarray(X)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] >= 0)
        while len(active):
            current = node[active]
            go_right = X[active, self.feature[current]] == 1
            node[active] = np.where(go_right, self.right[current], self.left[current])
            active = active[self.feature[node[active]] >= 0]
        return node

    def predict_value(self, X) -> np.ndarray:
        return self.value[self.apply(X)]


def _impurity(criterion, count, total, total_sq):
    """
    Node impurity times node size, for arrays of candidate children
    """
    count = np.maximum(count, 1)
    if criterion == GINI:
        return 2.0 * total * (count - total) / count
    return total_sq - total * total / count


def grow_tree(X, y, criterion: str = GINI, max_features: Optional[int] = None, max_depth: int = 20,
              min_leaf: int = 2, rng: Optional[np.random.Generator] = None) -> DecisionTree:
    """
    Grow a CART tree on binary features

    A split needs a strictly positive impurity decrease and min_leaf rows on each side.
    With max_features set, each node looks at that many randomly drawn features among the
    ones that can be split; equal gains go to the lower feature index.

    :param X: n x m binary matrix
    :param y: targets, 0/1 labels for gini or real values for mse
    :param criterion: gini or mse
    :param max_features: candidate features per split, None for all
    :param max_depth: maximum depth
    :param min_leaf: minimum rows per leaf
    :param rng: generator used for the candidate draw
    :return: DecisionTree
    """
    X = np.asarray(X)
    y = np.asarray(y, dtype=np.float64)
    n, m = X.shape
    if max_features is not None and max_features < m and rng is None:
        msg = "grow_tree needs a random generator when sub-sampling split features"
        logger.error(msg)
        raise ValueError(msg)
    feature, left, right, value, n_samples = [], [], [], [], []
    importance = np.zeros(m, dtype=np.float64)

    def build(rows, depth):
        node_id = len(feature)
        yn = y[rows]
        count = len(rows)
        total = float(yn.sum())
        total_sq = float(np.dot(yn, yn))
        feature.append(-1)
        left.append(-1)
        right.append(-1)
        value.append(total / count)
        n_samples.append(count)

        parent = float(_impurity(criterion, np.array([count]), np.array([total]), np.array([total_sq]))[0])
        if depth >= max_depth or count < 2 * min_leaf or parent <= _EPS:
            return node_id

        Xn = X[rows]
        ones = Xn.sum(axis=0, dtype=np.int64)
        splittable = (ones >= min_leaf) & (count - ones >= min_leaf)
        if max_features is None or max_features >= m:
            candidates = np.flatnonzero(splittable)
        else:
            order = rng.permutation(m)
            candidates = np.sort(order[splittable[order]][:max_features])
        if len(candidates) == 0:
            return node_id

        Xc = Xn[:, candidates].astype(np.float64)
        c1 = ones[candidates].astype(np.float64)
        s1 = yn @ Xc
        q1 = (yn * yn) @ Xc
        gain = parent - _impurity(criterion, c1, s1, q1) - _impurity(criterion, count - c1, total - s1, total_sq - q1)
        best = float(gain.max())
        if best <= _EPS:
            return node_id
        j = int(candidates[np.flatnonzero(gain >= best - _EPS)[0]])
        importance[j] += best

        go_right = Xn[:, j] == 1
        feature[node_id] = j
        left[node_id] = build(rows[~go_right], depth + 1)
        right[node_id] = build(rows[go_right], depth + 1)
        return node_id

    build(np.arange(n), 0)
    return DecisionTree(feature, left, right, value, n_samples, importance)


class ClassifierHandle:
    """
    Base class of trained models
    """

    def __init__(self, kind: ModelKind, m: int, config: Optional[TrainConfig] = None):
        self.kind = kind
        self.m = m
        self.config = config
        self.threshold = THRESHOLDS[kind]
        self.feature_names = None
        self.degenerate = False

    def _check(self, X, method_name) -> np.ndarray:
        X = np.asarray(X)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.m:
            raise DimensionMismatchException(self.m, X.shape[1], method_name)
        return X

    def _scores(self, X) -> np.ndarray:
        raise NotImplementedError

    def scores(self, X) -> np.ndarray:
        """
        Decision scores of every row of X
        """
        return self._scores(self._check(X, "scores"))

    def predict_many(self, X) -> np.ndarray:
        return (self._scores(self._check(X, "predict_many")) > self.threshold).astype(np.int64)

    def decision_score(self, x) -> float:
        return float(self._scores(self._check(x, "decision_score"))[0])

    def predict(self, x) -> int:
        return int(self._scores(self._check(x, "predict"))[0] > self.threshold)

    def __str__(self):
        return f"""
            Model:      {self.kind.value}
            Features:   {self.m}
            Threshold:  {self.threshold}
            """

    def __repr__(self):
        return self.__str__()


class TreeModel(ClassifierHandle):
    """
    A single decision tree, the score is the leaf malware probability
    """

    def __init__(self, tree: DecisionTree, m: int, config: Optional[TrainConfig] = None):
        super().__init__(ModelKind.TREE, m, config)
        self.tree = tree

    def _scores(self, X) -> np.ndarray:
        return self.tree.predict_value(X)


class EnsembleModel(ClassifierHandle):
    """
    Random forest or bagging ensemble, the score is the fraction of trees voting malware
    """

    def __init__(self, kind: ModelKind, trees: list, m: int, config: Optional[TrainConfig] = None,
                 bootstrap_rows: Optional[list] = None, n_train: int = 0):
        super().__init__(kind, m, config)
        self.trees = trees
        self.bootstrap_rows = bootstrap_rows or []
        self.n_train = n_train

    def _scores(self, X) -> np.ndarray:
        votes = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees:
            votes += tree.predict_value(X) > 0.5
        return votes / len(self.trees)

    @property
    def out_of_bag_fraction(self) -> np.ndarray:
        """
        Per tree share of training rows left out of its bootstrap sample
        """
        if self.n_train == 0:
            return np.zeros(len(self.trees))
        return np.array([1.0 - len(np.unique(rows)) / self.n_train for rows in self.bootstrap_rows])


class LinearDiscriminator(ClassifierHandle):
    """
    Linear model w.x + b, used for the SVM and the logistic regression discriminator
    """

    def __init__(self, w, b: float, kind: ModelKind = ModelKind.LOGREG, config: Optional[TrainConfig] = None):
        w = np.asarray(w, dtype=np.float64)
        super().__init__(kind, len(w), config)
        self.w = w
        self.b = float(b)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.w))

    def _scores(self, X) -> np.ndarray:
        return X @ self.w + self.b

    def margin(self, X) -> np.ndarray:
        return self.scores(X)

    def distance(self, X) -> np.ndarray:
        """
        Distance |w.x + b| / ||w|| of every row to the decision boundary
        """
        norm = self.norm
        if norm == 0.0:
            raise DegenerateModelException(self.kind.value, "weight vector is zero, boundary distance undefined")
        return np.abs(self.scores(X)) / norm

    def probability(self, X) -> np.ndarray:
        return _sigmoid(self.scores(X))


class MlpModel(ClassifierHandle):
    """
    Feed-forward network m -> 200 -> 200 -> 2 with rectifier activations

    The score is the softmax probability of the malware logit.
    """

    def __init__(self, weights: list, biases: list, config: Optional[TrainConfig] = None):
        weights = [np.asarray(w, dtype=np.float64) for w in weights]
        biases = [np.asarray(b, dtype=np.float64) for b in biases]
        if len(weights) != 3 or len(biases) != 3 or weights[2].shape[1] != 2:
            msg = "An MLP needs three weight layers ending in two logits"
            logger.error(msg)
            raise ValueError(msg)
        super().__init__(ModelKind.MLP, weights[0].shape[0], config)
        self.weights = weights
        self.biases = biases

    def forward(self, X) -> tuple:
        """
        :return: (pre-activations of both hidden layers, hidden activations, logits)
        """
        z1 = X @ self.weights[0] + self.biases[0]
        h1 = np.maximum(z1, 0.0)
        z2 = h1 @ self.weights[1] + self.biases[1]
        h2 = np.maximum(z2, 0.0)
        logits = h2 @ self.weights[2] + self.biases[2]
        return (z1, z2), (h1, h2), logits

    def logits(self, X) -> np.ndarray:
        return self.forward(np.asarray(X, dtype=np.float64))[2]

    def probabilities(self, X) -> np.ndarray:
        return softmax(self.logits(self._check(X, "probabilities")))

    def _scores(self, X) -> np.ndarray:
        return softmax(self.logits(X))[:, MALWARE]


def softmax(logits) -> np.ndarray:
    """
    Row-wise softmax with max subtraction
    """
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def _sigmoid(z) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    positive = z >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-z[positive]))
    ez = np.exp(z[~positive])
    out[~positive] = ez / (1.0 + ez)
    return out


def _require_both_classes(train, kind: ModelKind, allow_degenerate: bool) -> bool:
    if train.n == 0:
        msg = f"Cannot train {kind.value} on an empty dataset"
        logger.error(msg)
        raise ValueError(msg)
    if train.has_both_classes():
        return False
    if allow_degenerate:
        logger.warning(f"Training {kind.value} on single-class data, the model is a single leaf")
        return True
    raise DegenerateModelException(kind.value, "training data holds a single class")


def train_decision_tree(train, cfg: Optional[TrainConfig] = None) -> TreeModel:
    """
    Binary CART tree with Gini impurity over every feature

    :param train: Dataset
    :param cfg: TrainConfig, only max_depth and min_leaf apply
    :return: TreeModel
    """
    cfg = cfg or TrainConfig()
    degenerate = _require_both_classes(train, ModelKind.TREE, True)
    tree = grow_tree(train.X, train.y, GINI, None, cfg.max_depth, cfg.min_leaf)
    model = TreeModel(tree, train.m, cfg)
    model.degenerate = degenerate
    logger.info(f"Trained decision tree with {tree.node_count} nodes on {train.n} samples")
    return model


def _train_ensemble(train, cfg: TrainConfig, kind: ModelKind, max_features) -> EnsembleModel:
    degenerate = _require_both_classes(train, kind, True)
    trees = []
    bootstrap_rows = []
    for t in range(cfg.n_trees):
        rng = rng_for(cfg.seed, kind.value, "tree", t)
        if cfg.bootstrap:
            rows = rng.integers(0, train.n, size=train.n)
        else:
            rows = np.arange(train.n)
        bootstrap_rows.append(rows)
        trees.append(grow_tree(train.X[rows], train.y[rows], GINI, max_features, cfg.max_depth, cfg.min_leaf, rng))
    model = EnsembleModel(kind, trees, train.m, cfg, bootstrap_rows, train.n)
    model.degenerate = degenerate
    logger.info(f"Trained {kind.value} ensemble of {len(trees)} trees on {train.n} samples")
    return model


def train_random_forest(train, cfg: Optional[TrainConfig] = None) -> EnsembleModel:
    """
    Bootstrap-sampled trees, each split considering cfg.max_split_features random candidates (3 by default)
    """
    cfg = cfg or TrainConfig()
    return _train_ensemble(train, cfg, ModelKind.FOREST, cfg.max_split_features)


def train_bagging(train, cfg: Optional[TrainConfig] = None) -> EnsembleModel:
    """
    Bagged decision trees, every split searches all features
    """
    cfg = cfg or TrainConfig()
    return _train_ensemble(train, cfg, ModelKind.BAGGING, None)


def _signed_labels(y) -> np.ndarray:
    return np.where(np.asarray(y) == MALWARE, 1.0, -1.0)


def hinge_objective(w, b, X, y, regularization: float) -> float:
    """
    Mean hinge loss plus (regularization / 2) * ||w||^2, labels 0/1
    """
    t = _signed_labels(y)
    margins = t * (np.asarray(X, dtype=np.float64) @ np.asarray(w, dtype=np.float64) + b)
    return float(np.mean(np.maximum(0.0, 1.0 - margins)) + 0.5 * regularization * np.dot(w, w))


def train_linear_svm(train, cfg: Optional[TrainConfig] = None) -> LinearDiscriminator:
    """
    Linear SVM by full-batch subgradient descent on the regularized hinge loss

    The step size is learning_rate / sqrt(epoch) and the iterate with the lowest objective is kept.

    :param train: Dataset
    :param cfg: TrainConfig
    :return: LinearDiscriminator of kind svm
    """
    cfg = cfg or TrainConfig()
    _require_both_classes(train, ModelKind.SVM, False)
    X = train.X.astype(np.float64)
    t = _signed_labels(train.y)
    n = train.n
    w = np.zeros(train.m)
    b = 0.0
    best = (hinge_objective(w, b, X, train.y, cfg.regularization), w.copy(), b)
    for epoch in range(1, cfg.epochs + 1):
        active = t * (X @ w + b) < 1.0
        grad_w = -(t[active] @ X[active]) / n + cfg.regularization * w
        grad_b = -float(t[active].sum()) / n
        step = cfg.learning_rate / math.sqrt(epoch)
        w = w - step * grad_w
        b = b - step * grad_b
        if not (np.all(np.isfinite(w)) and math.isfinite(b)):
            msg = f"SVM weights became non-finite at epoch {epoch}"
            logger.error(msg)
            raise DivergenceException(ModelKind.SVM.value, epoch)
        objective = hinge_objective(w, b, X, train.y, cfg.regularization)
        if objective < best[0]:
            best = (objective, w.copy(), b)
    logger.info(f"Trained linear SVM on {train.n} samples, objective {best[0]:.6f}")
    return LinearDiscriminator(best[1], best[2], ModelKind.SVM, cfg)


def logistic_loss(w, b, X, y, regularization: float = 0.0) -> float:
    """
    Mean cross-entropy of logistic(w.x + b) against 0/1 labels plus (regularization / 2) * ||w||^2
    """
    z = np.asarray(X, dtype=np.float64) @ np.asarray(w, dtype=np.float64) + b
    y = np.asarray(y, dtype=np.float64)
    # log(1 + e^z) - y z, written to stay finite for large |z|
    loss = np.logaddexp(0.0, z) - y * z
    return float(np.mean(loss) + 0.5 * regularization * np.dot(w, w))


def logistic_gradient(w, b, X, y, regularization: float = 0.0) -> tuple:
    """
    Gradient of logistic_loss with respect to (w, b)
    """
    X = np.asarray(X, dtype=np.float64)
    residual = _sigmoid(X @ np.asarray(w, dtype=np.float64) + b) - np.asarray(y, dtype=np.float64)
    return X.T @ residual / len(residual) + regularization * np.asarray(w), float(residual.mean())


def train_logistic_regression(train, cfg: Optional[TrainConfig] = None) -> LinearDiscriminator:
    """
    Logistic regression by full-batch gradient descent from zero weights

    :param train: Dataset
    :param cfg: TrainConfig
    :return: LinearDiscriminator of kind logreg
    """
    cfg = cfg or TrainConfig()
    _require_both_classes(train, ModelKind.LOGREG, False)
    X = train.X.astype(np.float64)
    w = np.zeros(train.m)
    b = 0.0
    for epoch in range(1, cfg.epochs + 1):
        grad_w, grad_b = logistic_gradient(w, b, X, train.y, cfg.regularization)
        step = cfg.learning_rate / math.sqrt(epoch)
        w = w - step * grad_w
        b = b - step * grad_b
        if not (np.all(np.isfinite(w)) and math.isfinite(b)):
            msg = f"Logistic regression weights became non-finite at epoch {epoch}"
            logger.error(msg)
            raise DivergenceException(ModelKind.LOGREG.value, epoch)
    logger.info(f"Trained logistic regression on {train.n} samples, loss "
                f"{logistic_loss(w, b, X, train.y, cfg.regularization):.6f}")
    return LinearDiscriminator(w, b, ModelKind.LOGREG, cfg)


def init_mlp(m: int, hidden_units: int = 200, rng: Optional[np.random.Generator] = None,
             config: Optional[TrainConfig] = None) -> MlpModel:
    """
    He-initialised network with zero biases
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    sizes = [m, hidden_units, hidden_units, 2]
    weights = [rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
               for fan_in, fan_out in zip(sizes[:-1], sizes[1:])]
    biases = [np.zeros(fan_out) for fan_out in sizes[1:]]
    return MlpModel(weights, biases, config)


def mlp_input_gradient(model: MlpModel, x) -> np.ndarray:
    """
    Jacobian of the softmax outputs with respect to the real-relaxed input

    :return: 2 x m matrix, row i holds dF_i / dx
    """
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    if x.shape[1] != model.m:
        raise DimensionMismatchException(model.m, x.shape[1], "mlp_input_gradient")
    (z1, z2), _, logits = model.forward(x)
    p = softmax(logits)[0]
    d_logits = np.diag(p) - np.outer(p, p)
    d_h2 = (d_logits @ model.weights[2].T) * (z2 > 0)
    d_h1 = (d_h2 @ model.weights[1].T) * (z1 > 0)
    return d_h1 @ model.weights[0].T


def train_mlp(train, cfg: Optional[TrainConfig] = None) -> MlpModel:
    """
    Train the m -> 200 -> 200 -> 2 network with softmax cross-entropy by mini-batch gradient descent

    :param train: Dataset
    :param cfg: TrainConfig, batch_size, hidden_units, epochs and learning_rate apply
    :return: MlpModel
    """
    cfg = cfg or TrainConfig()
    _require_both_classes(train, ModelKind.MLP, False)
    rng = rng_for(cfg.seed, ModelKind.MLP.value)
    model = init_mlp(train.m, cfg.hidden_units, rng, cfg)
    X = train.X.astype(np.float64)
    targets = np.zeros((train.n, 2))
    targets[np.arange(train.n), train.y] = 1.0
    W, B = model.weights, model.biases
    for epoch in range(1, cfg.epochs + 1):
        step = cfg.learning_rate / math.sqrt(epoch)
        order = rng.permutation(train.n)
        for start in range(0, train.n, cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            xb = X[rows]
            (z1, z2), (h1, h2), logits = model.forward(xb)
            d_logits = (softmax(logits) - targets[rows]) / len(rows)
            d_h2 = (d_logits @ W[2].T) * (z2 > 0)
            d_h1 = (d_h2 @ W[1].T) * (z1 > 0)
            grads = [(xb.T @ d_h1, d_h1.sum(axis=0)), (h1.T @ d_h2, d_h2.sum(axis=0)),
                     (h2.T @ d_logits, d_logits.sum(axis=0))]
            for layer, (gw, gb) in enumerate(grads):
                W[layer] -= step * (gw + cfg.regularization * W[layer])
                B[layer] -= step * gb
        if not all(np.all(np.isfinite(a)) for a in W + B):
            msg = f"MLP weights became non-finite at epoch {epoch}"
            logger.error(msg)
            raise DivergenceException(ModelKind.MLP.value, epoch)
    logger.info(f"Trained MLP ({cfg.hidden_units}x2 hidden) on {train.n} samples for {cfg.epochs} epochs")
    return model


TRAINERS = {
    ModelKind.TREE: train_decision_tree,
    ModelKind.FOREST: train_random_forest,
    ModelKind.BAGGING: train_bagging,
    ModelKind.SVM: train_linear_svm,
    ModelKind.LOGREG: train_logistic_regression,
    ModelKind.MLP: train_mlp,
}


def train_model(kind, train, cfg: Optional[TrainConfig] = None) -> ClassifierHandle:
    """
    Train a classifier of the given kind

    :param kind: ModelKind or its value, e.g. "rf"
    :param train: Dataset
    :param cfg: TrainConfig
    :return: ClassifierHandle
    """
    kind = ModelKind(kind)
    model = TRAINERS[kind](train, cfg)
    model.feature_names = list(train.vocab.names)
    return model


def manhattan_distances(query, X) -> np.ndarray:
    query = np.asarray(query, dtype=np.int64).reshape(-1)
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != len(query):
        raise DimensionMismatchException(X.shape[-1], len(query), "manhattan_distances")
    return np.abs(X.astype(np.int64) - query).sum(axis=1)


def knn_rows(query, pool, k: int) -> tuple:
    """
    Row indices and distances of the k pool samples nearest to query in L1, ties to the lower id
    """
    if pool.n == 0:
        msg = "Nearest neighbour query on an empty pool"
        logger.error(msg)
        raise ValueError(msg)
    if k < 1 or k > pool.n:
        msg = f"k ({k}) must lie between 1 and the pool size ({pool.n})"
        logger.error(msg)
        raise ValueError(msg)
    distances = manhattan_distances(query, pool.X)
    order = np.lexsort((np.asarray(pool.ids, dtype=str), distances))[:k]
    return order, distances[order]


def knn_neighbors(query, pool, k: int = 10) -> list:
    """
    The k Manhattan-nearest pool samples, ascending by distance

    :param query: bit-vector
    :param pool: Dataset searched
    :param k: neighbour count
    :return: list of (sample id, distance)
    """
    rows, distances = knn_rows(query, pool, k)
    return [(pool.ids[r], int(d)) for r, d in zip(rows, distances)]


def save_model(model: ClassifierHandle, path: str):
    """
    Write a versioned model file: magic header followed by a pickled payload
    """
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": model.kind.value,
        "config": model.config.as_dict() if model.config is not None else None,
        "features": model.feature_names,
        "model": model,
    }
    with open(path, "wb") as fd:
        fd.write(MODEL_MAGIC)
        pickle.dump(payload, fd, protocol=pickle.HIGHEST_PROTOCOL)
    logger.info(f"Saved {model.kind.value} model to {path}")


def load_model(path: str) -> ClassifierHandle:
    with open(path, "rb") as fd:
        magic = fd.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            msg = f"{path} is not a pyEvade model file"
            logger.error(msg)
            raise RuntimeError(msg)
        payload = pickle.load(fd)
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        msg = f"{path} has model format {payload.get('format_version')}, expected {MODEL_FORMAT_VERSION}"
        logger.error(msg)
        raise RuntimeError(msg)
    model = payload["model"]
    logger.info(f"Loaded {payload['kind']} model from {path}")
    return model
