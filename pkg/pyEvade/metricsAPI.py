"""
pyEvade metrics module definition

Confusion matrix bookkeeping, the published accuracy, precision, recall, FPR and AUC formulas
and their standard counterparts.

Malware is the positive class throughout. A ratio whose denominator is zero is reported as
None, never as 0.

author:     pyEvade developers
licence:    Apache License 2.0

"""
from typing import Optional

from sklearn.metrics import roc_auc_score

from pyEvade.common import *

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ["accuracy", "fpr_paper", "fpr_benign", "fpr_standard", "precision", "recall", "auc_paper",
                  "auc_roc"]


class ConfusionCounts:
    def __init__(self, tp: int, tn: int, fp: int, fn: int):
        self.tp = int(tp)
        self.tn = int(tn)
        self.fp = int(fp)
        self.fn = int(fn)

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def __eq__(self, other):
        return isinstance(other, ConfusionCounts) and \
            (self.tp, self.tn, self.fp, self.fn) == (other.tp, other.tn, other.fp, other.fn)

    def __str__(self):
        return f"ConfusionCounts(tp={self.tp}, tn={self.tn}, fp={self.fp}, fn={self.fn})"

    def __repr__(self):
        return self.__str__()


class MetricsReport:
    """
    All metrics of one evaluation, absent values are None
    """

    def __init__(self, counts: ConfusionCounts, auc_roc: Optional[float] = None):
        self.counts = counts
        self.accuracy = accuracy(counts)
        self.precision = precision(counts)
        self.recall = recall(counts)
        self.fpr_paper = fpr_paper(counts)
        self.fpr_benign = fpr_benign(counts)
        self.fpr_standard = fpr_standard(counts)
        self.auc_paper = auc_paper(counts)
        self.auc_roc = auc_roc

    def as_row(self) -> dict:
        """
        The metrics keyed by the fixed CSV column names
        """
        return {column: getattr(self, column) for column in METRIC_COLUMNS}

    def as_dict(self) -> dict:
        row = self.as_row()
        row.update({"tp": self.counts.tp, "tn": self.counts.tn, "fp": self.counts.fp, "fn": self.counts.fn})
        return row

    def __str__(self):
        return f"""
            Accuracy:       {self.accuracy}
            Precision:      {self.precision}
            Recall:         {self.recall}
            FPR (paper):    {self.fpr_paper}
            FPR (benign):   {self.fpr_benign}
            FPR:            {self.fpr_standard}
            AUC (paper):    {self.auc_paper}
            AUC (ROC):      {self.auc_roc}
            """

    def __repr__(self):
        return self.__str__()


def _ratio(numerator, denominator) -> Optional[float]:
    if denominator == 0:
        return None
    return numerator / denominator


def confusion(pred, truth) -> ConfusionCounts:
    """
    Count true and false positives and negatives, malware is the positive class

    :param pred: predicted labels
    :param truth: true labels
    :return: ConfusionCounts
    """
    pred = np.asarray(pred).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    if len(pred) != len(truth):
        msg = f"Prediction and truth lengths differ ({len(pred)} != {len(truth)})"
        logger.error(msg)
        raise ValueError(msg)
    tp = int(np.sum((pred == MALWARE) & (truth == MALWARE)))
    tn = int(np.sum((pred == BENIGN) & (truth == BENIGN)))
    fp = int(np.sum((pred == MALWARE) & (truth == BENIGN)))
    fn = int(np.sum((pred == BENIGN) & (truth == MALWARE)))
    return ConfusionCounts(tp, tn, fp, fn)


def accuracy(c: ConfusionCounts) -> Optional[float]:
    return _ratio(c.tp + c.tn, c.total)


def error_rate(c: ConfusionCounts) -> Optional[float]:
    return _ratio(c.fp + c.fn, c.total)


def precision(c: ConfusionCounts) -> Optional[float]:
    return _ratio(c.tp, c.tp + c.fp)


def recall(c: ConfusionCounts) -> Optional[float]:
    return _ratio(c.tp, c.tp + c.fn)


def fpr_paper(c: ConfusionCounts) -> Optional[float]:
    """
    False positive rate as published: FP / (TP + TN)
    """
    return _ratio(c.fp, c.tp + c.tn)


def fpr_benign(c: ConfusionCounts) -> Optional[float]:
    """
    The published FP / (TP + TN) read with benign as the positive class: FN / (TP + TN)

    Additions-only evasion turns malware detections into misses: FN grows under attack while FP stays put.
    """
    return _ratio(c.fn, c.tp + c.tn)


def fpr_standard(c: ConfusionCounts) -> Optional[float]:
    """
    False positive rate: FP / (FP + TN)
    """
    return _ratio(c.fp, c.fp + c.tn)


def auc_paper(c: ConfusionCounts) -> Optional[float]:
    """
    Area under the curve as published: (TP / (TP + FP) + TN / (TN + FP)) / 2
    """
    first = _ratio(c.tp, c.tp + c.fp)
    second = _ratio(c.tn, c.tn + c.fp)
    if first is None or second is None:
        return None
    return 0.5 * (first + second)


def auc_roc(scores, truth) -> Optional[float]:
    """
    Threshold-sweep ROC area of real-valued malware scores, None when only one class is present
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth).reshape(-1)
    if len(scores) != len(truth):
        msg = f"Score and truth lengths differ ({len(scores)} != {len(truth)})"
        logger.error(msg)
        raise ValueError(msg)
    if len(np.unique(truth)) < 2:
        return None
    return float(roc_auc_score(truth, scores))


def evaluate(model, dataset) -> MetricsReport:
    """
    Score a classifier on a dataset

    :param model: ClassifierHandle
    :param dataset: Dataset
    :return: MetricsReport
    """
    scores = model.scores(dataset.X)
    pred = (scores > model.threshold).astype(np.int64)
    report = MetricsReport(confusion(pred, dataset.y), auc_roc(scores, dataset.y))
    logger.debug(f"Evaluated {model.kind.value} on {dataset.n} samples: accuracy {report.accuracy}")
    return report
