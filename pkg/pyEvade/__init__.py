"""
pyEvade package definition
import API classes, for datasets, ranking, models, attacks, defenses, metrics & experiments

author:     pyEvade developers
licence:    Apache License 2.0

"""

from .common import *
from .datasetAPI import (
    FeatureVocabulary,
    Sample,
    Dataset,
    DatasetSplit,
    ClassPartition,
    LoadReport,
    SignalMask,
    SyntheticSpec,
    DEFAULT_FEATURE_NAMES,
    vectorize,
    devectorize,
    load_vocabulary,
    save_vocabulary,
    load_dataset,
    save_dataset,
    partition_by_class,
    split_dataset,
    kfold_splits,
    generate_synthetic,
)
from .rankingAPI import FeatureRanking, LambdaSet, rank_features, select_top, to_subspace, benign_order, \
    benign_prefix, lambda_features, save_ranking, load_ranking
from .modelAPI import (
    TrainConfig,
    DecisionTree,
    ClassifierHandle,
    TreeModel,
    EnsembleModel,
    LinearDiscriminator,
    MlpModel,
    grow_tree,
    train_model,
    train_decision_tree,
    train_random_forest,
    train_bagging,
    train_linear_svm,
    train_logistic_regression,
    train_mlp,
    knn_neighbors,
    save_model,
    load_model,
)
from .attackAPI import (
    AcoParams,
    AttackConfig,
    AttackContext,
    AdversarialSample,
    AdversarialSet,
    flip_until_evasion,
    walk_candidates,
    walk_shared,
    attack_trivial,
    attack_distribution,
    attack_knn,
    attack_lr,
    attack_aco,
    attack_jsma,
    aco_search,
    jsma_craft,
    jsma_softmax,
    jsma_jacobian,
    jsma_select_index,
    run_attack,
    evaluate_objective,
    evasion_rate,
    poison_dataset,
    save_adversarial,
    load_adversarial,
)
from .defenseAPI import SyntheticSet, DefenseReport, adversarial_training, generate_synthetic_set, gan_defense
from .metricsAPI import ConfusionCounts, MetricsReport, confusion, accuracy, error_rate, precision, recall, \
    fpr_paper, fpr_benign, fpr_standard, auc_paper, auc_roc, evaluate
from .experimentAPI import ExperimentConfig, ExperimentAPI, RunReport, run_experiment, sweep_lambda, emit_report

__author__ = "pyEvade developers"

# Version of the pyEvade package
__version__ = "1.0.0"

__license__ = "Apache License Version 2.0"
