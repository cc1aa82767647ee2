"""
Shared definitions used by the dataset, model, attack, defense and experiment modules

Holds the label constants, enumerations, exception types, hierarchical seed derivation
and the configuration lookup chain (argument, environment variable, properties file).

author:     pyEvade developers
licence:    Apache License 2.0

"""
import configparser
import hashlib
import json
import logging
import math
import os
import re
import unicodedata
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

logger = logging.getLogger(__name__)

BENIGN = 0
MALWARE = 1

DEFAULT_CONFIG_PATH = "evade.properties"
ENV_WORKERS = "EVADE_WORKERS"
ENV_SEED = "EVADE_SEED"
ENV_OUTPUT = "EVADE_OUTPUT"

MODEL_MAGIC = b"PYEVADE-MODEL\n"
MODEL_FORMAT_VERSION = 1

SEED_MASK = (1 << 64) - 1


class ModelKind(Enum):
    """
    Enumeration of the classifier families
    """
    TREE = "tree"
    FOREST = "rf"
    BAGGING = "bagging"
    SVM = "svm"
    LOGREG = "logreg"
    MLP = "mlp"


class Scenario(Enum):
    """
    Enumeration of the attack scenarios
    """
    TRIVIAL = "trivial"
    DISTRIBUTION = "distribution"
    KNN = "knn"
    LR = "lr"
    ACO = "aco"
    JSMA = "jsma"


class LambdaMode(Enum):
    RANDOM = "random"
    RANKED_BENIGN = "ranked_benign"


class DefenseMethod(Enum):
    ADVERSARIAL_TRAINING = "adversarial-training"
    GAN = "gan"


class DatasetFormatException(Exception):
    """
    Custom Exception for unreadable dataset or vocabulary files
    """

    def __init__(self, path, line_number, message):
        self.path = path
        self.line_number = line_number
        self.msg = message
        Exception.__init__(self, self.path, self.line_number, self.msg)

    def __str__(self):
        if self.line_number is None:
            return f"{self.path}: {self.msg}"
        return f"{self.path} line {self.line_number}: {self.msg}"


class DimensionMismatchException(Exception):
    """
    Custom Exception for feature vectors whose length does not match the model or vocabulary
    """

    def __init__(self, expected, actual, method_name):
        self.expected = expected
        self.actual = actual
        self.method_name = method_name
        Exception.__init__(self, self.expected, self.actual, self.method_name)

    def __str__(self):
        return f"Calling method {self.method_name}() expected a vector of length {self.expected} got {self.actual}"


class DivergenceException(Exception):
    """
    Custom Exception for gradient based trainers whose weights became non-finite
    """

    def __init__(self, kind, epoch):
        self.kind = kind
        self.epoch = epoch
        Exception.__init__(self, self.kind, self.epoch)

    def __str__(self):
        return f"Training {self.kind} diverged at epoch {self.epoch}: weights are no longer finite"


class DegenerateModelException(Exception):
    """
    Custom Exception for models that cannot serve their purpose, e.g. a zero weight discriminator
    """

    def __init__(self, kind, message):
        self.kind = kind
        self.msg = message
        Exception.__init__(self, self.kind, self.msg)

    def __str__(self):
        return f"Degenerate {self.kind} model: {self.msg}"


def strtobool(val) -> bool:
    """
    Convert a string representation of truth to true (1) or false (0).

    True values are 'y', 'yes', 't', 'true', 'on', and '1'; false values
    are 'n', 'no', 'f', 'false', 'off', and '0'.  Raises ValueError if
    'val' is anything else.
    """
    val = str(val).lower()
    if val in ('y', 'yes', 't', 'true', 'on', '1'):
        return True
    elif val in ('n', 'no', 'f', 'false', 'off', '0'):
        return False
    else:
        raise ValueError("invalid truth value %r" % (val,))


def derive_seed(seed: int, *labels) -> int:
    """
    Derive a child seed from a parent seed and a path of labels.

    master -> repetition -> phase -> sample; a child seed only depends on its own label path,
    so adding a sibling never changes the randomness of another branch.

    :param seed: The parent seed
    :param labels: Any printable labels naming the branch
    :return: 64 bit integer seed
    """
    text = "/".join([str(int(seed) & SEED_MASK)] + [str(label) for label in labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def rng_for(seed: int, *labels) -> np.random.Generator:
    """
    Return a numpy random generator for the branch named by labels
    """
    return np.random.default_rng(derive_seed(seed, *labels))


def percent_count(percent: float, total: int) -> int:
    """
    ceil(percent x total / 100) guarded against floating point noise, e.g. 10% of 300 is 30 not 31
    """
    return int(math.ceil(round(percent * total / 100.0, 9)))


def fraction_count(fraction: float, total: int) -> int:
    """
    Number of items a selection share covers, at least one when the population is not empty
    """
    if total == 0:
        return 0
    return max(1, int(math.ceil(round(fraction * total, 9))))


def sanitize(name) -> str:
    """
    Return a file-name safe version of a dataset or classifier label, used when emitting reports.
    """
    blacklist = ["\\", "/", ":", "*", "?", "\"", "<", ">", "|", "\0", " "]
    name = unicodedata.normalize("NFKD", str(name))
    name = "".join(c if c not in blacklist else "_" for c in name)
    name = "".join(c for c in name if 31 < ord(c))
    name = re.sub(r"_+", "_", name).strip("._")
    if len(name) == 0:
        name = "__"
    return name[:120]


def read_properties(path: str = DEFAULT_CONFIG_PATH) -> configparser.ConfigParser:
    """
    Read a properties (ini) file, a missing file yields an empty configuration

    :param path: location of the properties file
    :return: ConfigParser
    """
    config = configparser.ConfigParser(interpolation=None)
    if path is not None and os.path.isfile(path):
        config.read(path, encoding="utf-8")
        logger.debug(f"Read configuration from {path}")
    elif path is not None and path != DEFAULT_CONFIG_PATH:
        msg = f"Configuration file {path} does not exist"
        logger.error(msg)
        raise RuntimeError(msg)
    return config


def resolve_setting(value, env_name: Optional[str], config: configparser.ConfigParser, section: str, key: str,
                    default=None):
    """
    Find a setting in the method arguments, environment variables or the properties file, in that order.

    :param value: Explicit value passed by the caller, used when not None
    :param env_name: Environment variable consulted next
    :param config: Parsed properties file
    :param section: Section of the properties file
    :param key: Key within the section
    :param default: Fallback when nothing else is set
    :return: The resolved value, as a string unless it came from the caller or the default
    """
    if value is not None:
        return value
    if env_name:
        env_value = os.environ.get(env_name)
        if env_value is not None and env_value != "":
            return env_value
    try:
        return config[section][key]
    except KeyError:
        pass
    return default


def split_list(value) -> list:
    """
    Split a comma or newline separated properties value into its items
    """
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return list(value)
    return [item.strip() for item in re.split(r"[,\n]", str(value)) if item.strip()]


def write_json(document, path) -> None:
    """
    Write a JSON document with sorted keys so repeated runs produce identical bytes
    """
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wt", encoding="utf-8", newline="\n") as fd:
        json.dump(document, fd, indent=2, sort_keys=True)
        fd.write("\n")


def read_json(path):
    with open(path, "rt", encoding="utf-8") as fd:
        return json.load(fd)
