"""
pyEvade dataset module definition

Ingest pre-extracted feature-list records, build the binary feature matrix, split it,
partition it by class and generate synthetic desk-scale datasets.

author:     pyEvade developers
licence:    Apache License 2.0

"""
import json
from typing import Iterable, Generator, Optional

from pyEvade.common import *

logger = logging.getLogger(__name__)

DEFAULT_FEATURE_NAMES = [
    "Landroid/app/WallpaperManager;->clear",
    "Landroid/content/pm/PackageManager;->clearPackagePreferredActivities",
    "Landroid/content/ContentResolver;->getIsSyncable",
    "Landroid/accounts/AccountManager;->peekAuthToken",
    "Landroid/content/ContentResolver;->isSyncPending",
    "Landroid/content/pm/PackageManager;->setApplicationEnabledSetting",
    "Landroid/content/pm/PackageManager;->getPackageSizeInfo",
    "Landroid/content/pm/PackageManager;->getInstalledPackages",
    "Landroid/net/wifi/WifiManager;->isWifiEnabled",
    "Landroid/os/Handler;->sendMessage",
    "Landroid/telephony/SmsManager;->sendDataMessage",
    "Landroid/telephony/gsm/SmsManager;->getDefault",
    "Landroid/hardware/Camera;->open",
    "Landroid/location/LocationManager;->getLastKnownLocation",
    "Ljava/lang/Runtime;->loadLibrary",
    "Landroid/media/MediaRecorder;->setAudioSource",
    "st.brothas.mtgoxwidget.permission.C2D_MESSAGE",
    "st.veezie.full.permission.C2D_MESSAGE",
    "suedtirolnews.app.permission.C2D_MESSAGE",
    "sva.permission.READ_CONTACTS",
    "telecom.mdesk.permission.WRITE_SETTINGS",
    "com.sec.permission.OTG_CHARGE_BLOCK",
    "com.sec.enterprise.knox.permission.KNOX_RESTRICTION",
    "com.tencent.mm.permission.MM_MESSAGE",
    "com.telekom.tolino.ACCESS_DATA",
    "com.airpush.android.PushServiceStart58925",
    "com.airpush.android.PushServiceStart52518",
    "com.airpush.android.PushServiceStart12256",
    "android.intent.action.ADS",
    "android.intent.action.payment",
    "android.search.action.GLOBAL_SEARCH",
    "android.nfc.action.TAG_DISCOVERED",
    "com.android.camera.action.CROP",
    "com.amazon.INSTALL_REFERRER",
    "ReminderReceiver",
    "widget_pre_mini",
]


class FeatureVocabulary:
    """
    Ordered feature names, the column index of a name is its position in the list
    """

    def __init__(self, names: Iterable[str]):
        self.names = list(names)
        if len(self.names) == 0:
            msg = "A feature vocabulary needs at least one feature"
            logger.error(msg)
            raise ValueError(msg)
        self.index = {name: i for i, name in enumerate(self.names)}
        if len(self.index) != len(self.names):
            msg = "Feature vocabulary names must be unique"
            logger.error(msg)
            raise ValueError(msg)
        self.m = len(self.names)

    def __len__(self):
        return self.m

    def __contains__(self, name):
        return name in self.index

    def __eq__(self, other):
        return isinstance(other, FeatureVocabulary) and self.names == other.names

    def __hash__(self):
        return hash(tuple(self.names))

    def __str__(self):
        return f"FeatureVocabulary(m={self.m})"

    def __repr__(self):
        return self.__str__()


class Sample:
    """
    One labelled binary feature vector
    """

    def __init__(self, x: np.ndarray, y: int, id: str):
        self.x = x
        self.y = int(y)
        self.id = id

    def __str__(self):
        return f"""
            Sample:     {self.id}
            Label:      {"malware" if self.y == MALWARE else "benign"}
            Features:   {int(self.x.sum())} of {len(self.x)} set
            """

    def __repr__(self):
        return self.__str__()


class LoadReport:
    """
    Bookkeeping for a dataset read from disk
    """

    def __init__(self, path: str, records: int, unknown_features: int, unknown_names: set):
        self.path = path
        self.records = records
        self.unknown_features = unknown_features
        self.unknown_names = unknown_names

    def __str__(self):
        return f"""
            Path:               {self.path}
            Records:            {self.records}
            Unknown Features:   {self.unknown_features} ({len(self.unknown_names)} distinct)
            """

    def __repr__(self):
        return self.__str__()


class SignalMask:
    """
    Ground-truth discriminative columns of a generated dataset
    """

    def __init__(self, benign: np.ndarray, malware: np.ndarray):
        self.benign = np.asarray(benign, dtype=np.int64)
        self.malware = np.asarray(malware, dtype=np.int64)

    @property
    def all(self) -> np.ndarray:
        return np.sort(np.concatenate([self.benign, self.malware]))

    def __str__(self):
        return f"SignalMask(benign={len(self.benign)}, malware={len(self.malware)})"

    def __repr__(self):
        return self.__str__()


class Dataset:
    """
    An immutable labelled binary feature matrix

    X is an n x m uint8 matrix, y the label vector and ids the record identifiers in row order.
    """

    def __init__(self, vocab: FeatureVocabulary, X, y, ids: list, report: Optional[LoadReport] = None,
                 signal: Optional[SignalMask] = None):
        X = np.array(X, dtype=np.uint8)
        if X.ndim != 2:
            X = X.reshape(-1, vocab.m)
        y = np.array(y, dtype=np.int64).reshape(-1)
        if X.shape[1] != vocab.m:
            raise DimensionMismatchException(vocab.m, X.shape[1], "Dataset")
        if X.shape[0] != len(y) or len(y) != len(ids):
            msg = f"Dataset rows ({X.shape[0]}), labels ({len(y)}) and ids ({len(ids)}) disagree"
            logger.error(msg)
            raise ValueError(msg)
        if X.size and X.max() > 1:
            msg = "Dataset feature values must be 0 or 1"
            logger.error(msg)
            raise ValueError(msg)
        if len(y) and not np.isin(y, (BENIGN, MALWARE)).all():
            msg = "Dataset labels must be 0 (benign) or 1 (malware)"
            logger.error(msg)
            raise ValueError(msg)
        X.setflags(write=False)
        y.setflags(write=False)
        self.vocab = vocab
        self.X = X
        self.y = y
        self.ids = list(ids)
        self.report = report
        self.signal = signal

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def m(self) -> int:
        return self.vocab.m

    @property
    def samples(self) -> list:
        return [Sample(self.X[i], self.y[i], self.ids[i]) for i in range(self.n)]

    def sample(self, i: int) -> Sample:
        return Sample(self.X[i], self.y[i], self.ids[i])

    def __len__(self):
        return self.n

    def __iter__(self) -> Generator:
        for i in range(self.n):
            yield self.sample(i)

    def malware_fraction(self) -> float:
        if self.n == 0:
            return 0.0
        return float(np.mean(self.y == MALWARE))

    def has_both_classes(self) -> bool:
        return bool(np.any(self.y == BENIGN) and np.any(self.y == MALWARE))

    def subset(self, rows) -> 'Dataset':
        """
        Return the rows selected by an index array or boolean mask, in the given order
        """
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        rows = rows.astype(np.int64)
        return Dataset(self.vocab, self.X[rows], self.y[rows], [self.ids[i] for i in rows])

    def with_rows(self, X, y, ids) -> 'Dataset':
        """
        Return a dataset over the same vocabulary with new rows
        """
        return Dataset(self.vocab, X, y, ids)

    def concat(self, other: 'Dataset') -> 'Dataset':
        if other.vocab != self.vocab:
            raise DimensionMismatchException(self.m, other.m, "concat")
        X = np.vstack([self.X, other.X]) if other.n else self.X.copy()
        return Dataset(self.vocab, X, np.concatenate([self.y, other.y]), self.ids + other.ids)

    def restrict(self, columns) -> 'Dataset':
        """
        Keep only the listed feature columns, the vocabulary shrinks accordingly
        """
        columns = np.asarray(columns, dtype=np.int64)
        vocab = FeatureVocabulary([self.vocab.names[j] for j in columns])
        return Dataset(vocab, self.X[:, columns], self.y, self.ids)

    def __str__(self):
        return f"""
            Dataset:    {self.n} samples, {self.m} features
            Malware:    {int(np.sum(self.y == MALWARE))}
            Benign:     {int(np.sum(self.y == BENIGN))}
            """

    def __repr__(self):
        return self.__str__()


class DatasetSplit:
    """
    Disjoint train, validation and test parts of one dataset
    """

    def __init__(self, train: Dataset, validation: Dataset, test: Dataset, seed: int):
        self.train = train
        self.validation = validation
        self.test = test
        self.seed = seed

    def __str__(self):
        return f"DatasetSplit(train={self.train.n}, validation={self.validation.n}, test={self.test.n}, seed={self.seed})"

    def __repr__(self):
        return self.__str__()


class ClassPartition:
    def __init__(self, benign: Dataset, malware: Dataset):
        self.benign = benign
        self.malware = malware

    def __str__(self):
        return f"ClassPartition(benign={self.benign.n}, malware={self.malware.n})"

    def __repr__(self):
        return self.__str__()


class SyntheticSpec:
    """
    Shape of a generated dataset

    Half of the signal features (rounded down) indicate benign samples, the rest indicate malware.
    """

    def __init__(self, n: int = 2000, m: int = 300, n_signal: int = 40, flip_noise: float = 0.05,
                 malware_fraction: float = 0.5, vocab_seed_names: Optional[list] = None):
        self.n = int(n)
        self.m = int(m)
        self.n_signal = int(n_signal)
        self.flip_noise = float(flip_noise)
        self.malware_fraction = float(malware_fraction)
        self.vocab_seed_names = vocab_seed_names
        self.validate()

    def validate(self):
        if self.m < 1 or self.n < 1:
            msg = "Synthetic datasets need at least one sample and one feature"
        elif not 0 <= self.n_signal <= self.m:
            msg = f"n_signal ({self.n_signal}) must lie between 0 and m ({self.m})"
        elif not 0.0 <= self.flip_noise <= 0.5:
            msg = f"flip_noise ({self.flip_noise}) must lie in [0, 0.5]"
        elif not 0.0 < self.malware_fraction < 1.0:
            msg = f"malware_fraction ({self.malware_fraction}) must lie in (0, 1)"
        else:
            return
        logger.error(msg)
        raise ValueError(msg)

    def __str__(self):
        return f"""
            Samples:            {self.n}
            Features:           {self.m}
            Signal Features:    {self.n_signal}
            Flip Noise:         {self.flip_noise}
            Malware Fraction:   {self.malware_fraction}
            """

    def __repr__(self):
        return self.__str__()


def vectorize(vocab: FeatureVocabulary, features: Iterable[str]) -> np.ndarray:
    """
    Turn a list of feature names into a bit-vector, names outside the vocabulary are ignored
    """
    x = np.zeros(vocab.m, dtype=np.uint8)
    for name in features:
        j = vocab.index.get(name)
        if j is not None:
            x[j] = 1
    return x


def devectorize(vocab: FeatureVocabulary, x) -> set:
    """
    The names of the features set in x
    """
    x = np.asarray(x)
    if len(x) != vocab.m:
        raise DimensionMismatchException(vocab.m, len(x), "devectorize")
    return {vocab.names[j] for j in np.flatnonzero(x)}


def load_vocabulary(path: str) -> FeatureVocabulary:
    """
    Read a vocabulary file, one feature name per line, line order is column order

    :param path: vocabulary file
    :return: FeatureVocabulary
    """
    names = []
    seen = set()
    with open(path, "rt", encoding="utf-8") as fd:
        for line_number, line in enumerate(fd, start=1):
            name = line.rstrip("\r\n")
            if name == "":
                raise DatasetFormatException(path, line_number, "empty feature name")
            if name in seen:
                raise DatasetFormatException(path, line_number, f"duplicate feature name {name}")
            seen.add(name)
            names.append(name)
    if not names:
        raise DatasetFormatException(path, None, "vocabulary file is empty")
    logger.info(f"Read {len(names)} feature names from {path}")
    return FeatureVocabulary(names)


def save_vocabulary(vocab: FeatureVocabulary, path: str):
    with open(path, "wt", encoding="utf-8", newline="\n") as fd:
        for name in vocab.names:
            fd.write(name)
            fd.write("\n")


def _parse_record(path, line_number, line) -> tuple:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise DatasetFormatException(path, line_number, f"invalid JSON ({e.msg})")
    if not isinstance(record, dict):
        raise DatasetFormatException(path, line_number, "record is not a JSON object")
    for key in ("id", "label", "features"):
        if key not in record:
            raise DatasetFormatException(path, line_number, f"missing field '{key}'")
    label = record["label"]
    if isinstance(label, bool) or label not in (BENIGN, MALWARE):
        raise DatasetFormatException(path, line_number, f"label {label!r} is not 0 or 1")
    features = record["features"]
    if not isinstance(features, list) or not all(isinstance(f, str) for f in features):
        raise DatasetFormatException(path, line_number, "features must be a list of strings")
    return str(record["id"]), int(label), features


def load_dataset(path: str, vocab: Optional[FeatureVocabulary] = None) -> Dataset:
    """
    Read a JSON-lines dataset file

    Each line holds {"id": <string>, "label": 0|1, "features": [<string>, ...]}.
    Without a vocabulary one is built from the sorted union of the observed feature names,
    with a vocabulary unknown names are dropped and counted in the LoadReport.

    :param path: dataset file
    :param vocab: optional fixed vocabulary
    :return: Dataset
    """
    records = []
    ids = set()
    with open(path, "rt", encoding="utf-8") as fd:
        for line_number, line in enumerate(fd, start=1):
            if line.strip() == "":
                continue
            record = _parse_record(path, line_number, line)
            if record[0] in ids:
                raise DatasetFormatException(path, line_number, f"duplicate record id {record[0]}")
            ids.add(record[0])
            records.append(record)
    if not records:
        raise DatasetFormatException(path, None, "dataset file contains no records")

    if vocab is None:
        observed = set()
        for _, _, features in records:
            observed.update(features)
        if not observed:
            raise DatasetFormatException(path, None, "no feature names observed, cannot build a vocabulary")
        vocab = FeatureVocabulary(sorted(observed))

    X = np.zeros((len(records), vocab.m), dtype=np.uint8)
    unknown_features = 0
    unknown_names = set()
    for row, (_, _, features) in enumerate(records):
        for name in features:
            j = vocab.index.get(name)
            if j is None:
                unknown_features += 1
                unknown_names.add(name)
            else:
                X[row, j] = 1
    if unknown_features:
        logger.warning(f"Dropped {unknown_features} occurrences of {len(unknown_names)} unknown features from {path}")

    report = LoadReport(path, len(records), unknown_features, unknown_names)
    logger.info(f"Loaded {len(records)} records with {vocab.m} features from {path}")
    return Dataset(vocab, X, [r[1] for r in records], [r[0] for r in records], report=report)


def save_dataset(d: Dataset, path: str):
    """
    Write a dataset in the JSON-lines record format, features are emitted by name
    """
    with open(path, "wt", encoding="utf-8", newline="\n") as fd:
        for i in range(d.n):
            features = [d.vocab.names[j] for j in np.flatnonzero(d.X[i])]
            fd.write(json.dumps({"id": d.ids[i], "label": int(d.y[i]), "features": features}))
            fd.write("\n")
    logger.info(f"Wrote {d.n} records to {path}")


def partition_by_class(d: Dataset) -> ClassPartition:
    return ClassPartition(benign=d.subset(d.y == BENIGN), malware=d.subset(d.y == MALWARE))


def _split_sizes(count: int) -> tuple:
    # at least one member of the class in each part; for small classes this outweighs 60/20/20
    validation = max(1, int(math.floor(0.2 * count + 0.5)))
    test = max(1, int(math.floor(0.2 * count + 0.5)))
    return count - validation - test, validation, test


def split_dataset(d: Dataset, seed: int) -> DatasetSplit:
    """
    Stratified 60/20/20 train, validation and test split

    Each class is shuffled with its own derived seed and cut into parts independently, so every
    part keeps the class ratio of the source to within one sample.

    :param d: The source dataset
    :param seed: split seed
    :return: DatasetSplit
    """
    if d.n < 5:
        msg = f"Splitting needs at least 5 samples, got {d.n}"
        logger.error(msg)
        raise ValueError(msg)
    parts = ([], [], [])
    for label in (BENIGN, MALWARE):
        rows = np.flatnonzero(d.y == label)
        if len(rows) < 3:
            msg = f"Cannot stratify: class {label} has {len(rows)} members, at least 3 are needed"
            logger.error(msg)
            raise ValueError(msg)
        rows = rng_for(seed, "split", label).permutation(rows)
        n_train, n_validation, _ = _split_sizes(len(rows))
        parts[0].append(rows[:n_train])
        parts[1].append(rows[n_train:n_train + n_validation])
        parts[2].append(rows[n_train + n_validation:])
    train, validation, test = (d.subset(np.sort(np.concatenate(p))) for p in parts)
    logger.debug(f"Split {d.n} samples into {train.n}/{validation.n}/{test.n} with seed {seed}")
    return DatasetSplit(train, validation, test, seed)


def kfold_splits(d: Dataset, k: int = 10, seed: int = 0) -> Generator:
    """
    Stratified k-fold cross validation

    :return: generator of (train, test) dataset pairs, one per fold
    """
    if k < 2:
        msg = f"k-fold cross validation needs k >= 2, got {k}"
        logger.error(msg)
        raise ValueError(msg)
    if d.n < k:
        msg = f"Cannot cut {d.n} samples into {k} folds"
        logger.error(msg)
        raise ValueError(msg)
    fold_of = np.zeros(d.n, dtype=np.int64)
    offset = 0
    for label in (BENIGN, MALWARE):
        rows = rng_for(seed, "kfold", label).permutation(np.flatnonzero(d.y == label))
        fold_of[rows] = (np.arange(len(rows)) + offset) % k
        offset += len(rows)
    for fold in range(k):
        yield d.subset(fold_of != fold), d.subset(fold_of == fold)


def _synthetic_names(spec: SyntheticSpec) -> list:
    seed_names = spec.vocab_seed_names if spec.vocab_seed_names is not None else DEFAULT_FEATURE_NAMES
    names = []
    seen = set()
    for name in seed_names:
        if name not in seen:
            seen.add(name)
            names.append(name)
        if len(names) == spec.m:
            return names
    i = 0
    while len(names) < spec.m:
        name = f"feature.synthetic.{i:05d}"
        if name not in seen:
            seen.add(name)
            names.append(name)
        i += 1
    return names


def generate_synthetic(spec: SyntheticSpec, seed: int) -> Dataset:
    """
    Generate a desk-scale dataset with a known signal

    Benign-indicative signal features are set in the benign template and clear in the malware
    template, malware-indicative ones the other way round. Every signal bit is then flipped with
    probability flip_noise. Noise features are drawn with per-feature base rates in [0.02, 0.30]
    shared by both classes. The ground-truth mask is returned as Dataset.signal.

    :param spec: SyntheticSpec
    :param seed: generation seed
    :return: Dataset
    """
    spec.validate()
    rng = rng_for(seed, "synthetic")
    vocab = FeatureVocabulary(sorted(_synthetic_names(spec)))

    signal = rng.choice(spec.m, size=spec.n_signal, replace=False)
    n_benign_signal = spec.n_signal // 2
    mask = SignalMask(np.sort(signal[:n_benign_signal]), np.sort(signal[n_benign_signal:]))

    n_malware = int(math.floor(spec.n * spec.malware_fraction + 0.5))
    n_malware = min(max(n_malware, 1), spec.n - 1) if spec.n > 1 else n_malware
    y = np.zeros(spec.n, dtype=np.int64)
    y[:n_malware] = MALWARE
    y = rng.permutation(y)

    base_rate = rng.uniform(0.02, 0.30, size=spec.m)
    X = (rng.random((spec.n, spec.m)) < base_rate).astype(np.uint8)

    template = np.zeros((2, spec.m), dtype=np.uint8)
    template[BENIGN, mask.benign] = 1
    template[MALWARE, mask.malware] = 1
    signal_columns = mask.all
    block = template[y][:, signal_columns]
    if spec.flip_noise > 0:
        flips = rng.random(block.shape) < spec.flip_noise
        block = np.where(flips, 1 - block, block).astype(np.uint8)
    X[:, signal_columns] = block

    ids = [f"syn-{i:06d}" for i in range(spec.n)]
    logger.info(f"Generated synthetic dataset n={spec.n} m={spec.m} signal={spec.n_signal} seed={seed}")
    return Dataset(vocab, X, y, ids, signal=mask)
