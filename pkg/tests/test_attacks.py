import configparser

import numpy as np
import pytest
from pyEvade import *
from pyEvade.attackAPI import aco_accepts, jsma_select, jsma_softmax, knn_variant, walk_candidates, walk_shared
from pyEvade.modelAPI import init_mlp


class BothFeaturesBenign(ClassifierHandle):
    """
    Predicts benign exactly when the two given features are set
    """

    def __init__(self, m, first, second):
        super().__init__(ModelKind.TREE, m)
        self.first = first
        self.second = second

    def _scores(self, X):
        return 1.0 - (X[:, self.first] & X[:, self.second]).astype(np.float64)


def two_feature_tree() -> TreeModel:
    # benign only when features 0 and 2 are both set
    tree = DecisionTree(feature=[0, -1, 2, -1, -1], left=[1, -1, 3, -1, -1], right=[2, -1, 4, -1, -1],
                        value=[0.5, 1.0, 0.5, 1.0, 0.0], n_samples=[4, 2, 2, 1, 1], importance=[0.0, 0.0, 0.0])
    return TreeModel(tree, 3)


@pytest.fixture
def setup_data():
    print("\nSetting up resources...")
    d = generate_synthetic(SyntheticSpec(n=400, m=60, n_signal=12, flip_noise=0.05), seed=17)
    split = split_dataset(d, seed=2)
    top = select_top(rank_features(split.train, n_trees=20, seed=3), 40)
    train = split.train.restrict(top.order)
    test = split.test.restrict(top.order)
    ranking = to_subspace(top)
    model = train_random_forest(train, TrainConfig(n_trees=15, seed=5))
    ctx = AttackContext(train, test, model)
    yield {"train": train, "test": test, "ranking": ranking, "model": model, "ctx": ctx}
    print("\nTearing down resources...")


def assert_additions_only(advset, source):
    rows = {sid: i for i, sid in enumerate(source.ids)}
    for s in advset:
        x = source.X[rows[s.original_id]]
        assert np.all(s.x_star >= x)
        assert sorted(np.flatnonzero(s.x_star != x).tolist()) == sorted(s.delta)
        assert all(x[j] == 0 for j in s.delta)


def test_flip_until_evasion_stops_at_first_evasion():
    model = two_feature_tree()
    sample = Sample(np.array([0, 0, 0], dtype=np.uint8), MALWARE, "m-1")
    result = flip_until_evasion(sample, [1, 0, 2], model)
    assert result.delta == [1, 0, 2]
    assert result.evaded
    result = flip_until_evasion(sample, [0, 2, 1], model)
    assert result.delta == [0, 2]
    assert list(result.x_star) == [1, 0, 1]
    assert list(sample.x) == [0, 0, 0]


def test_flip_until_evasion_edge_cases():
    model = two_feature_tree()
    evading = Sample(np.array([1, 0, 1], dtype=np.uint8), MALWARE, "m-2")
    result = flip_until_evasion(evading, [1], model)
    assert result.evaded
    assert result.delta == []
    partial = Sample(np.array([1, 0, 0], dtype=np.uint8), MALWARE, "m-3")
    result = flip_until_evasion(partial, [0, 2], model)
    assert result.delta == [2]
    assert result.evaded
    result = flip_until_evasion(partial, [1], model)
    assert not result.evaded
    assert result.delta == [1]
    assert list(result.x_star) == [1, 1, 0]
    with pytest.raises(DimensionMismatchException):
        flip_until_evasion(Sample(np.zeros(4, dtype=np.uint8), MALWARE, "m-4"), [0], model)


def test_walk_candidates_matches_sequential_walk():
    model = two_feature_tree()
    samples = [Sample(np.array(x, dtype=np.uint8), MALWARE, f"m-{i}")
               for i, x in enumerate([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 0, 1]])]
    candidates = [[2, 1, 0], [1, 2], [0, 1], [0]]
    batched = walk_candidates(samples, candidates, model, BENIGN)
    for sample, c, result in zip(samples, candidates, batched):
        single = flip_until_evasion(sample, c, model)
        assert result.delta == single.delta
        assert result.evaded == single.evaded
        assert np.array_equal(result.x_star, single.x_star)


def test_shared_walk_matches_per_sample_walk(setup_data):
    model = two_feature_tree()
    toy = [Sample(np.array(x, dtype=np.uint8), MALWARE, f"m-{i}")
           for i, x in enumerate([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 0, 1], [0, 1, 1]])]
    for candidates in ([2, 1, 0], [1, 0, 2], [0], [1]):
        for shared, sample in zip(walk_shared(toy, candidates, model, BENIGN), toy):
            single = flip_until_evasion(sample, candidates, model)
            assert shared.delta == single.delta
            assert shared.evaded == single.evaded
            assert np.array_equal(shared.x_star, single.x_star)

    samples = list(setup_data["ctx"].target_malware())
    for lam in (5, 20, 100):
        candidates = lambda_features(setup_data["ranking"], lam, LambdaMode.RANDOM, seed=lam).indices
        shared = walk_shared(samples, candidates, setup_data["model"], BENIGN)
        per_sample = walk_candidates(samples, [candidates] * len(samples), setup_data["model"], BENIGN)
        assert [s.delta for s in shared] == [s.delta for s in per_sample]
        assert [s.evaded for s in shared] == [s.evaded for s in per_sample]
        assert all(np.array_equal(a.x_star, b.x_star) for a, b in zip(shared, per_sample))
    assert walk_shared([], [0, 1], model, BENIGN) == []


@pytest.mark.parametrize("scenario", [Scenario.TRIVIAL, Scenario.DISTRIBUTION, Scenario.KNN, Scenario.LR])
def test_attacks_only_add_features(setup_data, scenario):
    cfg = AttackConfig(lambda_percent=20, k=5, malware_fraction=0.2, seed=1)
    advset = run_attack(scenario.value, setup_data["ctx"], cfg, setup_data["ranking"])
    assert len(advset) > 0
    assert advset.scenario == scenario
    assert_additions_only(advset, setup_data["test"])
    for s in advset:
        assert s.evaded == (setup_data["model"].predict(s.x_star) == BENIGN)


def test_lambda_attacks_stay_inside_the_lambda_set(setup_data):
    cfg = AttackConfig(lambda_percent=10, seed=4)
    for scenario in (Scenario.TRIVIAL, Scenario.DISTRIBUTION, Scenario.LR):
        advset = run_attack(scenario, setup_data["ctx"], cfg, setup_data["ranking"])
        allowed = set(advset.lambda_set.indices.tolist())
        assert len(allowed) == percent_count(10, 40)
        for s in advset:
            assert set(s.delta) <= allowed


def test_trivial_evasion_grows_with_lambda(setup_data):
    rates = []
    for lam in (5, 10, 20, 50, 100):
        advset = attack_trivial(setup_data["ctx"], AttackConfig(lambda_percent=lam, seed=9), setup_data["ranking"])
        rates.append(advset.evasion_rate())
    assert all(a <= b for a, b in zip(rates, rates[1:]))


def test_attacks_are_deterministic(setup_data):
    cfg = AttackConfig(lambda_percent=20, k=5, malware_fraction=0.2, seed=6)
    for scenario in (Scenario.TRIVIAL, Scenario.KNN, Scenario.LR):
        a = run_attack(scenario, setup_data["ctx"], cfg, setup_data["ranking"])
        b = run_attack(scenario, setup_data["ctx"], cfg, setup_data["ranking"])
        assert [s.id for s in a] == [s.id for s in b]
        assert [s.delta for s in a] == [s.delta for s in b]


def test_knn_variants(setup_data):
    cfg = AttackConfig(lambda_percent=25, k=4, malware_fraction=0.3, seed=2)
    advset = attack_knn(setup_data["ctx"], cfg, setup_data["ranking"])
    malware = partition_by_class(setup_data["test"]).malware
    selected = fraction_count(0.3, malware.n)
    assert len(advset) == 4 * selected
    assert len({s.original_id for s in advset}) == selected
    allowed = set(setup_data["ranking"].order[:percent_count(25, 40)].tolist())
    for s in advset:
        assert set(s.delta) <= allowed
        assert 0 <= s.variant < 4
    assert list(knn_variant([1, 0, 0, 0], [0, 1, 1, 1], [1, 1, 0, 1])) == [1, 1, 0, 1]


def test_knn_needs_enough_benign_neighbours(setup_data):
    cfg = AttackConfig(k=10_000)
    with pytest.raises(ValueError):
        attack_knn(setup_data["ctx"], cfg, setup_data["ranking"])


def test_lr_attack_selects_nearest_to_boundary(setup_data):
    cfg = AttackConfig(lambda_percent=10, malware_fraction=0.25, seed=3)
    ctx = setup_data["ctx"]
    advset = attack_lr(ctx, cfg, setup_data["ranking"])
    malware = partition_by_class(setup_data["test"]).malware
    assert len(advset) == fraction_count(0.25, malware.n)
    assert ctx.discriminator is not None
    distances = dict(zip(malware.ids, ctx.discriminator.distance(malware.X)))
    chosen = max(distances[s.original_id] for s in advset)
    skipped = [dist for sid, dist in distances.items() if sid not in {s.original_id for s in advset}]
    assert all(chosen <= dist for dist in skipped)


def test_aco_accepts():
    accepted = aco_accepts(2.0, np.array([1.5, -1.0, -2.5, 3.0]), threshold=2.0, norm=1.0)
    assert list(accepted) == [True, True, False, False]


def test_aco_finds_the_two_feature_conjunction():
    model = BothFeaturesBenign(10, 3, 7)
    discriminator = LinearDiscriminator(-np.ones(10), 5.0)
    sample = Sample(np.zeros(10, dtype=np.uint8), MALWARE, "m-aco")
    successes = 0
    for seed in range(10):
        result = aco_search(sample, model, discriminator, np.arange(10), np.full(10, 0.5), AcoParams(),
                            np.random.default_rng(seed))
        if result.evaded and {3, 7} <= set(result.delta):
            successes += 1
            assert result.x_star[3] == 1
            assert result.x_star[7] == 1
    assert successes >= 9


def test_aco_returns_original_when_nothing_is_accepted():
    model = BothFeaturesBenign(10, 3, 7)
    discriminator = LinearDiscriminator(np.ones(10), 5.0)
    sample = Sample(np.zeros(10, dtype=np.uint8), MALWARE, "m-aco")
    result = aco_search(sample, model, discriminator, np.arange(10), np.full(10, 0.5), AcoParams(),
                        np.random.default_rng(0))
    assert not result.evaded
    assert result.delta == []
    assert np.array_equal(result.x_star, sample.x)


def test_aco_attack_on_dataset(setup_data):
    cfg = AttackConfig(malware_fraction=0.2, seed=8, aco=AcoParams(max_iter=40, n_ants=8))
    advset = attack_aco(setup_data["ctx"], cfg, setup_data["ranking"])
    malware = partition_by_class(setup_data["test"]).malware
    assert len(advset) == fraction_count(0.2, malware.n)
    assert_additions_only(advset, setup_data["test"])


def test_zero_discriminator_is_degenerate(setup_data):
    ctx = AttackContext(setup_data["train"], setup_data["test"], setup_data["model"],
                        discriminator=LinearDiscriminator(np.zeros(40), 1.0))
    with pytest.raises(DegenerateModelException):
        attack_lr(ctx, AttackConfig(), setup_data["ranking"])


def test_jsma_selection():
    jacobian = np.array([[0.1, 0.5, 0.5, -0.2], [-0.1, -0.5, -0.5, 0.2]])
    assert jsma_select_index(jacobian, np.array([0, 1, 0, 0])) == 2
    assert jsma_select_index(jacobian, np.array([0, 0, 0, 0])) == 1
    index, all_negative = jsma_select(np.array([[-0.3, -0.1, -0.2], [0.3, 0.1, 0.2]]), np.zeros(3))
    assert index == 1
    assert all_negative
    with pytest.raises(ValueError):
        jsma_select_index(jacobian, np.ones(4))
    assert np.allclose(jsma_softmax([1000.0, 1000.0]), [0.5, 0.5])


def test_zero_weight_network_has_zero_jacobian():
    mlp = init_mlp(6, hidden_units=4)
    zeroed = MlpModel([np.zeros_like(w) for w in mlp.weights], mlp.biases)
    jacobian = jsma_jacobian(zeroed, np.ones(6))
    assert jacobian.shape == (2, 6)
    assert np.array_equal(jacobian, np.zeros((2, 6)))


def test_jsma_attack(setup_data):
    mlp = train_mlp(setup_data["train"], TrainConfig(epochs=20, hidden_units=16, batch_size=16, seed=1))
    ctx = AttackContext(setup_data["train"], setup_data["test"], mlp)
    advset = attack_jsma(ctx, AttackConfig(jsma_max_mods=5))
    assert len(advset) == partition_by_class(setup_data["test"]).malware.n
    assert_additions_only(advset, setup_data["test"])
    for s in advset:
        assert len(s.delta) <= 5
        if not s.evaded:
            assert len(s.delta) == 5 or s.x_star.all()
    with pytest.raises(ValueError):
        attack_jsma(setup_data["ctx"], AttackConfig())


def test_poison_dataset_replaces_attacked_samples(setup_data):
    cfg = AttackConfig(lambda_percent=20, k=3, malware_fraction=0.2, seed=1)
    advset = attack_knn(setup_data["ctx"], cfg, setup_data["ranking"])
    poisoned = poison_dataset(setup_data["test"], advset)
    attacked = {s.original_id for s in advset}
    assert poisoned.n == setup_data["test"].n - len(attacked) + len(advset)
    assert not attacked & set(poisoned.ids)
    assert all(poisoned.y[poisoned.ids.index(s.id)] == MALWARE for s in advset)


def test_objective_and_evasion_rate(setup_data):
    advset = attack_trivial(setup_data["ctx"], AttackConfig(lambda_percent=30, seed=2), setup_data["ranking"])
    assert evaluate_objective(advset, setup_data["model"]) == pytest.approx(advset.evasion_rate())
    empty = AdversarialSet([], Scenario.TRIVIAL)
    assert evasion_rate(empty) is None
    with pytest.raises(ValueError):
        evaluate_objective(empty, setup_data["model"])


def test_adversarial_file_round_trip(setup_data, tmp_path):
    advset = attack_trivial(setup_data["ctx"], AttackConfig(lambda_percent=30, seed=2), setup_data["ranking"])
    path = str(tmp_path / "adv.jsonl")
    save_adversarial(advset, path)
    again = load_adversarial(path, setup_data["test"])
    assert again.scenario == Scenario.TRIVIAL
    assert [s.id for s in again] == [s.id for s in advset]
    for a, b in zip(again, advset):
        assert a.delta == b.delta
        assert a.evaded == b.evaded
        assert np.array_equal(a.x_star, b.x_star)
    broken = tmp_path / "broken.jsonl"
    broken.write_text('{"original_id": "nope", "flipped": [], "evaded": false}\n')
    with pytest.raises(DatasetFormatException):
        load_adversarial(str(broken), setup_data["test"])


def test_attack_config_from_properties():
    config = configparser.ConfigParser()
    config.read_string("[attacks]\nk = 4\nlambda_percent = 5\naco_n_ants = 7\naco_evaporation = 0.2\n")
    cfg = AttackConfig.from_properties(config, seed=3)
    assert cfg.k == 4
    assert cfg.lambda_percent == 5.0
    assert cfg.aco.n_ants == 7
    assert cfg.aco.evaporation == 0.2
    assert cfg.seed == 3
    with pytest.raises(ValueError):
        AcoParams(evaporation=1.5)
    with pytest.raises(ValueError):
        AttackConfig(malware_fraction=0.0)
