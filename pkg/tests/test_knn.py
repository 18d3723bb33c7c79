import numpy as np
import pytest

from ufd import (
    Label,
    build_bank,
    cosine_distance,
    distance_eval_count,
    knn_batch,
    knn_score,
    rank_by_distance,
    reset_distance_eval_count,
)
from ufd.errors import (
    DimensionMismatch,
    EmptyLabelSide,
    KTooLarge,
    NonFiniteValue,
    ZeroNormVector,
)


# ------------------------------------------------------------- oracle
# brute force on raw float64 vectors: no unit-vector cache, no partition,
# sorts every distance. Deliberately a different route than the library.

def oracle_cosine(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return 1.0 - (a @ b) / (np.sqrt(a @ a) * np.sqrt(b @ b))


def oracle_knn(query, bank, k):
    d_by_side = {0: [], 1: []}
    for i in range(len(bank)):
        d = oracle_cosine(query, bank.vectors[i])
        d_by_side[int(bank.labels[i])].append(d)
    d_real = float(np.mean(sorted(d_by_side[0])[:k]))
    d_fake = float(np.mean(sorted(d_by_side[1])[:k]))
    score = d_real - d_fake
    return score, (1 if score > 0 else 0), d_real, d_fake


def random_bank(rng, n, dim):
    vecs = rng.normal(size=(n, dim))
    labels = rng.integers(0, 2, size=n)
    labels[0], labels[1] = 0, 1  # both sides present
    return build_bank([(vecs[i], int(labels[i])) for i in range(n)], dim)


# ------------------------------------------------------------- cosine

def test_cosine_trivial_cases():
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.normal(size=8)
        assert cosine_distance(x, x) == pytest.approx(0.0, abs=1e-12)
    assert cosine_distance([1, 0], [0, 1]) == 1.0
    assert cosine_distance([1, 1], [-1, -1]) == pytest.approx(2.0, abs=1e-12)


def test_cosine_symmetry_and_scale_invariance():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a, b = rng.normal(size=(2, 6))
        c = float(rng.uniform(0.01, 100))
        assert cosine_distance(a, b) == cosine_distance(b, a)
        assert abs(cosine_distance(c * a, b) - cosine_distance(a, b)) < 1e-6


def test_cosine_errors():
    with pytest.raises(DimensionMismatch):
        cosine_distance([1, 2], [1, 2, 3])
    with pytest.raises(ZeroNormVector):
        cosine_distance([0, 0], [1, 0])


# ------------------------------------------------------------- knn rule

def test_exact_match_membership():
    bank = build_bank(
        [([1, 0, 0], "real"), ([0.9, 0.1, 0], "real"),
         ([0, 1, 0], "fake"), ([0, 0.9, 0.3], "fake")], 3)
    p = knn_score([0, 1, 0], bank, k=1)
    assert p.d_fake_k == pytest.approx(0.0, abs=1e-6)
    assert p.d_fake_k < p.d_real_k
    assert p.decision == Label.FAKE


def test_symmetric_bank_ties_go_real():
    rng = np.random.default_rng(2)
    vecs = rng.normal(size=(10, 5))
    records = [(v, "real") for v in vecs] + [(v, "fake") for v in vecs]
    bank = build_bank(records, 5)
    queries = rng.normal(size=(20, 5))
    for p in knn_batch(queries, bank, k=3):
        assert p.score_fake == 0.0
        assert p.decision == Label.REAL


def test_score_is_margin_and_bounds():
    rng = np.random.default_rng(3)
    bank = random_bank(rng, 50, 6)
    for p in knn_batch(rng.normal(size=(40, 6)), bank, k=5):
        assert p.score_fake == p.d_real_k - p.d_fake_k
        assert 0.0 <= p.d_real_k <= 2.0 and 0.0 <= p.d_fake_k <= 2.0
        assert (p.decision == Label.FAKE) == (p.score_fake > 0.0)


def test_oracle_equivalence_small():
    """N=200, D=8, 100 queries, k in {1,3,5,9} vs the sort-based oracle."""
    rng = np.random.default_rng(4)
    bank = random_bank(rng, 200, 8)
    queries = rng.normal(size=(100, 8))
    for k in (1, 3, 5, 9):
        preds = knn_batch(queries, bank, k)
        for q, p in zip(queries, preds):
            score, dec, d_real, d_fake = oracle_knn(q, bank, k)
            assert abs(p.d_real_k - d_real) < 1e-6
            assert abs(p.d_fake_k - d_fake) < 1e-6
            if abs(score) > 1e-6:
                assert int(p.decision) == dec


def test_k1_reproduces_min_distance_rule():
    # sign(d_real_1 - d_fake_1) must match "fake iff min fake distance < min real distance"
    rng = np.random.default_rng(5)
    bank = random_bank(rng, 100, 4)
    queries = rng.normal(size=(200, 4))
    real_raw = bank.vectors[bank.labels == 0].astype(np.float64)
    fake_raw = bank.vectors[bank.labels == 1].astype(np.float64)
    for q, p in zip(queries, knn_batch(queries, bank, k=1)):
        min_real = min(oracle_cosine(q, v) for v in real_raw)
        min_fake = min(oracle_cosine(q, v) for v in fake_raw)
        want_fake = min_fake < min_real
        if abs(min_real - min_fake) > 1e-6:
            assert (p.decision == Label.FAKE) == want_fake


def test_batch_matches_scalar_and_permutes():
    rng = np.random.default_rng(6)
    bank = random_bank(rng, 30, 5)
    queries = rng.normal(size=(10, 5))
    batch = knn_batch(queries, bank, k=3)
    assert knn_batch(queries[4:5], bank, k=3) == [knn_score(queries[4], bank, k=3)]
    # scalar vs batched BLAS paths may differ in the last ulp; decisions and
    # distances still agree far below the 1e-6 contract
    scalar = knn_score(queries[4], bank, k=3)
    assert abs(scalar.d_real_k - batch[4].d_real_k) < 1e-12
    assert scalar.decision == batch[4].decision
    perm = rng.permutation(10)
    permuted = knn_batch(queries[perm], bank, k=3)
    assert permuted == [batch[i] for i in perm]


def test_bank_permutation_invariance():
    rng = np.random.default_rng(7)
    bank = random_bank(rng, 60, 6)
    order = rng.permutation(len(bank))
    shuffled = build_bank([bank.entry(int(i)) for i in order], bank.dim, bank.metadata)
    queries = rng.normal(size=(25, 6))
    a = knn_batch(queries, bank, k=4)
    b = knn_batch(queries, shuffled, k=4)
    for pa, pb in zip(a, b):
        assert pa.d_real_k == pb.d_real_k  # bitwise, thanks to sorted k-subset
        assert pa.d_fake_k == pb.d_fake_k
        assert pa.decision == pb.decision


def test_query_scale_invariance():
    rng = np.random.default_rng(8)
    bank = random_bank(rng, 40, 6)
    q = rng.normal(size=6)
    base = knn_score(q, bank, k=1)
    for c in (0.001, 0.5, 3.0, 1e4):
        scaled = knn_score(c * q, bank, k=1)
        assert abs(scaled.score_fake - base.score_fake) < 1e-6
        assert scaled.decision == base.decision


def test_work_counter_independent_of_k():
    rng = np.random.default_rng(9)
    bank = random_bank(rng, 80, 5)
    queries = rng.normal(size=(15, 5))
    deltas = []
    for k in (1, 9):
        reset_distance_eval_count()
        knn_batch(queries, bank, k)
        deltas.append(distance_eval_count())
    assert deltas[0] == deltas[1] == 15 * 80


def test_knn_errors():
    rng = np.random.default_rng(10)
    bank = random_bank(rng, 20, 4)
    with pytest.raises(KTooLarge):
        knn_batch(rng.normal(size=(2, 4)), bank, k=50)
    with pytest.raises(DimensionMismatch):
        knn_batch(rng.normal(size=(2, 5)), bank, k=1)
    with pytest.raises(ZeroNormVector):
        knn_batch(np.zeros((1, 4)), bank, k=1)
    with pytest.raises(NonFiniteValue, match="query 1"):
        bad = rng.normal(size=(3, 4))
        bad[1, 2] = np.inf
        knn_batch(bad, bank, k=1)
    single = build_bank([([1, 0], "real"), ([0.5, 0.5], "real")], 2)
    with pytest.raises(EmptyLabelSide):
        knn_batch(np.ones((1, 2)), single, k=1)


def test_large_batch_spot_checks():
    """10k queries vs a 100k bank; 50 random rows vs the slow oracle."""
    rng = np.random.default_rng(11)
    n, dim = 100_000, 8
    vecs = rng.normal(size=(n, dim)).astype(np.float32)
    labels = rng.integers(0, 2, size=n)
    bank = build_bank(((vecs[i], int(labels[i])) for i in range(n)), dim)
    queries = rng.normal(size=(10_000, dim))
    preds = knn_batch(queries, bank, k=1)
    assert len(preds) == 10_000
    for i in rng.choice(10_000, size=50, replace=False):
        score, dec, d_real, d_fake = oracle_knn(queries[i], bank, 1)
        assert abs(preds[i].d_real_k - d_real) < 1e-6
        assert abs(preds[i].d_fake_k - d_fake) < 1e-6


# ------------------------------------------------------------- ranking

def test_rank_exact_match_first():
    bank = build_bank([([1, 0], "fake"), ([0, 1], "fake"), ([1, 1], "real")], 2)
    queries = np.array([[0.5, 0.5], [0.0, 1.0]])
    ranked = rank_by_distance(queries, Label.FAKE, bank, direction="closest", top_m=2)
    assert ranked[0][0] == 1
    assert ranked[0][1] == pytest.approx(0.0, abs=1e-6)


def test_rank_directions_reverse():
    bank = build_bank([([1, 0], "fake"), ([0, 1], "real")], 2)
    queries = np.array([[1.0, 0.1], [0.1, 1.0]])
    near = rank_by_distance(queries, Label.FAKE, bank, direction="closest", top_m=2)
    far = rank_by_distance(queries, Label.FAKE, bank, direction="farthest", top_m=2)
    assert [i for i, _ in near] == [0, 1]
    assert [i for i, _ in far] == [1, 0]


def test_rank_matches_oracle_sort():
    rng = np.random.default_rng(12)
    bank = random_bank(rng, 50, 6)
    queries = rng.normal(size=(100, 6))
    fake_raw = bank.vectors[bank.labels == 1].astype(np.float64)
    nn = [min(oracle_cosine(q, v) for v in fake_raw) for q in queries]
    want = sorted(range(100), key=lambda i: (nn[i], i))
    got = rank_by_distance(queries, Label.FAKE, bank, direction="closest", top_m=100)
    assert [i for i, _ in got] == want
    for i, d in got:
        assert abs(d - nn[i]) < 1e-6


def test_rank_errors():
    bank = build_bank([([1, 0], "real"), ([0, 1], "real")], 2)
    with pytest.raises(EmptyLabelSide):
        rank_by_distance(np.ones((1, 2)), Label.FAKE, bank, top_m=1)
    with pytest.raises(ValueError):
        rank_by_distance(np.ones((2, 2)), Label.REAL, bank, top_m=5)
