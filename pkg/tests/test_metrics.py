import math

import numpy as np
import pytest

from ufd import (
    EvalReport,
    accuracy_at_threshold,
    aggregate_accuracy,
    aggregate_map,
    average_precision,
    calibrate_threshold,
    evaluate_at,
    oracle_evaluate,
    pr_curve,
)
from ufd.errors import EmptyInput, NonFiniteValue, SingleClassInput


# ------------------------------------------------------------- oracles
# per-threshold recount, O(n^2): a different route than the cumsum sweep

def oracle_sweep_points(pairs):
    scores = [s for s, _ in pairs]
    fakes = [s for s, t in pairs if str(t) == "fake" or t == 1]
    n_fake = len(fakes)
    points = []
    for t in sorted(set(scores), reverse=True):
        tp = sum(1 for s in fakes if s >= t)
        pp = sum(1 for s in scores if s >= t)
        points.append((tp / n_fake, tp / pp))
    return points


def oracle_ap(pairs):
    ap = 0.0
    prev_r = 0.0
    for r, p in oracle_sweep_points(pairs):
        ap += (r - prev_r) * p
        prev_r = r
    return ap


def oracle_ap_11point(pairs):
    pts = oracle_sweep_points(pairs)
    total = 0.0
    for level in [i / 10 for i in range(11)]:
        total += max(p for r, p in pts if r >= level - 1e-15)
    return total / 11


def oracle_best_balanced(pairs):
    """Exhaustive scan: every observed score, every midpoint, both outskirts."""
    scores = sorted({s for s, _ in pairs})
    cands = [scores[0] - 1, scores[-1] + 1] + scores
    cands += [(a + b) / 2 for a, b in zip(scores, scores[1:])]
    best = -1.0
    for t in cands:
        reals = [(s, tr) for s, tr in pairs if tr in ("real", 0)]
        fakes = [(s, tr) for s, tr in pairs if tr in ("fake", 1)]
        r_acc = sum(1 for s, _ in reals if s <= t) / len(reals)
        f_acc = sum(1 for s, _ in fakes if s > t) / len(fakes)
        best = max(best, (r_acc + f_acc) / 2)
    return best


def random_pairs(rng, n=None, *, tie_prob=0.3):
    n = n or int(rng.integers(4, 60))
    vals = rng.normal(size=n)
    if rng.random() < tie_prob:  # force duplicate scores
        vals = np.round(vals, 1)
    truths = rng.integers(0, 2, size=n)
    truths[0], truths[1] = 0, 1
    return [(float(vals[i]), int(truths[i])) for i in range(n)]


# ------------------------------------------------------------- AP

def test_ap_perfect_separation():
    pairs = [(2.0, "fake"), (1.5, "fake"), (0.5, "real"), (0.1, "real")]
    assert average_precision(pairs) == 1.0


def test_ap_four_point_hand_sweep():
    # sweep: 1/1 fake, then a real, then 2/3 -> AP = 0.5*1 + 0.5*(2/3)
    pairs = [(0.9, "fake"), (0.8, "real"), (0.7, "fake"), (0.1, "real")]
    assert average_precision(pairs) == pytest.approx(5 / 6, abs=1e-15)
    assert average_precision(pairs) == pytest.approx(oracle_ap(pairs), abs=1e-15)


def test_ap_matches_oracle_on_random_sets():
    rng = np.random.default_rng(20)
    for _ in range(100):
        pairs = random_pairs(rng)
        assert abs(average_precision(pairs) - oracle_ap(pairs)) < 1e-12


def test_ap_rank_invariance_exact():
    rng = np.random.default_rng(21)
    transforms = [
        lambda x: 2 * x + 7,
        lambda x: x ** 3,
        lambda x: math.tanh(x),
        lambda x: math.exp(x),
        lambda x: math.atan(x) * 10 - 3,
    ]
    for _ in range(20):
        pairs = random_pairs(rng)
        base = average_precision(pairs)
        for f in transforms:
            moved = [(f(s), t) for s, t in pairs]
            assert average_precision(moved) == base


def test_ap_11point_convention():
    rng = np.random.default_rng(22)
    pairs = [(2.0, "fake"), (1.0, "real")]
    assert average_precision(pairs, convention="11point") == 1.0
    for _ in range(50):
        pairs = random_pairs(rng)
        got = average_precision(pairs, convention="11point")
        assert got == pytest.approx(oracle_ap_11point(pairs), abs=1e-12)


def test_ap_errors():
    with pytest.raises(SingleClassInput):
        average_precision([(1.0, "fake"), (0.5, "fake")])
    with pytest.raises(EmptyInput):
        average_precision([])
    with pytest.raises(NonFiniteValue):
        average_precision([(float("nan"), "fake"), (0.0, "real")])


# ------------------------------------------------------------- accuracy

def _pairs_with_rates(real_acc, fake_acc, n=10_000):
    # reals correct when score <= 0, fakes correct when score > 0
    n_real_ok = round(real_acc * n)
    n_fake_ok = round(fake_acc * n)
    pairs = [(-1.0, "real")] * n_real_ok + [(1.0, "real")] * (n - n_real_ok)
    pairs += [(1.0, "fake")] * n_fake_ok + [(-1.0, "fake")] * (n - n_fake_ok)
    return pairs


def test_accuracy_reproduces_published_row_cells():
    # 98.64 / 62.91 -> 80.77 and 99.61 / 3.05 -> 51.33 (2-decimal rounding)
    for r, f, avg in [(0.9864, 0.6291, 80.77), (0.9961, 0.0305, 51.33)]:
        acc, r_acc, f_acc = accuracy_at_threshold(_pairs_with_rates(r, f), 0.0)
        assert r_acc == pytest.approx(r, abs=1e-12)
        assert f_acc == pytest.approx(f, abs=1e-12)
        assert abs(acc * 100 - avg) <= 0.005


def test_accuracy_threshold_extremes():
    pairs = [(0.3, "real"), (0.7, "fake"), (0.5, "real"), (0.9, "fake")]
    acc, r_acc, f_acc = accuracy_at_threshold(pairs, -10.0)
    assert (f_acc, r_acc) == (1.0, 0.0)
    acc, r_acc, f_acc = accuracy_at_threshold(pairs, 10.0)
    assert (f_acc, r_acc) == (0.0, 1.0)


def test_balanced_accuracy_identity_is_exact():
    rng = np.random.default_rng(23)
    for _ in range(200):
        n = int(rng.integers(1, 40))
        scores = rng.normal(size=2 * n)
        pairs = [(float(scores[i]), "real" if i < n else "fake") for i in range(2 * n)]
        t = float(rng.normal())
        acc, r_acc, f_acc = accuracy_at_threshold(pairs, t)
        assert acc == (r_acc + f_acc) / 2  # bitwise


def test_weighted_accuracy_identity_unbalanced():
    rng = np.random.default_rng(24)
    for _ in range(100):
        n_r = int(rng.integers(1, 30))
        n_f = int(rng.integers(1, 30))
        pairs = [(float(rng.normal()), "real") for _ in range(n_r)]
        pairs += [(float(rng.normal()), "fake") for _ in range(n_f)]
        acc, r_acc, f_acc = accuracy_at_threshold(pairs, 0.0)
        want = (r_acc * n_r + f_acc * n_f) / (n_r + n_f)
        assert acc == pytest.approx(want, abs=1e-12)


def test_decision_is_strictly_greater():
    # score equal to the threshold stays real
    pairs = [(0.5, "real"), (0.5, "fake")]
    acc, r_acc, f_acc = accuracy_at_threshold(pairs, 0.5)
    assert r_acc == 1.0 and f_acc == 0.0


# ------------------------------------------------------------- calibration

def test_calibrate_separated_lands_between_classes():
    pairs = [(0.1, "real"), (0.2, "real"), (0.8, "fake"), (0.9, "fake")]
    t, bal = calibrate_threshold(pairs)
    assert bal == 1.0
    assert 0.2 < t < 0.8


def test_calibrate_midpoint_tie_break():
    t, bal = calibrate_threshold([(0.2, "real"), (0.8, "fake")])
    assert t == 0.5
    assert bal == 1.0


def test_calibrate_matches_exhaustive_scan():
    rng = np.random.default_rng(25)
    for _ in range(30):
        pairs = random_pairs(rng, n=1000)
        t, bal = calibrate_threshold(pairs)
        assert bal == pytest.approx(oracle_best_balanced(pairs), abs=1e-12)


def test_calibrated_dominates_dense_grid():
    rng = np.random.default_rng(26)
    for _ in range(10):
        pairs = random_pairs(rng)
        t, bal = calibrate_threshold(pairs)
        scores = [s for s, _ in pairs]
        grid = np.linspace(min(scores) - 1, max(scores) + 1, 10_001)
        # dominance is over balanced accuracy; pooled differs when counts do
        accs = []
        for g in grid:
            _, r_acc, f_acc = accuracy_at_threshold(pairs, g)
            accs.append((r_acc + f_acc) / 2)
        assert bal >= max(accs) - 1e-12


# ------------------------------------------------------------- reports

def test_oracle_evaluate_dominance_and_perfection():
    rng = np.random.default_rng(27)
    sep = [(1.0, "fake"), (0.9, "fake"), (0.1, "real"), (0.0, "real")]
    rep = oracle_evaluate(sep)
    assert rep.accuracy == 1.0 and rep.ap == 1.0
    assert rep.threshold_source == "oracle"
    for _ in range(50):
        # equal class counts: pooled accuracy == balanced, so oracle dominates
        n = int(rng.integers(2, 20))
        vals = rng.normal(size=2 * n)
        pairs = [(float(vals[i]), "real" if i < n else "fake") for i in range(2 * n)]
        oracle_rep = oracle_evaluate(pairs)
        for t in rng.normal(size=5):
            fixed = evaluate_at(pairs, float(t))
            assert oracle_rep.accuracy >= fixed.accuracy - 1e-12


def test_pr_curve_shapes():
    perfect = [(0.9, "fake"), (0.8, "fake"), (0.2, "real"), (0.1, "real")]
    pts = pr_curve(perfect)
    recalls = [r for r, _ in pts]
    assert recalls == sorted(recalls)
    assert all(p == 1.0 for r, p in pts if r < 1.0)

    flat = [(0.5, "fake"), (0.5, "real"), (0.5, "fake")]
    assert pr_curve(flat) == [(1.0, 2 / 3)]

    four = [(0.9, "fake"), (0.8, "real"), (0.7, "fake"), (0.1, "real")]
    got = pr_curve(four)
    assert got == oracle_sweep_points(four)
    assert len(got) == 4


def test_pr_curve_single_class():
    with pytest.raises(SingleClassInput):
        pr_curve([(0.5, "real")])
    # all-fake inputs are fine: precision pins at 1
    assert pr_curve([(0.5, "fake"), (0.7, "fake")])[-1] == (1.0, 1.0)


def test_aggregate_map():
    rng = np.random.default_rng(28)
    reports = {}
    for i in range(19):
        rep = oracle_evaluate(random_pairs(rng))
        reports[f"set{i}"] = rep
    want = sum(r.ap for r in reports.values()) / 19
    assert aggregate_map(reports) == want
    one = {"only": next(iter(reports.values()))}
    assert aggregate_map(one) == one["only"].ap
    two = {"a": reports["set0"], "b": reports["set1"]}
    assert aggregate_map(two) == (reports["set0"].ap + reports["set1"].ap) / 2


def test_eval_report_roundtrip():
    rng = np.random.default_rng(29)
    rep = oracle_evaluate(random_pairs(rng))
    assert EvalReport.from_dict(rep.to_dict()) == rep
