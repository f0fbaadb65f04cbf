"""AUC / partial-AUC correctness against brute-force oracles."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anosound.errors import InvalidInputError
from anosound.metrics import (
    EvalReport,
    ScoreRow,
    auc,
    build_report,
    pauc,
    read_score_table,
    write_score_table,
)


def auc_pairs_oracle(normals, anomalies):
    """Exhaustive pair counting: wins + half-ties over all pairs."""
    total = 0.0
    for a in anomalies:
        for n in normals:
            if a > n:
                total += 1.0
            elif a == n:
                total += 0.5
    return total / (len(normals) * len(anomalies))


def pauc_sweep_oracle(normals, anomalies, p):
    """Threshold-sweep ROC, integrated exactly over FPR in [0, p].

    At every distinct score threshold the (FPR, TPR) point is recomputed from
    scratch by direct comparisons; consecutive points are joined by straight
    segments and the polygon is clipped at FPR = p with rational arithmetic.
    """
    n_count, p_count = len(normals), len(anomalies)
    thresholds = sorted(set(normals) | set(anomalies), reverse=True)
    points = [(Fraction(0), Fraction(0))]
    for th in thresholds:
        fp = sum(1 for s in normals if s >= th)
        tp = sum(1 for s in anomalies if s >= th)
        points.append((Fraction(fp, n_count), Fraction(tp, p_count)))
    p_frac = Fraction(str(float(p)))
    area = Fraction(0)
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        if x1 == x0:
            continue
        hi = min(x1, p_frac)
        if hi <= x0:
            continue
        y_hi = y0 + (y1 - y0) * (hi - x0) / (x1 - x0)
        area += (hi - x0) * (y0 + y_hi) / 2
    return float(area / p_frac)


class TestAucExamples:
    def test_perfect_separation(self):
        assert auc([0.1, 0.2], [0.8, 0.9]) == 1.0

    def test_constant_scores_are_chance(self):
        assert auc([0.3, 0.3], [0.3, 0.3, 0.3]) == 0.5

    def test_interleaved_pairs(self):
        # 4 pairs: anomaly 0.5 beats 0.4; anomaly 0.7 beats both -> 3/4
        assert auc([0.4, 0.6], [0.5, 0.7]) == 0.75

    def test_empty_class_rejected(self):
        with pytest.raises(InvalidInputError):
            auc([], [1.0])
        with pytest.raises(InvalidInputError):
            auc([1.0], [])


class TestPaucExamples:
    def test_perfect_separation_any_p(self):
        for p in (0.05, 0.1, 0.5, 1.0):
            assert pauc([0.0, 0.1], [0.9, 1.0], p) == 1.0

    def test_p_one_equals_auc(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            normals = rng.integers(0, 6, size=rng.integers(1, 12)).astype(float)
            anomalies = rng.integers(0, 6, size=rng.integers(1, 12)).astype(float)
            assert abs(pauc(normals, anomalies, 1.0) - auc(normals, anomalies)) <= 1e-12

    def test_single_anomaly_below_top_normal(self):
        # One anomaly outscored by the top normal: no true positives until the
        # first false positive, so the area over FPR in [0, 0.1] vanishes.
        normals = [float(k) for k in range(1, 11)]
        anomalies = [9.5]
        expected = pauc_sweep_oracle(normals, anomalies, 0.1)
        assert expected == 0.0
        assert pauc(normals, anomalies, 0.1) == expected

    def test_boundary_inside_segment(self):
        # 3 normals: FPR grid {0, 1/3, 2/3, 1}; p = 0.5 cuts the second segment.
        normals = [1.0, 2.0, 3.0]
        anomalies = [2.5, 3.5]
        got = pauc(normals, anomalies, 0.5)
        assert got == pytest.approx(pauc_sweep_oracle(normals, anomalies, 0.5), abs=1e-15)

    def test_invalid_p_rejected(self):
        with pytest.raises(InvalidInputError):
            pauc([1.0], [2.0], 0.0)
        with pytest.raises(InvalidInputError):
            pauc([1.0], [2.0], -0.2)
        with pytest.raises(InvalidInputError):
            pauc([1.0], [2.0], 1.5)


class TestOracleEquivalence:
    """Randomized cross-checks against the independent oracles."""

    def test_auc_matches_pair_counting(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            normals = np.round(rng.uniform(0, 3, size=rng.integers(1, 13)), 1)
            anomalies = np.round(rng.uniform(0, 3, size=rng.integers(1, 13)), 1)
            got = auc(normals, anomalies)
            want = auc_pairs_oracle(list(normals), list(anomalies))
            assert abs(got - want) <= 1e-12

    def test_pauc_matches_threshold_sweep(self):
        rng = np.random.default_rng(43)
        for _ in range(300):
            normals = np.round(rng.uniform(0, 3, size=rng.integers(1, 13)), 1)
            anomalies = np.round(rng.uniform(0, 3, size=rng.integers(1, 13)), 1)
            p = float(rng.choice([0.1, 0.25, 0.4, 1.0]))
            got = pauc(normals, anomalies, p)
            want = pauc_sweep_oracle(list(normals), list(anomalies), p)
            assert abs(got - want) <= 1e-12


@st.composite
def score_lists(draw):
    # coarse grid to force plenty of ties
    grid = st.integers(min_value=0, max_value=8).map(float)
    normals = draw(st.lists(grid, min_size=1, max_size=12))
    anomalies = draw(st.lists(grid, min_size=1, max_size=12))
    return normals, anomalies


class TestRankStatisticProperties:
    @settings(max_examples=200, derandomize=True, deadline=None)
    @given(score_lists())
    def test_monotone_transform_invariance(self, lists):
        normals, anomalies = lists
        transform = lambda s: np.exp(2.0 * np.asarray(s)) + 1.0
        assert auc(normals, anomalies) == auc(transform(normals), transform(anomalies))
        assert pauc(normals, anomalies, 0.1) == pauc(transform(normals),
                                                     transform(anomalies), 0.1)

    @settings(max_examples=200, derandomize=True, deadline=None)
    @given(score_lists())
    def test_symmetry_sums_to_one(self, lists):
        normals, anomalies = lists
        if set(normals) & set(anomalies):
            return  # symmetry identity is stated for tie-free inputs
        assert auc(normals, anomalies) + auc(anomalies, normals) == pytest.approx(1.0, abs=1e-12)

    @settings(max_examples=200, derandomize=True, deadline=None)
    @given(score_lists(), st.floats(min_value=0.05, max_value=1.0))
    def test_pauc_bounded(self, lists, p):
        normals, anomalies = lists
        value = pauc(normals, anomalies, p)
        assert 0.0 <= value <= 1.0


class TestReport:
    def _rows(self):
        return [
            ScoreRow("a/1.wav", "machA", "normal", "knn", 0.1),
            ScoreRow("a/2.wav", "machA", "normal", "knn", 0.2),
            ScoreRow("a/3.wav", "machA", "anomaly", "knn", 0.9),
            ScoreRow("a/4.wav", "machA", "anomaly", "knn", 0.8),
            ScoreRow("b/1.wav", "machB", "normal", "gmm", 1.0),
            ScoreRow("b/2.wav", "machB", "anomaly", "gmm", 2.0),
            ScoreRow("b/3.wav", "machB", "anomaly", "gmm", 0.5),
        ]

    def test_macro_average_over_machines(self):
        report = build_report(self._rows(), p=0.1)
        assert report.per_machine["machA"].auc == 1.0
        # machB pairs: 2.0 beats 1.0, 0.5 loses -> 1 win of 2 pairs
        assert report.per_machine["machB"].auc == 0.5
        assert report.overall_auc == pytest.approx((1.0 + 0.5) / 2)

    def test_p_echoed_in_rendering(self):
        report = build_report(self._rows(), p=0.1)
        assert "p = 0.1" in report.to_tsv()
        assert report.to_json_dict()["p"] == 0.1

    def test_single_class_machine_reported_null_and_excluded(self):
        rows = self._rows() + [ScoreRow("c/1.wav", "machC", "normal", "knn", 0.3)]
        with pytest.warns(UserWarning):
            report = build_report(rows, p=0.1)
        assert report.per_machine["machC"].auc is None
        assert report.overall_auc == pytest.approx((1.0 + 0.5) / 2)

    def test_rendering_deterministic(self):
        r1 = build_report(self._rows(), p=0.1)
        r2 = build_report(self._rows(), p=0.1)
        assert r1.to_tsv() == r2.to_tsv()
        assert r1.to_json_dict() == r2.to_json_dict()

    def test_score_table_round_trip(self, tmp_path):
        rows = self._rows()
        path = tmp_path / "scores.tsv"
        write_score_table(rows, path)
        back = read_score_table(path)
        assert back == rows
        write_score_table(back, tmp_path / "scores2.tsv")
        assert (tmp_path / "scores.tsv").read_bytes() == (tmp_path / "scores2.tsv").read_bytes()
