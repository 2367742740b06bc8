import math

import pytest

from loadproxy.errors import InvalidArgumentError
from loadproxy.ingest import InteractionEvent, SubscaleScores
from loadproxy.proxy import (
    ProxyRecord,
    alignment_stats,
    build_proxy_records,
    combined_load,
    learner_rows,
    minmax_standardize,
    trend_series,
)
from loadproxy.segmenting import Segment, SegmentDifficulty


def rec(learner, index=1, diff=0.5, el=0.5, il=0.5, cl=0.5):
    raw, std = combined_load(diff, el)
    return ProxyRecord(learner, index, diff, el, raw, std, il, cl)


class TestMinmaxStandardize:
    def test_endpoints(self):
        assert minmax_standardize([2, 4, 6]).values == (0.0, 0.5, 1.0)

    def test_constant(self):
        s = minmax_standardize([5, 5, 5])
        assert s.values == (0.5, 0.5, 0.5)
        assert s.constant

    def test_hand_values(self):
        s = minmax_standardize([-1.2, 0.3, 0.8, 2.8])
        for got, want in zip(s.values, [0, 0.375, 0.5, 1]):
            assert got == pytest.approx(want, abs=1e-12)
        assert (s.source_min, s.source_max) == (-1.2, 2.8)

    def test_empty(self):
        with pytest.raises(InvalidArgumentError):
            minmax_standardize([])

    @pytest.mark.parametrize("bad", [math.nan, math.inf])
    def test_non_finite(self, bad):
        with pytest.raises(InvalidArgumentError):
            minmax_standardize([1.0, bad])


class TestCombinedLoad:
    def test_zero(self):
        assert combined_load(0, 0) == (0, 0)

    def test_max(self):
        assert combined_load(1, 1) == (2, 1)

    def test_reported_means(self):
        raw, std = combined_load(0.49, 0.54)
        assert raw == pytest.approx(1.03, abs=1e-12)
        assert std == pytest.approx(0.515, abs=1e-12)

    @pytest.mark.parametrize("args", [(-0.1, 0.5), (0.5, 1.01)])
    def test_out_of_range(self, args):
        with pytest.raises(InvalidArgumentError):
            combined_load(*args)


class TestLearnerRows:
    def test_single_record(self):
        r = rec("a", diff=0.2, el=0.4, il=0.3, cl=0.6)
        (row,) = learner_rows([r])
        assert (row.diff_std, row.el_std, row.combined_raw, row.combined_std,
                row.il_reported, row.cl_reported) == (0.2, 0.4, r.combined_raw, r.combined_std, 0.3, 0.6)

    def test_sorted_by_cl(self):
        rows = learner_rows([rec("hi", cl=0.7), rec("lo", cl=0.3)])
        assert [r.learner_id for r in rows] == ["lo", "hi"]

    def test_ties_lexicographic(self):
        rows = learner_rows([rec("b", cl=0.4), rec("a", cl=0.4)])
        assert [r.learner_id for r in rows] == ["a", "b"]

    def test_means(self):
        rows = learner_rows([rec("a", 1, cl=0.2), rec("a", 2, cl=0.6)])
        assert rows[0].cl_reported == pytest.approx(0.4)
        assert rows[0].n_records == 2


class TestTrendSeries:
    def test_one_learner(self):
        records = [rec("a", 1, diff=0.1), rec("a", 2, diff=0.9)]
        points = trend_series(records)
        assert [(p.administration_index, p.n, p.diff_std_mean) for p in points] == [
            (1, 1, 0.1), (2, 1, 0.9)
        ]

    def test_two_learners(self):
        (p,) = trend_series([rec("a", 1, diff=0.2), rec("b", 1, diff=0.6)])
        assert p.diff_std_mean == pytest.approx(0.4)
        assert p.n == 2

    def test_missing_index_omitted(self):
        points = trend_series([rec("a", 1), rec("a", 3)])
        assert [p.administration_index for p in points] == [1, 3]


class TestAlignmentStats:
    def test_identical(self):
        a = alignment_stats([1, 2, 3.5, 0], [1, 2, 3.5, 0])
        assert a.pearson_r == pytest.approx(1.0) and a.spearman_rho == pytest.approx(1.0)

    def test_negation(self):
        a = alignment_stats([1, 2, 3.5, 0], [-1, -2, -3.5, 0])
        assert a.pearson_r == pytest.approx(-1.0)

    def test_hand_rank_correlation(self):
        # d = (0, 1, -1, 0): rho = 1 - 6 * 2 / (4 * 15) = 0.8
        a = alignment_stats([1, 2, 3, 4], [1, 3, 2, 4])
        assert a.spearman_rho == pytest.approx(0.8, abs=1e-9)

    def test_ties_average_ranks(self):
        # ranks of b: (1.5, 1.5, 3); pearson of (1,2,3) with that = sqrt(3)/2
        a = alignment_stats([1, 2, 3], [5, 5, 7])
        assert a.spearman_rho == pytest.approx(math.sqrt(3) / 2, abs=1e-12)

    def test_constant_series_undefined(self):
        a = alignment_stats([1, 1, 1], [1, 2, 3])
        assert a.pearson_r is None and a.spearman_rho is None and a.n == 3

    def test_length_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            alignment_stats([1, 2], [1, 2, 3])


class TestBuildProxyRecords:
    def _difficulty(self, learner, index, mean_b):
        event = InteractionEvent(learner, "x", 1.0, 1)
        segment = Segment(learner, 0.0, 10.0 * index, index, (event,), "learning")
        return SegmentDifficulty(segment, mean_b, 1, 0)

    def test_joins_scores(self):
        diffs = [self._difficulty("a", 1, -1.0), self._difficulty("a", 2, 3.0)]
        scores = {
            ("a", 1): SubscaleScores(0.1, 0.2, 0.3, 0.4),
            ("a", 2): SubscaleScores(0.5, 0.6, 0.7, 0.8),
        }
        records, scale = build_proxy_records(diffs, scores)
        assert (scale.source_min, scale.source_max) == (-1.0, 3.0)
        assert [r.diff_std for r in records] == [0.0, 1.0]
        assert [r.el_std for r in records] == [0.2, 0.6]
        assert records[1].combined_raw == pytest.approx(1.6)
        assert records[1].combined_std == pytest.approx(0.8)
        assert [(r.il_reported, r.cl_reported) for r in records] == [(0.1, 0.4), (0.5, 0.8)]
        assert records[0].phase == "learning"

    def test_missing_scores(self):
        with pytest.raises(InvalidArgumentError):
            build_proxy_records([self._difficulty("a", 1, 0.0)], {})
