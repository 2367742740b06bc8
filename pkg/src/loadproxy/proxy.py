"""Standardization, the combined difficulty + extraneous-load proxy, and aggregates.

Difficulty is min-max standardized over the observed per-segment means;
questionnaire subscales arrive already on [0, 1] from their fixed Likert
bounds. A constant series standardizes to 0.5 throughout.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, fields

import numpy as np
from scipy.stats import rankdata

from .errors import InvalidArgumentError
from .ingest import SubscaleScores
from .segmenting import SegmentDifficulty

CONSTANT_SERIES_VALUE = 0.5
SORT_DIRECTION = "ascending"

PROXY_FIELDS = (
    "diff_std", "el_std", "combined_raw", "combined_std", "il_reported", "cl_reported",
)


@dataclass(frozen=True)
class StandardizedSeries:
    values: tuple[float, ...]
    source_min: float
    source_max: float

    @property
    def constant(self) -> bool:
        return self.source_max == self.source_min

    def transform(self, value: float) -> float:
        if self.constant:
            return CONSTANT_SERIES_VALUE
        return (value - self.source_min) / (self.source_max - self.source_min)


@dataclass(frozen=True)
class ProxyRecord:
    learner_id: str
    administration_index: int
    diff_std: float
    el_std: float
    combined_raw: float
    combined_std: float
    il_reported: float
    cl_reported: float
    phase: str | None = None


@dataclass(frozen=True)
class LearnerRow:
    learner_id: str
    n_records: int
    diff_std: float
    el_std: float
    combined_raw: float
    combined_std: float
    il_reported: float
    cl_reported: float


@dataclass(frozen=True)
class TrendPoint:
    administration_index: int
    n: int
    diff_std_mean: float
    el_mean: float
    combined_raw_mean: float
    combined_std_mean: float
    il_mean: float
    cl_mean: float


@dataclass(frozen=True)
class Alignment:
    pearson_r: float | None
    spearman_rho: float | None
    n: int


def minmax_standardize(values: Sequence[float]) -> StandardizedSeries:
    vals = [float(v) for v in values]
    if not vals:
        raise InvalidArgumentError("cannot standardize an empty series")
    if not all(math.isfinite(v) for v in vals):
        raise InvalidArgumentError("series contains non-finite values")
    lo, hi = min(vals), max(vals)
    if hi == lo:
        return StandardizedSeries(tuple(CONSTANT_SERIES_VALUE for _ in vals), lo, hi)
    span = hi - lo
    # clamp guards the last-ulp overshoot of (v - lo) / span
    out = tuple(min(1.0, max(0.0, (v - lo) / span)) for v in vals)
    return StandardizedSeries(out, lo, hi)


def combined_load(diff_std: float, el_std: float) -> tuple[float, float]:
    """Sum of standardized difficulty and extraneous load, raw and halved."""
    for name, v in (("diff_std", diff_std), ("el_std", el_std)):
        if not 0.0 <= v <= 1.0:
            raise InvalidArgumentError(f"{name} must lie in [0, 1], got {v!r}")
    raw = diff_std + el_std
    return raw, raw / 2


def build_proxy_records(
    difficulties: Sequence[SegmentDifficulty],
    scores: Mapping[tuple[str, int], SubscaleScores],
) -> tuple[list[ProxyRecord], StandardizedSeries]:
    """Join per-segment difficulty with the closing questionnaire's scores.

    ``scores`` is keyed by ``(learner_id, administration_index)``. Only
    segments with a defined mean difficulty take part, and the difficulty
    min/max is taken over exactly those segments.
    """
    defined = [d for d in difficulties if d.mean_b is not None]
    if not defined:
        raise InvalidArgumentError("no segment has a defined difficulty")
    series = minmax_standardize([d.mean_b for d in defined])
    records = []
    for d, diff_std in zip(defined, series.values):
        seg = d.segment
        key = (seg.learner_id, seg.administration_index)
        try:
            s = scores[key]
        except KeyError:
            raise InvalidArgumentError(f"no questionnaire scores for segment {key}") from None
        raw, std = combined_load(diff_std, s.extraneous)
        records.append(
            ProxyRecord(
                learner_id=seg.learner_id,
                administration_index=seg.administration_index,
                diff_std=diff_std,
                el_std=s.extraneous,
                combined_raw=raw,
                combined_std=std,
                il_reported=s.intrinsic,
                cl_reported=s.overall,
                phase=seg.phase,
            )
        )
    return records, series


def _mean(values):
    return math.fsum(values) / len(values)


def learner_rows(records: Iterable[ProxyRecord]) -> list[LearnerRow]:
    """Per-learner means, ordered by mean reported CL then learner id."""
    groups: dict[str, list[ProxyRecord]] = {}
    for r in records:
        groups.setdefault(r.learner_id, []).append(r)
    if not groups:
        raise InvalidArgumentError("no records to aggregate")
    rows = []
    for learner, recs in groups.items():
        rows.append(
            LearnerRow(
                learner_id=learner,
                n_records=len(recs),
                **{f: _mean([getattr(r, f) for r in recs]) for f in PROXY_FIELDS},
            )
        )
    rows.sort(key=lambda row: (row.cl_reported, row.learner_id))
    return rows


def trend_series(records: Iterable[ProxyRecord]) -> list[TrendPoint]:
    """Cross-learner mean of each measure at every administration index."""
    groups: dict[int, list[ProxyRecord]] = {}
    for r in records:
        groups.setdefault(r.administration_index, []).append(r)
    out = []
    for idx in sorted(groups):
        recs = groups[idx]
        out.append(
            TrendPoint(
                administration_index=idx,
                n=len(recs),
                diff_std_mean=_mean([r.diff_std for r in recs]),
                el_mean=_mean([r.el_std for r in recs]),
                combined_raw_mean=_mean([r.combined_raw for r in recs]),
                combined_std_mean=_mean([r.combined_std for r in recs]),
                il_mean=_mean([r.il_reported for r in recs]),
                cl_mean=_mean([r.cl_reported for r in recs]),
            )
        )
    return out


def _pearson(a: np.ndarray, b: np.ndarray) -> float | None:
    da, db = a - a.mean(), b - b.mean()
    saa, sbb = float(np.dot(da, da)), float(np.dot(db, db))
    if saa == 0.0 or sbb == 0.0:
        return None
    r = float(np.dot(da, db)) / math.sqrt(saa * sbb)
    return max(-1.0, min(1.0, r))


def alignment_stats(series_a: Sequence[float], series_b: Sequence[float]) -> Alignment:
    """Pearson and Spearman correlation; ``None`` where a series is constant.

    Tied values share their average rank.
    """
    a = np.asarray(series_a, dtype=float)
    b = np.asarray(series_b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise InvalidArgumentError(f"series lengths differ: {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise InvalidArgumentError("need at least two paired values")
    return Alignment(_pearson(a, b), _pearson(rankdata(a), rankdata(b)), len(a))


def record_fields() -> tuple[str, ...]:
    return tuple(f.name for f in fields(ProxyRecord))
