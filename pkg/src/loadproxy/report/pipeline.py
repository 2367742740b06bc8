"""Calibration and analysis pipelines plus their CSV/JSON output formats.

Floats are written in shortest round-trip form (``repr``) so that golden
files stay stable and every CSV parses back to the same values.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass

from ..errors import ParseError
from ..ingest import (
    InteractionEvent,
    ItemMeta,
    QuestionnaireAdministration,
    SubscaleMap,
    build_response_matrix,
    filter_min_responses,
    first_attempts,
    format_float,
    read_rows,
    response_counts,
    score_questionnaire,
    write_csv,
)
from ..irt import CalibrationConfig, CalibrationResult, calibrate_jml
from ..proxy import (
    SORT_DIRECTION,
    LearnerRow,
    ProxyRecord,
    StandardizedSeries,
    TrendPoint,
    build_proxy_records,
    learner_rows,
    trend_series,
)
from ..segmenting import (
    Segment,
    SegmentDifficulty,
    build_segments,
    label_phases,
    segment_difficulties,
)

CALIBRATION_HEADER = ("item_id", "b", "se", "n_responses")
EXCLUSIONS_HEADER = ("kind", "id", "reason")
SEGMENTS_HEADER = (
    "learner_id", "administration_index", "start_ts", "end_ts", "phase",
    "n_items", "n_mapped", "n_unmapped", "mean_b",
)
PROXY_HEADER = (
    "learner_id", "administration_index", "diff_std", "el_std",
    "combined_raw", "combined_std", "il_reported", "cl_reported",
)
TRENDS_HEADER = (
    "administration_index", "n", "diff_std_mean", "il_mean", "cl_mean",
    "el_mean", "combined_std_mean",
)
WARNINGS_HEADER = ("learner_id", "administration_index", "kind", "detail")
ROUTING_HEADER = ("learner_id", "routing_end_ts")

HEATMAP_ROWS = ("diff_std", "il_reported", "cl_reported", "combined_std")


@dataclass(frozen=True)
class CalibrationRun:
    result: CalibrationResult
    n_events: int
    n_first_attempts: int
    removed_item_count: int
    kept_item_count: int
    response_counts: Mapping[str, int]


@dataclass(frozen=True)
class Analysis:
    segments: tuple[Segment, ...]
    difficulties: tuple[SegmentDifficulty, ...]
    undefined: tuple[SegmentDifficulty, ...]
    unassigned: tuple[InteractionEvent, ...]
    records: tuple[ProxyRecord, ...]
    difficulty_scale: StandardizedSeries
    rows: tuple[LearnerRow, ...]
    trends: tuple[TrendPoint, ...]


def run_calibration(
    events: Sequence[InteractionEvent],
    min_responses: int = 100,
    config: CalibrationConfig | None = None,
    items: Iterable[ItemMeta] | None = None,
    kind: str | None = None,
) -> CalibrationRun:
    """first attempts -> response filter -> matrix -> JML.

    With ``items`` and ``kind`` given, only items of that kind are kept.
    """
    if kind is not None and items is not None:
        wanted = {m.item_id for m in items if m.kind == kind}
        events = [e for e in events if e.item_id in wanted]
    firsts = first_attempts(events)
    kept, removed, n_kept = filter_min_responses(firsts, min_responses)
    matrix = build_response_matrix(kept)
    result = calibrate_jml(matrix, config)
    return CalibrationRun(
        result=result,
        n_events=len(events),
        n_first_attempts=len(firsts),
        removed_item_count=removed,
        kept_item_count=n_kept,
        response_counts=dict(response_counts(kept)),
    )


def calibration_csv(run: CalibrationRun) -> str:
    res = run.result
    rows = sorted(
        (p.item_id, format_float(p.b), format_float(se), run.response_counts[p.item_id])
        for p, se in zip(res.items, res.standard_errors)
    )
    return write_csv(CALIBRATION_HEADER, rows)


def exclusions_csv(result: CalibrationResult) -> str:
    return write_csv(EXCLUSIONS_HEADER, ((x.kind, x.id, x.reason) for x in result.exclusions))


def parse_calibration(stream) -> dict[str, float]:
    out = {}
    for line, row in read_rows(stream, CALIBRATION_HEADER):
        try:
            out[row["item_id"]] = float(row["b"])
        except ValueError:
            raise ParseError(f"b is not a number: {row['b']!r}", line, "b") from None
    return out


def parse_routing(text: str, is_json: bool) -> dict[str, float]:
    """Routing cutoffs from ``ground_truth.json`` or a two-column CSV."""
    if is_json:
        try:
            raw = json.loads(text)["routing_end_ts"]
            return {str(k): float(v) for k, v in raw.items()}
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ParseError(f"no usable routing_end_ts object ({exc})") from None
    out = {}
    for line, row in read_rows(text, ROUTING_HEADER):
        try:
            out[row["learner_id"]] = float(row["routing_end_ts"])
        except ValueError:
            raise ParseError("routing_end_ts is not a number", line, "routing_end_ts") from None
    return out


def run_analysis(
    difficulties: Mapping[str, float],
    events: Sequence[InteractionEvent],
    administrations: Sequence[QuestionnaireAdministration],
    subscale_map: SubscaleMap,
    routing_end_ts: Mapping[str, float] | float = 0.0,
) -> Analysis:
    segments, unassigned = build_segments(events, administrations)
    segments = label_phases(segments, routing_end_ts)
    defined, undefined = segment_difficulties(segments, difficulties)

    scores = {}
    counter: dict[str, int] = {}
    for a in administrations:
        counter[a.learner_id] = counter.get(a.learner_id, 0) + 1
        scores[(a.learner_id, counter[a.learner_id])] = score_questionnaire(a, subscale_map)

    records, scale = build_proxy_records(defined, scores)
    return Analysis(
        segments=tuple(segments),
        difficulties=tuple(defined),
        undefined=tuple(undefined),
        unassigned=tuple(unassigned),
        records=tuple(records),
        difficulty_scale=scale,
        rows=tuple(learner_rows(records)),
        trends=tuple(trend_series(records)),
    )


def segments_csv(analysis: Analysis) -> str:
    by_key = {
        (d.segment.learner_id, d.segment.administration_index): d
        for d in analysis.difficulties + analysis.undefined
    }
    rows = []
    for seg in analysis.segments:
        d = by_key[(seg.learner_id, seg.administration_index)]
        rows.append((
            seg.learner_id, seg.administration_index, format_float(seg.start_ts),
            format_float(seg.end_ts), seg.phase, len(seg.events), d.n_mapped, d.n_unmapped,
            "" if d.mean_b is None else format_float(d.mean_b),
        ))
    return write_csv(SEGMENTS_HEADER, rows)


def proxy_csv(records: Iterable[ProxyRecord]) -> str:
    return write_csv(
        PROXY_HEADER,
        (
            (r.learner_id, r.administration_index,
             *(format_float(getattr(r, f)) for f in PROXY_HEADER[2:]))
            for r in records
        ),
    )


def parse_proxy(stream) -> list[ProxyRecord]:
    out = []
    for line, row in read_rows(stream, PROXY_HEADER):
        try:
            values = {f: float(row[f]) for f in PROXY_HEADER[2:]}
            index = int(row["administration_index"])
        except ValueError as exc:
            raise ParseError(str(exc), line) from None
        out.append(ProxyRecord(row["learner_id"], index, **values))
    return out


def trends_csv(trends: Iterable[TrendPoint]) -> str:
    return write_csv(
        TRENDS_HEADER,
        (
            (t.administration_index, t.n, format_float(t.diff_std_mean), format_float(t.il_mean),
             format_float(t.cl_mean), format_float(t.el_mean), format_float(t.combined_std_mean))
            for t in trends
        ),
    )


def parse_trends(stream) -> list[dict[str, float]]:
    out = []
    for line, row in read_rows(stream, TRENDS_HEADER):
        try:
            out.append({k: float(v) for k, v in row.items()})
        except ValueError as exc:
            raise ParseError(str(exc), line) from None
    return out


def warnings_csv(analysis: Analysis) -> str:
    rows = [
        (d.segment.learner_id, d.segment.administration_index, "undefined_difficulty",
         f"{d.n_unmapped} items, none calibrated")
        for d in analysis.undefined
    ]
    per_learner: dict[str, int] = {}
    for e in analysis.unassigned:
        per_learner[e.learner_id] = per_learner.get(e.learner_id, 0) + 1
    rows.extend(
        (learner, "", "unassigned_events", f"{n} events after the last questionnaire")
        for learner, n in sorted(per_learner.items())
    )
    return write_csv(WARNINGS_HEADER, rows)


def metadata_json(analysis: Analysis) -> str:
    scale = analysis.difficulty_scale
    meta = {
        "difficulty_source_min": scale.source_min,
        "difficulty_source_max": scale.source_max,
        "difficulty_constant_series": scale.constant,
        "heatmap_sort": f"{SORT_DIRECTION} by mean cl_reported, ties by learner_id",
        "n_segments": len(analysis.segments),
        "n_records": len(analysis.records),
        "n_undefined_segments": len(analysis.undefined),
        "n_unassigned_events": len(analysis.unassigned),
    }
    return json.dumps(meta, indent=2) + "\n"


def heatmap_grid(rows: Sequence[LearnerRow]) -> tuple[list[str], list[list[float]]]:
    labels = [r.learner_id for r in rows]
    return labels, [[getattr(r, m) for r in rows] for m in HEATMAP_ROWS]
