"""Learning segments between questionnaire administrations."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, replace

from .errors import InvalidArgumentError, UndefinedDifficultyError
from .ingest import InteractionEvent, QuestionnaireAdministration
from .irt import CalibrationResult

ROUTING = "routing"
LEARNING = "learning"


@dataclass(frozen=True)
class Segment:
    """Events a learner produced in ``(start_ts, end_ts]``.

    ``administration_index`` is the 1-based ordinal of the questionnaire
    that closes the segment. ``phase`` is ``None`` until labelled.
    """

    learner_id: str
    start_ts: float
    end_ts: float
    administration_index: int
    events: tuple[InteractionEvent, ...]
    phase: str | None = None

    @property
    def item_ids(self) -> tuple[str, ...]:
        return tuple(e.item_id for e in self.events)

    @property
    def segment_id(self) -> str:
        return f"{self.learner_id}#{self.administration_index}"


@dataclass(frozen=True)
class SegmentDifficulty:
    segment: Segment
    mean_b: float | None
    n_mapped: int
    n_unmapped: int


def build_segments(
    events: Iterable[InteractionEvent],
    administrations: Iterable[QuestionnaireAdministration],
) -> tuple[list[Segment], list[InteractionEvent]]:
    """Split each learner's events at their questionnaire timestamps.

    A learner with k administrations gets k segments; segment i covers
    ``(t_{i-1}, t_i]`` with ``t_0 = 0``. Events after a learner's last
    administration, or from learners with none, come back as unassigned.
    Output is ordered by learner id then administration index.
    """
    by_learner: dict[str, list[float]] = {}
    for a in administrations:
        times = by_learner.setdefault(a.learner_id, [])
        if times and a.timestamp <= times[-1]:
            raise InvalidArgumentError(
                f"administrations for learner {a.learner_id!r} are not in increasing "
                f"time order ({a.timestamp!r} after {times[-1]!r})"
            )
        if a.timestamp < 0:
            raise InvalidArgumentError(f"negative administration time {a.timestamp!r}")
        times.append(a.timestamp)

    events_by_learner: dict[str, list[InteractionEvent]] = {}
    for e in events:
        events_by_learner.setdefault(e.learner_id, []).append(e)

    segments: list[Segment] = []
    unassigned: list[InteractionEvent] = []
    for learner in sorted(set(by_learner) | set(events_by_learner)):
        evs = sorted(events_by_learner.get(learner, ()), key=lambda e: (e.timestamp, e.item_id, e.correct))
        times = by_learner.get(learner, [])
        buckets: list[list[InteractionEvent]] = [[] for _ in times]
        k = 0
        for e in evs:
            while k < len(times) and e.timestamp > times[k]:
                k += 1
            if k == len(times):
                unassigned.append(e)
            else:
                buckets[k].append(e)
        start = 0.0
        for idx, (end, bucket) in enumerate(zip(times, buckets), start=1):
            segments.append(Segment(learner, start, end, idx, tuple(bucket)))
            start = end
    return segments, unassigned


def _difficulty_lookup(calibration) -> Mapping[str, float]:
    if isinstance(calibration, CalibrationResult):
        return calibration.difficulties
    return calibration


def segment_mean_difficulty(segment: Segment, calibration) -> SegmentDifficulty:
    """Average calibrated difficulty of the items answered in ``segment``.

    ``calibration`` is a :class:`CalibrationResult` or a mapping from item
    id to difficulty. Items without a difficulty are counted and skipped.
    """
    table = _difficulty_lookup(calibration)
    total = 0.0
    n_mapped = 0
    for item_id in segment.item_ids:
        b = table.get(item_id)
        if b is None:
            continue
        total += b
        n_mapped += 1
    if n_mapped == 0:
        raise UndefinedDifficultyError(segment.segment_id)
    return SegmentDifficulty(segment, total / n_mapped, n_mapped, len(segment.item_ids) - n_mapped)


def segment_difficulties(
    segments: Sequence[Segment], calibration
) -> tuple[list[SegmentDifficulty], list[SegmentDifficulty]]:
    """Mean difficulty for every segment, split into defined and undefined."""
    table = _difficulty_lookup(calibration)
    defined, undefined = [], []
    for seg in segments:
        try:
            defined.append(segment_mean_difficulty(seg, table))
        except UndefinedDifficultyError:
            undefined.append(SegmentDifficulty(seg, None, 0, len(seg.events)))
    return defined, undefined


def label_phases(
    segments: Iterable[Segment], routing_end_ts: Mapping[str, float] | float
) -> list[Segment]:
    """Mark segments ending by the routing cutoff as routing, the rest learning.

    A segment that straddles the cutoff counts as learning. A learner
    missing from ``routing_end_ts`` has no routing phase.
    """
    out = []
    for seg in segments:
        if isinstance(routing_end_ts, Mapping):
            cutoff = routing_end_ts.get(seg.learner_id, 0.0)
        else:
            cutoff = routing_end_ts
        if cutoff < 0:
            raise InvalidArgumentError(f"routing end must be non-negative, got {cutoff!r}")
        phase = ROUTING if cutoff > 0 and seg.end_ts <= cutoff else LEARNING
        out.append(replace(seg, phase=phase))
    return out
