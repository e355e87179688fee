"""Windowed hit-rate scoring of switch-point candidates against annotations.

A candidate hits when it lies within the evaluation window of an annotation;
matching is one-to-one. Candidates beyond the annotated region (plus one
window) are excluded before scoring, mirroring how the ground truth is
constrained to the early part of each track.
"""

import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from .errors import NoOverlap, ParseError

log = logging.getLogger(__name__)

HIT_WINDOW_S = 0.5

#: Annotation JSON schema: required and optional (truth-document) fields.
_ANNOTATION_REQUIRED = {"track_id", "annotations_s", "region_end_s"}
_ANNOTATION_OPTIONAL = {"schema_version", "tempo_bpm", "beat_times_s", "beat_positions"}


@dataclass(frozen=True)
class AnnotationSet:
    track_id: str
    times: np.ndarray  # seconds, sorted, unique within 1 ms
    region_end: float  # last annotatable position

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        object.__setattr__(self, "times", times)
        if np.any(np.diff(times) <= 0):
            raise ValueError(f"{self.track_id}: annotation times must be increasing")
        if len(times) > 1 and np.min(np.diff(times)) < 1e-3:
            raise ValueError(f"{self.track_id}: annotations closer than 1 ms")
        if len(times) and times[-1] > self.region_end:
            raise ValueError(f"{self.track_id}: annotation beyond region_end")


@dataclass(frozen=True)
class Matching:
    pairs: tuple  # (candidate_time, annotation_time)
    hits: int
    false_positives: int
    misses: int
    evaluated_candidates: int


def match(candidates, annotations: AnnotationSet, window_s: float = HIT_WINDOW_S) -> Matching:
    """One-to-one matching of candidates to annotations within the window.

    Annotations are processed in time order and greedily take the earliest
    unmatched candidate within ``window_s``; on this interval structure that
    sweep attains maximum cardinality, so no valid pairing is left on the
    table. Candidates past region_end + window_s are dropped up front.
    """
    cands = np.sort(np.asarray(candidates, dtype=np.float64))
    cands = cands[cands <= annotations.region_end + window_s]
    taken = np.zeros(len(cands), dtype=bool)
    pairs = []
    for ann in annotations.times:
        idx = np.searchsorted(cands, ann - window_s, side="left")
        while idx < len(cands) and cands[idx] <= ann + window_s:
            if not taken[idx]:
                taken[idx] = True
                pairs.append((float(cands[idx]), float(ann)))
                break
            idx += 1
    hits = len(pairs)
    return Matching(
        pairs=tuple(pairs),
        hits=hits,
        false_positives=len(cands) - hits,
        misses=len(annotations.times) - hits,
        evaluated_candidates=len(cands),
    )


def precision_recall(matching: Matching):
    """(precision, recall); precision is None when nothing was evaluated."""
    evaluated = matching.hits + matching.false_positives
    precision = matching.hits / evaluated if evaluated else None
    total_ann = matching.hits + matching.misses
    recall = matching.hits / total_ann if total_ann else None
    return precision, recall


def evaluate_corpus(candidates: dict, annotations: dict,
                    window_s: float = HIT_WINDOW_S) -> dict:
    """Score per-track candidate times against an annotation corpus.

    Tracks without annotations are skipped with a warning; zero overlap is
    an error. Aggregate precision/recall are micro-averages over summed
    counts, plus the usual candidate-count statistics.
    """
    common = sorted(set(candidates) & set(annotations))
    for missing in sorted(set(candidates) - set(annotations)):
        log.warning("no annotations for track %s; skipped", missing)
    if not common:
        raise NoOverlap("candidate and annotation corpora share no track ids")

    per_track = {}
    totals = {"hits": 0, "false_positives": 0, "misses": 0}
    counts = []
    for track_id in common:
        m = match(candidates[track_id], annotations[track_id], window_s)
        precision, recall = precision_recall(m)
        per_track[track_id] = {
            "hits": m.hits,
            "false_positives": m.false_positives,
            "misses": m.misses,
            "precision": precision,
            "recall": recall,
            "evaluated_candidates": m.evaluated_candidates,
        }
        totals["hits"] += m.hits
        totals["false_positives"] += m.false_positives
        totals["misses"] += m.misses
        counts.append(m.evaluated_candidates)

    evaluated = totals["hits"] + totals["false_positives"]
    annotated = totals["hits"] + totals["misses"]
    counts = np.array(counts)
    aggregate = {
        "tracks": len(common),
        "precision": totals["hits"] / evaluated if evaluated else None,
        "recall": totals["hits"] / annotated if annotated else None,
        **totals,
        "candidate_count_mean": float(counts.mean()),
        "candidate_count_std": float(counts.std()),
        "candidate_count_min": int(counts.min()),
        "candidate_count_max": int(counts.max()),
    }
    return {"window_s": window_s, "per_track": per_track, "aggregate": aggregate}


def parse_annotation_dict(doc: dict, source: str = "<memory>") -> AnnotationSet:
    if not isinstance(doc, dict):
        raise ParseError(f"{source}: annotation entry must be an object")
    unknown = set(doc) - _ANNOTATION_REQUIRED - _ANNOTATION_OPTIONAL
    if unknown:
        raise ParseError(f"{source}: unknown fields {sorted(unknown)}")
    missing = _ANNOTATION_REQUIRED - set(doc)
    if missing:
        raise ParseError(f"{source}: missing fields {sorted(missing)}")
    try:
        return AnnotationSet(
            track_id=str(doc["track_id"]),
            times=np.asarray(doc["annotations_s"], dtype=np.float64),
            region_end=float(doc["region_end_s"]),
        )
    except ValueError as exc:
        raise ParseError(f"{source}: {exc}") from exc


def load_annotations(path: str) -> dict:
    """Load one annotation JSON file, a JSON array, or a directory of files."""
    sets = {}
    if os.path.isdir(path):
        for name in sorted(os.listdir(path)):
            if name.endswith(".json"):
                sets.update(load_annotations(os.path.join(path, name)))
        return sets
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not valid JSON ({exc})") from exc
    entries = doc if isinstance(doc, list) else [doc]
    for entry in entries:
        ann = parse_annotation_dict(entry, path)
        sets[ann.track_id] = ann
    return sets
