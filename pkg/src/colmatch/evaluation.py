"""HitRate@K and Recall@K over ranked predictions.

    HitRate@K = 1/N * sum_i 1{ f_K(s_i) ∩ GT(s_i) != ∅ }
    Recall@K  = 1/N * sum_i |f_K(s_i) ∩ GT(s_i)| / |GT(s_i)|

With one ground-truth target per query the two coincide. Source columns whose
ground truth is NA (empty set) are excluded from N by default; the ``score``
policy instead counts them as a hit iff the prediction is empty.
"""

from __future__ import annotations

import csv
import enum
import io
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Any

from colmatch.errors import EvaluationError, MissingGroundTruthError, SchemaMismatchError
from colmatch.manifest import RunManifest
from colmatch.pipeline import RankedPrediction
from colmatch.schema import ColumnRef, GroundTruth

DEFAULT_KS = (1, 3, 5)


class NaPolicy(str, enum.Enum):
    EXCLUDE = "exclude"
    SCORE = "score"


def _scored_queries(
    preds: Sequence[RankedPrediction], gt: GroundTruth, na_policy: NaPolicy
) -> list[tuple[RankedPrediction, frozenset[ColumnRef]]]:
    queries = []
    for pred in preds:
        if pred.source not in gt:
            raise MissingGroundTruthError(f"no ground truth for source column {pred.source}")
        targets = gt[pred.source]
        if not targets and na_policy is NaPolicy.EXCLUDE:
            continue
        queries.append((pred, targets))
    return queries


def _hit(pred: RankedPrediction, targets: frozenset[ColumnRef], k: int) -> float:
    if not targets:
        return 1.0 if not pred.ranked_targets else 0.0
    return 1.0 if set(pred.top(k)) & targets else 0.0


def _recall(pred: RankedPrediction, targets: frozenset[ColumnRef], k: int) -> float:
    if not targets:
        return 1.0 if not pred.ranked_targets else 0.0
    return len(set(pred.top(k)) & targets) / len(targets)


def _mean(values: list[float]) -> float:
    if not values:
        raise EvaluationError("no scorable queries (every source column is NA or excluded)")
    return sum(values) / len(values)


def _check_k(k: int) -> None:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")


def hit_rate_at_k(
    preds: Sequence[RankedPrediction], gt: GroundTruth, k: int, na_policy: NaPolicy = NaPolicy.EXCLUDE
) -> float:
    _check_k(k)
    return _mean([_hit(p, t, k) for p, t in _scored_queries(preds, gt, NaPolicy(na_policy))])


def recall_at_k(
    preds: Sequence[RankedPrediction], gt: GroundTruth, k: int, na_policy: NaPolicy = NaPolicy.EXCLUDE
) -> float:
    _check_k(k)
    return _mean([_recall(p, t, k) for p, t in _scored_queries(preds, gt, NaPolicy(na_policy))])


@dataclass(frozen=True)
class QueryResult:
    source: ColumnRef
    targets: tuple[ColumnRef, ...]
    predictions: tuple[ColumnRef, ...]
    hit: dict[int, bool]
    recall: dict[int, float]


@dataclass(frozen=True)
class MetricsReport:
    dataset: str
    n_queries: int
    ks: tuple[int, ...]
    hit_rate: dict[int, float]
    recall: dict[int, float]
    per_query: tuple[QueryResult, ...]
    excluded: tuple[ColumnRef, ...] = ()
    one_to_one: bool = True
    hit_rate_suppressed: bool = False
    notes: tuple[str, ...] = field(default=())

    def to_dict(self) -> dict[str, Any]:
        return {
            "dataset": self.dataset,
            "n_queries": self.n_queries,
            "ks": list(self.ks),
            "hit_rate": None if self.hit_rate_suppressed else {str(k): v for k, v in self.hit_rate.items()},
            "recall": {str(k): v for k, v in self.recall.items()},
            "one_to_one": self.one_to_one,
            "hit_rate_suppressed": self.hit_rate_suppressed,
            "notes": list(self.notes),
            "excluded_na": [str(ref) for ref in self.excluded],
            "per_query": [
                {
                    "source": str(q.source),
                    "targets": [str(t) for t in q.targets],
                    "predictions": [str(p) for p in q.predictions],
                    "hit": {str(k): v for k, v in q.hit.items()},
                    "recall": {str(k): v for k, v in q.recall.items()},
                }
                for q in self.per_query
            ],
        }

    def render_table(self) -> str:
        header = ["metric"] + [f"@{k}" for k in self.ks]
        rows = []
        if not self.hit_rate_suppressed:
            rows.append(["HitRate"] + [f"{100 * self.hit_rate[k]:.2f}%" for k in self.ks])
        rows.append(["Recall"] + [f"{100 * self.recall[k]:.2f}%" for k in self.ks])
        widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
        lines = [f"{self.dataset}  (N={self.n_queries})"]
        lines += ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in [header, *rows]]
        lines += [f"note: {note}" for note in self.notes]
        return "\n".join(lines) + "\n"

    def detail_csv(self) -> str:
        """Per-query rows: source, ground-truth target(s), first two predictions."""
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["source", "target", "prediction_1", "prediction_2"])
        for q in self.per_query:
            preds = [str(p) for p in q.predictions[:2]] + ["", ""]
            writer.writerow([str(q.source), ";".join(str(t) for t in q.targets) or "NA", preds[0], preds[1]])
        return buffer.getvalue()


def build_report(
    preds: Sequence[RankedPrediction],
    gt: GroundTruth,
    ks: Sequence[int] = DEFAULT_KS,
    *,
    dataset: str = "",
    na_policy: NaPolicy = NaPolicy.EXCLUDE,
    force_hit_rate: bool = False,
) -> MetricsReport:
    ks = tuple(sorted(set(ks)))
    for k in ks:
        _check_k(k)
    na_policy = NaPolicy(na_policy)
    queries = _scored_queries(preds, gt, na_policy)
    if not queries:
        raise EvaluationError("no scorable queries (every source column is NA or excluded)")
    excluded = tuple(p.source for p in preds if not gt[p.source] and na_policy is NaPolicy.EXCLUDE)
    per_query = tuple(
        QueryResult(
            source=p.source,
            targets=tuple(sorted(t)),
            predictions=p.ranked_targets,
            hit={k: bool(_hit(p, t, k)) for k in ks},
            recall={k: _recall(p, t, k) for k in ks},
        )
        for p, t in queries
    )
    hit_rate = {k: _mean([_hit(p, t, k) for p, t in queries]) for k in ks}
    recall = {k: _mean([_recall(p, t, k) for p, t in queries]) for k in ks}
    one_to_one = gt.is_one_to_one
    notes: list[str] = []
    suppressed = not one_to_one and not force_hit_rate
    if suppressed:
        notes.append(
            "ground truth has source columns with several targets (m:n); hit rate is not reported "
            "because it overstates accuracy there. Use --force to show it anyway."
        )
    if excluded:
        notes.append(f"{len(excluded)} NA source column(s) excluded from N")
    return MetricsReport(
        dataset=dataset,
        n_queries=len(queries),
        ks=ks,
        hit_rate=hit_rate,
        recall=recall,
        per_query=per_query,
        excluded=excluded,
        one_to_one=one_to_one,
        hit_rate_suppressed=suppressed,
        notes=tuple(notes),
    )


def evaluate_manifest(
    manifest: RunManifest,
    gt: GroundTruth,
    ks: Sequence[int] = DEFAULT_KS,
    *,
    na_policy: NaPolicy = NaPolicy.EXCLUDE,
    force_hit_rate: bool = False,
) -> MetricsReport:
    if gt.source_hash is not None and gt.source_hash != manifest.source_schema.get("hash"):
        raise SchemaMismatchError("manifest was produced from a different source schema than the ground truth")
    if gt.target_hash is not None and gt.target_hash != manifest.target_schema.get("hash"):
        raise SchemaMismatchError("manifest was produced from a different target schema than the ground truth")
    dataset = f"{manifest.source_schema.get('name', '?')} -> {manifest.target_schema.get('name', '?')}"
    return build_report(
        manifest.predictions, gt, ks, dataset=dataset, na_policy=na_policy, force_hit_rate=force_hit_rate
    )
