"""Ranked-retrieval metrics: average precision, precision@k, empirical chance."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class RankedJudgment:
    """A query's ranking with ground-truth relevance flags.

    Flags are computed from held labels (class membership / exact item),
    never from the ranking itself. `*_total` counts relevant items in the
    whole corpus, which may exceed the returned list length.
    """

    query_id: int
    ranked_ids: list[int]
    class_flags: np.ndarray
    instance_flags: np.ndarray
    class_total: int
    instance_total: int


def precision_at_k(flags: np.ndarray, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    flags = np.asarray(flags, dtype=bool)
    top = flags[:k]
    return float(top.sum() / k)


def average_precision(flags: np.ndarray, total_relevant: int) -> float | None:
    """AP over all relevant corpus items; None when the query has none."""
    flags = np.asarray(flags, dtype=bool)
    if total_relevant == 0:
        return None
    hits = np.flatnonzero(flags)
    if len(hits) == 0:
        return 0.0
    precisions = (np.arange(len(hits)) + 1.0) / (hits + 1.0)
    return float(precisions.sum() / total_relevant)


def mean_ap(aps: list[float | None]) -> float:
    """Mean of defined per-query APs; undefined queries are excluded with a warning."""
    defined = [a for a in aps if a is not None]
    skipped = len(aps) - len(defined)
    if skipped:
        log.warning("%d queries had no relevant corpus items and were excluded from mAP", skipped)
    if not defined:
        return 0.0
    return float(np.mean(defined))


def precision_curve(judgments: list[RankedJudgment], ks: list[int], level: str = "class") -> list[tuple[int, float]]:
    out = []
    for k in ks:
        vals = []
        for j in judgments:
            flags = j.class_flags if level == "class" else j.instance_flags
            if len(flags) >= 1:
                vals.append(precision_at_k(flags, min(k, len(flags))))
        out.append((k, float(np.mean(vals)) if vals else 0.0))
    return out


def empirical_chance_map(judgments: list[RankedJudgment], trials: int = 100, seed: int = 0,
                         level: str = "class") -> float:
    """Chance mAP from shuffled rankings, respecting per-query label counts."""
    rng = np.random.default_rng(seed)
    totals = []
    for _ in range(trials):
        aps = []
        for j in judgments:
            flags = (j.class_flags if level == "class" else j.instance_flags).copy()
            rng.shuffle(flags)
            total = j.class_total if level == "class" else j.instance_total
            aps.append(average_precision(flags, total))
        totals.append(mean_ap(aps))
    return float(np.mean(totals))


@dataclass
class ExperimentReport:
    name: str
    per_query_ap_class: list[float | None] = field(default_factory=list)
    per_query_ap_instance: list[float | None] = field(default_factory=list)
    map_class: float = 0.0
    map_instance: float = 0.0
    chance_map_class: float = 0.0
    chance_map_instance: float = 0.0
    precision_curve_class: list[tuple[int, float]] = field(default_factory=list)
    precision_curve_instance: list[tuple[int, float]] = field(default_factory=list)
    counterpart_top10_rate: float | None = None
    config: dict = field(default_factory=dict)
    seed: int = 0
    notes: list[str] = field(default_factory=list)
    judgments: list[RankedJudgment] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "map_class": self.map_class,
            "map_instance": self.map_instance,
            "chance_map_class": self.chance_map_class,
            "chance_map_instance": self.chance_map_instance,
            "per_query_ap_class": self.per_query_ap_class,
            "per_query_ap_instance": self.per_query_ap_instance,
            "precision_curve_class": self.precision_curve_class,
            "precision_curve_instance": self.precision_curve_instance,
            "counterpart_top10_rate": self.counterpart_top10_rate,
            "config": self.config,
            "seed": self.seed,
            "notes": self.notes,
        }


def judge_ranking(
    query_id: int,
    query_label: str,
    ranked_ids: list[int],
    labels_by_id: dict[int, str],
    counterpart_ids: set[int],
    corpus_ids: list[int],
) -> RankedJudgment:
    """Relevance flags for one ranking from held ground truth."""
    class_flags = np.array([labels_by_id[i] == query_label for i in ranked_ids], dtype=bool)
    instance_flags = np.array([i in counterpart_ids for i in ranked_ids], dtype=bool)
    class_total = sum(1 for i in corpus_ids if labels_by_id[i] == query_label)
    instance_total = sum(1 for i in corpus_ids if i in counterpart_ids)
    return RankedJudgment(
        query_id=query_id,
        ranked_ids=list(ranked_ids),
        class_flags=class_flags,
        instance_flags=instance_flags,
        class_total=class_total,
        instance_total=instance_total,
    )


def build_report(name: str, judgments: list[RankedJudgment], config: dict, seed: int,
                 ks=(1, 5, 10, 20, 50)) -> ExperimentReport:
    ap_class = [average_precision(j.class_flags, j.class_total) for j in judgments]
    ap_inst = [average_precision(j.instance_flags, j.instance_total) for j in judgments]
    top10 = [bool(j.instance_flags[:10].any()) for j in judgments if j.instance_total > 0]
    return ExperimentReport(
        name=name,
        per_query_ap_class=ap_class,
        per_query_ap_instance=ap_inst,
        map_class=mean_ap(ap_class),
        map_instance=mean_ap(ap_inst),
        chance_map_class=empirical_chance_map(judgments, seed=seed, level="class"),
        chance_map_instance=empirical_chance_map(judgments, seed=seed, level="instance"),
        precision_curve_class=precision_curve(judgments, list(ks), "class"),
        precision_curve_instance=precision_curve(judgments, list(ks), "instance"),
        counterpart_top10_rate=float(np.mean(top10)) if top10 else None,
        config=config,
        seed=seed,
        judgments=judgments,
    )
