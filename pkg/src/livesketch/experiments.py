"""Retrieval and suggestion experiments over a trained model stack."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import jointspace, metrics, pq, rasternet, seqvae
from .stack import ModelStack
from .corpus import Dataset
from .perturb import PerturbationEngine, PerturbationRequest, PerturbTarget
from .raster import rasterize
from .sketch import Sketch, shuffle_strokes


def embed_queries_vector(sketches: list[Sketch], stack: ModelStack) -> np.ndarray:
    mu = seqvae.encode_many([s for s in sketches], stack.encoder)
    return jointspace.project_latent(mu, stack.fc)


def embed_queries_raster(sketches: list[Sketch], stack: ModelStack, size: int) -> np.ndarray:
    canvases = [rasterize(s, size) for s in sketches]
    feats = rasternet.encode_batch(canvases, stack.structure, "sketch")
    return jointspace.project_raster(feats, stack.fc)


def run_s2s(
    modality: str,
    shuffle: bool,
    dataset: Dataset,
    stack: ModelStack,
    seed: int = 0,
) -> metrics.ExperimentReport:
    """Cross-modal sketch retrieval: vector queries against rendered galleries or vice versa.

    The gallery contains every corpus sketch (train + test) in the opposite
    modality; each query's instance counterpart is its own other-modality
    encoding. `shuffle` permutes the stroke order of vector-form inputs.
    """
    if modality not in ("V-R", "R-V"):
        raise ValueError("modality must be 'V-R' or 'R-V'")
    corpus = dataset.train + dataset.test
    corpus_ids = [sid for sid, _ in corpus]
    labels_by_id = {sid: s.label for sid, s in corpus}
    queries = dataset.test

    def vec_form(s: Sketch, i: int) -> Sketch:
        return shuffle_strokes(s, seed=seed + i) if shuffle else s

    if modality == "V-R":
        gallery = jointspace.project_raster(
            rasternet.encode_batch([rasterize(s, dataset.raster_size) for _, s in corpus], stack.structure, "sketch"),
            stack.fc,
        )
        qs = embed_queries_vector([vec_form(s, i) for i, (_, s) in enumerate(queries)], stack)
    else:
        gallery = embed_queries_vector([vec_form(s, i) for i, (_, s) in enumerate(corpus)], stack)
        qs = embed_queries_raster([s for _, s in queries], stack, dataset.raster_size)

    judgments = []
    for (qid, qsketch), qvec in zip(queries, qs):
        res = pq.brute_force(gallery, qvec, len(corpus_ids), ids=corpus_ids)
        judgments.append(
            metrics.judge_ranking(qid, qsketch.label, list(res.ids), labels_by_id, {qid}, corpus_ids)
        )
    name = f"S2S-{modality}" + ("-shuffle" if shuffle else "")
    cfg = {"modality": modality, "shuffle": shuffle, "queries": len(queries), "gallery": len(corpus_ids)}
    return metrics.build_report(name, judgments, cfg, seed)


S2I_ROWS = ("LS", "LS-R", "LS-R-I")


def run_s2i(dataset: Dataset, stack: ModelStack, seed: int = 0, rows=S2I_ROWS) -> list[metrics.ExperimentReport]:
    """Sketch-to-image ablations over the augmented-render gallery.

    Queries are the gallery's held-out source sketches; an image is
    instance-relevant when it was rendered from the query's source. Rows:
    vector query in search space, rendered query in search space, and
    rendered query ranked in the intermediate structure space.
    """
    gallery_ids = [g.item_id for g in dataset.gallery]
    labels_by_id = {g.item_id: g.label for g in dataset.gallery}
    renders = [g.render(dataset.raster_size) for g in dataset.gallery]

    sources: list[Sketch] = []
    counterparts: list[set[int]] = []
    seen: dict[int, int] = {}
    for g in dataset.gallery:
        key = id(g.sketch)
        if key not in seen:
            seen[key] = len(sources)
            sources.append(g.sketch)
            counterparts.append(set())
        counterparts[seen[key]].add(g.item_id)

    gallery_s = jointspace.project_raster(rasternet.encode_batch(renders, stack.structure, "image"), stack.fc)
    gallery_r = rasternet.encode_batch(renders, stack.structure, "image")

    reports = []
    for row in rows:
        if row == "LS":
            qs = embed_queries_vector(sources, stack)
            gal = gallery_s
        elif row == "LS-R":
            qs = embed_queries_raster(sources, stack, dataset.raster_size)
            gal = gallery_s
        elif row == "LS-R-I":
            qs = rasternet.encode_batch([rasterize(s, dataset.raster_size) for s in sources], stack.structure, "sketch")
            gal = gallery_r
        else:
            raise ValueError(f"unknown ablation row {row!r}")
        judgments = []
        for i, (src, qvec) in enumerate(zip(sources, qs)):
            res = pq.brute_force(gal, qvec, len(gallery_ids), ids=gallery_ids)
            judgments.append(
                metrics.judge_ranking(10_000_000 + i, src.label, list(res.ids), labels_by_id, counterparts[i], gallery_ids)
            )
        rep = metrics.build_report(f"S2I-{row}", judgments, {"row": row, "queries": len(sources)}, seed)
        rep.notes.append("desk-scale synthetic corpus; absolute values not comparable to production-scale runs")
        reports.append(rep)
    return reports


@dataclass
class SequenceBenchResult:
    method: str
    per_pair_start_distance: list[float]
    per_pair_end_distance: list[float]
    improved_fraction: float
    decode_validity_rate: float
    sequences: list[list[Sketch]]


def run_perturbation_bench(
    dataset: Dataset,
    stack: ModelStack,
    pairs: int = 12,
    steps: int = 10,
    backprop_steps: int = 120,
    seed: int = 0,
) -> dict[str, SequenceBenchResult]:
    """Interpolation sequences between sampled query/target sketch pairs.

    For each method, emits the per-step suggestion sketches and measures the
    search-space distance to the target at both ends, plus the fraction of
    decodes that terminated before the step cap.
    """
    rng = np.random.default_rng(seed)
    engine = PerturbationEngine(fc=stack.fc, decoder=stack.decoder, max_decode_steps=stack.max_len)
    test = dataset.test
    out: dict[str, SequenceBenchResult] = {}
    sampled = []
    for _ in range(pairs):
        i, j = rng.choice(len(test), size=2, replace=False)
        sampled.append((test[i][1], test[j][1]))

    for method in ("linear", "slerp", "backprop"):
        starts, ends, seqs = [], [], []
        valid = 0
        total = 0
        for query, target in sampled:
            q_code = seqvae.encode(query, stack.encoder, max_len=stack.max_len)
            t_code = seqvae.encode(target, stack.encoder, max_len=stack.max_len)
            t_search = jointspace.project_latent(t_code.mu, stack.fc)
            request = PerturbationRequest(
                query_latent=q_code.mu,
                targets=[PerturbTarget(latent=t_code.mu, search=t_search)],
                weights=[1.0],
                method=method,
                steps=backprop_steps,
            )
            results = engine.interpolation_sequence(request, steps=steps)
            start_d = results[0].distances_after[0]
            end_d = results[-1].distances_after[0]
            starts.append(start_d)
            ends.append(end_d)
            seqs.append([r.suggestion for r in results])
            valid += sum(0 if r.hit_max_steps else 1 for r in results)
            total += len(results)
        improved = float(np.mean([e < s for s, e in zip(starts, ends)]))
        out[method] = SequenceBenchResult(
            method=method,
            per_pair_start_distance=starts,
            per_pair_end_distance=ends,
            improved_fraction=improved,
            decode_validity_rate=valid / total,
            sequences=seqs,
        )
    return out
