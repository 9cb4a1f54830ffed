"""The interactive search loop: query -> results -> intents -> suggestion.

Ranking depends only on the loaded index, the models, the query and (k, m);
session state never feeds back into scoring. Indexes and model parameters
are read-only here, so concurrent sessions share them safely.
"""

from __future__ import annotations

import numpy as np

from . import intents, jointspace, pq, seqvae
from .config import Config
from .indexing import IndexBundle
from .perturb import PerturbationEngine, PerturbationRequest, PerturbationResult, PerturbTarget
from .sessions import SearchSession, SessionStore
from .sketch import Sketch
from .stack import ModelStack

K_CAP = 500
MORPH_STEPS = 10


class SearchRuntime:
    def __init__(self, stack: ModelStack, bundle: IndexBundle, config: Config | None = None):
        if len(bundle) == 0:
            raise ValueError("empty index; refusing to serve")
        self.stack = stack
        self.bundle = bundle
        self.config = config or Config()
        self.sessions = SessionStore(self.config.service.session_ttl_seconds, seed=self.config.seed)
        self.engine = PerturbationEngine(fc=stack.fc, decoder=stack.decoder, max_decode_steps=stack.max_len)

    # -- the iterative loop ------------------------------------------------------

    def search(self, session: SearchSession, sketch: Sketch, k: int | None = None, m: int | None = None):
        k = min(K_CAP, k or self.config.service.k)
        m = m or self.config.intent.clusters
        if k < m or m < 1:
            raise ValueError(f"need k >= m >= 1, got k={k} m={m}")

        code = seqvae.encode(sketch, self.stack.encoder, max_len=self.stack.max_len)
        query_s = jointspace.project_latent(code.mu, self.stack.fc)
        results = pq.knn(self.bundle.image_index, query_s, k)

        ids = [int(i) for i in results.ids]
        z = np.stack([self.bundle.records[i].semantic_vec for i in ids])
        s = np.stack([self.bundle.records[i].search_vec for i in ids])
        clusters = intents.cluster_results(
            ids, z, m, s_vectors=s,
            damping=self.config.intent.damping, lam=self.config.intent.diversity_weight,
        )
        for cluster in clusters.clusters:
            rep = intents.representative_image(cluster, query_s)
            cluster.representative_id = rep
            rep_s = self.bundle.records[rep].search_vec.astype(np.float64)
            target_id, target = intents.nearest_sketch_target(rep_s, self.bundle.sketch_index, self.bundle.sketches)
            cluster.target_sketch = target
            cluster.target_v = self.bundle.sketch_latents[target_id]
            cluster.target_s = jointspace.project_latent(cluster.target_v, self.stack.fc)

        session.query = sketch
        session.query_latent = code.mu
        session.last_results = results
        session.last_clusters = clusters
        session.iteration += 1
        return results, clusters

    def perturb(
        self, session: SearchSession, weights: list[float], method: str = "backprop"
    ) -> tuple[PerturbationResult, list]:
        """Returns the perturbation plus the 10-frame morph toward it."""
        if session.last_clusters is None or session.query_latent is None:
            raise ValueError("no prior search in this session; search before requesting a suggestion")
        clusters = session.last_clusters.clusters
        if len(weights) != len(clusters):
            raise ValueError(f"{len(weights)} weights for {len(clusters)} clusters")
        targets = [PerturbTarget(latent=c.target_v, search=c.target_s) for c in clusters]
        request = PerturbationRequest(
            query_latent=session.query_latent,
            targets=targets,
            weights=list(weights),
            method=method,
            steps=self.config.perturb.steps,
            learning_rate=self.config.perturb.learning_rate,
            alpha=self.config.perturb.alpha,
        )
        frames = self.engine.interpolation_sequence(request, steps=MORPH_STEPS)
        result = self.engine.perturb(request)
        session.last_clusters.weights = [min(1.0, max(0.0, float(w))) for w in weights]
        session.suggestion = result.suggestion
        session.suggestion_latent = result.new_latent
        session.iteration += 1
        return result, [f.suggestion for f in frames]

    def accept_suggestion(self, session: SearchSession) -> Sketch:
        if session.suggestion is None:
            raise ValueError("no suggestion to accept")
        session.query = session.suggestion
        session.query_latent = session.suggestion_latent
        return session.query

    def replace_query(self, session: SearchSession, sketch: Sketch) -> None:
        session.query = sketch
        session.query_latent = None  # re-encoded on next search
