"""Query perturbation toward weighted search targets.

Three strategies move a query's latent code toward target latents:

* linear blending of latent differences;
* spherical interpolation (angle-fraction steps, targets applied in order);
* gradient descent on the latent, minimizing the weighted squared search-
  space distance to the targets plus a proximity regularizer that keeps the
  updated code near the original (the projection weights stay fixed; only
  the latent moves).

The perturbed latent decodes back to strokes through the sequence decoder.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import grad, seqvae
from .grad import Tensor, backward
from .jointspace import FcStackParams, project_latent, project_latent_tape
from .optim import AdamState, adam_step
from .sketch import Sketch

log = logging.getLogger(__name__)

DEFAULT_ALPHA = 0.1
DEFAULT_STEPS = 200
DEFAULT_LEARNING_RATE = 0.05
NORM_SMOOTHING = 1e-8

METHODS = ("linear", "slerp", "backprop")


@dataclass
class PerturbTarget:
    latent: np.ndarray  # target code in the recurrent latent space
    search: np.ndarray  # the same target in search space


@dataclass
class PerturbationRequest:
    query_latent: np.ndarray
    targets: list[PerturbTarget]
    weights: list[float]
    method: str = "backprop"
    steps: int = DEFAULT_STEPS
    learning_rate: float = DEFAULT_LEARNING_RATE
    alpha: float = DEFAULT_ALPHA
    divisor: int | None = None  # slots offered to the user; defaults to len(targets)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if len(self.targets) != len(self.weights):
            raise ValueError(f"{len(self.weights)} weights for {len(self.targets)} targets")
        self.weights = [min(1.0, max(0.0, float(w))) for w in self.weights]


@dataclass
class PerturbationResult:
    new_latent: np.ndarray
    suggestion: Sketch
    method: str
    loss_trace: list[float] = field(default_factory=list)
    distances_before: list[float] = field(default_factory=list)
    distances_after: list[float] = field(default_factory=list)
    hit_max_steps: bool = False
    fallback_used: bool = False
    aborted: bool = False


def blend_linear(request: PerturbationRequest) -> np.ndarray:
    """Weighted sum of latent differences added to the query code."""
    v = request.query_latent.astype(np.float64).copy()
    out = v.copy()
    for target, w in zip(request.targets, request.weights):
        out += w * (target.latent.astype(np.float64) - v)
    return out


def _slerp_pair(a: np.ndarray, b: np.ndarray, t: float) -> tuple[np.ndarray, bool]:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return a + t * (b - a), True
    cos = float(np.clip(a @ b / (na * nb), -1.0, 1.0))
    theta = float(np.arccos(cos))
    if theta < 1e-9:
        return a + t * (b - a), False
    if np.pi - theta < 1e-6:
        log.warning("antiparallel latents, falling back to linear interpolation")
        return a + t * (b - a), True
    s = np.sin(theta)
    return (np.sin((1.0 - t) * theta) * a + np.sin(t * theta) * b) / s, False


def blend_spherical(request: PerturbationRequest) -> tuple[np.ndarray, bool]:
    """Targets applied sequentially, each by its own angle fraction."""
    v = request.query_latent.astype(np.float64).copy()
    fell_back = False
    for target, w in zip(request.targets, request.weights):
        if w == 0.0:
            continue
        v, fb = _slerp_pair(v, target.latent.astype(np.float64), w)
        fell_back = fell_back or fb
    return v, fell_back


def descend_latent(request: PerturbationRequest, fc: FcStackParams) -> tuple[np.ndarray, list[float], bool]:
    """Adam descent on the latent; returns the best-loss iterate and the trace.

    The objective is mean-over-slots weighted squared search distance plus
    alpha times the (smoothed) latent displacement norm. Projection weights
    are read-only. A non-finite loss aborts, returning the best prior iterate.
    """
    origin = request.query_latent.astype(np.float64)
    divisor = request.divisor or max(1, len(request.targets))
    target_s = [Tensor(t.search.reshape(1, -1)) for t in request.targets]

    v = Tensor(origin.reshape(1, -1).copy(), requires_grad=True)
    state = AdamState(lr=request.learning_rate)
    origin_t = Tensor(origin.reshape(1, -1))

    def objective() -> Tensor:
        s = project_latent_tape(v, fc)
        total = None
        for ts, w in zip(target_s, request.weights):
            term = grad.squared_distance(s, ts) * (w / divisor)
            total = term if total is None else total + term
        reg = grad.l2_norm(v - origin_t, eps=NORM_SMOOTHING) * request.alpha
        return reg if total is None else total + reg

    trace: list[float] = []
    best_v = v.data[0].copy()
    best_loss = np.inf
    aborted = False
    for _ in range(request.steps):
        loss = objective()
        value = loss.item()
        if not np.isfinite(value):
            aborted = True
            break
        trace.append(value)
        if value < best_loss:
            best_loss = value
            best_v = v.data[0].copy()
        backward(loss)
        adam_step({"v": v}, {"v": v.grad}, state)
    if not aborted:
        final = objective().item()
        if np.isfinite(final):
            trace.append(final)
            if final < best_loss:
                best_loss = final
                best_v = v.data[0].copy()
        else:
            aborted = True
    return best_v, trace, aborted


@dataclass
class PerturbationEngine:
    """Binds the projection stack and decoder needed to serve suggestions."""

    fc: FcStackParams
    decoder: seqvae.DecoderParams
    max_decode_steps: int = 96

    def search_distances(self, latent: np.ndarray, targets: list[PerturbTarget]) -> list[float]:
        s = project_latent(latent, self.fc)
        return [float(np.linalg.norm(s - t.search)) for t in targets]

    def perturb(self, request: PerturbationRequest) -> PerturbationResult:
        before = self.search_distances(request.query_latent, request.targets)
        trace: list[float] = []
        fell_back = False
        aborted = False
        if request.method == "linear":
            new_v = blend_linear(request)
        elif request.method == "slerp":
            new_v, fell_back = blend_spherical(request)
        else:
            new_v, trace, aborted = descend_latent(request, self.fc)
        decoded = seqvae.decode(new_v, self.decoder, max_steps=self.max_decode_steps)
        return PerturbationResult(
            new_latent=new_v,
            suggestion=decoded.sketch,
            method=request.method,
            loss_trace=trace,
            distances_before=before,
            distances_after=self.search_distances(new_v, request.targets),
            hit_max_steps=decoded.hit_max_steps,
            fallback_used=fell_back,
            aborted=aborted,
        )

    def interpolation_sequence(self, request: PerturbationRequest, steps: int = 10) -> list[PerturbationResult]:
        """Suggestions along the path: weights scaled from 0 to full, each solved independently."""
        if steps < 2:
            raise ValueError("need at least 2 steps")
        out = []
        for i in range(steps):
            frac = i / (steps - 1)
            scaled = PerturbationRequest(
                query_latent=request.query_latent,
                targets=request.targets,
                weights=[w * frac for w in request.weights],
                method=request.method,
                steps=request.steps,
                learning_rate=request.learning_rate,
                alpha=request.alpha,
                divisor=request.divisor,
            )
            out.append(self.perturb(scaled))
        return out


def distance_report(result: PerturbationResult) -> dict:
    """Per-target search distances before and after, plus their deltas."""
    return {
        "method": result.method,
        "before": list(result.distances_before),
        "after": list(result.distances_after),
        "delta": [a - b for a, b in zip(result.distances_after, result.distances_before)],
    }
