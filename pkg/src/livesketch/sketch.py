"""Stroke-sequence data model and corpus-level transforms.

A drawing is an ordered sequence of (dx, dy, lift) rows: relative pen
movements with a flag marking the last point of each stroke. The final row
always has lift=1.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StrokePoint:
    dx: float
    dy: float
    lift: int


class Sketch:
    """Immutable stroke sequence with an optional class label."""

    __slots__ = ("points", "label")

    def __init__(self, points, label: str | None = None):
        arr = np.array(points, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] == 0:
            raise ValueError(f"sketch needs a non-empty (n, 3) point array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr[:, :2])):
            raise ValueError("sketch offsets must be finite")
        lifts = arr[:, 2]
        if not np.all((lifts == 0) | (lifts == 1)):
            raise ValueError("lift flags must be 0 or 1")
        if lifts[-1] != 1:
            raise ValueError("final point must have lift=1")
        arr.setflags(write=False)
        self.points = arr
        self.label = label

    def __len__(self) -> int:
        return self.points.shape[0]

    def point(self, i: int) -> StrokePoint:
        dx, dy, lift = self.points[i]
        return StrokePoint(float(dx), float(dy), int(lift))

    def absolute(self) -> np.ndarray:
        """Cumulative (n, 2) pen positions, first point at the origin offset."""
        return np.cumsum(self.points[:, :2], axis=0)

    def strokes(self) -> list[np.ndarray]:
        """Absolute coordinates split at pen lifts; one (k, 2) array per stroke."""
        coords = self.absolute()
        ends = np.flatnonzero(self.points[:, 2] == 1)
        out = []
        start = 0
        for end in ends:
            out.append(coords[start : end + 1])
            start = end + 1
        return out

    @property
    def stroke_count(self) -> int:
        return int(np.sum(self.points[:, 2] == 1))

    def to_json(self) -> str:
        return json.dumps({"class": self.label, "points": [[p[0], p[1], int(p[2])] for p in self.points.tolist()]})

    @classmethod
    def from_json(cls, text: str) -> "Sketch":
        rec = json.loads(text)
        return cls(rec["points"], label=rec.get("class"))

    def __eq__(self, other):
        return isinstance(other, Sketch) and self.label == other.label and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash((self.label, self.points.tobytes()))


class RasterCanvas:
    """Grayscale canvas with intensities in [0, 1]."""

    __slots__ = ("pixels",)

    def __init__(self, pixels):
        arr = np.array(pixels, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"canvas must be 2-D, got shape {arr.shape}")
        if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("canvas intensities must lie in [0, 1]")
        arr.setflags(write=False)
        self.pixels = arr

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def sketch_from_absolute(strokes: list[np.ndarray], label: str | None = None) -> Sketch:
    """Build the relative 3-tuple coding from absolute per-stroke coordinates.

    The first point's offset is (0, 0); each later point is its delta from
    the previous point, including the jump across a pen lift.
    """
    rows = []
    prev = None
    for stroke in strokes:
        stroke = np.asarray(stroke, dtype=np.float64)
        if stroke.ndim != 2 or stroke.shape[1] != 2 or len(stroke) == 0:
            raise ValueError("each stroke must be a non-empty (k, 2) array")
        for j, pt in enumerate(stroke):
            if prev is None:
                dx, dy = 0.0, 0.0
            else:
                dx, dy = pt[0] - prev[0], pt[1] - prev[1]
            rows.append((dx, dy, 1 if j == len(stroke) - 1 else 0))
            prev = pt
    return Sketch(np.array(rows), label=label)


@dataclass(frozen=True)
class ParseIssue:
    line_no: int
    message: str


def parse_ndjson(lines) -> tuple[list[Sketch], list[ParseIssue]]:
    """Parse newline-delimited drawing records.

    Each line carries a ``drawing`` array of per-stroke [xs, ys] absolute
    coordinate lists and an optional ``word`` class label. Malformed lines
    are collected as issues; empty drawings are skipped with a warning.
    """
    sketches: list[Sketch] = []
    issues: list[ParseIssue] = []
    for line_no, raw in enumerate(lines, start=1):
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8", errors="replace")
        raw = raw.strip()
        if not raw:
            continue
        try:
            rec = json.loads(raw)
            strokes = []
            for stroke in rec["drawing"]:
                xs, ys = stroke[0], stroke[1]
                if len(xs) != len(ys):
                    raise ValueError("stroke x/y lengths differ")
                if len(xs) == 0:
                    continue
                strokes.append(np.column_stack([xs, ys]).astype(np.float64))
            if not strokes:
                issues.append(ParseIssue(line_no, "empty drawing, record skipped"))
                log.warning("line %d: empty drawing, record skipped", line_no)
                continue
            sketches.append(sketch_from_absolute(strokes, label=rec.get("word")))
        except Exception as exc:  # noqa: BLE001 - per-record isolation
            issues.append(ParseIssue(line_no, str(exc)))
    return sketches, issues


def load_ndjson(path) -> tuple[list[Sketch], list[ParseIssue]]:
    with open(path, "rb") as fh:
        return parse_ndjson(fh)


# -- simplification ---------------------------------------------------------------


def _point_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each point to segment a-b (degenerate segment allowed)."""
    d = b - a
    den = float(d @ d)
    if den == 0.0:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ d / den, 0.0, 1.0)
    proj = a + t[:, None] * d
    return np.linalg.norm(points - proj, axis=1)


def _rdp_mask(stroke: np.ndarray, epsilon: float) -> np.ndarray:
    n = len(stroke)
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        first, last = stack.pop()
        if last - first < 2:
            continue
        seg = stroke[first + 1 : last]
        dist = _point_segment_distance(seg, stroke[first], stroke[last])
        idx = int(np.argmax(dist))
        if dist[idx] > epsilon:
            split = first + 1 + idx
            keep[split] = True
            stack.append((first, split))
            stack.append((split, last))
    return keep


def rdp_simplify(sketch: Sketch, epsilon: float) -> Sketch:
    """Per-stroke polyline simplification; endpoints and lifts preserved.

    Offsets of surviving points are formed by summing the original deltas
    they absorb, so a pass that removes nothing returns the input unchanged
    and the operation is idempotent.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if epsilon == 0:
        return sketch
    pts = sketch.points
    coords = sketch.absolute()
    keep = np.zeros(len(pts), dtype=bool)
    start = 0
    for end in np.flatnonzero(pts[:, 2] == 1):
        keep[start : end + 1] = _rdp_mask(coords[start : end + 1], epsilon)
        start = end + 1
    if keep.all():
        return sketch
    kept_idx = np.flatnonzero(keep)
    rows = np.empty((len(kept_idx), 3))
    prev = -1
    for r, j in enumerate(kept_idx):
        rows[r, :2] = pts[prev + 1 : j + 1, :2].sum(axis=0)
        rows[r, 2] = pts[j, 2]
        prev = j
    return Sketch(rows, label=sketch.label)


def fit_to_length(sketch: Sketch, max_len: int, epsilon: float = 1e-3) -> Sketch:
    """Simplify with growing tolerance until the sketch fits max_len points.

    If even endpoint-only strokes exceed the budget, the shortest strokes
    (by arc length) are dropped, original order otherwise preserved.
    """
    out = sketch
    eps = epsilon
    for _ in range(60):
        if len(out) <= max_len:
            return out
        eps = max(eps * 1.7, 1e-3)
        out = rdp_simplify(sketch, eps)
    strokes = out.strokes()
    lengths = [float(np.linalg.norm(np.diff(s, axis=0), axis=1).sum()) for s in strokes]
    order = sorted(range(len(strokes)), key=lambda i: (lengths[i], i))
    dropped = set()
    total = len(out)
    for i in order:
        if total <= max_len or len(dropped) == len(strokes) - 1:
            break
        dropped.add(i)
        total -= len(strokes[i])
    kept = [s for i, s in enumerate(strokes) if i not in dropped]
    result = sketch_from_absolute(kept, label=sketch.label)
    if len(result) > max_len:
        result = sketch_from_absolute([s[: max(2, max_len // max(1, len(kept)))] for s in kept], label=sketch.label)
    return result


# -- corpus transforms ---------------------------------------------------------------


def normalize_offsets(corpus: list[Sketch]) -> tuple[list[Sketch], float]:
    """Divide every offset by the pooled standard deviation across the corpus."""
    if not corpus:
        raise ValueError("empty corpus")
    offsets = np.concatenate([s.points[:, :2].ravel() for s in corpus])
    scale = float(np.std(offsets))
    if scale == 0.0:
        raise ValueError("corpus offsets have zero variance")
    out = []
    for s in corpus:
        pts = s.points.copy()
        pts[:, :2] /= scale
        out.append(Sketch(pts, label=s.label))
    return out, scale


def scale_offsets(sketch: Sketch, factor: float) -> Sketch:
    pts = sketch.points.copy()
    pts[:, :2] *= factor
    return Sketch(pts, label=sketch.label)


def shuffle_strokes(sketch: Sketch, seed: int) -> Sketch:
    """Permute stroke order (points within each stroke keep their order)."""
    strokes = sketch.strokes()
    if len(strokes) <= 1:
        return sketch
    perm = np.random.default_rng(seed).permutation(len(strokes))
    return sketch_from_absolute([strokes[i] for i in perm], label=sketch.label)
