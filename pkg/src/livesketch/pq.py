"""Product-quantized nearest-neighbor index with an exact brute-force oracle.

Vectors are split into M subspaces, each quantized against K centroids
learned by seeded k-means. Queries run asymmetric distance computation: a
(M, K) table of query-to-centroid squared distances is gathered through the
stored codes and summed. An exact mode keeps the raw float32 vectors and
routes queries through the brute-force path instead.

Index file layout (little-endian, versioned):

    magic    4 bytes  b"PQIX"
    version  u32      = 1
    dim      u32      vector dimensionality
    M        u32      subspaces
    K        u32      centroids per subspace
    count    u64      stored items
    flags    u32      bit 0: raw vectors present (exact mode)
    codebook float32[M * K * dim/M]
    ids      int64[count]
    codes    uint8[count * M]
    raw      float32[count * dim]        (only if flag bit 0)

All payload arrays are written in C order; the round trip is bit-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grad import DimensionError

_MAGIC = b"PQIX"
_VERSION = 1


@dataclass
class PQCodebook:
    centroids: np.ndarray  # (M, K, dim/M) float32

    @property
    def subspaces(self) -> int:
        return self.centroids.shape[0]

    @property
    def centroids_per_subspace(self) -> int:
        return self.centroids.shape[1]

    @property
    def dim(self) -> int:
        return self.centroids.shape[0] * self.centroids.shape[2]


def _kmeans(points: np.ndarray, k: int, rng: np.random.Generator, iters: int) -> np.ndarray:
    """Seeded k-means with k-means++ init; empty clusters respawn on the farthest point."""
    n = len(points)
    centroids = np.empty((k, points.shape[1]), dtype=points.dtype)
    centroids[0] = points[int(rng.integers(n))]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            centroids[j:] = centroids[0]
            break
        centroids[j] = points[int(rng.choice(n, p=d2 / total))]
        d2 = np.minimum(d2, ((points - centroids[j]) ** 2).sum(axis=1))
    for _ in range(iters):
        dist = (points**2).sum(axis=1)[:, None] - 2.0 * points @ centroids.T + (centroids**2).sum(axis=1)[None, :]
        assign = dist.argmin(axis=1)
        moved = False
        for j in range(k):
            members = assign == j
            if members.any():
                mean = points[members].mean(axis=0)
                if not np.array_equal(mean, centroids[j]):
                    centroids[j] = mean
                    moved = True
            else:
                far = int(dist.min(axis=1).argmax())
                centroids[j] = points[far]
                moved = True
        if not moved:
            break
    return centroids


def train_codebook(
    vectors: np.ndarray,
    subspaces: int = 8,
    centroids: int = 256,
    seed: int = 0,
    iters: int = 25,
    max_train: int | None = 25_000,
) -> PQCodebook:
    vectors = np.asarray(vectors, dtype=np.float32)
    n, dim = vectors.shape
    if dim % subspaces != 0:
        raise DimensionError(f"dimension {dim} not divisible by {subspaces} subspaces")
    if n < centroids:
        raise ValueError(f"need at least {centroids} training vectors, got {n}")
    rng = np.random.default_rng(seed)
    if max_train is not None and n > max_train:
        pick = rng.choice(n, size=max_train, replace=False)
        vectors = vectors[pick]
    sub = dim // subspaces
    books = np.empty((subspaces, centroids, sub), dtype=np.float32)
    for m in range(subspaces):
        books[m] = _kmeans(vectors[:, m * sub : (m + 1) * sub], centroids, np.random.default_rng(seed + 1 + m), iters)
    return PQCodebook(books)


def encode_item(vector: np.ndarray, codebook: PQCodebook) -> np.ndarray:
    return encode_batch(np.asarray(vector, dtype=np.float32)[None, :], codebook)[0]


def encode_batch(vectors: np.ndarray, codebook: PQCodebook) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float32)
    if vectors.shape[1] != codebook.dim:
        raise DimensionError(f"vector dim {vectors.shape[1]} != codebook dim {codebook.dim}")
    m_count = codebook.subspaces
    sub = codebook.dim // m_count
    codes = np.empty((len(vectors), m_count), dtype=np.uint8)
    for m in range(m_count):
        pts = vectors[:, m * sub : (m + 1) * sub]
        cent = codebook.centroids[m]
        dist = (pts**2).sum(axis=1)[:, None] - 2.0 * pts @ cent.T + (cent**2).sum(axis=1)[None, :]
        codes[:, m] = dist.argmin(axis=1)
    return codes


@dataclass
class ResultList:
    ids: np.ndarray
    distances: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self):
        return iter(zip(self.ids.tolist(), self.distances.tolist()))


@dataclass
class PQIndex:
    codebook: PQCodebook
    codes: np.ndarray  # (n, M) uint8
    ids: np.ndarray  # (n,) int64
    raw: np.ndarray | None = None  # (n, dim) float32, exact mode only
    _id_set: set = field(default_factory=set, repr=False)

    def __post_init__(self):
        self._id_set = set(self.ids.tolist())

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def exact(self) -> bool:
        return self.raw is not None


def build(vectors: np.ndarray, ids, config: dict | None = None) -> PQIndex:
    """Batch construction; config keys: subspaces, centroids, seed, iters, exact."""
    cfg = {"subspaces": 8, "centroids": 256, "seed": 0, "iters": 25, "exact": False, "max_train": 25_000}
    cfg.update(config or {})
    vectors = np.asarray(vectors, dtype=np.float32)
    ids = np.asarray(ids, dtype=np.int64)
    if len(ids) != len(vectors):
        raise DimensionError(f"{len(ids)} ids for {len(vectors)} vectors")
    if len(np.unique(ids)) != len(ids):
        raise ValueError("duplicate ids in index build")
    centroids = min(cfg["centroids"], len(vectors))
    codebook = train_codebook(
        vectors, cfg["subspaces"], centroids, seed=cfg["seed"], iters=cfg["iters"], max_train=cfg["max_train"]
    )
    codes = encode_batch(vectors, codebook)
    raw = vectors.copy() if cfg["exact"] else None
    return PQIndex(codebook, codes, ids, raw)


def add(index: PQIndex, item_id: int, vector: np.ndarray) -> None:
    if item_id in index._id_set:
        raise ValueError(f"duplicate id {item_id}")
    code = encode_item(vector, index.codebook)
    index.codes = np.concatenate([index.codes, code[None, :]])
    index.ids = np.concatenate([index.ids, np.array([item_id], dtype=np.int64)])
    if index.raw is not None:
        index.raw = np.concatenate([index.raw, np.asarray(vector, dtype=np.float32)[None, :]])
    index._id_set.add(item_id)


def adc_squared(index: PQIndex, query: np.ndarray) -> np.ndarray:
    """Asymmetric squared distances of a query to every stored code."""
    query = np.asarray(query, dtype=np.float64)
    if query.shape != (index.codebook.dim,):
        raise DimensionError(f"query shape {query.shape} != ({index.codebook.dim},)")
    m_count = index.codebook.subspaces
    sub = index.codebook.dim // m_count
    out = np.zeros(len(index.ids))
    for m in range(m_count):
        table = ((index.codebook.centroids[m].astype(np.float64) - query[m * sub : (m + 1) * sub]) ** 2).sum(axis=1)
        out += table[index.codes[:, m]]
    return out


def _top_k(ids: np.ndarray, sq: np.ndarray, k: int) -> ResultList:
    order = np.lexsort((ids, sq))[:k]
    return ResultList(ids[order].copy(), np.sqrt(sq[order]))


def knn(index: PQIndex, query: np.ndarray, k: int) -> ResultList:
    """Top-k by ADC (or exactly, in exact mode); ties break by ascending id."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(index.ids) == 0:
        return ResultList(np.empty(0, dtype=np.int64), np.empty(0))
    if index.exact:
        return brute_force(index.raw, query, k, ids=index.ids)
    return _top_k(index.ids, adc_squared(index, query), k)


def brute_force(vectors: np.ndarray, query: np.ndarray, k: int, ids=None) -> ResultList:
    """Exact L2 ranking; the correctness oracle for the quantized path."""
    vectors = np.asarray(vectors)
    query = np.asarray(query, dtype=vectors.dtype if vectors.dtype == np.float32 else np.float64)
    if ids is None:
        ids = np.arange(len(vectors), dtype=np.int64)
    else:
        ids = np.asarray(ids, dtype=np.int64)
    diff = vectors.astype(np.float64) - query.astype(np.float64)
    sq = (diff * diff).sum(axis=1)
    return _top_k(ids, sq, k)


# -- persistence --------------------------------------------------------------


def save_index(index: PQIndex, path) -> None:
    cb = index.codebook.centroids
    flags = 1 if index.raw is not None else 0
    header = struct.pack(
        "<4sIIIIQI", _MAGIC, _VERSION, cb.shape[0] * cb.shape[2], cb.shape[0], cb.shape[1], len(index.ids), flags
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(cb, dtype=np.float32).tobytes())
        fh.write(np.ascontiguousarray(index.ids, dtype=np.int64).tobytes())
        fh.write(np.ascontiguousarray(index.codes, dtype=np.uint8).tobytes())
        if index.raw is not None:
            fh.write(np.ascontiguousarray(index.raw, dtype=np.float32).tobytes())


def load_index(path) -> PQIndex:
    with open(path, "rb") as fh:
        head = fh.read(struct.calcsize("<4sIIIIQI"))
        magic, version, dim, m_count, k_count, count, flags = struct.unpack("<4sIIIIQI", head)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not an index file")
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported index version {version}")
        sub = dim // m_count
        cb = np.frombuffer(fh.read(4 * m_count * k_count * sub), dtype=np.float32).reshape(m_count, k_count, sub)
        ids = np.frombuffer(fh.read(8 * count), dtype=np.int64).copy()
        codes = np.frombuffer(fh.read(m_count * count), dtype=np.uint8).reshape(count, m_count).copy()
        raw = None
        if flags & 1:
            raw = np.frombuffer(fh.read(4 * count * dim), dtype=np.float32).reshape(count, dim).copy()
    return PQIndex(PQCodebook(cb.copy()), codes, ids, raw)
