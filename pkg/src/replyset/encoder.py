"""Shared message/reply vector space: hashed TF-IDF encoder and matrix IO.

The encoder stands in for a trained dual-encoder scorer: everything downstream
depends only on dot products in the shared space, so any row-compatible
embedding matrix can be loaded in its place.
"""

from __future__ import annotations

import hashlib
import math
import struct
from collections import Counter
from pathlib import Path

import numpy as np

from .corpus import CandidatePool, DialoguePair, normalize_and_tokenize

_MAGIC = b"EMB1"


class MatrixFormatError(ValueError):
    """An embedding matrix file is malformed."""


def save_matrix(matrix: np.ndarray, path: str | Path) -> None:
    """Write a matrix as little-endian ``EMB1 | rows u32 | dim u32 | float32 data``."""
    arr = np.asarray(matrix)
    if arr.ndim != 2:
        raise MatrixFormatError("matrix must be 2-dimensional")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise MatrixFormatError("empty matrix")
    if not np.all(np.isfinite(arr)):
        raise MatrixFormatError("matrix contains non-finite values")
    rows, dim = arr.shape
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", rows, dim))
        fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_matrix(path: str | Path) -> np.ndarray:
    """Read a matrix written by :func:`save_matrix`; round-trip is bit-exact."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != _MAGIC:
        raise MatrixFormatError("bad magic")
    if len(blob) < 12:
        raise MatrixFormatError("truncated payload")
    rows, dim = struct.unpack("<II", blob[4:12])
    if rows == 0 or dim == 0:
        raise MatrixFormatError("empty matrix")
    expected = rows * dim * 4
    payload = blob[12:]
    if len(payload) < expected:
        raise MatrixFormatError("truncated payload")
    if len(payload) > expected:
        raise MatrixFormatError(f"size mismatch: {len(payload) - expected} trailing bytes")
    data = np.frombuffer(payload, dtype="<f4").reshape(rows, dim).copy()
    if not np.all(np.isfinite(data)):
        raise MatrixFormatError("matrix contains non-finite values")
    return data


def _hash_token(token: str, seed: int, dim: int) -> tuple[int, float]:
    """Deterministic (coordinate, sign) for a token under the given seed."""
    digest = hashlib.blake2b(
        token.encode("utf-8"), digest_size=16, key=seed.to_bytes(8, "little")
    ).digest()
    coord = int.from_bytes(digest[:8], "little") % dim
    sign = 1.0 if digest[8] & 1 else -1.0
    return coord, sign


class HashedTfidfEncoder:
    """Signed feature-hashing TF-IDF encoder with L2-normalized outputs.

    Fully determined by (seed, dim, corpus); immutable once fitted and safe to
    call from any number of threads.
    """

    def __init__(self, dim: int, seed: int, idf: dict[str, float], n_documents: int):
        if dim < 64 or dim & (dim - 1) != 0:
            raise ValueError("dim must be a power of two >= 64")
        self.dim = dim
        self.seed = seed
        self.idf = idf
        self.n_documents = n_documents
        self.default_idf = math.log(1.0 + n_documents) + 1.0
        # token -> (coordinate, sign * idf), precomputed for the fitted vocabulary
        self._table = {}
        for token, weight in idf.items():
            coord, sign = _hash_token(token, seed, dim)
            self._table[token] = (coord, sign * weight)

    def _entry(self, token: str) -> tuple[int, float]:
        entry = self._table.get(token)
        if entry is None:
            coord, sign = _hash_token(token, self.seed, self.dim)
            return coord, sign * self.default_idf
        return entry

    def encode(self, text: str) -> np.ndarray:
        """Encode text to a unit-norm float32 vector (zero vector if no tokens)."""
        tokens = normalize_and_tokenize(text)
        vec = np.zeros(self.dim, dtype=np.float64)
        for token, count in Counter(tokens).items():
            coord, weight = self._entry(token)
            vec[coord] += count * weight
        norm = math.sqrt(float(vec @ vec))
        if norm == 0.0:
            return np.zeros(self.dim, dtype=np.float32)
        return (vec / norm).astype(np.float32)


def fit_encoder(
    pool: CandidatePool, pairs: list[DialoguePair], dim: int = 256, seed: int = 0
) -> HashedTfidfEncoder:
    """Fit IDF weights over the corpus, treating every message and reply as a document.

    ``idf(t) = log((1 + D) / (1 + df(t))) + 1`` with D the document count.
    """
    if not pairs:
        raise ValueError("cannot fit an encoder on an empty corpus")
    df: Counter[str] = Counter()
    n_documents = 0
    for pair in pairs:
        for text in (pair.context, pair.reply):
            n_documents += 1
            df.update(set(normalize_and_tokenize(text)))
    idf = {t: math.log((1.0 + n_documents) / (1.0 + d)) + 1.0 for t, d in df.items()}
    return HashedTfidfEncoder(dim=dim, seed=seed, idf=idf, n_documents=n_documents)


def encode_pool(encoder: HashedTfidfEncoder, pool: CandidatePool) -> np.ndarray:
    """Row ``i`` is ``encode(pool.replies[i])``; shape (len(pool), dim)."""
    out = np.empty((len(pool), encoder.dim), dtype=np.float32)
    for i, text in enumerate(pool.replies):
        out[i] = encoder.encode(text)
    return out


def encode_messages(
    encoder: HashedTfidfEncoder, pairs: list[DialoguePair], side: str = "message"
) -> np.ndarray:
    """Encode the message or reply side of a corpus, one row per pair."""
    if side not in ("message", "reply"):
        raise ValueError("side must be 'message' or 'reply'")
    out = np.empty((len(pairs), encoder.dim), dtype=np.float32)
    for i, pair in enumerate(pairs):
        out[i] = encoder.encode(pair.context if side == "message" else pair.reply)
    return out


def augment_query(x_vec: np.ndarray, y_vec: np.ndarray, alpha: float) -> np.ndarray:
    """Interpolate message and ground-truth reply embeddings: ``a*x + (1-a)*y``.

    No re-normalization is applied.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if x_vec.shape != y_vec.shape:
        raise ValueError(f"dim mismatch: {x_vec.shape} vs {y_vec.shape}")
    return alpha * x_vec + (1.0 - alpha) * y_vec
