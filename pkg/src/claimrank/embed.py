"""Dense-vector store for claim/title/body-sentence embeddings.

The store is populated either from a vector file produced by an offline
encoder-export tool, or from the built-in deterministic hash embedder so
the engine stays testable without any neural runtime.

Vector file format (shared with the exporter):
  header line (ASCII):  CLAIMVEC 1 <text|binary> <dim> <count> <encoder_id>
  text record:          doc_id<TAB>field<TAB>sentence_index<TAB>v1 v2 ... vdim
                        (sentence_index is "-" for whole-field vectors)
  binary record:        u16-LE key length, then the key bytes
                        ("doc_id<TAB>field<TAB>sentence_index"), then
                        dim little-endian float32 values.
Values are stored as float32; import -> export -> import round-trips
bit-exactly.
"""
from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import VerifiedClaimStore
from .runfiles import RankedItem
from .textproc import split_sentences, tokenize

FIELD_VERCLAIM = "verclaim"
FIELD_TITLE = "title"
FIELD_BODY = "body"
FIELD_INPUT = "input"

VECTOR_MAGIC = "CLAIMVEC"
VECTOR_VERSION = 1

Key = tuple[str, str, "int | None"]


class VectorFileError(ValueError):
    """Raised for malformed vector files; carries file offset/line context."""

    def __init__(self, message: str, *, path=None, line: int | None = None, offset: int | None = None):
        ctx = ""
        if path is not None:
            ctx = f" [{path}"
            if line is not None:
                ctx += f":{line}"
            if offset is not None:
                ctx += f" @byte {offset}"
            ctx += "]"
        super().__init__(message + ctx)
        self.path = path
        self.line = line
        self.offset = offset


def _key_str(key: Key) -> str:
    doc_id, fieldname, idx = key
    return f"{doc_id}\t{fieldname}\t{'-' if idx is None else idx}"


def _parse_key(raw: str) -> Key:
    parts = raw.split("\t")
    if len(parts) != 3:
        raise ValueError(f"malformed vector key {raw!r}")
    doc_id, fieldname, idx = parts
    return doc_id, fieldname, (None if idx == "-" else int(idx))


class EmbeddingStore:
    """Keyed float32 vectors of one fixed dimensionality.

    Keys are (doc_id, field, sentence_index-or-None). Whole-field vectors
    use index None; body sentences use 0-based indexes.
    """

    def __init__(self, dim: int, encoder_id: str = "none"):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = dim
        self.encoder_id = encoder_id
        self._vectors: dict[Key, np.ndarray] = {}
        self._field_cache: dict[str, tuple[list[str], np.ndarray, np.ndarray]] = {}
        self._body_cache: dict[str, np.ndarray] = {}
        self._body_index: dict[str, list[int]] | None = None

    def add(self, key: Key, vector) -> None:
        vec = np.asarray(vector, dtype=np.float32)
        if vec.shape != (self.dim,):
            raise VectorFileError(f"vector for key {_key_str(key)!r} has length {vec.shape}, expected ({self.dim},)")
        if not np.all(np.isfinite(vec)):
            raise VectorFileError(f"non-finite value in vector for key {_key_str(key)!r}")
        if key in self._vectors:
            raise VectorFileError(f"duplicate vector key {_key_str(key)!r}")
        self._vectors[key] = vec
        self._field_cache.clear()
        self._body_cache.clear()
        self._body_index = None

    def get(self, doc_id: str, fieldname: str, index: int | None = None) -> np.ndarray:
        try:
            return self._vectors[(doc_id, fieldname, index)]
        except KeyError:
            raise KeyError(f"no vector for key {_key_str((doc_id, fieldname, index))!r}") from None

    def has(self, doc_id: str, fieldname: str, index: int | None = None) -> bool:
        return (doc_id, fieldname, index) in self._vectors

    def keys(self) -> list[Key]:
        return list(self._vectors)

    def __len__(self) -> int:
        return len(self._vectors)

    def field_matrix(self, fieldname: str) -> tuple[list[str], np.ndarray, np.ndarray]:
        """(sorted doc ids, stacked vectors, row norms) for whole-field keys."""
        cached = self._field_cache.get(fieldname)
        if cached is None:
            ids = sorted(d for d, f, i in self._vectors if f == fieldname and i is None)
            if ids:
                matrix = np.stack([self._vectors[(d, fieldname, None)] for d in ids]).astype(np.float64)
            else:
                matrix = np.zeros((0, self.dim), dtype=np.float64)
            norms = np.linalg.norm(matrix, axis=1)
            cached = (ids, matrix, norms)
            self._field_cache[fieldname] = cached
        return cached

    def body_matrix(self, doc_id: str) -> np.ndarray:
        """Body-sentence vectors of one doc, ordered by sentence index."""
        cached = self._body_cache.get(doc_id)
        if cached is None:
            if self._body_index is None:
                index: dict[str, list[int]] = {}
                for d, f, i in self._vectors:
                    if f == FIELD_BODY and i is not None:
                        index.setdefault(d, []).append(i)
                for idxs in index.values():
                    idxs.sort()
                self._body_index = index
            idxs = self._body_index.get(doc_id, [])
            if idxs:
                cached = np.stack([self._vectors[(doc_id, FIELD_BODY, i)] for i in idxs]).astype(np.float64)
            else:
                cached = np.zeros((0, self.dim), dtype=np.float64)
            self._body_cache[doc_id] = cached
        return cached


def import_vectors(path, expected_dim: int | None = None) -> EmbeddingStore:
    """Load a vector file, validating dimension, key uniqueness and finiteness."""
    path = Path(path)
    with open(path, "rb") as f:
        header = f.readline()
        try:
            tokens = header.decode("ascii").rstrip("\n").split(" ", 5)
        except UnicodeDecodeError as e:
            raise VectorFileError("unreadable header line", path=path, line=1) from e
        if len(tokens) < 5 or tokens[0] != VECTOR_MAGIC:
            raise VectorFileError("missing CLAIMVEC header", path=path, line=1)
        if int(tokens[1]) != VECTOR_VERSION:
            raise VectorFileError(f"unsupported vector format version {tokens[1]}", path=path, line=1)
        flavor = tokens[2]
        dim = int(tokens[3])
        count = int(tokens[4])
        encoder_id = tokens[5] if len(tokens) > 5 else "none"
        if expected_dim is not None and dim != expected_dim:
            raise VectorFileError(f"file dim {dim} != expected dim {expected_dim}", path=path, line=1)
        store = EmbeddingStore(dim=dim, encoder_id=encoder_id)

        if flavor == "text":
            for lineno, raw in enumerate(f, start=2):
                line = raw.decode("utf-8").rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 4:
                    raise VectorFileError("expected 4 tab-separated record fields", path=path, line=lineno)
                key = _parse_key("\t".join(parts[:3]))
                values = parts[3].split()
                if len(values) != dim:
                    raise VectorFileError(
                        f"vector for key {_key_str(key)!r} has {len(values)} values, expected {dim}",
                        path=path,
                        line=lineno,
                    )
                try:
                    vec = np.array([float(v) for v in values], dtype=np.float32)
                except ValueError as e:
                    raise VectorFileError(f"bad float in record for key {_key_str(key)!r}", path=path, line=lineno) from e
                try:
                    store.add(key, vec)
                except VectorFileError as e:
                    raise VectorFileError(str(e), path=path, line=lineno) from None
        elif flavor == "binary":
            record_bytes = 4 * dim
            while True:
                offset = f.tell()
                lenbuf = f.read(2)
                if not lenbuf:
                    break
                if len(lenbuf) < 2:
                    raise VectorFileError("truncated key length", path=path, offset=offset)
                (key_len,) = struct.unpack("<H", lenbuf)
                key_raw = f.read(key_len)
                if len(key_raw) < key_len:
                    raise VectorFileError("truncated key", path=path, offset=offset)
                try:
                    key = _parse_key(key_raw.decode("utf-8"))
                except (UnicodeDecodeError, ValueError) as e:
                    raise VectorFileError(f"bad key record: {e}", path=path, offset=offset) from e
                payload = f.read(record_bytes)
                if len(payload) < record_bytes:
                    raise VectorFileError(
                        f"truncated vector for key {_key_str(key)!r}", path=path, offset=offset
                    )
                vec = np.frombuffer(payload, dtype="<f4").astype(np.float32)
                try:
                    store.add(key, vec)
                except VectorFileError as e:
                    raise VectorFileError(str(e), path=path, offset=offset) from None
        else:
            raise VectorFileError(f"unknown flavor {flavor!r}", path=path, line=1)

    if len(store) != count:
        raise VectorFileError(f"header count {count} != record count {len(store)}", path=path)
    return store


def export_vectors(store: EmbeddingStore, path, flavor: str = "binary") -> None:
    """Write the store in deterministic key order."""
    if flavor not in ("text", "binary"):
        raise ValueError(f"unknown flavor {flavor!r}")
    keys = sorted(store.keys(), key=lambda k: (k[0], k[1], -1 if k[2] is None else k[2]))
    header = f"{VECTOR_MAGIC} {VECTOR_VERSION} {flavor} {store.dim} {len(keys)} {store.encoder_id}\n"
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        for key in keys:
            vec = store.get(*key)
            if flavor == "text":
                values = " ".join(repr(float(v)) for v in vec)
                f.write(f"{_key_str(key)}\t{values}\n".encode("utf-8"))
            else:
                key_bytes = _key_str(key).encode("utf-8")
                f.write(struct.pack("<H", len(key_bytes)))
                f.write(key_bytes)
                f.write(vec.astype("<f4").tobytes())


def _hash64(data: str) -> int:
    digest = hashlib.blake2b(data.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def hash_embed(text: str, dim: int) -> np.ndarray:
    """Deterministic unit-norm embedding by signed feature hashing.

    Token unigrams and bigrams are hashed into dim buckets with a sign bit;
    the result is L2-normalized. Texts with no tokens map to the first
    basis vector so the output is never degenerate.
    """
    if dim < 8:
        raise ValueError(f"dim must be >= 8, got {dim}")
    tokens = tokenize(text)
    grams = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
    vec = np.zeros(dim, dtype=np.float64)
    for gram in grams:
        h = _hash64(gram)
        sign = 1.0 if (h >> 63) & 1 == 0 else -1.0
        vec[h % dim] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        vec[0] = 1.0
        return vec
    return vec / norm


def build_hash_store(
    claims: VerifiedClaimStore,
    dim: int,
    include_body: bool = True,
    inputs: Iterable = (),
    max_body_sentences: int | None = None,
) -> EmbeddingStore:
    """Fallback store: hash-embed ver_claims, titles, body sentences and
    optionally input claims (field "input")."""
    store = EmbeddingStore(dim=dim, encoder_id=f"hash-{dim}")
    for claim in claims:
        store.add((claim.id, FIELD_VERCLAIM, None), hash_embed(claim.ver_claim, dim))
        store.add((claim.id, FIELD_TITLE, None), hash_embed(claim.title, dim))
        if include_body:
            sentences = split_sentences(claim.body)
            if max_body_sentences is not None:
                sentences = sentences[:max_body_sentences]
            for i, sentence in enumerate(sentences):
                store.add((claim.id, FIELD_BODY, i), hash_embed(sentence, dim))
    for inp in inputs:
        store.add((inp.id, FIELD_INPUT, None), hash_embed(inp.text, dim))
    return store


def rank_by_cosine(query_vec, store: EmbeddingStore, fieldname: str, top_n: int) -> list[RankedItem]:
    """Exhaustive cosine ranking over one field's whole-field vectors."""
    if top_n < 1:
        raise ValueError(f"top_n must be >= 1, got {top_n}")
    q = np.asarray(query_vec, dtype=np.float64)
    if q.shape != (store.dim,):
        raise ValueError(f"query dim {q.shape} does not match store dim ({store.dim},)")
    ids, matrix, norms = store.field_matrix(fieldname)
    if not ids:
        return []
    qnorm = float(np.linalg.norm(q))
    if qnorm == 0.0:
        scores = np.zeros(len(ids))
    else:
        with np.errstate(divide="ignore", invalid="ignore"):
            scores = matrix @ q / (norms * qnorm)
        scores = np.where(norms > 0.0, scores, 0.0)
    order = np.lexsort((np.array(ids), -scores))[:top_n]
    return [
        RankedItem(doc_id=ids[i], score=float(scores[i]), rank=r + 1)
        for r, i in enumerate(order)
    ]


@dataclass(frozen=True)
class SentenceScoreSet:
    """Cosines of one query against a doc's ver_claim, title and body sentences."""

    doc_id: str
    cos_verclaim: float
    cos_title: float
    body_top: tuple[float, ...]

    def as_features(self) -> list[float]:
        return [self.cos_verclaim, self.cos_title, *self.body_top]


def _cos_rows(matrix: np.ndarray, q: np.ndarray, qnorm: float) -> np.ndarray:
    if matrix.shape[0] == 0:
        return np.zeros(0)
    norms = np.linalg.norm(matrix, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = matrix @ q / (norms * qnorm)
    return np.where(norms > 0.0, cos, 0.0)


def body_sentence_scores(query_vec, doc_id: str, store: EmbeddingStore, n: int) -> SentenceScoreSet:
    """Top-n body-sentence cosines (descending, zero-padded) plus the
    ver_claim and title cosines for one document.

    Raises if the doc's ver_claim or title vector is missing.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    q = np.asarray(query_vec, dtype=np.float64)
    if q.shape != (store.dim,):
        raise ValueError(f"query dim {q.shape} does not match store dim ({store.dim},)")
    if not store.has(doc_id, FIELD_VERCLAIM):
        raise KeyError(f"doc {doc_id!r} has no {FIELD_VERCLAIM} vector")
    if not store.has(doc_id, FIELD_TITLE):
        raise KeyError(f"doc {doc_id!r} has no {FIELD_TITLE} vector")
    qnorm = float(np.linalg.norm(q))
    if qnorm == 0.0:
        qnorm = 1.0
    vc = float(_cos_rows(store.get(doc_id, FIELD_VERCLAIM)[None, :].astype(np.float64), q, qnorm)[0])
    ti = float(_cos_rows(store.get(doc_id, FIELD_TITLE)[None, :].astype(np.float64), q, qnorm)[0])
    body_cos = np.sort(_cos_rows(store.body_matrix(doc_id), q, qnorm))[::-1][:n]
    padded = list(body_cos) + [0.0] * (n - len(body_cos))
    return SentenceScoreSet(doc_id=doc_id, cos_verclaim=vc, cos_title=ti, body_top=tuple(padded))


def sentence_score_matrix(
    query_vec, store: EmbeddingStore, n: int, doc_ids: Sequence[str] | None = None
) -> tuple[list[str], np.ndarray]:
    """Vectorized body_sentence_scores over many docs.

    Returns (doc_ids, features) with one [cos_verclaim, cos_title,
    body_top 1..n] row per doc. Docs default to every doc holding a
    ver_claim vector.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    q = np.asarray(query_vec, dtype=np.float64)
    if q.shape != (store.dim,):
        raise ValueError(f"query dim {q.shape} does not match store dim ({store.dim},)")
    vc_ids, vc_matrix, vc_norms = store.field_matrix(FIELD_VERCLAIM)
    if doc_ids is None:
        doc_ids = vc_ids
    qnorm = float(np.linalg.norm(q))
    if qnorm == 0.0:
        qnorm = 1.0
    features = np.zeros((len(doc_ids), 2 + n), dtype=np.float64)
    vc_pos = {d: i for i, d in enumerate(vc_ids)}
    ti_ids, ti_matrix, ti_norms = store.field_matrix(FIELD_TITLE)
    ti_pos = {d: i for i, d in enumerate(ti_ids)}
    with np.errstate(divide="ignore", invalid="ignore"):
        vc_cos = np.where(vc_norms > 0.0, vc_matrix @ q / (vc_norms * qnorm), 0.0)
        ti_cos = np.where(ti_norms > 0.0, ti_matrix @ q / (ti_norms * qnorm), 0.0)
    for row, doc_id in enumerate(doc_ids):
        if doc_id not in vc_pos:
            raise KeyError(f"doc {doc_id!r} has no {FIELD_VERCLAIM} vector")
        if doc_id not in ti_pos:
            raise KeyError(f"doc {doc_id!r} has no {FIELD_TITLE} vector")
        features[row, 0] = vc_cos[vc_pos[doc_id]]
        features[row, 1] = ti_cos[ti_pos[doc_id]]
        body_cos = np.sort(_cos_rows(store.body_matrix(doc_id), q, qnorm))[::-1][:n]
        features[row, 2 : 2 + len(body_cos)] = body_cos
    return list(doc_ids), features
