"""Sentence encoders behind one batch interface.

Specs:
  hash:<dim>   deterministic digest-based unit vectors; no ML runtime,
               meant for tests, smoke runs and offline environments
  st:<model>   sentence-transformers checkpoint (its own pooling)
  hf:<model>   plain transformer checkpoint; max-pooling over the
               penultimate hidden layer

Encoders are deterministic in eval mode, so re-running an export with the
same checkpoint produces a byte-identical file.
"""
from __future__ import annotations

import hashlib
from typing import Protocol, Sequence

import numpy as np


class Encoder(Protocol):
    name: str
    dim: int

    def encode(self, texts: Sequence[str]) -> np.ndarray: ...


class HashEncoder:
    """SHA-256 digest chain mapped to a unit vector; identical texts give
    identical vectors and the output never degenerates to zero."""

    def __init__(self, dim: int):
        if dim < 8:
            raise ValueError(f"dim must be >= 8, got {dim}")
        self.dim = dim
        self.name = f"hash:{dim}"

    def _one(self, text: str) -> np.ndarray:
        seed = text.encode("utf-8", errors="ignore")
        values: list[float] = []
        nonce = 0
        while len(values) < self.dim:
            digest = hashlib.sha256(seed + nonce.to_bytes(4, "big")).digest()
            for i in range(0, len(digest), 2):
                if len(values) >= self.dim:
                    break
                raw = int.from_bytes(digest[i : i + 2], "big")
                values.append((raw / 65535.0) * 2.0 - 1.0)
            nonce += 1
        vec = np.array(values, dtype=np.float64)
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            vec[0] = 1.0
            return vec
        return vec / norm

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        return np.stack([self._one(t) for t in texts]) if texts else np.zeros((0, self.dim))


class SentenceTransformerEncoder:
    def __init__(self, model_id: str, batch_size: int = 32):
        from sentence_transformers import SentenceTransformer

        self.model = SentenceTransformer(model_id)
        self.model.eval()
        self.batch_size = batch_size
        self.dim = int(self.model.get_sentence_embedding_dimension())
        self.name = f"st:{model_id}"

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dim))
        return np.asarray(
            self.model.encode(
                list(texts),
                batch_size=self.batch_size,
                show_progress_bar=False,
                convert_to_numpy=True,
            ),
            dtype=np.float64,
        )


class MaxPoolTransformerEncoder:
    """Raw transformer fallback: max-pooling over the penultimate hidden
    layer, masked to real tokens."""

    def __init__(self, model_id: str, batch_size: int = 16, max_length: int = 256):
        import torch
        from transformers import AutoModel, AutoTokenizer

        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(model_id)
        self.model = AutoModel.from_pretrained(model_id, output_hidden_states=True)
        self.model.eval()
        self.batch_size = batch_size
        self.max_length = max_length
        self.dim = int(self.model.config.hidden_size)
        self.name = f"hf:{model_id}"

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        torch = self._torch
        if not texts:
            return np.zeros((0, self.dim))
        out = []
        with torch.no_grad():
            for start in range(0, len(texts), self.batch_size):
                batch = list(texts[start : start + self.batch_size])
                enc = self.tokenizer(
                    batch, padding=True, truncation=True, max_length=self.max_length,
                    return_tensors="pt",
                )
                hidden = self.model(**enc).hidden_states[-2]
                mask = enc["attention_mask"].unsqueeze(-1).bool()
                hidden = hidden.masked_fill(~mask, float("-inf"))
                pooled = hidden.max(dim=1).values
                out.append(pooled.cpu().numpy().astype(np.float64))
        return np.vstack(out)


def get_encoder(spec: str, batch_size: int = 32) -> Encoder:
    kind, _, arg = spec.partition(":")
    if kind == "hash":
        return HashEncoder(dim=int(arg))
    if kind == "st":
        return SentenceTransformerEncoder(arg, batch_size=batch_size)
    if kind == "hf":
        return MaxPoolTransformerEncoder(arg, batch_size=batch_size)
    raise ValueError(f"unknown encoder spec {spec!r} (use hash:<dim>, st:<model> or hf:<model>)")
