"""Export jobs and vector-file verification."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import load_claims, load_input_texts
from .encoders import get_encoder
from .sentences import split_sentences
from .vectors import VectorFormatError, key_str, read_vectors, write_vectors

DEFAULT_FIELDS = ("verclaim", "title", "body")


@dataclass(frozen=True)
class ExportJob:
    corpus_path: Path
    out_path: Path
    encoder: str = "hash:256"
    fields: tuple[str, ...] = DEFAULT_FIELDS
    batch_size: int = 32
    flavor: str = "binary"
    pairs_path: Path | None = None  # optional: also encode input claims

    def __post_init__(self):
        for f in self.fields:
            if f not in DEFAULT_FIELDS:
                raise ValueError(f"unknown field {f!r} (choose from {DEFAULT_FIELDS})")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def _job_records(job: ExportJob):
    """(key, text) pairs in deterministic order: corpus order, then per
    claim verclaim, title, body sentences; inputs last."""
    claims = load_claims(job.corpus_path)
    for claim in claims:
        if "verclaim" in job.fields:
            yield (claim.id, "verclaim", None), claim.ver_claim
        if "title" in job.fields:
            yield (claim.id, "title", None), claim.title
        if "body" in job.fields:
            for i, sentence in enumerate(split_sentences(claim.body)):
                yield (claim.id, "body", i), sentence
    if job.pairs_path is not None:
        for input_id, text in sorted(load_input_texts(job.pairs_path).items()):
            yield (input_id, "input", None), text


def export(job: ExportJob) -> int:
    """Encode the corpus and write the vector file; returns the record count."""
    keyed = list(_job_records(job))
    encoder = get_encoder(job.encoder, batch_size=job.batch_size)
    keys = [k for k, _ in keyed]
    texts = [t for _, t in keyed]
    vectors = []
    for start in range(0, len(texts), job.batch_size):
        batch = encoder.encode(texts[start : start + job.batch_size])
        if not np.all(np.isfinite(batch)):
            bad = start + int(np.where(~np.isfinite(batch).all(axis=1))[0][0])
            raise RuntimeError(f"encoder produced a non-finite vector for {key_str(keys[bad])!r}")
        vectors.extend(np.asarray(batch, dtype=np.float32))
    return write_vectors(job.out_path, zip(keys, vectors), dim=encoder.dim,
                         encoder_id=encoder.name, flavor=job.flavor)


@dataclass
class VerifyReport:
    ok: bool
    dim: int = 0
    record_count: int = 0
    encoder_id: str = ""
    problems: list[str] = field(default_factory=list)

    def format(self) -> str:
        lines = [f"dim: {self.dim}", f"records: {self.record_count}", f"encoder: {self.encoder_id}"]
        lines.extend(f"problem: {p}" for p in self.problems)
        lines.append("result: " + ("PASS" if self.ok else "FAIL"))
        return "\n".join(lines)


def verify(vector_path, corpus_path, fields: tuple[str, ...] = DEFAULT_FIELDS,
           pairs_path=None) -> VerifyReport:
    """Check key coverage, dimension consistency and self-cosine of a file
    against the corpus it was exported from."""
    report = VerifyReport(ok=True)
    try:
        records, dim, declared_count, encoder_id = read_vectors(vector_path)
    except VectorFormatError as e:
        where = f" at line {e.line}" if e.line is not None else (
            f" at byte offset {e.offset}" if e.offset is not None else "")
        return VerifyReport(ok=False, problems=[f"unreadable vector file: {e}{where}"])
    report.dim = dim
    report.record_count = len(records)
    report.encoder_id = encoder_id

    if len(records) != declared_count:
        report.problems.append(f"header declares {declared_count} records, file holds {len(records)}")

    expected = {key for key, _ in _job_records(ExportJob(
        corpus_path=Path(corpus_path), out_path=Path("/dev/null"),
        fields=fields, pairs_path=pairs_path,
    ))}
    missing = expected - set(records)
    extra = set(records) - expected
    for key in sorted(missing)[:5]:
        report.problems.append(f"missing vector for key {key_str(key)!r}")
    if len(missing) > 5:
        report.problems.append(f"... and {len(missing) - 5} more missing keys")
    for key in sorted(extra, key=key_str)[:5]:
        report.problems.append(f"unexpected key {key_str(key)!r}")

    for key, vec in records.items():
        if vec.shape != (dim,):
            report.problems.append(f"{key_str(key)!r}: dim {vec.shape} != {dim}")
            continue
        if not np.all(np.isfinite(vec)):
            report.problems.append(f"{key_str(key)!r}: non-finite component")
            continue
        v = vec.astype(np.float64)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            report.problems.append(f"{key_str(key)!r}: zero vector")
            continue
        self_cos = float(v @ v) / (norm * norm)
        if abs(self_cos - 1.0) > 1e-6:
            report.problems.append(f"{key_str(key)!r}: self-cosine {self_cos}")

    report.ok = not report.problems
    return report
