"""Writer and reader for the engine's CLAIMVEC vector file format.

  header line (ASCII):  CLAIMVEC 1 <text|binary> <dim> <count> <encoder_id>
  text record:          doc_id<TAB>field<TAB>sentence_index<TAB>v1 v2 ...
                        (sentence_index "-" for whole-field vectors)
  binary record:        u16-LE key length, key bytes
                        ("doc_id<TAB>field<TAB>sentence_index"), dim
                        little-endian float32 values.
"""
from __future__ import annotations

import struct
from pathlib import Path
from typing import Iterable

import numpy as np

MAGIC = "CLAIMVEC"
VERSION = 1

Key = tuple[str, str, "int | None"]


class VectorFormatError(ValueError):
    def __init__(self, message: str, *, line: int | None = None, offset: int | None = None):
        super().__init__(message)
        self.line = line
        self.offset = offset


def key_str(key: Key) -> str:
    doc_id, fieldname, idx = key
    return f"{doc_id}\t{fieldname}\t{'-' if idx is None else idx}"


def parse_key(raw: str) -> Key:
    parts = raw.split("\t")
    if len(parts) != 3:
        raise VectorFormatError(f"malformed vector key {raw!r}")
    return parts[0], parts[1], (None if parts[2] == "-" else int(parts[2]))


def write_vectors(
    path,
    records: Iterable[tuple[Key, np.ndarray]],
    dim: int,
    encoder_id: str,
    flavor: str = "binary",
) -> int:
    """Write records in the given order; returns the record count."""
    if flavor not in ("text", "binary"):
        raise ValueError(f"unknown flavor {flavor!r}")
    records = list(records)
    header = f"{MAGIC} {VERSION} {flavor} {dim} {len(records)} {encoder_id}\n"
    with open(path, "wb") as f:
        f.write(header.encode("ascii"))
        for key, vec in records:
            vec = np.asarray(vec, dtype=np.float32)
            if vec.shape != (dim,):
                raise VectorFormatError(f"vector for {key_str(key)!r} has shape {vec.shape}, want ({dim},)")
            if flavor == "text":
                values = " ".join(repr(float(v)) for v in vec)
                f.write(f"{key_str(key)}\t{values}\n".encode("utf-8"))
            else:
                key_bytes = key_str(key).encode("utf-8")
                f.write(struct.pack("<H", len(key_bytes)))
                f.write(key_bytes)
                f.write(vec.astype("<f4").tobytes())
    return len(records)


def read_vectors(path):
    """Returns (records dict, dim, declared count, encoder_id).

    Raises VectorFormatError with a line number (text) or byte offset
    (binary) on any malformed record.
    """
    path = Path(path)
    records: dict[Key, np.ndarray] = {}
    with open(path, "rb") as f:
        header = f.readline()
        try:
            tokens = header.decode("ascii").rstrip("\n").split(" ", 5)
        except UnicodeDecodeError as e:
            raise VectorFormatError("unreadable header line", line=1) from e
        if len(tokens) < 5 or tokens[0] != MAGIC:
            raise VectorFormatError("missing CLAIMVEC header", line=1)
        if int(tokens[1]) != VERSION:
            raise VectorFormatError(f"unsupported format version {tokens[1]}", line=1)
        flavor, dim, count = tokens[2], int(tokens[3]), int(tokens[4])
        encoder_id = tokens[5] if len(tokens) > 5 else "none"

        if flavor == "text":
            for lineno, raw in enumerate(f, start=2):
                line = raw.decode("utf-8").rstrip("\n")
                if not line:
                    continue
                parts = line.split("\t")
                if len(parts) != 4:
                    raise VectorFormatError("expected 4 tab-separated fields", line=lineno)
                key = parse_key("\t".join(parts[:3]))
                values = parts[3].split()
                if len(values) != dim:
                    raise VectorFormatError(
                        f"{key_str(key)!r}: {len(values)} values, expected {dim}", line=lineno
                    )
                try:
                    vec = np.array([float(v) for v in values], dtype=np.float32)
                except ValueError as e:
                    raise VectorFormatError(f"{key_str(key)!r}: bad float", line=lineno) from e
                if key in records:
                    raise VectorFormatError(f"duplicate key {key_str(key)!r}", line=lineno)
                records[key] = vec
        elif flavor == "binary":
            record_bytes = 4 * dim
            while True:
                offset = f.tell()
                lenbuf = f.read(2)
                if not lenbuf:
                    break
                if len(lenbuf) < 2:
                    raise VectorFormatError("truncated key length", offset=offset)
                (key_len,) = struct.unpack("<H", lenbuf)
                key_raw = f.read(key_len)
                if len(key_raw) < key_len:
                    raise VectorFormatError("truncated key", offset=offset)
                try:
                    key = parse_key(key_raw.decode("utf-8"))
                except (UnicodeDecodeError, VectorFormatError) as e:
                    raise VectorFormatError(f"bad key record: {e}", offset=offset) from e
                payload = f.read(record_bytes)
                if len(payload) < record_bytes:
                    raise VectorFormatError(f"truncated vector for {key_str(key)!r}", offset=offset)
                if key in records:
                    raise VectorFormatError(f"duplicate key {key_str(key)!r}", offset=offset)
                records[key] = np.frombuffer(payload, dtype="<f4").astype(np.float32)
        else:
            raise VectorFormatError(f"unknown flavor {flavor!r}", line=1)
    return records, dim, count, encoder_id
