"""Minimal reader for the engine's claims and pairs file layouts.

Claims arrive as JSON-lines with keys {id, ver_claim, title, body} (common
alternative names accepted); pairs as 3-column TSV or JSON-lines carrying
(input_id, verified_id, input_text).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

_ID_KEYS = ("id", "vclaim_id", "claim_id", "doc_id")
_VERCLAIM_KEYS = ("ver_claim", "verclaim", "vclaim", "norm_claim", "normclaim", "claim")
_BODY_KEYS = ("body", "article", "text")


@dataclass(frozen=True)
class Claim:
    id: str
    ver_claim: str
    title: str
    body: str


def _pick(record, keys):
    for key in keys:
        if key in record:
            return record[key]
    return None


def load_claims(path) -> list[Claim]:
    claims = []
    seen = set()
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{lineno}: JSON parse error: {e.msg}") from e
            claim_id = _pick(record, _ID_KEYS)
            ver_claim = _pick(record, _VERCLAIM_KEYS)
            title = record.get("title")
            if not claim_id or not str(ver_claim or "").strip() or not str(title or "").strip():
                raise ValueError(f"{path}:{lineno}: record needs id, ver_claim and title")
            claim_id = str(claim_id).strip()
            if claim_id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate claim id {claim_id!r}")
            seen.add(claim_id)
            body = _pick(record, _BODY_KEYS)
            claims.append(
                Claim(
                    id=claim_id,
                    ver_claim=str(ver_claim).strip(),
                    title=str(title).strip(),
                    body="" if body is None else str(body),
                )
            )
    return claims


def load_input_texts(path) -> dict[str, str]:
    """Distinct (input_id -> text) rows from a pairs file."""
    path = Path(path)
    inputs: dict[str, str] = {}

    def add(input_id: str, text: str, lineno: int) -> None:
        if not input_id or not text.strip():
            raise ValueError(f"{path}:{lineno}: pair rows need input_id and input_text")
        if input_id in inputs and inputs[input_id] != text:
            raise ValueError(f"{path}:{lineno}: conflicting texts for input {input_id!r}")
        inputs[input_id] = text

    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if path.suffix.lower() in (".jsonl", ".json"):
                record = json.loads(line)
                add(str(record.get("input_id", "")).strip(), str(record.get("input_text", "")), lineno)
            else:
                cells = line.split("\t")
                if len(cells) < 3:
                    raise ValueError(f"{path}:{lineno}: expected 3 TSV columns")
                add(cells[0].strip(), cells[2].strip(), lineno)
    return inputs
