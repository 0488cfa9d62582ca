"""Data model, ingestion and integrity validation for claim datasets.

Canonical on-disk formats (UTF-8):
  verified claims  JSON-lines, keys {id, ver_claim, title, body, truth_value}
                   (TSV with a header row is also accepted)
  pairs            TSV columns (input_id, verified_id, input_text),
                   or JSON-lines with those keys
  manifest         JSON declaring file paths plus expected counts

Loaders tolerate common alternative column names (see the ``_*_KEYS``
tables); the mapping they assume is part of the documented contract.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence


class CorpusError(ValueError):
    """Raised for malformed or inconsistent dataset files."""

    def __init__(self, message: str, *, path=None, line: int | None = None):
        ctx = ""
        if path is not None:
            ctx = f" [{path}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + ctx)
        self.path = path
        self.line = line


# Accepted column aliases, tried in order. "claim" on a verified-claim file
# means the normalized verified claim.
_ID_KEYS = ("id", "vclaim_id", "claim_id", "doc_id")
_VERCLAIM_KEYS = ("ver_claim", "verclaim", "vclaim", "norm_claim", "normclaim", "claim")
_TITLE_KEYS = ("title",)
_BODY_KEYS = ("body", "article", "text")
_TRUTH_KEYS = ("truth_value", "truthvalue", "truth", "label", "rating")

_PAIR_INPUT_ID_KEYS = ("input_id", "iclaim_id", "tweet_id", "id")
_PAIR_VERIFIED_ID_KEYS = ("verified_id", "vclaim_id", "ver_claim_id", "doc_id")
_PAIR_TEXT_KEYS = ("input_text", "text", "claim", "tweet", "iclaim")


@dataclass(frozen=True)
class VerifiedClaim:
    """One fact-checked database entry."""

    id: str
    ver_claim: str
    title: str
    body: str = ""
    truth_value: str = ""


@dataclass(frozen=True)
class InputClaim:
    """A naturally occurring claim (debate sentence, tweet) to be matched."""

    id: str
    text: str


@dataclass(frozen=True)
class ClaimPair:
    """Gold link: the verified claim can verify the input claim."""

    input_id: str
    verified_id: str


class VerifiedClaimStore:
    """Immutable-after-load mapping of claim id -> VerifiedClaim."""

    def __init__(self, claims: Iterable[VerifiedClaim] = ()):
        self._claims: dict[str, VerifiedClaim] = {}
        for claim in claims:
            self.add(claim)

    def add(self, claim: VerifiedClaim) -> None:
        if claim.id in self._claims:
            raise CorpusError(f"duplicate verified-claim id {claim.id!r}")
        self._claims[claim.id] = claim

    def get(self, claim_id: str) -> VerifiedClaim:
        try:
            return self._claims[claim_id]
        except KeyError:
            raise CorpusError(f"unknown verified-claim id {claim_id!r}") from None

    def ids(self) -> list[str]:
        return list(self._claims)

    def __contains__(self, claim_id: str) -> bool:
        return claim_id in self._claims

    def __iter__(self) -> Iterator[VerifiedClaim]:
        return iter(self._claims.values())

    def __len__(self) -> int:
        return len(self._claims)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, VerifiedClaimStore) and self._claims == other._claims


class InputClaimStore:
    """Mapping of input-claim id -> InputClaim."""

    def __init__(self):
        self._inputs: dict[str, InputClaim] = {}

    def add(self, claim: InputClaim) -> None:
        existing = self._inputs.get(claim.id)
        if existing is not None:
            if existing.text != claim.text:
                raise CorpusError(f"conflicting texts for input claim {claim.id!r}")
            return
        self._inputs[claim.id] = claim

    def get(self, input_id: str) -> InputClaim:
        try:
            return self._inputs[input_id]
        except KeyError:
            raise CorpusError(f"unknown input-claim id {input_id!r}") from None

    def ids(self) -> list[str]:
        return list(self._inputs)

    def __contains__(self, input_id: str) -> bool:
        return input_id in self._inputs

    def __iter__(self) -> Iterator[InputClaim]:
        return iter(self._inputs.values())

    def __len__(self) -> int:
        return len(self._inputs)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, InputClaimStore) and self._inputs == other._inputs


@dataclass
class PairSet:
    """Gold input->verified links plus the input claims they mention.

    This is a multi-map: one input claim may link to several verified
    claims and vice versa.
    """

    pairs: list[ClaimPair] = field(default_factory=list)
    inputs: InputClaimStore = field(default_factory=InputClaimStore)

    def by_input(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {}
        for p in self.pairs:
            out.setdefault(p.input_id, []).append(p.verified_id)
        return out

    def qrels(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {}
        for p in self.pairs:
            out.setdefault(p.input_id, set()).add(p.verified_id)
        return out

    def input_ids(self) -> set[str]:
        return {p.input_id for p in self.pairs}

    def merged_with(self, other: "PairSet") -> "PairSet":
        merged = PairSet()
        for src in (self, other):
            merged.pairs.extend(src.pairs)
            for inp in src.inputs:
                merged.inputs.add(inp)
        return merged

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class DatasetSplit:
    """Train/test partition of the paired input-claim ids."""

    train: frozenset[str]
    test: frozenset[str]


def _pick(record: Mapping[str, object], keys: Sequence[str]):
    for key in keys:
        if key in record:
            return record[key]
    return None


def _claim_from_record(record: Mapping[str, object], path, line: int) -> VerifiedClaim:
    claim_id = _pick(record, _ID_KEYS)
    ver_claim = _pick(record, _VERCLAIM_KEYS)
    title = _pick(record, _TITLE_KEYS)
    if claim_id is None or str(claim_id).strip() == "":
        raise CorpusError("missing claim id", path=path, line=line)
    claim_id = str(claim_id).strip()
    if "\t" in claim_id or "\n" in claim_id:
        raise CorpusError(f"claim id {claim_id!r} contains tab/newline", path=path, line=line)
    if ver_claim is None or str(ver_claim).strip() == "":
        raise CorpusError(f"empty ver_claim for id {claim_id!r}", path=path, line=line)
    if title is None or str(title).strip() == "":
        raise CorpusError(f"empty title for id {claim_id!r}", path=path, line=line)
    body = _pick(record, _BODY_KEYS)
    truth = _pick(record, _TRUTH_KEYS)
    return VerifiedClaim(
        id=claim_id,
        ver_claim=str(ver_claim).strip(),
        title=str(title).strip(),
        body="" if body is None else str(body),
        truth_value="" if truth is None else str(truth).strip().lower(),
    )


def _iter_jsonl(path) -> Iterator[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as e:
                raise CorpusError(f"JSON parse error: {e.msg}", path=path, line=lineno) from e
            if not isinstance(record, dict):
                raise CorpusError("record is not a JSON object", path=path, line=lineno)
            yield lineno, record


def _iter_tsv_with_header(path) -> Iterator[tuple[int, dict]]:
    with open(path, "r", encoding="utf-8") as f:
        header: list[str] | None = None
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            cells = line.split("\t")
            if header is None:
                header = [c.strip().lower() for c in cells]
                continue
            if len(cells) != len(header):
                raise CorpusError(
                    f"expected {len(header)} TSV columns, got {len(cells)}", path=path, line=lineno
                )
            yield lineno, dict(zip(header, cells))


def load_verified_claims(path, fmt: str | None = None) -> VerifiedClaimStore:
    """Load a verified-claim database from JSON-lines (default) or TSV.

    ``fmt`` is "jsonl" or "tsv"; None infers from the file suffix.
    Duplicate ids and empty ver_claim/title fields are hard errors. An
    empty file yields an empty store plus a warning.
    """
    path = Path(path)
    if fmt is None:
        fmt = "tsv" if path.suffix.lower() in (".tsv", ".tab") else "jsonl"
    if fmt not in ("jsonl", "tsv"):
        raise ValueError(f"unknown verified-claim format {fmt!r}")
    records = _iter_jsonl(path) if fmt == "jsonl" else _iter_tsv_with_header(path)
    store = VerifiedClaimStore()
    count = 0
    for lineno, record in records:
        claim = _claim_from_record(record, path, lineno)
        if claim.id in store:
            raise CorpusError(f"duplicate verified-claim id {claim.id!r}", path=path, line=lineno)
        store.add(claim)
        count += 1
    if count == 0:
        warnings.warn(f"no verified claims found in {path}", stacklevel=2)
    return store


def save_verified_claims(store: VerifiedClaimStore, path) -> None:
    """Write the canonical JSON-lines form; load_verified_claims round-trips it."""
    with open(path, "w", encoding="utf-8") as f:
        for claim in store:
            f.write(
                json.dumps(
                    {
                        "id": claim.id,
                        "ver_claim": claim.ver_claim,
                        "title": claim.title,
                        "body": claim.body,
                        "truth_value": claim.truth_value,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def _pair_from_record(record: Mapping[str, object], path, line: int) -> tuple[str, str, str]:
    input_id = _pick(record, _PAIR_INPUT_ID_KEYS)
    verified_id = _pick(record, _PAIR_VERIFIED_ID_KEYS)
    text = _pick(record, _PAIR_TEXT_KEYS)
    if input_id is None or str(input_id).strip() == "":
        raise CorpusError("missing input_id", path=path, line=line)
    if verified_id is None or str(verified_id).strip() == "":
        raise CorpusError("missing verified_id", path=path, line=line)
    if text is None or str(text).strip() == "":
        raise CorpusError(f"empty input text for input {input_id!r}", path=path, line=line)
    return str(input_id).strip(), str(verified_id).strip(), str(text).strip()


def load_pairs(path, claims: VerifiedClaimStore, fmt: str | None = None) -> PairSet:
    """Load gold (input_id, verified_id, input_text) links.

    Every verified_id must resolve in ``claims``. Multiple pairs per input
    id are preserved; their texts must agree.
    """
    path = Path(path)
    if fmt is None:
        fmt = "jsonl" if path.suffix.lower() in (".jsonl", ".json") else "tsv"
    pairs = PairSet()
    if fmt == "jsonl":
        rows: Iterable[tuple[int, tuple[str, str, str]]] = (
            (lineno, _pair_from_record(rec, path, lineno)) for lineno, rec in _iter_jsonl(path)
        )
    elif fmt == "tsv":

        def _tsv_rows():
            with open(path, "r", encoding="utf-8") as f:
                for lineno, raw in enumerate(f, start=1):
                    line = raw.rstrip("\n")
                    if not line.strip():
                        continue
                    cells = line.split("\t")
                    if len(cells) < 3:
                        raise CorpusError(
                            f"expected 3 TSV columns (input_id, verified_id, input_text), got {len(cells)}",
                            path=path,
                            line=lineno,
                        )
                    record = {"input_id": cells[0], "verified_id": cells[1], "input_text": cells[2]}
                    yield lineno, _pair_from_record(record, path, lineno)

        rows = _tsv_rows()
    else:
        raise ValueError(f"unknown pair format {fmt!r}")

    count = 0
    for lineno, (input_id, verified_id, text) in rows:
        if verified_id not in claims:
            raise CorpusError(
                f"pair references unknown verified-claim id {verified_id!r}", path=path, line=lineno
            )
        pairs.inputs.add(InputClaim(id=input_id, text=text))
        pairs.pairs.append(ClaimPair(input_id=input_id, verified_id=verified_id))
        count += 1
    if count == 0:
        warnings.warn(f"no pairs found in {path}", stacklevel=2)
    return pairs


@dataclass(frozen=True)
class ExpectedCounts:
    claims: int
    pairs: int
    train: int
    test: int


@dataclass(frozen=True)
class ValidationEntry:
    name: str
    expected: int | None
    actual: int
    ok: bool

    @property
    def delta(self) -> int | None:
        return None if self.expected is None else self.actual - self.expected


@dataclass
class ValidationReport:
    entries: list[ValidationEntry]
    problems: list[str]

    @property
    def passed(self) -> bool:
        return all(e.ok for e in self.entries) and not self.problems

    def format(self) -> str:
        lines = []
        for e in self.entries:
            if e.expected is None:
                lines.append(f"{e.name}: {e.actual}")
            else:
                status = "ok" if e.ok else f"MISMATCH (delta {e.delta:+d})"
                lines.append(f"{e.name}: expected {e.expected}, actual {e.actual} ... {status}")
        lines.extend(f"problem: {p}" for p in self.problems)
        lines.append("result: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def validate_dataset(
    claims: VerifiedClaimStore,
    pairs: PairSet,
    split: DatasetSplit,
    expected: ExpectedCounts,
) -> ValidationReport:
    """Compare actual against declared counts; mismatches are report rows,
    never exceptions."""
    train_pairs = sum(1 for p in pairs.pairs if p.input_id in split.train)
    test_pairs = sum(1 for p in pairs.pairs if p.input_id in split.test)
    entries = [
        ValidationEntry("claims", expected.claims, len(claims), len(claims) == expected.claims),
        ValidationEntry("pairs", expected.pairs, len(pairs), len(pairs) == expected.pairs),
        ValidationEntry("train pairs", expected.train, train_pairs, train_pairs == expected.train),
        ValidationEntry("test pairs", expected.test, test_pairs, test_pairs == expected.test),
    ]
    problems = []
    overlap = split.train & split.test
    if overlap:
        problems.append(f"train/test overlap on {len(overlap)} input id(s), e.g. {sorted(overlap)[:3]}")
    uncovered = pairs.input_ids() - (split.train | split.test)
    if uncovered:
        problems.append(f"{len(uncovered)} paired input id(s) missing from the split, e.g. {sorted(uncovered)[:3]}")
    return ValidationReport(entries=entries, problems=problems)


@dataclass(frozen=True)
class DatasetManifest:
    """Paths plus expected counts for one dataset."""

    name: str
    claims_path: Path
    claims_format: str | None
    train_pairs_path: Path
    test_pairs_path: Path
    expected: ExpectedCounts


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise CorpusError(f"manifest parse error: {e.msg}", path=path, line=e.lineno) from e
    for key in ("claims", "train_pairs", "test_pairs", "expected"):
        if key not in data:
            raise CorpusError(f"manifest missing key {key!r}", path=path)
    exp = data["expected"]
    for key in ("claims", "pairs", "train", "test"):
        if key not in exp:
            raise CorpusError(f"manifest expected-counts missing {key!r}", path=path)
    base = path.parent
    return DatasetManifest(
        name=str(data.get("name", path.stem)),
        claims_path=base / data["claims"],
        claims_format=str(data["claims_format"]) if data.get("claims_format") else None,
        train_pairs_path=base / data["train_pairs"],
        test_pairs_path=base / data["test_pairs"],
        expected=ExpectedCounts(
            claims=int(exp["claims"]), pairs=int(exp["pairs"]),
            train=int(exp["train"]), test=int(exp["test"]),
        ),
    )


@dataclass
class Dataset:
    """A fully loaded dataset: claims, gold pairs, and the train/test split."""

    manifest: DatasetManifest
    claims: VerifiedClaimStore
    train_pairs: PairSet
    test_pairs: PairSet

    @property
    def split(self) -> DatasetSplit:
        return DatasetSplit(
            train=frozenset(self.train_pairs.input_ids()),
            test=frozenset(self.test_pairs.input_ids()),
        )

    @property
    def all_pairs(self) -> PairSet:
        return self.train_pairs.merged_with(self.test_pairs)

    def validate(self) -> ValidationReport:
        return validate_dataset(self.claims, self.all_pairs, self.split, self.manifest.expected)


def load_dataset(manifest: DatasetManifest) -> Dataset:
    claims = load_verified_claims(manifest.claims_path, fmt=manifest.claims_format)
    train_pairs = load_pairs(manifest.train_pairs_path, claims)
    test_pairs = load_pairs(manifest.test_pairs_path, claims)
    return Dataset(manifest=manifest, claims=claims, train_pairs=train_pairs, test_pairs=test_pairs)
