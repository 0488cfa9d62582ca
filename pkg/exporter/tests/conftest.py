import json

import numpy as np
import pytest


@pytest.fixture
def fixture_corpus(tmp_path):
    """50-claim corpus with bodies of varying sentence counts."""
    rng = np.random.default_rng(21)
    vocab = [f"term{i:02d}" for i in range(40)]
    path = tmp_path / "claims.jsonl"
    claims = []
    with open(path, "w", encoding="utf-8") as f:
        for i in range(50):
            n_sentences = int(rng.integers(0, 4))
            body = " ".join(
                " ".join(rng.choice(vocab, size=5)).capitalize() + "." for _ in range(n_sentences)
            )
            rec = {
                "id": f"c{i:03d}",
                "ver_claim": " ".join(rng.choice(vocab, size=6)),
                "title": " ".join(rng.choice(vocab, size=3)),
                "body": body,
                "truth_value": "false",
            }
            claims.append(rec)
            f.write(json.dumps(rec) + "\n")
    return path, claims
