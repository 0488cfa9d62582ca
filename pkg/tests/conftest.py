"""Shared fixtures: a small deterministic claim dataset and a config file."""
import json

import numpy as np
import pytest


def make_toy_workspace(root, n_claims=30, n_train=8, n_test=4, seed=13):
    """Write a small dataset (claims, train/test pairs, manifest, config).

    Queries copy words from their gold claim's ver_claim and body, so BM25
    can find them; every query links to exactly one claim.
    """
    rng = np.random.default_rng(seed)
    vocab = [f"word{i:02d}" for i in range(60)]

    claims = []
    for i in range(n_claims):
        ver_claim = " ".join(rng.choice(vocab, size=6, replace=False))
        title = " ".join(rng.choice(vocab, size=3, replace=False))
        body = ". ".join(
            " ".join(rng.choice(vocab, size=5, replace=False)).capitalize() for _ in range(2)
        ) + "."
        claims.append(
            {
                "id": f"v{i:03d}",
                "ver_claim": ver_claim,
                "title": title,
                "body": body,
                "truth_value": "false",
            }
        )
    with open(root / "claims.jsonl", "w", encoding="utf-8") as f:
        for rec in claims:
            f.write(json.dumps(rec) + "\n")

    def make_pairs(count, offset):
        lines = []
        for qi in range(count):
            target = claims[(offset + qi * 3) % n_claims]
            own_words = target["ver_claim"].split() + target["body"].replace(".", "").lower().split()
            sampled = list(rng.choice(own_words, size=4, replace=False))
            noise = list(rng.choice(vocab, size=2, replace=False))
            text = " ".join(sampled + noise)
            lines.append(f"q{offset + qi:03d}\t{target['id']}\t{text}")
        return lines

    (root / "train.tsv").write_text("\n".join(make_pairs(n_train, 0)) + "\n")
    (root / "test.tsv").write_text("\n".join(make_pairs(n_test, 100)) + "\n")

    manifest = {
        "name": "toy",
        "claims": "claims.jsonl",
        "train_pairs": "train.tsv",
        "test_pairs": "test.tsv",
        "expected": {"claims": n_claims, "pairs": n_train + n_test, "train": n_train, "test": n_test},
    }
    (root / "manifest.json").write_text(json.dumps(manifest))

    (root / "pipeline.cfg").write_text(
        "\n".join(
            [
                "manifest = manifest.json",
                "embed_dim = 32",
                "base_field = verclaim",
                "sources = ir:title, ir:verclaim, ir:body, mlp",
                "rerank_depth = 10",
                "scorer_model = mlp.json",
                "rerank_model = ranksvm.json",
                "epochs = 3",
                "batch_size = 64",
                "seed = 7",
                "tag = toy",
            ]
        )
        + "\n"
    )
    return {"claims": claims, "manifest": root / "manifest.json", "config": root / "pipeline.cfg"}


@pytest.fixture
def toy_workspace(tmp_path):
    return make_toy_workspace(tmp_path), tmp_path
