"""claimrank: rank a database of fact-checked claims against an input claim.

Pipeline stages: lexical BM25 retrieval over claim/title/body fields, dense
embedding cosine ranking, an MLP match scorer over per-article cosine
features, and a pairwise RankSVM reranker fusing scores and reciprocal
ranks. Rankings are evaluated with MRR, MAP@k and HasPositives@k.
"""

__version__ = "0.1.0"
