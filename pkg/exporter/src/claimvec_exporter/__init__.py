"""claimvec-exporter: run a sentence encoder over a verified-claim corpus
and write the claimrank engine's vector file format.

This tool is deliberately independent of the engine package: the contracts
between the two are the vector file format, the claims JSON-lines layout,
and the sentence-splitting rules pinned by the shared fixture file.
"""

__version__ = "0.1.0"
