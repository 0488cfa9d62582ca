"""Read-only JSON-over-HTTP query endpoint.

POST /rank  {"text": ..., "top_k": ..., "stage": ...} -> ranked list with
per-source scores. GET /health -> {"status": "ok"}. The engine is built
once before serving and never mutated, so the threading server can answer
concurrent requests safely. Responses are canonical JSON (sorted keys), so
identical requests produce identical bodies.
"""
from __future__ import annotations

import json
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .pipeline import Engine, PrerequisiteError


def _rank_payload(engine: Engine, body: dict) -> dict:
    text = body.get("text")
    if not isinstance(text, str) or not text.strip():
        raise ValueError("field 'text' must be a non-empty string")
    top_k = body.get("top_k", 10)
    if not isinstance(top_k, int) or top_k < 1:
        raise ValueError("field 'top_k' must be a positive integer")
    stage = body.get("stage", "bm25")
    if not isinstance(stage, str):
        raise ValueError("field 'stage' must be a string")
    items, breakdown = engine.rank_with_source_scores("adhoc", text, stage, top_k)
    return {
        "text": text,
        "stage": stage,
        "top_k": top_k,
        "results": [
            {
                "doc_id": item.doc_id,
                "rank": item.rank,
                "score": item.score,
                "sources": breakdown.get(item.doc_id, {}),
            }
            for item in items
        ],
    }


class RankHandler(BaseHTTPRequestHandler):
    engine: Engine  # injected by make_server

    def _send(self, status: int, payload: dict) -> None:
        data = json.dumps(payload, sort_keys=True).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        if self.path == "/health":
            self._send(200, {"status": "ok"})
        else:
            self._send(404, {"error": f"unknown path {self.path}"})

    def do_POST(self):
        if self.path != "/rank":
            self._send(404, {"error": f"unknown path {self.path}"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            body = json.loads(self.rfile.read(length) or b"{}")
            if not isinstance(body, dict):
                raise ValueError("request body must be a JSON object")
            self._send(200, _rank_payload(self.engine, body))
        except (ValueError, json.JSONDecodeError) as e:
            self._send(400, {"error": str(e)})
        except PrerequisiteError as e:
            self._send(409, {"error": str(e)})

    def log_message(self, fmt, *args):  # quiet by default
        pass


def make_server(engine: Engine, host: str = "127.0.0.1", port: int = 8080) -> ThreadingHTTPServer:
    handler = type("BoundRankHandler", (RankHandler,), {"engine": engine})
    return ThreadingHTTPServer((host, port), handler)


def warm_up(engine: Engine, stages=("bm25", "embed")) -> None:
    """Build the lazy artifacts the given stages need before serving."""
    for stage in stages:
        try:
            engine.rank("warmup", "warm up query", stage, top_k=1)
        except PrerequisiteError:
            pass
