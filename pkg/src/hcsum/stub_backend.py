"""Deterministic stub backend so the whole suite runs with no model.

Serves two endpoints over plain HTTP:
  POST /v1/completions  -> echoes the first N words of the prompt's input note
  POST /embed-tokens    -> hash-derived unit vectors, one per token

Both are pure functions of their inputs, so repeated runs are byte-identical.
Run standalone with: python -m hcsum.stub_backend --port 8123
"""

from __future__ import annotations

import argparse
import hashlib
import json
import struct
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np

from .client import INPUT_NOTE_MARKER
from .dataset import RESPONSE_MARKER
from .tokenizers import whitespace_tokens


def echo_summary(prompt: str, echo_words: int) -> str:
    """First ``echo_words`` whitespace words of the input-note segment (or of
    the whole prompt when the markers are absent)."""
    start = prompt.find(INPUT_NOTE_MARKER)
    end = prompt.rfind(RESPONSE_MARKER)
    segment = prompt[start + len(INPUT_NOTE_MARKER) : end] if 0 <= start < end else prompt
    return " ".join(segment.split()[:echo_words])


def token_vector(token: str, dim: int) -> np.ndarray:
    """Unit vector derived from the token's hash; platform-independent."""
    raw = b""
    counter = 0
    while len(raw) < dim * 4:
        raw += hashlib.sha256(f"{token}\x00{counter}".encode("utf-8")).digest()
        counter += 1
    ints = struct.unpack(f"<{dim}I", raw[: dim * 4])
    vec = np.array([(v / 2**32) * 2.0 - 1.0 for v in ints], dtype=np.float64)
    norm = np.linalg.norm(vec)
    if norm == 0:  # astronomically unlikely; keep the vector valid anyway
        vec[0] = 1.0
        norm = 1.0
    return vec / norm


def embed_payload(text: str, dim: int) -> dict:
    tokens = whitespace_tokens(text)
    return {
        "tokens": tokens,
        "vectors": [token_vector(tok, dim).tolist() for tok in tokens],
    }


class _Handler(BaseHTTPRequestHandler):
    echo_words = 64
    embed_dim = 16

    def log_message(self, fmt, *args):  # keep test output quiet
        pass

    def _read_json(self) -> dict:
        length = int(self.headers.get("Content-Length", "0"))
        return json.loads(self.rfile.read(length) or b"{}")

    def _send(self, code: int, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_POST(self):
        try:
            payload = self._read_json()
        except json.JSONDecodeError:
            self._send(400, {"error": "invalid json"})
            return
        if self.path == "/v1/completions":
            prompt = payload.get("prompt", "")
            text = echo_summary(prompt, self.echo_words)
            self._send(
                200,
                {
                    "object": "text_completion",
                    "model": payload.get("model", "stub"),
                    "choices": [{"index": 0, "text": text, "finish_reason": "stop"}],
                },
            )
        elif self.path == "/embed-tokens":
            self._send(200, embed_payload(payload.get("text", ""), self.embed_dim))
        else:
            self._send(404, {"error": f"unknown path {self.path}"})


class StubServer:
    """In-process stub for tests: start on an ephemeral port, stop cleanly."""

    def __init__(self, port: int = 0, echo_words: int = 64, embed_dim: int = 16):
        handler = type(
            "BoundHandler", (_Handler,), {"echo_words": echo_words, "embed_dim": embed_dim}
        )
        self._server = ThreadingHTTPServer(("127.0.0.1", port), handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def endpoint(self) -> str:
        host, port = self._server.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self) -> "StubServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._server.shutdown()
        self._server.server_close()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Deterministic stub inference backend")
    parser.add_argument("--port", type=int, default=8123)
    parser.add_argument("--echo-words", type=int, default=64)
    parser.add_argument("--embed-dim", type=int, default=16)
    args = parser.parse_args(argv)
    handler = type(
        "BoundHandler", (_Handler,), {"echo_words": args.echo_words, "embed_dim": args.embed_dim}
    )
    server = ThreadingHTTPServer(("127.0.0.1", args.port), handler)
    print(f"stub backend listening on http://127.0.0.1:{args.port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
