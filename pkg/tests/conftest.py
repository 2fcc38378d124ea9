import json
import random
import threading
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

POSITIVE_WORDS = ["good", "great", "lovely", "fine", "warm", "bright", "superb", "calm"]
NEGATIVE_WORDS = ["bad", "awful", "poor", "grim", "cold", "dull", "bleak", "harsh"]
NEUTRAL_WORDS = ["the", "a", "movie", "plot", "scene", "actor", "story", "sound"]


def synth_classification_lines(n, seed=0, length=8, signal=0.7):
    """Synthetic binary sentiment pool: class-indicative words mixed with
    shared filler, deterministic for a seed."""
    rng = random.Random(seed)
    lines = []
    for i in range(n):
        label = "Positive" if rng.random() < 0.5 else "Negative"
        lexicon = POSITIVE_WORDS if label == "Positive" else NEGATIVE_WORDS
        words = [
            rng.choice(lexicon) if rng.random() < signal else rng.choice(NEUTRAL_WORDS)
            for _ in range(length)
        ]
        lines.append(
            json.dumps({"id": f"ex{i:05d}", "text": " ".join(words), "gold_label": label})
        )
    return lines


def write_pool(path, n, seed=0, length=8, signal=0.7):
    path.write_text(
        "".join(line + "\n" for line in synth_classification_lines(n, seed, length, signal)),
        encoding="utf-8",
    )
    return path


def write_run_config(path, train_pool, eval_pool=None, **overrides):
    data = {
        "task": {
            "name": "synthetic-sentiment",
            "kind": "classification",
            "train_pool": str(train_pool),
            "eval_pool": str(eval_pool) if eval_pool else None,
            "label_vocabulary": ["Negative", "Positive"],
            "avg_tokens": 19.3,
        },
        "strategies": {
            "strategies": ["human_only", "llm_only", "random_mix", "active"],
            "shots": [2, 4],
            "human_ratios": [0.5],
        },
        "budgets": {"explicit": ["2.2"]},
        "seeds": [0],
        "alphas": [1, 3],
        "learner": {
            "dimension": 4096,
            "grid": [{"learning_rate": 0.5, "epochs": 6, "batch_size": 32}],
        },
        "backend": {"mode": "simulated", "calibration": {"floor": 0.55, "ceiling": 0.95}},
    }
    for key, value in overrides.items():
        data[key] = value
    path.write_text(json.dumps(data, indent=1), encoding="utf-8")
    return path


class MockCompletionServer:
    """Replays a queue of recorded responses to completion requests.

    Each queued item is (status_code, body). Bodies that are dicts are sent
    as JSON; strings are sent verbatim (for malformed-payload tests).
    """

    def __init__(self):
        self.responses = deque()
        self.requests = []
        self._lock = threading.Lock()

        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                raw = self.rfile.read(length)
                with outer._lock:
                    outer.requests.append(json.loads(raw))
                    status, body = (
                        outer.responses.popleft() if outer.responses else (500, {})
                    )
                payload = body if isinstance(body, str) else json.dumps(body)
                data = payload.encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()

    @property
    def url(self):
        host, port = self._server.server_address
        return f"http://{host}:{port}/v1/completions"

    def enqueue(self, body, status=200):
        self.responses.append((status, body))

    def close(self):
        self._server.shutdown()
        self._server.server_close()


@pytest.fixture
def mock_server():
    server = MockCompletionServer()
    yield server
    server.close()


def completion_body(
    text,
    tokens=(),
    token_logprobs=(),
    first_token_top=None,
    prompt_tokens=0,
    completion_tokens=0,
):
    return {
        "choices": [
            {
                "text": text,
                "logprobs": {
                    "tokens": list(tokens),
                    "token_logprobs": list(token_logprobs),
                    "top_logprobs": [first_token_top or {}],
                },
            }
        ],
        "usage": {
            "prompt_tokens": prompt_tokens,
            "completion_tokens": completion_tokens,
        },
    }
