import json
import random
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from ragbench.corpus import QaPair

WORDS = (
    "patient treatment diagnosis symptom therapy clinical dosage infection"
    " chronic acute renal cardiac hepatic trial outcome biopsy relapse fever"
    " lesion serum antibody protocol onset remission screening vaccine"
).split()


def make_pair(i: int, rng: random.Random) -> QaPair:
    question = " ".join(rng.choices(WORDS, k=rng.randint(3, 9))) + "?"
    answer = " ".join(rng.choices(WORDS, k=rng.randint(4, 14))) + "."
    return QaPair(id=f"qa{i:04d}", question=question, answer=answer, source=f"src{i % 3}")


def make_corpus(count: int, seed: int = 7) -> list[QaPair]:
    rng = random.Random(seed)
    return [make_pair(i, rng) for i in range(count)]


def write_corpus_jsonl(pairs, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(json.dumps(
                {"id": p.id, "question": p.question, "answer": p.answer, "source": p.source}
            ) + "\n")


@pytest.fixture
def tiny_corpus(tmp_path):
    pairs = make_corpus(20)
    path = tmp_path / "corpus.jsonl"
    write_corpus_jsonl(pairs, path)
    return pairs, path


class LoopbackService(BaseHTTPRequestHandler):
    """Configurable loopback /generate + /score service; captures payloads."""

    captured: list = []
    generate_reply = {"text": "ok", "model_tag": "loopback"}
    score_reply = {"score": 0.5}
    status = 200

    def do_POST(self):
        body = self.rfile.read(int(self.headers["Content-Length"]))
        payload = json.loads(body)
        type(self).captured.append({"path": self.path, "payload": payload})
        reply = self.generate_reply if self.path == "/generate" else self.score_reply
        data = json.dumps(reply).encode()
        self.send_response(self.status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


@pytest.fixture
def loopback():
    LoopbackService.captured = []
    LoopbackService.generate_reply = {"text": "ok", "model_tag": "loopback"}
    LoopbackService.score_reply = {"score": 0.5}
    LoopbackService.status = 200
    server = HTTPServer(("127.0.0.1", 0), LoopbackService)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}"
    server.shutdown()
