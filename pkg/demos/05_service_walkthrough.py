"""Drive the HTTP service end to end: upload a corpus, extract and embed via
scripted providers, build two topic models (cache hit on resubmit), regress,
and fetch the report — the same call sequence the dashboard makes.
"""

import json
import tempfile
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer
from pathlib import Path

import requests
import uvicorn

from opinionmine import SyntheticSpec, generate_synthetic, save_vectors
from opinionmine.service import create_app

corpus = generate_synthetic(SyntheticSpec(topics=4, reviews=300, dim=16, seed=3))
replies = {}
by_review = {}
for unit in corpus.units:
    by_review.setdefault(unit.review_id, []).append(
        [unit.label, unit.excerpt, unit.sentiment])
for review in corpus.reviews:
    replies[review.text] = json.dumps(by_review.get(review.review_id, []))


class ScriptedLLM(BaseHTTPRequestHandler):
    def do_POST(self):
        prompt = json.loads(self.rfile.read(int(self.headers["Content-Length"])))[
            "messages"][0]["content"]
        reply = next((r for text, r in replies.items() if text in prompt), "[]")
        body = json.dumps({"choices": [{"message": {"content": reply}}]}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


llm = HTTPServer(("127.0.0.1", 0), ScriptedLLM)
threading.Thread(target=llm.serve_forever, daemon=True).start()

workdir = Path(tempfile.mkdtemp(prefix="opinionmine-demo-"))
vectors_path = workdir / "vectors.jsonl"
save_vectors(corpus.vectors, vectors_path)

app = create_app(workdir / "data")
server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error"))
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.05)
port = server.servers[0].sockets[0].getsockname()[1]
base = f"http://127.0.0.1:{port}"
print(f"service listening on {base}")


def wait(job_id: str) -> dict:
    while True:
        record = requests.get(f"{base}/jobs/{job_id}").json()
        if record["status"] in ("done", "failed"):
            assert record["status"] == "done", record
            return record
        time.sleep(0.05)


lines = "".join(json.dumps({"review_id": r.review_id, "text": r.text, "stars": r.stars,
                            "tags": r.tags}) + "\n" for r in corpus.reviews)
corpus_id = requests.post(f"{base}/corpora", data=lines.encode()).json()["corpus_id"]
print(f"corpus {corpus_id}")

job = requests.post(f"{base}/corpora/{corpus_id}/extract", json={
    "endpoint_url": f"http://127.0.0.1:{llm.server_port}/v1/chat",
    "model": "scripted", "backoff_base": 0.0}).json()
wait(job["job_id"])
print("extract done")

job = requests.post(f"{base}/corpora/{corpus_id}/embed",
                    json={"path": str(vectors_path)}).json()
wait(job["job_id"])
print("embed done")

model_req = {"method": "m3", "k": 8, "min_cluster_size": 30, "reduced_dim": 4, "seed": 0}
job = requests.post(f"{base}/corpora/{corpus_id}/models", json=model_req).json()
wait(job["job_id"])
model_id = job["model_id"]
topics = requests.get(f"{base}/models/{model_id}/topics").json()
print(f"model {model_id}: {len(topics['topics'])} topics, "
      f"outlier rate {topics['outlier_rate']:.3f}")

again = requests.post(f"{base}/corpora/{corpus_id}/models", json=model_req).json()
print(f"resubmitting the identical config: status={again['status']} "
      f"(cache hit: {again['model_id'] == model_id})")

job = requests.post(f"{base}/models/{model_id}/regress",
                    json={"with_sentiment": True, "seed": 0}).json()
wait(job["job_id"])
fit = requests.get(f"{base}/fits/{job['fit_id']}").json()
print(f"fit {job['fit_id']}: CV mean R2 {fit['cross_validation']['mean_r2']:.3f}")

report = requests.get(f"{base}/models/{model_id}/report?format=md").text
print("\nreport (markdown):\n")
print(report)

server.should_exit = True
thread.join(timeout=5)
llm.shutdown()
