"""Extract opinion units from raw reviews through the chat-endpoint client.

Runs fully offline: a scripted local HTTP server stands in for the LLM so
the real transport, caching, and parsing paths are exercised end to end.
"""

import json
import tempfile
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

from opinionmine import ExtractionConfig, Review, extract_corpus
from opinionmine.extraction import build_prompt

REVIEWS = [
    Review("r1", "The tacos were incredible but we waited 40 minutes for a table.", 4),
    Review("r2", "Overpriced sushi. Great view of the harbor though. Meh overall.", 2),
    Review("r3", "Lovely evening! Friendly staff, quick service, clean dining room.", 5),
]

# What a capable model would reply for each review (bracketed triple arrays)
SCRIPTED = {
    "r1": '[["Tacos","The tacos were incredible",9],'
          '["Wait time","we waited 40 minutes for a table",2]]',
    "r2": '[["Overall experience","Meh overall.",4],'
          '["Pricing","Overpriced sushi",2],'
          '["View","Great view of the harbor",8]]',
    "r3": '[["Staff friendliness","Friendly staff",9],'
          '["Service speed","quick service",9],'
          '["Cleanliness","clean dining room",8]]',
}


class ScriptedLLM(BaseHTTPRequestHandler):
    def do_POST(self):
        prompt = json.loads(self.rfile.read(int(self.headers["Content-Length"])))[
            "messages"][0]["content"]
        reply = "[]"
        for review in REVIEWS:
            if review.text in prompt:
                reply = SCRIPTED[review.review_id]
        body = json.dumps({"choices": [{"message": {"content": reply}}]})
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body.encode())

    def log_message(self, *args):
        pass


server = HTTPServer(("127.0.0.1", 0), ScriptedLLM)
threading.Thread(target=server.serve_forever, daemon=True).start()
endpoint = f"http://127.0.0.1:{server.server_port}/v1/chat"

print("The prompt sent for the first review starts with:")
print("  " + build_prompt(REVIEWS[0]).splitlines()[0][:74] + "...")
print()

with tempfile.TemporaryDirectory() as cache_dir:
    config = ExtractionConfig(endpoint_url=endpoint, model="scripted-demo",
                              cache_dir=cache_dir, backoff_base=0.0)
    result = extract_corpus(REVIEWS, config)
    print(f"Extracted {result.stats.units_kept} units "
          f"({result.stats.overall_removed} overall-experience unit removed):")
    for unit in result.units:
        print(f"  [{unit.review_id}] {unit.label}: {unit.excerpt!r} "
              f"(sentiment {unit.sentiment}/10)")

    # a second pass is served entirely from the response cache
    again = extract_corpus(REVIEWS, config)
    print(f"\nSecond pass: {again.stats.cache_hits} cache hits, "
          f"{again.stats.llm_calls} network calls; identical output: "
          f"{again.units == result.units}")

server.shutdown()
