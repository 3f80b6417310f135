import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest

from conftest import (A1_EXAMPLE_RESPONSE, A1_EXPECTED_LABELS, FakeChatClient,
                      make_review)
from opinionmine.extraction import (ChatCompletionClient, ExtractionConfig,
                                    ExtractionFailed, ResponseCache, TransportError,
                                    UnparseableResponse, build_prompt, extract_corpus,
                                    filter_overall, parse_extraction)


class TestBuildPrompt:
    def test_contains_instruction_line(self):
        prompt = build_prompt(make_review(text="great tacos"))
        assert "Perform aspect-based sentiment analysis for the restaurant review" in prompt

    def test_contains_worked_example(self):
        prompt = build_prompt(make_review())
        assert "I just left Mary's with my lovely wife." in prompt
        assert '["Staff friendliness","the staff could have been a little friendlier",4]' in prompt

    def test_review_lands_in_input_slot(self):
        prompt = build_prompt(make_review(text="the soup was cold"))
        head, _, tail = prompt.rpartition("Input:")
        assert "the soup was cold" in tail
        assert prompt.rstrip().endswith("Output:")

    def test_prompts_differ_only_in_input_slot(self):
        p1 = build_prompt(make_review(text="first review"))
        p2 = build_prompt(make_review(text="second review"))
        assert p1.rpartition("Input:")[0] == p2.rpartition("Input:")[0]
        assert p1 != p2

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            build_prompt(make_review(text="   "))


class TestParseExtraction:
    def test_worked_example_yields_nine_units(self, a1_response):
        units, warnings = parse_extraction(a1_response, "r1")
        assert len(units) == 9
        assert warnings == []
        assert [u.label for u in units] == A1_EXPECTED_LABELS
        first = units[0]
        assert (first.label, first.excerpt, first.sentiment) == (
            "Overall experience", "We had a very mixed experience. 3 out of 5 stars.", 6)
        assert all(u.review_id == "r1" for u in units)

    def test_empty_array(self):
        units, warnings = parse_extraction("[]", "r1")
        assert units == [] and warnings == []

    def test_code_fence_and_prose_match_plain_parse(self, a1_response):
        plain, _ = parse_extraction(a1_response, "r1")
        wrapped = ("Sure! Here are the opinion units you asked for:\n\n"
                   f"```json\n{a1_response}\n```\n\nLet me know if you need anything else.")
        fenced, _ = parse_extraction(wrapped, "r1")
        assert fenced == plain

    def test_latex_style_quotes(self):
        raw = "[[``Overall experience'',``We had a mixed time.'',6]]"
        units, _ = parse_extraction(raw, "r1")
        assert units[0].label == "Overall experience"
        assert units[0].excerpt == "We had a mixed time."

    def test_out_of_range_scores_clamped_with_warning(self):
        units, warnings = parse_extraction('[["Food","too spicy",12],["Wait","slow",0]]', "r1")
        assert [u.sentiment for u in units] == [10, 1]
        assert len(warnings) == 2

    def test_float_scores_rounded(self):
        units, _ = parse_extraction('[["Food","nice",7.6]]', "r1")
        assert units[0].sentiment == 8

    def test_unparseable_raises(self):
        with pytest.raises(UnparseableResponse):
            parse_extraction("I could not find any opinions, sorry.", "r1")

    def test_prose_brackets_are_skipped(self, a1_response):
        raw = "As requested [see spec], here you go: " + a1_response
        units, _ = parse_extraction(raw, "r1")
        assert len(units) == 9

    def test_unit_ids_deterministic(self, a1_response):
        once, _ = parse_extraction(a1_response, "r9")
        twice, _ = parse_extraction(a1_response, "r9")
        assert once == twice
        assert once[0].unit_id == "r9:u0"


class TestFilterOverall:
    def test_removes_overall_from_worked_example(self, a1_response):
        units, _ = parse_extraction(a1_response, "r1")
        kept = filter_overall(units)
        assert len(kept) == 8
        assert all(u.label != "Overall experience" for u in kept)
        assert [u.label for u in kept] == A1_EXPECTED_LABELS[1:]

    def test_noop_without_overall_units(self, a1_response):
        units, _ = parse_extraction(a1_response, "r1")
        kept = filter_overall(units)
        assert filter_overall(kept) == kept

    def test_case_insensitive(self):
        raw = '[["Overall Experience","meh",5],["overall experience","fine",6],["Food","good",8]]'
        units, _ = parse_extraction(raw, "r1")
        kept = filter_overall(units)
        assert [u.label for u in kept] == ["Food"]

    def test_idempotent_property(self, a1_response):
        units, _ = parse_extraction(a1_response, "r1")
        assert filter_overall(filter_overall(units)) == filter_overall(units)


SIMPLE = '[["Food","tasty",8],["Service","slow staff",3]]'


def config(tmp_path=None, **kwargs) -> ExtractionConfig:
    defaults = dict(endpoint_url="http://fake.test/v1/chat", model="test-model",
                    backoff_base=0.0, cache_dir=str(tmp_path) if tmp_path else None)
    defaults.update(kwargs)
    return ExtractionConfig(**defaults)


class TestExtractCorpus:
    def test_basic_extraction_and_stats(self):
        reviews = [make_review("r1", "alpha"), make_review("r2", "beta")]
        client = FakeChatClient({"alpha": SIMPLE, "beta": A1_EXAMPLE_RESPONSE})
        result = extract_corpus(reviews, config(), client=client)
        assert result.stats.reviews_total == 2
        assert result.stats.units_raw == 11
        assert result.stats.overall_removed == 1
        assert result.stats.units_kept == 10
        assert result.stats.mean_units_per_review == pytest.approx(5.0)
        assert [u.review_id for u in result.units] == ["r1", "r1"] + ["r2"] * 8

    def test_warm_cache_skips_network(self, tmp_path):
        reviews = [make_review("r1", "alpha"), make_review("r2", "beta")]
        client = FakeChatClient({"alpha": SIMPLE, "beta": SIMPLE})
        first = extract_corpus(reviews, config(tmp_path), client=client)
        assert client.calls == 2
        second = extract_corpus(reviews, config(tmp_path), client=client)
        assert client.calls == 2  # zero new network calls
        assert second.units == first.units
        assert second.stats.cache_hits == 2

    def test_partial_failure_recorded(self):
        reviews = [make_review(f"r{i}", f"text{i}") for i in range(3)]
        client = FakeChatClient({"text0": SIMPLE, "text1": SIMPLE, "text2": SIMPLE},
                                always_fail={"text1"})
        result = extract_corpus(reviews, config(max_retries=1), client=client)
        assert result.stats.reviews_failed == 1
        assert {u.review_id for u in result.units} == {"r0", "r2"}
        assert result.failures[0]["review_id"] == "r1"

    def test_retry_then_success(self):
        reviews = [make_review("r1", "alpha")]
        client = FakeChatClient({"alpha": SIMPLE}, fail_first=2)
        result = extract_corpus(reviews, config(max_retries=3), client=client)
        assert client.calls == 3
        assert result.stats.reviews_failed == 0
        assert result.stats.llm_calls == 3

    def test_all_failures_raise(self):
        reviews = [make_review("r1", "alpha")]
        client = FakeChatClient({"alpha": SIMPLE}, always_fail={"alpha"})
        with pytest.raises(ExtractionFailed):
            extract_corpus(reviews, config(max_retries=0), client=client)

    def test_parse_failure_retries_then_records(self):
        reviews = [make_review("r1", "alpha")]
        client = FakeChatClient({"alpha": "no opinions here"})
        result = extract_corpus([make_review("r1", "alpha"), make_review("r2", "beta")],
                                config(max_retries=1),
                                client=FakeChatClient({"alpha": "no array",
                                                       "beta": SIMPLE}))
        assert result.stats.reviews_failed == 1
        assert "no opinion-triple array" in result.failures[0]["error"]

    def test_concurrent_order_deterministic(self):
        reviews = [make_review(f"r{i}", f"text{i} unique") for i in range(10)]
        responses = {f"text{i} unique": SIMPLE for i in range(10)}
        result = extract_corpus(reviews, config(parallelism=5),
                                client=FakeChatClient(responses))
        assert [u.review_id for u in result.units] == \
            [f"r{i}" for i in range(10) for _ in range(2)]

    def test_concurrent_identical_prompts_share_one_cache_entry(self, tmp_path):
        # identical texts under different review ids race on the same cache key
        reviews = [make_review(f"r{i}", "same text") for i in range(8)]
        client = FakeChatClient({"same text": SIMPLE})
        result = extract_corpus(reviews, config(tmp_path, parallelism=8), client=client)
        assert result.stats.reviews_failed == 0
        assert len(result.units) == 16
        assert len(list(tmp_path.glob("*.json"))) == 1  # one key, losers discarded
        assert {u.unit_id for u in result.units} == \
            {f"r{i}:u{j}" for i in range(8) for j in range(2)}

    def test_not_a_substring_counter(self):
        reviews = [make_review("r1", "the service was slow")]
        raw = '[["Service","slow staff",3],["Service","service was slow",2]]'
        result = extract_corpus(reviews, config(), client=FakeChatClient({"slow": raw}))
        assert result.stats.excerpt_not_substring == 1

    def test_clamp_counter_reaches_stats(self):
        reviews = [make_review("r1", "alpha")]
        raw = '[["Food","meh",42]]'
        result = extract_corpus(reviews, config(), client=FakeChatClient({"alpha": raw}))
        assert result.stats.clamped_scores == 1
        assert result.units[0].sentiment == 10


class TestResponseCache:
    def test_write_once(self, tmp_path):
        cache = ResponseCache(tmp_path)
        cache.put("prompt", "first")
        cache.put("prompt", "second")
        assert cache.get("prompt") == "first"

    def test_distinct_prompts_distinct_keys(self, tmp_path):
        cache = ResponseCache(tmp_path)
        cache.put("p1", "a")
        cache.put("p2", "b")
        assert cache.get("p1") == "a"
        assert cache.get("p2") == "b"
        assert cache.get("p3") is None


class _Handler(BaseHTTPRequestHandler):
    fail_next = 0

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        body = json.loads(self.rfile.read(length))
        if _Handler.fail_next > 0:
            _Handler.fail_next -= 1
            self.send_response(500)
            self.end_headers()
            return
        content = SIMPLE if "alpha" in body["messages"][0]["content"] else "[]"
        payload = json.dumps({"choices": [{"message": {"content": content}}]})
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(payload.encode())

    def log_message(self, *args):
        pass


@pytest.fixture
def chat_server():
    server = HTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/chat"
    server.shutdown()


class TestHttpTransport:
    def test_roundtrip_against_local_server(self, chat_server):
        client = ChatCompletionClient(chat_server, "test-model")
        raw = client.complete(build_prompt(make_review("r1", "alpha")))
        units, _ = parse_extraction(raw, "r1")
        assert len(units) == 2

    def test_http_500_raises_transport_error(self, chat_server):
        _Handler.fail_next = 1
        client = ChatCompletionClient(chat_server, "test-model")
        with pytest.raises(TransportError):
            client.complete("alpha")

    def test_extract_corpus_retries_over_http(self, chat_server):
        _Handler.fail_next = 1
        reviews = [make_review("r1", "alpha")]
        client = ChatCompletionClient(chat_server, "test-model")
        result = extract_corpus(reviews, config(max_retries=2), client=client)
        assert result.stats.reviews_failed == 0
        assert result.stats.llm_calls == 2
