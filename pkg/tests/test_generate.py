import pytest

from ragbench.corpus import QaPair
from ragbench.generate import (
    EndpointConfig,
    GenerationError,
    GenerationRequest,
    RelevanceClient,
    generate,
    request_from_json,
    request_to_json,
    stub_generate,
)
from ragbench.rerank import RankedContext, Strategy

from conftest import LoopbackService


def make_context(answer="B.", rank=1, pair_id="p1"):
    return RankedContext(
        qa=QaPair(id=pair_id, question="A?", answer=answer),
        score=0.0,
        rank=rank,
        strategy=Strategy.DENSE_L2,
    )


class TestRequest:
    def test_defaults_match_decoding_contract(self):
        request = GenerationRequest(prompt="p")
        assert request.beam_size == 4
        assert request.length_penalty == 1.0
        assert request.max_new_tokens == 256

    def test_serialization_roundtrip(self):
        request = GenerationRequest(
            prompt="some prompt", beam_size=7, length_penalty=0.8,
            max_new_tokens=99, timeout=5.0,
        )
        assert request_from_json(request_to_json(request)) == request

    def test_wire_payload_field_names(self):
        payload = GenerationRequest(prompt="p").wire_payload()
        assert set(payload) == {"prompt", "beam_size", "length_penalty", "max_new_tokens"}

    def test_invalid_rejected(self):
        with pytest.raises(ValueError):
            GenerationRequest(prompt="p", beam_size=0)
        with pytest.raises(ValueError):
            GenerationRequest(prompt="p", max_new_tokens=0)


class TestGenerate:
    def test_loopback_echo(self, loopback):
        response = generate(EndpointConfig(url=loopback), GenerationRequest(prompt="hello"))
        assert response.text == "ok"
        assert response.model_tag == "loopback"
        assert response.latency >= 0.0

    def test_beam_size_reaches_the_wire(self, loopback):
        generate(EndpointConfig(url=loopback), GenerationRequest(prompt="p", beam_size=4))
        payload = LoopbackService.captured[-1]["payload"]
        assert payload["beam_size"] == 4
        assert payload["prompt"] == "p"
        assert payload["length_penalty"] == 1.0
        assert payload["max_new_tokens"] == 256

    def test_unreachable_endpoint_names_it(self):
        endpoint = EndpointConfig(url="http://127.0.0.1:9", timeout=0.5)
        with pytest.raises(GenerationError, match="127.0.0.1:9"):
            generate(endpoint, GenerationRequest(prompt="p", timeout=0.5))

    def test_http_error_surfaced(self, loopback):
        LoopbackService.status = 500
        with pytest.raises(GenerationError, match="500"):
            generate(EndpointConfig(url=loopback), GenerationRequest(prompt="p"))

    def test_empty_text_rejected(self, loopback):
        LoopbackService.generate_reply = {"text": "", "model_tag": "m"}
        with pytest.raises(GenerationError, match="empty text"):
            generate(EndpointConfig(url=loopback), GenerationRequest(prompt="p"))

    def test_single_retry(self, loopback):
        # retries=1 sends the request twice on failure
        LoopbackService.status = 500
        endpoint = EndpointConfig(url=loopback, retries=1)
        with pytest.raises(GenerationError):
            generate(endpoint, GenerationRequest(prompt="p"))
        assert len(LoopbackService.captured) == 2

    def test_bad_retries_rejected(self):
        with pytest.raises(ValueError):
            EndpointConfig(url="http://x", retries=3)


class TestStubGenerate:
    def test_echoes_top_context_answer(self):
        response = stub_generate(GenerationRequest(prompt="p"), [make_context(answer="B.")])
        assert response.text == "B."

    def test_picks_rank_one_even_if_unsorted(self):
        contexts = [make_context("second.", rank=2, pair_id="b"),
                    make_context("first.", rank=1, pair_id="a")]
        assert stub_generate(GenerationRequest(prompt="p"), contexts).text == "first."

    def test_deterministic(self):
        contexts = [make_context()]
        a = stub_generate(GenerationRequest(prompt="p"), contexts)
        b = stub_generate(GenerationRequest(prompt="p"), contexts)
        assert a == b

    def test_no_contexts_rejected(self):
        with pytest.raises(GenerationError):
            stub_generate(GenerationRequest(prompt="p"), [])


class TestRelevanceClient:
    def test_score_roundtrip(self, loopback):
        client = RelevanceClient(EndpointConfig(url=loopback))
        assert client("q", "d") == 0.5
        payload = LoopbackService.captured[-1]["payload"]
        assert payload == {"query": "q", "document": "d"}

    def test_missing_score_rejected(self, loopback):
        LoopbackService.score_reply = {"nope": 1}
        client = RelevanceClient(EndpointConfig(url=loopback))
        with pytest.raises(GenerationError, match="score"):
            client("q", "d")
