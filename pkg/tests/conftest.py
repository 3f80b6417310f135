"""Shared fixtures: canonical parse fixtures, tiny corpora, fake transports."""

from __future__ import annotations

import numpy as np
import pytest

from opinionmine.corpus import OpinionUnit, Review
from opinionmine.extraction import TransportError

# The worked example reply the extraction prompt teaches the model to emit;
# kept verbatim here as the canonical parse fixture (9 entries, the first
# being the overall-experience unit).
A1_EXAMPLE_RESPONSE = (
    '[["Overall experience","We had a very mixed experience. 3 out of 5 stars.",6],\n'
    '["Outdoor patio seating","The gorgeous outdoor patio seating was fantastic with a '
    'nice view of the ocean",9],\n'
    '["View","a nice view of the ocean",8],\n'
    '["Oysters","we split a dozen oysters. They were the best I had in my life! FRESH! '
    'Delicious!",10],\n'
    '["Avocado toast","the avocado toast was excellent",9],\n'
    '["Crab cakes","the crab cakes were excellent",9],\n'
    '["Dessert","I absolutely hated the dessert we ordered",1],\n'
    '["Cocktail","I did not particularly like my cocktail",3],\n'
    '["Staff friendliness","the staff could have been a little friendlier",4]]'
)

A1_EXPECTED_LABELS = [
    "Overall experience", "Outdoor patio seating", "View", "Oysters",
    "Avocado toast", "Crab cakes", "Dessert", "Cocktail", "Staff friendliness",
]


@pytest.fixture
def a1_response() -> str:
    return A1_EXAMPLE_RESPONSE


def make_review(review_id: str = "r1", text: str = "great tacos", stars: int = 4) -> Review:
    return Review(review_id=review_id, text=text, stars=stars)


def make_unit(unit_id: str, sentiment: int, review_id: str = "r1",
              label: str = "Service", excerpt: str = "slow staff") -> OpinionUnit:
    return OpinionUnit(unit_id=unit_id, review_id=review_id, label=label,
                       excerpt=excerpt, sentiment=sentiment)


class FakeChatClient:
    """Scripted chat client: responses per review text, optional failures."""

    def __init__(self, responses: dict[str, str], fail_first: int = 0,
                 always_fail: set[str] | None = None):
        self.responses = responses
        self.fail_first = fail_first
        self.always_fail = always_fail or set()
        self.calls = 0

    def complete(self, prompt: str) -> str:
        self.calls += 1
        for text, response in self.responses.items():
            if text in prompt:
                if text in self.always_fail:
                    raise TransportError(f"scripted permanent failure for {text!r}")
                if self.fail_first > 0:
                    self.fail_first -= 1
                    raise TransportError("scripted transient failure")
                return response
        raise TransportError("no scripted response matches the prompt")


def planted_blobs(seed: int = 0, per_blob: int = 200, sigma: float = 0.4,
                  with_noise: bool = False):
    """The frozen blob fixture behind the density-clustering oracle tests."""
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0], [10.0, 0.0], [5.0, 9.0]])
    points = np.vstack([c + rng.normal(0.0, sigma, size=(per_blob, 2)) for c in centers])
    truth = np.repeat([0, 1, 2], per_blob)
    if not with_noise:
        return points, truth
    noise = rng.uniform(-8.0, 18.0, size=(50, 2))
    return np.vstack([points, noise]), truth
