from __future__ import annotations

import pytest

from ualresolver.clock import FakeClock
from ualresolver.errors import MalformedCard, NotFound
from ualresolver.facts import FactsRegistry, card_from_json

CARD = {"agent_name": "agent://nanda.mit.edu/lab15/robot42", "label": "robot42",
        "capabilities": ["telemetry", "vision"], "ttl_seconds": 60,
        "context_requirements": {"required_fields": ["geo"]}}


def test_publish_get_and_expiry():
    clock = FakeClock(1000)
    reg = FactsRegistry(clock)
    stored = reg.publish_facts(CARD)
    assert stored.agent_name == "ual:nanda.mit.edu:lab15:robot42"
    assert stored.published_at == 1000
    assert reg.get_facts("@nanda.mit.edu:lab15:robot42").context_requirements.required_fields == ("geo",)
    clock.advance(59.9)
    reg.get_facts(stored.agent_name)
    clock.advance(0.1)
    with pytest.raises(NotFound):
        reg.get_facts(stored.agent_name)


def test_republish_replaces_and_refreshes():
    clock = FakeClock(0)
    reg = FactsRegistry(clock)
    reg.publish_facts(CARD)
    clock.advance(50)
    reg.publish_facts({**CARD, "label": "renamed"})
    clock.advance(50)
    assert reg.get_facts(CARD["agent_name"]).label == "renamed"


def test_find_by_tag_sorted_and_live_only():
    clock = FakeClock(0)
    reg = FactsRegistry(clock)
    reg.publish_facts({**CARD, "agent_name": "ual:b.example:z"})
    reg.publish_facts({**CARD, "agent_name": "ual:a.example:y", "ttl_seconds": 5})
    reg.publish_facts({**CARD, "agent_name": "ual:c.example:x", "capabilities": ["other"]})
    assert [c.agent_name for c in reg.find_by_tag("vision")] == ["ual:a.example:y", "ual:b.example:z"]
    clock.advance(5)
    assert [c.agent_name for c in reg.find_by_tag("vision")] == ["ual:b.example:z"]
    assert reg.find_by_tag("missing") == []


@pytest.mark.parametrize("doc", [
    {**CARD, "ttl_seconds": 0},
    {**CARD, "agent_name": "nope"},
    {**CARD, "capabilities": [" "]},
    {**CARD, "surprise": True},
    {k: v for k, v in CARD.items() if k != "ttl_seconds"},
])
def test_malformed_cards(doc):
    with pytest.raises(MalformedCard):
        card_from_json(doc)


def test_unknown_name_not_found():
    reg = FactsRegistry(FakeClock())
    for name in ("ual:x.example:y", "not a name"):
        with pytest.raises(NotFound):
            reg.get_facts(name)


def test_persistence_round_trip(tmp_path):
    path = tmp_path / "facts.json"
    clock = FakeClock(10)
    FactsRegistry(clock, path).publish_facts(CARD)
    again = FactsRegistry(clock, path)
    assert again.get_facts(CARD["agent_name"]).published_at == 10
