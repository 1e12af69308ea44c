"""AgentFacts registry: the discovery-side cards carrying resolution metadata."""

from __future__ import annotations

import threading
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .clock import Clock, system_clock
from .context import ContextRequirements
from .errors import MalformedCard, MalformedName, NotFound
from .names import canonicalize
from .storage import atomic_write_json, read_json


class AgentFactsCard(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    agent_name: str
    label: str = ""
    capabilities: tuple[str, ...] = ()
    context_requirements: ContextRequirements = Field(default_factory=ContextRequirements)
    ttl_seconds: int = Field(ge=1)
    # Stamped by the registry on publish.
    published_at: float | None = None

    @field_validator("agent_name")
    @classmethod
    def _name(cls, v: str) -> str:
        return canonicalize(v)

    @field_validator("capabilities")
    @classmethod
    def _tags(cls, v: tuple[str, ...]) -> tuple[str, ...]:
        if any(not tag.strip() for tag in v):
            raise ValueError("capability tags must be non-empty")
        return v


def card_from_json(doc: dict) -> AgentFactsCard:
    try:
        return AgentFactsCard.model_validate(doc)
    except (ValidationError, MalformedName) as exc:
        raise MalformedCard(str(exc)) from None


class FactsRegistry:
    """Exact-name and tag lookup over TTL-expiring cards.

    Persists to a single JSON file when ``path`` is given.
    """

    def __init__(self, clock: Clock = system_clock, path: str | Path | None = None) -> None:
        self._clock = clock
        self._path = Path(path) if path else None
        self._cards: dict[str, AgentFactsCard] = {}
        self._lock = threading.Lock()
        if self._path and self._path.exists():
            doc = read_json(self._path)
            for raw in doc.get("cards", []):
                card = card_from_json(raw)
                self._cards[card.agent_name] = card

    def _live(self, card: AgentFactsCard, now: float) -> bool:
        return now < (card.published_at or 0.0) + card.ttl_seconds

    def publish_facts(self, card: AgentFactsCard | dict) -> AgentFactsCard:
        if isinstance(card, dict):
            card = card_from_json(card)
        stored = card.model_copy(update={"published_at": self._clock()})
        with self._lock:
            self._cards[stored.agent_name] = stored
            self._persist()
        return stored

    def get_facts(self, name: str) -> AgentFactsCard:
        try:
            key = canonicalize(name)
        except MalformedName:
            raise NotFound(f"no facts for {name!r}") from None
        card = self._cards.get(key)
        if card is None or not self._live(card, self._clock()):
            raise NotFound(f"no facts for {key!r}")
        return card

    def find_by_tag(self, tag: str) -> list[AgentFactsCard]:
        now = self._clock()
        cards = list(self._cards.values())
        hits = [c for c in cards if tag in c.capabilities and self._live(c, now)]
        return sorted(hits, key=lambda c: c.agent_name)

    def _persist(self) -> None:
        if self._path is None:
            return
        cards = [c.model_dump(mode="json") for c in sorted(self._cards.values(), key=lambda c: c.agent_name)]
        atomic_write_json(self._path, {"cards": cards})
