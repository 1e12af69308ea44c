"""Adaptive channel setup: negotiation, placement optimization, deployment, teardown."""

from .models import (
    AdaptiveProfile,
    CommsSpec,
    ComponentDecl,
    ComponentVar,
    Constraint,
    NegotiationOffer,
    NegotiationReply,
    Objective,
    ObjectiveWeights,
    PlacementSpec,
    Resource,
    ResourceKind,
    SessionState,
    SessionView,
)
from .negotiation import MAX_ROUNDS, TargetNegotiator, assemble_comms_spec, negotiate
from .optimizer import EXHAUSTIVE_LIMIT, evaluate, link_latency, optimize_placement
from .session import ChannelSession, OwnerFailed, ResourceOwner, SessionManager, deploy

__all__ = [
    "AdaptiveProfile", "ChannelSession", "CommsSpec", "ComponentDecl", "ComponentVar", "Constraint",
    "EXHAUSTIVE_LIMIT", "MAX_ROUNDS", "NegotiationOffer", "NegotiationReply", "Objective",
    "ObjectiveWeights", "OwnerFailed", "PlacementSpec", "Resource", "ResourceKind", "ResourceOwner",
    "SessionManager", "SessionState", "SessionView", "TargetNegotiator", "assemble_comms_spec", "deploy",
    "evaluate", "link_latency", "negotiate", "optimize_placement",
]
