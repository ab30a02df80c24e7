"""Model-backed concept mining: concept lists, prompt rewrites, stimuli and embeddings."""

from .client import (
    ClientConfig,
    ConceptListResponse,
    EditTask,
    MiningClient,
    StimulusSetResponse,
    embed_texts,
    parse_concepts,
    rewrite_for_insertion,
    synthesize_stimuli,
)
from .parsing import bracketed_span, extract_string_list
from .transport import HttpTransport, RecordingTransport, ReplayTransport, ScriptedTransport, chat_reply

__all__ = [
    "ClientConfig",
    "ConceptListResponse",
    "EditTask",
    "HttpTransport",
    "MiningClient",
    "RecordingTransport",
    "ReplayTransport",
    "ScriptedTransport",
    "StimulusSetResponse",
    "bracketed_span",
    "chat_reply",
    "embed_texts",
    "extract_string_list",
    "parse_concepts",
    "rewrite_for_insertion",
    "synthesize_stimuli",
]
