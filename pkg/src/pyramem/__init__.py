"""Three-level streaming memory graph with structure-guided retrieval.

Build a fact/clip/global memory pyramid online from a timed event stream,
then answer questions by iterative seed retrieval, sufficiency assessment,
link expansion, and pruning.  Every model-dependent judgment sits behind an
adapter, so the full control flow runs deterministically without any
language model.
"""

from .index import ScoredHit, VectorIndex
from .ingest import ClipObservation, ExtractionResult, IngestPipeline, IngestReport, \
    StreamEvent, read_event_file, read_events, segment
from .reasoner import AnswerResult, EvidenceContext, Reasoner, ReasonerConfig, TurnRecord
from .store import MemoryStore
from .types import (
    ClipNode,
    FactNode,
    GlobalNode,
    KeyframeRef,
    Link,
    MemoryState,
    PersonEntity,
    TimeSpan,
    Verdict,
    Violation,
    validate_graph,
)

__version__ = "0.1.0"

__all__ = [
    "AnswerResult",
    "ClipNode",
    "ClipObservation",
    "EvidenceContext",
    "ExtractionResult",
    "FactNode",
    "GlobalNode",
    "IngestPipeline",
    "IngestReport",
    "KeyframeRef",
    "Link",
    "MemoryState",
    "MemoryStore",
    "PersonEntity",
    "Reasoner",
    "ReasonerConfig",
    "ScoredHit",
    "StreamEvent",
    "TimeSpan",
    "TurnRecord",
    "VectorIndex",
    "Verdict",
    "Violation",
    "read_event_file",
    "read_events",
    "segment",
    "validate_graph",
    "__version__",
]
