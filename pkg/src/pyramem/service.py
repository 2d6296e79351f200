"""HTTP service over named stores plus the registry shared with the CLI.

Store layout on disk (one directory per store under the data dir):
  config.json    engine knobs + adapter bindings
  snapshot.json  the memory graph (saved after create and each ingest)
  events.log     line-delimited mutation events
  queries.log    one answer-result JSON line per query

Ingestion is serialized per store (a concurrent attempt gets 409); queries
run concurrently under the store's shared read lock.  All result payloads
are rendered with the canonical serializer so the CLI and the HTTP API are
byte-identical for the same inputs.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import Depends, FastAPI, Header, HTTPException, Request, Response
from pydantic import BaseModel, Field
from starlette.concurrency import run_in_threadpool

from .adapters.base import AdapterFailure
from .config import AdapterBundle, EngineConfig, build_adapters
from .ingest import IngestPipeline, StreamOrderError, read_events
from .reasoner import Reasoner, ReasonerConfig, ReasonerError, result_json
from .store import MemoryStore, NodeNotFound, StoreError
from .types import LINK_KINDS

SNAPSHOT_FILE = "snapshot.json"
CONFIG_FILE = "config.json"
EVENTS_LOG = "events.log"
QUERIES_LOG = "queries.log"


class StoreHandle:
    """One open store: graph, adapters, and its ingest exclusivity flag."""

    def __init__(self, store_id: str, root: Path, config: EngineConfig,
                 store: MemoryStore, adapters: AdapterBundle):
        self.store_id = store_id
        self.root = root
        self.config = config
        self.store = store
        self.adapters = adapters
        self.ingest_busy = threading.Lock()
        self._log_lock = threading.Lock()

    @property
    def snapshot_path(self) -> Path:
        return self.root / SNAPSHOT_FILE

    def save(self) -> None:
        self.store.save(self.snapshot_path)

    def pipeline(self, clip_len: float | None = None) -> IngestPipeline:
        return IngestPipeline(
            self.store,
            extractor=self.adapters.extractor,
            global_updater=self.adapters.global_updater,
            link_judge=self.adapters.link_judge,
            profiler=self.adapters.profiler,
            face_embedder=self.adapters.face_embedder,
            k_link=self.config.k_link,
            theta_local=self.config.theta_local,
            theta_global=self.config.theta_global,
            clip_len=clip_len or self.config.clip_len,
        )

    def reasoner(self) -> Reasoner:
        cfg = ReasonerConfig(
            k_seed=self.config.k_seed,
            max_turns=self.config.max_turns,
            traverse_undirected=self.config.traverse_undirected,
            clock=self.adapters.clock(),
        )
        return Reasoner(self.store, self.adapters.reason, self.adapters.pruner, cfg)

    def log_query(self, question: str, result_doc: dict) -> None:
        path = self.root / QUERIES_LOG
        line = result_json({"question": question, "result": result_doc})
        with self._log_lock:  # concurrent queries share one trace log
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
            keep = self.config.query_log_retention
            if keep is not None:
                lines = path.read_text(encoding="utf-8").splitlines()
                if len(lines) > keep:
                    path.write_text("\n".join(lines[-keep:]) + "\n",
                                    encoding="utf-8")


class StoreRegistry:
    """Opens, creates, and caches stores under one data directory."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._handles: dict[str, StoreHandle] = {}
        self._lock = threading.Lock()

    def _root(self, store_id: str) -> Path:
        if not store_id or "/" in store_id or store_id.startswith("."):
            raise StoreError(f"invalid store id {store_id!r}")
        return self.data_dir / store_id

    def exists(self, store_id: str) -> bool:
        return (self._root(store_id) / CONFIG_FILE).is_file()

    def create(self, store_id: str, config: EngineConfig | None = None) -> StoreHandle:
        with self._lock:
            root = self._root(store_id)
            if self.exists(store_id):
                raise FileExistsError(f"store {store_id!r} already exists")
            root.mkdir(parents=True, exist_ok=True)
            config = config or EngineConfig()
            config.save(root / CONFIG_FILE)
            config.apply_env_overrides()  # runtime override, file keeps defaults
            adapters = build_adapters(config)
            store = MemoryStore(adapters.embedder, log_path=root / EVENTS_LOG)
            handle = StoreHandle(store_id, root, config, store, adapters)
            handle.save()
            self._handles[store_id] = handle
            return handle

    def get(self, store_id: str) -> StoreHandle:
        with self._lock:
            handle = self._handles.get(store_id)
            if handle is not None:
                return handle
            root = self._root(store_id)
            if not self.exists(store_id):
                raise KeyError(store_id)
            config = EngineConfig.load(root / CONFIG_FILE).apply_env_overrides()
            adapters = build_adapters(config)
            snapshot = root / SNAPSHOT_FILE
            if snapshot.is_file():
                store = MemoryStore.load(snapshot, adapters.embedder,
                                         log_path=root / EVENTS_LOG)
            else:
                store = MemoryStore(adapters.embedder, log_path=root / EVENTS_LOG)
            handle = StoreHandle(store_id, root, config, store, adapters)
            self._handles[store_id] = handle
            return handle

    def list_ids(self) -> list[str]:
        return sorted(p.parent.name for p in self.data_dir.glob(f"*/{CONFIG_FILE}"))


# ---------------------------------------------------------------------------
# View builders shared by HTTP and CLI (canonical field order)
# ---------------------------------------------------------------------------

def node_view(store: MemoryStore, node_id: str) -> dict:
    level = store.level_of(node_id)  # NodeNotFound propagates
    if level == "fact":
        node = store.state.facts[node_id].to_dict()
    elif level == "clip":
        node = store.state.clips[node_id].to_dict()
    else:
        node = store.state.global_node.to_dict()
    links = {}
    for kind in LINK_KINDS:
        entries = store.neighbors(node_id, {kind})
        if entries:
            links[kind] = [link.to_dict() for _, link in entries]
    return {"id": node_id, "level": level, "node": node, "links": links}


def persons_view(store: MemoryStore) -> dict:
    return {"persons": [p.to_dict() for p in store.state.persons.values()]}


# ---------------------------------------------------------------------------
# FastAPI application
# ---------------------------------------------------------------------------

class CreateStoreRequest(BaseModel):
    store_id: str = Field(min_length=1, pattern=r"^[A-Za-z0-9][A-Za-z0-9._-]*$")
    config: dict = Field(default_factory=dict)


class QueryRequest(BaseModel):
    question: str = Field(min_length=1)
    k: int | None = Field(default=None, ge=1)
    max_turns: int | None = Field(default=None, ge=1)
    options: list[str] | None = None


def create_app(data_dir: str | Path, token: str | None = None) -> FastAPI:
    registry = StoreRegistry(data_dir)
    app = FastAPI(title="pyramem", version="0.1.0")
    app.state.registry = registry

    def check_token(authorization: str | None = Header(default=None)) -> None:
        if token is None:
            return
        if authorization != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="invalid or missing token")

    guarded = Depends(check_token)

    def get_handle(store_id: str) -> StoreHandle:
        try:
            return registry.get(store_id)
        except KeyError:
            raise HTTPException(status_code=404,
                                detail=f"store {store_id!r} not found") from None

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/stores", status_code=201, dependencies=[guarded])
    def create_store(body: CreateStoreRequest):
        try:
            config = EngineConfig.from_dict(body.config) if body.config else None
        except (ValueError, TypeError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        try:
            handle = registry.create(body.store_id, config)
        except FileExistsError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"store_id": handle.store_id}

    @app.get("/stores", dependencies=[guarded])
    def list_stores():
        return {"stores": registry.list_ids()}

    @app.post("/stores/{store_id}/ingest", dependencies=[guarded])
    async def ingest(store_id: str, request: Request, clip_len: float | None = None):
        handle = get_handle(store_id)
        body = (await request.body()).decode("utf-8")
        try:
            events = read_events(body.splitlines())
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        if not handle.ingest_busy.acquire(blocking=False):
            raise HTTPException(status_code=409,
                                detail=f"ingest already running on {store_id!r}")
        try:
            pipeline = handle.pipeline(clip_len)
            try:
                # off the event loop: ingestion is CPU-bound and must not
                # stall concurrent queries
                report = await run_in_threadpool(pipeline.ingest_events, events)
            except (StreamOrderError, StoreError, ValueError) as exc:
                raise HTTPException(status_code=422, detail=str(exc)) from exc
            handle.save()
        finally:
            handle.ingest_busy.release()
        return report.to_dict()

    @app.post("/stores/{store_id}/query", dependencies=[guarded])
    def query(store_id: str, body: QueryRequest):
        handle = get_handle(store_id)
        reasoner = handle.reasoner()
        options = tuple(body.options) if body.options else None
        try:
            with handle.store.reading():
                result = reasoner.answer(body.question, k_seed=body.k,
                                         max_turns=body.max_turns, options=options)
        except ReasonerError as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc
        except AdapterFailure as exc:
            raise HTTPException(status_code=502, detail=str(exc)) from exc
        doc = result.to_dict()
        handle.log_query(body.question, doc)
        return Response(content=result_json(doc), media_type="application/json")

    @app.get("/stores/{store_id}/nodes/{node_id}", dependencies=[guarded])
    def get_node(store_id: str, node_id: str):
        handle = get_handle(store_id)
        try:
            with handle.store.reading():
                doc = node_view(handle.store, node_id)
        except (NodeNotFound, KeyError) as exc:
            raise HTTPException(status_code=404,
                                detail=f"node {node_id!r} not found") from exc
        return Response(content=result_json(doc), media_type="application/json")

    @app.get("/stores/{store_id}/graph/stats", dependencies=[guarded])
    def graph_stats(store_id: str):
        handle = get_handle(store_id)
        with handle.store.reading():
            doc = handle.store.stats()
        return Response(content=result_json(doc), media_type="application/json")

    @app.get("/stores/{store_id}/persons", dependencies=[guarded])
    def get_persons(store_id: str):
        handle = get_handle(store_id)
        with handle.store.reading():
            doc = persons_view(handle.store)
        return Response(content=result_json(doc), media_type="application/json")

    @app.get("/stores/{store_id}/media/{name}", dependencies=[guarded])
    def get_media(store_id: str, name: str):
        handle = get_handle(store_id)
        path = (handle.root / "media" / name).resolve()
        if not str(path).startswith(str((handle.root / "media").resolve())):
            raise HTTPException(status_code=404, detail="not found")
        if not path.is_file():
            raise HTTPException(status_code=404, detail="not found")
        return Response(content=path.read_bytes(),
                        media_type="application/octet-stream")

    return app
