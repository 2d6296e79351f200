"""Store configuration: engine knobs plus per-role adapter bindings.

A config is a plain dataclass serialized to JSON alongside each store so a
service restart reproduces the exact same behavior (embedder seed included).
Adapter roles: embedder, face_embedder, extractor, link_judge, pruner,
reason, global_updater, profiler.  Each binds to a scripted implementation
by default; any text-generation role can be switched to the remote backend.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from .adapters.base import AdapterConfig
from .adapters.remote import (
    RemoteExtractor,
    RemoteGlobalUpdater,
    RemoteLinkJudge,
    RemoteProfiler,
    RemotePruner,
    RemoteReasonModel,
    RemoteTextModel,
)
from .adapters.scripted import (
    AppendProfiler,
    ConcatUpdater,
    HashEmbedder,
    KeywordLinkJudge,
    ScriptedEventExtractor,
    SelectAllPruner,
    TokenCoverageAnswerer,
    TokenOverlapPruner,
)

DEFAULT_DIM = 64

_ROLES = ("embedder", "face_embedder", "extractor", "link_judge", "pruner",
          "reason", "global_updater", "profiler")

# Environment overrides for the numeric store defaults.
_ENV_OVERRIDES = {
    "PYRAMEM_CLIP_LEN": ("clip_len", float),
    "PYRAMEM_K_SEED": ("k_seed", int),
    "PYRAMEM_MAX_TURNS": ("max_turns", int),
    "PYRAMEM_K_LINK": ("k_link", int),
    "PYRAMEM_THETA_LOCAL": ("theta_local", float),
    "PYRAMEM_THETA_GLOBAL": ("theta_global", float),
}


@dataclass
class EngineConfig:
    dim: int = DEFAULT_DIM
    seed: int = 0
    clip_len: float = 30.0
    k_seed: int = 20
    max_turns: int = 3
    k_link: int = 10
    theta_local: float = 0.6
    theta_global: float = 0.5
    traverse_undirected: bool = True
    # Maximum retained entries in each store's query trace log (None keeps all).
    query_log_retention: int | None = None
    adapters: dict[str, AdapterConfig] = field(default_factory=dict)

    def __post_init__(self):
        for role in self.adapters:
            if role not in _ROLES:
                raise ValueError(f"unknown adapter role {role!r}")

    def apply_env_overrides(self, env=None) -> "EngineConfig":
        """Apply PYRAMEM_* environment overrides to the store defaults."""
        env = os.environ if env is None else env
        for var, (attr, cast) in _ENV_OVERRIDES.items():
            if var in env:
                setattr(self, attr, cast(env[var]))
        return self

    def adapter(self, role: str) -> AdapterConfig:
        return self.adapters.get(role, AdapterConfig())

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "seed": self.seed,
            "clip_len": self.clip_len,
            "k_seed": self.k_seed,
            "max_turns": self.max_turns,
            "k_link": self.k_link,
            "theta_local": self.theta_local,
            "theta_global": self.theta_global,
            "traverse_undirected": self.traverse_undirected,
            "query_log_retention": self.query_log_retention,
            "adapters": {role: cfg.to_dict() for role, cfg in self.adapters.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EngineConfig":
        adapters = {role: AdapterConfig.from_dict(cfg)
                    for role, cfg in d.get("adapters", {}).items()}
        retention = d.get("query_log_retention")
        return cls(
            dim=int(d.get("dim", DEFAULT_DIM)),
            seed=int(d.get("seed", 0)),
            clip_len=float(d.get("clip_len", 30.0)),
            k_seed=int(d.get("k_seed", 20)),
            max_turns=int(d.get("max_turns", 3)),
            k_link=int(d.get("k_link", 10)),
            theta_local=float(d.get("theta_local", 0.6)),
            theta_global=float(d.get("theta_global", 0.5)),
            traverse_undirected=bool(d.get("traverse_undirected", True)),
            query_log_retention=int(retention) if retention is not None else None,
            adapters=adapters,
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "EngineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass
class AdapterBundle:
    """Concrete adapter instances for every role of one store."""

    embedder: object
    face_embedder: object
    extractor: object
    link_judge: object
    pruner: object
    reason: object
    global_updater: object
    profiler: object
    any_remote: bool = False

    def clock(self):
        """Per-turn timing source: real for remote backends, frozen for
        scripted ones so scripted runs stay byte-deterministic."""
        return time.perf_counter if self.any_remote else None


def build_adapters(config: EngineConfig) -> AdapterBundle:
    """Instantiate every role from its binding."""
    any_remote = any(cfg.kind == "remote" for cfg in config.adapters.values())

    def remote_model(role: str) -> RemoteTextModel:
        return RemoteTextModel(config.adapter(role))

    for role in ("embedder", "face_embedder"):
        if config.adapter(role).kind == "remote":
            # Embeddings must be reproducible locally: snapshots carry no
            # vectors; the index is rebuilt by re-embedding at load time.
            raise ValueError(f"{role} cannot be remote; embeddings must be "
                             "deterministic to rebuild the index on load")
    embedder = HashEmbedder(dim=config.dim, seed=config.seed)
    face_embedder = HashEmbedder(dim=config.dim, seed=config.seed + 1)

    extractor_cfg = config.adapter("extractor")
    extractor = (RemoteExtractor(remote_model("extractor"))
                 if extractor_cfg.kind == "remote" else ScriptedEventExtractor())

    judge_cfg = config.adapter("link_judge")
    link_judge = (RemoteLinkJudge(remote_model("link_judge"))
                  if judge_cfg.kind == "remote" else KeywordLinkJudge())

    pruner_cfg = config.adapter("pruner")
    if pruner_cfg.kind == "remote":
        pruner = RemotePruner(remote_model("pruner"),
                              open_ended=bool(pruner_cfg.options.get("open_ended")))
    elif pruner_cfg.options.get("identity"):
        pruner = SelectAllPruner()
    else:
        pruner = TokenOverlapPruner()

    reason_cfg = config.adapter("reason")
    reason = (RemoteReasonModel(remote_model("reason"))
              if reason_cfg.kind == "remote" else TokenCoverageAnswerer())

    updater_cfg = config.adapter("global_updater")
    global_updater = (RemoteGlobalUpdater(remote_model("global_updater"))
                      if updater_cfg.kind == "remote" else ConcatUpdater())

    profiler_cfg = config.adapter("profiler")
    profiler = (RemoteProfiler(remote_model("profiler"))
                if profiler_cfg.kind == "remote" else AppendProfiler())

    return AdapterBundle(embedder=embedder, face_embedder=face_embedder,
                         extractor=extractor, link_judge=link_judge, pruner=pruner,
                         reason=reason, global_updater=global_updater,
                         profiler=profiler, any_remote=any_remote)
