"""HTTP front door: query endpoint, function listing, figure serving,
health, configuration.

Responses are synchronous and, in Replay mode with the deterministic
synthesizer, byte-identical across runs (no server timestamps in
bodies). No endpoint returns an unstructured 500.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .clients import NoaaClients, Transport, TransportMode
from .core import OceanQueryError
from .dispatcher import ArgValidation, Dispatcher, UpstreamFailure, build_default_registry
from .intent import AmbiguousTime, Gazetteer, UnknownLocation, default_gazetteer, emit_function_schemas
from .orchestrator import HttpChatModel, Orchestrator, TurnMode
from .rendering import FigureStore
from .retrieval import StubWebSearch, VectorStore

_PACKAGE_DATA = Path(__file__).parent / "data"


@dataclass
class ServiceConfig:
    fixture_dir: str = "fixtures"
    figure_dir: str = "figures"
    host: str = "127.0.0.1"
    port: int = 8800
    transport_mode: str = "replay"
    gazetteer_path: Optional[str] = None
    providers_path: Optional[str] = None
    corpus_dir: Optional[str] = None
    corpus_snapshot: Optional[str] = None
    web_fixtures_path: Optional[str] = None
    cors_origins: list = field(default_factory=lambda: ["*"])
    model_base_url: Optional[str] = None
    model_name: Optional[str] = None
    model_api_key: str = ""

    @classmethod
    def from_file(cls, path) -> "ServiceConfig":
        raw = json.loads(Path(path).read_text())
        cfg = cls(**raw)
        # environment overrides for deployment knobs
        cfg.host = os.environ.get("OCEANQUERY_HOST", cfg.host)
        cfg.port = int(os.environ.get("OCEANQUERY_PORT", cfg.port))
        cfg.transport_mode = os.environ.get("OCEANQUERY_TRANSPORT", cfg.transport_mode)
        cfg.model_base_url = os.environ.get("OCEANQUERY_MODEL_URL", cfg.model_base_url)
        cfg.model_api_key = os.environ.get("OCEANQUERY_MODEL_KEY", cfg.model_api_key)
        return cfg

    def validate(self):
        if not Path(self.fixture_dir).exists() and self.transport_mode == "replay":
            raise FileNotFoundError(f"fixture_dir does not exist: {self.fixture_dir}")
        for label, p in (
            ("gazetteer_path", self.gazetteer_path),
            ("providers_path", self.providers_path),
            ("corpus_dir", self.corpus_dir),
            ("corpus_snapshot", self.corpus_snapshot),
            ("web_fixtures_path", self.web_fixtures_path),
        ):
            if p is not None and not Path(p).exists():
                raise FileNotFoundError(f"{label} does not exist: {p}")


def load_corpus(store: VectorStore, corpus_dir) -> int:
    """Ingest *.txt files with optional *.meta.json sidecars."""
    count = 0
    for txt in sorted(Path(corpus_dir).glob("*.txt")):
        meta = {}
        sidecar = txt.with_suffix(".meta.json")
        if sidecar.exists():
            meta = json.loads(sidecar.read_text())
        count += store.ingest(
            doc_id=txt.stem,
            text=txt.read_text(encoding="utf-8"),
            title=meta.get("title", txt.stem),
            year=meta.get("year"),
            origin=meta.get("origin", "bundled"),
        )
    return count


def build_components(config: ServiceConfig, transport: Optional[Transport] = None,
                     model=None):
    """Wire the full pipeline from a config; pieces are injectable for
    tests."""
    config.validate()
    providers = json.loads(
        Path(config.providers_path or _PACKAGE_DATA / "providers.json").read_text()
    )
    gazetteer = (
        Gazetteer.from_csv(config.gazetteer_path) if config.gazetteer_path
        else default_gazetteer()
    )
    regions = {}
    for name in gazetteer.names():
        entry = gazetteer.lookup(name)
        if entry.region is not None:
            regions[name] = entry.region
    if transport is None:
        transport = Transport(TransportMode(config.transport_mode), config.fixture_dir)
    clients = NoaaClients(transport, providers, regions)
    figure_store = FigureStore(config.figure_dir)

    if config.corpus_snapshot:
        vector_store = VectorStore.load(config.corpus_snapshot)
    else:
        vector_store = VectorStore()
        corpus_dir = config.corpus_dir or (_PACKAGE_DATA / "corpus")
        if Path(corpus_dir).exists():
            load_corpus(vector_store, corpus_dir)

    web_fixtures = config.web_fixtures_path or (_PACKAGE_DATA / "web_fixtures.json")
    web_search = StubWebSearch.from_file(web_fixtures) if Path(web_fixtures).exists() else StubWebSearch()

    registry = build_default_registry(clients, figure_store, vector_store, gazetteer)
    dispatcher = Dispatcher(registry, gazetteer, figure_store)
    if model is None and config.model_base_url and config.model_name:
        model = HttpChatModel(config.model_base_url, config.model_name, config.model_api_key)
    orchestrator = Orchestrator(
        dispatcher, gazetteer, vector_store=vector_store, web_search=web_search, model=model
    )
    return {
        "transport": transport,
        "clients": clients,
        "gazetteer": gazetteer,
        "figure_store": figure_store,
        "vector_store": vector_store,
        "registry": registry,
        "dispatcher": dispatcher,
        "orchestrator": orchestrator,
    }


def _figure_url(fig: dict) -> dict:
    digest = Path(fig["path"]).stem
    return {"url": f"/figures/{digest}", "alt_text": fig["alt_text"], "kind": fig["kind"]}


def build_app(config: ServiceConfig, transport: Optional[Transport] = None, model=None) -> FastAPI:
    parts = build_components(config, transport=transport, model=model)
    orchestrator: Orchestrator = parts["orchestrator"]
    figure_store: FigureStore = parts["figure_store"]
    registry = parts["registry"]
    vector_store = parts["vector_store"]

    app = FastAPI(title="oceanquery", docs_url=None, redoc_url=None)
    app.state.components = parts
    app.add_middleware(
        CORSMiddleware, allow_origins=config.cors_origins,
        allow_methods=["*"], allow_headers=["*"],
    )

    @app.exception_handler(Exception)
    async def unhandled(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": "Internal", "detail": str(exc)})

    @app.post("/api/query")
    async def query(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse(status_code=400, content={"error": "MalformedBody",
                                                          "detail": "body must be JSON"})
        if not isinstance(body, dict) or not isinstance(body.get("text"), str) \
                or not body["text"].strip():
            return JSONResponse(
                status_code=400,
                content={"error": "MalformedBody",
                         "detail": "body must be an object with non-empty string 'text'"},
            )
        mode_raw = body.get("mode", "deterministic")
        try:
            mode = TurnMode(mode_raw)
        except ValueError:
            return JSONResponse(
                status_code=400,
                content={"error": "MalformedBody", "detail": f"unknown mode {mode_raw!r}"},
            )
        try:
            answer = orchestrator.run_turn(body["text"], mode)
        except (UnknownLocation, AmbiguousTime, ArgValidation) as e:
            return JSONResponse(status_code=422, content=e.payload())
        except UpstreamFailure as e:
            return JSONResponse(status_code=502, content=e.payload())
        except OceanQueryError as e:
            return JSONResponse(status_code=422, content=e.payload())
        payload = answer.to_dict()
        payload["figures"] = [_figure_url(f) for f in payload["figures"]]
        return JSONResponse(payload)

    @app.get("/api/functions")
    async def functions():
        return JSONResponse({"functions": emit_function_schemas(registry)})

    @app.get("/figures/{digest}")
    async def figure(digest: str):
        data = figure_store.get_bytes(digest) if digest.isalnum() else None
        if data is None:
            return JSONResponse(status_code=404, content={"error": "NotFound",
                                                          "detail": f"no figure {digest!r}"})
        return Response(content=data, media_type="image/svg+xml")

    @app.get("/api/health")
    async def health():
        return JSONResponse({
            "status": "ok",
            "transport_mode": parts["transport"].mode.value,
            "corpus_size": len(vector_store),
        })

    return app
