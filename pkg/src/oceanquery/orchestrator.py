"""One conversation turn end-to-end: retrieval fan-out, conditional
structured-data dispatch, and answer synthesis.

Two synthesis paths share the same grounding contract: the deterministic
template synthesizer (a pure function of the fixtures and corpus) and an
external-model adapter speaking the chat-completions-with-tools
protocol. Either way the answer's ``data`` field is copied verbatim from
the tool payload; model-phrased text is post-checked so it can rephrase
but never alter a number.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .core import OceanQueryError, ToolResponse
from .dispatcher import Dispatcher, FunctionCall, UpstreamFailure
from .intent import (
    AmbiguousTime,
    Gazetteer,
    StructuredQuery,
    UnknownLocation,
    UnsupportedIntent,
    emit_function_schemas,
    parse_query,
)
from .retrieval import EmptyStore, ProviderUnavailable, VectorStore


class SynthesisNumericMismatch(OceanQueryError):
    code = "SynthesisNumericMismatch"


class TurnMode(Enum):
    DETERMINISTIC = "deterministic"
    MODEL_BACKED = "model_backed"


@dataclass(frozen=True)
class TurnPlan:
    run_web: bool = True
    run_docs: bool = True
    structured: Optional[StructuredQuery] = None
    deferred_to_model: bool = False
    parse_error: Optional[OceanQueryError] = None


@dataclass
class Answer:
    text: str
    figures: list
    data: dict
    citations: list  # of {"kind": "dataset"|"document"|"web", "identifier": str}
    provenance: list
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "figures": [f.to_dict() for f in self.figures],
            "data": self.data,
            "citations": self.citations,
            "provenance": self.provenance,
            "notes": self.notes,
        }


_DECIMAL = re.compile(r"-?\d+\.\d+")


def _numeric_leaves(obj, out: set):
    if isinstance(obj, bool):
        return
    if isinstance(obj, (int, float)):
        out.add(round(float(obj), 2))
    elif isinstance(obj, dict):
        for v in obj.values():
            _numeric_leaves(v, out)
    elif isinstance(obj, (list, tuple)):
        for v in obj:
            _numeric_leaves(v, out)
    elif isinstance(obj, str):
        for m in _DECIMAL.finditer(obj):
            out.add(round(float(m.group()), 2))


def check_text_grounding(text: str, json_data: dict) -> None:
    """Every decimal literal in the text must match a numeric value in
    json_data at 2-decimal precision; otherwise the text is treated as a
    hallucinated rephrasing and rejected."""
    allowed: set = set()
    _numeric_leaves(json_data, allowed)
    for m in _DECIMAL.finditer(text):
        value = round(float(m.group()), 2)
        if value not in allowed and -value not in allowed:
            raise SynthesisNumericMismatch(
                f"text claims {m.group()} which matches no value in the data payload"
            )


class Orchestrator:
    def __init__(
        self,
        dispatcher: Dispatcher,
        gazetteer: Gazetteer,
        vector_store: Optional[VectorStore] = None,
        web_search=None,
        model=None,
        now=None,
    ):
        self.dispatcher = dispatcher
        self.gazetteer = gazetteer
        self.vector_store = vector_store
        self.web_search = web_search
        self.model = model
        from datetime import datetime
        from .core import UTC

        self._now = now or (lambda: datetime.now(UTC))

    # -- planning ------------------------------------------------------------

    def plan(self, user_text: str) -> TurnPlan:
        """Total: parser failures are carried in the plan, not raised."""
        try:
            q = parse_query(user_text, self.gazetteer, self._now())
            return TurnPlan(structured=q)
        except UnsupportedIntent:
            return TurnPlan(structured=None, deferred_to_model=True)
        except (UnknownLocation, AmbiguousTime) as e:
            return TurnPlan(structured=None, parse_error=e)

    # -- execution -----------------------------------------------------------

    def run_turn(self, user_text: str, mode: TurnMode = TurnMode.DETERMINISTIC) -> Answer:
        plan = self.plan(user_text)
        if plan.parse_error is not None:
            raise plan.parse_error

        notes = []
        doc_hits = []
        if plan.run_docs and self.vector_store is not None:
            try:
                doc_hits = self.vector_store.search(user_text, k=4)
            except EmptyStore:
                notes.append("document corpus is empty; no document grounding")
        web_hits = []
        if plan.run_web and self.web_search is not None:
            try:
                web_hits = self.web_search.search(user_text)
            except ProviderUnavailable as e:
                notes.append(f"web search degraded: {e}")

        tool: Optional[ToolResponse] = None
        if plan.structured is not None:
            tool = self.dispatcher.dispatch_structured(plan.structured)

        if mode is TurnMode.MODEL_BACKED and self.model is not None:
            return self._synthesize_model(user_text, plan, tool, doc_hits, web_hits, notes)
        return self._synthesize_template(user_text, plan, tool, doc_hits, web_hits, notes)

    # -- deterministic synthesis ----------------------------------------------

    def _citations(self, tool, doc_hits, web_hits) -> list:
        citations = []
        if tool is not None:
            for p in tool.others.get("provenance", []):
                citations.append({"kind": "dataset", "identifier": p["dataset_id"]})
        for chunk, _score in doc_hits:
            ident = f"{chunk.doc_id}#{chunk.chunk_index}"
            citations.append({"kind": "document", "identifier": ident})
        for hit in web_hits:
            citations.append({"kind": "web", "identifier": hit.url})
        return citations

    def _synthesize_template(self, user_text, plan, tool, doc_hits, web_hits, notes) -> Answer:
        parts = []
        if tool is not None:
            parts.append(tool.text)
        elif plan.deferred_to_model:
            parts.append(
                "I could not map this question to a dataset query. "
                "Here is what the grounded sources say."
            )
        if doc_hits:
            titles = ", ".join(
                sorted({c.title or c.doc_id for c, _ in doc_hits})
            )
            parts.append(f"Related documents: {titles}.")
        if web_hits:
            parts.append("Web references: " + ", ".join(h.url for h in web_hits) + ".")
        text = " ".join(parts) if parts else "No grounded sources matched this question."
        return Answer(
            text=text,
            figures=list(tool.images) if tool is not None else [],
            data=tool.json_data if tool is not None else {},
            citations=self._citations(tool, doc_hits, web_hits),
            provenance=tool.others.get("provenance", []) if tool is not None else [],
            notes=notes,
        )

    # -- model-backed synthesis -----------------------------------------------

    def _synthesize_model(self, user_text, plan, tool, doc_hits, web_hits, notes) -> Answer:
        import json as _json

        messages = [
            {
                "role": "system",
                "content": (
                    "Answer using only the provided tool results and context. "
                    "Quote numeric values exactly as given."
                ),
            },
            {"role": "user", "content": user_text},
        ]
        tools = emit_function_schemas(self.dispatcher.registry)
        if tool is None and plan.deferred_to_model:
            first = self.model.complete(messages, tools=tools)
            msg = first["choices"][0]["message"]
            tool_calls = msg.get("tool_calls") or []
            if tool_calls:  # single round of tool execution
                call = FunctionCall.from_tool_call(tool_calls[0])
                tool = self.dispatcher.dispatch(call)
        if tool is not None:
            messages.append(
                {
                    "role": "tool",
                    "content": _json.dumps(
                        {"text": tool.text, "json_data": tool.json_data}, sort_keys=True
                    ),
                }
            )
        if doc_hits:
            messages.append(
                {
                    "role": "system",
                    "content": "Context passages: "
                    + " | ".join(c.text[:200] for c, _ in doc_hits),
                }
            )
        final = self.model.complete(messages, tools=None)
        model_text = final["choices"][0]["message"].get("content") or ""

        answer = self._synthesize_template(user_text, plan, tool, doc_hits, web_hits, notes)
        if tool is not None and model_text:
            try:
                check_text_grounding(model_text, tool.json_data)
                answer.text = model_text
            except SynthesisNumericMismatch as e:
                answer.notes.append(
                    f"model text rejected ({e}); deterministic template used instead"
                )
        elif model_text:
            answer.text = model_text
        return answer


class HttpChatModel:
    """Chat-completions-with-tools client for any endpoint speaking the
    messages/tools wire protocol."""

    def __init__(self, base_url: str, model: str, api_key: str = "", timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout = timeout

    def complete(self, messages: Sequence[dict], tools: Optional[Sequence[dict]] = None) -> dict:
        import httpx

        body = {"model": self.model, "messages": list(messages)}
        if tools:
            body["tools"] = list(tools)
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        try:
            resp = httpx.post(
                f"{self.base_url}/chat/completions", json=body, headers=headers,
                timeout=self.timeout,
            )
            resp.raise_for_status()
        except httpx.HTTPError as e:
            raise UpstreamFailure(f"model endpoint unavailable: {e}", retryable=True) from e
        return resp.json()
