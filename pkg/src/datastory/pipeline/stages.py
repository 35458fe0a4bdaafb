"""Reflection -> outline -> narration, each as generate / critique / revise.

The output of each finalized stage is bound verbatim into the prompts of the
next stage. Skipped stages bind an explicit marker instead.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Mapping, Optional

from ..gateway import CRITIQUE_TEMPERATURE, GENERATE_TEMPERATURE, ChatRequest, Gateway, GatewayError, Message
from ..model import (
    Critique,
    DataStory,
    Outline,
    PipelineTrace,
    Reflection,
    StageMeta,
    StageRecord,
    StoryRequest,
    TraceCall,
    check_story,
    outline_structure_issue,
)
from ..visspec.validate import validate_visspec
from .parsing import critique_has_verdict, format_plan, parse_bullets, parse_critique, parse_narration, parse_outline
from .templates import PromptTemplate, load_system_prompt, load_templates, render_prompt, render_tables

logger = logging.getLogger(__name__)

REFLECTION_SKIPPED = "(reflection skipped)"
OUTLINE_SKIPPED = "(outline skipped)"


@dataclass(frozen=True)
class PipelineConfig:
    skip_reflection: bool = False
    skip_outline: bool = False
    skip_verification: bool = False
    max_revisions_per_stage: int = 1
    max_tokens: int = 2048

    def __post_init__(self) -> None:
        if self.max_revisions_per_stage < 0:
            raise ValueError("max_revisions_per_stage must be >= 0")


class StageError(RuntimeError):
    """A stage failed; ``trace`` holds every call made up to the failure."""

    def __init__(self, stage: str, message: str, trace: Optional[PipelineTrace] = None) -> None:
        self.stage = stage
        self.trace = trace
        super().__init__(f"{stage}: {message}")


class StageGatewayError(StageError):
    def __init__(self, stage: str, role: str, cause: GatewayError, trace: Optional[PipelineTrace] = None) -> None:
        self.role = role
        self.cause = cause
        super().__init__(stage, f"{role} call failed: {cause}", trace)


@dataclass
class StageResult:
    text: str
    critique: Optional[Critique]
    revised: bool
    calls: list[TraceCall] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def record(self, stage: str) -> StageRecord:
        return StageRecord(stage, tuple(self.calls), tuple(self.warnings))  # type: ignore[arg-type]


class _Agents:
    """Issues chat requests for one stage and records them as trace calls."""

    def __init__(self, gateway: Gateway, templates: Mapping[str, PromptTemplate], config: PipelineConfig) -> None:
        self.gateway = gateway
        self.templates = templates
        self.config = config
        self.system = {"generator": load_system_prompt("generator"), "critic": load_system_prompt("critic")}

    def call(self, stage: str, role: str, bindings: Mapping[str, str], calls: list[TraceCall]) -> str:
        tag = f"{stage}.{role}"
        prompt = render_prompt(self.templates[tag], bindings)
        agent = "critic" if role == "critique" else "generator"
        request = ChatRequest(
            model=self.gateway.model,
            messages=(Message("system", self.system[agent]), Message("user", prompt)),
            temperature=CRITIQUE_TEMPERATURE if role == "critique" else GENERATE_TEMPERATURE,
            max_tokens=self.config.max_tokens,
            tag=tag,
        )
        start = time.perf_counter()
        try:
            response = self.gateway.complete(request)
        except GatewayError as e:
            raise StageGatewayError(stage, role, e) from e
        calls.append(TraceCall(role, tag, prompt, response.content, (time.perf_counter() - start) * 1000.0))  # type: ignore[arg-type]
        if response.finish_reason != "stop":
            logger.warning("%s finished with %s", tag, response.finish_reason)
        return response.content.strip()


def run_stage(
    stage: str,
    context: Mapping[str, str],
    config: PipelineConfig,
    gateway: Gateway,
    templates: Optional[Mapping[str, PromptTemplate]] = None,
) -> StageResult:
    """Generate a stage artifact, then critique and revise it within budget."""
    agents = _Agents(gateway, templates or load_templates(), config)
    return _run_stage(stage, context, agents)


def _run_stage(stage: str, context: Mapping[str, str], agents: _Agents) -> StageResult:
    result = StageResult("", None, False)
    bindings = dict(context)
    try:
        result.text = agents.call(stage, "generate", bindings, result.calls)
        if agents.config.skip_verification:
            return result
        budget = agents.config.max_revisions_per_stage
        while True:
            bindings[stage] = result.text
            reply = agents.call(stage, "critique", bindings, result.calls)
            if not reply.strip():
                result.warnings.append("empty critique; treated as no revision needed")
                result.critique = Critique(False, (), reply)
            else:
                if not critique_has_verdict(reply):
                    result.warnings.append("critique has no REVISION verdict line; inferred from bullets")
                result.critique = parse_critique(reply)
            if not result.critique.needs_revision or budget == 0:
                return result
            budget -= 1
            bindings["revision_plan"] = format_plan(result.critique)
            result.text = agents.call(stage, "revise", bindings, result.calls)
            result.revised = True
            if budget == 0:
                return result
    except StageError as e:
        e.partial = result  # type: ignore[attr-defined]
        raise


def _base_bindings(request: StoryRequest) -> dict[str, str]:
    return {
        "tables": render_tables(request.tables),
        "guidelines": request.guidelines.strip() or "(none)",
        "intent": request.intent.strip(),
        "revision_plan": "(none)",
    }


def _meta(result: StageResult, issues=()) -> StageMeta:
    return StageMeta(revised=result.revised, critique=result.critique, issues=tuple(issues))


def _reflection_from(result: StageResult) -> Reflection:
    bullets = parse_bullets(result.text)
    if not bullets:
        raise StageError("reflection", "empty reflection")
    return Reflection(tuple(bullets), result.text, _meta(result))


def _outline_from(result: StageResult) -> Outline:
    sections = parse_outline(result.text)
    problem = outline_structure_issue(sections)
    if problem:
        raise StageError("outline", f"incomplete narrative structure ({problem})")
    return Outline(tuple(sections), result.text, _meta(result))


def _story_from(result: StageResult, request: StoryRequest) -> DataStory:
    segments = parse_narration(result.text)
    story = DataStory(request.request_id, tuple(segments))
    issues = list(check_story(story, request.tables))
    for i, seg in enumerate(story.segments):
        if seg.visspec is not None and request.tables.get(seg.visspec.table_ref) is not None:
            for issue in validate_visspec(seg.visspec, request.tables):
                issues.append(type(issue)(issue.severity, issue.code, issue.message, f"segments[{i}].visspec.{issue.path}"))
    return DataStory(request.request_id, story.segments, _meta(result, issues))


def run_reflection(request: StoryRequest, config: PipelineConfig, gateway: Gateway, templates=None) -> Reflection:
    result = run_stage("reflection", _base_bindings(request), config, gateway, templates)
    return _reflection_from(result)


def run_outline(
    reflection: Optional[Reflection], request: StoryRequest, config: PipelineConfig, gateway: Gateway, templates=None
) -> Outline:
    ctx = _base_bindings(request)
    ctx["reflection"] = reflection.text if reflection is not None else REFLECTION_SKIPPED
    return _outline_from(run_stage("outline", ctx, config, gateway, templates))


def run_narration(
    outline: Optional[Outline],
    request: StoryRequest,
    config: PipelineConfig,
    gateway: Gateway,
    templates=None,
    reflection: Optional[Reflection] = None,
) -> DataStory:
    ctx = _base_bindings(request)
    ctx["outline"] = outline.text if outline is not None else OUTLINE_SKIPPED
    ctx["reflection"] = reflection.text if reflection is not None else REFLECTION_SKIPPED
    return _story_from(run_stage("narration", ctx, config, gateway, templates), request)


def generate_story(
    request: StoryRequest,
    config: PipelineConfig = PipelineConfig(),
    gateway: Optional[Gateway] = None,
    templates: Optional[Mapping[str, PromptTemplate]] = None,
    config_name: str = "full",
) -> tuple[DataStory, PipelineTrace]:
    """Run the enabled stages in order and return the story with its trace.

    On failure a :class:`StageError` is raised whose ``trace`` attribute holds
    the calls made so far.
    """
    if gateway is None:
        raise ValueError("a gateway is required")
    agents = _Agents(gateway, templates or load_templates(), config)
    records: list[StageRecord] = []

    def trace() -> PipelineTrace:
        return PipelineTrace(tuple(records), config_name, request.request_id)

    def stage(name: str, ctx: dict[str, str]) -> StageResult:
        try:
            result = _run_stage(name, ctx, agents)
        except StageError as e:
            partial = getattr(e, "partial", None)
            if partial is not None and partial.calls:
                records.append(partial.record(name))
            e.trace = trace()
            raise
        records.append(result.record(name))
        return result

    def finalize(name: str, build):
        try:
            return build()
        except StageError as e:
            e.trace = trace()
            raise

    base = _base_bindings(request)
    reflection: Optional[Reflection] = None
    outline: Optional[Outline] = None

    if not config.skip_reflection:
        res = stage("reflection", dict(base))
        reflection = finalize("reflection", lambda: _reflection_from(res))

    reflection_text = reflection.text if reflection is not None else REFLECTION_SKIPPED
    if not config.skip_outline:
        res = stage("outline", {**base, "reflection": reflection_text})
        outline = finalize("outline", lambda: _outline_from(res))

    outline_text = outline.text if outline is not None else OUTLINE_SKIPPED
    res = stage("narration", {**base, "reflection": reflection_text, "outline": outline_text})
    story = _story_from(res, request)
    return story, trace()
