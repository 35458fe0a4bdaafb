from .parsing import parse_bullets, parse_critique, parse_narration, parse_outline
from .stages import (
    OUTLINE_SKIPPED,
    REFLECTION_SKIPPED,
    PipelineConfig,
    StageError,
    StageGatewayError,
    StageResult,
    generate_story,
    run_narration,
    run_outline,
    run_reflection,
    run_stage,
)
from .templates import PromptTemplate, UnboundPlaceholder, load_templates, render_prompt, render_table, render_tables

__all__ = [
    "OUTLINE_SKIPPED",
    "REFLECTION_SKIPPED",
    "PipelineConfig",
    "PromptTemplate",
    "StageError",
    "StageGatewayError",
    "StageResult",
    "UnboundPlaceholder",
    "generate_story",
    "load_templates",
    "parse_bullets",
    "parse_critique",
    "parse_narration",
    "parse_outline",
    "render_prompt",
    "render_table",
    "render_tables",
    "run_narration",
    "run_outline",
    "run_reflection",
    "run_stage",
]
