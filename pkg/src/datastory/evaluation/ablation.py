"""Named pipeline configurations for ablation runs."""

from __future__ import annotations

from dataclasses import replace
from typing import Mapping, Optional

from ..gateway import Gateway
from ..model import DataStory, PipelineTrace, StoryRequest
from ..pipeline.stages import PipelineConfig, generate_story
from ..pipeline.templates import PromptTemplate

ABLATIONS: dict[str, PipelineConfig] = {
    "full": PipelineConfig(),
    "skip_reflection": PipelineConfig(skip_reflection=True),
    "skip_outline": PipelineConfig(skip_outline=True),
    "skip_verification": PipelineConfig(skip_verification=True),
    "direct": PipelineConfig(skip_reflection=True, skip_outline=True, skip_verification=True),
}


class UnknownAblation(ValueError):
    pass


def ablation_config(name: str, max_revisions_per_stage: Optional[int] = None) -> PipelineConfig:
    try:
        cfg = ABLATIONS[name]
    except KeyError:
        raise UnknownAblation(f"unknown ablation {name!r}; valid names: {', '.join(ABLATIONS)}") from None
    if max_revisions_per_stage is not None:
        cfg = replace(cfg, max_revisions_per_stage=max_revisions_per_stage)
    return cfg


def run_ablation(
    config_name: str,
    request: StoryRequest,
    gateway: Gateway,
    templates: Optional[Mapping[str, PromptTemplate]] = None,
) -> tuple[DataStory, PipelineTrace]:
    return generate_story(request, ablation_config(config_name), gateway, templates, config_name=config_name)
