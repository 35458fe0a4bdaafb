"""Multimodal data-story generation, chart specs, corpus statistics and pairwise evaluation."""

__version__ = "0.1.0"
