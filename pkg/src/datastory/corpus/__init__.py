from .filtering import MAX_CHARTS, MIN_CHARTS, MIN_TOKENS, FilterDecision, apply_exclusion_criteria
from .io import import_csv_table, load_corpus, load_story
from .model import CorpusSchemaError, CorpusSegment, CorpusStory, dump_story
from .stats import (
    CorpusStats,
    EmptyStory,
    StoryStats,
    corpus_stats,
    corpus_verb_freq,
    format_stats_table,
    inter_trigram_repetition,
    story_stats,
)
from .text import LexiconVerbTagger, VerbTagger, intra_trigram_repetition, tokenize

__all__ = [
    "MAX_CHARTS",
    "MIN_CHARTS",
    "MIN_TOKENS",
    "CorpusSchemaError",
    "CorpusSegment",
    "CorpusStats",
    "CorpusStory",
    "EmptyStory",
    "FilterDecision",
    "LexiconVerbTagger",
    "StoryStats",
    "VerbTagger",
    "apply_exclusion_criteria",
    "corpus_stats",
    "corpus_verb_freq",
    "dump_story",
    "format_stats_table",
    "import_csv_table",
    "inter_trigram_repetition",
    "intra_trigram_repetition",
    "load_corpus",
    "load_story",
    "story_stats",
    "tokenize",
]
