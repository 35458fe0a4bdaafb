from .ablation import ABLATIONS, UnknownAblation, ablation_config, run_ablation
from .agreement import (
    AlphaResult,
    AnnotationItem,
    AnnotationSet,
    MergeResult,
    annotation_set,
    krippendorff_alpha,
    krippendorff_alpha_detail,
    load_annotations_csv,
    merge_annotators,
)
from .judge import (
    ALL_CRITERIA,
    Criterion,
    JudgeError,
    ParseFailure,
    Verdict,
    build_judge_prompt,
    combine_orders,
    judge_both_orders,
    mirror,
    pairwise_judge,
    parse_verdict,
)
from .winrate import WinRateRow, WinRateTable, format_win_rate_table, win_rates

__all__ = [
    "ABLATIONS",
    "ALL_CRITERIA",
    "AlphaResult",
    "AnnotationItem",
    "AnnotationSet",
    "Criterion",
    "JudgeError",
    "MergeResult",
    "ParseFailure",
    "UnknownAblation",
    "Verdict",
    "WinRateRow",
    "WinRateTable",
    "ablation_config",
    "annotation_set",
    "build_judge_prompt",
    "combine_orders",
    "format_win_rate_table",
    "judge_both_orders",
    "krippendorff_alpha",
    "krippendorff_alpha_detail",
    "load_annotations_csv",
    "merge_annotators",
    "mirror",
    "pairwise_judge",
    "parse_verdict",
    "run_ablation",
    "win_rates",
]
