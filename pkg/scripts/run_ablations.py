#!/usr/bin/env python3
"""Run every pipeline ablation on one request and judge each against the full pipeline.

    python3 scripts/run_ablations.py TABLES.json --intent "..." [--backend canned|http] [-o out/ablations]

With ``--backend canned`` the stories come from the deterministic canned
responder and judging is skipped, which is useful as a dry run of the call
budgets. With ``--backend http`` (needs DN_API_KEY) the same model judges each
(full, ablation) pair in both orders, and the script prints the win rate of
the full pipeline.
"""

from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path

from datastory.canned import CannedResponder
from datastory.cli import load_tables, write_atomic
from datastory.evaluation import ABLATIONS, judge_both_orders, run_ablation, win_rates
from datastory.gateway import Gateway, HttpBackend, RetryPolicy, scripted
from datastory.model import StoryRequest, serialize_story, serialize_trace

log = logging.getLogger("run_ablations")


def gateway_for(backend: str, tables, model: str) -> Gateway:
    if backend == "canned":
        return Gateway(scripted(CannedResponder(tables)), model=model)
    return Gateway(HttpBackend.from_env(), model=model, retry=RetryPolicy())


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("tables", nargs="+")
    ap.add_argument("--intent", required=True)
    ap.add_argument("--backend", choices=("canned", "http"), default="canned")
    ap.add_argument("--model", default="gpt-4o")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("-o", "--output-dir", default="out/ablations")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    tables = load_tables(args.tables)
    request = StoryRequest(tables, args.intent)
    out = Path(args.output_dir)

    stories = {}
    for name in ABLATIONS:
        gw = gateway_for(args.backend, tables, args.model)
        story, trace = run_ablation(name, request, gw)
        stories[name] = story
        write_atomic(out / name / "story.json", serialize_story(story))
        write_atomic(out / name / "trace.json", serialize_trace(trace))
        log.info("%-18s %2d calls", name, len(trace.calls))

    if args.backend == "canned":
        log.info("canned backend: judging skipped")
        return

    judge = gateway_for(args.backend, tables, args.model)
    summary = {}
    for name in ABLATIONS:
        if name == "full":
            continue
        v = judge_both_orders(stories["full"], stories[name], judge, pair_id=f"full~{name}", tables=tables)
        row = win_rates([v])["overall"]
        summary[name] = v.to_dict()
        log.info("full vs %-18s full wins %.0f%%  ablation wins %.0f%%  tie %.0f%%",
                 name, row.a_win_pct, row.b_win_pct, row.tie_pct)
    write_atomic(out / "judgements.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
