"""``dn`` command-line entry point.

Exit codes: 0 success, 2 input or validation error, 3 backend or model error.
"""

from __future__ import annotations

import argparse
import html
import json
import logging
import os
import sys
import tempfile
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

from .corpus import (
    CorpusSchemaError,
    apply_exclusion_criteria,
    corpus_stats,
    dump_story,
    format_stats_table,
    import_csv_table,
    load_corpus,
)
from .evaluation import (
    ABLATIONS,
    JudgeError,
    UnknownAblation,
    Verdict,
    ablation_config,
    format_win_rate_table,
    judge_both_orders,
    krippendorff_alpha_detail,
    load_annotations_csv,
    merge_annotators,
    pairwise_judge,
    win_rates,
)
from .evaluation.judge import dump_verdicts, load_verdicts
from .gateway import Gateway, GatewayError, HttpBackend, ReplayBackend, RetryPolicy, Transcript
from .model import (
    DataStory,
    DataTableSet,
    SchemaError,
    StoryRequest,
    deserialize_story,
    deserialize_tables,
    has_errors,
    serialize_story,
    serialize_trace,
    validate_table_set,
)
from .pipeline import StageError, generate_story
from .visspec.render import EmptyData, RenderError, render_svg

logger = logging.getLogger("datastory")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_BACKEND = 3


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_INPUT) -> None:
        super().__init__(message)
        self.code = code


def write_atomic(path: Path, text: str) -> None:
    """Write via a temp file in the same directory, then rename over ``path``."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


# --------------------------------------------------------------------------
# Gateway configuration


@dataclass(frozen=True)
class CliConfig:
    backend: str = "replay"
    transcript_path: Optional[Path] = None
    model: str = "gpt-4o"
    seed: int = 0
    output_dir: Path = Path("out")
    lenient_replay: bool = False
    workers: int = 4

    def __post_init__(self) -> None:
        if self.backend in ("replay", "record") and self.transcript_path is None:
            raise CliError(f"--backend {self.backend} requires --transcript")
        if self.backend in ("http", "record") and not os.environ.get("DN_API_KEY"):
            raise CliError(f"--backend {self.backend} requires DN_API_KEY to be set")
        if self.workers < 1:
            raise CliError("--workers must be at least 1")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "CliConfig":
        return cls(
            backend=args.backend,
            transcript_path=Path(args.transcript) if args.transcript else None,
            model=args.model or os.environ.get("DN_MODEL") or "gpt-4o",
            seed=args.seed,
            output_dir=Path(args.output_dir),
            lenient_replay=args.lenient_replay,
            workers=args.workers,
        )

    def gateway(self) -> Gateway:
        if self.backend == "replay":
            assert self.transcript_path is not None
            try:
                transcript = Transcript.load(self.transcript_path)
            except (OSError, ValueError) as e:
                raise CliError(f"cannot read transcript {self.transcript_path}: {e}") from None
            return Gateway(ReplayBackend(transcript, lenient=self.lenient_replay), model=self.model, seed=self.seed)
        return Gateway(HttpBackend.from_env(), model=self.model, retry=RetryPolicy(), seed=self.seed)

    def save_recording(self, transcripts: Sequence[Transcript]) -> None:
        if self.backend == "record" and self.transcript_path is not None:
            write_atomic(self.transcript_path, "".join(t.to_jsonl() for t in transcripts))


def _add_gateway_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--backend", choices=("http", "replay", "record"), default="replay")
    p.add_argument("--transcript", help="JSONL transcript to replay from or record to")
    p.add_argument("--model", help="model name (default: $DN_MODEL or gpt-4o)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lenient-replay", action="store_true", help="fall back to (tag, call index) on digest miss")
    p.add_argument("--workers", type=int, default=4, help="worker threads for batch runs")


def _add_output_flag(p: argparse.ArgumentParser, default: str = "out") -> None:
    p.add_argument("--output-dir", "-o", default=default)


# --------------------------------------------------------------------------
# Input loading


def load_tables(paths: Sequence[str]) -> DataTableSet:
    """A single dn/1 tables document, or one or more CSV files."""
    try:
        if len(paths) == 1 and not paths[0].lower().endswith(".csv"):
            return deserialize_tables(Path(paths[0]).read_text("utf-8"))
        tables = []
        for p in paths:
            if not p.lower().endswith(".csv"):
                raise CliError(f"{p}: mix of CSV and non-CSV table inputs")
            stem = Path(p).stem
            tables.append(import_csv_table(p, stem.replace("_", " ")))
        return DataTableSet(tuple(tables))
    except SchemaError as e:
        raise CliError(f"invalid tables file: {e}") from None
    except (OSError, ValueError) as e:
        raise CliError(f"cannot read tables: {e}") from None


def _checked_tables(paths: Sequence[str]) -> DataTableSet:
    tables = load_tables(paths)
    report = validate_table_set(tables)
    for issue in report:
        print(f"{issue.severity}: {issue.path}: {issue.message} [{issue.code}]", file=sys.stderr)
    if has_errors(report):
        raise CliError("table validation failed")
    return tables


def _load_story(path: str) -> DataStory:
    try:
        return deserialize_story(Path(path).read_text("utf-8"))
    except (OSError, SchemaError) as e:
        raise CliError(f"cannot read story {path}: {e}") from None


# --------------------------------------------------------------------------
# generate / ablate


@dataclass
class GenerateJob:
    name: str
    request: StoryRequest
    config_name: str
    out_dir: Path


def _run_job(job: GenerateJob, base: Gateway, max_revisions: Optional[int]) -> tuple[int, Transcript, str]:
    gateway = replace(base, transcript=Transcript())
    cfg = ablation_config(job.config_name, max_revisions)
    try:
        story, trace = generate_story(job.request, cfg, gateway, config_name=job.config_name)
    except StageError as e:
        if e.trace is not None:
            write_atomic(job.out_dir / "trace.json", serialize_trace(e.trace))
        write_atomic(job.out_dir / "transcript.jsonl", gateway.transcript.to_jsonl())
        return EXIT_BACKEND, gateway.transcript, f"{job.name}: {e}"
    write_atomic(job.out_dir / "story.json", serialize_story(story))
    write_atomic(job.out_dir / "trace.json", serialize_trace(trace))
    write_atomic(job.out_dir / "transcript.jsonl", gateway.transcript.to_jsonl())
    for issue in story.stage_meta.issues:
        print(f"{job.name}: {issue.severity}: {issue.path}: {issue.message}", file=sys.stderr)
    return EXIT_OK, gateway.transcript, f"{job.name}: {len(trace.calls)} calls -> {job.out_dir}"


def _run_jobs(jobs: Sequence[GenerateJob], cli: CliConfig, max_revisions: Optional[int]) -> int:
    try:
        base = cli.gateway()
    except GatewayError as e:
        raise CliError(str(e), EXIT_BACKEND) from None
    with ThreadPoolExecutor(max_workers=cli.workers) as pool:
        results = list(pool.map(lambda j: _run_job(j, base, max_revisions), jobs))
    code = EXIT_OK
    for status, _, line in results:
        print(line, file=sys.stdout if status == EXIT_OK else sys.stderr)
        code = max(code, status)
    cli.save_recording([t for _, t, _ in results])
    return code


def _request(tables_paths: Sequence[str], intent: str, guidelines_path: Optional[str]) -> StoryRequest:
    tables = _checked_tables(tables_paths)
    guidelines = ""
    if guidelines_path:
        try:
            guidelines = Path(guidelines_path).read_text("utf-8")
        except OSError as e:
            raise CliError(f"cannot read guidelines: {e}") from None
    try:
        return StoryRequest(tables, intent, guidelines)
    except ValueError as e:
        raise CliError(str(e)) from None


def _manifest_jobs(path: str, out: Path, config_name: str) -> list[GenerateJob]:
    """JSONL manifest: one ``{"id", "tables", "intent", "guidelines"?}`` object per line.

    Relative paths resolve against the manifest's directory.
    """
    root = Path(path).parent
    jobs = []
    try:
        lines = Path(path).read_text("utf-8").split("\n")
    except OSError as e:
        raise CliError(f"cannot read manifest: {e}") from None
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            item = json.loads(line)
            tables = item["tables"]
            tables = [tables] if isinstance(tables, str) else tables
            req = _request([str(root / t) for t in tables], item["intent"],
                           str(root / item["guidelines"]) if item.get("guidelines") else None)
            jobs.append(GenerateJob(str(item["id"]), req, config_name, out / str(item["id"])))
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise CliError(f"manifest line {lineno}: {e}") from None
        except CliError as e:
            raise CliError(f"manifest line {lineno}: {e}") from None
    if not jobs:
        raise CliError("manifest is empty")
    return jobs


def cmd_generate(args: argparse.Namespace) -> int:
    cli = CliConfig.from_args(args)
    try:
        ablation_config(args.ablation)
    except UnknownAblation as e:
        raise CliError(str(e)) from None
    if args.manifest:
        jobs = _manifest_jobs(args.manifest, cli.output_dir, args.ablation)
    else:
        if not args.tables or args.intent is None:
            raise CliError("generate needs TABLES and --intent, or --manifest")
        req = _request(args.tables, args.intent, args.guidelines)
        jobs = [GenerateJob("story", req, args.ablation, cli.output_dir)]
    return _run_jobs(jobs, cli, args.max_revisions)


def cmd_ablate(args: argparse.Namespace) -> int:
    cli = CliConfig.from_args(args)
    names = list(ABLATIONS) if args.configs == "all" else [n.strip() for n in args.configs.split(",") if n.strip()]
    for n in names:
        try:
            ablation_config(n)
        except UnknownAblation as e:
            raise CliError(str(e)) from None
    req = _request(args.tables, args.intent, args.guidelines)
    jobs = [GenerateJob(n, req, n, cli.output_dir / n) for n in names]
    return _run_jobs(jobs, cli, args.max_revisions)


# --------------------------------------------------------------------------
# render


_PAGE_CSS = (
    "body{font-family:sans-serif;max-width:760px;margin:2em auto;line-height:1.5}"
    ".placard{border:2px dashed #c0392b;color:#c0392b;padding:1em;margin:1em 0}"
    "figure{margin:1.5em 0}"
)


def cmd_render(args: argparse.Namespace) -> int:
    out = Path(args.output_dir)
    story = _load_story(args.story)
    tables = load_tables(args.tables)
    body = []
    warnings = 0
    n_chart = 0
    for seg in story.segments:
        if seg.heading:
            body.append(f"<h2>{html.escape(seg.heading)}</h2>")
        body.extend(f"<p>{html.escape(p)}</p>" for p in seg.paragraphs)
        problem = None
        if seg.visspec is not None:
            try:
                svg = render_svg(seg.visspec, tables)
            except (RenderError, EmptyData) as e:
                problem = str(e)
            else:
                n_chart += 1
                name = f"chart_{n_chart:02d}.svg"
                write_atomic(out / name, svg)
                alt = seg.visspec.title or seg.visspec.chart_type.value
                body.append(f'<figure><img src="{name}" alt="{html.escape(alt)}"></figure>')
        elif seg.visspec_error is not None:
            problem = f"{seg.visspec_error.code}: {seg.visspec_error.message}"
        if problem is not None:
            warnings += 1
            print(f"warning: chart not rendered: {problem}", file=sys.stderr)
            body.append(f'<div class="placard">Chart could not be rendered: {html.escape(problem)}</div>')
    page = (
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
        f"<title>Story {html.escape(story.request_id)}</title>\n<style>{_PAGE_CSS}</style>\n</head>\n<body>\n"
        + "\n".join(body)
        + "\n</body>\n</html>\n"
    )
    write_atomic(out / "index.html", page)
    print(f"{n_chart} charts, {warnings} warnings -> {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# filter / stats


def _corpus(path: str):
    try:
        stories = load_corpus(path)
    except (OSError, CorpusSchemaError) as e:
        raise CliError(f"cannot load corpus: {e}") from None
    if not stories:
        raise CliError(f"corpus {path} is empty")
    return stories


def cmd_filter(args: argparse.Namespace) -> int:
    out = Path(args.output_dir)
    stories = _corpus(args.corpus)
    kept: Counter = Counter()
    excluded = []
    for s in stories:
        d = apply_exclusion_criteria(s)
        if d.kept:
            kept[s.source] += 1
            write_atomic(out / s.source / f"{s.id}.json", dump_story(s))
        else:
            excluded.append({"id": s.id, "source": s.source, "reason": d.reason, "detail": d.detail})
    write_atomic(out / "excluded.jsonl", "".join(json.dumps(e, sort_keys=True) + "\n" for e in excluded))
    reasons = Counter(e["reason"] for e in excluded)
    print(f"kept {sum(kept.values())} ({', '.join(f'{k}={v}' for k, v in sorted(kept.items())) or 'none'}); "
          f"excluded {len(excluded)} ({', '.join(f'{k}={v}' for k, v in sorted(reasons.items())) or 'none'})")
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    out = Path(args.output_dir)
    stories = _corpus(args.corpus)
    splits: dict[str, list] = {}
    for s in stories:
        splits.setdefault(s.source, []).append(s)
    rows = {name: corpus_stats(group) for name, group in sorted(splits.items())}
    if len(rows) > 1:
        rows["all"] = corpus_stats(stories)
    table = format_stats_table(rows)
    write_atomic(out / "stats.json", json.dumps({k: v.to_dict() for k, v in rows.items()}, indent=2, sort_keys=True) + "\n")
    write_atomic(out / "stats.txt", table)
    sys.stdout.write(table)
    return EXIT_OK


# --------------------------------------------------------------------------
# judge / winrate / agreement


@dataclass
class JudgePair:
    pair_id: str
    a: DataStory
    b: DataStory
    tables: Optional[DataTableSet]


def _judge_pairs(args: argparse.Namespace) -> list[JudgePair]:
    if args.manifest:
        root = Path(args.manifest).parent
        pairs = []
        try:
            lines = Path(args.manifest).read_text("utf-8").split("\n")
        except OSError as e:
            raise CliError(f"cannot read manifest: {e}") from None
        for lineno, line in enumerate(lines, 1):
            if not line.strip():
                continue
            try:
                item = json.loads(line)
                tables = load_tables([str(root / item["tables"])]) if item.get("tables") else None
                pairs.append(JudgePair(str(item["pair_id"]), _load_story(str(root / item["a"])),
                                       _load_story(str(root / item["b"])), tables))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise CliError(f"manifest line {lineno}: {e}") from None
        if not pairs:
            raise CliError("manifest is empty")
        ids = Counter(p.pair_id for p in pairs)
        dup = [k for k, v in ids.items() if v > 1]
        if dup:
            raise CliError(f"duplicate pair ids in manifest: {', '.join(dup)}")
        return pairs
    if not args.a or not args.b:
        raise CliError("judge needs STORY_A and STORY_B, or --manifest")
    a, b = _load_story(args.a), _load_story(args.b)
    tables = load_tables(args.tables) if args.tables else None
    return [JudgePair(args.pair_id or f"{a.request_id}~{b.request_id}", a, b, tables)]


def cmd_judge(args: argparse.Namespace) -> int:
    cli = CliConfig.from_args(args)
    pairs = _judge_pairs(args)
    try:
        gateway = cli.gateway()
    except GatewayError as e:
        raise CliError(str(e), EXIT_BACKEND) from None

    def one(p: JudgePair) -> Verdict | JudgeError:
        try:
            if args.both_orders:
                v = judge_both_orders(p.a, p.b, gateway, pair_id=p.pair_id, tables=p.tables)
            else:
                v = pairwise_judge(p.a, p.b, gateway, seed=cli.seed, pair_id=p.pair_id, tables=p.tables)
            return v
        except JudgeError as e:
            return e

    with ThreadPoolExecutor(max_workers=cli.workers) as pool:
        results = list(pool.map(one, pairs))
    verdicts = [r for r in results if isinstance(r, Verdict)]
    errors = [r for r in results if isinstance(r, JudgeError)]
    out = cli.output_dir
    write_atomic(out / "verdicts.jsonl", dump_verdicts(verdicts))
    if errors:
        write_atomic(out / "judge_errors.jsonl", "".join(
            json.dumps({"pair_id": e.pair_id, "error": str(e.cause)}, sort_keys=True) + "\n" for e in errors))
        for e in errors:
            print(f"error: {e}", file=sys.stderr)
    cli.save_recording([gateway.transcript])
    counts = Counter(v.overall for v in verdicts)
    print(f"{len(verdicts)} verdicts (A={counts['A']}, B={counts['B']}, tie={counts['tie']}), "
          f"{len(errors)} errors -> {out / 'verdicts.jsonl'}")
    return EXIT_BACKEND if errors else EXIT_OK


def cmd_winrate(args: argparse.Namespace) -> int:
    tables = {}
    for spec in args.verdicts:
        name, sep, path = spec.partition("=")
        if not sep:
            name, path = Path(spec).parent.name or Path(spec).stem, spec
        try:
            verdicts = load_verdicts(Path(path).read_text("utf-8"))
            tables[name] = win_rates(verdicts)
        except (OSError, ValueError) as e:
            raise CliError(f"{path}: {e}") from None
    if len(tables) != len(args.verdicts):
        raise CliError("test-set names must be distinct; use NAME=PATH")
    text = format_win_rate_table(tables)
    out = Path(args.output_dir)
    write_atomic(out / "winrate.json", json.dumps({k: t.to_dict() for k, t in tables.items()}, indent=2, sort_keys=True) + "\n")
    write_atomic(out / "winrate.txt", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_agreement(args: argparse.Namespace) -> int:
    try:
        ann = load_annotations_csv(args.annotations)
        alpha = krippendorff_alpha_detail(ann)
    except (OSError, ValueError) as e:
        raise CliError(str(e)) from None
    warnings = list(alpha.warnings)
    try:
        merged = merge_annotators(ann)
    except ValueError as e:
        merged = None
        warnings.append(f"no consensus merge: {e}")
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    doc = {
        "n_items": len(ann.items),
        "raw_agreement_pct": merged.raw_agreement_pct if merged else None,
        "alpha": alpha.alpha,
        "disagreements": list(merged.disagreements) if merged else None,
        "consensus": merged.consensus if merged else None,
        "warnings": warnings,
    }
    write_atomic(Path(args.output_dir) / "agreement.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    raw = f"{merged.raw_agreement_pct:.1f}%" if merged else "n/a"
    print(f"items {len(ann.items)}  raw agreement {raw}  alpha {alpha.alpha:.3f}")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dn", description="Generate, render and evaluate data stories.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def gen_flags(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--intent", help="the theme the story must convey")
        sp.add_argument("--guidelines", help="file with extra writing guidelines")
        sp.add_argument("--max-revisions", type=int, default=None, help="revision budget per stage (default 1)")
        _add_gateway_flags(sp)
        _add_output_flag(sp)

    g = sub.add_parser("generate", help="generate a story from data tables")
    g.add_argument("tables", nargs="*", help="a dn/1 tables document or CSV files")
    g.add_argument("--ablation", default="full", help=f"one of {', '.join(ABLATIONS)}")
    g.add_argument("--manifest", help="JSONL batch manifest")
    gen_flags(g)
    g.set_defaults(func=cmd_generate)

    a = sub.add_parser("ablate", help="run several pipeline configurations on one request")
    a.add_argument("tables", nargs="+")
    a.add_argument("--configs", default="all", help="comma-separated names or 'all'")
    gen_flags(a)
    a.set_defaults(func=cmd_ablate)

    r = sub.add_parser("render", help="render a story's charts to SVG plus an HTML page")
    r.add_argument("story")
    r.add_argument("--tables", nargs="+", required=True)
    _add_output_flag(r)
    r.set_defaults(func=cmd_render)

    f = sub.add_parser("filter", help="apply the corpus exclusion criteria")
    f.add_argument("corpus")
    _add_output_flag(f)
    f.set_defaults(func=cmd_filter)

    s = sub.add_parser("stats", help="corpus statistics per source")
    s.add_argument("corpus")
    _add_output_flag(s)
    s.set_defaults(func=cmd_stats)

    j = sub.add_parser("judge", help="pairwise LLM judging")
    j.add_argument("a", nargs="?")
    j.add_argument("b", nargs="?")
    j.add_argument("--tables", nargs="+", help="tables shown to the judge for fact checking")
    j.add_argument("--pair-id")
    j.add_argument("--manifest", help='JSONL lines {"pair_id", "a", "b", "tables"?}')
    j.add_argument("--both-orders", action="store_true", help="judge AB and BA; conflicts become ties")
    _add_gateway_flags(j)
    _add_output_flag(j)
    j.set_defaults(func=cmd_judge)

    w = sub.add_parser("winrate", help="aggregate verdicts into win rates")
    w.add_argument("verdicts", nargs="+", help="verdicts.jsonl files, optionally NAME=PATH")
    _add_output_flag(w)
    w.set_defaults(func=cmd_winrate)

    ag = sub.add_parser("agreement", help="raw agreement and Krippendorff's alpha")
    ag.add_argument("annotations", help="CSV with item_id,annotator,label")
    _add_output_flag(ag)
    ag.set_defaults(func=cmd_agreement)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except GatewayError as e:
        print(f"backend error: {e}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
