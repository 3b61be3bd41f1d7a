"""Command-line front end for the transfer-graph pipeline.

Subcommands: ingest, build, stats, metrics, anomaly, csm, export-ml,
eval, fixture.  Every report embeds the effective configuration and the
sha256 digest of each input file, so runs are auditable and byte-for-byte
reproducible given the same inputs, flags and seed.

Exit codes: 0 success, 1 usage error, 2 data error, 3 time limit.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys

from . import anomaly as anomaly_mod
from . import cache as cache_mod
from . import csm as csm_mod
from . import fixture as fixture_mod
from . import metrics as metrics_mod
from . import mlbench
from .errors import DataError, TimeLimitExceeded
from .graph import TemporalGraph, simple_view
from .ingest import normalize_stream
from .periods import GRANULARITIES

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_TIMEOUT = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; our contract reserves 2 for bad
    data, so usage problems exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------

def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _round_floats(obj):
    """Limit every float to 9 significant digits, recursively."""
    if isinstance(obj, float):
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def _config_echo(args, *skip: str) -> dict:
    hidden = {"func", "report", "output", "out_dir", *skip}
    return {k: v for k, v in sorted(vars(args).items()) if k not in hidden}


def _make_report(args, inputs: list[str], body: dict) -> dict:
    report = {"config": _config_echo(args),
              "inputs": {p: _sha256(p) for p in inputs}}
    report.update(body)
    return _round_floats(report)


def _emit_json(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _fmt(x) -> object:
    return float(f"{x:.9g}") if isinstance(x, float) else x


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _load_graph(path: str) -> TemporalGraph:
    """Accept either a normalized CSV or a binary graph cache file."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == cache_mod.MAGIC:
        return cache_mod.load(path)
    return TemporalGraph.build(path)


# ---------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------

def cmd_ingest(args) -> int:
    stats, classes = normalize_stream(args.input, args.output)
    body = {
        "stats": stats.as_dict(),
        "balances": stats.balances(),
        "contracts": [{"contract": c.contract, "erc721": c.erc721,
                       "log_count": c.log_count} for c in classes],
        "output": args.output,
    }
    _emit_json(_make_report(args, args.input, body), args.report)
    return EXIT_OK


def cmd_build(args) -> int:
    g = TemporalGraph.build(args.input)
    cache_mod.save(g, args.output)
    body = {"summary": g.summary(), "summary_digest": g.summary_digest(),
            "cache": args.output}
    _emit_json(_make_report(args, [args.input], body), args.report)
    return EXIT_OK


def cmd_stats(args) -> int:
    g = _load_graph(args.input)
    _stats, top = metrics_mod.holder_stats(g, top_k=args.top_holders)
    body = {
        "summary": g.summary(),
        "top_holders": [{"address": a, "tokens": tc, "collections": cc}
                        for a, tc, cc in top],
    }
    _emit_json(_make_report(args, [args.input], body), args.report)
    return EXIT_OK


def _growth_csvs(series, out_dir: str) -> None:
    rows = [(label, rec) for label, rec in series.buckets]
    _write_csv(os.path.join(out_dir, "fig1a_nodes.csv"),
               ["period", "new_nodes", "new_mint_nodes", "new_nonmint_nodes"],
               [(l, r.new_nodes, r.new_mint_nodes, r.new_nonmint_nodes)
                for l, r in rows])
    _write_csv(os.path.join(out_dir, "fig1b_edges.csv"),
               ["period", "new_edges", "new_bidirectional_edges",
                "new_self_loops"],
               [(l, r.new_edges, r.new_bidirectional_edges, r.new_self_loops)
                for l, r in rows])
    _write_csv(os.path.join(out_dir, "fig1c_edge_mix.csv"),
               ["period", "pct_edges_new_new", "pct_edges_new_old",
                "pct_edges_old_old"],
               [(l, r.pct_edges_new_new, r.pct_edges_new_old,
                 r.pct_edges_old_old) for l, r in rows])
    tidy = []
    for label, rec in rows:
        for name in ("new_nodes", "new_mint_nodes", "new_nonmint_nodes",
                     "new_edges", "new_bidirectional_edges", "new_self_loops",
                     "pct_edges_new_new", "pct_edges_new_old",
                     "pct_edges_old_old"):
            tidy.append((label, name, getattr(rec, name)))
    _write_csv(os.path.join(out_dir, "series.csv"),
               ["period", "metric", "value"], tidy)


def cmd_metrics(args) -> int:
    g = _load_graph(args.input)
    cutoff = args.at
    views = {}
    for name, include_null in (("exclude_null", False), ("include_null", True)):
        view = simple_view(g, cutoff, include_null=include_null,
                           include_self_loops=not args.exclude_self_loops)
        rep = metrics_mod.metrics_report(
            view, diameter_exact_threshold=args.diameter_exact_threshold,
            diameter_sources=args.diameter_sources, seed=args.seed)
        views[name] = rep.as_dict()
        views[name]["nodes"] = view.num_nodes
        views[name]["pairs"] = view.num_edges

    body: dict = {"views": views}
    os.makedirs(args.out_dir, exist_ok=True)
    growth = metrics_mod.growth_series(
        g, args.granularity, include_null=False,
        include_self_loops=not args.exclude_self_loops)
    _growth_csvs(growth, args.out_dir)
    hist, cumulative = metrics_mod.mutual_edge_intervals(g)
    _write_csv(os.path.join(args.out_dir, "fig2c_mutual_days.csv"),
               ["bucket_days", "count", "cumulative_fraction"],
               [(b, hist[b], cumulative[b]) for b in sorted(hist)])
    spans, avg_tx = metrics_mod.active_periods(g)
    _write_csv(os.path.join(args.out_dir, "fig2a_active_days.csv"),
               ["span_days", "nodes", "avg_tx"],
               [(s, spans[s], avg_tx[s]) for s in sorted(spans)])
    if args.split_time is not None:
        tea, tet = metrics_mod.tea_tet(g, args.granularity, args.split_time)
        _write_csv(os.path.join(args.out_dir, "tea.csv"),
                   ["period", "new", "recurring"],
                   [(label, d["new"], d["recurring"])
                    for label, d in tea.buckets])
        counts = {"train_only": 0, "test_only": 0, "both": 0}
        for cls in tet.values():
            counts[cls] += 1
        body["tet_classes"] = counts
    _emit_json(_make_report(args, [args.input], body),
               args.report or os.path.join(args.out_dir, "metrics.json"))
    return EXIT_OK


def cmd_anomaly(args) -> int:
    g = _load_graph(args.input)
    candidates = anomaly_mod.simultaneous_bidirectional(
        g, args.threshold_seconds, include_null=args.include_null)
    flagged = anomaly_mod.suspicious_pairs(g, candidates, min_tx=args.min_tx,
                                           ratio=args.ratio)
    bots = anomaly_mod.bot_scan(g, min_run=args.bot_min_run,
                                max_median_interval=args.bot_max_median_interval)
    lines = []
    for s in flagged:
        lines.append({"type": "suspicious_pair", "a": s.a, "b": s.b,
                      "interval_seconds": s.interval_seconds,
                      "rule_hits": list(s.rule_hits),
                      "a_tx_count": s.a_tx_count, "b_tx_count": s.b_tx_count,
                      "pair_tx_count": s.pair_tx_count,
                      "a_ratio": s.a_ratio, "b_ratio": s.b_ratio})
    for b in bots:
        lines.append({"type": "bot_report", "address": b.address,
                      "contract": b.contract, "direction": b.direction,
                      "run_length": b.run_length,
                      "median_interval_seconds": b.median_interval_seconds,
                      "first_token_id": b.first_token_id,
                      "start_ts": b.start_ts, "end_ts": b.end_ts})
    summary = _make_report(args, [args.input], {
        "type": "summary",
        "candidate_pairs": len(candidates),
        "flagged_pairs": len(flagged),
        "flagged_fraction":
            len(flagged) / len(candidates) if candidates else 0.0,
        "bot_reports": len(bots),
    })
    out = sys.stdout if args.output in (None, "-") else open(args.output, "w")
    try:
        for line in lines:
            out.write(json.dumps(_round_floats(line), sort_keys=True) + "\n")
        out.write(json.dumps(summary, sort_keys=True) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def _csm_edges(g: TemporalGraph, include_null: bool):
    edges = []
    for k in range(g.num_edges):
        u, v = g.e_src[k], g.e_dst[k]
        if not include_null and (u == g.null_id or v == g.null_id):
            continue
        edges.append((u, v, g.e_ts[k]))
    return edges


def _drop_top_hubs(edges, k: int):
    degree: dict[int, set[tuple[int, int]]] = {}
    for u, v, _ts in edges:
        degree.setdefault(u, set()).add((u, v))
        degree.setdefault(v, set()).add((u, v))
    hubs = set(sorted(degree, key=lambda n: (-len(degree[n]), n))[:k])
    return [(u, v, ts) for u, v, ts in edges
            if u not in hubs and v not in hubs], sorted(hubs)


def cmd_csm(args) -> int:
    g = _load_graph(args.input)
    edges = _csm_edges(g, args.include_null)
    dropped_hubs: list[int] = []
    if args.drop_top_hubs:
        edges, dropped_hubs = _drop_top_hubs(edges, args.drop_top_hubs)
    initial = [e for e in edges if e[2] <= args.initial_until]
    stream = [e for e in edges if e[2] > args.initial_until]

    if args.queries:
        queries = []
        for path in args.queries:
            with open(path) as fh:
                name = os.path.splitext(os.path.basename(path))[0]
                queries.append(csm_mod.parse_query(fh.read(), name))
    else:
        queries = csm_mod.builtin_patterns()

    cfg = csm_mod.StreamConfig(window=args.window,
                               time_limit_ms=args.time_limit_ms,
                               label_pool=args.label_pool, seed=args.seed)
    results = csm_mod.run_stream(initial, stream, queries, cfg)

    rows = [(r.name, r.matches, r.matches_dedup, r.elapsed_ms,
             int(r.timed_out)) for r in results]
    header = ["query", "matches", "matches_dedup", "elapsed_ms", "timed_out"]
    if args.output in (None, "-"):
        w = csv.writer(sys.stdout)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    else:
        _write_csv(args.output, header, rows)
    meta = _make_report(args, [args.input], {
        "initial_edges": len(initial),
        "stream_edges": len(stream),
        "dropped_hub_addresses": [g.addresses[h] for h in dropped_hubs],
        "results": [{"query": r.name, "matches": r.matches,
                     "matches_dedup": r.matches_dedup,
                     "elapsed_ms": r.elapsed_ms,
                     "timed_out": r.timed_out} for r in results],
    })
    meta_path = args.report
    if meta_path is None and args.output not in (None, "-"):
        meta_path = args.output + ".meta.json"
    if meta_path:
        _emit_json(meta, meta_path)
    if any(r.timed_out for r in results):
        return EXIT_TIMEOUT
    return EXIT_OK


def cmd_export_ml(args) -> int:
    g = _load_graph(args.input)
    series = mlbench.build_snapshots(g, args.granularity,
                                     exclude_null=not args.include_null)
    plan = mlbench.export_features(
        g, series, args.out_dir, task=args.task, split_mode=args.split_mode,
        seed=args.seed, earlystop_fraction=args.earlystop_fraction)
    for idx in args.negatives_snapshot or []:
        negatives = mlbench.sample_negatives(series, idx, k=args.negatives_k,
                                             seed=args.seed)
        _write_csv(os.path.join(args.out_dir, f"negatives_{idx:04d}.csv"),
                   ["src", "dst"] + [f"neg_{i}" for i in range(args.negatives_k)],
                   [[u, v] + negs for (u, v), negs in sorted(negatives.items())])
    body = {
        "snapshots": len(series),
        "roles": plan.roles,
        "labels": [s.label for s in series.snapshots],
    }
    _emit_json(_make_report(args, [args.input], body),
               args.report or os.path.join(args.out_dir, "report.json"))
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.task == "link":
        records = mlbench.read_score_file(args.input, k=args.k)
        body = {"task": "link", "metrics": mlbench.eval_link_scores(records)}
    else:
        pairs = mlbench.read_prediction_file(args.input)
        body = {"task": "node", "metrics": mlbench.eval_classification(pairs)}
    _emit_json(_make_report(args, [args.input], body), args.report)
    return EXIT_OK


def cmd_fixture(args) -> int:
    ledger = fixture_mod.write_fixture(
        args.profile, args.seed, args.scale, args.output,
        ledger_path=args.ledger, raw_path=args.raw)
    _emit_json(_round_floats({"output": args.output, "ledger": ledger}),
               args.report)
    return EXIT_OK


# ---------------------------------------------------------------------
# argument wiring
# ---------------------------------------------------------------------

def _add_report(p):
    p.add_argument("--report", default=None,
                   help="write the JSON report here instead of stdout")


def build_parser() -> _Parser:
    parser = _Parser(prog="nftgraph", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("ingest", help="decode raw event logs to normalized CSV")
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--output", required=True)
    _add_report(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build", help="build and cache the temporal graph")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True, help="binary graph cache path")
    _add_report(p)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("stats", help="graph summary and top holders")
    p.add_argument("--input", required=True)
    p.add_argument("--top-holders", type=int, default=10)
    _add_report(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("metrics", help="structural metrics and time series")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--granularity", choices=GRANULARITIES, default="year")
    p.add_argument("--at", type=int, default=None,
                   help="snapshot cutoff timestamp (default: whole graph)")
    p.add_argument("--exclude-self-loops", action="store_true")
    p.add_argument("--split-time", type=int, default=None,
                   help="also emit TEA/TET relative to this timestamp")
    p.add_argument("--diameter-exact-threshold", type=int, default=10000)
    p.add_argument("--diameter-sources", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    _add_report(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("anomaly", help="suspicious pairs and bot runs (JSONL)")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None)
    p.add_argument("--threshold-seconds", type=int, default=86400)
    p.add_argument("--min-tx", type=int, default=5)
    p.add_argument("--ratio", type=float, default=0.8)
    p.add_argument("--bot-min-run", type=int, default=100)
    p.add_argument("--bot-max-median-interval", type=float, default=600.0)
    p.add_argument("--include-null", action="store_true")
    p.set_defaults(func=cmd_anomaly, report=None)

    p = sub.add_parser("csm", help="continuous subgraph matching over a stream")
    p.add_argument("--input", required=True)
    p.add_argument("--initial-until", type=int, required=True,
                   help="edges at or before this timestamp form the initial graph")
    p.add_argument("--queries", nargs="*", default=None,
                   help="pattern files (default: built-in patterns p1..p5)")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--time-limit-ms", type=float, default=3.6e6)
    p.add_argument("--label-pool", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--drop-top-hubs", type=int, default=0)
    p.add_argument("--include-null", action="store_true")
    p.add_argument("--output", default=None)
    _add_report(p)
    p.set_defaults(func=cmd_csm)

    p = sub.add_parser("export-ml", help="snapshot/feature export for GNN runs")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--granularity", choices=GRANULARITIES, default="day")
    p.add_argument("--task", choices=("link", "node"), default="link")
    p.add_argument("--split-mode",
                   choices=("fixed", "node_fixed", "live_update"),
                   default="fixed")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--earlystop-fraction", type=float, default=0.1)
    p.add_argument("--include-null", action="store_true")
    p.add_argument("--negatives-snapshot", type=int, action="append",
                   help="also sample negatives for this snapshot index")
    p.add_argument("--negatives-k", type=int, default=100)
    _add_report(p)
    p.set_defaults(func=cmd_export_ml)

    p = sub.add_parser("eval", help="grade external score/prediction files")
    p.add_argument("--input", required=True)
    p.add_argument("--task", choices=("link", "node"), default="link")
    p.add_argument("--k", type=int, default=None,
                   help="required negatives per record (link task)")
    _add_report(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("fixture", help="generate synthetic transfer files")
    p.add_argument("--profile", choices=fixture_mod.PROFILES, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=int, default=12000)
    p.add_argument("--output", required=True)
    p.add_argument("--ledger", default=None)
    p.add_argument("--raw", default=None,
                   help="also write the same data as a raw event-log CSV")
    _add_report(p)
    p.set_defaults(func=cmd_fixture)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except TimeLimitExceeded as e:
        print(f"nftgraph: time limit exceeded: {e}", file=sys.stderr)
        return EXIT_TIMEOUT
    except (DataError, FileNotFoundError) as e:
        print(f"nftgraph: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
