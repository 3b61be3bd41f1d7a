"""Suspicious-pair rules over simultaneous bidirectional edges, plus a
sequential-token-id bot scan.

"Transactions" here always counts multigraph edges: a pair trading
repeatedly strengthens the signal rather than diluting it.
"""

from __future__ import annotations

import statistics
from collections import Counter
from dataclasses import dataclass

from .graph import TemporalGraph

LOW_ACTIVITY = "LOW_ACTIVITY"
HIGH_RATIO = "HIGH_RATIO"


@dataclass(frozen=True)
class SuspiciousPair:
    a: str
    b: str
    interval_seconds: int
    rule_hits: tuple[str, ...]
    a_tx_count: int
    b_tx_count: int
    pair_tx_count: int
    a_ratio: float
    b_ratio: float


@dataclass(frozen=True)
class BotReport:
    address: str
    contract: str
    direction: str          # "out" or "in"
    run_length: int
    median_interval_seconds: float
    first_token_id: int
    start_ts: int
    end_ts: int


def _min_cross_gap(ts_a: list[int], ts_b: list[int]) -> int:
    """Minimal |x - y| between two sorted timestamp lists."""
    best = None
    i = j = 0
    while i < len(ts_a) and j < len(ts_b):
        gap = abs(ts_a[i] - ts_b[j])
        if best is None or gap < best:
            best = gap
        if ts_a[i] <= ts_b[j]:
            i += 1
        else:
            j += 1
    return best


def simultaneous_bidirectional(g: TemporalGraph, threshold_seconds: int = 86400,
                               *, include_null: bool = False):
    """Unordered pairs with opposing edges whose minimal cross-direction
    interval is within the threshold.  Sorted by address pair."""
    directions: set[tuple[int, int]] = set()
    for k in range(g.num_edges):
        u, v = g.e_src[k], g.e_dst[k]
        if u == v:
            continue
        if not include_null and (u == g.null_id or v == g.null_id):
            continue
        directions.add((u, v))
    bidir = {(u, v) for (u, v) in directions if u < v and (v, u) in directions}
    if not bidir:
        return []
    ts_by_dir: dict[tuple[int, int], list[int]] = {}
    for k in range(g.num_edges):
        u, v = g.e_src[k], g.e_dst[k]
        key = (min(u, v), max(u, v))
        if key in bidir:
            ts_by_dir.setdefault((u, v), []).append(g.e_ts[k])
    out = []
    for u, v in bidir:
        gap = _min_cross_gap(ts_by_dir[(u, v)], ts_by_dir[(v, u)])
        if gap <= threshold_seconds:
            out.append(((g.addresses[u], g.addresses[v]), gap))
    out.sort(key=lambda item: item[0])
    return out


def suspicious_pairs(g: TemporalGraph, candidates, min_tx: int = 5,
                     ratio: float = 0.8) -> list[SuspiciousPair]:
    """Apply the two wallet-pair rules to simultaneous bidirectional pairs.

    LOW_ACTIVITY: either endpoint has fewer than `min_tx` incident edges.
    HIGH_RATIO: for either endpoint, the share of its edges that involve
    the other endpoint exceeds `ratio`.
    """
    pair_counts: Counter = Counter()
    wanted = set()
    for (a, b), _gap in candidates:
        ia, ib = g.addr_id(a), g.addr_id(b)
        wanted.add((min(ia, ib), max(ia, ib)))
    for k in range(g.num_edges):
        u, v = g.e_src[k], g.e_dst[k]
        key = (min(u, v), max(u, v))
        if key in wanted:
            pair_counts[key] += 1

    flagged = []
    for (a, b), gap in candidates:
        ia, ib = g.addr_id(a), g.addr_id(b)
        between = pair_counts[(min(ia, ib), max(ia, ib))]
        ta, tb = g.n_txc[ia], g.n_txc[ib]
        ra = between / ta if ta else 0.0
        rb = between / tb if tb else 0.0
        hits = []
        if ta < min_tx or tb < min_tx:
            hits.append(LOW_ACTIVITY)
        if ra > ratio or rb > ratio:
            hits.append(HIGH_RATIO)
        if hits:
            flagged.append(SuspiciousPair(
                a=a, b=b, interval_seconds=gap, rule_hits=tuple(hits),
                a_tx_count=ta, b_tx_count=tb, pair_tx_count=between,
                a_ratio=ra, b_ratio=rb))
    flagged.sort(key=lambda s: (s.a, s.b))
    return flagged


def _scan_runs(seq: list[tuple[int, int]], min_run: int,
               max_median_interval: float):
    """Maximal token-id +1 runs in a time-sorted (ts, token_id) sequence."""
    runs = []
    start = 0
    for i in range(1, len(seq) + 1):
        if i == len(seq) or seq[i][1] != seq[i - 1][1] + 1:
            if i - start >= min_run:
                gaps = [seq[j][0] - seq[j - 1][0] for j in range(start + 1, i)]
                med = statistics.median(gaps)
                if med <= max_median_interval:
                    runs.append((start, i, med))
            start = i
    return runs


def bot_scan(g: TemporalGraph, min_run: int = 100,
             max_median_interval: float = 600.0) -> list[BotReport]:
    """Flag addresses with long consecutive-token-id transfer runs.

    Within one contract, a maximal run of >= min_run outgoing or incoming
    transfers whose token ids increase by exactly 1 and whose median
    inter-event gap is at most `max_median_interval` seconds marks the
    address as bot-like.  The longest qualifying run per
    (address, contract, direction) is reported.
    """
    by_key: dict[tuple[int, int, str], list[tuple[int, int]]] = {}
    for k in range(g.num_edges):
        item = (g.e_ts[k], g.e_token[k])
        by_key.setdefault((g.e_src[k], g.e_contract[k], "out"), []).append(item)
        by_key.setdefault((g.e_dst[k], g.e_contract[k], "in"), []).append(item)
    reports = []
    for (node, cid, direction), seq in by_key.items():
        if len(seq) < min_run:
            continue
        runs = _scan_runs(seq, min_run, max_median_interval)
        if not runs:
            continue
        start, end, med = max(runs, key=lambda r: r[1] - r[0])
        reports.append(BotReport(
            address=g.addresses[node], contract=g.contracts[cid],
            direction=direction, run_length=end - start,
            median_interval_seconds=med, first_token_id=seq[start][1],
            start_ts=seq[start][0], end_ts=seq[end - 1][0]))
    reports.sort(key=lambda r: (r.address, r.contract, r.direction))
    return reports
