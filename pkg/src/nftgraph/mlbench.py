"""Snapshot export, split plans, negative sampling, trader labels and
score-file evaluation for temporal-GNN benchmarks.

Model training happens outside this package; we produce its inputs and
grade its outputs.
"""

from __future__ import annotations

import csv
import json
import math
import os
import random
from collections import Counter
from dataclasses import dataclass, field

from .errors import BadRecord, InsufficientNodes
from .graph import TemporalGraph
from .periods import Period, iter_periods

DAY = 86400

TRADER_CLASSES = ("daily", "weekly", "monthly", "yearly", "remaining")

# month = 30 days, year = 365 days for the label thresholds
_THRESHOLDS = (("daily", DAY), ("weekly", 7 * DAY),
               ("monthly", 30 * DAY), ("yearly", 365 * DAY))


@dataclass
class Snapshot:
    index: int
    label: str
    start_ts: int
    end_ts: int                      # exclusive
    # distinct pairs observed in the period: (u, v) -> (tx_count, last_ts)
    pair_stats: dict[tuple[int, int], tuple[int, int]]
    new_nodes: list[int]             # nodes first active in this period

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return sorted(self.pair_stats)


@dataclass
class SnapshotSeries:
    granularity: str
    exclude_null: bool
    snapshots: list[Snapshot] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.snapshots)

    def nodes_until(self, index: int) -> set[int]:
        """All nodes active in snapshots 0..index."""
        out: set[int] = set()
        for snap in self.snapshots[:index + 1]:
            out.update(snap.new_nodes)
        return out

    def cumulative_degree(self, index: int) -> Counter:
        """Total pair-degree per node over snapshots 0..index."""
        deg: Counter = Counter()
        for snap in self.snapshots[:index + 1]:
            for u, v in snap.pair_stats:
                deg[u] += 1
                deg[v] += 1
        return deg


def build_snapshots(g: TemporalGraph, granularity: str, *,
                    exclude_null: bool = True) -> SnapshotSeries:
    """Bucket the transfer stream into calendar snapshots.

    With exclude_null (the default for ML exports) every Null-incident
    transaction is removed before bucketing.
    """
    series = SnapshotSeries(granularity=granularity, exclude_null=exclude_null)
    if g.num_edges == 0:
        return series
    periods = list(iter_periods(granularity, g.e_ts[0], g.e_ts[-1]))
    snaps = [Snapshot(index=i, label=p.label, start_ts=p.start_ts,
                      end_ts=p.end_ts, pair_stats={}, new_nodes=[])
             for i, p in enumerate(periods)]
    seen_nodes: set[int] = set()
    pi = 0
    for k in range(g.num_edges):
        u, v, ts = g.e_src[k], g.e_dst[k], g.e_ts[k]
        if exclude_null and (u == g.null_id or v == g.null_id):
            continue
        while ts >= periods[pi].end_ts:
            pi += 1
        snap = snaps[pi]
        cnt, _last = snap.pair_stats.get((u, v), (0, 0))
        snap.pair_stats[(u, v)] = (cnt + 1, ts)
        for w in (u, v):
            if w not in seen_nodes:
                seen_nodes.add(w)
                snap.new_nodes.append(w)
    series.snapshots = snaps
    return series


@dataclass
class SplitPlan:
    mode: str                       # fixed | live_update | node_fixed
    roles: list[str]                # per-snapshot: train | val | test

    @classmethod
    def assign(cls, mode: str, num_snapshots: int) -> "SplitPlan":
        t = num_snapshots
        if t == 0:
            return cls(mode=mode, roles=[])
        if mode == "fixed":
            test = math.ceil(0.2 * t)
            roles = ["train"] * (t - test) + ["test"] * test
        elif mode == "node_fixed":
            train = math.floor(0.8 * t)
            val = math.floor(0.1 * t)
            roles = ["train"] * train + ["val"] * val + \
                ["test"] * (t - train - val)
        elif mode == "live_update":
            # every snapshot is evaluated; the early-stop reservation is a
            # per-edge mask, not a snapshot role
            roles = ["test"] * t
        else:
            raise ValueError(f"unknown split mode {mode!r}")
        return cls(mode=mode, roles=roles)


def sample_negatives(series: SnapshotSeries, index: int, k: int = 100,
                     seed: int = 0) -> dict[tuple[int, int], list[int]]:
    """For each positive (u, v) of a snapshot, k distinct corrupted targets.

    Targets are drawn uniformly from nodes existing by the end of the
    snapshot, excluding v itself and any v' that forms a same-period
    positive (u, v').  Deterministic under (seed, index).
    """
    snap = series.snapshots[index]
    eligible = sorted(series.nodes_until(index))
    eligible_set = set(eligible)
    rng = random.Random(f"{seed}:{index}")
    positives_by_src: dict[int, set[int]] = {}
    for u, v in snap.pair_stats:
        positives_by_src.setdefault(u, set()).add(v)
    out: dict[tuple[int, int], list[int]] = {}
    n = len(eligible)
    for u, v in sorted(snap.pair_stats):
        banned = positives_by_src[u]
        if n - len(banned & eligible_set) < k:
            raise InsufficientNodes(
                f"snapshot {snap.label}: need {k} negatives for ({u},{v})")
        chosen: list[int] = []
        used: set[int] = set()
        while len(chosen) < k:
            cand = eligible[rng.randrange(n)]
            if cand in banned or cand in used:
                continue
            used.add(cand)
            chosen.append(cand)
        out[(u, v)] = chosen
    return out


@dataclass(frozen=True)
class TraderLabel:
    address: str
    cls: str


def trader_labels(g: TemporalGraph, *, include_null: bool = False) -> list[TraderLabel]:
    """Classify nodes by their maximum gap between consecutive transactions.

    <= 1 day: daily; <= 7 days: weekly; <= 30 days: monthly; <= 365 days:
    yearly; otherwise remaining.  Nodes with fewer than two transactions
    are filtered out.  Thresholds are right-closed: a gap of exactly
    86,400 s is still a daily trader.
    """
    times: dict[int, list[int]] = {}
    for k in range(g.num_edges):
        times.setdefault(g.e_src[k], []).append(g.e_ts[k])
        if g.e_dst[k] != g.e_src[k]:
            times.setdefault(g.e_dst[k], []).append(g.e_ts[k])
    labels = []
    for node in range(g.num_nodes):
        if not include_null and node == g.null_id:
            continue
        ts = times.get(node, ())
        if len(ts) < 2:
            continue
        max_gap = max(b - a for a, b in zip(ts, ts[1:]))
        cls = "remaining"
        for name, limit in _THRESHOLDS:
            if max_gap <= limit:
                cls = name
                break
        labels.append(TraderLabel(address=g.addresses[node], cls=cls))
    return labels


def export_features(g: TemporalGraph, series: SnapshotSeries, out_dir: str, *,
                    task: str = "link", split_mode: str = "fixed",
                    seed: int = 0, earlystop_fraction: float = 0.1) -> SplitPlan:
    """Write one directory per snapshot: edges.csv, nodes.csv, manifest.json.

    Edge features are (tx count between the pair, latest interaction
    timestamp).  Node features: cumulative total degree for the node task,
    the constant 1 for the link task.  live_update additionally marks a
    seeded random `earlystop` fraction of each snapshot's edges.
    """
    plan = SplitPlan.assign(split_mode, len(series))
    label_by_addr = {}
    if task == "node":
        label_by_addr = {t.address: t.cls for t in trader_labels(g)}
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "addresses.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["address_id", "address"])
        for i, addr in enumerate(g.addresses):
            w.writerow([i, addr])
    for snap in series.snapshots:
        sd = os.path.join(out_dir, f"snapshot_{snap.index:04d}")
        os.makedirs(sd, exist_ok=True)
        rng = random.Random(f"{seed}:es:{snap.index}")
        with open(os.path.join(sd, "edges.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            header = ["src", "dst", "tx_count", "last_ts"]
            if split_mode == "live_update":
                header.append("earlystop")
            w.writerow(header)
            for (u, v) in snap.pairs:
                cnt, last = snap.pair_stats[(u, v)]
                row = [u, v, cnt, last]
                if split_mode == "live_update":
                    row.append(int(rng.random() < earlystop_fraction))
                w.writerow(row)
        degrees = series.cumulative_degree(snap.index)
        with open(os.path.join(sd, "nodes.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            if task == "node":
                w.writerow(["address_id", "degree", "label"])
                for node in sorted(series.nodes_until(snap.index)):
                    w.writerow([node, degrees[node],
                                label_by_addr.get(g.addresses[node], "")])
            else:
                w.writerow(["address_id", "feature"])
                for node in sorted(series.nodes_until(snap.index)):
                    w.writerow([node, 1])
        manifest = {
            "granularity": series.granularity,
            "label": snap.label,
            "start_ts": snap.start_ts,
            "end_ts": snap.end_ts,
            "role": plan.roles[snap.index],
            "split_mode": split_mode,
            "seed": seed,
            "exclude_null": series.exclude_null,
        }
        with open(os.path.join(sd, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
    return plan


# ---------------------------------------------------------------------
# score evaluation
# ---------------------------------------------------------------------

@dataclass(frozen=True)
class ScoreRecord:
    positive_id: str
    pos_score: float
    neg_scores: tuple[float, ...]


def read_score_file(path: str, k: int | None = None) -> list[ScoreRecord]:
    records = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row:
                continue
            if row[0] == "positive_id":
                continue
            if len(row) < 3:
                raise BadRecord(f"row for {row[0]!r} has no negatives")
            try:
                rec = ScoreRecord(positive_id=row[0], pos_score=float(row[1]),
                                  neg_scores=tuple(float(x) for x in row[2:]))
            except ValueError:
                raise BadRecord(f"non-numeric score for {row[0]!r}") from None
            if k is not None and len(rec.neg_scores) != k:
                raise BadRecord(
                    f"{row[0]!r}: expected {k} negatives, got {len(rec.neg_scores)}")
            records.append(rec)
    return records


def eval_link_scores(records: list[ScoreRecord]) -> dict:
    """Per-positive AUC and MRR against k sampled negatives.

    AUC contribution: (#negatives strictly below + 0.5 * ties) / k.
    Rank: 1 + #negatives strictly above, with ties counted at their mean
    position.  Both are averaged over positives.
    """
    if not records:
        raise BadRecord("empty score file")
    auc_sum = rr_sum = 0.0
    for rec in records:
        k = len(rec.neg_scores)
        if k == 0:
            raise BadRecord(f"{rec.positive_id!r} has no negatives")
        below = sum(1 for s in rec.neg_scores if s < rec.pos_score)
        ties = sum(1 for s in rec.neg_scores if s == rec.pos_score)
        above = k - below - ties
        auc_sum += (below + 0.5 * ties) / k
        rr_sum += 1.0 / (1 + above + ties / 2)
    n = len(records)
    return {"auc": auc_sum / n, "mrr": rr_sum / n, "positives": n}


def eval_classification(pairs: list[tuple[str, str]]) -> dict:
    """Accuracy and macro recall over (true, predicted) label pairs."""
    if not pairs:
        raise BadRecord("empty prediction file")
    correct = sum(1 for t, p in pairs if t == p)
    per_class_total: Counter = Counter(t for t, _ in pairs)
    per_class_hit: Counter = Counter(t for t, p in pairs if t == p)
    recalls = [per_class_hit[c] / per_class_total[c] for c in per_class_total]
    return {
        "accuracy": correct / len(pairs),
        "macro_recall": sum(recalls) / len(recalls),
        "samples": len(pairs),
        "classes": len(per_class_total),
    }


def read_prediction_file(path: str) -> list[tuple[str, str]]:
    pairs = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0] in ("id", "node_id"):
                continue
            if len(row) < 3:
                raise BadRecord("prediction rows need id,true,predicted")
            pairs.append((row[1], row[2]))
    return pairs
