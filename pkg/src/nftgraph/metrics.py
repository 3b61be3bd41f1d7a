"""Structural and dynamic measurements over temporal-graph views.

View-level metrics (assortativity, density, reciprocity, clustering,
effective diameter, degree histogram) take a SimpleDigraph.  Stream-level
measurements (growth, mutual-edge intervals, active periods, holder
statistics, hub correlation, TEA/TET) take the TemporalGraph plus a
calendar granularity.  Everything here is a pure function of immutable
inputs.
"""

from __future__ import annotations

import random
import statistics
from collections import Counter, deque
from dataclasses import dataclass, field

from .errors import Degenerate, EmptyView, NoPairs, TooSmall
from .graph import SimpleDigraph, TemporalGraph, simple_view
from .periods import Period, iter_periods, period_index

DAY = 86400


# ---------------------------------------------------------------------
# view-level metrics
# ---------------------------------------------------------------------

def _endpoint_degrees(view: SimpleDigraph, mode: str):
    for u, v in view.pairs:
        yield view.degree(u, mode), view.degree(v, mode)


def assortativity(view: SimpleDigraph, mode: str = "total") -> float | None:
    """Degree correlation across edge endpoints; None when 0/0.

    Computed in exact integer arithmetic so that regular graphs come out
    as genuinely undefined instead of float noise.
    """
    m = view.num_edges
    if m == 0:
        raise EmptyView("assortativity needs at least one pair")
    s_kk = s_sum = s_sq = 0
    for ki, kj in _endpoint_degrees(view, mode):
        s_kk += ki * kj
        s_sum += ki + kj
        s_sq += ki * ki + kj * kj
    num = 4 * m * s_kk - s_sum * s_sum
    den = 2 * m * s_sq - s_sum * s_sum
    if den == 0:
        return None
    return num / den


def density(view: SimpleDigraph) -> float:
    n = view.num_nodes
    if n < 2:
        raise TooSmall("density needs at least two nodes")
    return view.num_edges / (n * (n - 1))


def reciprocity(view: SimpleDigraph) -> float:
    if view.num_edges == 0:
        raise EmptyView("reciprocity needs at least one pair")
    mutual = sum(1 for (u, v) in view.pairs if (v, u) in view.pairs)
    return mutual / view.num_edges


def local_clustering(view: SimpleDigraph, node: int) -> float:
    nbrs = view.undirected_neighbors(node)
    k = len(nbrs)
    if k < 2:
        return 0.0
    links = 0
    for j in nbrs:
        links += len(view.out_neighbors(j) & nbrs)
        if j in view.out_neighbors(j):
            links -= 1  # self-loops are not neighbor-to-neighbor links
    return links / (k * (k - 1))


def avg_clustering(view: SimpleDigraph) -> float:
    if view.num_nodes == 0:
        return 0.0
    return sum(local_clustering(view, u) for u in view.nodes) / view.num_nodes


def degree_histogram(view: SimpleDigraph, mode: str = "total") -> dict[int, int]:
    hist: Counter = Counter()
    for u in view.nodes:
        hist[view.degree(u, mode)] += 1
    return dict(hist)


def _undirected_adj(view: SimpleDigraph) -> dict[int, set[int]]:
    adj: dict[int, set[int]] = {}
    for u, v in view.pairs:
        if u == v:
            continue
        adj.setdefault(u, set()).add(v)
        adj.setdefault(v, set()).add(u)
    return adj


def _bfs_distance_counts(adj, src, counts: list[int]):
    seen = {src}
    frontier = deque([src])
    d = 0
    while frontier:
        d += 1
        nxt = deque()
        for u in frontier:
            for w in adj.get(u, ()):
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        if nxt:
            while len(counts) <= d:
                counts.append(0)
            counts[d] += len(nxt)
        frontier = nxt


def effective_diameter(view: SimpleDigraph, *, exact_threshold: int = 10000,
                       sample_sources: int = 1000, seed: int = 0,
                       percentile: float = 0.9) -> float:
    """Interpolated 90th-percentile shortest-path length, undirected.

    Exact all-sources BFS up to `exact_threshold` nodes, otherwise BFS from
    `sample_sources` seeded-random sources.  The fraction g(d) of reachable
    ordered pairs within distance d is linearly interpolated at the target
    percentile (g(0) = 0, so a complete graph yields 0.9).
    """
    adj = _undirected_adj(view)
    sources = sorted(adj)
    if not sources:
        raise NoPairs("no node reaches another")
    if len(view.nodes) > exact_threshold and len(sources) > sample_sources:
        rng = random.Random(seed)
        sources = rng.sample(sources, sample_sources)
    counts: list[int] = [0]
    for s in sources:
        _bfs_distance_counts(adj, s, counts)
    total = sum(counts)
    if total == 0:
        raise NoPairs("no node reaches another")
    cum = 0
    g_prev = 0.0
    for d in range(1, len(counts)):
        cum += counts[d]
        g = cum / total
        if g >= percentile:
            return (d - 1) + (percentile - g_prev) / (g - g_prev)
        g_prev = g
    return float(len(counts) - 1)


@dataclass
class MetricsReport:
    assortativity: float | None
    density: float
    reciprocity: float
    avg_clustering: float
    effective_diameter: float | None
    degree_histogram: dict[int, int]

    def as_dict(self) -> dict:
        return {
            "assortativity": self.assortativity,
            "density": self.density,
            "reciprocity": self.reciprocity,
            "avg_clustering": self.avg_clustering,
            "effective_diameter": self.effective_diameter,
            "degree_histogram": {str(k): v for k, v in
                                 sorted(self.degree_histogram.items())},
        }


def metrics_report(view: SimpleDigraph, *, diameter_exact_threshold: int = 10000,
                   diameter_sources: int = 1000, seed: int = 0) -> MetricsReport:
    """Evaluate every view-level metric, mapping degenerate cases to None."""
    try:
        alpha = assortativity(view)
    except EmptyView:
        alpha = None
    try:
        dens = density(view)
    except TooSmall:
        dens = 0.0
    try:
        rec = reciprocity(view)
    except EmptyView:
        rec = 0.0
    try:
        diam = effective_diameter(view, exact_threshold=diameter_exact_threshold,
                                  sample_sources=diameter_sources, seed=seed)
    except NoPairs:
        diam = None
    return MetricsReport(
        assortativity=alpha, density=dens, reciprocity=rec,
        avg_clustering=avg_clustering(view), effective_diameter=diam,
        degree_histogram=degree_histogram(view))


# ---------------------------------------------------------------------
# stream-level measurements
# ---------------------------------------------------------------------

@dataclass
class GrowthRecord:
    new_nodes: int = 0
    new_mint_nodes: int = 0
    new_nonmint_nodes: int = 0
    new_edges: int = 0
    new_bidirectional_edges: int = 0
    new_self_loops: int = 0
    pct_edges_new_old: float = 0.0
    pct_edges_new_new: float = 0.0
    pct_edges_old_old: float = 0.0


@dataclass
class PeriodSeries:
    granularity: str
    buckets: list[tuple[str, object]] = field(default_factory=list)

    def labels(self) -> list[str]:
        return [label for label, _ in self.buckets]


def _graph_periods(g: TemporalGraph, granularity: str) -> list[Period]:
    if g.num_edges == 0:
        return []
    return list(iter_periods(granularity, g.e_ts[0], g.e_ts[-1]))


def _node_visible(g: TemporalGraph, i: int, include_null: bool) -> bool:
    return include_null or i != g.null_id


def growth_series(g: TemporalGraph, granularity: str, *,
                  include_null: bool = False,
                  include_self_loops: bool = True) -> PeriodSeries:
    """Per-period node/edge growth; "new" means first seen in the period.

    Edges are counted as distinct ordered pairs at their first occurrence.
    A pair is bidirectional-new in the period where its reverse direction
    completes.
    """
    periods = _graph_periods(g, granularity)
    records = [GrowthRecord() for _ in periods]
    node_period = {}
    for i in range(g.num_nodes):
        if not _node_visible(g, i, include_null):
            continue
        p = period_index(periods, g.n_first[i])
        node_period[i] = p
        rec = records[p]
        rec.new_nodes += 1
        if g.n_mint[i]:
            rec.new_mint_nodes += 1
        else:
            rec.new_nonmint_nodes += 1

    seen_pairs: set[tuple[int, int]] = set()
    shares = [[0, 0, 0] for _ in periods]  # new-old, new-new, old-old
    for k in range(g.num_edges):
        u, v = g.e_src[k], g.e_dst[k]
        if not include_null and (u == g.null_id or v == g.null_id):
            continue
        if not include_self_loops and u == v:
            continue
        if (u, v) in seen_pairs:
            continue
        seen_pairs.add((u, v))
        p = period_index(periods, g.e_ts[k])
        rec = records[p]
        rec.new_edges += 1
        if u == v:
            rec.new_self_loops += 1
        elif (v, u) in seen_pairs:
            rec.new_bidirectional_edges += 1
        u_new = node_period[u] == p
        v_new = node_period[v] == p
        if u_new and v_new:
            shares[p][1] += 1
        elif u_new or v_new:
            shares[p][0] += 1
        else:
            shares[p][2] += 1

    for rec, (no, nn, oo) in zip(records, shares):
        if rec.new_edges:
            rec.pct_edges_new_old = 100.0 * no / rec.new_edges
            rec.pct_edges_new_new = 100.0 * nn / rec.new_edges
            rec.pct_edges_old_old = 100.0 * oo / rec.new_edges
    return PeriodSeries(granularity,
                        [(p.label, r) for p, r in zip(periods, records)])


def mutual_edge_intervals(g: TemporalGraph, *, include_null: bool = False,
                          bucket_seconds: int = DAY):
    """Histogram of |t_uv - t_vu| between earliest opposing edges.

    Returns (histogram bucket->count, cumulative bucket->fraction) with
    buckets of `bucket_seconds` (days by default).
    """
    first_ts: dict[tuple[int, int], int] = {}
    for k in range(g.num_edges):
        u, v = g.e_src[k], g.e_dst[k]
        if u == v:
            continue
        if not include_null and (u == g.null_id or v == g.null_id):
            continue
        first_ts.setdefault((u, v), g.e_ts[k])
    hist: Counter = Counter()
    for (u, v), t in first_ts.items():
        if u < v and (v, u) in first_ts:
            hist[abs(t - first_ts[(v, u)]) // bucket_seconds] += 1
    total = sum(hist.values())
    cumulative: dict[int, float] = {}
    if total:
        running = 0
        for bucket in sorted(hist):
            running += hist[bucket]
            cumulative[bucket] = running / total
    return dict(hist), cumulative


def active_periods(g: TemporalGraph, *, include_null: bool = False):
    """Day-span histogram of node activity, 1-based.

    Nodes with a single transaction are discarded.  A span of 1 means the
    first and last transaction fall within the same 24h of each other.
    Also returns the mean transaction count per span.
    """
    hist: Counter = Counter()
    tx_sums: Counter = Counter()
    for i in range(g.num_nodes):
        if g.n_txc[i] < 2 or not _node_visible(g, i, include_null):
            continue
        span = (g.n_last[i] - g.n_first[i]) // DAY + 1
        hist[span] += 1
        tx_sums[span] += g.n_txc[i]
    avg_tx = {span: tx_sums[span] / hist[span] for span in hist}
    return dict(hist), avg_tx


def holder_stats(g: TemporalGraph, t: int | None = None, top_k: int = 10):
    """Replay the token ledger to cutoff t.

    An account holds a token iff it received the token's latest transfer at
    or before t.  Returns (address -> (token_count, collection_count),
    top-k table sorted by token count).  The Null address is included: what
    it "holds" are destroyed tokens.
    """
    end = g.num_edges if t is None else g.edge_count_until(t)
    owner: dict[tuple[int, int], int] = {}
    for k in range(end):
        owner[(g.e_contract[k], g.e_token[k])] = g.e_dst[k]
    tokens: Counter = Counter()
    colls: dict[int, set[int]] = {}
    for (cid, _tok), who in owner.items():
        tokens[who] += 1
        colls.setdefault(who, set()).add(cid)
    stats = {g.addresses[i]: (tokens[i], len(colls[i])) for i in tokens}
    top = sorted(stats.items(), key=lambda kv: (-kv[1][0], -kv[1][1], kv[0]))
    table = [(addr, tc, cc) for addr, (tc, cc) in top[:top_k]]
    return stats, table


def hub_correlation(g: TemporalGraph, granularity: str, period: int | str, *,
                    include_null: bool = False) -> float:
    """Pearson correlation between degree at the end of a period and the
    number of distinct new-node connections gained in the next period."""
    periods = _graph_periods(g, granularity)
    if isinstance(period, str):
        labels = [p.label for p in periods]
        if period not in labels:
            raise Degenerate(f"no period {period!r}")
        p = labels.index(period)
    else:
        p = period
    if p + 1 >= len(periods):
        raise Degenerate("no following period")
    cutoff = periods[p].end_ts - 1
    view = simple_view(g, cutoff, include_null=include_null)
    nxt = periods[p + 1]

    gains: dict[int, set[int]] = {}
    for k in range(g.num_edges):
        ts = g.e_ts[k]
        if ts < nxt.start_ts:
            continue
        if ts >= nxt.end_ts:
            break
        u, v = g.e_src[k], g.e_dst[k]
        if not include_null and (u == g.null_id or v == g.null_id):
            continue
        if u in view.nodes and nxt.contains(g.n_first[v]):
            gains.setdefault(u, set()).add(v)
        if v in view.nodes and nxt.contains(g.n_first[u]):
            gains.setdefault(v, set()).add(u)

    xs, ys = [], []
    for node in sorted(view.nodes):
        xs.append(view.degree(node))
        ys.append(len(gains.get(node, ())))
    if len(xs) < 2:
        raise Degenerate("fewer than two nodes in period")
    try:
        return statistics.correlation(xs, ys)
    except statistics.StatisticsError:
        raise Degenerate("zero variance") from None


def tea_tet(g: TemporalGraph, granularity: str, split_time: int, *,
            include_null: bool = False):
    """TEA per-period new/recurring pair counts and per-pair TET classes.

    A pair is recurring in a period when it was observed in any earlier
    period.  TET classes each distinct pair as train_only / test_only /
    both relative to split_time (train: ts <= split_time).
    """
    periods = _graph_periods(g, granularity)
    first_period: dict[tuple[int, int], int] = {}
    in_period: list[set[tuple[int, int]]] = [set() for _ in periods]
    has_train: set[tuple[int, int]] = set()
    has_test: set[tuple[int, int]] = set()
    for k in range(g.num_edges):
        u, v = g.e_src[k], g.e_dst[k]
        if not include_null and (u == g.null_id or v == g.null_id):
            continue
        pair = (u, v)
        p = period_index(periods, g.e_ts[k])
        in_period[p].add(pair)
        if pair not in first_period:
            first_period[pair] = p
        (has_train if g.e_ts[k] <= split_time else has_test).add(pair)

    tea = PeriodSeries(granularity)
    for p, period in enumerate(periods):
        new = sum(1 for pair in in_period[p] if first_period[pair] == p)
        rec = len(in_period[p]) - new
        tea.buckets.append((period.label, {"new": new, "recurring": rec}))

    tet: dict[tuple[int, int], str] = {}
    for pair in first_period:
        if pair in has_train and pair in has_test:
            tet[pair] = "both"
        elif pair in has_train:
            tet[pair] = "train_only"
        else:
            tet[pair] = "test_only"
    return tea, tet
