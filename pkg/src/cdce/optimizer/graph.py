"""Min-cut / max-flow on small explicit graphs.

The augmenting-path solver itself is PyMaxflow's Boykov-Kolmogorov
implementation; this module fixes the graph description used by the move
making code and the partition convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import maxflow
import numpy as np

from ..errors import ConfigError


@dataclass
class FlowGraph:
    """``n`` non-terminal nodes, directed edges and terminal capacities.

    Node ``i`` pays ``sink_cap[i]`` when it ends on the source side and
    ``source_cap[i]`` when it ends on the sink side.
    """

    n: int
    source_cap: np.ndarray = None
    sink_cap: np.ndarray = None
    edge_i: list = field(default_factory=list)
    edge_j: list = field(default_factory=list)
    edge_cap: list = field(default_factory=list)
    edge_rev: list = field(default_factory=list)

    def __post_init__(self):
        if self.source_cap is None:
            self.source_cap = np.zeros(self.n)
        if self.sink_cap is None:
            self.sink_cap = np.zeros(self.n)

    def add_edge(self, i, j, cap, rev=0.0):
        self.add_edges([i], [j], [cap], [rev])

    def add_edges(self, i, j, cap, rev=None):
        i = np.asarray(i, dtype=np.int64).ravel()
        self.edge_i.append(i)
        self.edge_j.append(np.asarray(j, dtype=np.int64).ravel())
        self.edge_cap.append(np.broadcast_to(np.asarray(cap, dtype=np.float64).ravel(), i.shape))
        rev = np.zeros(i.size) if rev is None else np.asarray(rev, dtype=np.float64).ravel()
        self.edge_rev.append(np.broadcast_to(rev, i.shape))

    def edges(self):
        """Concatenated ``(i, j, cap, rev)`` arrays."""
        if not self.edge_i:
            empty = np.zeros(0)
            return empty.astype(np.int64), empty.astype(np.int64), empty, empty
        return (np.concatenate(self.edge_i), np.concatenate(self.edge_j),
                np.concatenate(self.edge_cap), np.concatenate(self.edge_rev))

    def add_tedge(self, i, source, sink):
        self.source_cap[i] += source
        self.sink_cap[i] += sink

    def cut_value(self, sink_side) -> float:
        """Capacity of the cut induced by a boolean sink-side mask (brute-force helper)."""
        s = np.asarray(sink_side, dtype=bool)
        i, j, cap, rev = self.edges()
        total = self.source_cap[s].sum() + self.sink_cap[~s].sum()
        total += cap[~s[i] & s[j]].sum() + rev[s[i] & ~s[j]].sum()
        return float(total)


def max_flow(graph: FlowGraph):
    """Return ``(cut value, sink_side)`` for a minimum s-t cut.

    ``sink_side[i]`` is True when node ``i`` is separated from the source.
    """
    ei, ej, cap, rev = graph.edges()
    for c in (graph.source_cap, graph.sink_cap, cap, rev):
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise ConfigError("capacities must be finite and non-negative")
    g = maxflow.Graph[float](graph.n, max(1, ei.size))
    nodes = g.add_nodes(graph.n)
    if ei.size:
        g.add_edges(ei, ej, np.ascontiguousarray(cap), np.ascontiguousarray(rev))
    g.add_grid_tedges(np.asarray(nodes), np.asarray(graph.source_cap, dtype=np.float64),
                      np.asarray(graph.sink_cap, dtype=np.float64))
    value = g.maxflow()
    return float(value), np.asarray(g.get_grid_segments(np.asarray(nodes)), dtype=bool)
