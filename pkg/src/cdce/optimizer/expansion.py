"""Move-making minimization of the regularized motion energy.

Alpha-expansion needs per-cell unary costs, but the compressed data term
couples all pixels of an image row through the row's measurement block.
Each expansion therefore uses *conditioned* unaries: the exact change of the
row residual energy when one pixel alone switches to the candidate label
while every other pixel keeps its current label.  For pixel ``(k, l)`` with
prediction change ``d``, column ``c = phi2_k[:, l]`` and row residual ``r``:

    delta = ||r - d c||^2 - ||r||^2 = -2 d <c, r> + d^2 ||c||^2

Cross terms between simultaneous flips in one row are ignored.  The exact
energy is recomputed after every cut and the move is rejected unless it
lowers it, so the descent is monotone whatever the approximation does.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from ..core import MotionField, as_image, cell_grid_shape, upsample_cells
from ..energy import CompressedData, EnergyParams, pairwise, smoothness_cost
from ..errors import ConfigError
from ..warp import source_index
from .graph import FlowGraph, max_flow
from .labels import LabelSpace

MODES = ("alpha-expansion", "icm", "exhaustive")
EXHAUSTIVE_MAX_CELLS = 256
EXHAUSTIVE_MAX_LABELS = 32
EXHAUSTIVE_MAX_ASSIGNMENTS = 2_000_000


@dataclass
class TraceRecord:
    iteration: int
    label: str
    accepted: bool
    energy: float
    elapsed_ms: float


@dataclass
class OptimizerTrace:
    mode: str
    initial_energy: float
    records: list = field(default_factory=list)
    field: MotionField = None
    wall_time: float = 0.0

    @property
    def final_energy(self):
        acc = [r.energy for r in self.records if r.accepted]
        return acc[-1] if acc else self.initial_energy

    @property
    def accepted_energies(self):
        return [self.initial_energy] + [r.energy for r in self.records if r.accepted]

    def is_monotone(self) -> bool:
        e = self.accepted_energies
        return all(b < a for a, b in zip(e, e[1:]))

    def write_csv(self, path):
        import csv

        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "label", "accepted", "exact_energy", "elapsed_ms"])
            w.writerow([0, "init", True, repr(self.initial_energy), 0.0])
            for r in self.records:
                w.writerow([r.iteration, r.label, r.accepted, repr(r.energy), f"{r.elapsed_ms:.3f}"])


def _tile_sum(values, block):
    if block == 1:
        return values
    n1, n2 = values.shape
    g1, g2 = cell_grid_shape(values.shape, block)
    out = np.zeros((g1, g2))
    np.add.at(out, ((np.arange(n1) // block)[:, None], (np.arange(n2) // block)[None, :]), values)
    return out


class _Objective:
    """Exact energy plus conditioned single-cell flip costs for one problem."""

    def __init__(self, shape, params: EnergyParams):
        self.shape = tuple(shape)
        self.params = params
        self.block = params.block

    def field(self, mh, mv):
        return MotionField(mh, mv, self.shape, self.params.window, self.block)

    def energy(self, field: MotionField) -> float:
        e = self.data_cost(field)
        if self.params.lam:
            e += self.params.lam * smoothness_cost(field, self.params)
        return e

    def pixel_sources(self, mh_cells, mv_cells):
        return source_index(upsample_cells(mh_cells, self.shape, self.block),
                            upsample_cells(mv_cells, self.shape, self.block))

    def flip_costs(self, mh_cells, mv_cells, label) -> np.ndarray:
        """Per-cell data-cost change for switching each cell alone to ``label``."""
        src = self.pixel_sources(mh_cells, mv_cells)
        src_new = self.pixel_sources(np.full_like(mh_cells, label[0]), np.full_like(mv_cells, label[1]))
        return _tile_sum(self.pixel_deltas(src, src_new), self.block)

    def exact_cell_costs(self, mh_cells, mv_cells, r, c, labels):
        """Exact data-cost change of switching cell ``(r, c)`` to each label."""
        raise NotImplementedError


class CompressedObjective(_Objective):
    def __init__(self, data: CompressedData, params: EnergyParams):
        super().__init__(data.shape, params)
        self.data = data
        self.colnorm = data.S2.column_sq_norms
        self._pre = data.pre1.reshape(-1)

    def data_cost(self, field):
        return self.data.data_cost(field)

    def pixel_deltas(self, src, src_new):
        pred = self._pre[src]
        resid = self.data.Y2.y - self.data.S2.apply(pred)
        corr = self.data.S2.adjoint(resid)          # <phi2_k[:, l], r_k>
        d = self._pre[src_new] - pred
        return -2.0 * d * corr + d * d * self.colnorm

    def exact_cell_costs(self, mh_cells, mv_cells, r, c, labels):
        b = self.block
        n1, n2 = self.shape
        src = self.pixel_sources(mh_cells, mv_cells)
        rows = range(r * b, min((r + 1) * b, n1))
        cols = np.arange(c * b, min((c + 1) * b, n2))
        lh, lv = labels
        out = np.zeros(len(lh))
        for k in rows:
            phi = self.data.S2.block(k)[:, cols]
            resid = self.data.Y2.y[k] - self.data.S2.apply_row(k, self._pre[src[k]])
            new_r = np.clip(k + lv, 0, n1 - 1)[:, None]
            new_c = np.clip(cols[None, :] + lh[:, None], 0, n2 - 1)
            d = self._pre[new_r * n2 + new_c] - self._pre[src[k, cols]][None, :]
            change = d @ phi.T                      # (labels, M)
            out += np.sum((resid[None, :] - change) ** 2, axis=1) - resid @ resid
        return out


class ImageObjective(_Objective):
    def __init__(self, img1, img2, params: EnergyParams):
        i1, i2 = as_image(img1), as_image(img2)
        if i1.shape != i2.shape:
            raise ConfigError("images differ in size")
        super().__init__(i1.shape, params)
        self.i1 = i1.reshape(-1)
        self.i2 = i2

    def data_cost(self, field):
        mh, mv = field.to_pixels()
        return float(np.sum((self.i2 - self.i1[source_index(mh, mv)]) ** 2))

    def pixel_deltas(self, src, src_new):
        return (self.i2 - self.i1[src_new]) ** 2 - (self.i2 - self.i1[src]) ** 2

    def exact_cell_costs(self, mh_cells, mv_cells, r, c, labels):
        b = self.block
        n1, n2 = self.shape
        src = self.pixel_sources(mh_cells, mv_cells)
        rows = np.arange(r * b, min((r + 1) * b, n1))
        cols = np.arange(c * b, min((c + 1) * b, n2))
        lh, lv = labels
        tgt = self.i2[np.ix_(rows, cols)]
        cur = np.sum((tgt - self.i1[src[np.ix_(rows, cols)]]) ** 2)
        nr = np.clip(rows[None, :, None] + lv[:, None, None], 0, n1 - 1)
        nc = np.clip(cols[None, None, :] + lh[:, None, None], 0, n2 - 1)
        new = np.sum((tgt[None] - self.i1[nr * n2 + nc]) ** 2, axis=(1, 2))
        return new - cur


def _pairwise_terms(mh, mv, label, tau, lam):
    """Edge capacities and unary contributions of the smoothness term for one expansion.

    Returns ``(unary, edges)`` where ``unary`` is the linear coefficient on
    "switch to label" per cell and ``edges`` lists ``(i, j, cap)`` arrays for
    both neighbor directions.
    """
    g1, g2 = mh.shape
    ids = np.arange(g1 * g2).reshape(g1, g2)
    unary = np.zeros((g1, g2))
    edges = []
    ah, av = label
    for axis in (0, 1):
        if mh.shape[axis] < 2:
            continue
        sl_p = (slice(None, -1), slice(None)) if axis == 0 else (slice(None), slice(None, -1))
        sl_q = (slice(1, None), slice(None)) if axis == 0 else (slice(None), slice(1, None))
        ph, pv, qh, qv = mh[sl_p], mv[sl_p], mh[sl_q], mv[sl_q]
        a = lam * pairwise(ph - qh, pv - qv, tau)          # keep, keep
        b = lam * pairwise(ph - ah, pv - av, tau)          # keep, switch
        c = lam * pairwise(ah - qh, av - qv, tau)          # switch, keep
        # switch, switch costs 0
        unary[sl_p] += c - a
        unary[sl_q] += 0.0 - c
        cap = b + c - a
        edges.append((ids[sl_p].ravel(), ids[sl_q].ravel(), np.maximum(cap, 0.0).ravel()))
    return unary, edges


def _expansion_move(obj: _Objective, mh, mv, label):
    """Solve the binary keep/switch problem for one label; returns new cell arrays."""
    p = obj.params
    unary = obj.flip_costs(mh, mv, label)
    if p.lam:
        u_pair, edges = _pairwise_terms(mh, mv, label, p.tau, p.lam)
        unary = unary + u_pair
    else:
        edges = []
    at_label = (mh == label[0]) & (mv == label[1])
    unary = np.where(at_label, 0.0, unary)
    g = FlowGraph(unary.size)
    u = unary.ravel()
    g.source_cap = np.where(u > 0, u, 0.0)
    g.sink_cap = np.where(u < 0, -u, 0.0)
    for i, j, cap in edges:
        keep = cap > 0
        g.add_edges(i[keep], j[keep], cap[keep])
    _, switch = max_flow(g)
    switch = switch.reshape(mh.shape) & ~at_label
    if not switch.any():
        return None
    return np.where(switch, label[0], mh), np.where(switch, label[1], mv)


def _alpha_expansion(obj, labels: LabelSpace, init, max_sweeps, trace, t0):
    mh, mv = init.mh.copy(), init.mv.copy()
    energy = trace.initial_energy
    it = 0
    for _ in range(max_sweeps):
        improved = False
        for label in labels:
            it += 1
            move = _expansion_move(obj, mh, mv, label)
            accepted = False
            e_new = energy
            if move is not None:
                e_new = obj.energy(obj.field(*move))
                if e_new < energy:
                    mh, mv = move
                    energy = e_new
                    accepted = improved = True
            trace.records.append(TraceRecord(it, f"{label[0]}:{label[1]}", accepted, e_new,
                                             1000 * (time.perf_counter() - t0)))
        if not improved:
            break
    return obj.field(mh, mv)


def _neighbour_smoothness(mh, mv, r, c, lh, lv, tau):
    g1, g2 = mh.shape
    cost = np.zeros(len(lh))
    for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        rr, cc = r + dr, c + dc
        if 0 <= rr < g1 and 0 <= cc < g2:
            cost += pairwise(lh - mh[rr, cc], lv - mv[rr, cc], tau)
    return cost


def _icm(obj, labels: LabelSpace, init, max_sweeps, trace, t0):
    mh, mv = init.mh.copy(), init.mv.copy()
    lh, lv = labels.arrays
    p = obj.params
    energy = trace.initial_energy
    for sweep in range(1, max_sweeps + 1):
        prev = mh.copy(), mv.copy()
        changed = False
        for r, c in np.ndindex(*mh.shape):
            delta = obj.exact_cell_costs(mh, mv, r, c, (lh, lv))
            if p.lam:
                cur = _neighbour_smoothness(mh, mv, r, c, mh[r, c:c + 1], mv[r, c:c + 1], p.tau)
                delta = delta + p.lam * (_neighbour_smoothness(mh, mv, r, c, lh, lv, p.tau) - cur)
            best = int(np.argmin(delta))
            if delta[best] < 0 and (lh[best], lv[best]) != (mh[r, c], mv[r, c]):
                mh[r, c], mv[r, c] = lh[best], lv[best]
                changed = True
        e_new = obj.energy(obj.field(mh, mv)) if changed else energy
        accepted = changed and e_new < energy
        trace.records.append(TraceRecord(sweep, "sweep", accepted, e_new, 1000 * (time.perf_counter() - t0)))
        if not accepted:
            mh, mv = prev
            break
        energy = e_new
    return obj.field(mh, mv)


def _exhaustive(obj, labels: LabelSpace, init, trace, t0):
    grid = init.grid_shape
    cells = grid[0] * grid[1]
    if cells > EXHAUSTIVE_MAX_CELLS or len(labels) > EXHAUSTIVE_MAX_LABELS \
            or len(labels) ** cells > EXHAUSTIVE_MAX_ASSIGNMENTS:
        raise ConfigError(f"exhaustive search over {len(labels)}^{cells} assignments is too large")
    lh, lv = labels.arrays
    best, best_e = None, np.inf
    for combo in itertools.product(range(len(labels)), repeat=cells):
        idx = np.asarray(combo).reshape(grid)
        e = obj.energy(obj.field(lh[idx], lv[idx]))
        if e < best_e:
            best, best_e = idx, e
    field = obj.field(lh[best], lv[best])
    accepted = best_e < trace.initial_energy
    trace.records.append(TraceRecord(1, "all", accepted, best_e, 1000 * (time.perf_counter() - t0)))
    return field if accepted else init


def _run(obj: _Objective, labels: LabelSpace, mode, max_sweeps, init):
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")
    p = obj.params
    if not labels.verify_metric(p.tau):
        raise ConfigError("pairwise penalty is not a metric on this label space")
    wx, wy = labels.window
    if wx > p.window[0] or wy > p.window[1]:
        raise ConfigError(f"labels {labels.window} exceed the search window {p.window}")
    if init is None:
        init = obj.field(*(np.zeros(cell_grid_shape(obj.shape, obj.block), dtype=np.int64),) * 2)
    t0 = time.perf_counter()
    trace = OptimizerTrace(mode, obj.energy(init))
    if mode == "alpha-expansion":
        result = _alpha_expansion(obj, labels, init, max_sweeps, trace, t0)
    elif mode == "icm":
        result = _icm(obj, labels, init, max_sweeps, trace, t0)
    else:
        result = _exhaustive(obj, labels, init, trace, t0)
    trace.field = result
    trace.wall_time = time.perf_counter() - t0
    return result, trace


def optimize(Y1, Y2, S1, S2, params: EnergyParams, labels: LabelSpace, mode="alpha-expansion",
             max_sweeps=5, init=None, data: CompressedData = None):
    """Estimate a motion field directly from the two measurement sets."""
    if data is None:
        data = CompressedData(Y1, Y2, S1, S2)
    return _run(CompressedObjective(data, params), labels, mode, max_sweeps, init)


def image_domain_optimize(img1, img2, params: EnergyParams, labels: LabelSpace, mode="alpha-expansion",
                          max_sweeps=5, init=None):
    """Same minimization with the exact per-pixel image-domain data term."""
    return _run(ImageObjective(img1, img2, params), labels, mode, max_sweeps, init)
