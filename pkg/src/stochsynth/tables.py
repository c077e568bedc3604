"""Transition-table backends over product states.

A table has ``n_states * n_inputs`` rows, row ``v * n_inputs + u``, each
holding an over-approximated successor set (F̄) and an under-approximated
one (F̲).  The solver only ever asks for per-row counts of how many
successors fall into a given state set, which is enough to decide subset and
intersection tests.

``SparseTable`` keeps explicit CSR rows.  ``RectProductTable`` exploits that
successor sets of a grid abstraction are index rectangles: after gathering
the set through the automaton transition it answers a count query with a few
lookups into a summed-area table.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy import sparse


class SparseTable:
    def __init__(self, over: sparse.csr_matrix, under: sparse.csr_matrix, n_inputs: int):
        self.over = sparse.csr_matrix(over, dtype=np.int32)
        self.under = sparse.csr_matrix(under, dtype=np.int32)
        self.n_inputs = int(n_inputs)
        self.n_states = self.over.shape[1]
        if self.over.shape[0] != self.n_states * self.n_inputs or self.under.shape != self.over.shape:
            raise ValueError("table shape does not match n_states * n_inputs rows")
        self.over_size = np.diff(self.over.indptr)
        self.under_size = np.diff(self.under.indptr)

    @classmethod
    def from_sets(cls, over_sets, under_sets, n_states: int, n_inputs: int) -> "SparseTable":
        """``over_sets[row]`` / ``under_sets[row]`` are iterables of successor state ids."""
        def csr(rows):
            indptr = [0]
            indices = []
            for r in rows:
                ids = sorted(set(int(x) for x in r))
                indices.extend(ids)
                indptr.append(len(indices))
            data = np.ones(len(indices), dtype=np.int32)
            return sparse.csr_matrix((data, np.array(indices, dtype=np.int64), np.array(indptr)),
                                     shape=(len(rows), n_states))
        return cls(csr(over_sets), csr(under_sets), n_inputs)

    def successors(self, row: int):
        o = self.over.indices[self.over.indptr[row]:self.over.indptr[row + 1]]
        u = self.under.indices[self.under.indptr[row]:self.under.indptr[row + 1]]
        return o.copy(), u.copy()

    def counts(self, x, rows=None, which=("over", "under")):
        x = np.asarray(x, dtype=np.int32)
        out = []
        for w in which:
            m = self.over if w == "over" else self.under
            if rows is not None:
                m = m[rows]
            out.append(np.asarray(m @ x).ravel())
        return tuple(out)

    def counts_over(self, x, rows=None):
        return self.counts(x, rows, ("over",))[0]

    def counts_under(self, x, rows=None):
        return self.counts(x, rows, ("under",))[0]

    def to_sparse(self) -> "SparseTable":
        return self


class RectProductTable:
    """Product of a rectangle abstraction with a deterministic automaton.

    ``gather[q, c']`` is the product state reached when moving from automaton
    state ``q`` into cell ``c'``.  Product state ids are ``c * n_q + q``; the
    optional sink is the last state and has only the self-loop.
    """

    def __init__(self, abstraction, gather: np.ndarray, n_q: int, has_sink: bool):
        self.base = abstraction
        grid = abstraction.grid
        self.dims = tuple(grid.cells_per_dim)
        self.dim = len(self.dims)
        self.n_q = int(n_q)
        self.n_cells = grid.n_cells
        self.n_inputs = abstraction.n_inputs
        self.has_sink = bool(has_sink)
        self.sink = self.n_cells * self.n_q if self.has_sink else None
        self.n_states = self.n_cells * self.n_q + int(self.has_sink)
        self.gather = np.ascontiguousarray(gather, dtype=np.int64)
        nu = self.n_inputs

        padded = tuple(n + 1 for n in self.dims)
        self._padded = padded
        block = int(np.prod(padded))
        self._block = block
        picks = list(itertools.product((0, 1), repeat=self.dim))
        self.signs = np.array([(-1) ** (self.dim - sum(p)) for p in picks], dtype=np.int64)

        def corners(lo, hi):
            # lo, hi: (n_cells, nu, dim) inclusive; padded table P has P[i+1] = prefix sum through i
            empty = np.any(hi < lo, axis=-1)
            out = np.empty((len(picks), self.n_cells, self.n_q, nu), dtype=np.int64)
            q_off = (np.arange(self.n_q) * block)[None, :, None]
            for k, p in enumerate(picks):
                idx = np.where(np.array(p, dtype=bool), hi + 1, lo)
                idx = np.where(empty[..., None], 0, idx)
                flat = np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), padded)
                out[k] = flat[:, None, :] + q_off
            out = out.reshape(len(picks), -1)
            if self.has_sink:
                out = np.concatenate([out, np.zeros((len(picks), nu), dtype=np.int64)], axis=1)
            return out

        self._over_corners = corners(abstraction.over_lo, abstraction.over_hi)
        self._under_corners = corners(abstraction.under_lo, abstraction.under_hi)

        def tile(a):
            a = np.broadcast_to(a[:, None, :], (self.n_cells, self.n_q, nu)).reshape(-1)
            if self.has_sink:
                a = np.concatenate([a, np.zeros(nu, dtype=a.dtype)])
            return a

        so = tile(abstraction.sink_over)
        su = tile(abstraction.sink_under)
        if self.has_sink:
            so[-nu:] = True
            su[-nu:] = True
        self.sink_over = so
        self.sink_under = su
        self.over_size = tile(abstraction.over_size).astype(np.int64) + so
        self.under_size = tile(abstraction.under_size).astype(np.int64) + su

    def _prefix(self, x):
        xt = x[self.gather].reshape((self.n_q,) + self.dims).astype(np.int32)
        p = np.zeros((self.n_q,) + self._padded, dtype=np.int32)
        inner = xt
        for ax in range(1, self.dim + 1):
            inner = np.cumsum(inner, axis=ax, dtype=np.int32)
        p[(slice(None),) + tuple(slice(1, None) for _ in self.dims)] = inner
        return p.ravel()

    def counts(self, x, rows=None, which=("over", "under")):
        x = np.asarray(x)
        pf = self._prefix(x)
        sink_val = int(x[self.sink]) if self.has_sink else 0
        out = []
        for w in which:
            cr = self._over_corners if w == "over" else self._under_corners
            flag = self.sink_over if w == "over" else self.sink_under
            if rows is not None:
                cr = cr[:, rows]
                flag = flag[rows]
            tot = np.zeros(cr.shape[1], dtype=np.int64)
            for k in range(cr.shape[0]):
                if self.signs[k] > 0:
                    tot += pf[cr[k]]
                else:
                    tot -= pf[cr[k]]
            if sink_val:
                tot += flag
            out.append(tot)
        return tuple(out)

    def counts_over(self, x, rows=None):
        return self.counts(x, rows, ("over",))[0]

    def counts_under(self, x, rows=None):
        return self.counts(x, rows, ("under",))[0]

    def successors(self, row: int):
        """Explicit (over, under) successor state ids of one row."""
        nu = self.n_inputs
        v, u = divmod(row, nu)
        if self.has_sink and v == self.sink:
            s = np.array([self.sink])
            return s, s.copy()
        c, q = divmod(v, self.n_q)
        res = []
        for cells, flag in ((self.base.over(c, u), self.sink_over[row]),
                            (self.base.under(c, u), self.sink_under[row])):
            ids = self.gather[q, np.fromiter(cells, dtype=np.int64)]
            if flag:
                ids = np.append(ids, self.sink)
            res.append(np.sort(ids))
        return tuple(res)

    def to_sparse(self) -> SparseTable:
        over, under = [], []
        for r in range(self.n_states * self.n_inputs):
            o, u = self.successors(r)
            over.append(o)
            under.append(u)
        return SparseTable.from_sets(over, under, self.n_states, self.n_inputs)
