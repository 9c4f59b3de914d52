"""Reduced Groebner bases modulo a word-size prime by F4, with learning.

A run proceeds in batches: the lowest-degree critical pairs are expanded
into rows (the two multiplied halves of each S-polynomial), symbolic
preprocessing closes the monomial set with reducer multiples, and one matrix
elimination produces the new basis elements.

In ``record`` mode the run also returns a :class:`LearningRecord`: for every
batch the rows that were built, which of them reduced to zero, the reducer
multiples and the monomials that were actually needed.  A ``replay`` run at
another prime follows the record: no pair bookkeeping, no symbolic
preprocessing, no work on rows known to vanish.  Any deviation from the
recorded shape raises :class:`UnluckyPrime`.
"""

from __future__ import annotations

import bisect
import hashlib
import io
import struct
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numba
import numpy as np

from . import _kernels
from .modarith import PrimeField
from .polyring import ExponentOverflow, PolyRing, Polynomial, format_poly


class UnluckyPrime(Exception):
    """The prime cannot be used (bad reduction or shape deviating from the record)."""


@dataclass(frozen=True, order=True)
class CriticalPair:
    lcm: int
    i: int
    j: int

    def degree(self, layout) -> int:
        return layout.degree(self.lcm)


@dataclass
class BatchRecord:
    pairs: list[tuple[int, int]]
    rows: list[tuple[int, int]]       # (multiplier key, basis index), matrix order
    zero: list[bool]                  # per row: reduced to zero
    reducers: list[tuple[int, int]]   # (multiplier key, basis index), needed only
    monomials: list[int]              # needed columns, decreasing
    new_leads: list[int]              # leading monomials of the new elements, in insertion order


@dataclass
class LearningRecord:
    nvars: int
    system_hash: bytes
    prime: int
    input_order: list[int] = field(default_factory=list)
    input_zero: list[bool] = field(default_factory=list)
    input_leads: list[int] = field(default_factory=list)
    batches: list[BatchRecord] = field(default_factory=list)
    final_indices: list[int] = field(default_factory=list)
    final_reducers: list[tuple[int, int]] = field(default_factory=list)
    final_monomials: list[int] = field(default_factory=list)
    skeleton: list[int] = field(default_factory=list)
    unit: bool = False

    @property
    def zero_rows(self) -> int:
        return sum(sum(b.zero) for b in self.batches) + sum(self.input_zero)

    def to_bytes(self, layout) -> bytes:
        return _dump_record(self, layout)

    @classmethod
    def from_bytes(cls, data: bytes, layout) -> "LearningRecord":
        return _load_record(data, layout)


@dataclass
class ModularBasis:
    """Reduced monic Groebner basis modulo ``prime``, sorted by increasing leading monomial."""

    ring: PolyRing
    polys: list[Polynomial]
    prime: int
    stats: dict = field(default_factory=dict)

    @property
    def leads(self) -> list[int]:
        return [f.keys[0] for f in self.polys]

    @property
    def term_count(self) -> int:
        return sum(len(f) for f in self.polys)

    def __len__(self):
        return len(self.polys)

    def __iter__(self):
        return iter(self.polys)

    def __getitem__(self, i):
        return self.polys[i]


def system_hash(system: Sequence[Polynomial]) -> bytes:
    """SHA-256 of the variable list and the printed generators."""
    h = hashlib.sha256()
    if system:
        h.update(",".join(system[0].ring.variables).encode())
    for f in system:
        h.update(b"\n")
        h.update(format_poly(f).encode())
    return h.digest()


def reduce_system(system: Sequence[Polynomial], fld: PrimeField) -> list[Polynomial]:
    """Map generators to F_p, drop zeros, make monic.

    Raises :class:`UnluckyPrime` if a coefficient denominator vanishes mod p.
    """
    ring = system[0].ring.with_domain(fld) if system else None
    out = []
    for f in system:
        if isinstance(f.ring.domain, PrimeField) and f.ring.domain.p == fld.p:
            g = f
        else:
            try:
                g = f.reduce_mod(fld, ring)
            except ZeroDivisionError as exc:
                raise UnluckyPrime(str(exc)) from exc
        if g.keys:
            out.append(g.monic())
    return out


# -- pair management -----------------------------------------------------

def update_pairs(queue: list[CriticalPair], leads: list[int], active: list[bool],
                 layout) -> list[CriticalPair]:
    """Gebauer-Moeller update for the element ``leads[-1]`` just appended.

    ``active`` is extended for the new element and elements whose leading
    monomial is divisible by the new one are deactivated in place.
    """
    h = len(leads) - 1
    lh = leads[h]
    divides, lcm, coprime = layout.divides, layout.lcm, layout.coprime
    for g in range(h):
        if active[g] and leads[g] == lh:
            raise ValueError("leading monomial already present in the basis")
    cand = [(g, lcm(leads[g], lh)) for g in range(h) if active[g]]
    kept: list[tuple[int, int]] = []
    for n, (g, l) in enumerate(cand):
        if coprime(leads[g], lh):
            kept.append((g, l))
            continue
        rest = cand[n + 1:]
        if any(divides(l2, l) for _, l2 in rest):
            continue
        if any(divides(l2, l) for _, l2 in kept):
            continue
        kept.append((g, l))
    new = [CriticalPair(l, g, h) for g, l in kept if not coprime(leads[g], lh)]
    out = []
    for pr in queue:
        l = pr.lcm
        if (divides(lh, l) and lcm(leads[pr.i], lh) != l
                and lcm(leads[pr.j], lh) != l):
            continue
        out.append(pr)
    out.extend(new)
    for g in range(h):
        if active[g] and divides(lh, leads[g]):
            active[g] = False
    active.append(True)
    return out


def select_batch(queue: list[CriticalPair], max_pairs: int = 0,
                 layout=None) -> tuple[list[CriticalPair], list[CriticalPair]]:
    """Split off the pairs of minimal lcm degree (at most ``max_pairs`` if > 0).

    Returns ``(batch, remaining)``; both sorted by ``(lcm, i, j)``.
    """
    if not queue:
        return [], []
    queue = sorted(queue)
    deg = _degree_of(queue[0].lcm, layout)
    n = 0
    while n < len(queue) and _degree_of(queue[n].lcm, layout) == deg:
        n += 1
    if max_pairs and n > max_pairs:
        n = max_pairs
    return queue[:n], queue[n:]


def _degree_of(key, layout):
    if layout is None:
        raise ValueError("select_batch needs the monomial layout")
    return layout.degree(key)


# -- the working basis ---------------------------------------------------

class _Work:
    """Mutable basis state of one modular run (keys, coefficient arrays, leads)."""

    def __init__(self, ring: PolyRing):
        self.ring = ring
        self.layout = ring.layout
        self.p = ring.domain.p
        self.keys: list[tuple[int, ...]] = []
        self.vals: list[np.ndarray] = []
        self.leads: list[int] = []
        self.lead_r: list[int] = []
        self.active: list[bool] = []
        self.active_idx: list[int] = []
        self._cache: dict[int, tuple[int, int]] = {}

    def append(self, keys, vals) -> int:
        self.keys.append(tuple(keys))
        self.vals.append(np.asarray(vals, dtype=np.int64))
        self.leads.append(keys[0])
        self.lead_r.append(-keys[0] & self.layout.rmask)
        return len(self.keys) - 1

    def refresh_active(self):
        self.active_idx = [i for i, a in enumerate(self.active) if a]

    def divisor(self, m: int) -> int:
        """First active element (by index) whose leading monomial divides m."""
        ent = self._cache.get(m)
        start = 0
        if ent is not None:
            idx, upto = ent
            if idx >= 0:
                if self.active[idx]:
                    return idx
                start = idx + 1
            else:
                start = upto
        g = self.layout.guards
        rm = (-m & self.layout.rmask) | g
        act = self.active_idx
        lead_r = self.lead_r
        for pos in range(bisect.bisect_left(act, start), len(act)):
            j = act[pos]
            if ((rm - lead_r[j]) & g) == g:
                self._cache[m] = (j, 0)
                return j
        self._cache[m] = (-1, len(self.keys))
        return -1

    def preprocess(self, rows: Sequence[tuple[int, int]]):
        """Close the monomial set of ``rows`` under reducer multiples."""
        done: set[int] = set()
        todo: list[int] = []
        keys = self.keys
        for mult, idx in rows:
            for k in keys[idx]:
                t = k + mult
                if t not in done:
                    done.add(t)
                    todo.append(t)
        reducers: dict[int, tuple[int, int]] = {}
        leads = self.leads
        while todo:
            m = todo.pop()
            d = self.divisor(m)
            if d < 0:
                continue
            mult = m - leads[d]
            reducers[m] = (mult, d)
            for k in keys[d][1:]:
                t = k + mult
                if t not in done:
                    done.add(t)
                    todo.append(t)
        return sorted(done, reverse=True), reducers

    def csr(self, rows, colmap):
        keys, vals = self.keys, self.vals
        ptr = [0]
        cols: list[int] = []
        vs = []
        try:
            for mult, idx in rows:
                cols.extend([colmap[k + mult] for k in keys[idx]])
                vs.append(vals[idx])
                ptr.append(len(cols))
        except KeyError as exc:
            raise UnluckyPrime("support outside the recorded monomial set") from exc
        return (np.array(ptr, dtype=np.int64), np.array(cols, dtype=np.int64),
                np.concatenate(vs) if vs else np.zeros(0, dtype=np.int64))


@dataclass
class _Matrix:
    columns: list[int]
    reducers: list[tuple[int, int]]
    rows: list[tuple[int, int]]


def _eliminate(work: _Work, mat: _Matrix, stats: dict, tail_only=False):
    """Stage A (reduce by reducer rows) then, unless ``tail_only``, stage B (echelon)."""
    colmap = {k: c for c, k in enumerate(mat.columns)}
    ncols = len(mat.columns)
    piv_of_col = np.full(ncols, -1, dtype=np.int64)
    reds = sorted(mat.reducers, key=lambda r: colmap[r[0] + work.leads[r[1]]])
    for n, (mult, idx) in enumerate(reds):
        piv_of_col[colmap[mult + work.leads[idx]]] = n
    pptr, pcols, pvals = work.csr(reds, colmap)
    ptr, cols, vals = work.csr(mat.rows, colmap)
    p = work.p
    stats["rows_eliminated"] = stats.get("rows_eliminated", 0) + len(mat.rows)
    stats["max_matrix"] = max(stats.get("max_matrix", (0, 0)),
                              (len(reds) + len(mat.rows), ncols))
    optr, ocols, ovals = _kernels.reduce_by_pivots(
        ncols, ptr, cols, vals, piv_of_col, pptr, pcols, pvals, p, tail_only)
    if not tail_only:
        optr, ocols, ovals = _kernels.echelon(ncols, optr, ocols, ovals, p)
    return optr, ocols, ovals, colmap


def _rows_out(optr, ocols, ovals, columns):
    out = []
    for r in range(len(optr) - 1):
        a, b = optr[r], optr[r + 1]
        if a == b:
            out.append(None)
        else:
            out.append(([columns[c] for c in ocols[a:b].tolist()], ovals[a:b]))
    return out


def _needed(work: _Work, rows, reducers: dict, colmap_cols):
    """Columns and reducers reachable from ``rows`` through reducer multiples."""
    seen: set[int] = set()
    stack: list[int] = []
    for mult, idx in rows:
        for k in work.keys[idx]:
            t = k + mult
            if t not in seen:
                seen.add(t)
                stack.append(t)
    used = []
    while stack:
        m = stack.pop()
        red = reducers.get(m)
        if red is None:
            continue
        used.append(red)
        mult, idx = red
        for k in work.keys[idx][1:]:
            t = k + mult
            if t not in seen:
                seen.add(t)
                stack.append(t)
    return sorted(seen, reverse=True), sorted(used, key=lambda r: -(r[0] + work.leads[r[1]]))


# -- public operations ---------------------------------------------------

def spair(f: Polynomial, g: Polynomial) -> Polynomial:
    """S-polynomial ``(l/lt f) f - (l/lt g) g`` of two monic polynomials."""
    lay = f.ring.layout
    l = lay.lcm(f.keys[0], g.keys[0])
    one = f.ring.domain.one
    return f.mul_term(l - f.keys[0], one) - g.mul_term(l - g.keys[0], one)


def symbolic_preprocess(rows: Sequence[Polynomial], basis: Sequence[Polynomial],
                        record: BatchRecord | None = None):
    """Monomial closure of ``rows`` with reducers drawn from ``basis``.

    Returns ``(monomials, reducers)``: the monomial keys in decreasing order
    and ``(multiplier key, basis index)`` reducer multiples, oldest divisor
    first.  With a ``record`` the recorded sets are returned unchanged.
    """
    if record is not None:
        return list(record.monomials), list(record.reducers)
    if not basis and not rows:
        return [], []
    ring = (basis or rows)[0].ring
    work = _Work(ring)
    for g in basis:
        work.append(g.keys, g.coeffs)
        work.active.append(True)
    start = len(work.keys)
    for f in rows:
        work.append(f.keys, f.coeffs)
        work.active.append(False)
    work.refresh_active()
    monos, reducers = work.preprocess([(0, start + n) for n in range(len(rows))])
    return monos, sorted(reducers.values(), key=lambda r: -(r[0] + work.leads[r[1]]))


def matrix_echelon(rows: Sequence[Polynomial], monomials: Sequence[int], fld: PrimeField,
                   reducers: Sequence[Polynomial] = ()):
    """Row echelon form of ``rows`` over F_p after reduction by ``reducers``.

    ``reducers`` must be monic with distinct leading monomials.  Returns
    ``(new, zero)``: the nonzero reduced rows whose leading monomial is not a
    reducer pivot, as monic polynomials, and one zero flag per input row.
    """
    ring = (list(rows) + list(reducers))[0].ring if (rows or reducers) else None
    if ring is None:
        return [], []
    work = _Work(ring)
    for f in list(reducers) + list(rows):
        work.append(f.keys, f.coeffs)
    nred = len(reducers)
    mat = _Matrix(sorted(monomials, reverse=True), [(0, i) for i in range(nred)],
                  [(0, nred + i) for i in range(len(rows))])
    optr, ocols, ovals, _ = _eliminate(work, mat, {})
    out = _rows_out(optr, ocols, ovals, mat.columns)
    new = [Polynomial(ring, tuple(k), tuple(int(v) for v in vs))
           for r in out if r is not None for k, vs in [r]]
    return new, [r is None for r in out]


def interreduce(polys: Sequence[Polynomial], fld: PrimeField | None = None) -> list[Polynomial]:
    """Minimalise and fully inter-reduce; output monic, sorted by increasing leading monomial."""
    polys = [f.monic() for f in polys if f.keys]
    if not polys:
        return []
    ring = polys[0].ring
    if len({f.keys[0] for f in polys}) < len(polys):
        # equal leading monomials: echelonise first so the ideal is kept
        inp = _Work(ring)
        for f in sorted(polys, key=lambda f: -f.keys[0]):
            inp.append(f.keys, f.coeffs)
        columns = sorted({k for f in polys for k in f.keys}, reverse=True)
        mat = _Matrix(columns, [], [(0, n) for n in range(len(polys))])
        out = _rows_out(*_eliminate(inp, mat, {})[:3], columns)
        polys = [Polynomial(ring, tuple(k), tuple(v.tolist())) for r in out if r is not None
                 for k, v in [r]]
    polys.sort(key=lambda f: f.keys[0])
    lay = ring.layout
    minimal = []
    for f in polys:
        if any(lay.divides(g.keys[0], f.keys[0]) for g in minimal):
            continue
        minimal.append(f)
    work = _Work(ring)
    for f in minimal:
        work.append(f.keys, f.coeffs)
        work.active.append(True)
    work.refresh_active()
    return _interreduce_work(work, list(range(len(minimal))), {}, None)[0]


def _interreduce_work(work: _Work, idx: list[int], stats: dict, final=None):
    rows = [(0, i) for i in idx]
    if final is None:
        monos, reducers = work.preprocess(rows)
        monos, reds = _needed(work, rows, reducers, monos)
    else:
        monos, reds = final
    mat = _Matrix(monos, reds, rows)
    optr, ocols, ovals, _ = _eliminate(work, mat, stats, tail_only=True)
    out = _rows_out(optr, ocols, ovals, mat.columns)
    polys = []
    for keys, vals in out:
        polys.append(Polynomial(work.ring, tuple(keys), tuple(vals.tolist())))
    polys.sort(key=lambda f: f.keys[0])
    return polys, (monos, reds)


def gbasis_mod_p(system: Sequence[Polynomial], fld: PrimeField, mode: str = "plain",
                 learning: LearningRecord | None = None, max_pairs: int = 0,
                 threads: int = 1) -> tuple[ModularBasis, LearningRecord | None]:
    """Reduced grevlex Groebner basis of ``system`` modulo ``fld.p``.

    ``mode`` is ``"plain"``, ``"record"`` (also return a learning record) or
    ``"replay"`` (follow ``learning``; raises :class:`UnluckyPrime` on any
    deviation).
    """
    if mode not in ("plain", "record", "replay"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "replay" and learning is None:
        raise ValueError("replay needs a learning record")
    t0 = time.perf_counter()
    old_threads = numba.get_num_threads()
    numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))
    try:
        if mode == "replay":
            basis, stats = _replay(system, fld, learning)
            rec = None
        else:
            basis, stats, rec = _run(system, fld, max_pairs, mode == "record")
    finally:
        numba.set_num_threads(old_threads)
    stats["seconds"] = time.perf_counter() - t0
    stats["mode"] = mode
    ring = basis[0].ring if basis else (system[0].ring.with_domain(fld) if system else None)
    return ModularBasis(ring, basis, fld.p, stats), rec


def _unit_basis(ring):
    return [ring.one()]


def _inputs(system, fld):
    polys = reduce_system(system, fld)
    if not polys:
        return None, []
    return polys[0].ring, polys


def _input_order(polys):
    return sorted(range(len(polys)), key=lambda i: (-polys[i].keys[0], i))


def _run(system, fld, max_pairs, recording):
    ring, polys = _inputs(system, fld)
    stats = {"batches": 0, "zero_rows": 0, "zero_rows_skipped": 0, "rows_eliminated": 0}
    rec = None
    if recording:
        rec = LearningRecord(ring.nvars if ring else 0,
                             system_hash(system) if system else b"", fld.p)
    if ring is None:
        return [], stats, rec
    lay = ring.layout
    if any(lay.degree(f.keys[0]) == 0 for f in polys):
        if rec:
            rec.unit = True
        return _unit_basis(ring), stats, rec

    work = _Work(ring)
    # input echelon: the generators as rows of one matrix with no reducers
    order = _input_order(polys)
    inp = _Work(ring)
    for i in order:
        inp.append(polys[i].keys, polys[i].coeffs)
    columns = sorted({k for f in polys for k in f.keys}, reverse=True)
    mat = _Matrix(columns, [], [(0, n) for n in range(len(order))])
    optr, ocols, ovals, _ = _eliminate(inp, mat, stats)
    out = _rows_out(optr, ocols, ovals, columns)
    new = sorted((r for r in out if r is not None), key=lambda r: r[0][0])
    stats["zero_rows"] += sum(r is None for r in out)
    if rec:
        rec.input_order = order
        rec.input_zero = [r is None for r in out]
        rec.input_leads = [r[0][0] for r in new]
    queue: list[CriticalPair] = []
    for keys, vals in new:
        if lay.degree(keys[0]) == 0:
            if rec:
                rec.unit = True
            return _unit_basis(ring), stats, rec
        work.append(keys, vals)
        queue = update_pairs(queue, work.leads, work.active, lay)

    while queue:
        batch, queue = select_batch(queue, max_pairs, lay)
        stats["batches"] += 1
        if lay.degree(batch[0].lcm) > lay.emax:
            raise ExponentOverflow("batch degree exceeds the exponent width")
        work.refresh_active()
        halves = []
        seen = set()
        for pr in batch:
            for idx in (pr.i, pr.j):
                h = (pr.lcm - work.leads[idx], idx)
                if h not in seen:
                    seen.add(h)
                    halves.append(h)
        monos, reducers = work.preprocess(halves)
        rows = [h for h in halves if reducers.get(h[0] + work.leads[h[1]]) != h]
        rows.sort(key=lambda h: (-(h[0] + work.leads[h[1]]), h[1], h[0]))
        mat = _Matrix(monos, list(reducers.values()), rows)
        optr, ocols, ovals, _ = _eliminate(work, mat, stats)
        out = _rows_out(optr, ocols, ovals, monos)
        zero = [r is None for r in out]
        stats["zero_rows"] += sum(zero)
        new = sorted((r for r in out if r is not None), key=lambda r: r[0][0])
        if rec is not None:
            live = [h for h, z in zip(rows, zero) if not z]
            need_monos, need_reds = _needed(work, live, reducers, monos)
            rec.batches.append(BatchRecord(
                [(pr.i, pr.j) for pr in batch], rows, zero, need_reds, need_monos,
                [r[0][0] for r in new]))
        for keys, vals in new:
            if lay.degree(keys[0]) == 0:
                if rec:
                    rec.unit = True
                return _unit_basis(ring), stats, rec
            work.append(keys, vals)
            queue = update_pairs(queue, work.leads, work.active, lay)

    work.refresh_active()
    # inputs enter unreduced, so an active lead may still be a multiple of another
    final_idx = []
    for i in sorted(work.active_idx, key=lambda i: work.leads[i]):
        if not any(lay.divides(work.leads[j], work.leads[i]) for j in final_idx):
            final_idx.append(i)
    for i in work.active_idx:
        if i not in final_idx:
            work.active[i] = False
    work.refresh_active()
    basis, final = _interreduce_work(work, final_idx, stats)
    if rec is not None:
        rec.final_indices = final_idx
        rec.final_monomials, rec.final_reducers = final
        rec.skeleton = [f.keys[0] for f in basis]
    return basis, stats, rec


def _replay(system, fld, rec: LearningRecord):
    ring, polys = _inputs(system, fld)
    stats = {"batches": 0, "zero_rows": 0, "zero_rows_skipped": 0, "rows_eliminated": 0}
    if ring is None:
        raise UnluckyPrime("system vanishes modulo p")
    lay = ring.layout
    if rec.unit:
        if not any(lay.degree(f.keys[0]) == 0 for f in polys):
            # constant reached only through elimination; recompute directly
            basis, stats, _ = _run(system, fld, 0, False)
            if [f.keys[0] for f in basis] != [0]:
                raise UnluckyPrime("basis is not the unit ideal at this prime")
            return basis, stats
        return _unit_basis(ring), stats
    if len(polys) != len(rec.input_order) or _input_order(polys) != rec.input_order:
        raise UnluckyPrime("input leading monomials differ from the record")
    inp = _Work(ring)
    order = [i for i, z in zip(rec.input_order, rec.input_zero) if not z]
    stats["zero_rows_skipped"] += sum(rec.input_zero)
    for i in order:
        inp.append(polys[i].keys, polys[i].coeffs)
    columns = sorted({k for i in order for k in polys[i].keys}, reverse=True)
    mat = _Matrix(columns, [], [(0, n) for n in range(len(order))])
    optr, ocols, ovals, _ = _eliminate(inp, mat, stats)
    out = _rows_out(optr, ocols, ovals, columns)
    if any(r is None for r in out):
        raise UnluckyPrime("unexpected zero row in the input echelon")
    new = sorted(out, key=lambda r: r[0][0])
    if [r[0][0] for r in new] != rec.input_leads:
        raise UnluckyPrime("input echelon leading monomials differ")
    work = _Work(ring)
    for keys, vals in new:
        work.append(keys, vals)

    for b in rec.batches:
        stats["batches"] += 1
        rows = [h for h, z in zip(b.rows, b.zero) if not z]
        stats["zero_rows_skipped"] += len(b.rows) - len(rows)
        mat = _Matrix(b.monomials, b.reducers, rows)
        optr, ocols, ovals, _ = _eliminate(work, mat, stats)
        out = _rows_out(optr, ocols, ovals, b.monomials)
        if any(r is None for r in out):
            raise UnluckyPrime("a row expected to survive reduced to zero")
        new = sorted(out, key=lambda r: r[0][0])
        if [r[0][0] for r in new] != b.new_leads:
            raise UnluckyPrime("new leading monomials differ from the record")
        for keys, vals in new:
            work.append(keys, vals)

    basis, _ = _interreduce_work(work, rec.final_indices, stats,
                                 (rec.final_monomials, rec.final_reducers))
    if [f.keys[0] for f in basis] != rec.skeleton:
        raise UnluckyPrime("final skeleton differs from the record")
    return basis, stats


# -- learning record serialisation ---------------------------------------

_MAGIC = b"GBLR"
_VERSION = 1


def _w_ints(buf, values, dtype="<i8"):
    arr = np.asarray(values, dtype=dtype)
    buf.write(struct.pack("<Q", len(arr)))
    buf.write(arr.tobytes())


def _r_ints(buf, dtype="<i8"):
    (n,) = struct.unpack("<Q", _read(buf, 8))
    size = np.dtype(dtype).itemsize
    return np.frombuffer(_read(buf, n * size), dtype=dtype)


def _read(buf, n):
    data = buf.read(n)
    if len(data) != n:
        raise ValueError("truncated learning record")
    return data


def _w_keys(buf, keys, layout):
    exps = [layout.unpack(k) for k in keys]
    _w_ints(buf, np.asarray(exps, dtype="<u2").reshape(-1), "<u2")


def _r_keys(buf, layout):
    flat = _r_ints(buf, "<u2").reshape(-1, layout.nvars)
    return [layout.pack(row) for row in flat.tolist()]


def _w_rows(buf, rows, layout):
    # multipliers are differences of keys and need not be monomial keys when
    # negative, but every stored multiplier is a genuine monomial
    _w_keys(buf, [m for m, _ in rows], layout)
    _w_ints(buf, [i for _, i in rows], "<i4")


def _r_rows(buf, layout):
    mults = _r_keys(buf, layout)
    idx = _r_ints(buf, "<i4").tolist()
    return list(zip(mults, idx))


def _dump_record(rec: LearningRecord, layout) -> bytes:
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<HHQB", _VERSION, rec.nvars, rec.prime, int(rec.unit)))
    buf.write(rec.system_hash.ljust(32, b"\0")[:32])
    _w_ints(buf, rec.input_order, "<i4")
    _w_ints(buf, rec.input_zero, "<u1")
    _w_keys(buf, rec.input_leads, layout)
    buf.write(struct.pack("<Q", len(rec.batches)))
    for b in rec.batches:
        _w_ints(buf, [x for pr in b.pairs for x in pr], "<i4")
        _w_rows(buf, b.rows, layout)
        _w_ints(buf, b.zero, "<u1")
        _w_rows(buf, b.reducers, layout)
        _w_keys(buf, b.monomials, layout)
        _w_keys(buf, b.new_leads, layout)
    _w_ints(buf, rec.final_indices, "<i4")
    _w_rows(buf, rec.final_reducers, layout)
    _w_keys(buf, rec.final_monomials, layout)
    _w_keys(buf, rec.skeleton, layout)
    return buf.getvalue()


def _load_record(data: bytes, layout) -> LearningRecord:
    buf = io.BytesIO(data)
    if _read(buf, 4) != _MAGIC:
        raise ValueError("not a learning record")
    version, nvars, prime, unit = struct.unpack("<HHQB", _read(buf, 13))
    if version != _VERSION:
        raise ValueError(f"unsupported learning record version {version}")
    if nvars != layout.nvars:
        raise ValueError("learning record has a different number of variables")
    rec = LearningRecord(nvars, _read(buf, 32), prime, unit=bool(unit))
    rec.input_order = _r_ints(buf, "<i4").tolist()
    rec.input_zero = [bool(z) for z in _r_ints(buf, "<u1")]
    rec.input_leads = _r_keys(buf, layout)
    (nb,) = struct.unpack("<Q", _read(buf, 8))
    for _ in range(nb):
        flat = _r_ints(buf, "<i4").tolist()
        pairs = list(zip(flat[::2], flat[1::2]))
        rows = _r_rows(buf, layout)
        zero = [bool(z) for z in _r_ints(buf, "<u1")]
        reducers = _r_rows(buf, layout)
        monos = _r_keys(buf, layout)
        leads = _r_keys(buf, layout)
        rec.batches.append(BatchRecord(pairs, rows, zero, reducers, monos, leads))
    rec.final_indices = _r_ints(buf, "<i4").tolist()
    rec.final_reducers = _r_rows(buf, layout)
    rec.final_monomials = _r_keys(buf, layout)
    rec.skeleton = _r_keys(buf, layout)
    return rec
