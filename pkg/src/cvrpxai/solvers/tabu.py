"""mns_lite: a compact multi-neighbourhood tabu search for the CVRP.

Each iteration scans the configured neighbourhoods (relocate, swap,
intra-route 2-opt, or-opt of 2-3 customer segments) and applies the best
admissible move, even if it worsens the solution; when every move is tabu
the best tabu move is taken.  Edges removed by a move
become tabu (cannot be re-added) for ``tabu_tenure`` iterations plus a
seeded random extra of up to half the tenure.  A tabu move is admissible
when it would beat the best solution found so far (aspiration).

The move scan is compiled with numba; the Python side only converts
between route lists and the flat arrays used by the kernel.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numba
import numpy as np

from ..core import Instance, Solution, check_solution, InvalidSolution

NEIGHBORHOODS = ("relocate", "swap", "two_opt", "or_opt")
_CODES = {name: k for k, name in enumerate(NEIGHBORHOODS)}

_EPS = 1e-9
_CHUNK = 250


@dataclass(frozen=True)
class TabuConfig:
    max_iterations: int = 2000
    tabu_tenure: int = 15
    neighborhoods: tuple[str, ...] = NEIGHBORHOODS
    seed: int = 0
    time_budget_ms: int = 600_000

    def __post_init__(self):
        object.__setattr__(self, "neighborhoods", tuple(self.neighborhoods))
        if self.max_iterations <= 0 or self.tabu_tenure <= 0 or self.time_budget_ms <= 0:
            raise ValueError("iterations, tenure and time budget must be positive")
        if self.tabu_tenure >= self.max_iterations:
            raise ValueError("tabu_tenure must be smaller than max_iterations")
        if not self.neighborhoods:
            raise ValueError("at least one neighbourhood is required")
        for nb in self.neighborhoods:
            if nb not in _CODES:
                raise ValueError(f"unknown neighbourhood {nb!r}")

    def replace(self, **kw) -> "TabuConfig":
        fields = dict(self.__dict__)
        fields.update(kw)
        return TabuConfig(**fields)


# --- kernel ----------------------------------------------------------------

@numba.njit(cache=True)
def _node(seq, length, r, p):
    # position p in the depot-extended route: 0 and length+1 are the depot
    if p == 0 or p == length[r] + 1:
        return 0
    return seq[r, p - 1]


@numba.njit(cache=True)
def _is_tabu(tabu, it, a, b):
    return a != b and tabu[a, b] > it


@numba.njit(cache=True)
def _consider(best, mv, delta, admissible, kind, x0, x1, x2, x3, x4):
    # row 0: best admissible move, row 1: best move regardless of tabu status
    for row in range(2):
        if row == 0 and not admissible:
            continue
        if delta < best[row] - 1e-12:
            best[row] = delta
            mv[row, 0] = kind
            mv[row, 1] = x0
            mv[row, 2] = x1
            mv[row, 3] = x2
            mv[row, 4] = x3
            mv[row, 5] = x4


@numba.njit(cache=True)
def _scan_relocate(D, q, Q, seq, length, load, route_of, pos_of, tabu, it, cur, best_obj, best, mv):
    n = q.shape[0] - 1
    R = length.shape[0]
    for u in range(1, n + 1):
        ru = route_of[u]
        pu = pos_of[u]
        a0 = _node(seq, length, ru, pu - 1)
        b0 = _node(seq, length, ru, pu + 1)
        rem = D[a0, b0] - D[a0, u] - D[u, b0]
        for r in range(R):
            if length[r] == 0:
                continue
            if r != ru and load[r] + q[u] > Q:
                continue
            for k in range(length[r] + 1):
                if r == ru and (k == pu - 1 or k == pu):
                    continue
                a = _node(seq, length, r, k)
                b = _node(seq, length, r, k + 1)
                delta = rem + D[a, u] + D[u, b] - D[a, b]
                tabu_move = _is_tabu(tabu, it, a0, b0) or _is_tabu(tabu, it, a, u) or _is_tabu(tabu, it, u, b)
                ok = (not tabu_move) or cur + delta < best_obj - 1e-9
                _consider(best, mv, delta, ok, 0, u, r, k, 0, 0)


@numba.njit(cache=True)
def _scan_swap(D, q, Q, seq, length, load, route_of, pos_of, tabu, it, cur, best_obj, best, mv):
    n = q.shape[0] - 1
    for u in range(1, n + 1):
        ru = route_of[u]
        au = _node(seq, length, ru, pos_of[u] - 1)
        bu = _node(seq, length, ru, pos_of[u] + 1)
        for v in range(u + 1, n + 1):
            rv = route_of[v]
            if rv == ru and abs(pos_of[u] - pos_of[v]) == 1:
                continue
            if rv != ru and (load[ru] - q[u] + q[v] > Q or load[rv] - q[v] + q[u] > Q):
                continue
            av = _node(seq, length, rv, pos_of[v] - 1)
            bv = _node(seq, length, rv, pos_of[v] + 1)
            delta = (D[au, v] + D[v, bu] - D[au, u] - D[u, bu]
                     + D[av, u] + D[u, bv] - D[av, v] - D[v, bv])
            tabu_move = (_is_tabu(tabu, it, au, v) or _is_tabu(tabu, it, v, bu)
                         or _is_tabu(tabu, it, av, u) or _is_tabu(tabu, it, u, bv))
            ok = (not tabu_move) or cur + delta < best_obj - 1e-9
            _consider(best, mv, delta, ok, 1, u, v, 0, 0, 0)


@numba.njit(cache=True)
def _scan_two_opt(D, q, Q, seq, length, load, route_of, pos_of, tabu, it, cur, best_obj, best, mv):
    R = length.shape[0]
    for r in range(R):
        L = length[r]
        for i in range(1, L):
            a = _node(seq, length, r, i - 1)
            b = _node(seq, length, r, i)
            for j in range(i + 1, L + 1):
                if i == 1 and j == L:
                    continue
                c = _node(seq, length, r, j)
                e = _node(seq, length, r, j + 1)
                delta = D[a, c] + D[b, e] - D[a, b] - D[c, e]
                tabu_move = _is_tabu(tabu, it, a, c) or _is_tabu(tabu, it, b, e)
                ok = (not tabu_move) or cur + delta < best_obj - 1e-9
                _consider(best, mv, delta, ok, 2, r, i, j, 0, 0)


@numba.njit(cache=True)
def _scan_or_opt(D, q, Q, seq, length, load, route_of, pos_of, tabu, it, cur, best_obj, best, mv):
    R = length.shape[0]
    for ru in range(R):
        L = length[ru]
        for seg in range(2, 4):
            for s in range(1, L - seg + 2):
                sf = _node(seq, length, ru, s)
                sl = _node(seq, length, ru, s + seg - 1)
                p = _node(seq, length, ru, s - 1)
                nx = _node(seq, length, ru, s + seg)
                qs = 0
                for t in range(s, s + seg):
                    qs += q[_node(seq, length, ru, t)]
                rem = D[p, nx] - D[p, sf] - D[sl, nx]
                for r in range(R):
                    if length[r] == 0:
                        continue
                    if r != ru and load[r] + qs > Q:
                        continue
                    for k in range(length[r] + 1):
                        if r == ru and s - 1 <= k <= s + seg - 1:
                            continue
                        a = _node(seq, length, r, k)
                        b = _node(seq, length, r, k + 1)
                        for rev in range(2):
                            if rev == 0:
                                delta = rem + D[a, sf] + D[sl, b] - D[a, b]
                                tabu_move = _is_tabu(tabu, it, a, sf) or _is_tabu(tabu, it, sl, b)
                            else:
                                delta = rem + D[a, sl] + D[sf, b] - D[a, b]
                                tabu_move = _is_tabu(tabu, it, a, sl) or _is_tabu(tabu, it, sf, b)
                            tabu_move = tabu_move or _is_tabu(tabu, it, p, nx)
                            ok = (not tabu_move) or cur + delta < best_obj - 1e-9
                            _consider(best, mv, delta, ok, 3, ru, s, seg, r, k * 2 + rev)


@numba.njit(cache=True)
def _reindex(seq, length, load, route_of, pos_of, q, r):
    total = 0
    for t in range(length[r]):
        c = seq[r, t]
        route_of[c] = r
        pos_of[c] = t + 1
        total += q[c]
    load[r] = total


@numba.njit(cache=True)
def _mark(tabu, a, b, until):
    if a != b:
        tabu[a, b] = until
        tabu[b, a] = until


@numba.njit(cache=True)
def _apply(mv, seq, length, load, route_of, pos_of, q, tabu, until):
    kind = mv[0]
    buf = np.empty(4, dtype=np.int64)
    if kind == 0:
        u, r, k = mv[1], mv[2], mv[3]
        ru = route_of[u]
        i = pos_of[u] - 1
        _mark(tabu, _node(seq, length, ru, i), u, until)
        _mark(tabu, u, _node(seq, length, ru, i + 2), until)
        _mark(tabu, _node(seq, length, r, k), _node(seq, length, r, k + 1), until)
        for t in range(i, length[ru] - 1):
            seq[ru, t] = seq[ru, t + 1]
        length[ru] -= 1
        if r == ru and k > i:
            k -= 1
        for t in range(length[r], k, -1):
            seq[r, t] = seq[r, t - 1]
        seq[r, k] = u
        length[r] += 1
        _reindex(seq, length, load, route_of, pos_of, q, ru)
        _reindex(seq, length, load, route_of, pos_of, q, r)
    elif kind == 1:
        u, v = mv[1], mv[2]
        ru, rv = route_of[u], route_of[v]
        pu, pv = pos_of[u], pos_of[v]
        _mark(tabu, _node(seq, length, ru, pu - 1), u, until)
        _mark(tabu, u, _node(seq, length, ru, pu + 1), until)
        _mark(tabu, _node(seq, length, rv, pv - 1), v, until)
        _mark(tabu, v, _node(seq, length, rv, pv + 1), until)
        seq[ru, pu - 1] = v
        seq[rv, pv - 1] = u
        _reindex(seq, length, load, route_of, pos_of, q, ru)
        _reindex(seq, length, load, route_of, pos_of, q, rv)
    elif kind == 2:
        r, i, j = mv[1], mv[2], mv[3]
        _mark(tabu, _node(seq, length, r, i - 1), _node(seq, length, r, i), until)
        _mark(tabu, _node(seq, length, r, j), _node(seq, length, r, j + 1), until)
        lo, hi = i - 1, j - 1
        while lo < hi:
            tmp = seq[r, lo]
            seq[r, lo] = seq[r, hi]
            seq[r, hi] = tmp
            lo += 1
            hi -= 1
        _reindex(seq, length, load, route_of, pos_of, q, r)
    else:
        ru, s, seg, r, code = mv[1], mv[2], mv[3], mv[4], mv[5]
        k, rev = code // 2, code % 2
        _mark(tabu, _node(seq, length, ru, s - 1), _node(seq, length, ru, s), until)
        _mark(tabu, _node(seq, length, ru, s + seg - 1), _node(seq, length, ru, s + seg), until)
        _mark(tabu, _node(seq, length, r, k), _node(seq, length, r, k + 1), until)
        i = s - 1
        for t in range(seg):
            buf[t] = seq[ru, i + t]
        for t in range(i, length[ru] - seg):
            seq[ru, t] = seq[ru, t + seg]
        length[ru] -= seg
        if r == ru and k > i:
            k -= seg
        for t in range(length[r] - 1, k - 1, -1):
            seq[r, t + seg] = seq[r, t]
        for t in range(seg):
            seq[r, k + t] = buf[seg - 1 - t] if rev == 1 else buf[t]
        length[r] += seg
        _reindex(seq, length, load, route_of, pos_of, q, ru)
        _reindex(seq, length, load, route_of, pos_of, q, r)


@numba.njit(cache=True)
def _search(D, q, Q, seq, length, load, route_of, pos_of, tabu, codes, tenure,
            state, best_seq, best_len, n_iter, seed):
    # state = [iteration, current objective, best objective]
    np.random.seed(seed)
    best = np.empty(2)
    mv = np.zeros((2, 6), dtype=np.int64)
    it0 = int(state[0])
    for it in range(it0, it0 + n_iter):
        best[:] = np.inf
        cur = state[1]
        for c in codes:
            if c == 0:
                _scan_relocate(D, q, Q, seq, length, load, route_of, pos_of, tabu, it, cur, state[2], best, mv)
            elif c == 1:
                _scan_swap(D, q, Q, seq, length, load, route_of, pos_of, tabu, it, cur, state[2], best, mv)
            elif c == 2:
                _scan_two_opt(D, q, Q, seq, length, load, route_of, pos_of, tabu, it, cur, state[2], best, mv)
            else:
                _scan_or_opt(D, q, Q, seq, length, load, route_of, pos_of, tabu, it, cur, state[2], best, mv)
        state[0] = it + 1
        row = 0 if best[0] < np.inf else 1
        if best[row] == np.inf:
            break
        until = it + 1 + tenure + np.random.randint(0, tenure // 2 + 1)
        _apply(mv[row], seq, length, load, route_of, pos_of, q, tabu, until)
        state[1] = cur + best[row]
        if state[1] < state[2] - _EPS:
            state[2] = state[1]
            best_seq[:, :] = seq
            best_len[:] = length


def _to_arrays(instance: Instance, routes):
    n = instance.n_customers
    R = len(routes)
    seq = np.zeros((R, n), dtype=np.int64)
    length = np.zeros(R, dtype=np.int64)
    for r, route in enumerate(routes):
        seq[r, :len(route)] = route
        length[r] = len(route)
    load = np.zeros(R, dtype=np.int64)
    route_of = np.zeros(n + 1, dtype=np.int64)
    pos_of = np.zeros(n + 1, dtype=np.int64)
    q = np.ascontiguousarray(instance.demands, dtype=np.int64)
    for r in range(R):
        _reindex(seq, length, load, route_of, pos_of, q, r)
    return seq, length, load, route_of, pos_of


def mns_lite(instance: Instance, start: Solution, cfg: TabuConfig | None = None) -> Solution:
    """Improve ``start`` by tabu search; never returns a worse solution.

    If no strictly better solution is found the start routes are returned
    unchanged (relabelled with source ``mnslite``).
    """
    cfg = cfg or TabuConfig()
    try:
        check_solution(instance, start)
    except InvalidSolution as exc:
        raise ValueError(f"infeasible start solution: {exc}") from exc
    if instance.n_customers < 2:
        return start.with_source("mnslite")

    D = np.ascontiguousarray(instance.dist, dtype=np.float64)
    q = np.ascontiguousarray(instance.demands, dtype=np.int64)
    seq, length, load, route_of, pos_of = _to_arrays(instance, start.routes)
    tabu = np.zeros((len(q), len(q)), dtype=np.int64)
    codes = np.array([_CODES[nb] for nb in cfg.neighborhoods], dtype=np.int64)
    state = np.array([0.0, start.objective, start.objective])
    best_seq, best_len = seq.copy(), length.copy()

    rng = np.random.default_rng(cfg.seed)
    deadline = time.perf_counter() + cfg.time_budget_ms / 1000.0
    done = 0
    while done < cfg.max_iterations and time.perf_counter() < deadline:
        chunk = min(_CHUNK, cfg.max_iterations - done)
        _search(D, q, instance.capacity, seq, length, load, route_of, pos_of, tabu, codes,
                cfg.tabu_tenure, state, best_seq, best_len, chunk, int(rng.integers(0, 2**31 - 1)))
        if int(state[0]) < done + chunk:
            break
        done += chunk

    if state[2] >= start.objective - _EPS:
        return start.with_source("mnslite")
    routes = [best_seq[r, :best_len[r]].tolist() for r in range(len(best_len)) if best_len[r] > 0]
    return Solution.build(instance, routes, "mnslite")
