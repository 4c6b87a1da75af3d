"""Hot loops of the walk, over CSR adjacency arrays.

Layout shared by every kernel:

* ``indptr``, ``indices``: CSR adjacency; neighbours of ``u`` are
  ``indices[indptr[u]:indptr[u + 1]]`` sorted ascending.
* ``slot_edge[s]``: undirected edge id of adjacency slot ``s``.
* ``slot_sign[s]``: ``+1`` if the slot goes from the smaller to the larger
  endpoint, else ``-1``; the crossing number along slot ``s`` is
  ``slot_sign[s] * field[slot_edge[s]]``.
* ``field``: int64 per undirected edge ``(u, v)``, ``u < v``, holding ``c(u, v)``.

Every kernel consumes exactly one uniform per step and samples by inverse
CDF over the sorted neighbour order, so all routes through the package agree
step for step given the same uniforms.
"""

from math import exp

import numpy as np

from ._accel import jit

BUDGET = 0
TRAPPED = 1
BOUNDARY = 2
DEVIATED = 3
RANGE = 4

# largest beta * |c| accepted around the current vertex. Weights are
# shifted by the maximum, so nothing overflows; lighter weights may
# underflow, but only below exp(-700), far under the uniforms' resolution.
EXP_RANGE = 700.0

GAP_NONE = np.iinfo(np.int64).max

OK = 0
FAIL_ANTISYMMETRY = 1
FAIL_COUNTS = 2
FAIL_FLOW_RANGE = 3
FAIL_FLOW_PATTERN = 4
FAIL_RANGE = 5


@jit
def sample_slot(indptr, slot_edge, slot_sign, field, x, beta, u):
    """Adjacency slot chosen from ``x`` by quantile ``u``; -1 on range error."""
    lo = indptr[x]
    hi = indptr[x + 1]
    cmax = slot_sign[lo] * field[slot_edge[lo]]
    cmin = cmax
    for s in range(lo + 1, hi):
        c = slot_sign[s] * field[slot_edge[s]]
        if c > cmax:
            cmax = c
        if c < cmin:
            cmin = c
    if beta * max(cmax, -cmin) > EXP_RANGE:
        return -1
    total = 0.0
    for s in range(lo, hi):
        total += exp(beta * (slot_sign[s] * field[slot_edge[s]] - cmax))
    target = u * total
    acc = 0.0
    for s in range(lo, hi - 1):
        acc += exp(beta * (slot_sign[s] * field[slot_edge[s]] - cmax))
        if target < acc:
            return s
    return hi - 1


@jit
def gap_along(indptr, indices, slot_edge, slot_sign, field, seq, start, ell):
    """Circuit gap of the directed circuit ``seq[start:start + ell]``."""
    best = GAP_NONE
    for j in range(ell):
        u = seq[start + j]
        nxt = seq[start + (j + 1) % ell]
        lo = indptr[u]
        hi = indptr[u + 1]
        c_next = 0
        for s in range(lo, hi):
            if indices[s] == nxt:
                c_next = slot_sign[s] * field[slot_edge[s]]
        for s in range(lo, hi):
            if indices[s] != nxt:
                d = c_next - slot_sign[s] * field[slot_edge[s]]
                if d < best:
                    best = d
    return best


@jit
def walk(indptr, indices, slot_edge, slot_sign, field, x0, beta, uniforms, traj,
         last_visit, stop_mask, trap_eps, max_degree, plan_prefix, plan_cycle):
    """Advance one walker, mutating ``field`` and filling ``traj``.

    Stops on budget, on entering a vertex with ``stop_mask`` set, on leaving
    the plan ``plan_prefix + plan_cycle * inf`` (when one is given), or when
    the current periodic suffix is a circuit whose residual escape bound is
    at most ``trap_eps`` (``trap_eps <= 0`` disables certification).

    Returns ``(steps, code, ell, turns, gap, start)``; the last four describe
    the certified circuit ``traj[start:start + ell]`` when ``code == TRAPPED``.
    """
    n_max = uniforms.shape[0]
    for v in range(last_visit.shape[0]):
        last_visit[v] = -1
    x = x0
    traj[0] = x0
    last_visit[x0] = 0
    period = 0
    streak = 0
    n_pre = plan_prefix.shape[0]
    n_cyc = plan_cycle.shape[0]
    follow = n_pre + n_cyc > 0
    trap = trap_eps > 0.0 and beta > 0.0
    denom = 1.0 - exp(-beta)
    for n in range(n_max):
        s = sample_slot(indptr, slot_edge, slot_sign, field, x, beta, uniforms[n])
        if s < 0:
            return n, RANGE, 0, 0, 0, 0
        y = indices[s]
        field[slot_edge[s]] += slot_sign[s]
        t = n + 1
        traj[t] = y
        prev = last_visit[y]
        last_visit[y] = t
        x = y
        if follow:
            if t < n_pre:
                expected = plan_prefix[t]
            else:
                expected = plan_cycle[(t - n_pre) % n_cyc]
            if y != expected:
                return t, DEVIATED, 0, 0, 0, 0
        if stop_mask[y]:
            return t, BOUNDARY, 0, 0, 0, 0
        if trap:
            if prev >= 0:
                p = t - prev
                if p == period:
                    streak += 1
                else:
                    period = p
                    streak = 1
            else:
                period = 0
                streak = 0
            # streak >= period: the last full period has distinct vertices
            if period >= 3 and streak >= period:
                gap = gap_along(indptr, indices, slot_edge, slot_sign, field, traj,
                                t - period, period)
                bound = period * max_degree * exp(-beta * gap) / denom
                if bound <= trap_eps:
                    k = (streak + period - 1) // period
                    return t, TRAPPED, period, k, gap, t - k * period
    return n_max, BUDGET, 0, 0, 0, 0


@jit
def walk_checked(indptr, indices, slot_edge, slot_sign, slot_rev, field, x0, beta,
                 uniforms, counts):
    """Walk from a zero ``field`` and audit it after every step.

    ``counts[s]`` tallies traversals of directed slot ``s`` and serves as the
    from-definition reference for the stored field. Checked after each step:
    antisymmetry through both slot directions, agreement with the tallies,
    flows in {-1, 0, 1}, and the flow pattern (+1 at the start, -1 at the
    current vertex, 0 elsewhere; all zero when they coincide).

    Returns ``(steps_checked, failure_code)``.
    """
    n_vert = indptr.shape[0] - 1
    x = x0
    for n in range(uniforms.shape[0] + 1):
        if n > 0:
            s = sample_slot(indptr, slot_edge, slot_sign, field, x, beta, uniforms[n - 1])
            if s < 0:
                return n - 1, FAIL_RANGE
            field[slot_edge[s]] += slot_sign[s]
            counts[s] += 1
            x = indices[s]
        for u in range(n_vert):
            f = 0
            for s in range(indptr[u], indptr[u + 1]):
                c = slot_sign[s] * field[slot_edge[s]]
                r = slot_rev[s]
                c_rev = slot_sign[r] * field[slot_edge[r]]
                if c + c_rev != 0:
                    return n, FAIL_ANTISYMMETRY
                if c != counts[s] - counts[r]:
                    return n, FAIL_COUNTS
                f += c
            if f < -1 or f > 1:
                return n, FAIL_FLOW_RANGE
            if x == x0:
                expected = 0
            elif u == x0:
                expected = 1
            elif u == x:
                expected = -1
            else:
                expected = 0
            if f != expected:
                return n, FAIL_FLOW_PATTERN
    return uniforms.shape[0], OK


@jit
def walk_batch(indptr, indices, slot_edge, slot_sign, n_edges, x0, beta, uniforms, traj):
    """Independent fresh-field walks, one per row of ``uniforms``.

    Returns the number of steps completed per row (short only on range error).
    """
    n_trials = uniforms.shape[0]
    n_steps = uniforms.shape[1]
    done = np.zeros(n_trials, dtype=np.int64)
    field = np.zeros(n_edges, dtype=np.int64)
    for i in range(n_trials):
        field[:] = 0
        x = x0
        traj[i, 0] = x0
        done[i] = n_steps
        for n in range(n_steps):
            s = sample_slot(indptr, slot_edge, slot_sign, field, x, beta, uniforms[i, n])
            if s < 0:
                done[i] = n
                break
            field[slot_edge[s]] += slot_sign[s]
            x = indices[s]
            traj[i, n + 1] = x
    return done


@jit
def replay(indptr, indices, slot_edge, slot_sign, field, traj, n_steps):
    """Apply the first ``n_steps`` moves of ``traj`` to ``field``.

    Returns -1 on success or the index of the first non-adjacent move.
    """
    for n in range(n_steps):
        u = traj[n]
        v = traj[n + 1]
        hit = -1
        for s in range(indptr[u], indptr[u + 1]):
            if indices[s] == v:
                hit = s
        if hit < 0:
            return n
        field[slot_edge[hit]] += slot_sign[hit]
    return -1


@jit
def zline(beta, uniforms, traj):
    """Walk on the integers from 0 using the position-determined environment.

    On Z the crossing numbers are fixed by the position: with the walker at
    ``x > 0`` the edge back towards 0 carries crossing -1 and the edge ahead
    0, mirrored for ``x < 0``, everything 0 at the origin. Weights are
    normalised exactly as in :func:`sample_slot`, left neighbour first.
    Returns the final position.
    """
    back = exp(-beta)
    x = 0
    traj[0] = 0
    for n in range(uniforms.shape[0]):
        if x > 0:
            w_left = back
            w_right = 1.0
        elif x < 0:
            w_left = 1.0
            w_right = back
        else:
            w_left = 1.0
            w_right = 1.0
        if uniforms[n] * (w_left + w_right) < w_left:
            x -= 1
        else:
            x += 1
        traj[n + 1] = x
    return x


@jit
def zline_final(beta, uniforms):
    """:func:`zline` without the trajectory buffer."""
    back = exp(-beta)
    x = 0
    for n in range(uniforms.shape[0]):
        if x > 0:
            w_left = back
            w_right = 1.0
        elif x < 0:
            w_left = 1.0
            w_right = back
        else:
            w_left = 1.0
            w_right = 1.0
        if uniforms[n] * (w_left + w_right) < w_left:
            x -= 1
        else:
            x += 1
    return x
