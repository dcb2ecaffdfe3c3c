"""Numeric inner loops.

Each kernel is plain numpy/Python that numba can compile. With numba
enabled (see ``_accel``) the public names are ``njit`` dispatchers; the
strategy updates additionally keep a vectorised numpy twin that serves as
the fallback path. The raw Python functions stay importable under their
underscored names so the benchmark can time both paths side by side.
"""

import numpy as np

from ._accel import NUMBA_ENABLED, jit

LOG_FLOOR = 1e-300
PERTURBATION = 1e-12
REDUCED_COST_TOL = 1e-12
MAX_PIVOTS = 100_000


# ---------------------------------------------------------------------------
# transportation simplex
# ---------------------------------------------------------------------------


def _northwest_corner(supply, demand, flow, basic):
    m = supply.shape[0]
    n = demand.shape[0]
    rs = supply.copy()
    rd = demand.copy()
    i = 0
    j = 0
    while True:
        row_exhausted = rs[i] <= rd[j]
        x = rs[i] if row_exhausted else rd[j]
        flow[i, j] = x
        basic[i, j] = True
        rs[i] -= x
        rd[j] -= x
        if i == m - 1 and j == n - 1:
            break
        if i == m - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif row_exhausted:
            i += 1
        else:
            j += 1


def _duals(cost, basic, u, v):
    m, n = cost.shape
    known_u = np.zeros(m, dtype=np.bool_)
    known_v = np.zeros(n, dtype=np.bool_)
    u[0] = 0.0
    known_u[0] = True
    remaining = m + n - 1
    while remaining > 0:
        progressed = False
        for i in range(m):
            for j in range(n):
                if not basic[i, j]:
                    continue
                if known_u[i] and not known_v[j]:
                    v[j] = cost[i, j] - u[i]
                    known_v[j] = True
                    remaining -= 1
                    progressed = True
                elif known_v[j] and not known_u[i]:
                    u[i] = cost[i, j] - v[j]
                    known_u[i] = True
                    remaining -= 1
                    progressed = True
        if not progressed:
            raise RuntimeError("basis is not a spanning tree")


def _tree_path(basic, start_row, target_col, parent):
    """Row/column node path in the basis tree; rows are 0..m-1, columns m..m+n-1."""
    m, n = basic.shape
    total = m + n
    for k in range(total):
        parent[k] = -2
    queue = np.empty(total, dtype=np.int64)
    head = 0
    tail = 0
    queue[tail] = start_row
    tail += 1
    parent[start_row] = -1
    target = m + target_col
    while head < tail:
        node = queue[head]
        head += 1
        if node == target:
            break
        if node < m:
            for j in range(n):
                if basic[node, j] and parent[m + j] == -2:
                    parent[m + j] = node
                    queue[tail] = m + j
                    tail += 1
        else:
            j = node - m
            for i in range(m):
                if basic[i, j] and parent[i] == -2:
                    parent[i] = node
                    queue[tail] = i
                    tail += 1
    # walk back from target to start, collecting cells in order
    cells_i = np.empty(total, dtype=np.int64)
    cells_j = np.empty(total, dtype=np.int64)
    count = 0
    node = target
    while parent[node] != -1:
        prev = parent[node]
        if node >= m:
            cells_i[count] = prev
            cells_j[count] = node - m
        else:
            cells_i[count] = node
            cells_j[count] = prev - m
        count += 1
        node = prev
    return cells_i[:count], cells_j[:count]


def _resolve_flows(supply, demand, basic):
    """Flows on a fixed spanning-tree basis for the given marginals (leaf elimination)."""
    m, n = basic.shape
    flow = np.zeros((m, n))
    rs = supply.copy()
    rd = demand.copy()
    open_cell = basic.copy()
    row_deg = np.zeros(m, dtype=np.int64)
    col_deg = np.zeros(n, dtype=np.int64)
    for i in range(m):
        for j in range(n):
            if open_cell[i, j]:
                row_deg[i] += 1
                col_deg[j] += 1
    for _ in range(m + n - 1):
        done = False
        for i in range(m):
            if row_deg[i] == 1:
                for j in range(n):
                    if open_cell[i, j]:
                        x = rs[i]
                        flow[i, j] = x
                        rs[i] -= x
                        rd[j] -= x
                        open_cell[i, j] = False
                        row_deg[i] -= 1
                        col_deg[j] -= 1
                        done = True
                        break
                break
        if done:
            continue
        for j in range(n):
            if col_deg[j] == 1:
                for i in range(m):
                    if open_cell[i, j]:
                        x = rd[j]
                        flow[i, j] = x
                        rs[i] -= x
                        rd[j] -= x
                        open_cell[i, j] = False
                        row_deg[i] -= 1
                        col_deg[j] -= 1
                        done = True
                        break
                break
        if not done:
            raise RuntimeError("basis is not a spanning tree")
    return flow


def _transport_simplex(supply, demand, cost):
    """Exact balanced transportation problem.

    Northwest-corner start, MODI duals, Bland's rule for both the entering
    cell (first negative reduced cost in row-major order) and the leaving
    cell (lowest row-major index among the ratio-test ties). Supplies are
    perturbed by ``PERTURBATION * (i + 1)`` with the total added to the last
    demand so no basic flow is ever exactly zero; the final flows are
    recomputed on the optimal basis with the unperturbed marginals.

    Returns ``(cost, plan, pivots)``.
    """
    m = supply.shape[0]
    n = demand.shape[0]
    s = supply.copy()
    d = demand.copy()
    bump = 0.0
    for i in range(m):
        e = PERTURBATION * (i + 1)
        s[i] += e
        bump += e
    d[n - 1] += bump

    flow = np.zeros((m, n))
    basic = np.zeros((m, n), dtype=np.bool_)
    _northwest_corner(s, d, flow, basic)

    u = np.zeros(m)
    v = np.zeros(n)
    parent = np.empty(m + n, dtype=np.int64)
    pivots = 0
    while True:
        _duals(cost, basic, u, v)
        ei = -1
        ej = -1
        for i in range(m):
            for j in range(n):
                if not basic[i, j] and cost[i, j] - u[i] - v[j] < -REDUCED_COST_TOL:
                    ei = i
                    ej = j
                    break
            if ei >= 0:
                break
        if ei < 0:
            break
        pivots += 1
        if pivots > MAX_PIVOTS:
            raise RuntimeError("transportation simplex exceeded pivot limit")
        ci, cj = _tree_path(basic, ei, ej, parent)
        # cells along the path alternate -, +, -, ... starting next to the entering cell
        theta = np.inf
        li = -1
        lj = -1
        for k in range(0, ci.shape[0], 2):
            f = flow[ci[k], cj[k]]
            idx = ci[k] * n + cj[k]
            if f < theta or (f == theta and idx < li * n + lj):
                theta = f
                li = ci[k]
                lj = cj[k]
        for k in range(ci.shape[0]):
            if k % 2 == 0:
                flow[ci[k], cj[k]] -= theta
            else:
                flow[ci[k], cj[k]] += theta
        flow[ei, ej] = theta
        basic[ei, ej] = True
        basic[li, lj] = False
        flow[li, lj] = 0.0

    plan = _resolve_flows(supply, demand, basic)
    total = 0.0
    for i in range(m):
        for j in range(n):
            if plan[i, j] < 0.0:
                plan[i, j] = 0.0
            total += plan[i, j] * cost[i, j]
    return total, plan, pivots


transport_simplex = jit(_transport_simplex)
if NUMBA_ENABLED:
    # helpers must be compiled too so the jitted entry point can call them
    _northwest_corner = jit(_northwest_corner)
    _duals = jit(_duals)
    _tree_path = jit(_tree_path)
    _resolve_flows = jit(_resolve_flows)


# ---------------------------------------------------------------------------
# Markovian strategy updates
# ---------------------------------------------------------------------------


def _update_generator_loop(G, aV, t, lam, eta):
    n = G.shape[0]
    denom = 1.0 / (eta * t) + lam
    out = np.empty((n, 2))
    for s in range(2):
        mx = -np.inf
        for y in range(n):
            p = G[y, s]
            if p < LOG_FLOOR:
                p = LOG_FLOOR
            z = (0.5 * aV[y, s] + lam * np.log(p)) / denom
            out[y, s] = z
            if z > mx:
                mx = z
        tot = 0.0
        for y in range(n):
            e = np.exp(out[y, s] - mx)
            out[y, s] = e
            tot += e
        for y in range(n):
            out[y, s] /= tot
    return out


def _update_verifier_loop(V, aG, t, lam, eta):
    n = V.shape[0]
    denom = 1.0 / (eta * t) + lam
    out = np.empty((n, 2))
    for y in range(n):
        pc = V[y, 0] if V[y, 0] > LOG_FLOOR else LOG_FLOOR
        pi = V[y, 1] if V[y, 1] > LOG_FLOOR else LOG_FLOOR
        zc = (0.5 * aG[y, 0] + lam * np.log(pc)) / denom
        zi = (0.5 * aG[y, 1] + lam * np.log(pi)) / denom
        mx = zc if zc > zi else zi
        ec = np.exp(zc - mx)
        ei = np.exp(zi - mx)
        out[y, 0] = ec / (ec + ei)
        out[y, 1] = ei / (ec + ei)
    return out


def _update_generator_numpy(G, aV, t, lam, eta):
    denom = 1.0 / (eta * t) + lam
    z = (0.5 * aV + lam * np.log(np.maximum(G, LOG_FLOOR))) / denom
    e = np.exp(z - z.max(axis=0))
    return e / e.sum(axis=0)


def _update_verifier_numpy(V, aG, t, lam, eta):
    denom = 1.0 / (eta * t) + lam
    z = (0.5 * aG + lam * np.log(np.maximum(V, LOG_FLOOR))) / denom
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


if NUMBA_ENABLED:
    update_generator_kernel = jit(_update_generator_loop)
    update_verifier_kernel = jit(_update_verifier_loop)
else:
    update_generator_kernel = _update_generator_numpy
    update_verifier_kernel = _update_verifier_numpy
