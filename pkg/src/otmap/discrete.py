"""Exact discrete optimal transport between equal-size point clouds.

Both clouds carry uniform weights, so the problem is an assignment: find
the permutation minimizing the mean pairwise cost.  The production solver
delegates to scipy's exact shortest-augmenting-path implementation; a
brute-force enumeration over all permutations is kept alongside as the
test oracle for small instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

BRUTE_FORCE_LIMIT = 9

COST_KINDS = ("euclidean", "squared_euclidean")


def as_cloud(points, dim: int | None = None) -> np.ndarray:
    """Validate and return a point cloud as an (n, d) float64 array."""
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ValueError(f"point cloud must be (n, d) with n >= 1, got shape {x.shape}")
    if dim is not None and x.shape[1] != dim:
        raise ValueError(f"point cloud has dim {x.shape[1]}, expected {dim}")
    if not np.isfinite(x).all():
        raise ValueError("point cloud contains non-finite entries")
    return x


@dataclass
class Matching:
    """A bijection between two clouds and its mean transport cost."""

    permutation: np.ndarray  # sigma: row i of X pairs with row sigma[i] of Y
    cost: float
    cost_kind: str


def _check_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = as_cloud(x)
    y = as_cloud(y)
    if x.shape[0] != y.shape[0]:
        raise ValueError(f"clouds must have equal size, got {x.shape[0]} and {y.shape[0]}")
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"clouds must have equal dim, got {x.shape[1]} and {y.shape[1]}")
    return x, y


def cost_matrix(x: np.ndarray, y: np.ndarray, cost_kind: str) -> np.ndarray:
    if cost_kind not in COST_KINDS:
        raise ValueError(f"cost_kind must be one of {COST_KINDS}, got {cost_kind!r}")
    diff = x[:, None, :] - y[None, :, :]
    sq = np.einsum("ijk,ijk->ij", diff, diff)
    return sq if cost_kind == "squared_euclidean" else np.sqrt(sq)


def solve_assignment(x, y, cost_kind: str = "squared_euclidean") -> Matching:
    """Cost-minimizing bijection between two equal-size clouds (exact, O(n^3))."""
    x, y = _check_pair(x, y)
    c = cost_matrix(x, y, cost_kind)
    rows, cols = linear_sum_assignment(c)
    sigma = np.empty(x.shape[0], dtype=np.int64)
    sigma[rows] = cols
    return Matching(sigma, float(c[rows, cols].sum() / x.shape[0]), cost_kind)


def brute_force_matching(x, y, cost_kind: str = "squared_euclidean") -> Matching:
    """Exhaustive minimum over all permutations; only for tiny n."""
    x, y = _check_pair(x, y)
    n = x.shape[0]
    if n > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force is capped at n <= {BRUTE_FORCE_LIMIT}, got {n}")
    c = cost_matrix(x, y, cost_kind)
    idx = np.arange(n)
    best_cost = np.inf
    best: tuple[int, ...] | None = None
    for perm in itertools.permutations(range(n)):
        total = c[idx, perm].sum()
        if total < best_cost:
            best_cost = total
            best = perm
    return Matching(np.array(best, dtype=np.int64), float(best_cost / n), cost_kind)


def matching_cost(x, y, sigma: np.ndarray, cost_kind: str) -> float:
    """Mean cost of an explicitly supplied permutation (for cross-checks)."""
    x, y = _check_pair(x, y)
    diff = x - y[np.asarray(sigma, dtype=np.int64)]
    sq = np.einsum("ij,ij->i", diff, diff)
    per_point = sq if cost_kind == "squared_euclidean" else np.sqrt(sq)
    return float(per_point.mean())


def wasserstein1(x, y) -> float:
    """Exact W1 between two equal-size uniform clouds (assignment cost)."""
    return solve_assignment(x, y, "euclidean").cost


def dual_potentials(x, y, cost: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Exact Kantorovich duals (u, v) for the assignment problem.

    Solves the assignment LP dual: maximize sum(u) + sum(v) subject to
    u_i + v_j <= c_ij, with the Euclidean cost by default or an explicit
    cost matrix.  At the optimum (sum(u) + sum(v))/n equals the exact
    transport cost.
    """
    from scipy.optimize import linprog
    from scipy.sparse import csr_matrix

    x, y = _check_pair(x, y)
    n = x.shape[0]
    c = cost_matrix(x, y, "euclidean") if cost is None else np.asarray(cost, dtype=np.float64)
    if c.shape != (n, n):
        raise ValueError(f"cost matrix shape {c.shape} does not match clouds of size {n}")
    rows = np.repeat(np.arange(n * n), 2)
    cols = np.empty(2 * n * n, dtype=np.int64)
    ii, jj = np.divmod(np.arange(n * n), n)
    cols[0::2] = ii
    cols[1::2] = n + jj
    a_ub = csr_matrix((np.ones(2 * n * n), (rows, cols)), shape=(n * n, 2 * n))
    res = linprog(
        -np.ones(2 * n), A_ub=a_ub, b_ub=c.ravel(),
        bounds=[(None, None)] * (2 * n), method="highs",
    )
    if not res.success:
        raise RuntimeError(f"dual LP failed: {res.message}")
    return res.x[:n].copy(), res.x[n:].copy()


def potential_from_duals(y, v):
    """The optimal 1-Lipschitz witness f(z) = min_j (|z - y_j| - v_j).

    A minimum of cones, so 1-Lipschitz by construction; it attains the
    exact W1 as mean f(x) - mean f(y) on the clouds the duals came from.
    """
    y = as_cloud(y)
    v = np.asarray(v, dtype=np.float64)

    def witness(z):
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        diff = z[:, None, :] - y[None, :, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        return (dist - v).min(axis=1)

    return witness


def transport_cost(transport_map, x) -> float:
    """Mean squared displacement (1/n) sum |x_i - G(x_i)|^2 of a map on a cloud."""
    x = as_cloud(x)
    gx = np.asarray(transport_map(x), dtype=np.float64)
    if gx.shape != x.shape:
        raise ValueError(f"map returned shape {gx.shape} for cloud of shape {x.shape}")
    diff = x - gx
    return float(np.einsum("ij,ij->i", diff, diff).mean())


def save_matching_csv(matching: Matching, x, y, path) -> None:
    """CSV with one (i, sigma_i, cost_i) row per point; header carries the total."""
    x, y = _check_pair(x, y)
    diff = x - y[matching.permutation]
    sq = np.einsum("ij,ij->i", diff, diff)
    per_point = sq if matching.cost_kind == "squared_euclidean" else np.sqrt(sq)
    lines = [f"# total_cost={matching.cost!r} cost_kind={matching.cost_kind} n={x.shape[0]}"]
    lines.append("i,sigma_i,cost_i")
    for i, (j, ci) in enumerate(zip(matching.permutation, per_point)):
        lines.append(f"{i},{int(j)},{float(ci)!r}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_matching_csv(path) -> Matching:
    with open(path, encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing matching header line")
    meta = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    sigma, costs = [], []
    for ln in lines[2:]:
        _, j, ci = ln.split(",")
        sigma.append(int(j))
        costs.append(float(ci))
    return Matching(np.array(sigma, dtype=np.int64), float(meta["total_cost"]), meta["cost_kind"])
