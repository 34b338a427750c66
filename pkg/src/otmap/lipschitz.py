"""Matrix norms, exact projections onto the constraint set, and audits.

The constraint set that makes a GroupSort network 1-Lipschitz: the first
weight matrix has row Euclidean norms at most 1 (i.e. |W|_{2,inf} <= 1),
every later weight matrix has row absolute sums at most 1 (|W|_inf <= 1),
and every bias coordinate lies in [-C, C].  Under these bounds the map is
a contraction from (R^d, |.|_2) to (R^p, |.|_inf): the first layer is
2->inf contractive and every later layer inf->inf contractive.  The audit
samples that inequality directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import NetworkParams, forward


@dataclass
class ConstraintSpec:
    first_layer_norm_bound: float = 1.0
    hidden_norm_bound: float = 1.0
    bias_bound: float = 1.0

    def __post_init__(self):
        if min(self.first_layer_norm_bound, self.hidden_norm_bound, self.bias_bound) <= 0:
            raise ValueError("constraint bounds must be positive")


@dataclass
class AuditReport:
    """Result of an empirical Lipschitz-ratio scan."""

    max_ratio: float
    argmax_x: np.ndarray
    argmax_y: np.ndarray
    samples: int
    layer_norms: list[float]  # first entry |W1|_{2,inf}, the rest |W_i|_inf
    max_bias: float
    feasible: bool  # whether the parameters satisfied the constraints going in


def norm_2_inf(w: np.ndarray) -> float:
    """Largest Euclidean row norm (the 2->inf operator norm)."""
    w = np.asarray(w, dtype=np.float64)
    return float(np.sqrt((w * w).sum(axis=1)).max())


def norm_inf(w: np.ndarray) -> float:
    """Largest absolute row sum (the inf->inf operator norm)."""
    w = np.asarray(w, dtype=np.float64)
    return float(np.abs(w).sum(axis=1).max())


def project_rows_l2(w: np.ndarray, bound: float = 1.0) -> None:
    """Scale every row with Euclidean norm beyond ``bound`` back onto the sphere.

    In place.  Rows are re-checked after scaling, so the result is exactly
    idempotent despite float rounding.
    """
    norms = np.sqrt((w * w).sum(axis=1))
    over = norms > bound
    while over.any():
        w[over] *= bound / norms[over, None]
        norms = np.sqrt((w * w).sum(axis=1))
        over = norms > bound


def project_vector_l1(v: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Exact Euclidean projection of one vector onto the l1 ball.

    Sort-and-threshold: the projection subtracts a single threshold from
    the magnitudes of the surviving coordinates and zeroes the rest, which
    preserves more of the row's structure than naive rescaling.
    """
    v = np.asarray(v, dtype=np.float64)
    a = np.abs(v)
    if a.sum() <= radius:
        return v.copy()
    u = np.sort(a)[::-1]
    css = np.cumsum(u)
    ks = np.arange(1, a.size + 1)
    rho = int(np.nonzero(u - (css - radius) / ks > 0)[0][-1])
    tau = (css[rho] - radius) / (rho + 1)
    out = np.sign(v) * np.maximum(a - tau, 0.0)
    # rounding can leave the sum a few ulps above the radius; shrink radially
    s = np.abs(out).sum()
    while s > radius:
        out *= radius / s
        s = np.abs(out).sum()
    return out


def project_rows_l1(w: np.ndarray, bound: float = 1.0, mode: str = "exact") -> None:
    """Project every row of ``w`` onto the l1 ball of the given radius, in place.

    ``mode='exact'`` is the sorting-based Euclidean projection;
    ``mode='rescale'`` divides offending rows by their l1 norm instead
    (kept for comparison, it is not the Euclidean projection).
    """
    if mode == "rescale":
        norms = np.abs(w).sum(axis=1)
        over = norms > bound
        while over.any():
            w[over] /= norms[over, None] / bound
            norms = np.abs(w).sum(axis=1)
            over = norms > bound
        return
    if mode != "exact":
        raise ValueError(f"unknown l1 projection mode {mode!r}")
    norms = np.abs(w).sum(axis=1)
    for i in np.nonzero(norms > bound)[0]:
        w[i] = project_vector_l1(w[i], bound)


def project_params(
    params: NetworkParams,
    spec: ConstraintSpec | None = None,
    hidden_mode: str = "exact",
) -> NetworkParams:
    """Project a network onto the constraint set, in place, and return it.

    First-layer rows get the row-wise Euclidean projection, later rows the
    exact l1-ball projection, biases a coordinate clamp to [-C, C].  The
    operation is exactly idempotent.
    """
    if spec is None:
        spec = ConstraintSpec(bias_bound=params.bias_bound)
    project_rows_l2(params.weights[0], spec.first_layer_norm_bound)
    for w in params.weights[1:]:
        project_rows_l1(w, spec.hidden_norm_bound, mode=hidden_mode)
    c = spec.bias_bound
    for b in params.biases:
        np.clip(b, -c, c, out=b)
    return params


def constraint_violation(params: NetworkParams, spec: ConstraintSpec | None = None) -> float:
    """Largest amount by which any constraint is exceeded (0 when feasible)."""
    if spec is None:
        spec = ConstraintSpec(bias_bound=params.bias_bound)
    worst = norm_2_inf(params.weights[0]) - spec.first_layer_norm_bound
    for w in params.weights[1:]:
        worst = max(worst, norm_inf(w) - spec.hidden_norm_bound)
    for b in params.biases:
        worst = max(worst, float(np.abs(b).max(initial=0.0)) - spec.bias_bound)
    return max(worst, 0.0)


def audit_lipschitz(
    params: NetworkParams,
    bounds: tuple[float, float] = (-1.0, 1.0),
    n_pairs: int = 10_000,
    seed: int = 0,
    chunk: int = 20_000,
) -> AuditReport:
    """Sample the Lipschitz ratio |N(x)-N(y)|_inf / |x-y|_2 over random pairs.

    Evaluates the raw network (no output scaling or ball projection), so a
    feasible parameter set must stay at ratio <= 1 up to float noise.
    Degenerate pairs with x == y are skipped.
    """
    rng = np.random.default_rng(seed)
    lo, hi = bounds
    d = params.input_dim
    max_ratio = -np.inf
    arg_x = arg_y = np.zeros(d)
    done = 0
    while done < n_pairs:
        m = min(chunk, n_pairs - done)
        x = rng.uniform(lo, hi, size=(m, d))
        y = rng.uniform(lo, hi, size=(m, d))
        dist = np.sqrt(((x - y) ** 2).sum(axis=1))
        keep = dist > 0
        if keep.any():
            fx = forward(params, x[keep], raw=True)
            fy = forward(params, y[keep], raw=True)
            ratios = np.abs(fx - fy).max(axis=1) / dist[keep]
            k = int(np.argmax(ratios))
            if ratios[k] > max_ratio:
                max_ratio = float(ratios[k])
                arg_x = x[keep][k].copy()
                arg_y = y[keep][k].copy()
        done += m
    layer_norms = [norm_2_inf(params.weights[0])] + [norm_inf(w) for w in params.weights[1:]]
    max_bias = max(float(np.abs(b).max(initial=0.0)) for b in params.biases)
    return AuditReport(
        max_ratio=max_ratio,
        argmax_x=arg_x,
        argmax_y=arg_y,
        samples=n_pairs,
        layer_norms=layer_norms,
        max_bias=max_bias,
        feasible=constraint_violation(params) <= 1e-9,
    )
