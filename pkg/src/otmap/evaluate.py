"""Quality metrics for trained maps and an approximation-power harness.

Everything here treats the generator as a black-box map: mean squared
error against a known ground-truth map on held-out samples, exact
Wasserstein-1 gaps via the assignment oracle, and quadratic-cost
comparisons against the exact discrete matching.  The harness fits
constrained networks to known 1-Lipschitz targets by plain regression,
giving an empirical handle on how approximation quality scales with
width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import nn
from .data import GroundTruthMap, SourceSpec, ground_truth_value, sample
from .discrete import as_cloud, solve_assignment, transport_cost, wasserstein1
from .lipschitz import project_params
from .seeding import pinned_rng, spawn

COMPARE_SIZE_CAP = 2000

EVAL_REPORT_COLUMNS = (
    "n", "d", "seed", "steps",
    "holdout_mse", "w1_gen_vs_target", "quad_cost_gen", "quad_cost_matching",
)


@dataclass
class EvalReport:
    n: int
    d: int
    seed: int
    steps: int
    holdout_mse: float
    w1_gen_vs_target: float
    quad_cost_gen: float
    quad_cost_matching: float


def save_eval_report(report: EvalReport, path) -> None:
    values = [getattr(report, c) for c in EVAL_REPORT_COLUMNS]
    cells = [str(v) if isinstance(v, int) else repr(float(v)) for v in values]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(EVAL_REPORT_COLUMNS) + "\n" + ",".join(cells) + "\n")


def holdout_mse(
    transport_map,
    gt: GroundTruthMap,
    spec: SourceSpec,
    n_eval: int,
    seed: int,
) -> float:
    """Mean squared error against the ground-truth map on a fresh sample."""
    x = sample(spec, n_eval, seed)
    err = np.asarray(transport_map(x)) - ground_truth_value(gt, x)
    return float(np.einsum("ij,ij->i", err, err).mean())


def compare_to_discrete(transport_map, x, y) -> dict[str, float]:
    """Generator cost vs the exact discrete matching on one cloud pair."""
    x = as_cloud(x)
    y = as_cloud(y, x.shape[1])
    if x.shape[0] > COMPARE_SIZE_CAP:
        raise ValueError(f"comparison capped at {COMPARE_SIZE_CAP} points, got {x.shape[0]}")
    pushed = np.asarray(transport_map(x))
    return {
        "quad_cost_gen": transport_cost(transport_map, x),
        "quad_cost_matching": solve_assignment(x, y, "squared_euclidean").cost,
        "w1_gen_vs_target": wasserstein1(pushed, y),
    }


# --- known 1-Lipschitz regression targets -----------------------------------

def _affine_target(x):
    a = np.array([0.6, 0.8])
    return x[:, :2] @ a if x.shape[1] >= 2 else 0.6 * x[:, 0]


def _max2_target(x):
    return np.maximum(x[:, 0], x[:, 1])


def _max_affine_target(x):
    slopes = np.array([[0.6, 0.8], [-0.8, 0.6], [1.0, 0.0]])
    return (x[:, :2] @ slopes.T).max(axis=1)


def _norm_target(x):
    return np.sqrt(np.einsum("ij,ij->i", x, x)) - 1.0


APPROX_TARGETS = {
    "affine": _affine_target,
    "max2": _max2_target,
    "max_affine": _max_affine_target,
    "norm": _norm_target,
}


@dataclass
class ApproxProbe:
    target_kind: str
    width: int
    sup_error: float
    params: nn.NetworkParams
    steps_used: int


def _audit_target(fn, dim: int, seed: int, n_pairs: int = 4000) -> None:
    rng = pinned_rng(seed)
    x = rng.uniform(-1.0, 1.0, size=(n_pairs, dim))
    y = rng.uniform(-1.0, 1.0, size=(n_pairs, dim))
    dist = np.sqrt(((x - y) ** 2).sum(axis=1))
    keep = dist > 1e-12
    ratio = np.abs(fn(x[keep]) - fn(y[keep])) / dist[keep]
    if ratio.max() > 1.0 + 1e-9:
        raise ValueError(f"target is not 1-Lipschitz (sampled ratio {ratio.max():.6f})")


def approx_harness(
    target_kind: str,
    eps_target: float = 0.0,
    width: int = 32,
    steps: int = 800,
    seed: int = 0,
    dim: int = 2,
    n_train: int = 2048,
    minibatch: int = 256,
    lr: float = 2e-3,
    n_probe: int = 10_000,
) -> ApproxProbe:
    """Fit a constrained net to a known 1-Lipschitz target by regression.

    Squared loss, Adam, exact constraint projection after every step.  The
    reported sup error is estimated on a dense random probe cloud (it is
    an estimate, not a certificate).  Training stops early once the probe
    error drops to ``eps_target``.
    """
    if target_kind not in APPROX_TARGETS:
        raise ValueError(f"unknown target {target_kind!r}; have {sorted(APPROX_TARGETS)}")
    fn = APPROX_TARGETS[target_kind]
    seeds = spawn(seed, 3)
    _audit_target(fn, dim, seeds[0])

    rng = pinned_rng(seeds[0])
    x_train = rng.uniform(-1.0, 1.0, size=(n_train, dim))
    f_train = fn(x_train)
    x_probe = pinned_rng(seeds[1]).uniform(-1.0, 1.0, size=(n_probe, dim))
    f_probe = fn(x_probe)

    # bias bound from the scalar approximation result: K + sqrt(d)(sup|x|+1) + slack
    k_bound = float(np.abs(f_train).max()) + 1.0
    c = k_bound + math.sqrt(dim) * (math.sqrt(dim) + 1.0) + 0.1
    params = nn.init_network(dim, 1, (width, width, width), c, seed=seeds[2])
    opt = nn.init_adam(params, lr)

    m = min(minibatch, n_train)
    sup_error = math.inf
    used = 0
    for step in range(1, steps + 1):
        idx = rng.integers(0, n_train, size=m)
        bx, bf = x_train[idx], f_train[idx]
        out, tape = nn.forward(params, bx, record=True)
        resid = out[:, 0] - bf
        grads, _ = nn.backward(params, tape, (2.0 / m) * resid[:, None])
        nn.adam_step(opt, params, grads)
        project_params(params)
        used = step
        if eps_target > 0 and step % 50 == 0:
            sup_error = float(np.abs(nn.forward(params, x_probe)[:, 0] - f_probe).max())
            if sup_error <= eps_target:
                break
    sup_error = float(np.abs(nn.forward(params, x_probe)[:, 0] - f_probe).max())
    return ApproxProbe(target_kind, width, sup_error, params, used)


def _circle_directions(k: int) -> np.ndarray:
    angles = (np.arange(k) + 0.5) * (2.0 * np.pi / k)
    return np.column_stack([np.cos(angles), np.sin(angles)])


def _select_rows(indices: np.ndarray, in_width: int) -> np.ndarray:
    w = np.zeros((len(indices), in_width))
    w[np.arange(len(indices)), indices] = 1.0
    return w


def build_witness_network(
    x,
    y,
    k_directions: int = 8,
    probe: int = 4096,
    seed: int = 0,
) -> tuple[nn.NetworkParams, float]:
    """Construct a near-optimal dual potential as a constrained network (d=2).

    The Euclidean norm is under-approximated by the polygon gauge
    rho(w) = max_k u_k.w over ``k_directions`` unit directions, which a
    pairwise-sorting network evaluates exactly.  Solving the assignment
    dual under rho and wiring min_j (rho(z - y_j) - v_j) out of selector
    rows yields a feasible discriminator whose value is the exact
    rho-transport cost, hence at least cos(pi/k) times the Euclidean W1.
    Cones that are never active near the data are pruned to keep the
    network small.  Returns the network and its mean-difference value.
    """
    x = as_cloud(x)
    y = as_cloud(y, x.shape[1])
    if x.shape[1] != 2:
        raise ValueError("the witness construction is planar (d must be 2)")
    k = k_directions
    if k < 4 or k & (k - 1):
        raise ValueError(f"k_directions must be a power of two >= 4, got {k}")
    from .discrete import dual_potentials

    dirs = _circle_directions(k)
    x_proj = x @ dirs.T
    y_proj = y @ dirs.T
    cost = (x_proj[:, None, :] - y_proj[None, :, :]).max(axis=2)
    _, v = dual_potentials(x, y, cost=cost)
    v = v - 0.5 * (v.max() + v.min())  # shifts the potential by a constant only

    # keep only cones that attain the minimum somewhere near the data
    both = np.vstack([x, y])
    lo, hi = both.min(axis=0) - 0.2, both.max(axis=0) + 0.2
    zs = np.vstack([both, pinned_rng(seed).uniform(lo, hi, size=(probe, 2))])
    cone_vals = (zs @ dirs.T)[:, None, :] - y_proj[None, :, :]
    active = np.unique(np.argmin(cone_vals.max(axis=2) - v[None, :], axis=1))
    n_keep = int(active.size)
    j = 1 << (n_keep - 1).bit_length()  # pad to a power of two with repeats
    keep = np.concatenate([active, np.full(j - n_keep, active[0], dtype=np.int64)])
    yk_proj = y_proj[keep]
    vk = v[keep]

    weights: list[np.ndarray] = []
    biases: list[np.ndarray] = []
    # layer 1: each direction twice, so the first pairwise sort is a no-op
    weights.append(np.repeat(dirs, 2, axis=0))
    biases.append(np.zeros(2 * k))
    # layer 2: s[j, k] = u_k.z - u_k.y_j for every kept cone
    weights.append(_select_rows(np.tile(2 * np.arange(k), j), 2 * k))
    biases.append(-yk_proj.ravel())
    # pairwise-max tree over the k directions of every cone
    width = j * k
    while width > j:
        half = width // 2
        weights.append(_select_rows(2 * np.arange(half), width))
        # the layer that completes the cones also applies the dual offsets
        biases.append(-vk if half == j else np.zeros(half))
        width = half
    # pairwise-min tree across cones
    while width > 1:
        half = width // 2
        weights.append(_select_rows(2 * np.arange(half) + 1, width))
        biases.append(np.zeros(half))
        width = half
    bound = max(float(np.abs(b).max(initial=0.0)) for b in biases) + 0.1
    params = nn.NetworkParams(weights, biases, bias_bound=bound)
    value = float(nn.forward(params, x).mean() - nn.forward(params, y).mean())
    return params, value


def fit_ipm(
    x,
    y,
    widths: tuple[int, ...] = (80, 80, 80),
    steps: int = 50,
    lr: float = 1e-3,
    seed: int = 0,
    bias_bound: float | None = None,
    method: str = "construct",
) -> tuple[float, nn.NetworkParams]:
    """Neural estimate of W1 between two clouds, from below.

    ``method='construct'`` starts from the built dual-witness network
    (planar data) and fine-tunes it by projected ascent on the
    mean-difference objective; ``method='ascent'`` trains a fresh network
    of the given widths by ascent alone.  The best iterate is kept.  By
    duality the value can never exceed the exact assignment W1; how close
    it gets measures the tightness of the neural potential class.
    """
    x = as_cloud(x)
    y = as_cloud(y, x.shape[1])
    d = x.shape[1]
    if method == "construct":
        if d != 2:
            raise ValueError("construct method needs planar clouds; use method='ascent'")
        disc, _ = build_witness_network(x, y, seed=seed)
    elif method == "ascent":
        if bias_bound is None:
            from .train import default_bias_bounds

            bias_bound = default_bias_bounds(d, 2.0)[0]
        disc = nn.init_network(d, 1, widths, bias_bound, seed=seed)
    else:
        raise ValueError(f"unknown method {method!r}")

    opt = nn.init_adam(disc, lr)
    nx, ny = x.shape[0], y.shape[0]
    best_value = -math.inf
    best_params = disc
    for _ in range(steps):
        dx, tape_x = nn.forward(disc, x, record=True)
        dy, tape_y = nn.forward(disc, y, record=True)
        value = float(dx.mean() - dy.mean())
        if value > best_value:
            best_value = value
            best_params = disc.copy()
        gx, _ = nn.backward(disc, tape_x, np.full((nx, 1), 1.0 / nx))
        gy, _ = nn.backward(disc, tape_y, np.full((ny, 1), -1.0 / ny))
        nn.adam_step(opt, disc, gx.add(gy).scale(-1.0))
        project_params(disc)
    final = float(nn.forward(disc, x).mean() - nn.forward(disc, y).mean())
    if final >= best_value:
        return final, disc
    return best_value, best_params
