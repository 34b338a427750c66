"""Dense GroupSort feed-forward networks with exact reverse-mode gradients.

A network is a chain of affine layers; the pairwise-sorting activation is
applied to every hidden activation (never to the input, never after the
last layer).  The output can additionally be scaled by a factor ``L`` and
radially projected onto the closed Euclidean ball of radius ``L``, which
turns a 1-Lipschitz network into an L-Lipschitz map into that ball.

All arithmetic is float64; these are desk-scale networks where exactness
matters more than speed.  Inputs may be single vectors of shape ``(d,)``
or batches of shape ``(n, d)``; gradients are exact, including through
the pairwise sort and the ball projection.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

GROUPING_SIZE = 2  # pairwise sorting only; other group sizes are rejected


def _as_f64(a) -> np.ndarray:
    return np.asarray(a, dtype=np.float64)


@dataclass
class NetworkParams:
    """Weights and offsets of a GroupSort network, plus constraint metadata.

    ``weights[i]`` has shape (out_i, in_i) and ``biases[i]`` shape (out_i,).
    ``bias_bound`` is the box bound C on every offset coordinate,
    ``output_scale`` the factor L applied to the final affine output, and
    ``project_output`` whether the scaled output is projected onto the ball
    of radius L.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    bias_bound: float
    output_scale: float = 1.0
    project_output: bool = False
    grouping_size: int = GROUPING_SIZE

    def __post_init__(self):
        if self.grouping_size != GROUPING_SIZE:
            raise ValueError(f"grouping size is fixed to {GROUPING_SIZE}, got {self.grouping_size}")
        if len(self.weights) < 1 or len(self.weights) != len(self.biases):
            raise ValueError("need one bias vector per weight matrix, depth >= 1")
        if self.output_scale < 1.0:
            raise ValueError("output_scale must be >= 1")
        if self.bias_bound <= 0.0:
            raise ValueError("bias_bound must be positive")
        self.weights = [_as_f64(w) for w in self.weights]
        self.biases = [_as_f64(b) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ValueError(f"layer {i}: weight {w.shape} and bias {b.shape} do not chain")
            if i > 0 and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i}: input dim {w.shape[1]} != previous width")
            if i < len(self.weights) - 1 and w.shape[0] % GROUPING_SIZE:
                raise ValueError(f"hidden width {w.shape[0]} not divisible by {GROUPING_SIZE}")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise ValueError(f"layer {i}: non-finite parameter entries")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def widths(self) -> tuple[int, ...]:
        return tuple(w.shape[0] for w in self.weights[:-1])

    @property
    def depth(self) -> int:
        return len(self.weights)

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.bias_bound,
            self.output_scale,
            self.project_output,
        )


@dataclass
class Tape:
    """Forward intermediates needed for an exact backward pass."""

    layer_inputs: list[np.ndarray]  # input to each affine layer, shape (n, in_i)
    swaps: list[np.ndarray]  # pairwise-sort swap masks, shape (n, width/2)
    scaled: np.ndarray | None  # L * (last affine output) when the transform ran
    over: np.ndarray | None  # rows of `scaled` that were radially projected
    norms: np.ndarray | None  # Euclidean row norms of `scaled`
    apply_scale: bool
    squeeze: bool  # forward input was a single vector


@dataclass
class NetworkGrads:
    """Parameter gradients, shaped exactly like the network they came from."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def scale(self, factor: float) -> "NetworkGrads":
        return NetworkGrads([factor * w for w in self.weights], [factor * b for b in self.biases])

    def add(self, other: "NetworkGrads") -> "NetworkGrads":
        return NetworkGrads(
            [a + b for a, b in zip(self.weights, other.weights)],
            [a + b for a, b in zip(self.biases, other.biases)],
        )


def as_map(params: "NetworkParams"):
    """The network as a plain cloud-to-cloud callable."""
    return lambda x: forward(params, x)


def groupsort2(v: np.ndarray) -> np.ndarray:
    """Sort each consecutive pair of entries in decreasing order.

    Works on the last axis, which must have even length.  Ties keep the
    original order (stable), so the induced permutation is well defined.
    """
    v = _as_f64(v)
    if v.shape[-1] % 2:
        raise ValueError(f"groupsort2 needs an even dimension, got {v.shape[-1]}")
    a = v[..., 0::2]
    b = v[..., 1::2]
    out = np.empty_like(v)
    swap = a < b
    out[..., 0::2] = np.where(swap, b, a)
    out[..., 1::2] = np.where(swap, a, b)
    return out


def _sort_pairs(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    swap = a[:, 0::2] < a[:, 1::2]
    out = np.empty_like(a)
    out[:, 0::2] = np.where(swap, a[:, 1::2], a[:, 0::2])
    out[:, 1::2] = np.where(swap, a[:, 0::2], a[:, 1::2])
    return out, swap


def _route_pairs(g: np.ndarray, swap: np.ndarray) -> np.ndarray:
    # The sort is a permutation; its Jacobian transpose applies the same swap.
    out = np.empty_like(g)
    out[:, 0::2] = np.where(swap, g[:, 1::2], g[:, 0::2])
    out[:, 1::2] = np.where(swap, g[:, 0::2], g[:, 1::2])
    return out


def forward(
    params: NetworkParams,
    x: np.ndarray,
    record: bool = False,
    raw: bool = False,
):
    """Evaluate the network at ``x`` (one vector or a batch of rows).

    With ``raw=True`` the output transform (L-scaling and ball projection)
    is skipped, exposing the underlying 1-Lipschitz-class network.
    Returns ``y`` or ``(y, tape)`` when ``record`` is set.
    """
    x = _as_f64(x)
    squeeze = x.ndim == 1
    a = x.reshape(1, -1) if squeeze else x
    if a.ndim != 2 or a.shape[1] != params.input_dim:
        raise ValueError(f"input dim {a.shape[-1]} != network input dim {params.input_dim}")

    layer_inputs: list[np.ndarray] = []
    swaps: list[np.ndarray] = []
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        if i > 0:
            a, swap = _sort_pairs(a)
            if record:
                swaps.append(swap)
        if record:
            layer_inputs.append(a)
        a = a @ w.T + b

    scaled = over = norms = None
    apply_scale = not raw
    if apply_scale:
        y = params.output_scale * a
        if params.project_output:
            scaled = y
            norms = np.sqrt(np.einsum("ij,ij->i", y, y))
            over = norms > params.output_scale
            if over.any():
                y = y.copy()
                y[over] *= params.output_scale / norms[over, None]
    else:
        y = a

    if squeeze:
        y = y[0]
    if not record:
        return y
    tape = Tape(layer_inputs, swaps, scaled, over, norms, apply_scale, squeeze)
    return y, tape


def backward(params: NetworkParams, tape: Tape, upstream: np.ndarray):
    """Gradients of sum_rows <upstream_row, output_row> for a recorded forward.

    Returns ``(grads, grad_input)`` with ``grads`` shaped like ``params``.
    The ball projection is differentiated exactly: rows that were projected
    use the radial Jacobian L(I/|v| - vv^T/|v|^3) of v -> L v/|v|; interior
    rows (including |v| = L exactly) use the plain scaling branch.
    """
    upstream = _as_f64(upstream)
    if upstream.ndim == 1:
        upstream = upstream.reshape(1, -1)
    n = tape.layer_inputs[0].shape[0]
    if len(tape.layer_inputs) != params.depth or upstream.shape != (n, params.output_dim):
        raise ValueError("tape/upstream do not match the network (stale tape?)")

    g = upstream
    if tape.apply_scale:
        L = params.output_scale
        if tape.scaled is not None and tape.over is not None and tape.over.any():
            g = g.copy()
            v = tape.scaled[tape.over]
            nr = tape.norms[tape.over, None]
            go = g[tape.over]
            g[tape.over] = L * (go / nr - v * np.einsum("ij,ij->i", v, go)[:, None] / nr**3)
        g = L * g

    grad_w: list[np.ndarray] = [None] * params.depth
    grad_b: list[np.ndarray] = [None] * params.depth
    for i in range(params.depth - 1, -1, -1):
        a_in = tape.layer_inputs[i]
        if a_in.shape[1] != params.weights[i].shape[1]:
            raise ValueError(f"layer {i}: tape width {a_in.shape[1]} does not match params (stale tape?)")
        grad_w[i] = g.T @ a_in
        grad_b[i] = g.sum(axis=0)
        g = g @ params.weights[i]
        if i > 0:
            g = _route_pairs(g, tape.swaps[i - 1])

    grad_input = g[0] if tape.squeeze else g
    return NetworkGrads(grad_w, grad_b), grad_input


@dataclass
class AdamState:
    """First/second moment accumulators for one network."""

    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m_w: list[np.ndarray] = field(default_factory=list)
    v_w: list[np.ndarray] = field(default_factory=list)
    m_b: list[np.ndarray] = field(default_factory=list)
    v_b: list[np.ndarray] = field(default_factory=list)


def init_adam(params: NetworkParams, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    return AdamState(
        lr=lr, beta1=beta1, beta2=beta2, eps=eps, t=0,
        m_w=[np.zeros_like(w) for w in params.weights],
        v_w=[np.zeros_like(w) for w in params.weights],
        m_b=[np.zeros_like(b) for b in params.biases],
        v_b=[np.zeros_like(b) for b in params.biases],
    )


def adam_step(state: AdamState, params: NetworkParams, grads: NetworkGrads) -> None:
    """One in-place Adam update with bias correction."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p, g, m, v in zip(
        params.weights + params.biases,
        grads.weights + grads.biases,
        state.m_w + state.m_b,
        state.v_w + state.v_b,
    ):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


def init_network(
    input_dim: int,
    output_dim: int,
    widths: tuple[int, ...],
    bias_bound: float,
    output_scale: float = 1.0,
    project_output: bool = False,
    seed: int = 0,
) -> NetworkParams:
    """Seeded random network, already projected onto the constraint set.

    Weights start uniform in [-a, a] with a = 1/sqrt(fan_in), which keeps
    pre-projection row norms near feasibility so the projection does not
    flatten the random structure.  Deterministic for a fixed seed (PCG64).
    """
    from .seeding import pinned_rng

    for w in widths:
        if w % GROUPING_SIZE:
            raise ValueError(f"hidden width {w} not divisible by {GROUPING_SIZE}")
    rng = pinned_rng(seed)
    dims = [input_dim, *widths, output_dim]
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        a = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-a, a, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-a, a, size=fan_out))
    params = NetworkParams(weights, biases, bias_bound, output_scale, project_output)

    from .lipschitz import project_params

    project_params(params)
    return params


CHECKPOINT_MAGIC = "otmap-net v1"


def save_checkpoint(params: NetworkParams, path) -> None:
    """Flat textual record of the network; hex floats give a bit-exact round trip."""
    lines = [CHECKPOINT_MAGIC]
    lines.append(f"input_dim {params.input_dim}")
    lines.append(f"output_dim {params.output_dim}")
    lines.append("widths " + " ".join(str(w) for w in params.widths))
    lines.append(f"grouping_size {params.grouping_size}")
    lines.append(f"bias_bound {float(params.bias_bound).hex()}")
    lines.append(f"output_scale {float(params.output_scale).hex()}")
    lines.append(f"project_output {int(params.project_output)}")
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        lines.append(f"W {i} {w.shape[0]} {w.shape[1]}")
        for row in w:
            lines.append(" ".join(float(x).hex() for x in row))
        lines.append(f"b {i} {b.shape[0]}")
        lines.append(" ".join(float(x).hex() for x in b))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path) -> NetworkParams:
    with open(path, encoding="ascii") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a {CHECKPOINT_MAGIC!r} checkpoint")
    header: dict[str, str] = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("W "):
        key, _, value = lines[i].partition(" ")
        header[key] = value
        i += 1
    weights, biases = [], []
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        tag, idx, *shape = lines[i].split()
        if tag == "W":
            rows, cols = int(shape[0]), int(shape[1])
            w = np.array(
                [[float.fromhex(tok) for tok in lines[i + 1 + r].split()] for r in range(rows)]
            ).reshape(rows, cols)
            weights.append(w)
            i += 1 + rows
        elif tag == "b":
            biases.append(np.array([float.fromhex(tok) for tok in lines[i + 1].split()]))
            i += 2
        else:
            raise ValueError(f"{path}: unexpected line {lines[i]!r}")
    params = NetworkParams(
        weights,
        biases,
        bias_bound=float.fromhex(header["bias_bound"]),
        output_scale=float.fromhex(header["output_scale"]),
        project_output=bool(int(header["project_output"])),
        grouping_size=int(header.get("grouping_size", GROUPING_SIZE)),
    )
    declared = (int(header["input_dim"]), int(header["output_dim"]))
    if (params.input_dim, params.output_dim) != declared:
        raise ValueError(f"{path}: declared dims {declared} do not match stored layers")
    return params
