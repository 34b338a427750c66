"""Alternating projected-gradient adversarial training of a transport map.

Each outer step runs a fixed number of discriminator ascent steps on the
mean-difference objective, then one generator descent step on the
quadratic displacement cost plus lambda times the discriminator's value
on the pushed-forward batch.  Every optimizer step is followed by the
exact projection back onto the constraint set, so both networks stay
1-Lipschitz-certified throughout training.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import nn
from .data import GroundTruthMap, ground_truth_value
from .discrete import as_cloud, wasserstein1
from .errors import ConfigError, NumericError
from .lipschitz import project_params
from .seeding import pinned_rng, spawn

METRIC_COLUMNS = ("step", "quad_cost", "ipm_estimate", "w1_exact", "holdout_mse", "lambda")

# evaluation clouds above this size skip the exact-assignment W1 column
W1_EVAL_CAP = 2000

OMEGA_HALF_WIDTH = 1.5  # working domain [-1.5, 1.5]^d for the bias-bound formulas
BOUND_SLACK = 0.1


@dataclass
class TrainConfig:
    """Everything the training loop needs; mirrored 1:1 by the config file."""

    lambda_kind: str = "fixed"  # fixed | auto (dimension-dependent growth in n)
    lambda_c: float = 10.0
    eta_d: float = 1e-3
    eta_g: float = 1e-3
    minibatch: int = 512
    n_critic: int = 5
    max_outer_steps: int = 2000
    eval_every: int = 50
    eval_size: int = 500
    L: float = 2.0
    seed: int = 0
    widths: tuple[int, ...] = (80, 80, 80)
    c_d: float = 0.0  # 0 -> bias bound from the discriminator-class formula
    c_g: float = 0.0  # 0 -> bias bound from the generator-class formula
    early_stop: bool = False
    max_seconds: float = 0.0  # 0 -> no wall-clock budget

    def __post_init__(self):
        if self.lambda_kind not in ("fixed", "auto"):
            raise ConfigError(f"lambda_kind must be fixed or auto, got {self.lambda_kind!r}")
        positive = {
            "eta_d": self.eta_d, "eta_g": self.eta_g,
            "minibatch": self.minibatch, "n_critic": self.n_critic,
            "max_outer_steps": self.max_outer_steps, "eval_every": self.eval_every,
            "eval_size": self.eval_size,
        }
        for name, value in positive.items():
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.lambda_c < 0:
            # 0 degenerates to pure quadratic-cost regression; useful as a check
            raise ConfigError(f"lambda_c must be >= 0, got {self.lambda_c}")
        if self.L < 2.0:
            raise ConfigError(f"L must be >= 2, got {self.L}")
        if self.c_d < 0 or self.c_g < 0:
            raise ConfigError("bias bounds must be >= 0 (0 means auto)")
        self.widths = tuple(int(w) for w in self.widths)


@dataclass
class LossBreakdown:
    quad_cost: float
    ipm_term: float
    disc_objective: float
    total: float


@dataclass
class TrainState:
    generator: nn.NetworkParams
    discriminator: nn.NetworkParams
    opt_g: nn.AdamState
    opt_d: nn.AdamState
    lam: float
    outer_step: int = 0
    rng: np.random.Generator | None = None
    log: list[tuple] = field(default_factory=list)


def lambda_schedule(kind: str, n: int, c: float, dim: int | None = None) -> float:
    """Penalty weight: constant, or growing in n strictly inside the allowed envelope.

    The growth must diverge yet stay o(n^(1/d)) for d > 2, o(sqrt(n)/log n)
    for d = 2 and o(sqrt(n)/sqrt(log n)) for d = 1; one extra log factor
    in each case keeps the chosen rates strictly inside those envelopes.
    """
    if kind == "fixed":
        return float(c)
    if kind != "auto":
        raise ConfigError(f"unknown lambda schedule kind {kind!r}")
    if dim is None or dim < 1:
        raise ConfigError("auto lambda schedule needs the data dimension")
    if n < 2:
        raise ConfigError("lambda schedule needs n >= 2")
    ln = math.log(n)
    if dim == 1:
        return c * math.sqrt(n) / ln
    if dim == 2:
        return c * math.sqrt(n) / ln**2
    return c * n ** (1.0 / dim) / ln


def default_bias_bounds(dim: int, L: float) -> tuple[float, float]:
    """Bias bounds making the network classes large enough on [-1.5, 1.5]^d.

    Discriminator: diam + sqrt(d)(sup|x| + 1) + slack, with the sup-norm
    bound of anchored 1-Lipschitz potentials bounded by the diameter.
    Generator: L*diam + (sqrt(d)+1)*sup|x| + sqrt(d) + slack.
    """
    rd = math.sqrt(dim)
    diam = 2.0 * OMEGA_HALF_WIDTH * rd
    sup = OMEGA_HALF_WIDTH * rd
    c_d = diam + rd * (sup + 1.0) + BOUND_SLACK
    c_g = L * diam + (rd + 1.0) * sup + rd + BOUND_SLACK
    return c_d, c_g


def init_state(cfg: TrainConfig, dim: int, n: int) -> TrainState:
    """Fresh generator/discriminator pair plus optimizer state, seeded from cfg."""
    seeds = spawn(cfg.seed, 3)
    c_d, c_g = default_bias_bounds(dim, cfg.L)
    if cfg.c_d > 0:
        c_d = cfg.c_d
    if cfg.c_g > 0:
        c_g = cfg.c_g
    gen = nn.init_network(dim, dim, cfg.widths, c_g, output_scale=cfg.L,
                          project_output=True, seed=seeds[0])
    disc = nn.init_network(dim, 1, cfg.widths, c_d, seed=seeds[1])
    lam = lambda_schedule(cfg.lambda_kind, n, cfg.lambda_c, dim)
    return TrainState(
        generator=gen,
        discriminator=disc,
        opt_g=nn.init_adam(gen, cfg.eta_g),
        opt_d=nn.init_adam(disc, cfg.eta_d),
        lam=lam,
        rng=pinned_rng(seeds[2]),
    )


def discriminator_step(state: TrainState, batch_x: np.ndarray, batch_y: np.ndarray) -> float:
    """One projected ascent step on mean D(G(x)) - mean D(y); returns that value."""
    m = batch_x.shape[0]
    pushed = nn.forward(state.generator, batch_x)
    dx, tape_x = nn.forward(state.discriminator, pushed, record=True)
    dy, tape_y = nn.forward(state.discriminator, batch_y, record=True)
    objective = float(dx.mean() - dy.mean())
    if not math.isfinite(objective):
        raise NumericError(f"discriminator objective became non-finite at step {state.outer_step}")
    grad_x, _ = nn.backward(state.discriminator, tape_x, np.full((m, 1), 1.0 / m))
    grad_y, _ = nn.backward(state.discriminator, tape_y, np.full((m, 1), -1.0 / m))
    ascent = grad_x.add(grad_y).scale(-1.0)  # Adam minimizes; flip for ascent
    nn.adam_step(state.opt_d, state.discriminator, ascent)
    project_params(state.discriminator)
    return objective


def generator_step(state: TrainState, batch_x: np.ndarray) -> LossBreakdown:
    """One projected descent step on quad cost + lambda * mean D(G(x))."""
    m = batch_x.shape[0]
    pushed, tape_g = nn.forward(state.generator, batch_x, record=True)
    dvals, tape_d = nn.forward(state.discriminator, pushed, record=True)
    diff = pushed - batch_x
    quad = float(np.einsum("ij,ij->i", diff, diff).mean())
    ipm_term = float(dvals.mean())
    total = quad + state.lam * ipm_term
    if not math.isfinite(total):
        raise NumericError(f"generator loss became non-finite at step {state.outer_step}")
    _, d_input_grad = nn.backward(state.discriminator, tape_d, np.full((m, 1), 1.0 / m))
    upstream = (2.0 / m) * diff + state.lam * d_input_grad
    grads, _ = nn.backward(state.generator, tape_g, upstream)
    nn.adam_step(state.opt_g, state.generator, grads)
    project_params(state.generator)
    return LossBreakdown(quad, ipm_term, math.nan, total)


def _evaluate(state, p, q, p_eval, q_eval, gt, eval_size):
    gen_full = nn.forward(state.generator, p)
    diff = gen_full - p
    quad = float(np.einsum("ij,ij->i", diff, diff).mean())
    ipm = float(
        nn.forward(state.discriminator, gen_full).mean()
        - nn.forward(state.discriminator, q).mean()
    )
    gen_eval = nn.forward(state.generator, p_eval)
    w1 = wasserstein1(gen_eval, q_eval) if eval_size <= W1_EVAL_CAP else math.nan
    if gt is not None:
        err = gen_eval - ground_truth_value(gt, p_eval)
        mse = float(np.einsum("ij,ij->i", err, err).mean())
    else:
        mse = math.nan
    return quad, ipm, w1, mse


def train(
    p,
    q,
    cfg: TrainConfig,
    ground_truth: GroundTruthMap | None = None,
    eval_clouds: tuple[np.ndarray, np.ndarray] | None = None,
    run_dir=None,
    resume: TrainState | None = None,
) -> TrainState:
    """Run the full alternating loop on two equal-size clouds.

    ``eval_clouds`` supplies a held-out (P_eval, Q_eval) pair for the
    periodic metrics; without it the leading ``eval_size`` training points
    stand in.  When ``run_dir`` is given, metrics and checkpoints land
    there at every evaluation.  Passing a previous ``TrainState`` as
    ``resume`` continues it for another ``max_outer_steps`` under the new
    config's learning rates.  Deterministic for fixed inputs and config.
    """
    p = as_cloud(p)
    q = as_cloud(q, p.shape[1])
    n = p.shape[0]
    if q.shape[0] != n:
        raise ValueError(f"P and Q must have equal size, got {n} and {q.shape[0]}")
    if cfg.minibatch > n:
        raise ConfigError(f"minibatch {cfg.minibatch} exceeds sample size {n}")

    if resume is not None:
        state = resume
        state.opt_g.lr = cfg.eta_g
        state.opt_d.lr = cfg.eta_d
        state.lam = lambda_schedule(cfg.lambda_kind, n, cfg.lambda_c, p.shape[1])
    else:
        state = init_state(cfg, p.shape[1], n)
    if eval_clouds is not None:
        p_eval, q_eval = as_cloud(eval_clouds[0], p.shape[1]), as_cloud(eval_clouds[1], p.shape[1])
    else:
        k = min(cfg.eval_size, n)
        p_eval, q_eval = p[:k], q[:k]
    eval_size = p_eval.shape[0]

    started = time.monotonic()
    totals: list[float] = []
    first = state.outer_step + 1
    last = state.outer_step + cfg.max_outer_steps
    for outer in range(first, last + 1):
        state.outer_step = outer
        disc_obj = math.nan
        for _ in range(cfg.n_critic):
            bx = p[state.rng.integers(0, n, size=cfg.minibatch)]
            by = q[state.rng.integers(0, n, size=cfg.minibatch)]
            disc_obj = discriminator_step(state, bx, by)
        bx = p[state.rng.integers(0, n, size=cfg.minibatch)]
        breakdown = generator_step(state, bx)
        breakdown.disc_objective = disc_obj

        if outer % cfg.eval_every == 0 or outer == last:
            quad, ipm, w1, mse = _evaluate(state, p, q, p_eval, q_eval, ground_truth, eval_size)
            state.log.append((outer, quad, ipm, w1, mse, state.lam))
            if run_dir is not None:
                write_checkpoints(state, run_dir)
                write_metrics(state.log, run_dir)
            totals.append(quad + state.lam * ipm)
            if cfg.early_stop and len(totals) > 50:
                old, new = totals[-51], totals[-1]
                if abs(new - old) < 1e-4 * max(1.0, abs(old)):
                    break
        if cfg.max_seconds > 0 and time.monotonic() - started > cfg.max_seconds:
            if run_dir is not None:
                write_checkpoints(state, run_dir)
                write_metrics(state.log, run_dir)
            break
    return state


def write_checkpoints(state: TrainState, run_dir) -> None:
    from pathlib import Path

    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    nn.save_checkpoint(state.generator, run_dir / "generator.ckpt")
    nn.save_checkpoint(state.discriminator, run_dir / "discriminator.ckpt")


def write_metrics(rows, run_dir) -> None:
    from pathlib import Path

    path = Path(run_dir) / "metrics.csv"
    lines = [",".join(METRIC_COLUMNS)]
    for row in rows:
        lines.append(",".join(_format_cell(v) for v in row))
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _format_cell(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def read_metrics(path) -> dict[str, np.ndarray]:
    """Metric log back as named columns (nan where a metric was not computed)."""
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        rows = [ln.strip().split(",") for ln in fh if ln.strip()]
    if tuple(header) != METRIC_COLUMNS:
        raise ConfigError(f"{path}: unexpected metric header {header}")
    cols = np.array([[float(c) for c in row] for row in rows], dtype=np.float64)
    if cols.size == 0:
        cols = np.empty((0, len(METRIC_COLUMNS)))
    return {name: cols[:, i] for i, name in enumerate(METRIC_COLUMNS)}


# --- flat key/value config files -------------------------------------------

def save_config(cfg: TrainConfig, path) -> None:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if f.name == "widths":
            value = ",".join(str(w) for w in value)
        elif isinstance(value, bool):
            value = int(value)
        lines.append(f"{f.name} = {value}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_config(path) -> TrainConfig:
    """Parse a flat ``key = value`` file; unknown keys are rejected."""
    known = {f.name: f for f in fields(TrainConfig)}
    overrides = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        overrides[key] = _parse_value(known[key], value, f"{path}:{lineno}")
    return TrainConfig(**overrides)


def _parse_value(f, text: str, where: str):
    try:
        if f.name == "widths":
            return tuple(int(tok) for tok in text.replace(",", " ").split())
        if f.type in ("bool", bool):
            if text.lower() in ("1", "true", "yes"):
                return True
            if text.lower() in ("0", "false", "no"):
                return False
            raise ValueError(text)
        if f.type in ("int", int):
            return int(text)
        if f.type in ("float", float):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"{where}: bad value {text!r} for {f.name}") from exc


def with_seed(cfg: TrainConfig, seed: int) -> TrainConfig:
    return replace(cfg, seed=seed)
