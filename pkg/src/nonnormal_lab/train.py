"""Optimizers, the diagnostic training loop, spike detection and
lead-time analysis.

The loop is full batch and strictly sequential. At sampled steps it
measures the update operator actually applied at that step: the frozen
preconditioned operator for adam (using the bias-corrected preconditioner
of that step) and the augmented momentum operator for sgdm.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg, model, operators, pseudospec

SPIKE_RATIO = 1.15
SPIKE_WINDOW = 10

#: Leading sampled exceedances required before a sharpness crossing
#: counts as persistent.
PERSISTENT_SAMPLES = 3

#: Minimum trailing records before the kappa baseline is trusted.
KAPPA_BASELINE_MIN = 3


@dataclass(frozen=True)
class OptimizerState:
    """Optimizer buffers; ``precond`` records the diagonal applied last."""

    kind: str  # "adam" | "sgdm"
    t: int
    eta: float
    m: np.ndarray | None = None
    s: np.ndarray | None = None
    v: np.ndarray | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    beta: float = 0.9
    precond: np.ndarray | None = None


def init_optimizer(
    kind: str,
    n: int,
    eta: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps_adam: float = 1e-8,
    beta: float = 0.9,
) -> OptimizerState:
    if kind == "adam":
        return OptimizerState(
            "adam", 0, float(eta), m=np.zeros(n), s=np.zeros(n),
            beta1=float(beta1), beta2=float(beta2), eps_adam=float(eps_adam),
        )
    if kind == "sgdm":
        return OptimizerState("sgdm", 0, float(eta), v=np.zeros(n), beta=float(beta))
    raise ValueError(f"unknown optimizer kind {kind!r}")


def adam_step(state: OptimizerState, params: np.ndarray, grad: np.ndarray):
    """One adaptive-moment update with bias correction.

    Returns (state', params'); the effective diagonal preconditioner
    ``sqrt(s_hat) + eps`` is kept on the new state for diagnostics.
    """
    if state.kind != "adam":
        raise ValueError("adam_step needs an adam state")
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ValueError("shape mismatch between state, params and grad")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    s = state.beta2 * state.s + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    s_hat = s / (1.0 - state.beta2**t)
    precond = np.sqrt(s_hat) + state.eps_adam
    new_params = params - state.eta * m_hat / precond
    return replace(state, t=t, m=m, s=s, precond=precond), new_params


def sgdm_step(state: OptimizerState, params: np.ndarray, grad: np.ndarray):
    """One heavy-ball update: v' = beta v + g, theta' = theta - eta v'."""
    if state.kind != "sgdm":
        raise ValueError("sgdm_step needs an sgdm state")
    if params.shape != grad.shape or params.shape != state.v.shape:
        raise ValueError("shape mismatch between state, params and grad")
    v = state.beta * state.v + grad
    new_params = params - state.eta * v
    return replace(state, t=state.t + 1, v=v), new_params


def detect_spikes(loss_series, ratio: float = SPIKE_RATIO, window: int = SPIKE_WINDOW) -> list[int]:
    """Steps where the loss exceeds ``ratio`` times the trailing-window min.

    The first ``window`` steps are never flagged (incomplete window).
    """
    losses = np.asarray(loss_series, dtype=float)
    if losses.size < window + 1:
        raise ValueError(f"need at least {window + 1} loss values")
    spikes = []
    for t in range(window, losses.size):
        if losses[t] > ratio * losses[t - window : t].min():
            spikes.append(t)
    return spikes


def quasistatic_ratio(m_t: np.ndarray, m_prev: np.ndarray, eta: float) -> float:
    """Dimensionless preconditioner drift ``eta * ||dM|| / ||M||``.

    Norms are operator 2-norms of the diagonal matrices, i.e. max
    absolute entries. Values well below 1 mean the frozen-preconditioner
    linearization is trustworthy.
    """
    m_t = np.asarray(m_t, dtype=float).reshape(-1)
    m_prev = np.asarray(m_prev, dtype=float).reshape(-1)
    if m_t.shape != m_prev.shape:
        raise ValueError("preconditioner shape mismatch")
    denom = np.abs(m_t).max()
    if denom == 0.0:
        return 0.0
    return float(eta) * float(np.abs(m_t - m_prev).max()) / float(denom)


def _sgdm_block_spectrum(H: np.ndarray, eta: float, beta: float):
    """(rho, kappa_V, lambda_max_H) of the augmented momentum operator.

    Diagonalizing H = Q D Q^T and permuting coordinates turns the 2n x 2n
    operator into n independent 2x2 blocks [[1 - eta d, -eta beta], [d, beta]]
    via an orthogonal similarity, which preserves eigenvalues and the
    singular values of the unit-column eigenvector matrix. rho and
    kappa(V) assembled from the blocks therefore equal the dense values
    exactly, at a fraction of the cost.
    """
    d = np.linalg.eigvalsh(H)
    rho = 0.0
    s_max = 0.0
    s_min = np.inf
    for di in d:
        block = np.array([[1.0 - eta * di, -eta * beta], [di, beta]])
        ed = linalg.eig(block)
        rho = max(rho, ed.spectral_radius)
        sv = np.linalg.svd(ed.V, compute_uv=False)
        s_max = max(s_max, float(sv[0]))
        s_min = min(s_min, float(sv[-1]))
    kappa = s_max / s_min if s_min > 0.0 else float("inf")
    return rho, kappa, float(d[-1])


@dataclass
class DiagnosticsRecord:
    """One sampled-step row of spectral diagnostics."""

    step: int
    loss: float
    rho_J: float
    kappa_V: float
    lambda_max_H: float
    spike: bool
    quasistatic_ratio: float | None
    sharpness_threshold: float
    t_c: int | None


@dataclass(frozen=True)
class TrainConfig:
    """Everything a run needs; identical configs give bit-identical traces."""

    optimizer: str = "sgdm"
    eta: float = 0.18
    beta: float = 0.9
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    steps: int = 600
    sample_stride: int = 5
    seed: int = 0
    data_seed: int | None = None
    n_data: int = 500
    noise_scale: float = 0.1
    warmup_steps: int = 0
    warmup_eta: float = 0.01
    kappa_multiplier: float = 5.0
    kappa_window: int = 20


@dataclass
class TrainTrace:
    """Loss series, sampled diagnostics and phase structure of one run."""

    config: TrainConfig
    losses: list[float]
    records: list[DiagnosticsRecord]
    spike_steps: list[int] = field(default_factory=list)
    instability_window: tuple[int, int] | None = None
    stable_window: tuple[int, int] | None = None
    aborted: bool = False


def sharpness_threshold(config: TrainConfig) -> float:
    """Momentum-adjusted sharpness threshold 2 / ((1 + beta) eta); plain
    2 / eta for adam."""
    if config.optimizer == "sgdm":
        return 2.0 / ((1.0 + config.beta) * config.eta)
    return 2.0 / config.eta


def run_training(config: TrainConfig) -> TrainTrace:
    """Full-batch training with spectral diagnostics every sampled step.

    With a warm-start phase, diagnostic sampling starts at the switch to
    the main learning rate; warm-up steps contribute only to the loss
    series and the optimizer state. A non-finite loss aborts the loop
    with the trace so far preserved and flagged.
    """
    if config.optimizer not in ("adam", "sgdm"):
        raise ValueError(f"unknown optimizer {config.optimizer!r}")
    if config.steps < 1 or config.sample_stride < 1 or config.warmup_steps < 0:
        raise ValueError("steps and sample_stride must be positive, warmup_steps nonnegative")
    data_seed = config.seed if config.data_seed is None else config.data_seed
    dataset = model.make_dataset(data_seed, n_data=config.n_data, noise_scale=config.noise_scale)
    theta = model.init_params(config.seed).flatten()

    warm = config.warmup_steps
    first_eta = config.warmup_eta if warm > 0 else config.eta
    state = init_optimizer(
        config.optimizer, theta.size, first_eta,
        beta1=config.beta1, beta2=config.beta2, eps_adam=config.eps_adam, beta=config.beta,
    )
    threshold = sharpness_threshold(config)
    total = warm + config.steps
    losses: list[float] = []
    records: list[DiagnosticsRecord] = []
    prev_precond = None
    aborted = False

    for t in range(total):
        if t == warm and warm > 0:
            state = replace(state, eta=config.eta)
        current_loss = model.loss(theta, dataset)
        losses.append(current_loss)
        if not np.isfinite(current_loss):
            aborted = True
            losses[-1] = float(current_loss)
            break
        grad = model.gradient(theta, dataset)
        sampled = t >= warm and (t - warm) % config.sample_stride == 0
        H = model.hessian(theta, dataset) if sampled else None

        if config.optimizer == "adam":
            state, theta = adam_step(state, theta, grad)
        else:
            state, theta = sgdm_step(state, theta, grad)

        if sampled:
            if config.optimizer == "adam":
                op = operators.build_adam_frozen(H, state.precond, state.eta)
                ed = linalg.eig(op.J)
                rho, kappa = ed.spectral_radius, ed.kappa_V
                lam_max = float(np.linalg.eigvalsh(H)[-1])
                qs = None if prev_precond is None else quasistatic_ratio(state.precond, prev_precond, state.eta)
            else:
                rho, kappa, lam_max = _sgdm_block_spectrum(H, state.eta, state.beta)
                qs = None
            report = pseudospec.precursor_from_values(max(kappa, 1.0), rho)
            records.append(
                DiagnosticsRecord(
                    step=t,
                    loss=current_loss,
                    rho_J=rho,
                    kappa_V=kappa,
                    lambda_max_H=lam_max,
                    spike=False,
                    quasistatic_ratio=qs,
                    sharpness_threshold=threshold,
                    t_c=report.t_c,
                )
            )
        prev_precond = state.precond

    trace = TrainTrace(config, losses, records, aborted=aborted)
    if len(losses) >= SPIKE_WINDOW + 1:
        trace.spike_steps = detect_spikes(losses)
    if trace.spike_steps:
        boundary = trace.spike_steps[-1] + 5 * config.sample_stride
        trace.instability_window = (trace.spike_steps[0], boundary)
        trace.stable_window = (boundary, len(losses) - 1)
    spike_set = set(trace.spike_steps)
    for rec in trace.records:
        rec.spike = rec.step in spike_set
    return trace


def _first_persistent_crossing(records, threshold: float) -> int | None:
    for i, rec in enumerate(records):
        run = records[i : i + PERSISTENT_SAMPLES]
        if run and all(r.lambda_max_H > threshold for r in run):
            return rec.step
    return None


def _first_kappa_crossing(records, multiplier: float, window: int) -> int | None:
    for i, rec in enumerate(records):
        if i < KAPPA_BASELINE_MIN:
            continue
        baseline = statistics.median(r.kappa_V for r in records[max(0, i - window) : i])
        if rec.kappa_V > multiplier * baseline:
            return rec.step
    return None


def lead_time(trace: TrainTrace, multiplier: float | None = None) -> dict:
    """Per-spike advance-warning report.

    The sharpness lead counts from the first persistent threshold
    crossing of lambda_max(H) (three consecutive sampled exceedances);
    the kappa lead counts from the first sampled step where kappa(V)
    exceeds ``multiplier`` times the median of the trailing
    ``kappa_window`` sampled values. Leads clip at zero when the
    crossing arrives after the spike, and read "unobserved" when no
    diagnostics were sampled before the first spike. Also reports the
    kappa phase-separation ratio between the instability and stable
    windows.
    """
    cfg = trace.config
    mult = cfg.kappa_multiplier if multiplier is None else multiplier
    records = trace.records
    threshold = sharpness_threshold(cfg)
    report: dict = {
        "sharpness_threshold": threshold,
        "sharpness_threshold_2_over_eta": 2.0 / cfg.eta,
        "kappa_multiplier": mult,
        "kappa_window": cfg.kappa_window,
        "spikes": [],
        "separation_ratio": None,
        "sharpness_first_crossing": None,
        "kappa_first_crossing": None,
    }
    if not trace.spike_steps:
        return report

    sharp_cross = _first_persistent_crossing(records, threshold)
    kappa_cross = _first_kappa_crossing(records, mult, cfg.kappa_window)
    report["sharpness_first_crossing"] = sharp_cross
    report["kappa_first_crossing"] = kappa_cross
    observed = bool(records) and records[0].step <= trace.spike_steps[0]

    def lead(cross: int | None, spike: int):
        if not observed:
            return "unobserved"
        if cross is None:
            return None
        return max(0, spike - cross)

    for spike in trace.spike_steps:
        report["spikes"].append(
            {
                "spike_step": spike,
                "sharpness_lead": lead(sharp_cross, spike),
                "kappa_lead": lead(kappa_cross, spike),
            }
        )

    lo, hi = trace.instability_window
    unstable = [r.kappa_V for r in records if lo <= r.step <= hi]
    stable = [r.kappa_V for r in records if r.step > hi]
    if unstable and stable:
        report["separation_ratio"] = statistics.median(unstable) / statistics.median(stable)
    return report


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_trace_csv(trace: TrainTrace, path, comments=()) -> None:
    """One row per step; diagnostic columns are empty at unsampled steps."""
    by_step = {rec.step: rec for rec in trace.records}
    spikes = set(trace.spike_steps)
    with open(path, "w", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        fh.write("step,loss,rho_J,kappa_V,lambda_max_H,spike,quasistatic_ratio,t_c\n")
        for t, value in enumerate(trace.losses):
            rec = by_step.get(t)
            fields = [
                str(t),
                repr(float(value)),
                _fmt(rec.rho_J if rec else None),
                _fmt(rec.kappa_V if rec else None),
                _fmt(rec.lambda_max_H if rec else None),
                "1" if t in spikes else "0",
                _fmt(rec.quasistatic_ratio if rec else None),
                _fmt(rec.t_c if rec else None),
            ]
            fh.write(",".join(fields) + "\n")
