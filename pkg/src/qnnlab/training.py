"""Losses, metrics, gradients, and optimizers for hybrid training.

Two gradient routes are provided and checked against each other:

- central finite differences over every trainable slot (the plain oracle,
  optionally 4th-order for tight comparisons), and
- an adjoint pass that computes exact derivatives by back-propagating the
  observable through the circuit (statevector route at p = 0, density-matrix
  route under decoherence) and applying the analytic head chain rule.

Under coherent noise both routes see identical per-sample parameter draws for
a given iteration, so the finite-difference pair stays consistent.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.special import expit

from . import models as models_mod
from . import qsim
from .circuits import ComplexityReport, LayeredCircuit, complexity
from .models import ModelSpec, layout_for, unpack_head
from .noise import NoiseSpec, draw_matrix

CE_CLAMP = 1e-12


# ---------------------------------------------------------------------------
# Losses and metrics
# ---------------------------------------------------------------------------

def loss_mse(preds: np.ndarray, labels: np.ndarray) -> float:
    preds, labels = _check_lengths(preds, labels)
    return float(np.mean((preds - labels) ** 2))


def loss_ce(preds: np.ndarray, labels: np.ndarray) -> float:
    """Binary cross-entropy for (B,) predictions, normalized multiclass for (B, K)."""
    preds = np.asarray(preds, dtype=float)
    labels = np.asarray(labels)
    if preds.shape[0] != labels.shape[0]:
        raise ValueError("predictions and labels differ in length")
    if preds.ndim == 1:
        p = np.clip(preds, CE_CLAMP, 1.0 - CE_CLAMP)
        y = labels.astype(float)
        return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
    p = np.clip(preds, CE_CLAMP, None)
    total = p.sum(axis=1)
    picked = p[np.arange(p.shape[0]), labels.astype(int)]
    return float(np.mean(np.log(total) - np.log(picked)))


def _check_lengths(preds, labels):
    preds = np.asarray(preds, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if preds.shape != labels.shape:
        raise ValueError(f"shape mismatch {preds.shape} vs {labels.shape}")
    return preds, labels


def loss_value_and_output_grad(kind: str, preds: np.ndarray, labels: np.ndarray):
    """(loss, dL/dpreds) for 'mse' or 'ce'."""
    if kind == "mse":
        preds, labels = _check_lengths(preds, labels)
        b = preds.shape[0]
        return float(np.mean((preds - labels) ** 2)), 2.0 * (preds - labels) / b
    if kind == "ce":
        preds = np.asarray(preds, dtype=float)
        b = preds.shape[0]
        if preds.ndim == 1:
            y = np.asarray(labels, dtype=float)
            p = np.clip(preds, CE_CLAMP, 1.0 - CE_CLAMP)
            val = float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
            grad = (p - y) / (p * (1.0 - p)) / b
            grad[(preds <= CE_CLAMP) | (preds >= 1.0 - CE_CLAMP)] = 0.0
            return val, grad
        y = np.asarray(labels, dtype=int)
        p = np.clip(preds, CE_CLAMP, None)
        total = p.sum(axis=1)
        picked = p[np.arange(b), y]
        val = float(np.mean(np.log(total) - np.log(picked)))
        grad = np.where(preds > CE_CLAMP, 1.0, 0.0) / total[:, None]
        grad[np.arange(b), y] -= np.where(picked > CE_CLAMP, 1.0, 0.0) / picked
        grad /= b
        return val, grad
    raise ValueError(f"unknown loss {kind!r}")


def relative_error(preds: np.ndarray, labels: np.ndarray) -> float:
    """Mean |(q - y) / y|; labels must be nonzero."""
    preds, labels = _check_lengths(preds, labels)
    if np.any(labels == 0.0):
        raise ValueError("relative error undefined for zero labels")
    return float(np.mean(np.abs((preds - labels) / labels)))


def accuracy(pred_classes: np.ndarray, labels: np.ndarray) -> float:
    pred_classes = np.asarray(pred_classes)
    labels = np.asarray(labels)
    if pred_classes.shape[0] != labels.shape[0]:
        raise ValueError("predictions and labels differ in length")
    return float(np.mean(pred_classes.astype(int) == labels.astype(int)))


def classify(spec: ModelSpec, outputs: np.ndarray) -> np.ndarray:
    """Threshold single outputs at 0.5; argmax per-class outputs."""
    outputs = np.asarray(outputs)
    if outputs.ndim == 1:
        return (outputs >= 0.5).astype(int)
    return np.argmax(outputs, axis=1)


# ---------------------------------------------------------------------------
# Configuration and run reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"  # "adam" | "sgd"
    learning_rate: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    iterations: int = 300
    batch: Union[str, int] = "full"
    grad: str = "adjoint"  # "adjoint" | "central-fd"
    fd_step: float = 1e-3
    fd_order: int = 2
    loss: str = "mse"  # "mse" | "ce"
    seed: int = 0

    def __post_init__(self):
        if self.fd_step <= 0:
            raise ValueError("fd_step must be > 0")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("Adam betas must lie in (0, 1)")
        if self.grad not in ("adjoint", "central-fd"):
            raise ValueError(f"unknown gradient mode {self.grad!r}")
        if self.fd_order not in (2, 4):
            raise ValueError("fd_order must be 2 or 4")


@dataclass
class RunReport:
    loss_trace: List[float]
    final_metric: float
    metric_kind: str  # "relative-error" | "accuracy"
    complexity: ComplexityReport
    param_count: int
    wall_time: float
    seed: int
    diverged: bool = False
    final_params: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# Gradients
# ---------------------------------------------------------------------------

def batch_loss(spec, params, X, y, loss_kind, noise=None, iteration=0) -> float:
    preds = models_mod.forward_batch(spec, params, X, noise, iteration)
    if loss_kind == "mse":
        return loss_mse(preds, y)
    return loss_ce(preds, y)


def fd_gradient(spec, params, X, y, loss_kind, step=1e-3, order=2, noise=None, iteration=0) -> np.ndarray:
    """Central finite differences over every trainable slot."""
    params = np.asarray(params, dtype=float)
    grad = np.zeros_like(params)
    f = lambda p: batch_loss(spec, p, X, y, loss_kind, noise, iteration)
    for s in range(params.shape[0]):
        e = np.zeros_like(params)
        e[s] = step
        if order == 2:
            grad[s] = (f(params + e) - f(params - e)) / (2 * step)
        else:
            grad[s] = (
                f(params - 2 * e) - 8 * f(params - e) + 8 * f(params + e) - f(params + 2 * e)
            ) / (12 * step)
    return grad


def _head_backward(spec, params, m, dLdq):
    """Head chain rule: gradients of head parameters plus dL/dm (B, J, I)."""
    lay = layout_for(spec)
    head_grad = np.zeros(lay.head_size)
    if spec.kind == "ccq":
        return head_grad, dLdq[:, None, None] * 0.5
    if spec.kind == "qcl":
        a = params[lay.circuit_total]
        head_grad[0] = float(np.sum(dLdq * m[:, 0, 0]))
        return head_grad, (dLdq * a)[:, None, None]
    head = unpack_head(spec, params)
    k, j, i = spec.n_classes, spec.n_cir, spec.n_obs
    dLdq2 = dLdq.reshape(-1, k)
    a, c = head.a, head.c
    z = a[None] * (m[:, None, :, :] - c[None])
    s = expit(z)
    sp = s * (1.0 - s)
    u = np.einsum("kji,bkji->bk", head.alpha, s)
    if spec.final_sigmoid:
        a5 = np.logaddexp(0.0, head.a5_raw)
        q = expit(a5[None, :] * (u - head.c5[None, :]))
        qp = q * (1.0 - q)
        dLdu = dLdq2 * qp * a5[None, :]
        g_a5 = np.sum(dLdq2 * qp * (u - head.c5[None, :]), axis=0) * expit(head.a5_raw)
        g_c5 = np.sum(dLdq2 * qp, axis=0) * (-a5)
    else:
        dLdu = dLdq2
        g_a5 = g_c5 = None
    g_alpha = np.einsum("bk,bkji->kji", dLdu, s)
    common = np.einsum("bk,bkji->bkji", dLdu, sp) * head.alpha[None]
    g_a = np.einsum("bkji->kji", common * (m[:, None, :, :] - c[None])) * expit(head.a_raw)
    g_c = np.einsum("bkji->kji", common) * a * (-1.0) * (c * (1.0 - c))
    w = np.einsum("bkji,kji->bji", common, a)
    block = k * j * i
    head_grad[:block] = g_alpha.reshape(-1)
    head_grad[block : 2 * block] = g_a.reshape(-1)
    head_grad[2 * block : 3 * block] = g_c.reshape(-1)
    if spec.final_sigmoid:
        head_grad[3 * block : 3 * block + k] = g_a5
        head_grad[3 * block + k :] = g_c5
    return head_grad, w


def _apply_cr_block(amps, mat, control, target, n):
    """(P1 on control x mat on target) |psi>: control-0 block zeroed."""
    b = amps.shape[0]
    view = amps.reshape((b,) + (2,) * n)
    out = np.zeros_like(view)
    sel = (slice(None),) * (1 + control) + (1,)
    t_axis = 1 + (target if target < control else target - 1)
    out[sel] = qsim._apply_on_axis(view[sel], mat, t_axis)
    return out.reshape(b, -1)


def _dagger(mat: np.ndarray) -> np.ndarray:
    return np.swapaxes(mat.conj(), -1, -2)


def _adjoint_circuit_pure(circ, cp, psi_final, lam, n, grads, sl):
    """Accumulate slot gradients for one circuit on the pure-state route.

    psi_final and lam are (B, dim); lam already carries the per-sample
    measurement weights.  Both are walked backwards by unapplying gates.
    """
    if isinstance(circ, np.ndarray):
        return
    psi, lam = psi_final, lam
    gps = models_mod.circuit_gate_params(circ, cp)
    for t, gp in zip(reversed(circ.gate_sequence), reversed(gps)):
        mat = qsim.r_matrix(gp[..., 0], gp[..., 1], gp[..., 2])
        mat_h = _dagger(mat)
        if t.kind == "r":
            psi = qsim.apply_1q_batch(psi, mat_h, t.target, n)
        else:
            psi = qsim.apply_cr_batch(psi, mat_h, t.control, t.target, n)
        dmats = qsim.r_matrix_deriv(gp[..., 0], gp[..., 1], gp[..., 2])
        for s in range(3):
            dm = dmats[..., s, :, :]
            if t.kind == "r":
                dpsi = qsim.apply_1q_batch(psi, dm, t.target, n)
            else:
                dpsi = _apply_cr_block(psi, dm, t.control, t.target, n)
            term = 2.0 * np.sum(np.einsum("bi,bi->b", lam.conj(), dpsi).real)
            grads[sl.start + t.slots[s]] += term
        if t.kind == "r":
            lam = qsim.apply_1q_batch(lam, mat_h, t.target, n)
        else:
            lam = qsim.apply_cr_batch(lam, mat_h, t.control, t.target, n)


def _adjoint_circuit_density(circ, steps, obs_w, n, p, grads, sl):
    """Accumulate slot gradients for one circuit on the density route.

    steps come from evolve_density(collect=True); obs_w is the per-sample
    weighted observable (B, dim, dim), back-propagated in the Heisenberg
    picture (the depolarizing mix is self-adjoint).
    """
    if isinstance(circ, np.ndarray):
        return
    O = obs_w
    for t, gp, stack, rho_before in reversed(steps):
        if stack is not None:
            O = qsim.depolarize2_batch(O, stack, p)
        u = models_mod.gate_matrix_full_batch(t, n, gp)
        uh = _dagger(u)
        dmats = qsim.r_matrix_deriv(gp[..., 0], gp[..., 1], gp[..., 2])
        for s in range(3):
            dm = dmats[..., s, :, :]
            if t.kind == "r":
                du = models_mod._embed_1q_batch(dm, t.target, n)
            else:
                p1 = np.diag([0.0j, 1.0])
                du = models_mod._embed_pair_batch(
                    np.broadcast_to(p1, dm.shape), t.control, dm, t.target, n
                )
            a = np.matmul(du, np.matmul(rho_before, uh))
            term = 2.0 * np.sum(np.einsum("bij,bji->b", O, a).real)
            grads[sl.start + t.slots[s]] += term
        O = np.matmul(uh, np.matmul(O, u))


def adjoint_gradient(spec, params, X, y, loss_kind, noise=None, iteration=0) -> np.ndarray:
    """Exact gradient via observable back-propagation plus the head chain rule."""
    lay = layout_for(spec)
    params = np.asarray(params, dtype=float)
    amps = models_mod.encode_batch(spec, X)
    b = amps.shape[0]
    n = spec.n_total_qubits
    delta = noise.delta if noise is not None else 0.0
    p = noise.p if noise is not None else 0.0
    cparams_all = params[: lay.circuit_total]
    if delta > 0.0:
        cparams_all = cparams_all[None, :] + draw_matrix(noise, iteration, b, lay.circuit_total)

    m = np.empty((b, spec.n_cir, spec.n_obs))
    density = p > 0.0
    finals: list = []
    if density:
        rhos = np.einsum("bi,bj->bij", amps, amps.conj())
        obs_mats = [models_mod.observable_matrix(o, n) for o in spec.observables]
        for j, circ in enumerate(spec.circuits):
            cp = cparams_all[..., lay.circuit_slice(j)]
            out, steps = models_mod.evolve_density(rhos, circ, cp, n, p, collect=True)
            finals.append(steps)
            for i, mat in enumerate(obs_mats):
                m[:, j, i] = qsim.expect_matrix_batch(out, mat)
    else:
        for j, circ in enumerate(spec.circuits):
            cp = cparams_all[..., lay.circuit_slice(j)]
            out = models_mod.evolve_pure(amps, circ, cp, n)
            finals.append(out)
            for i, obs in enumerate(spec.observables):
                m[:, j, i] = models_mod.measure_pure(out, obs, n)

    preds = models_mod.head_forward(spec, params, m)
    _, dLdq = loss_value_and_output_grad(loss_kind, preds, y)
    head_grad, w = _head_backward(spec, params, m, dLdq)

    grads = np.zeros_like(params)
    grads[lay.head_slice] = head_grad
    for j, circ in enumerate(spec.circuits):
        sl = lay.circuit_slice(j)
        if sl.stop == sl.start:
            continue
        cp = cparams_all[..., sl]
        if density:
            obs_w = np.zeros((b, 2 ** n, 2 ** n), dtype=complex)
            for i, obs in enumerate(spec.observables):
                obs_w += w[:, j, i][:, None, None] * models_mod.observable_matrix(obs, n)
            _adjoint_circuit_density(circ, finals[j], obs_w, n, p, grads, sl)
        else:
            psi_final = finals[j]
            lam = np.zeros_like(psi_final)
            for i, obs in enumerate(spec.observables):
                if isinstance(obs, qsim.PauliString):
                    bp = qsim.pauli_apply_batch(psi_final, obs.letters, n)
                else:
                    bp = psi_final @ np.asarray(obs, dtype=complex).T
                lam += w[:, j, i][:, None] * bp
            _adjoint_circuit_pure(circ, cp, psi_final, lam, n, grads, sl)
    return grads


def gradient(spec, params, X, y, loss_kind, config: TrainConfig, noise=None, iteration=0) -> np.ndarray:
    if config.grad == "central-fd":
        g = fd_gradient(spec, params, X, y, loss_kind, config.fd_step, config.fd_order, noise, iteration)
    else:
        g = adjoint_gradient(spec, params, X, y, loss_kind, noise, iteration)
    if not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite gradient")
    return g


# ---------------------------------------------------------------------------
# Optimizers and the training loop
# ---------------------------------------------------------------------------

class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m: Optional[np.ndarray] = None
        self.v: Optional[np.ndarray] = None
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        return params - self.lr * grad


def make_optimizer(config: TrainConfig):
    if config.optimizer == "adam":
        return Adam(config.learning_rate, config.beta1, config.beta2, config.eps)
    if config.optimizer == "sgd":
        return SGD(config.learning_rate)
    raise ValueError(f"unknown optimizer {config.optimizer!r}")


def evaluate_metric(
    spec: ModelSpec,
    params: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    metric_kind: str,
    noise: Optional[NoiseSpec] = None,
    n_noise_draws: int = 5,
) -> float:
    """Final metric; under coherent noise the metric is averaged over fresh draws."""
    draws = n_noise_draws if (noise is not None and noise.delta > 0.0) else 1
    vals = []
    for k in range(draws):
        outputs = models_mod.forward_batch(spec, params, X, noise, iteration=1_000_000 + k)
        if metric_kind == "relative-error":
            vals.append(relative_error(outputs, y))
        elif metric_kind == "accuracy":
            vals.append(accuracy(classify(spec, outputs), y))
        else:
            raise ValueError(f"unknown metric {metric_kind!r}")
    return float(np.mean(vals))


def optimize(
    spec: ModelSpec,
    X: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    noise: Optional[NoiseSpec] = None,
    eval_X: Optional[np.ndarray] = None,
    eval_y: Optional[np.ndarray] = None,
    metric_kind: str = "relative-error",
    init: Optional[np.ndarray] = None,
) -> RunReport:
    """Iterate forward -> loss -> gradient -> step; deterministic at zero noise."""
    start = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    params = models_mod.init_params(spec, config.seed) if init is None else np.array(init, dtype=float)
    opt = make_optimizer(config)
    n_samples = np.asarray(X).shape[0]
    trace: List[float] = []
    diverged = False
    for it in range(config.iterations):
        if config.batch == "full" or config.batch >= n_samples:
            bx, by = X, y
        else:
            idx = rng.choice(n_samples, size=int(config.batch), replace=False)
            bx, by = X[idx], y[idx]
        try:
            loss = batch_loss(spec, params, bx, by, config.loss, noise, it)
            if not np.isfinite(loss):
                raise FloatingPointError("non-finite loss")
            trace.append(loss)
            g = gradient(spec, params, bx, by, config.loss, config, noise, it)
        except FloatingPointError:
            diverged = True
            break
        params = opt.step(params, g)
    ex = X if eval_X is None else eval_X
    ey = y if eval_y is None else eval_y
    metric = evaluate_metric(spec, params, ex, ey, metric_kind, noise)
    return RunReport(
        loss_trace=trace,
        final_metric=metric,
        metric_kind=metric_kind,
        complexity=complexity(spec),
        param_count=layout_for(spec).total,
        wall_time=time.perf_counter() - start,
        seed=config.seed,
        diverged=diverged,
        final_params=params,
    )
