"""Forward passes of the three QNN models and their classical heads.

DQNN: amplitude-encode x once, run each variational circuit on the fresh
encoded state, measure every observable, and combine through the sigmoid head

    u = sum_{j,i} alpha_ij * sigmoid(a_ij * (<B_i>_j - c_ij)),

optionally wrapped in one more sigmoid(a5 * (u - c5)).  The constraints
a_ij > 0 and c_ij in (0, 1) are enforced by re-parameterization
(a = softplus(a_raw), c = logistic(c_raw)), so the optimizer stays
unconstrained.

CCQ: tensor-power the encoded state, run one circuit, output (<Z_1> + 1) / 2.
QCL: product-encode x into d qubits, tensor-power, output a * <Z_1>.

All trainable parameters of a model live in one flat vector: circuit slots
first (circuit by circuit), head parameters last; see ParamLayout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import expit

from . import circuits as circ_mod
from . import encoding, qsim
from .circuits import LayeredCircuit
from .noise import NoiseSpec, draw_matrix
from .qsim import DensityMatrix, PauliString, Statevector

Circuit = Union[LayeredCircuit, np.ndarray]
Observable = Union[PauliString, np.ndarray]


# ---------------------------------------------------------------------------
# Model specification and parameter layout
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    kind: str  # "dqnn" | "ccq" | "qcl"
    circuits: tuple  # LayeredCircuit templates or fixed dense unitaries
    observables: tuple  # PauliString or dense Hermitian matrices
    n_data_qubits: int
    n_copy: int = 1
    encoding: str = "amplitude"  # "amplitude" | "qcl-product" | "raw"
    pad: bool = True
    offset_feature: bool = False
    n_classes: int = 1
    final_sigmoid: bool = False

    def __post_init__(self):
        if self.kind not in ("dqnn", "ccq", "qcl"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.kind != "dqnn" and len(self.circuits) != 1:
            raise ValueError("CCQ/QCL use exactly one circuit")
        if self.kind != "dqnn" and len(self.observables) != 1:
            raise ValueError("CCQ/QCL consume exactly one observable")
        if self.kind == "dqnn" and not self.circuits:
            raise ValueError("DQNN needs at least one circuit")

    @property
    def n_total_qubits(self) -> int:
        return self.n_data_qubits * self.n_copy

    @property
    def n_cir(self) -> int:
        return len(self.circuits)

    @property
    def n_obs(self) -> int:
        return len(self.observables)


@dataclass(frozen=True)
class ParamLayout:
    """Slices of the flat parameter vector: circuit slots first, head last."""

    circuit_sizes: Tuple[int, ...]
    head_size: int

    @property
    def circuit_total(self) -> int:
        return sum(self.circuit_sizes)

    @property
    def total(self) -> int:
        return self.circuit_total + self.head_size

    def circuit_slice(self, j: int) -> slice:
        start = sum(self.circuit_sizes[:j])
        return slice(start, start + self.circuit_sizes[j])

    @property
    def head_slice(self) -> slice:
        return slice(self.circuit_total, self.total)


def layout_for(spec: ModelSpec) -> ParamLayout:
    sizes = tuple(
        c.n_slots if isinstance(c, LayeredCircuit) else 0 for c in spec.circuits
    )
    if spec.kind == "dqnn":
        block = spec.n_classes * spec.n_cir * spec.n_obs
        head = 3 * block + (2 * spec.n_classes if spec.final_sigmoid else 0)
    elif spec.kind == "qcl":
        head = 1
    else:
        head = 0
    return ParamLayout(sizes, head)


@dataclass
class DqnnHead:
    """Unpacked head parameters; effective a and c satisfy a > 0, c in (0, 1)."""

    alpha: np.ndarray  # (K, J, I)
    a_raw: np.ndarray
    c_raw: np.ndarray
    a5_raw: Optional[np.ndarray] = None  # (K,)
    c5: Optional[np.ndarray] = None

    @property
    def a(self) -> np.ndarray:
        return np.logaddexp(0.0, self.a_raw)

    @property
    def c(self) -> np.ndarray:
        return expit(self.c_raw)


def unpack_head(spec: ModelSpec, params: np.ndarray) -> Optional[DqnnHead]:
    if spec.kind != "dqnn":
        return None
    lay = layout_for(spec)
    h = params[lay.head_slice]
    k, j, i = spec.n_classes, spec.n_cir, spec.n_obs
    block = k * j * i
    alpha = h[:block].reshape(k, j, i)
    a_raw = h[block : 2 * block].reshape(k, j, i)
    c_raw = h[2 * block : 3 * block].reshape(k, j, i)
    if spec.final_sigmoid:
        a5_raw = h[3 * block : 3 * block + k]
        c5 = h[3 * block + k :]
        return DqnnHead(alpha, a_raw, c_raw, a5_raw, c5)
    return DqnnHead(alpha, a_raw, c_raw)


# ---------------------------------------------------------------------------
# Observable sampling
# ---------------------------------------------------------------------------

def sample_observables(n_qubits: int, n_obs: int, seed: int) -> List[PauliString]:
    """n_obs distinct non-identity Pauli strings, sampled uniformly."""
    n_nonid = 4 ** n_qubits - 1
    if n_obs > n_nonid:
        raise ValueError(f"at most {n_nonid} non-identity strings exist on {n_qubits} qubits")
    rng = np.random.default_rng(seed)
    if n_nonid <= 1 << 16:
        codes = rng.choice(n_nonid, size=n_obs, replace=False) + 1
    else:
        chosen: dict = {}
        while len(chosen) < n_obs:
            c = int(rng.integers(1, n_nonid + 1))
            chosen.setdefault(c, None)
        codes = np.array(list(chosen.keys()))
    letters = "IXYZ"
    out = []
    for code in codes:
        word = ""
        c = int(code)
        for _ in range(n_qubits):
            word = letters[c % 4] + word
            c //= 4
        out.append(PauliString(word))
    return out


def all_z_observable(n_qubits: int) -> PauliString:
    return PauliString("Z" * n_qubits)


def first_qubit_z(n_qubits: int) -> PauliString:
    return PauliString("Z" + "I" * (n_qubits - 1))


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def _circuit_seeds(seed: int, count: int) -> List[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def make_dqnn(
    n_qubits: int,
    n_cir: int,
    n_layers: int,
    n_obs: int = 1,
    observables: str = "all-z",  # "all-z" | "random"
    seed: int = 0,
    obs_seed: Optional[int] = None,
    n_classes: int = 1,
    final_sigmoid: bool = True,
    encoding_scheme: str = "amplitude",
    pad: bool = True,
    offset_feature: bool = False,
) -> ModelSpec:
    circs = tuple(
        circ_mod.build_dqnn_circuit(n_qubits, n_layers, s)
        for s in _circuit_seeds(seed, n_cir)
    )
    if observables == "all-z":
        obs: tuple = tuple(all_z_observable(n_qubits) for _ in range(n_obs))
        if n_obs != 1:
            raise ValueError("all-z observable set is a single string; use observables='random'")
    elif observables == "random":
        obs = tuple(sample_observables(n_qubits, n_obs, obs_seed if obs_seed is not None else seed))
    else:
        raise ValueError(f"unknown observable choice {observables!r}")
    return ModelSpec(
        "dqnn",
        circs,
        obs,
        n_data_qubits=n_qubits,
        encoding=encoding_scheme,
        pad=pad,
        offset_feature=offset_feature,
        n_classes=n_classes,
        final_sigmoid=final_sigmoid,
    )


def make_ccq(
    n_data_qubits: int,
    n_copy: int,
    n_layers: int,
    seed: int = 0,
    pad: bool = True,
    offset_feature: bool = False,
) -> ModelSpec:
    n_tot = n_data_qubits * n_copy
    circ = circ_mod.build_ccq_circuit(n_tot, n_layers, _circuit_seeds(seed, 1)[0])
    return ModelSpec(
        "ccq",
        (circ,),
        (first_qubit_z(n_tot),),
        n_data_qubits=n_data_qubits,
        n_copy=n_copy,
        encoding="amplitude",
        pad=pad,
        offset_feature=offset_feature,
    )


def make_qcl(d_features: int, n_copy: int, n_layers: int, seed: int = 0) -> ModelSpec:
    n_tot = d_features * n_copy
    circ = circ_mod.build_qcl_circuit(n_tot, n_layers, _circuit_seeds(seed, 1)[0])
    return ModelSpec(
        "qcl",
        (circ,),
        (first_qubit_z(n_tot),),
        n_data_qubits=d_features,
        n_copy=n_copy,
        encoding="qcl-product",
    )


def init_params(spec: ModelSpec, seed: int) -> np.ndarray:
    """Uniform(0, 2pi) circuit angles; alpha ~ N(0,1); a_raw = c_raw = 0."""
    rng = np.random.default_rng(seed)
    lay = layout_for(spec)
    params = np.zeros(lay.total)
    params[: lay.circuit_total] = rng.uniform(0.0, 2 * np.pi, lay.circuit_total)
    if spec.kind == "dqnn":
        block = spec.n_classes * spec.n_cir * spec.n_obs
        h = lay.circuit_total
        params[h : h + block] = rng.normal(size=block)  # alpha
        # a_raw, c_raw stay 0 -> a = ln 2, c = 0.5
        if spec.final_sigmoid:
            params[h + 3 * block + spec.n_classes :] = 0.5  # c5
    elif spec.kind == "qcl":
        params[lay.circuit_total] = rng.normal()
    return params


# ---------------------------------------------------------------------------
# Batched state preparation and evolution
# ---------------------------------------------------------------------------

def encode_batch(spec: ModelSpec, X: np.ndarray) -> np.ndarray:
    """Input rows to pure amplitudes (batch, 2**n_total)."""
    if spec.encoding == "raw":
        amps = np.asarray(X, dtype=complex)
        if amps.ndim == 1:
            amps = amps[None, :]
        if amps.shape[1] != 2 ** spec.n_total_qubits:
            raise ValueError("raw states do not match the register size")
        return amps
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if spec.offset_feature:
        X = np.concatenate([X, np.ones((X.shape[0], 1))], axis=1)
    if spec.encoding == "amplitude":
        amps = encoding.amplitude_encode_batch(X, pad=spec.pad)
    elif spec.encoding == "qcl-product":
        amps = encoding.qcl_encode_batch(X)
    else:
        raise ValueError(f"unknown encoding {spec.encoding!r}")
    expected = 2 ** spec.n_data_qubits
    if amps.shape[1] != expected:
        raise ValueError(
            f"encoded dimension {amps.shape[1]} does not match {spec.n_data_qubits} data qubits"
        )
    if spec.n_copy > 1:
        base = amps
        for _ in range(spec.n_copy - 1):
            amps = np.einsum("bi,bj->bij", amps, base).reshape(amps.shape[0], -1)
    if spec.n_total_qubits > encoding.MAX_REGISTER:
        raise ValueError("register exceeds the 15-qubit limit")
    return amps


def circuit_gate_params(circ: LayeredCircuit, cparams: np.ndarray) -> List[np.ndarray]:
    """Per-gate angle triples; cparams is (slots,) or (batch, slots)."""
    return [cparams[..., list(t.slots)] for t in circ.gate_sequence]


def evolve_pure(amps: np.ndarray, circ: Circuit, cparams: np.ndarray, n: int) -> np.ndarray:
    """Run one circuit on a (batch, dim) block; cparams may carry a batch axis."""
    if isinstance(circ, np.ndarray):
        return amps @ circ.T
    out = amps
    for t, gp in zip(circ.gate_sequence, circuit_gate_params(circ, cparams)):
        mat = qsim.r_matrix(gp[..., 0], gp[..., 1], gp[..., 2])
        if t.kind == "r":
            out = qsim.apply_1q_batch(out, mat, t.target, n)
        else:
            out = qsim.apply_cr_batch(out, mat, t.control, t.target, n)
    return out


def gate_matrix_full_batch(t, n: int, gp: np.ndarray) -> np.ndarray:
    """Dense embedded unitary for a template; gp (..., 3) gives (..., dim, dim)."""
    r = qsim.r_matrix(gp[..., 0], gp[..., 1], gp[..., 2])
    if t.kind == "r":
        return _embed_1q_batch(r, t.target, n)
    p0 = np.diag([1.0 + 0j, 0.0])
    p1 = np.diag([0.0j, 1.0])
    low = _embed_pair_batch(np.broadcast_to(p0, r.shape), t.control, None, t.target, n)
    high = _embed_pair_batch(np.broadcast_to(p1, r.shape), t.control, r, t.target, n)
    return low + high


def _kron_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    na, nb = a.shape[-1], b.shape[-1]
    out = np.einsum("...ij,...kl->...ikjl", a, b)
    return out.reshape(a.shape[:-2] + (na * nb, na * nb))


def _embed_1q_batch(mat: np.ndarray, q: int, n: int) -> np.ndarray:
    eye = np.eye(2, dtype=complex)
    out = np.ones(mat.shape[:-2] + (1, 1), dtype=complex)
    for k in range(n):
        out = _kron_batch(out, mat if k == q else np.broadcast_to(eye, mat.shape))
    return out


def _embed_pair_batch(a: np.ndarray, qa: int, b, qb: int, n: int) -> np.ndarray:
    eye = np.eye(2, dtype=complex)
    out = np.ones(a.shape[:-2] + (1, 1), dtype=complex)
    for k in range(n):
        if k == qa:
            f = a
        elif k == qb and b is not None:
            f = b
        else:
            f = np.broadcast_to(eye, a.shape)
        out = _kron_batch(out, f)
    return out


def evolve_density(
    rhos: np.ndarray,
    circ: Circuit,
    cparams: np.ndarray,
    n: int,
    p: float,
    collect: bool = False,
):
    """Run one circuit on (batch, dim, dim) density blocks with decoherence p.

    Returns the final block, or (final, steps) when collect is set, where each
    step records (template, gate params, pauli stack or None, rho before).
    """
    if isinstance(circ, np.ndarray):
        out = qsim.conjugate_batch(rhos, circ)
        return (out, []) if collect else out
    out = rhos
    steps = []
    for t, gp in zip(circ.gate_sequence, circuit_gate_params(circ, cparams)):
        u = gate_matrix_full_batch(t, n, gp)
        stack = None
        before = out
        out = qsim.conjugate_batch(out, u)
        if t.kind == "cr" and p > 0.0:
            stack = qsim.two_qubit_pauli_stack(t.control, t.target, n)
            out = qsim.depolarize2_batch(out, stack, p)
        if collect:
            steps.append((t, gp, stack, before))
    return (out, steps) if collect else out


def observable_matrix(obs: Observable, n: int) -> np.ndarray:
    if isinstance(obs, PauliString):
        return obs.matrix()
    return np.asarray(obs, dtype=complex)


def measure_pure(amps: np.ndarray, obs: Observable, n: int) -> np.ndarray:
    if isinstance(obs, PauliString):
        if len(obs) != n:
            raise ValueError("observable length does not match register")
        return qsim.expect_pauli_batch(amps, obs.letters, n)
    mat = np.asarray(obs, dtype=complex)
    vals = np.einsum("bi,ij,bj->b", amps.conj(), mat, amps)
    return vals.real


def measurements_batch(
    spec: ModelSpec,
    params: np.ndarray,
    X: np.ndarray,
    noise: Optional[NoiseSpec] = None,
    iteration: int = 0,
) -> np.ndarray:
    """<B_i> for every (sample, circuit, observable): shape (batch, n_cir, n_obs)."""
    lay = layout_for(spec)
    params = np.asarray(params, dtype=float)
    amps = encode_batch(spec, X)
    b = amps.shape[0]
    n = spec.n_total_qubits
    delta = noise.delta if noise is not None else 0.0
    p = noise.p if noise is not None else 0.0
    cparams_all = params[: lay.circuit_total]
    if delta > 0.0:
        cparams_all = cparams_all[None, :] + draw_matrix(noise, iteration, b, lay.circuit_total)
    m = np.empty((b, spec.n_cir, spec.n_obs))
    if p > 0.0:
        rhos = np.einsum("bi,bj->bij", amps, amps.conj())
        for j, circ in enumerate(spec.circuits):
            cp = cparams_all[..., lay.circuit_slice(j)]
            out = evolve_density(rhos, circ, cp, n, p)
            for i, obs in enumerate(spec.observables):
                vals = qsim.expect_matrix_batch(out, observable_matrix(obs, n))
                m[:, j, i] = np.clip(vals, -1.0, 1.0) if isinstance(obs, PauliString) else vals
    else:
        for j, circ in enumerate(spec.circuits):
            cp = cparams_all[..., lay.circuit_slice(j)]
            out = evolve_pure(amps, circ, cp, n)
            for i, obs in enumerate(spec.observables):
                m[:, j, i] = measure_pure(out, obs, n)
    return m


# ---------------------------------------------------------------------------
# Heads and full forward passes
# ---------------------------------------------------------------------------

def head_forward(spec: ModelSpec, params: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Combine measurements (batch, n_cir, n_obs) into outputs (batch[, n_classes])."""
    if spec.kind == "ccq":
        return (m[:, 0, 0] + 1.0) / 2.0
    if spec.kind == "qcl":
        a = params[layout_for(spec).circuit_total]
        return a * m[:, 0, 0]
    head = unpack_head(spec, params)
    a, c = head.a, head.c
    s = expit(a[None] * (m[:, None, :, :] - c[None]))  # (B, K, J, I)
    u = np.einsum("kji,bkji->bk", head.alpha, s)
    if spec.final_sigmoid:
        a5 = np.logaddexp(0.0, head.a5_raw)
        q = expit(a5[None, :] * (u - head.c5[None, :]))
    else:
        q = u
    return q[:, 0] if spec.n_classes == 1 else q


def forward_batch(
    spec: ModelSpec,
    params: np.ndarray,
    X: np.ndarray,
    noise: Optional[NoiseSpec] = None,
    iteration: int = 0,
) -> np.ndarray:
    m = measurements_batch(spec, params, X, noise, iteration)
    return head_forward(spec, params, m)


def dqnn_forward(spec: ModelSpec, params: np.ndarray, x: np.ndarray, noise=None) -> float:
    if spec.kind != "dqnn":
        raise ValueError("spec is not a DQNN")
    out = forward_batch(spec, params, np.asarray(x)[None, :], noise)
    return float(out[0]) if spec.n_classes == 1 else out[0]


def ccq_forward(spec: ModelSpec, params: np.ndarray, x: np.ndarray, noise=None) -> float:
    if spec.kind != "ccq":
        raise ValueError("spec is not a CCQ")
    return float(forward_batch(spec, params, np.asarray(x)[None, :], noise)[0])


def qcl_forward(spec: ModelSpec, params: np.ndarray, x: np.ndarray, noise=None) -> float:
    if spec.kind != "qcl":
        raise ValueError("spec is not a QCL")
    return float(forward_batch(spec, params, np.asarray(x)[None, :], noise)[0])


def sigmoid_basis_eval(
    z_list: Sequence[np.ndarray],
    a: np.ndarray,
    c: np.ndarray,
    alpha: np.ndarray,
    state: Statevector,
) -> float:
    """sum_j alpha_j sigmoid(a_j (|<x|z_j>|^2 - c_j)) from raw state overlaps."""
    a = np.asarray(a, dtype=float)
    c = np.asarray(c, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(a <= 0.0):
        raise ValueError("all a_j must be positive")
    if np.any((c < 0.0) | (c > 1.0)):
        raise ValueError("all c_j must lie in [0, 1]")
    x = state.amplitudes
    total = 0.0
    for z, aj, cj, alj in zip(z_list, a, c, alpha):
        z = np.asarray(z, dtype=complex).reshape(-1)
        if abs(np.linalg.norm(z) - 1.0) > 1e-9:
            raise ValueError("basis states z_j must be unit-norm")
        overlap = abs(np.vdot(x, z)) ** 2
        total += alj * expit(aj * (overlap - cj))
    return float(total)
