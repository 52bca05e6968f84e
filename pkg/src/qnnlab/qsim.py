"""Exact simulation core: statevectors, density matrices, gates, Pauli expectations, channels.

Conventions used throughout the package:

- Qubit 0 is the most significant bit of the amplitude index, i.e. the basis
  state |q0 q1 ... q_{n-1}> sits at index sum(q_k * 2**(n-1-k)).  Tensor
  products built with np.kron therefore append qubits on the right.
- States are value-semantic: every operation returns a fresh array and never
  mutates its input.
- The public single-state API (apply_gate, expectation, ...) wraps private
  batched kernels that operate on arrays of shape (batch, 2**n) or
  (batch, 2**n, 2**n); the training loop calls the kernels directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

NORM_TOL = 1e-10
HERM_TOL = 1e-10
EIG_TOL = 1e-9

PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Statevector:
    """Pure state of an n-qubit register; amplitudes has length 2**n_qubits."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        object.__setattr__(self, "amplitudes", amps)
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        if amps.shape[0] != 2 ** self.n_qubits:
            raise ValueError(
                f"amplitude vector of length {amps.shape[0]} does not match "
                f"{self.n_qubits} qubits"
            )
        norm_sq = float(np.sum(np.abs(amps) ** 2))
        if abs(norm_sq - 1.0) > 1e-8:
            raise ValueError(f"state is not normalized: sum |a|^2 = {norm_sq}")


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state of an n-qubit register; Hermitian, unit trace, PSD."""

    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        object.__setattr__(self, "matrix", mat)
        dim = 2 ** self.n_qubits
        if self.n_qubits < 1:
            raise ValueError("n_qubits must be >= 1")
        if mat.shape != (dim, dim):
            raise ValueError(f"matrix shape {mat.shape} does not match {self.n_qubits} qubits")
        if np.max(np.abs(mat - mat.conj().T)) > 1e-8:
            raise ValueError("density matrix is not Hermitian")
        tr = complex(np.trace(mat))
        if abs(tr - 1.0) > 1e-8:
            raise ValueError(f"density matrix trace {tr} != 1")


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit Paulis, one letter per qubit, e.g. 'XIZ'."""

    letters: str

    def __post_init__(self):
        if not self.letters or any(ch not in "IXYZ" for ch in self.letters):
            raise ValueError(f"invalid Pauli letters {self.letters!r}")

    def __len__(self) -> int:
        return len(self.letters)

    @property
    def is_identity(self) -> bool:
        return set(self.letters) == {"I"}

    def matrix(self) -> np.ndarray:
        """Dense 2**n x 2**n matrix (qubit 0 is the leftmost kron factor)."""
        out = PAULI_1Q[self.letters[0]]
        for ch in self.letters[1:]:
            out = np.kron(out, PAULI_1Q[ch])
        return out


@dataclass(frozen=True)
class GateOp:
    """Single-qubit R rotation or two-qubit controlled-R, with angles in radians."""

    kind: str  # "r" or "cr"
    target: int
    params: tuple
    control: Optional[int] = None

    def __post_init__(self):
        if self.kind not in ("r", "cr"):
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if len(self.params) != 3:
            raise ValueError("R gates take exactly 3 angles")
        if self.kind == "cr":
            if self.control is None:
                raise ValueError("controlled-R requires a control qubit")
            if self.control == self.target:
                raise ValueError("control equals target")
        elif self.control is not None:
            raise ValueError("single-qubit R takes no control")

    @property
    def qubits(self) -> tuple:
        return (self.target,) if self.kind == "r" else (self.control, self.target)


# ---------------------------------------------------------------------------
# Gate matrices
# ---------------------------------------------------------------------------

def r_matrix(theta1, theta2, theta3) -> np.ndarray:
    """The 2x2 rotation R(t1,t2,t3); unitary for all parameter values.

    Accepts scalars or broadcastable arrays; array inputs give shape (..., 2, 2).
    """
    t1, t2, t3 = np.broadcast_arrays(
        np.asarray(theta1, dtype=float),
        np.asarray(theta2, dtype=float),
        np.asarray(theta3, dtype=float),
    )
    c, s = np.cos(t1), np.sin(t1)
    out = np.empty(t1.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = np.exp(1j * t2) * c
    out[..., 0, 1] = np.exp(1j * t3) * s
    out[..., 1, 0] = -np.exp(-1j * t3) * s
    out[..., 1, 1] = np.exp(-1j * t2) * c
    return out


def r_matrix_deriv(theta1, theta2, theta3) -> np.ndarray:
    """Derivatives of r_matrix w.r.t. each angle, shape (..., 3, 2, 2)."""
    t1, t2, t3 = np.broadcast_arrays(
        np.asarray(theta1, dtype=float),
        np.asarray(theta2, dtype=float),
        np.asarray(theta3, dtype=float),
    )
    c, s = np.cos(t1), np.sin(t1)
    e2, e3 = np.exp(1j * t2), np.exp(1j * t3)
    out = np.zeros(t1.shape + (3, 2, 2), dtype=complex)
    out[..., 0, 0, 0] = -e2 * s
    out[..., 0, 0, 1] = e3 * c
    out[..., 0, 1, 0] = -c / e3
    out[..., 0, 1, 1] = -s / e2
    out[..., 1, 0, 0] = 1j * e2 * c
    out[..., 1, 1, 1] = -1j * c / e2
    out[..., 2, 0, 1] = 1j * e3 * s
    out[..., 2, 1, 0] = 1j * s / e3
    return out


def gate_matrix(gate: GateOp) -> np.ndarray:
    """The gate's own unitary: 2x2 for R, 4x4 (control qubit first) for controlled-R."""
    r = r_matrix(*gate.params)
    if gate.kind == "r":
        return r
    out = np.eye(4, dtype=complex)
    out[2:, 2:] = r
    return out


def gate_matrix_full(gate: GateOp, n_qubits: int, params=None) -> np.ndarray:
    """The gate embedded on the full register as a dense 2**n x 2**n unitary."""
    r = r_matrix(*(gate.params if params is None else params))
    if gate.kind == "r":
        return _embed_1q(r, gate.target, n_qubits)
    p0 = np.array([[1, 0], [0, 0]], dtype=complex)
    p1 = np.array([[0, 0], [0, 1]], dtype=complex)
    return _embed_1q(p0, gate.control, n_qubits) + _embed_pair(
        p1, gate.control, r, gate.target, n_qubits
    )


def _embed_1q(mat: np.ndarray, q: int, n: int) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for k in range(n):
        out = np.kron(out, mat if k == q else PAULI_1Q["I"])
    return out


def _embed_pair(a: np.ndarray, qa: int, b: np.ndarray, qb: int, n: int) -> np.ndarray:
    out = np.array([[1.0 + 0j]])
    for k in range(n):
        if k == qa:
            out = np.kron(out, a)
        elif k == qb:
            out = np.kron(out, b)
        else:
            out = np.kron(out, PAULI_1Q["I"])
    return out


# ---------------------------------------------------------------------------
# Batched statevector kernels.  amps has shape (batch, 2**n); mat may be a
# single (2, 2) matrix or (batch, 2, 2) for per-sample parameters.
# ---------------------------------------------------------------------------

def apply_1q_batch(amps: np.ndarray, mat: np.ndarray, q: int, n: int) -> np.ndarray:
    b = amps.shape[0]
    a = amps.reshape(b, 1 << q, 2, -1)
    if mat.ndim == 2:
        out = np.einsum("ij,bkjl->bkil", mat, a)
    else:
        out = np.einsum("bij,bkjl->bkil", mat, a)
    return out.reshape(b, -1)


def apply_cr_batch(amps: np.ndarray, mat: np.ndarray, control: int, target: int, n: int) -> np.ndarray:
    b = amps.shape[0]
    view = amps.reshape((b,) + (2,) * n)
    out = view.copy()
    sel = (slice(None),) * (1 + control) + (1,)
    t_axis = 1 + (target if target < control else target - 1)
    out[sel] = _apply_on_axis(view[sel], mat, t_axis)
    return out.reshape(b, -1)


def _apply_on_axis(a: np.ndarray, mat: np.ndarray, axis: int) -> np.ndarray:
    moved = np.moveaxis(a, axis, -1)
    if mat.ndim == 2:
        res = moved @ mat.T
    else:
        res = np.einsum("b...j,bij->b...i", moved, mat)
    return np.moveaxis(res, -1, axis)


def apply_gateop_batch(amps: np.ndarray, gate: GateOp, n: int, mat: Optional[np.ndarray] = None) -> np.ndarray:
    """Apply one GateOp to a (batch, 2**n) amplitude block."""
    for q in gate.qubits:
        if not 0 <= q < n:
            raise ValueError(f"qubit index {q} out of range for {n}-qubit register")
    if mat is None:
        mat = r_matrix(*gate.params)
    if gate.kind == "r":
        return apply_1q_batch(amps, mat, gate.target, n)
    return apply_cr_batch(amps, mat, gate.control, gate.target, n)


def pauli_apply_batch(amps: np.ndarray, letters: str, n: int) -> np.ndarray:
    """Compute P|psi> for every row without building the dense Pauli matrix."""
    out = amps
    for q, ch in enumerate(letters):
        if ch == "I":
            continue
        b = out.shape[0]
        v = out.reshape(b, 1 << q, 2, -1)
        if ch == "Z":
            v = v.copy()
            v[:, :, 1, :] *= -1.0
        elif ch == "X":
            v = v[:, :, ::-1, :].copy()
        else:  # Y
            w = np.empty_like(v)
            w[:, :, 0, :] = -1j * v[:, :, 1, :]
            w[:, :, 1, :] = 1j * v[:, :, 0, :]
            v = w
        out = v.reshape(b, -1)
    return out if out is not amps else amps.copy()


def expect_pauli_batch(amps: np.ndarray, letters: str, n: int) -> np.ndarray:
    """<psi|P|psi> per batch row, returned as real floats."""
    pa = pauli_apply_batch(amps, letters, n)
    vals = np.einsum("bi,bi->b", amps.conj(), pa)
    if np.max(np.abs(vals.imag), initial=0.0) > 1e-9:
        raise ValueError("Pauli expectation has a non-negligible imaginary part")
    return np.clip(vals.real, -1.0, 1.0)


# ---------------------------------------------------------------------------
# Batched density-matrix kernels.  rhos has shape (batch, dim, dim); gates are
# applied as dense conjugations (density runs live on small registers).
# ---------------------------------------------------------------------------

def conjugate_batch(rhos: np.ndarray, u: np.ndarray) -> np.ndarray:
    """U rho U^dagger per row; u is (dim, dim) or (batch, dim, dim)."""
    uc = np.swapaxes(u.conj(), -1, -2)
    return np.matmul(u, np.matmul(rhos, uc))


def two_qubit_pauli_stack(control: int, target: int, n: int) -> np.ndarray:
    """The 16 two-qubit Pauli words on (control, target), embedded, shape (16, dim, dim)."""
    mats = []
    for a in "IXYZ":
        for b in "IXYZ":
            mats.append(_embed_pair(PAULI_1Q[a], control, PAULI_1Q[b], target, n))
    return np.stack(mats)


def depolarize2_batch(rhos: np.ndarray, pauli_stack: np.ndarray, p: float) -> np.ndarray:
    """Two-qubit depolarizing mix: (1-p) rho + (p/16) sum_P P rho P."""
    if p == 0.0:
        return rhos
    twirl = np.einsum("kij,bjl,klm->bim", pauli_stack, rhos, pauli_stack)
    return (1.0 - p) * rhos + (p / 16.0) * twirl


def expect_matrix_batch(rhos: np.ndarray, obs: np.ndarray) -> np.ndarray:
    """Tr(rho B) per row; obs is (dim, dim) or (batch, dim, dim)."""
    if obs.ndim == 2:
        vals = np.einsum("bij,ji->b", rhos, obs)
    else:
        vals = np.einsum("bij,bji->b", rhos, obs)
    if np.max(np.abs(vals.imag), initial=0.0) > 1e-9:
        raise ValueError("expectation has a non-negligible imaginary part")
    return vals.real


# ---------------------------------------------------------------------------
# Public single-state operations
# ---------------------------------------------------------------------------

def apply_gate(state: Statevector, gate: GateOp) -> Statevector:
    """Return U|psi> with the gate's unitary embedded on the addressed qubits."""
    out = apply_gateop_batch(state.amplitudes[None, :], gate, state.n_qubits)
    return Statevector(state.n_qubits, out[0])


def expectation(state: Union[Statevector, DensityMatrix], obs: Union[PauliString, np.ndarray]) -> float:
    """<B> on a pure or mixed state; obs is a PauliString or a dense Hermitian matrix.

    Pauli results are clipped to [-1, 1] after checking the imaginary part.
    """
    if isinstance(obs, PauliString):
        n = len(obs)
        if n != state.n_qubits:
            raise ValueError(f"observable on {n} qubits does not match {state.n_qubits}-qubit state")
        if isinstance(state, Statevector):
            return float(expect_pauli_batch(state.amplitudes[None, :], obs.letters, n)[0])
        vals = expect_matrix_batch(state.matrix[None, :, :], obs.matrix())
        return float(np.clip(vals[0], -1.0, 1.0))
    mat = np.asarray(obs, dtype=complex)
    if isinstance(state, Statevector):
        val = complex(state.amplitudes.conj() @ (mat @ state.amplitudes))
    else:
        val = complex(np.trace(state.matrix @ mat))
    if abs(val.imag) > 1e-9:
        raise ValueError("expectation has a non-negligible imaginary part")
    return val.real


def to_density(state: Statevector) -> DensityMatrix:
    """|psi><psi| as a DensityMatrix."""
    amps = state.amplitudes
    return DensityMatrix(state.n_qubits, np.outer(amps, amps.conj()))


def apply_channel(rho: DensityMatrix, gate: GateOp, p: float) -> DensityMatrix:
    """Controlled-R conjugation followed by a two-qubit depolarizing mix of strength p."""
    if gate.kind != "cr":
        raise ValueError("decoherence channel applies to controlled-R gates only")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"decoherence probability {p} outside [0, 1]")
    n = rho.n_qubits
    u = gate_matrix_full(gate, n)
    out = conjugate_batch(rho.matrix[None, :, :], u)
    stack = two_qubit_pauli_stack(gate.control, gate.target, n)
    out = depolarize2_batch(out, stack, p)
    return DensityMatrix(n, out[0])


# ---------------------------------------------------------------------------
# Construction helpers
# ---------------------------------------------------------------------------

def basis_state(n_qubits: int, index: int = 0) -> Statevector:
    amps = np.zeros(2 ** n_qubits, dtype=complex)
    amps[index] = 1.0
    return Statevector(n_qubits, amps)


def random_state(n_qubits: int, rng: np.random.Generator) -> Statevector:
    z = rng.normal(size=2 ** n_qubits) + 1j * rng.normal(size=2 ** n_qubits)
    return Statevector(n_qubits, z / np.linalg.norm(z))
