"""Classical-to-quantum data maps: amplitude encoding with invertible padding,
the product-state encoding used by QCL, and tensor-power duplication.

Amplitude encoding stores x = (x_1..x_d) as gamma^-1 (x_1..x_d, xpad, 0..0)
with xpad = ||x|| / (1 + ||x||), so the encoded ray determines ||x|| and the
map is invertible.  Datasets whose raw vectors can reach the origin append a
constant offset feature before encoding (recorded in the dataset card).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .qsim import DensityMatrix, Statevector

MAX_REGISTER = 15


@dataclass(frozen=True)
class EncodedState:
    state: Union[Statevector, DensityMatrix]
    n_copy: int
    scheme: str  # "amplitude" | "qcl-product" | "ccq-copies"


def n_qubits_for(d: int, pad: bool = True) -> int:
    """Register size for a d-dimensional vector (one extra slot for the pad term)."""
    slots = d + 1 if pad else d
    return max(1, math.ceil(math.log2(slots)))


def amplitude_encode_batch(xs: np.ndarray, pad: bool = True) -> np.ndarray:
    """Encode rows of xs (batch, d) into amplitudes (batch, 2**n)."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    d = xs.shape[1]
    norms = np.linalg.norm(xs, axis=1)
    if np.any(norms <= 0.0):
        raise ValueError("amplitude encoding requires a nonzero vector")
    n = n_qubits_for(d, pad)
    out = np.zeros((xs.shape[0], 2 ** n), dtype=complex)
    if pad:
        xpad = norms / (1.0 + norms)
        gamma = np.sqrt(norms ** 2 + xpad ** 2)
        out[:, :d] = xs / gamma[:, None]
        out[:, d] = xpad / gamma
    else:
        out[:, :d] = xs / norms[:, None]
    return out


def amplitude_encode(x: np.ndarray, pad: bool = True) -> Statevector:
    """Encode one vector; see amplitude_encode_batch."""
    x = np.asarray(x, dtype=float).reshape(-1)
    amps = amplitude_encode_batch(x[None, :], pad=pad)[0]
    return Statevector(n_qubits_for(len(x), pad), amps)


def pad_bounds(kappa1: float, kappa2: float) -> tuple:
    """Open interval that the pad amplitude must occupy when kappa1 <= ||x|| <= kappa2."""
    lo = (1.0 + (1.0 + kappa2) ** 2) ** -0.5
    hi = (1.0 + (1.0 + kappa1) ** 2) ** -0.5
    return lo, hi


def amplitude_decode(state: Statevector, d: int, kappa1: float, kappa2: float) -> np.ndarray:
    """Invert amplitude_encode: recover x from the encoded amplitudes.

    The pad amplitude fixes r = 1/(1 + ||x||), from which ||x|| and the
    normalization factor follow.
    """
    amps = state.amplitudes
    if 2 ** state.n_qubits < d + 1:
        raise ValueError("state too small to hold d features plus the pad term")
    if np.max(np.abs(amps.imag), initial=0.0) > 1e-10:
        raise ValueError("encoded states are real; got complex amplitudes")
    body = amps[:d].real
    pad_amp = amps[d].real
    lo, hi = pad_bounds(kappa1, kappa2)
    if not lo < pad_amp < hi:
        raise ValueError(
            f"pad amplitude {pad_amp:.6g} outside the open bound ({lo:.6g}, {hi:.6g}) "
            f"for kappa1={kappa1}, kappa2={kappa2}"
        )
    r = pad_amp / np.linalg.norm(body)  # = 1 / (1 + ||x||)
    norm = (1.0 - r) / r
    xpad = norm / (1.0 + norm)
    gamma = np.sqrt(norm ** 2 + xpad ** 2)
    return gamma * body


def qcl_encode_batch(xs: np.ndarray) -> np.ndarray:
    """Product state (batch, 2**d) with qubit i rotated by arcsin(x_i) about Y."""
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    if np.any(np.abs(xs) > 1.0):
        raise ValueError("QCL encoding requires every |x_i| <= 1")
    half = 0.5 * np.arcsin(xs)
    amps = np.ones((xs.shape[0], 1), dtype=complex)
    for i in range(xs.shape[1]):
        q = np.stack([np.cos(half[:, i]), np.sin(half[:, i])], axis=1).astype(complex)
        amps = np.einsum("bi,bj->bij", amps.reshape(xs.shape[0], -1), q).reshape(xs.shape[0], -1)
    return amps


def qcl_encode(x: np.ndarray) -> DensityMatrix:
    """Density operator (1/2^d) prod (I + x_i X + sqrt(1-x_i^2) Z), built as a pure product."""
    x = np.asarray(x, dtype=float).reshape(-1)
    amps = qcl_encode_batch(x[None, :])[0]
    return DensityMatrix(len(x), np.outer(amps, amps.conj()))


def duplicate(enc: EncodedState, n_copy: int) -> EncodedState:
    """n_copy-fold tensor power of the encoded state (pure or mixed)."""
    if n_copy < 1:
        raise ValueError("n_copy must be >= 1")
    base = enc.state
    total = base.n_qubits * n_copy
    if total > MAX_REGISTER:
        raise ValueError(f"{total} qubits exceeds the {MAX_REGISTER}-qubit register limit")
    if n_copy == 1:
        return EncodedState(base, 1, enc.scheme)
    if isinstance(base, Statevector):
        amps = base.amplitudes
        out = amps
        for _ in range(n_copy - 1):
            out = np.kron(out, amps)
        state: Union[Statevector, DensityMatrix] = Statevector(total, out)
    else:
        mat = base.matrix
        out = mat
        for _ in range(n_copy - 1):
            out = np.kron(out, mat)
        state = DensityMatrix(total, out)
    return EncodedState(state, n_copy, enc.scheme)
