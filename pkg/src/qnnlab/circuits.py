"""Parameterized layered circuits shared by all three models.

One layer on n qubits holds one R rotation per qubit followed by n
controlled-R gates on a ring whose shift grows with the layer index, so deeper
circuits entangle across longer ranges.  The order of the 2n gates inside a
layer is shuffled by the circuit seed; parameter slots are assigned to gate
roles before shuffling, so the slot layout is independent of the order draw.

Gate counting convention: every R block (controlled or not) counts as 3
elementary rotations, one per angle.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from . import qsim
from .qsim import DensityMatrix, GateOp, Statevector


@dataclass(frozen=True)
class GateTemplate:
    kind: str  # "r" | "cr"
    target: int
    slots: Tuple[int, int, int]
    control: Optional[int] = None


@dataclass(frozen=True)
class LayeredCircuit:
    n_qubits: int
    n_layers: int
    gate_sequence: Tuple[GateTemplate, ...]
    seed: int

    @property
    def n_slots(self) -> int:
        return 3 * len(self.gate_sequence)


@dataclass(frozen=True)
class ComplexityReport:
    n_tot: int
    n_gate: int
    n_obs: int
    C: int
    n_copy: int
    n_data: int
    n_lay: int


def _ring_target(qubit: int, layer: int, n_qubits: int) -> int:
    # shift wraps within 1..n-1 so the target never collides with the control
    shift = 1 + layer % (n_qubits - 1)
    return (qubit + shift) % n_qubits


def _build_layered(n_qubits: int, n_layers: int, seed: int) -> LayeredCircuit:
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    if n_layers < 1:
        raise ValueError("n_layers must be >= 1")
    rng = np.random.default_rng(seed)
    gates: List[GateTemplate] = []
    slot = 0
    for layer in range(n_layers):
        layer_gates: List[GateTemplate] = []
        for q in range(n_qubits):
            layer_gates.append(GateTemplate("r", q, (slot, slot + 1, slot + 2)))
            slot += 3
        if n_qubits >= 2:
            for q in range(n_qubits):
                tgt = _ring_target(q, layer, n_qubits)
                layer_gates.append(GateTemplate("cr", tgt, (slot, slot + 1, slot + 2), control=q))
                slot += 3
        order = rng.permutation(len(layer_gates))
        gates.extend(layer_gates[i] for i in order)
    return LayeredCircuit(n_qubits, n_layers, tuple(gates), seed)


def build_dqnn_circuit(n_qubits: int, n_layers: int, seed: int) -> LayeredCircuit:
    """Layered circuit for one DQNN branch."""
    return _build_layered(n_qubits, n_layers, seed)


def build_ccq_circuit(n_qubits: int, n_layers: int, seed: int) -> LayeredCircuit:
    """CCQ variational circuit; same layer template, kept separate for configuration."""
    return _build_layered(n_qubits, n_layers, seed)


def build_qcl_circuit(n_qubits: int, n_layers: int, seed: int) -> LayeredCircuit:
    """QCL variational circuit; same layer template, kept separate for configuration."""
    return _build_layered(n_qubits, n_layers, seed)


def bind(circuit: LayeredCircuit, params: np.ndarray) -> List[GateOp]:
    """Concrete gates in sequence order; gate k reads the slots of template k."""
    params = np.asarray(params, dtype=float).reshape(-1)
    if params.shape[0] != circuit.n_slots:
        raise ValueError(f"expected {circuit.n_slots} parameters, got {params.shape[0]}")
    return [
        GateOp(t.kind, t.target, tuple(params[list(t.slots)]), control=t.control)
        for t in circuit.gate_sequence
    ]


def read_params(gates: Sequence[GateOp], circuit: LayeredCircuit) -> np.ndarray:
    """Inverse of bind: collect angles back into slot order."""
    out = np.zeros(circuit.n_slots)
    for gate, t in zip(gates, circuit.gate_sequence):
        out[list(t.slots)] = gate.params
    return out


def run_circuit(
    state: Union[Statevector, DensityMatrix],
    circuit: LayeredCircuit,
    params: np.ndarray,
    noise=None,
) -> Union[Statevector, DensityMatrix]:
    """Apply the bound circuit to a single state.

    With noise.delta > 0 the circuit parameters are perturbed (one draw per
    call, from the noise seed) before binding.  With noise.p > 0 the state
    must be a DensityMatrix and every controlled-R runs through the
    depolarizing channel.
    """
    delta = getattr(noise, "delta", 0.0) if noise is not None else 0.0
    p = getattr(noise, "p", 0.0) if noise is not None else 0.0
    if delta > 0.0:
        from .noise import perturb

        params = perturb(params, noise)
    gates = bind(circuit, params)
    if isinstance(state, Statevector):
        if p > 0.0:
            raise ValueError("decoherence (p > 0) requires a DensityMatrix input")
        if state.n_qubits != circuit.n_qubits:
            raise ValueError("register size mismatch")
        amps = state.amplitudes[None, :]
        for g in gates:
            amps = qsim.apply_gateop_batch(amps, g, circuit.n_qubits)
        return Statevector(circuit.n_qubits, amps[0])
    if state.n_qubits != circuit.n_qubits:
        raise ValueError("register size mismatch")
    out = state
    for g in gates:
        if g.kind == "cr":
            out = qsim.apply_channel(out, g, p)
        else:
            u = qsim.gate_matrix_full(g, circuit.n_qubits)
            out = DensityMatrix(circuit.n_qubits, qsim.conjugate_batch(out.matrix[None], u)[0])
    return out


def circuit_unitary(circuit: LayeredCircuit, params: np.ndarray) -> np.ndarray:
    """Dense end-to-end unitary of the bound circuit (small registers only)."""
    dim = 2 ** circuit.n_qubits
    if dim > 256:
        raise ValueError("dense unitary limited to 8 qubits")
    u = np.eye(dim, dtype=complex)
    for g in bind(circuit, params):
        u = qsim.gate_matrix_full(g, circuit.n_qubits) @ u
    return u


def complexity(model) -> ComplexityReport:
    """Gate/measurement accounting C = n_gate * n_obs for a ModelSpec-like object."""
    n_gate = 0
    for circ in model.circuits:
        if isinstance(circ, LayeredCircuit):
            n_gate += 3 * len(circ.gate_sequence)
    n_obs = len(model.observables)
    n_data = model.n_data_qubits
    n_copy = model.n_copy
    n_lay = max(
        (c.n_layers for c in model.circuits if isinstance(c, LayeredCircuit)), default=0
    )
    return ComplexityReport(
        n_tot=n_data * n_copy,
        n_gate=n_gate,
        n_obs=n_obs,
        C=n_gate * n_obs,
        n_copy=n_copy,
        n_data=n_data,
        n_lay=n_lay,
    )


# ---------------------------------------------------------------------------
# Text serialization: header line, then one line per gate template.
# ---------------------------------------------------------------------------

def to_text(circuit: LayeredCircuit) -> str:
    lines = [f"circuit n_qubits={circuit.n_qubits} n_layers={circuit.n_layers} seed={circuit.seed}"]
    for t in circuit.gate_sequence:
        ctrl = "-" if t.control is None else str(t.control)
        lines.append(f"{t.kind} control={ctrl} target={t.target} slots={t.slots[0]},{t.slots[1]},{t.slots[2]}")
    return "\n".join(lines) + "\n"


def from_text(text: str) -> LayeredCircuit:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    head = lines[0].split()
    if head[0] != "circuit":
        raise ValueError("missing circuit header line")
    fields = dict(part.split("=") for part in head[1:])
    gates = []
    for ln in lines[1:]:
        kind, ctrl_s, tgt_s, slots_s = ln.split()
        control = None if ctrl_s == "control=-" else int(ctrl_s.split("=")[1])
        target = int(tgt_s.split("=")[1])
        slots = tuple(int(v) for v in slots_s.split("=")[1].split(","))
        gates.append(GateTemplate(kind, target, slots, control=control))
    return LayeredCircuit(
        int(fields["n_qubits"]), int(fields["n_layers"]), tuple(gates), int(fields["seed"])
    )
