"""Dense statevector simulator for small qubit registers.

Amplitudes are stored as a flat complex vector of length 2**n_qubits.
Qubit 0 is the most significant bit of the basis index, so the basis
state |q0 q1 ... q_{n-1}> sits at index sum(q_k << (n_qubits-1-k)).

Gate set: H, RZ, RY and CRZ (phase rotation on the target when the
control is |1>).  Conventions:

    H        = (1/sqrt(2)) [[1, 1], [1, -1]]
    RZ(t)    = diag(exp(-i t/2), exp(+i t/2))
    RY(t)    = [[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]]
    CRZ(t)   = diag(1, 1, exp(-i t/2), exp(+i t/2))   (control, target)
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

MAX_QUBITS = 20

GATE_KINDS = ("H", "RZ", "RY", "CRZ")

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


@dataclass(eq=False)
class State:
    """Dense state of ``n_qubits`` qubits; ``amplitudes`` has length 2**n_qubits."""

    n_qubits: int
    amplitudes: np.ndarray


@dataclass(frozen=True)
class Gate:
    """A single gate instance with a concrete angle (radians).

    ``control`` is only meaningful for CRZ; ``angle`` is required for the
    rotation kinds and must be absent for H.
    """

    kind: str
    target: int
    control: Optional[int] = None
    angle: Optional[float] = None


def h(target: int) -> Gate:
    return Gate("H", target)


def rz(target: int, angle: float) -> Gate:
    return Gate("RZ", target, angle=angle)


def ry(target: int, angle: float) -> Gate:
    return Gate("RY", target, angle=angle)


def crz(control: int, target: int, angle: float) -> Gate:
    return Gate("CRZ", target, control=control, angle=angle)


def new_zero_state(n_qubits: int, max_qubits: int = MAX_QUBITS) -> State:
    """Return |0...0> on ``n_qubits`` qubits.

    ``max_qubits`` caps the register size so a typo cannot allocate an
    astronomically large vector.
    """
    if not 1 <= n_qubits <= max_qubits:
        raise ValueError(f"n_qubits must be in 1..{max_qubits}, got {n_qubits}")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return State(n_qubits, amps)


def _check_qubit(q: int, n_qubits: int, role: str) -> None:
    if not 0 <= q < n_qubits:
        raise ValueError(f"{role} qubit {q} out of range for {n_qubits} qubits")


def apply_inplace(
    amplitudes: np.ndarray,
    n_qubits: int,
    kind: str,
    target: int,
    control: Optional[int] = None,
    angle: Optional[float] = None,
) -> None:
    """Apply one gate directly to ``amplitudes``, mutating it.

    Low-level path used by circuit evaluation; ``apply_gate`` is the
    copying wrapper.  Only the amplitude pairs differing on the target
    bit (and selected by the control bit, for CRZ) are touched.
    """
    _check_qubit(target, n_qubits, "target")
    if kind == "H":
        if angle is not None:
            raise ValueError("H takes no angle")
        v = amplitudes.reshape(1 << target, 2, -1)
        a0 = v[:, 0, :].copy()
        a1 = v[:, 1, :]
        v[:, 0, :] = (a0 + a1) * _INV_SQRT2
        v[:, 1, :] = (a0 - a1) * _INV_SQRT2
        return
    if angle is None:
        raise ValueError(f"{kind} requires an angle")
    if kind == "RZ":
        v = amplitudes.reshape(1 << target, 2, -1)
        v[:, 0, :] *= np.exp(-0.5j * angle)
        v[:, 1, :] *= np.exp(0.5j * angle)
        return
    if kind == "RY":
        c, s = np.cos(0.5 * angle), np.sin(0.5 * angle)
        v = amplitudes.reshape(1 << target, 2, -1)
        a0 = v[:, 0, :].copy()
        a1 = v[:, 1, :]
        v[:, 0, :] = c * a0 - s * a1
        v[:, 1, :] = s * a0 + c * a1
        return
    if kind == "CRZ":
        if control is None:
            raise ValueError("CRZ requires a control qubit")
        _check_qubit(control, n_qubits, "control")
        if control == target:
            raise ValueError("CRZ control and target must differ")
        v = amplitudes.reshape((2,) * n_qubits)
        sel = [slice(None)] * n_qubits
        sel[control] = 1
        sel[target] = 0
        v[tuple(sel)] *= np.exp(-0.5j * angle)
        sel[target] = 1
        v[tuple(sel)] *= np.exp(0.5j * angle)
        return
    raise ValueError(f"unknown gate kind {kind!r}")


def apply_gate(state: State, gate: Gate) -> State:
    """Return ``gate`` applied to ``state`` as a new State; the input is untouched."""
    amps = state.amplitudes.copy()
    apply_inplace(amps, state.n_qubits, gate.kind, gate.target, gate.control, gate.angle)
    return State(state.n_qubits, amps)


def gate_matrix(gate: Gate) -> np.ndarray:
    """Unitary matrix of ``gate``: 2x2, or 4x4 for CRZ in (control, target) order."""
    if gate.kind == "H":
        return np.array([[1, 1], [1, -1]], dtype=np.complex128) * _INV_SQRT2
    if gate.angle is None:
        raise ValueError(f"{gate.kind} requires an angle")
    t = gate.angle
    if gate.kind == "RZ":
        return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])
    if gate.kind == "RY":
        c, s = np.cos(0.5 * t), np.sin(0.5 * t)
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    if gate.kind == "CRZ":
        return np.diag([1.0, 1.0, np.exp(-0.5j * t), np.exp(0.5j * t)])
    raise ValueError(f"unknown gate kind {gate.kind!r}")


def inner_product(a: State, b: State) -> complex:
    """<a|b> with the left argument conjugated."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(
            f"register size mismatch: {a.n_qubits} vs {b.n_qubits} qubits"
        )
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def zero_probability(state: State) -> float:
    """Probability of the all-zeros outcome, |amplitudes[0]|**2."""
    a0 = state.amplitudes[0]
    return float(a0.real * a0.real + a0.imag * a0.imag)


def sample_zero_probability(state: State, shots: int, rng_seed: int) -> float:
    """Estimate zero_probability from ``shots`` simulated measurements.

    Draws a single binomial count with a generator seeded by ``rng_seed``,
    so repeated calls with the same seed reproduce the same estimate.
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    # Clamp: rounding can push |a0|^2 a hair past 1, which binomial rejects.
    p = min(max(zero_probability(state), 0.0), 1.0)
    hits = np.random.default_rng(rng_seed).binomial(shots, p)
    return float(hits) / float(shots)
