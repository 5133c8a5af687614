"""Parametric circuit templates for embedding-kernel ansaetze.

Gates carry symbolic angle sources instead of concrete angles.  A source
is one of Feature(i), Param(i), Const(v), or the negated variants that
``adjoint`` produces.  ``bind`` resolves every source to a Const;
``simulate`` resolves on the fly without materialising a bound circuit.

Three layer orderings are supported, all built from the same two layer
types.  A feature layer F applies H to every qubit followed by RZ(x_q)
per qubit.  A parameterized layer P_k applies RY per qubit followed by a
ring of CRZ gates (control q, target (q+1) mod n).  With L layers:

    data-first   (F P_1)(F P_2)...(F P_L)
    data-last    (P_1 F)(P_2 F)...(P_L F)
    data-weaved  F (P_1 F)(P_2 F)...(P_L F)

Each P_k owns a distinct parameter block of 2*n_qubits angles starting
at index 2*n_qubits*k.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from . import statesim
from .statesim import State

ARCHITECTURES = ("data-first", "data-last", "data-weaved")


class MalformedEchoError(ValueError):
    """Raised when a circuit does not have the mirror structure of an echo."""


# ---------------------------------------------------------------- angle sources


@dataclass(frozen=True)
class Feature:
    index: int


@dataclass(frozen=True)
class NegFeature:
    index: int


@dataclass(frozen=True)
class Param:
    index: int


@dataclass(frozen=True)
class NegParam:
    index: int


@dataclass(frozen=True)
class Const:
    value: float


AngleSource = Union[Feature, NegFeature, Param, NegParam, Const]


def _negate_source(source: Optional[AngleSource]) -> Optional[AngleSource]:
    if source is None:
        return None
    if isinstance(source, Feature):
        return NegFeature(source.index)
    if isinstance(source, NegFeature):
        return Feature(source.index)
    if isinstance(source, Param):
        return NegParam(source.index)
    if isinstance(source, NegParam):
        return Param(source.index)
    return Const(-source.value)


def _has_feature(source: Optional[AngleSource]) -> bool:
    return isinstance(source, (Feature, NegFeature))


def _resolve_source(
    source: AngleSource,
    x: Optional[np.ndarray],
    params: Optional[np.ndarray],
    feature_scale: float,
) -> float:
    if isinstance(source, Const):
        return source.value
    if isinstance(source, (Feature, NegFeature)):
        if x is None:
            raise ValueError("circuit references features but no feature vector given")
        v = feature_scale * float(x[source.index])
        return -v if isinstance(source, NegFeature) else v
    if params is None:
        raise ValueError("circuit references parameters but no parameter vector given")
    if source.index >= len(params):
        raise ValueError(
            f"parameter vector too short: index {source.index}, length {len(params)}"
        )
    v = float(params[source.index])
    return -v if isinstance(source, NegParam) else v


def format_source(source: Optional[AngleSource]) -> str:
    if source is None:
        return ""
    if isinstance(source, Feature):
        return f"x[{source.index}]"
    if isinstance(source, NegFeature):
        return f"-x[{source.index}]"
    if isinstance(source, Param):
        return f"theta[{source.index}]"
    if isinstance(source, NegParam):
        return f"-theta[{source.index}]"
    return repr(source.value)


# --------------------------------------------------------------------- circuits


@dataclass(frozen=True)
class CircuitGate:
    kind: str
    target: int
    control: Optional[int] = None
    source: Optional[AngleSource] = None


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[CircuitGate, ...]

    def __len__(self) -> int:
        return len(self.gates)


@dataclass(frozen=True)
class GateCounts:
    one_qubit: int
    two_qubit: int

    @property
    def total(self) -> int:
        return self.one_qubit + self.two_qubit


@dataclass(frozen=True)
class AnsatzSpec:
    """Architecture name, register width and parameterized-layer count."""

    arch: str
    n_qubits: int
    n_layers: int

    def __post_init__(self) -> None:
        if self.arch not in ARCHITECTURES:
            raise ValueError(
                f"unknown architecture {self.arch!r}, expected one of {ARCHITECTURES}"
            )
        if not 1 <= self.n_qubits <= statesim.MAX_QUBITS:
            raise ValueError(
                f"n_qubits must be in 1..{statesim.MAX_QUBITS}, got {self.n_qubits}"
            )
        if self.n_layers < 0:
            raise ValueError(f"n_layers must be >= 0, got {self.n_layers}")

    @property
    def n_params(self) -> int:
        return 2 * self.n_qubits * self.n_layers


def feature_layer(n_qubits: int) -> Circuit:
    """H on every qubit, then RZ(x_q) on every qubit."""
    gates = [CircuitGate("H", q) for q in range(n_qubits)]
    gates += [CircuitGate("RZ", q, source=Feature(q)) for q in range(n_qubits)]
    return Circuit(n_qubits, tuple(gates))


def param_layer(n_qubits: int, layer_index: int) -> Circuit:
    """RY per qubit then a CRZ ring, drawing from parameter block ``layer_index``.

    The block holds 2*n_qubits angles: RY angles first, ring angles
    second.  One qubit has no ring; two qubits get both CRZ(0,1) and
    CRZ(1,0), the two-element ring the (q+1) mod n rule produces.
    """
    if layer_index < 0:
        raise ValueError(f"layer_index must be >= 0, got {layer_index}")
    base = 2 * n_qubits * layer_index
    gates = [CircuitGate("RY", q, source=Param(base + q)) for q in range(n_qubits)]
    if n_qubits > 1:
        gates += [
            CircuitGate("CRZ", (q + 1) % n_qubits, control=q, source=Param(base + n_qubits + q))
            for q in range(n_qubits)
        ]
    return Circuit(n_qubits, tuple(gates))


def _concat(*parts: Circuit) -> Circuit:
    n = parts[0].n_qubits
    gates: tuple[CircuitGate, ...] = ()
    for part in parts:
        if part.n_qubits != n:
            raise ValueError("cannot concatenate circuits of different widths")
        gates += part.gates
    return Circuit(n, gates)


def build_ansatz(spec: AnsatzSpec) -> Circuit:
    """Unbound embedding circuit for ``spec``.

    L=0 degenerates to a single feature layer for data-weaved and to the
    empty circuit for the other two orderings.
    """
    f = feature_layer(spec.n_qubits)
    parts: list[Circuit] = []
    for k in range(spec.n_layers):
        p = param_layer(spec.n_qubits, k)
        if spec.arch == "data-first":
            parts += [f, p]
        else:
            parts += [p, f]
    if spec.arch == "data-weaved":
        parts.insert(0, f)
    if not parts:
        return Circuit(spec.n_qubits, ())
    return _concat(*parts)


def bind(
    circuit: Circuit,
    x: Optional[np.ndarray] = None,
    params: Optional[np.ndarray] = None,
    feature_scale: float = 1.0,
) -> Circuit:
    """Resolve every angle source to a Const.

    Feature(i) becomes Const(feature_scale * x[i]); Param(i) becomes
    Const(params[i]); negated variants flip the sign.  ``x`` must have
    exactly one entry per qubit when the circuit references features.
    """
    if x is not None and len(x) != circuit.n_qubits:
        raise ValueError(
            f"feature vector length {len(x)} != n_qubits {circuit.n_qubits}"
        )
    gates = []
    for g in circuit.gates:
        if g.source is None:
            gates.append(g)
        else:
            val = _resolve_source(g.source, x, params, feature_scale)
            gates.append(CircuitGate(g.kind, g.target, g.control, Const(val)))
    return Circuit(circuit.n_qubits, tuple(gates))


def adjoint(circuit: Circuit) -> Circuit:
    """Reverse the gate order and negate every angle source.

    All four gate kinds satisfy G(t)^dagger = G(-t) (H is self-inverse),
    so this is the exact circuit adjoint.
    """
    gates = tuple(
        CircuitGate(g.kind, g.target, g.control, _negate_source(g.source))
        for g in reversed(circuit.gates)
    )
    return Circuit(circuit.n_qubits, gates)


def echo_circuit(
    spec: AnsatzSpec,
    x: np.ndarray,
    x_prime: np.ndarray,
    params: np.ndarray,
    feature_scale: float = 1.0,
) -> Circuit:
    """Bound overlap-test circuit U(x, theta)^dagger U(x', theta).

    Reading left to right: the ansatz bound at x' runs first, then the
    adjoint of the ansatz bound at x.  The all-zeros probability of the
    result is the kernel value for the pair.
    """
    ansatz = build_ansatz(spec)
    forward = bind(ansatz, x_prime, params, feature_scale)
    backward = adjoint(bind(ansatz, x, params, feature_scale))
    return _concat(forward, backward)


def echo_template(spec: AnsatzSpec) -> Circuit:
    """Unbound echo: the ansatz followed by its adjoint.

    Feature sources in the first half refer to x', the negated ones in
    the second half to x; ``bind_echo`` resolves them that way.  This is
    the form ``erase_redundant`` analyses.
    """
    ansatz = build_ansatz(spec)
    return _concat(ansatz, adjoint(ansatz))


def bind_echo(
    echo: Circuit,
    x: np.ndarray,
    x_prime: np.ndarray,
    params: Optional[np.ndarray] = None,
    feature_scale: float = 1.0,
) -> Circuit:
    """Bind an echo-shaped circuit with its two feature vectors.

    Feature(i) resolves against ``x_prime`` (forward half), NegFeature(i)
    against ``x`` (adjoint half); parameters are shared.
    """
    for vec, name in ((x, "x"), (x_prime, "x_prime")):
        if len(vec) != echo.n_qubits:
            raise ValueError(f"{name} length {len(vec)} != n_qubits {echo.n_qubits}")
    gates = []
    for g in echo.gates:
        if g.source is None:
            gates.append(g)
            continue
        if isinstance(g.source, Feature):
            val = feature_scale * float(x_prime[g.source.index])
        elif isinstance(g.source, NegFeature):
            val = -feature_scale * float(x[g.source.index])
        else:
            val = _resolve_source(g.source, None, params, feature_scale)
        gates.append(CircuitGate(g.kind, g.target, g.control, Const(val)))
    return Circuit(echo.n_qubits, tuple(gates))


def _is_mirror_pair(g: CircuitGate, h: CircuitGate) -> bool:
    return (
        g.kind == h.kind
        and g.target == h.target
        and g.control == h.control
        and h.source == _negate_source(g.source)
    )


def erase_redundant(echo: Circuit) -> tuple[Circuit, int]:
    """Cancel the feature-independent suffix at the junction of an echo.

    The input must be an unbound echo (a circuit followed by its mirrored
    adjoint).  Working outward from the junction, each gate/adjoint pair
    whose angle carries no feature source acts as G(t) then G(t)^dagger
    for every binding, so both copies are dropped.  The first
    feature-carrying pair stops the scan: its two angles bind to
    different vectors and do not cancel in general.

    Returns the simplified circuit and the number of gates removed.
    """
    total = len(echo.gates)
    if total % 2 != 0:
        raise MalformedEchoError(f"echo must have even gate count, got {total}")
    half = total // 2
    for k in range(half):
        fwd = echo.gates[half - 1 - k]
        bwd = echo.gates[half + k]
        if not _is_mirror_pair(fwd, bwd):
            raise MalformedEchoError(
                f"gate {half + k} is not the adjoint mirror of gate {half - 1 - k}"
            )
    cut = 0
    while cut < half and not _has_feature(echo.gates[half - 1 - cut].source):
        cut += 1
    gates = echo.gates[: half - cut] + echo.gates[half + cut :]
    return Circuit(echo.n_qubits, gates), 2 * cut


def count_gates(circuit: Circuit) -> GateCounts:
    two = sum(1 for g in circuit.gates if g.kind == "CRZ")
    return GateCounts(one_qubit=len(circuit.gates) - two, two_qubit=two)


def shift_qubits(circuit: Circuit, offset: int, n_total: int) -> Circuit:
    """Re-address a circuit into a wider register, shifting every qubit index."""
    if offset < 0 or circuit.n_qubits + offset > n_total:
        raise ValueError(
            f"cannot place {circuit.n_qubits} qubits at offset {offset} "
            f"in a {n_total}-qubit register"
        )
    gates = tuple(
        CircuitGate(
            g.kind,
            g.target + offset,
            None if g.control is None else g.control + offset,
            g.source,
        )
        for g in circuit.gates
    )
    return Circuit(n_total, gates)


def simulate(
    circuit: Circuit,
    x: Optional[np.ndarray] = None,
    params: Optional[np.ndarray] = None,
    feature_scale: float = 1.0,
) -> State:
    """Run the circuit on |0...0>, resolving angle sources on the fly."""
    if x is not None and len(x) != circuit.n_qubits:
        raise ValueError(
            f"feature vector length {len(x)} != n_qubits {circuit.n_qubits}"
        )
    state = statesim.new_zero_state(circuit.n_qubits)
    amps = state.amplitudes
    n = circuit.n_qubits
    for g in circuit.gates:
        angle = None
        if g.source is not None:
            angle = _resolve_source(g.source, x, params, feature_scale)
        statesim.apply_inplace(amps, n, g.kind, g.target, g.control, angle)
    return state


def format_circuit(circuit: Circuit) -> str:
    """One gate per line: ``KIND target[,control] angle``."""
    lines = []
    for g in circuit.gates:
        qubits = str(g.target) if g.control is None else f"{g.target},{g.control}"
        src = format_source(g.source)
        lines.append(f"{g.kind} {qubits} {src}".rstrip())
    return "\n".join(lines)
