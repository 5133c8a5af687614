"""
The three ansatz layouts and what they cost in gates
====================================================

Builds data-first, data-last and data-weaved embedding circuits,
prints a small one gate by gate, and tabulates gate counts at the
sizes where the layouts start to differ.
"""
import numpy as np

from qekbench.circuit import AnsatzSpec, build_ansatz, count_gates, format_circuit

# A 2-qubit, single-layer circuit is small enough to read in full.
for arch in ("data-first", "data-last", "data-weaved"):
    spec = AnsatzSpec(arch, n_qubits=2, n_layers=1)
    circuit = build_ansatz(spec)
    print(f"--- {arch}, 2 qubits, 1 layer ({len(circuit)} gates) ---")
    print(format_circuit(circuit))
    print()

# Layer structure: F encodes features (H wall + RZ), P is the trainable
# block (RY per qubit + CRZ ring).  data-first stacks (F P), data-last
# stacks (P F), data-weaved closes with one extra F.
print("gate counts by depth, 10 qubits")
print(f"{'arch':<12} {'layers':>6} {'1-qubit':>8} {'2-qubit':>8}")
for arch in ("data-first", "data-last", "data-weaved"):
    for layers in (1, 2, 3):
        counts = count_gates(build_ansatz(AnsatzSpec(arch, 10, layers)))
        print(f"{arch:<12} {layers:>6} {counts.one_qubit:>8} {counts.two_qubit:>8}")

# The weaved layout pays one feature layer more than the other two at
# equal L; its L-layer circuit matches a data-first circuit with L+1
# layers minus the final parametric block.
spec = AnsatzSpec("data-weaved", 10, 2)
counts = count_gates(build_ansatz(spec))
print(f"\ndata-weaved L=2 on 10 qubits: {counts.one_qubit} one-qubit, "
      f"{counts.two_qubit} two-qubit gates")
