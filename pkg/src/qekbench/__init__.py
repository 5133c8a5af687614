"""Trainable quantum embedding kernels on a dense statevector simulator.

Builds the three data/parameter layer orderings (data-first, data-last,
data-weaved), evaluates their fidelity kernels analytically or by shot
sampling, trains them by kernel-target alignment ascent, classifies with
an SVM over precomputed Gram matrices, and benchmarks the lot on small
UCI datasets through the ``qekbench`` CLI.
"""
from .circuit import (
    ARCHITECTURES,
    AnsatzSpec,
    Circuit,
    GateCounts,
    adjoint,
    bind,
    bind_echo,
    build_ansatz,
    count_gates,
    echo_circuit,
    echo_template,
    erase_redundant,
    feature_layer,
    format_circuit,
    param_layer,
    simulate,
)
from .datasets import (
    Dataset,
    fetch,
    load,
    normalize_minmax,
    reduce_features,
    select_split,
    stratified_split,
)
from .kernel import (
    DegenerateKernelError,
    ideal_kernel,
    kernel_cross,
    kernel_matrix,
    kernel_value,
    loschmidt_estimate,
    swap_test_estimate,
    swap_test_value,
    target_alignment,
)
from .statesim import Gate, State, apply_gate, inner_product, new_zero_state, zero_probability
from .svm import BinarySvmModel, OvrModel, accuracy, fit_ovr, predict, solve_dual
from .training import AlignmentTrace, TrainConfig, batch_alignment, fd_gradient, init_params, train

__version__ = "0.1.0"
