"""Finite-dimensional generalized probabilistic theories.

State spaces, effects and measurements, certified invertible dynamics,
minimal/maximal tensor products, the measurement-minimized fidelity and a
simulator/auditor for repeated-measurement chains.
"""

from .chain import (
    ChainScenario,
    ChainTrace,
    Verdict,
    audit,
    bound_sequence,
    check_weak_repeatability,
    run_chain,
)
from .core import (
    Effect,
    Measurement,
    State,
    StateSpace,
    evaluate_effect,
    measure,
    membership,
    mixture,
    validate,
)
from .errors import GPTError, NotInvertibleError
from .fidelity import (
    classical_fidelity,
    fidelity,
    fidelity_sampled,
    orthogonality_certificate,
    uhlmann_fidelity,
    verify_fidelity_properties,
)
from .models import bloch_ball, builtin_scenarios, classical_simplex, gbit, get_model, pr_box
from .tensor import (
    MaxTensorState,
    MinTensorState,
    ProductState,
    check_no_signalling,
    is_product_form,
    marginal,
    min_tensor_space,
    product_state,
    validate_max_table,
)
from .transforms import (
    Transformation,
    apply,
    compose,
    inverse,
    permutation_transformation,
    power,
    verify_invertible,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
