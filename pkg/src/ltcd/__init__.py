"""Exact tools for quantified derandomization of sparse linear threshold circuits."""

from .circuit import (
    LTF,
    STAR,
    Restriction,
    ThresholdCircuit,
    ThresholdNetwork,
    acceptance_count,
    acceptance_probability,
    closeness,
    dumps_circuit,
    eval_circuit,
    eval_ltf,
    loads_circuit,
    points,
    rejection_count,
    restrict_circuit,
    restrict_ltf,
)
from .codes import BalancedCode, LinearCode, balanced_encode, johnson_params, tensor_encode
from .derand import (
    DerandVerdict,
    Depth2Generator,
    derandomize_depth2,
    harness_kw_restriction,
    prg_depth2,
    quantified_derandomize,
)
from .designs import WeakDesign, build_weak_design, verify_weak_design
from .errors import BudgetExceeded, LtcdError, MalformedCircuit, NoSuccessfulSeed, ParameterInfeasible, StageFailure
from .ltf import critical_index, is_regular, is_t_balanced
from .restriction import LayerReductionParams, RestrictionSources, reduce_layer, restrict_full
from .sampler import (
    SamplerSpec,
    build_reduction_circuit,
    check_extractor_equivalence,
    derive_sampler_params,
    desk_sampler_spec,
    sample_output,
    verify_sampler,
)
from .sources import AlmostKwiseSource, UniformSource, check_concentration_equivalence, concentration_gap

__version__ = "0.1.0"
