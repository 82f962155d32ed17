"""Strictly ergodic Toeplitz Z^d-subshifts with prescribed entropy.

The package plans construction parameters for a target topological
entropy, evaluates the resulting arrays lazily cell by cell, and
cross-checks every construction formula at desk scale: periodic
positions, block censuses, occurrence frequencies, entropy brackets,
essential periods and the skew-product carry identity.

Layers, bottom up:

``rigor``
    Exact dyadic interval scaffolding over :mod:`mpmath`.
``lattice`` / ``theta``
    Nested boxes over diagonal lattice chains and the positional
    decomposition they induce.
``blocks``
    Permutation-indexed block families and the pasting recursion.
``planner``
    Alphabet/entropy feasibility, level parameters, certificates.
``toeplitz``
    Lazy array handles: evaluation, periodicity, substitution,
    essential-period verdicts, the end-to-end pipeline.
``analysis`` / ``skew``
    Census, frequencies, entropy estimates; odometer coordinates and
    the skew-product equivariance check.
``bruteforce``
    Slow explicit oracles the fast paths are tested against.
"""

from .errors import (
    CellBudgetExceeded,
    DepthBudgetExceeded,
    DigitBudgetExceeded,
    FormatError,
    InfeasibleEntropy,
    PrecisionExhausted,
    ToeplitzForgeError,
    VerificationFailure,
    exit_code_for,
)
from .rigor import Bounds, Dyad, Magnitude, working_precision
from .lattice import (
    DiagonalScale,
    DomainFamily,
    FundamentalDomain,
    ScaledBox,
    interior_box,
    k_boundary,
    shifted_domains,
)
from .theta import ThetaDecomposition, decompose, essential_witness, min_zero_level
from .blocks import (
    BlockSystem,
    ExplicitFamily,
    FullSymmetricFamily,
    HybridFamily,
    SymbolBlock,
    block_eval,
    lehmer_rank,
    lehmer_unrank,
    materialize,
)
from .planner import (
    Certificate,
    ConstructionPlan,
    assemble_scale,
    choose_M,
    choose_N,
    divisibility_witness,
    exact_entropy,
    lambda_lower_bound,
    make_plan,
    parse_plan,
    prime_sequences,
    serialize_plan,
    verify_plan,
)
from .toeplitz import (
    ArrayLike,
    EssentialPeriodVerdict,
    PipelineResult,
    SubstitutedArray,
    SubstitutionMap,
    ToeplitzArray,
    TranslatedArray,
    array_from_plan,
    canonical_substitution,
    entropy_pipeline,
    essential_period_check,
    periodic_points,
    substitute,
)
from .analysis import (
    FrequencyReport,
    LevelEstimate,
    ap,
    birkhoff,
    census,
    census_certificate,
    census_records,
    entropy_estimates,
    frequency_records,
    psi_quantity,
    unique_ergodicity_probe,
)
from .skew import (
    OdometerCoordinate,
    SkewVerdict,
    derived_array_eval,
    epsilon_t,
    pi_t,
    skew_equivariance_check,
    skew_records,
    translation,
    w_t,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "ToeplitzForgeError",
    "InfeasibleEntropy",
    "DepthBudgetExceeded",
    "DigitBudgetExceeded",
    "CellBudgetExceeded",
    "PrecisionExhausted",
    "VerificationFailure",
    "FormatError",
    "exit_code_for",
    # rigor
    "Bounds",
    "Dyad",
    "Magnitude",
    "working_precision",
    # lattice
    "DiagonalScale",
    "DomainFamily",
    "FundamentalDomain",
    "ScaledBox",
    "shifted_domains",
    "interior_box",
    "k_boundary",
    # theta
    "ThetaDecomposition",
    "decompose",
    "min_zero_level",
    "essential_witness",
    # blocks
    "BlockSystem",
    "SymbolBlock",
    "FullSymmetricFamily",
    "HybridFamily",
    "ExplicitFamily",
    "lehmer_rank",
    "lehmer_unrank",
    "block_eval",
    "materialize",
    # planner
    "prime_sequences",
    "exact_entropy",
    "lambda_lower_bound",
    "choose_M",
    "choose_N",
    "Certificate",
    "ConstructionPlan",
    "make_plan",
    "verify_plan",
    "assemble_scale",
    "divisibility_witness",
    "serialize_plan",
    "parse_plan",
    # toeplitz
    "ArrayLike",
    "ToeplitzArray",
    "TranslatedArray",
    "SubstitutionMap",
    "SubstitutedArray",
    "canonical_substitution",
    "substitute",
    "periodic_points",
    "EssentialPeriodVerdict",
    "essential_period_check",
    "array_from_plan",
    "PipelineResult",
    "entropy_pipeline",
    # analysis
    "census",
    "census_certificate",
    "ap",
    "FrequencyReport",
    "unique_ergodicity_probe",
    "LevelEstimate",
    "entropy_estimates",
    "birkhoff",
    "psi_quantity",
    "census_records",
    "frequency_records",
    # skew
    "OdometerCoordinate",
    "translation",
    "pi_t",
    "epsilon_t",
    "w_t",
    "derived_array_eval",
    "SkewVerdict",
    "skew_equivariance_check",
    "skew_records",
]
