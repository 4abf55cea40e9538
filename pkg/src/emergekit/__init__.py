"""Strong-emergence synthesis for discretized periodic field theories.

Realize parameterized theories as operators on periodic grids, construct
parameter maps F with ``S1[phi; eps] = S2[phi; F(eps)]`` through certified
combinators, and verify (or refute) every claimed map numerically against an
independent least-squares oracle.
"""

from .background import (
    COMPLEX,
    REAL,
    Field,
    Grid,
    action_value,
    field_from_values,
    inner_product,
    make_grid,
    sample_field,
)
from .operators import (
    DENSE,
    SYMBOL,
    NotRightInvertible,
    Operator,
    RightInverse,
    StencilSpec,
    adjoint,
    apply,
    combine,
    compose,
    dense_operator,
    diff_operator,
    frobenius_norm,
    identity_operator,
    op_distance,
    operator_power,
    right_inverse,
    scalar_identity_extract,
    scale,
    self_adjointness_defect,
    stencil,
    symbol_operator,
    to_dense,
)
from .parameters import (
    KINDS,
    NONZERO_COMPLEX,
    NONZERO_REAL,
    POSITIVE_REAL,
    ConstraintViolation,
    NoSquareRoot,
    Param,
    ParamSpace,
    SpaceMismatchError,
    VanishingResult,
    concat_params,
    embed_params,
    factored_param,
    make_param,
    nv_combine,
    nv_mul,
    nv_sqrt,
    reduce_param,
    split_param,
    unit_param,
)
from .calculus import (
    CalculusEntry,
    NotInImage,
    act,
    calculus_operator,
    check_action_compatibility,
    invert_r_identity,
)
from .theories import (
    CheckResult,
    CoeffFn,
    CompositionStructure,
    DerivedStructure,
    HomomorphyReport,
    MonomialStructure,
    Poly,
    PolyTerm,
    PolynomialStructure,
    ScaledStructure,
    ScalingStructure,
    SumStructure,
    Theory,
    compose_theories,
    homomorphy_check,
    identity_coeff,
    monomial_rank_report,
    monomial_theory,
    polynomial_theory,
    scale_theory,
    scaling_theory,
    sum_theories,
    theory_power,
    with_homomorphy,
)
from .emergence import (
    DivisibilityCert,
    EmergenceWitness,
    GATE_STEP,
    InfeasibleMap,
    MissingHypothesis,
    NonAffineStructure,
    OracleReport,
    OracleSample,
    ParamMap,
    QFormReport,
    RecurrenceCross,
    SampleRow,
    VerificationReport,
    emerge_composition,
    emerge_monomial,
    emerge_multivariate,
    emerge_powers,
    emerge_recurrence,
    emerge_scaled,
    emerge_sum,
    emerge_univariate,
    map_agreement,
    oracle_solve,
    polarization_reconstruct,
    qform_zero_test,
    recurrence_partial_theory,
    run_verification,
    sample_param,
    verify_table,
    verify_witness,
)
from .config import (
    ConfigError,
    EmergenceTask,
    ExperimentConfig,
    RunParams,
    load_config,
    parse_config,
)
from .report import ENGINE_VERSION

__version__ = ENGINE_VERSION
