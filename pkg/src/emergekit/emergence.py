"""The emergence engine.

Constructive combinators that synthesize parameter maps F with
``S1[phi;eps] = S2[phi;F(eps)]``, an independent least-squares oracle over the
ambient theory's monomial span, and the numerical verifier that decides every
claimed witness by sampling.

Combinators never assert success: each one builds its map from the algebraic
move it encodes (right-inverse peeling, halved sum splits, square-rooted
composition splits) and then measures the defining equation on random
parameters and fields.  Steps whose implicit assumptions fail in the concrete
realization produce an ``infeasible`` verdict naming the step; they are
findings, not errors.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .background import (
    COMPLEX,
    Grid,
    action_value,
    field_from_values,
    sample_field,
)
from .calculus import (
    NotInImage,
    calculus_operator,
    invert_r_identity,
)
from .operators import (
    DENSE,
    NORM_FLOOR,
    NotRightInvertible,
    Operator,
    SYMBOL,
    TAU_ID,
    combine,
    compose,
    frobenius_norm,
    identity_operator,
    op_distance,
    operator_power,
    right_inverse,
    scalar_identity_extract,
    scale,
    self_adjointness_defect,
    to_dense,
)
from .parameters import (
    ConstraintViolation,
    NONZERO_COMPLEX,
    NONZERO_REAL,
    NoSquareRoot,
    POSITIVE_REAL,
    Param,
    ParamSpace,
    SpaceMismatchError,
    VanishingResult,
    concat_params,
    factored_param,
    make_param,
    nv_combine,
    nv_mul,
    nv_sqrt,
    reduce_param,
    split_param,
    unit_param,
)
from .theories import (
    CoeffFn,
    DerivedStructure,
    MonomialStructure,
    Poly,
    PolynomialStructure,
    PolyTerm,
    ScaledStructure,
    ScalingStructure,
    SumStructure,
    Theory,
    compose_theories,
    monomial_theory,
    poly_monomial_operator,
    polynomial_theory,
    scale_theory,
    sum_theories,
    theory_power,
)

__all__ = [
    "DEFAULT_SAMPLES",
    "TOL_SYMBOL",
    "TOL_DENSE",
    "TAU_ZERO",
    "GATE_STEP",
    "InfeasibleMap",
    "MissingHypothesis",
    "NonAffineStructure",
    "ParamMap",
    "SampleRow",
    "VerificationReport",
    "EmergenceWitness",
    "sample_param",
    "run_verification",
    "verify_witness",
    "verify_table",
    "emerge_monomial",
    "emerge_scaled",
    "emerge_sum",
    "emerge_composition",
    "emerge_powers",
    "emerge_univariate",
    "emerge_recurrence",
    "emerge_multivariate",
    "RecurrenceCross",
    "DivisibilityCert",
    "recurrence_partial_theory",
    "OracleSample",
    "OracleReport",
    "oracle_solve",
    "map_agreement",
    "QFormReport",
    "qform_zero_test",
    "polarization_reconstruct",
]

DEFAULT_SAMPLES = 100
MIN_FIELDS = 8
TOL_SYMBOL = 1e-9
TOL_DENSE = 1e-7
TAU_ZERO = 1e-10
ORACLE_SAMPLES = 20
QFORM_CAP = 256

# The constant-coefficient step of the polynomial recursion: splitting off the
# f1-term demands that the (weighted) target operator is a scalar multiple of
# the identity.  Witness maps fail here, by name, whenever it is not.
GATE_STEP = "emerges from f1*I"
PEEL_STEP = "right-inverse peel"
CONSTRAINT_STEP = "nowhere-vanishing constraint"


class InfeasibleMap(Exception):
    """A map evaluation hit a step whose implicit assumption fails."""

    def __init__(self, step: str, residual: float, detail: str = ""):
        self.step = step
        self.residual = float(residual)
        self.detail = detail
        msg = f"infeasible at step {step!r} (relative residual {residual:.3e})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class MissingHypothesis(ValueError):
    """A combinator hypothesis is absent, uncertified, or refuted."""


class NonAffineStructure(ValueError):
    """The ambient theory is not affine in its parameter slots."""


# --- parameter sampling ----------------------------------------------------

def sample_param(space: ParamSpace, rng: np.random.Generator) -> Param:
    """Random parameter: components log-uniform in magnitude over [1e-2, 1e2].

    Complex kinds get a uniform phase, nonzero-real kinds a random sign.
    """
    comps = []
    for _ in range(space.degree):
        mag = 10.0 ** rng.uniform(-2.0, 2.0)
        if space.kind == NONZERO_COMPLEX:
            comps.append(mag * np.exp(2j * np.pi * rng.uniform()))
        elif space.kind == POSITIVE_REAL:
            comps.append(mag + 0j)
        else:
            comps.append(mag * (1.0 if rng.uniform() < 0.5 else -1.0) + 0j)
    return make_param(space, tuple(comps))


# --- maps, reports, witnesses ----------------------------------------------

@dataclass(frozen=True)
class ParamMap:
    """A pure rule from one parameter space to another, with provenance."""

    source_space: ParamSpace
    target_space: ParamSpace
    fn: Callable[[Param], Param]
    provenance: tuple[str, ...] = ()

    def evaluate(self, eps: Param) -> Param:
        if eps.space != self.source_space:
            raise SpaceMismatchError(
                f"map expects {self.source_space}, got {eps.space}"
            )
        out = self.fn(eps)
        if out.space != self.target_space:
            raise SpaceMismatchError(
                f"map produced {out.space}, declared {self.target_space}"
            )
        return out


@dataclass(frozen=True)
class SampleRow:
    eps: tuple[complex, ...]
    image: tuple[complex, ...] | None
    action_residual: float
    operator_residual: float


@dataclass(frozen=True)
class VerificationReport:
    samples: int
    seed: int
    tolerance: float
    max_action_residual: float
    max_operator_residual: float
    verdict: str  # "verified" | "refuted" | "infeasible"
    worst_eps: tuple[complex, ...] | None
    reason: str | None
    self_adjoint_link: bool


@dataclass(frozen=True, eq=False)
class EmergenceWitness:
    target_theory: Theory
    ambient_theory: Theory
    map: ParamMap
    report: VerificationReport
    samples_table: tuple[SampleRow, ...] = ()
    collapsed: "EmergenceWitness | None" = None


_MAP_EVAL_ERRORS = (
    VanishingResult,
    NoSquareRoot,
    ConstraintViolation,
    NotInImage,
    NotRightInvertible,
)


def _pair_residuals(
    grid: Grid, op1: Operator, op2: Operator, field_seeds: Sequence[int]
) -> tuple[float, float, bool]:
    """Action and operator residuals for one evaluated pair, plus whether both
    operators look self-adjoint (the level-equivalence link)."""
    op_res = op_distance(op1, op2)
    sa_ok = (
        self_adjointness_defect(op1) <= TAU_ID
        and self_adjointness_defect(op2) <= TAU_ID
    )
    act_res = 0.0
    norm1 = frobenius_norm(op1)
    for fs in field_seeds:
        phi = sample_field(grid, fs, COMPLEX)
        s1 = action_value(phi, op1)
        s2 = action_value(phi, op2)
        denom = max(abs(s2), norm1, NORM_FLOOR)
        act_res = max(act_res, abs(s1 - s2) / denom)
    return act_res, op_res, sa_ok


def run_verification(
    target: Theory,
    ambient: Theory,
    pmap: ParamMap,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tol: float | None = None,
    fields_per_sample: int = MIN_FIELDS,
) -> tuple[VerificationReport, list[SampleRow]]:
    """Sample (eps, phi) pairs and measure both equation levels.

    The action residual is ``|S1 - S2| / max(|S2|, ||Psi1||_F, floor)`` and the
    operator residual is the relative Frobenius distance of the two evaluated
    operators.  Map evaluations that raise a designated infeasibility signal
    end the run with an ``infeasible`` verdict naming the cause.
    """
    if samples < 1:
        raise ValueError("verification needs at least one sample")
    if fields_per_sample < MIN_FIELDS:
        fields_per_sample = MIN_FIELDS
    if target.grid != ambient.grid:
        raise SpaceMismatchError("target and ambient theories live on different grids")
    rng = np.random.default_rng(seed)
    rows: list[SampleRow] = []
    max_act = 0.0
    max_op = 0.0
    worst: Param | None = None
    worst_res = -1.0
    link = True
    chosen_tol = tol
    for k in range(samples):
        eps = sample_param(target.space, rng)
        field_seeds = [int(rng.integers(0, 2**31 - 1)) for _ in range(fields_per_sample)]
        try:
            delta = pmap.evaluate(eps)
        except InfeasibleMap as e:
            reason = str(e)
            report = VerificationReport(
                samples=k + 1,
                seed=seed,
                tolerance=chosen_tol if chosen_tol is not None else TOL_SYMBOL,
                max_action_residual=max_act,
                max_operator_residual=max_op,
                verdict="infeasible",
                worst_eps=eps.components,
                reason=reason,
                self_adjoint_link=link,
            )
            return report, rows
        except _MAP_EVAL_ERRORS as e:
            report = VerificationReport(
                samples=k + 1,
                seed=seed,
                tolerance=chosen_tol if chosen_tol is not None else TOL_SYMBOL,
                max_action_residual=max_act,
                max_operator_residual=max_op,
                verdict="infeasible",
                worst_eps=eps.components,
                reason=f"map evaluation failed: {e}",
                self_adjoint_link=link,
            )
            return report, rows
        op1 = target.op_map(eps)
        op2 = ambient.op_map(delta)
        if chosen_tol is None:
            sym = op1.backend == SYMBOL and op2.backend == SYMBOL
            chosen_tol = TOL_SYMBOL if sym else TOL_DENSE
        act_res, op_res, sa_ok = _pair_residuals(target.grid, op1, op2, field_seeds)
        link = link and sa_ok
        rows.append(SampleRow(eps.components, delta.components, act_res, op_res))
        if max(act_res, op_res) > worst_res:
            worst_res = max(act_res, op_res)
            worst = eps
        max_act = max(max_act, act_res)
        max_op = max(max_op, op_res)
    verified = max(max_act, max_op) <= chosen_tol
    report = VerificationReport(
        samples=samples,
        seed=seed,
        tolerance=chosen_tol,
        max_action_residual=max_act,
        max_operator_residual=max_op,
        verdict="verified" if verified else "refuted",
        worst_eps=None if verified else worst.components,
        reason=None
        if verified
        else f"max relative residual {worst_res:.3e} exceeds tolerance {chosen_tol:.1e}",
        self_adjoint_link=link,
    )
    return report, rows


def verify_witness(
    w: EmergenceWitness,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tol: float | None = None,
) -> VerificationReport:
    """Independent re-verification of a witness (fresh seed, fresh fields)."""
    report, _ = run_verification(
        w.target_theory, w.ambient_theory, w.map, samples, seed, tol
    )
    return report


def verify_table(
    target: Theory,
    ambient: Theory,
    pairs: Sequence[tuple[Param, Param]],
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tol: float | None = None,
) -> tuple[VerificationReport, list[SampleRow]]:
    """Re-verify stored (eps, image) pairs by exact lookup with fresh fields.

    No interpolation: each verification sample draws one of the given pairs
    and measures the defining equation on it.
    """
    if not pairs:
        raise ValueError("empty map table")
    if samples < 1:
        raise ValueError("verification needs at least one sample")
    if target.grid != ambient.grid:
        raise SpaceMismatchError("target and ambient theories live on different grids")
    rng = np.random.default_rng(seed)
    rows: list[SampleRow] = []
    max_act = 0.0
    max_op = 0.0
    worst: Param | None = None
    worst_res = -1.0
    link = True
    chosen_tol = tol
    for _ in range(samples):
        eps, delta = pairs[int(rng.integers(0, len(pairs)))]
        field_seeds = [int(rng.integers(0, 2**31 - 1)) for _ in range(MIN_FIELDS)]
        op1 = target.op_map(eps)
        op2 = ambient.op_map(delta)
        if chosen_tol is None:
            sym = op1.backend == SYMBOL and op2.backend == SYMBOL
            chosen_tol = TOL_SYMBOL if sym else TOL_DENSE
        act_res, op_res, sa_ok = _pair_residuals(target.grid, op1, op2, field_seeds)
        link = link and sa_ok
        rows.append(SampleRow(eps.components, delta.components, act_res, op_res))
        if max(act_res, op_res) > worst_res:
            worst_res = max(act_res, op_res)
            worst = eps
        max_act = max(max_act, act_res)
        max_op = max(max_op, op_res)
    verified = max(max_act, max_op) <= chosen_tol
    report = VerificationReport(
        samples=samples,
        seed=seed,
        tolerance=chosen_tol,
        max_action_residual=max_act,
        max_operator_residual=max_op,
        verdict="verified" if verified else "refuted",
        worst_eps=None if verified else worst.components,
        reason=None
        if verified
        else f"max relative residual {worst_res:.3e} exceeds tolerance {chosen_tol:.1e}",
        self_adjoint_link=link,
    )
    return report, rows


def _witness(target, ambient, pmap, samples, seed, tol, collapsed=None):
    report, rows = run_verification(target, ambient, pmap, samples, seed, tol)
    return EmergenceWitness(target, ambient, pmap, report, tuple(rows), collapsed)


def _require_flag(t: Theory, name: str) -> None:
    flag = getattr(t, name)
    if flag is None:
        raise MissingHypothesis(f"theory {t.id!r} carries no {name} certificate")
    if not flag.passed:
        raise MissingHypothesis(
            f"theory {t.id!r} is not {name} on parameters "
            f"(check residual {flag.residual:.3e}, witness {flag.witness})"
        )


def _require_verified(w: EmergenceWitness, role: str) -> None:
    if w.report.verdict != "verified":
        raise MissingHypothesis(f"{role} witness has verdict {w.report.verdict!r}")


def _same_theory(a: Theory, b: Theory, role: str) -> None:
    if a is b:
        return
    if a.id == b.id and a.space == b.space and a.grid == b.grid:
        return
    raise SpaceMismatchError(
        f"{role}: witnesses reference different theories ({a.id!r} vs {b.id!r})"
    )


def _scale_param(eps: Param, c: float) -> Param:
    return nv_combine(c, eps, 0.0, eps)


# --- base combinator: monomial ambient -------------------------------------

def emerge_monomial(
    target: Theory,
    g: CoeffFn,
    psi: Operator,
    power: int,
    space: ParamSpace | None = None,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tol: float | None = None,
) -> EmergenceWitness:
    """Emergence from the ambient ``g(delta) * psi^power``.

    The map peels ``psi^power`` with its right inverse, extracts the scalar
    left over (the composed operator must be ~ lambda*I, otherwise the witness
    is infeasible with that residual), and inverts ``g``.
    """
    if power < 0:
        raise ValueError("negative monomial power")
    ambient_space = space or ParamSpace(target.space.kind, 1)
    if not g.invertible:
        raise MissingHypothesis(f"coefficient {g.tag!r} declares no inverse")
    # the right-invertibility hypothesis covers psi itself even when power = 0
    checked = right_inverse(operator_power(psi, max(power, 1)))
    peel = checked.inverse if power >= 1 else identity_operator(psi.grid)
    ambient = monomial_theory(g, psi, power, ambient_space)
    scalar_space = ParamSpace(target.space.kind, 1)

    def fn(eps: Param) -> Param:
        x = compose(target.op_map(eps), peel)
        try:
            lam_param = invert_r_identity(x, scalar_space)
        except NotInImage as e:
            raise InfeasibleMap(
                PEEL_STEP,
                e.residual,
                f"target composed with the right inverse of psi^{power} is not "
                f"a scalar multiple of the identity",
            ) from e
        except ConstraintViolation as e:
            raise InfeasibleMap(CONSTRAINT_STEP, 0.0, str(e)) from e
        lam = reduce_param(lam_param)
        try:
            return g.invert(lam, ambient_space)
        except (ConstraintViolation, VanishingResult) as e:
            raise InfeasibleMap(CONSTRAINT_STEP, 0.0, str(e)) from e

    pmap = ParamMap(
        target.space,
        ambient_space,
        fn,
        (f"monomial[{g.tag} * psi^{power}]",),
    )
    return _witness(target, ambient, pmap, samples, seed, tol)


def emerge_scaled(
    witness: EmergenceWitness,
    c: complex,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tol: float | None = None,
) -> EmergenceWitness:
    """Transport a witness to the rescaled ambient ``c * S2`` via F/c."""
    if c == 0:
        raise ValueError("scale constant must be nonzero")
    _require_flag(witness.target_theory, "additive")
    _require_verified(witness, "input")
    ambient = scale_theory(witness.ambient_theory, c)
    inner = witness.map

    def fn(eps: Param) -> Param:
        d = inner.evaluate(eps)
        try:
            return nv_combine(1.0 / c, d, 0.0, d)
        except (VanishingResult, ConstraintViolation) as e:
            raise InfeasibleMap(
                CONSTRAINT_STEP, 0.0, f"1/{c} scaling leaves the parameter kind: {e}"
            ) from e

    pmap = ParamMap(
        inner.source_space,
        inner.target_space,
        fn,
        inner.provenance + (f"ambient scaled by {c}",),
    )
    return _witness(witness.target_theory, ambient, pmap, samples, seed, tol)


# --- sum and composition ---------------------------------------------------

def emerge_sum(
    w_f: EmergenceWitness,
    w_g: EmergenceWitness,
    w_h: EmergenceWitness,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tol: float | None = None,
) -> EmergenceWitness:
    """Given F: S1 from S2, G: S1 from S3 and H: S2 from S3, emerge S1 from
    S2 + S3 via ``K(eps) = (F(eps/2), G(eps/2))``.

    The halved split uses additivity of S1.  When S3 is additive as well, the
    collapsed single-theory map ``L(eps) = H(F(eps/2)) + G(eps/2)`` is built
    and verified too, and attached as ``collapsed``.
    """
    s1 = w_f.target_theory
    s2 = w_f.ambient_theory
    s3 = w_g.ambient_theory
    _same_theory(w_g.target_theory, s1, "target of G")
    _same_theory(w_h.target_theory, s2, "target of H")
    _same_theory(w_h.ambient_theory, s3, "ambient of H")
    _require_flag(s1, "additive")
    _require_verified(w_f, "F")
    _require_verified(w_g, "G")
    _require_verified(w_h, "H")
    ambient = sum_theories(s2, s3)

    def fn(eps: Param) -> Param:
        half = _scale_param(eps, 0.5)
        return concat_params(w_f.map.evaluate(half), w_g.map.evaluate(half))

    pmap = ParamMap(
        s1.space,
        ambient.space,
        fn,
        ("sum split: (F(eps/2), G(eps/2))",)
        + tuple(f"F: {p}" for p in w_f.map.provenance)
        + tuple(f"G: {p}" for p in w_g.map.provenance),
    )
    collapsed = None
    if s3.additive is not None and s3.additive.passed:

        def lfn(eps: Param) -> Param:
            half = _scale_param(eps, 0.5)
            return nv_combine(
                1.0,
                w_h.map.evaluate(w_f.map.evaluate(half)),
                1.0,
                w_g.map.evaluate(half),
            )

        lmap = ParamMap(
            s1.space,
            s3.space,
            lfn,
            ("collapsed sum: H(F(eps/2)) + G(eps/2)",),
        )
        collapsed = _witness(s1, s3, lmap, samples, seed, tol)
    return _witness(s1, ambient, pmap, samples, seed, tol, collapsed=collapsed)


def emerge_composition(
    w_f: EmergenceWitness,
    w_g: EmergenceWitness,
    w_h: EmergenceWitness,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tol: float | None = None,
) -> EmergenceWitness:
    """Emerge S1 from S2 o S3 via ``K(eps) = (F(sqrt(eps)), G(sqrt(eps)))``.

    Uses multiplicativity of S1 and componentwise principal square roots.
    When S3 is multiplicative the collapsed map
    ``nv_mul(G(sqrt(eps)), H(F(sqrt(eps))))`` into S3 alone is attached.
    """
    s1 = w_f.target_theory
    s2 = w_f.ambient_theory
    s3 = w_g.ambient_theory
    _same_theory(w_g.target_theory, s1, "target of G")
    _same_theory(w_h.target_theory, s2, "target of H")
    _same_theory(w_h.ambient_theory, s3, "ambient of H")
    _require_flag(s1, "multiplicative")
    _require_verified(w_f, "F")
    _require_verified(w_g, "G")
    _require_verified(w_h, "H")
    ambient = compose_theories(s2, s3)

    def fn(eps: Param) -> Param:
        root = nv_sqrt(eps)
        return concat_params(w_f.map.evaluate(root), w_g.map.evaluate(root))

    pmap = ParamMap(
        s1.space,
        ambient.space,
        fn,
        ("composition split: (F(sqrt(eps)), G(sqrt(eps)))",)
        + tuple(f"F: {p}" for p in w_f.map.provenance)
        + tuple(f"G: {p}" for p in w_g.map.provenance),
    )
    collapsed = None
    if s3.multiplicative is not None and s3.multiplicative.passed:

        def cfn(eps: Param) -> Param:
            root = nv_sqrt(eps)
            return nv_mul(
                w_g.map.evaluate(root),
                w_h.map.evaluate(w_f.map.evaluate(root)),
            )

        cmap = ParamMap(
            s1.space,
            s3.space,
            cfn,
            ("collapsed composition: G(sqrt(eps)) * H(F(sqrt(eps)))",),
        )
        collapsed = _witness(s1, s3, cmap, samples, seed, tol)
    return _witness(s1, ambient, pmap, samples, seed, tol, collapsed=collapsed)


def emerge_powers(
    t: Theory,
    l: int,
    m: int,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tol: float | None = None,
) -> EmergenceWitness:
    """Witness that the m-fold composition power of ``t`` emerges from the
    l-fold one.

    The multiplicative hypothesis lets the whole parameter block collapse to a
    single componentwise product, which repeated square roots then spread back
    over ``l`` composition slots.
    """
    if l < 1 or m < 1:
        raise ValueError("composition powers start at 1")
    _require_flag(t, "multiplicative")
    target = theory_power(t, m)
    ambient = theory_power(t, l)
    deg = t.space.degree

    def factor(q: Param, k: int) -> list[Param]:
        if k == 1:
            return [q]
        r = nv_sqrt(q)
        return [r] + factor(r, k - 1)

    def fn(eps: Param) -> Param:
        blocks = split_param(eps, (deg,) * m)
        q = blocks[0]
        for b in blocks[1:]:
            q = nv_mul(q, b)
        parts = factor(q, l)
        out = parts[0]
        for p in parts[1:]:
            out = concat_params(out, p)
        return out

    pmap = ParamMap(
        target.space,
        ambient.space,
        fn,
        (f"powers: S^{m} from S^{l} by repeated square roots",),
    )
    return _witness(target, ambient, pmap, samples, seed, tol)


# --- polynomial ambients ---------------------------------------------------

def _check_slots(poly: Poly) -> None:
    slots = [t.slot for t in poly.terms]
    if len(set(slots)) != len(slots):
        raise MissingHypothesis(
            "polynomial emergence needs one parameter slot per term"
        )
    if set(slots) != set(range(poly.n_slots)):
        raise MissingHypothesis(
            f"parameter slots {sorted(set(slots))} are not contiguous"
        )


def _check_coefficients(poly: Poly) -> None:
    for t in poly.terms:
        if not t.coeff.invertible:
            raise MissingHypothesis(
                f"coefficient {t.coeff.tag!r} declares no inverse"
            )
        entry = calculus_operator(t.coeff, poly.slot_space, samples=32, seed=1)
        if entry.validity != "certified":
            raise MissingHypothesis(
                f"coefficient {t.coeff.tag!r} has no certified functional "
                f"calculus (validity {entry.validity!r}, "
                f"residual {entry.residual:.3e})"
            )


def _cascade_weights(n: int) -> list[float]:
    """Halving cascade: 1/2, 1/4, ..., with the last two weights equal."""
    if n == 1:
        return [1.0]
    ws = [0.5 ** (j + 1) for j in range(n - 1)]
    return ws + [ws[-1]]


def emerge_univariate(
    target: Theory,
    poly: Poly,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tol: float | None = None,
) -> EmergenceWitness:
    """Emergence from a univariate operator polynomial, term by term.

    A single-term polynomial is the monomial base case.  With several terms,
    the target is split by the halving cascade and each piece is peeled by the
    right inverse of its monomial; splitting off the constant-coefficient term
    additionally requires the target operator itself to be ~ lambda*I, which
    is tested per sample and reported as the named infeasible step when it
    fails.
    """
    if poly.n_variables != 1:
        raise ValueError("univariate emergence expects exactly one variable")
    _require_flag(target, "additive")
    _check_slots(poly)
    _check_coefficients(poly)
    psi = poly.variables[0]
    right_inverse(psi)  # hypothesis check; per-term peels follow
    ambient = polynomial_theory(poly)
    terms = sorted(poly.terms, key=lambda t: t.alpha[0])
    scalar_space = ParamSpace(target.space.kind, 1)

    if len(terms) == 1:
        t = terms[0]
        base = emerge_monomial(
            target, t.coeff, psi, t.alpha[0], poly.slot_space, samples, seed, tol
        )
        pmap = replace(base.map, provenance=base.map.provenance + ("univariate base case",))
        return _witness(target, ambient, pmap, samples, seed, tol)

    weights = _cascade_weights(len(terms))
    peels = []
    for t in terms:
        a = t.alpha[0]
        if a == 0:
            peels.append(identity_operator(psi.grid))
        else:
            peels.append(right_inverse(operator_power(psi, a)).inverse)

    def fn(eps: Param) -> Param:
        gate_op = target.op_map(eps)
        _, gate_res = scalar_identity_extract(gate_op)
        if gate_res > TAU_ID:
            raise InfeasibleMap(
                GATE_STEP,
                gate_res,
                "the target operator is not a scalar multiple of the identity",
            )
        slot_values: list[Param | None] = [None] * poly.n_slots
        for t, w, peel in zip(terms, weights, peels):
            piece = compose(target.op_map(_scale_param(eps, w)), peel)
            try:
                lam_param = invert_r_identity(piece, scalar_space)
            except NotInImage as e:
                raise InfeasibleMap(
                    PEEL_STEP,
                    e.residual,
                    f"peeled piece for psi^{t.alpha[0]} is not a scalar "
                    f"multiple of the identity",
                ) from e
            except ConstraintViolation as e:
                raise InfeasibleMap(CONSTRAINT_STEP, 0.0, str(e)) from e
            try:
                slot_values[t.slot] = t.coeff.invert(
                    reduce_param(lam_param), poly.slot_space
                )
            except (ConstraintViolation, VanishingResult) as e:
                raise InfeasibleMap(CONSTRAINT_STEP, 0.0, str(e)) from e
        out = slot_values[0]
        for sv in slot_values[1:]:
            out = concat_params(out, sv)
        return out

    pmap = ParamMap(
        target.space,
        ambient.space,
        fn,
        (
            f"univariate cascade over powers "
            f"{tuple(t.alpha[0] for t in terms)} with weights {tuple(weights)}",
        ),
    )
    return _witness(target, ambient, pmap, samples, seed, tol)


def _peeled_target(
    target: Theory, weight: float, peel: Operator, tag: str
) -> Theory:
    # additivity survives fixed right-composition and positive scalar weights,
    # so the certificate is carried over rather than re-sampled
    def op_map(eps: Param) -> Operator:
        return compose(target.op_map(_scale_param(eps, weight)), peel)

    return Theory(
        f"{target.id}|{tag}",
        target.grid,
        target.space,
        op_map,
        DerivedStructure(tag),
        additive=target.additive,
        multiplicative=None,
    )


def emerge_multivariate(
    target: Theory,
    poly: Poly,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tol: float | None = None,
) -> EmergenceWitness:
    """Emergence from a multivariate operator polynomial.

    The polynomial is regrouped as a univariate polynomial in its last
    variable whose coefficients are polynomials in the remaining ones; each
    coefficient group is peeled by the right inverse of the corresponding
    power and handled recursively, with the halving cascade splitting the
    target across groups.  ``r = 1`` delegates to the univariate combinator.
    """
    if poly.n_variables == 1:
        return emerge_univariate(target, poly, samples, seed, tol)
    _require_flag(target, "additive")
    _check_slots(poly)
    _check_coefficients(poly)
    for v in poly.variables:
        right_inverse(v)
    ambient = polynomial_theory(poly)
    last = poly.variables[-1]

    grouped: dict[int, list[PolyTerm]] = {}
    for t in poly.terms:
        grouped.setdefault(t.alpha[-1], []).append(t)
    exponents = sorted(grouped)
    weights = _cascade_weights(len(exponents))

    sub_maps: list[tuple[list[int], ParamMap]] = []
    provenance: list[str] = [
        f"regroup by last variable: exponents {tuple(exponents)}, "
        f"weights {tuple(weights)}"
    ]
    for i, w in zip(exponents, weights):
        group = grouped[i]
        peel = (
            identity_operator(last.grid)
            if i == 0
            else right_inverse(operator_power(last, i)).inverse
        )
        orig_slots = sorted(t.slot for t in group)
        renumber = {s: j for j, s in enumerate(orig_slots)}
        sub_terms = tuple(
            PolyTerm(t.alpha[:-1], t.coeff, renumber[t.slot]) for t in group
        )
        sub_poly = Poly(poly.variables[:-1], sub_terms, poly.slot_space)
        sub_target = _peeled_target(target, w, peel, f"peel x{poly.n_variables}^{i}")
        sub = emerge_multivariate(sub_target, sub_poly, samples, seed, tol)
        if sub.report.verdict != "verified":
            # honest propagation: the failing step is inside the group map,
            # which the assembled map will hit on its first evaluation
            provenance.append(
                f"group x^{i}: sub-emergence verdict {sub.report.verdict}"
            )
        sub_maps.append((orig_slots, sub.map))
        provenance.extend(f"group x^{i}: {p}" for p in sub.map.provenance)

    lp = poly.slot_space.degree
    full_space = ambient.space

    def fn(eps: Param) -> Param:
        flat: list[complex | None] = [None] * (poly.n_slots * lp)
        for (orig_slots, smap) in sub_maps:
            sub_param = smap.evaluate(eps)
            blocks = split_param(sub_param, (lp,) * len(orig_slots))
            for s, block in zip(orig_slots, blocks):
                flat[s * lp : (s + 1) * lp] = list(block.components)
        return make_param(full_space, tuple(flat))

    pmap = ParamMap(target.space, full_space, fn, tuple(provenance))
    return _witness(target, ambient, pmap, samples, seed, tol)


# --- recurrence over sums of compositions ----------------------------------

@dataclass(frozen=True)
class DivisibilityCert:
    """Certificate that an operator factors through a monomial from the right:
    the k-th summand's operator family is ``Q o (g(kappa) psi^power)``."""

    q: Operator
    g: CoeffFn
    psi: Operator
    power: int


@dataclass(frozen=True)
class RecurrenceCross:
    """Cross-emergence certificates consumed at induction step m -> m+1."""

    q_theory: Theory
    partial_from_q: EmergenceWitness
    next_from_q: EmergenceWitness
    partial_from_next: EmergenceWitness | None


def recurrence_partial_theory(
    sums: Sequence[tuple[EmergenceWitness, ...]], m: int
) -> Theory:
    """The accumulated theory ``sum_{j<=m} S2_j o S3_j`` (1-based ``m``)."""
    parts = []
    for w2, w3, *_ in sums[:m]:
        parts.append(compose_theories(w2.ambient_theory, w3.ambient_theory))
    out = parts[0]
    for p in parts[1:]:
        out = sum_theories(out, p)
    return out


def _theories_extensionally_equal(a: Theory, b: Theory, seed: int = 7) -> bool:
    if a is b:
        return True
    if a.grid != b.grid or a.space != b.space:
        return False
    rng = np.random.default_rng(seed)
    for _ in range(4):
        eps = sample_param(a.space, rng)
        if op_distance(a.op_map(eps), b.op_map(eps)) > 1e-8:
            return False
    return True


def emerge_recurrence(
    target: Theory,
    sums: Sequence[tuple[EmergenceWitness, ...]],
    divisibility: Sequence[DivisibilityCert] = (),
    cross: Sequence[RecurrenceCross | None] = (),
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    tol: float | None = None,
) -> EmergenceWitness:
    """Emergence from the accumulated sum of compositions
    ``sum_j S2_j o S3_j``, by induction over the summands.

    ``sums[j]`` must be the triple of witnesses (target from S2_j, target from
    S3_j, S2_j from S3_j); the third entry is hypothesis 2 and its absence is
    an error naming it.  ``divisibility[k-2]`` certifies hypothesis 3 for the
    k-th summand (k >= 2) and is checked numerically.  ``cross[m-1]`` carries
    the hypothesis 4 and 5 certificates for the induction step at m.  The
    induction map is ``K_{m+1}(eps) = (K_m(eps/2), C_{m+1}(eps/2))`` with
    ``C_j`` the pairwise composition witness.
    """
    l = len(sums)
    if l < 1:
        raise ValueError("recurrence needs at least one summand")
    norm_sums = []
    for j, entry in enumerate(sums):
        entry = tuple(entry)
        if len(entry) == 2:
            raise MissingHypothesis(
                f"summand {j + 1}: hypothesis 2 certificate missing "
                f"(S2_{j + 1} emerges from S3_{j + 1})"
            )
        if len(entry) != 3:
            raise ValueError(f"summand {j + 1}: expected a witness triple")
        norm_sums.append(entry)

    pair_witnesses = []
    for j, (w2, w3, w23) in enumerate(norm_sums):
        w = emerge_composition(w2, w3, w23, samples, seed, tol)
        if w.report.verdict != "verified":
            raise MissingHypothesis(
                f"summand {j + 1}: pairwise composition emergence has verdict "
                f"{w.report.verdict!r} ({w.report.reason})"
            )
        pair_witnesses.append(w)

    if l == 1:
        return pair_witnesses[0]

    _require_flag(target, "additive")
    if len(divisibility) != l - 1:
        raise MissingHypothesis(
            f"hypothesis 3 needs {l - 1} divisibility certificates "
            f"(k = 2..{l}), got {len(divisibility)}"
        )
    rng = np.random.default_rng(seed + 1)
    for k, cert in enumerate(divisibility, start=2):
        right_inverse(cert.psi)
        s3k = norm_sums[k - 1][1].ambient_theory
        worst = 0.0
        for _ in range(8):
            kappa = sample_param(s3k.space, rng)
            lhs = s3k.op_map(kappa)
            rhs = compose(
                cert.q,
                scale(cert.g(kappa), operator_power(cert.psi, cert.power)),
            )
            worst = max(worst, op_distance(lhs, rhs))
        if worst > 1e-8:
            raise MissingHypothesis(
                f"hypothesis 3 fails for summand {k}: the operator family is "
                f"not Q o ({cert.g.tag} * psi^{cert.power}) "
                f"(residual {worst:.3e})"
            )

    if len(cross) != l - 1:
        raise MissingHypothesis(
            f"hypotheses 4-5 need {l - 1} cross certificates (m = 1..{l - 1}), "
            f"got {len(cross)}"
        )
    for m, c in enumerate(cross, start=1):
        partial = recurrence_partial_theory(norm_sums, m)
        s2_next = norm_sums[m][0].ambient_theory
        if c is None or c.partial_from_q is None or c.next_from_q is None:
            raise MissingHypothesis(
                f"hypothesis 4 certificate missing at m={m}: the accumulated "
                f"theory and S2,m+1 must emerge from the Q realization"
            )
        _require_verified(c.partial_from_q, f"hypothesis 4 (m={m}, accumulated)")
        _require_verified(c.next_from_q, f"hypothesis 4 (m={m}, S2,m+1)")
        if not _theories_extensionally_equal(c.partial_from_q.target_theory, partial):
            raise MissingHypothesis(
                f"hypothesis 4 at m={m}: certificate target does not match the "
                f"accumulated theory"
            )
        if not _theories_extensionally_equal(c.next_from_q.target_theory, s2_next):
            raise MissingHypothesis(
                f"hypothesis 4 at m={m}: certificate target does not match S2,m+1"
            )
        if c.partial_from_next is None:
            raise MissingHypothesis(
                f"missing hypothesis 5 certificate: S^m_(deltaJ,kappaJ) "
                f"emerges from S2,m+1 (at m={m})"
            )
        _require_verified(c.partial_from_next, f"hypothesis 5 (m={m})")
        if not _theories_extensionally_equal(
            c.partial_from_next.target_theory, partial
        ) or not _theories_extensionally_equal(
            c.partial_from_next.ambient_theory, s2_next
        ):
            raise MissingHypothesis(
                f"hypothesis 5 at m={m}: certificate endpoints do not match"
            )

    ambient = recurrence_partial_theory(norm_sums, l)
    k_map = pair_witnesses[0].map
    for m in range(1, l):
        prev = k_map
        c_map = pair_witnesses[m].map

        def fn(eps: Param, prev=prev, c_map=c_map) -> Param:
            half = _scale_param(eps, 0.5)
            return concat_params(prev.evaluate(half), c_map.evaluate(half))

        k_map = ParamMap(
            target.space,
            ParamSpace(
                target.space.kind,
                prev.target_space.degree + c_map.target_space.degree,
            ),
            fn,
            prev.provenance + (f"recurrence step m={m + 1}: (K(eps/2), C(eps/2))",),
        )
    return _witness(target, ambient, k_map, samples, seed, tol)


# --- least-squares oracle --------------------------------------------------

@dataclass(frozen=True)
class OracleSample:
    eps: tuple[complex, ...]
    solution: tuple[complex, ...]
    residual: float
    below_tau: tuple[int, ...]


@dataclass(frozen=True)
class OracleReport:
    verdict: str  # "verified" | "refuted" | "emergent_only_in_closure"
    full_rank: bool
    rank: int
    n_slots: int
    max_residual: float
    flagged: tuple[int, ...]
    rows: tuple[OracleSample, ...]
    map: "ParamMap | None"


def _affine_basis(ambient: Theory):
    """Basis operators, one per affine parameter slot, plus the rebuild rule
    turning solved slot values back into an ambient parameter."""
    s = ambient.structure
    if isinstance(s, ScalingStructure):
        space = ambient.space

        def rebuild(xs):
            return factored_param(space, xs[0])

        return [s.psi0], rebuild
    if isinstance(s, MonomialStructure):
        if s.coeff.linear_c is None:
            raise NonAffineStructure(
                f"monomial coefficient {s.coeff.tag!r} is not linear"
            )
        space = ambient.space
        basis = [scale(s.coeff.linear_c, operator_power(s.psi, s.power))]

        def rebuild(xs):
            return factored_param(space, xs[0])

        return basis, rebuild
    if isinstance(s, PolynomialStructure):
        poly = s.poly
        if poly.slot_space.degree != 1:
            raise NonAffineStructure(
                f"slot degree {poly.slot_space.degree} > 1 is not affine"
            )
        bases: list[Operator | None] = [None] * poly.n_slots
        for t in poly.terms:
            if t.coeff.linear_c is None:
                raise NonAffineStructure(
                    f"coefficient {t.coeff.tag!r} is not linear"
                )
            mono = scale(t.coeff.linear_c, poly_monomial_operator(poly, t.alpha))
            bases[t.slot] = (
                mono if bases[t.slot] is None else combine(1.0, bases[t.slot], 1.0, mono)
            )
        if any(b is None for b in bases):
            raise NonAffineStructure("polynomial has unused parameter slots")
        space = ambient.space

        def rebuild(xs):
            return make_param(space, tuple(xs))

        return list(bases), rebuild
    if isinstance(s, SumStructure):
        left_b, left_r = _affine_basis(s.left)
        right_b, right_r = _affine_basis(s.right)
        nl = len(left_b)

        def rebuild(xs):
            return concat_params(left_r(xs[:nl]), right_r(xs[nl:]))

        return left_b + right_b, rebuild
    if isinstance(s, ScaledStructure):
        base_b, base_r = _affine_basis(s.base)
        return [scale(s.factor, b) for b in base_b], base_r
    raise NonAffineStructure(
        f"ambient structure {type(s).__name__} is not affine in its parameters"
    )


def oracle_solve(
    target: Theory,
    ambient: Theory,
    eps_samples: Sequence[Param] | None = None,
    samples: int = ORACLE_SAMPLES,
    seed: int = 0,
    tol: float = TOL_SYMBOL,
    tau_zero: float = TAU_ZERO,
) -> OracleReport:
    """Independent ground truth: per-parameter min-norm least squares over the
    ambient monomial span.

    Residuals above ``tol`` refute; exact solutions with components at or
    below ``tau_zero`` leave the nowhere-vanishing set and yield the distinct
    verdict ``emergent_only_in_closure``.
    """
    if target.grid != ambient.grid:
        raise SpaceMismatchError("target and ambient theories live on different grids")
    bases, rebuild = _affine_basis(ambient)
    n_slots = len(bases)
    probe = target.op_map(unit_param(target.space))
    dense_mode = probe.backend == DENSE or any(b.backend == DENSE for b in bases)

    def vec(op: Operator) -> np.ndarray:
        if dense_mode:
            return to_dense(op).data.ravel()
        return op.data.ravel()

    a = np.stack([vec(b) for b in bases], axis=1)
    rank = int(np.linalg.matrix_rank(a, tol=1e-10 * max(1.0, float(np.linalg.norm(a)))))

    if eps_samples is None:
        rng = np.random.default_rng(seed)
        eps_samples = [sample_param(target.space, rng) for _ in range(samples)]

    def solve(eps: Param) -> tuple[np.ndarray, float]:
        b = vec(target.op_map(eps))
        sol, _, _, _ = np.linalg.lstsq(a, b, rcond=None)
        res = float(np.linalg.norm(a @ sol - b)) / max(
            float(np.linalg.norm(b)), NORM_FLOOR
        )
        return sol, res

    rows = []
    max_res = 0.0
    flagged: set[int] = set()
    for eps in eps_samples:
        sol, res = solve(eps)
        below = tuple(int(i) for i in np.flatnonzero(np.abs(sol) <= tau_zero))
        flagged.update(below)
        max_res = max(max_res, res)
        rows.append(OracleSample(eps.components, tuple(map(complex, sol)), res, below))

    if max_res > tol:
        verdict = "refuted"
    elif flagged:
        verdict = "emergent_only_in_closure"
    else:
        verdict = "verified"

    def map_fn(eps: Param) -> Param:
        sol, res = solve(eps)
        if res > tol:
            raise InfeasibleMap("least-squares solve", res, "residual exceeds tolerance")
        try:
            return rebuild(tuple(map(complex, sol)))
        except (VanishingResult, ConstraintViolation) as e:
            raise InfeasibleMap(CONSTRAINT_STEP, 0.0, str(e)) from e

    omap = ParamMap(
        target.space, ambient.space, map_fn, ("min-norm least squares",)
    )
    return OracleReport(
        verdict=verdict,
        full_rank=rank == n_slots,
        rank=rank,
        n_slots=n_slots,
        max_residual=max_res,
        flagged=tuple(sorted(flagged)),
        rows=tuple(rows),
        map=omap,
    )


def map_agreement(
    a: ParamMap,
    b: ParamMap,
    samples: int = 20,
    seed: int = 0,
) -> float:
    """Max relative componentwise distance of two maps on sampled parameters."""
    if a.source_space != b.source_space or a.target_space != b.target_space:
        raise SpaceMismatchError("maps have different endpoint spaces")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        eps = sample_param(a.source_space, rng)
        va = np.asarray(a.evaluate(eps).components)
        vb = np.asarray(b.evaluate(eps).components)
        denom = max(float(np.linalg.norm(vb)), NORM_FLOOR)
        worst = max(worst, float(np.linalg.norm(va - vb)) / denom)
    return worst


# --- quadratic-form zero test ----------------------------------------------

@dataclass(frozen=True)
class QFormReport:
    passed: bool
    max_abs_q: float
    frobenius: float
    volume: float
    lower_bound: float
    upper_bound: float
    sa_defect: float


def _basis_values(grid: Grid, i: int) -> np.ndarray:
    v = np.zeros(grid.npoints, dtype=np.complex128)
    v[i] = 1.0
    return v.reshape(grid.sizes)


def polarization_reconstruct(t_op: Operator) -> np.ndarray:
    """Rebuild the dense matrix of an operator from quadratic-form values only.

    Off-diagonal entries come from the four-point polarization identity
    ``<e_i, T e_j> = (1/4) sum_k i^{-k} q(e_i + i^k e_j)``; the diagonal is
    ``q(e_i)``.  Everything is normalized by the grid cell volume.
    """
    grid = t_op.grid
    n = grid.npoints
    if n > QFORM_CAP:
        raise ValueError(
            f"grid has {n} points; brute-force form probing caps at {QFORM_CAP}"
        )
    vol = grid.cell_volume

    def q(values: np.ndarray) -> complex:
        return action_value(field_from_values(grid, values), t_op)

    t = np.zeros((n, n), dtype=np.complex128)
    basis = [_basis_values(grid, i) for i in range(n)]
    for i in range(n):
        t[i, i] = q(basis[i]) / vol
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            acc = 0.0 + 0.0j
            for k in range(4):
                c = 1j**k
                acc += (1j ** (-k)) * q(basis[i] + c * basis[j])
            t[i, j] = acc / (4.0 * vol)
    return t


def qform_zero_test(
    t_op: Operator, tol: float, coercive: bool = False
) -> QFormReport:
    """Decide whether the quadratic form of ``t_op`` vanishes identically.

    Probes every basis field and every polarization combination; passing means
    the maximum |q| over all probes is at most ``tol``.  The reconstructed
    matrix supplies two-sided bounds tying |q| to the operator norm, which is
    what licenses the equivalence "form vanishes iff operator vanishes" for
    self-adjoint (or declared coercive) operators.
    """
    grid = t_op.grid
    n = grid.npoints
    if n > QFORM_CAP:
        raise ValueError(
            f"grid has {n} points; brute-force form probing caps at {QFORM_CAP}"
        )
    defect = self_adjointness_defect(t_op)
    if defect > TAU_ID and not coercive:
        raise ValueError(
            f"operator is not self-adjoint (relative defect {defect:.3e}) "
            f"and was not declared coercive"
        )
    vol = grid.cell_volume

    def q(values: np.ndarray) -> complex:
        return action_value(field_from_values(grid, values), t_op)

    basis = [_basis_values(grid, i) for i in range(n)]
    max_q = 0.0
    for i in range(n):
        max_q = max(max_q, abs(q(basis[i])))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            for k in range(4):
                max_q = max(max_q, abs(q(basis[i] + (1j**k) * basis[j])))
    frob = float(np.linalg.norm(polarization_reconstruct(t_op)))
    return QFormReport(
        passed=max_q <= tol,
        max_abs_q=max_q,
        frobenius=frob,
        volume=vol,
        lower_bound=vol * frob / n,
        upper_bound=2.0 * vol * frob,
        sa_defect=defect,
    )
