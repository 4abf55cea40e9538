"""Parameterized theories: rules sending parameters to operators.

A theory couples a parameter space with a pure map ``op_map`` from parameters
to operators on a fixed grid, plus a structure descriptor that downstream
synthesis dispatches on.  Homomorphy (additivity / multiplicativity of the
parameterization) is never taken on faith: flags hold the result of an actual
sampled check, and constructors that can decide a flag cheaply do so up front.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .background import Grid
from .calculus import act
from .operators import (
    Operator,
    TAU_ID,
    combine,
    compose,
    identity_operator,
    op_distance,
    operator_power,
    scale,
    to_dense,
)
from .parameters import (
    Param,
    ParamSpace,
    SpaceMismatchError,
    VanishingResult,
    nv_combine,
    nv_mul,
    reduce_param,
    split_param,
)

__all__ = [
    "CoeffFn",
    "PolyTerm",
    "Poly",
    "Theory",
    "CheckResult",
    "HomomorphyReport",
    "ScalingStructure",
    "MonomialStructure",
    "PolynomialStructure",
    "SumStructure",
    "CompositionStructure",
    "ScaledStructure",
    "DerivedStructure",
    "scaling_theory",
    "monomial_theory",
    "polynomial_theory",
    "sum_theories",
    "compose_theories",
    "scale_theory",
    "theory_power",
    "homomorphy_check",
    "with_homomorphy",
    "monomial_rank_report",
]


@dataclass(frozen=True)
class CoeffFn:
    """A scalar coefficient function of one parameter slot.

    Linear coefficients (``f(d) = c * reduce(d)``, ``c != 0``) carry their
    constant and an exact inverse; arbitrary callables may declare an inverse
    or leave it absent.
    """

    tag: str
    fn: Callable[[Param], complex]
    inv: Callable[[complex, ParamSpace], Param] | None = None
    linear_c: complex | None = None

    def __call__(self, d: Param) -> complex:
        return complex(self.fn(d))

    @property
    def invertible(self) -> bool:
        return self.inv is not None

    def invert(self, value: complex, space: ParamSpace) -> Param:
        if self.inv is None:
            raise ValueError(f"coefficient {self.tag!r} has no declared inverse")
        return self.inv(value, space)

    @staticmethod
    def linear(c: complex) -> "CoeffFn":
        c = complex(c)
        if c == 0:
            raise ValueError("linear coefficient constant must be nonzero")

        def fn(d: Param) -> complex:
            return c * reduce_param(d)

        def inv(value: complex, space: ParamSpace) -> Param:
            from .parameters import factored_param

            return factored_param(space, value / c)

        return CoeffFn(f"linear({c})", fn, inv, c)

    @staticmethod
    def from_callable(tag, fn, inv=None) -> "CoeffFn":
        return CoeffFn(tag, fn, inv, None)


identity_coeff = CoeffFn.linear(1.0)


@dataclass(frozen=True)
class PolyTerm:
    alpha: tuple[int, ...]
    coeff: CoeffFn
    slot: int


@dataclass(frozen=True)
class Poly:
    """Operator polynomial ``sum_t f_t(d_slot(t)) * Psi^alpha(t)``."""

    variables: tuple[Operator, ...]
    terms: tuple[PolyTerm, ...]
    slot_space: ParamSpace  # per-slot parameter space (degree l')

    def __post_init__(self):
        if not self.terms:
            raise ValueError("polynomial needs at least one term")
        for t in self.terms:
            if len(t.alpha) != len(self.variables):
                raise ValueError(
                    f"term multi-index {t.alpha} does not match "
                    f"{len(self.variables)} variables"
                )
            if any(e < 0 for e in t.alpha):
                raise ValueError(f"negative exponent in {t.alpha}")
            if t.slot < 0:
                raise ValueError(f"negative slot {t.slot}")
        grids = {v.grid for v in self.variables}
        if len(grids) > 1:
            raise SpaceMismatchError("polynomial variables live on different grids")

    @property
    def n_slots(self) -> int:
        return max(t.slot for t in self.terms) + 1

    @property
    def degree(self) -> int:
        return max(sum(t.alpha) for t in self.terms)

    @property
    def n_variables(self) -> int:
        return len(self.variables)

    def grid(self) -> Grid:
        return self.variables[0].grid


def poly_monomial_operator(poly: Poly, alpha: tuple[int, ...]) -> Operator:
    out = identity_operator(poly.grid())
    for v, e in zip(poly.variables, alpha):
        out = compose(out, operator_power(v, e))
    return out


def evaluate_poly(poly: Poly, slot_params: tuple[Param, ...]) -> Operator:
    if len(slot_params) != poly.n_slots:
        raise ValueError(
            f"expected {poly.n_slots} slot parameters, got {len(slot_params)}"
        )
    out = None
    for t in poly.terms:
        value = t.coeff(slot_params[t.slot])
        if value == 0:
            raise VanishingResult(t.slot, f"coefficient {t.coeff.tag} vanished")
        term_op = scale(value, poly_monomial_operator(poly, t.alpha))
        out = term_op if out is None else combine(1.0, out, 1.0, term_op)
    return out


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    residual: float
    witness: tuple[Param, Param] | None = None


@dataclass(frozen=True)
class HomomorphyReport:
    additive: CheckResult
    multiplicative: CheckResult
    samples: int
    seed: int


# --- structure descriptors -------------------------------------------------

@dataclass(frozen=True)
class ScalingStructure:
    psi0: Operator


@dataclass(frozen=True)
class MonomialStructure:
    coeff: CoeffFn
    psi: Operator
    power: int


@dataclass(frozen=True)
class PolynomialStructure:
    poly: Poly


@dataclass(frozen=True)
class SumStructure:
    left: "Theory"
    right: "Theory"


@dataclass(frozen=True)
class CompositionStructure:
    left: "Theory"
    right: "Theory"


@dataclass(frozen=True)
class ScaledStructure:
    base: "Theory"
    factor: complex


@dataclass(frozen=True)
class DerivedStructure:
    tag: str


@dataclass(frozen=True, eq=False)
class Theory:
    id: str
    grid: Grid
    space: ParamSpace
    op_map: Callable[[Param], Operator]
    structure: object
    additive: CheckResult | None = None
    multiplicative: CheckResult | None = None

    @property
    def degree(self) -> int:
        return self.space.degree


# --- constructors ----------------------------------------------------------

_CONSTRUCTOR_SEED = 0x5EED
_CONSTRUCTOR_SAMPLES = 24


def scaling_theory(
    space: ParamSpace, psi0: Operator, name: str = "S", tau_id: float = TAU_ID
) -> Theory:
    """The theory ``e -> e . psi0``.

    Flags are decided at construction: additivity by a seeded sampled check
    (true for degree 1), multiplicativity only when ``psi0`` is idempotent
    within ``tau_id`` — the failure witness is kept either way.
    """
    if space.degree < 1:
        raise ValueError("scaling theory needs parameter degree >= 1")

    def op_map(eps: Param) -> Operator:
        return act(eps, psi0)

    t = Theory(name, psi0.grid, space, op_map, ScalingStructure(psi0))
    report = homomorphy_check(t, _CONSTRUCTOR_SAMPLES, _CONSTRUCTOR_SEED)
    idem = op_distance(compose(psi0, psi0), psi0)
    if idem > tau_id and report.multiplicative.passed:
        # a sampled pass cannot overrule the direct idempotence criterion
        mult = CheckResult(False, idem, None)
    else:
        mult = report.multiplicative
    return replace(t, additive=report.additive, multiplicative=mult)


def monomial_theory(
    g: CoeffFn, psi: Operator, power: int, space: ParamSpace, name: str | None = None
) -> Theory:
    """The theory ``d -> g(d) * psi^power``."""
    if power < 0:
        raise ValueError("negative monomial power")
    psi_l = operator_power(psi, power)

    def op_map(d: Param) -> Operator:
        value = g(d)
        if value == 0:
            raise VanishingResult(0, f"coefficient {g.tag} vanished")
        return combine(value, psi_l, 0.0, psi_l)

    name = name or f"mono[{g.tag}*Psi^{power}]"
    return Theory(name, psi.grid, space, op_map, MonomialStructure(g, psi, power))


def polynomial_theory(poly: Poly, name: str = "poly") -> Theory:
    """Theory of an operator polynomial; degree is slots times per-slot degree."""
    n = poly.n_slots
    lp = poly.slot_space.degree
    space = ParamSpace(poly.slot_space.kind, n * lp)

    def op_map(d: Param) -> Operator:
        slots = split_param(d, (lp,) * n)
        return evaluate_poly(poly, slots)

    return Theory(name, poly.grid(), space, op_map, PolynomialStructure(poly))


def _product_space(a: Theory, b: Theory) -> ParamSpace:
    if a.grid != b.grid:
        raise SpaceMismatchError("theories live on different grids")
    if a.space.kind != b.space.kind:
        raise SpaceMismatchError(
            f"parameter kinds differ: {a.space.kind} vs {b.space.kind}"
        )
    return ParamSpace(a.space.kind, a.degree + b.degree)


def sum_theories(a: Theory, b: Theory) -> Theory:
    """Degrees add; operators add."""
    space = _product_space(a, b)
    da, db = a.degree, b.degree

    def op_map(d: Param) -> Operator:
        da_part, db_part = split_param(d, (da, db))
        return combine(1.0, a.op_map(da_part), 1.0, b.op_map(db_part))

    return Theory(f"({a.id}+{b.id})", a.grid, space, op_map, SumStructure(a, b))


def compose_theories(a: Theory, b: Theory) -> Theory:
    """Degrees add; operators compose (left theory applied last)."""
    space = _product_space(a, b)
    da, db = a.degree, b.degree

    def op_map(d: Param) -> Operator:
        da_part, db_part = split_param(d, (da, db))
        return compose(a.op_map(da_part), b.op_map(db_part))

    return Theory(f"({a.id}o{b.id})", a.grid, space, op_map, CompositionStructure(a, b))


def scale_theory(t: Theory, c: complex, name: str | None = None) -> Theory:
    """The theory ``d -> c * op_map(d)``."""
    if c == 0:
        raise ValueError("scale constant must be nonzero")

    def op_map(d: Param) -> Operator:
        op = t.op_map(d)
        return combine(c, op, 0.0, op)

    # additivity survives scaling; multiplicativity does not (unless c == 1),
    # so the latter certificate is dropped rather than carried over
    return replace(
        t,
        id=name or f"{c}*{t.id}",
        op_map=op_map,
        structure=ScaledStructure(t, complex(c)),
        multiplicative=t.multiplicative if c == 1 else None,
    )


def theory_power(t: Theory, n: int) -> Theory:
    if n < 1:
        raise ValueError("theory power must be >= 1")
    out = t
    for _ in range(n - 1):
        out = compose_theories(out, t)
    return out


# --- homomorphy ------------------------------------------------------------

def homomorphy_check(
    t: Theory, samples: int = 64, seed: int = 0, tol: float = 1e-10
) -> HomomorphyReport:
    """Sampled additivity and multiplicativity check with recorded witnesses.

    Additivity is checked partially: sampled pairs whose sum leaves the
    nowhere-vanishing set are skipped.
    """
    from .emergence import sample_param

    if t.degree < 1:
        raise ValueError("homomorphy check needs parameter degree >= 1")
    rng = np.random.default_rng(seed)
    add = CheckResult(True, 0.0)
    mul = CheckResult(True, 0.0)
    worst_add = 0.0
    worst_mul = 0.0
    for _ in range(samples):
        x = sample_param(t.space, rng)
        y = sample_param(t.space, rng)
        try:
            s = nv_combine(1.0, x, 1.0, y)
        except VanishingResult:
            s = None
        if s is not None and add.passed:
            res = op_distance(
                t.op_map(s), combine(1.0, t.op_map(x), 1.0, t.op_map(y))
            )
            worst_add = max(worst_add, res)
            if res > tol:
                add = CheckResult(False, res, (x, y))
        if mul.passed:
            p = nv_mul(x, y)
            res = op_distance(t.op_map(p), compose(t.op_map(x), t.op_map(y)))
            worst_mul = max(worst_mul, res)
            if res > tol:
                mul = CheckResult(False, res, (x, y))
    if add.passed:
        add = CheckResult(True, worst_add)
    if mul.passed:
        mul = CheckResult(True, worst_mul)
    return HomomorphyReport(add, mul, samples, seed)


def with_homomorphy(t: Theory, samples: int = 64, seed: int = 0) -> Theory:
    """Return a copy of ``t`` whose flags hold a fresh check's results."""
    report = homomorphy_check(t, samples, seed)
    return replace(t, additive=report.additive, multiplicative=report.multiplicative)


def monomial_rank_report(poly: Poly) -> tuple[int, int]:
    """(rank, count) of the distinct monomial operators spanned by ``poly``.

    A deficient rank means distinct monomials collapse numerically (for
    instance every power of the identity), which downstream solvers report as
    min-norm behavior.
    """
    alphas = sorted({t.alpha for t in poly.terms})
    vecs = []
    for alpha in alphas:
        op = poly_monomial_operator(poly, alpha)
        if op.backend == "symbol":
            vecs.append(op.data.ravel())
        else:
            vecs.append(to_dense(op).data.ravel())
    a = np.stack(vecs, axis=1)
    return int(np.linalg.matrix_rank(a, tol=1e-10 * max(1.0, float(np.linalg.norm(a))))), len(alphas)
