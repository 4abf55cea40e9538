"""Parameter actions on operators and the scalar functional calculus.

A degree-``l`` parameter acts on an operator by scaling with the product of its
components.  Dividing an operator that is (numerically) a scalar multiple of
the identity back out of the action inverts right-multiplication by the
identity; higher-degree results use the canonical factored form
``(lam, 1, ..., 1)``.

``calculus_operator`` realizes the candidate calculus operator for a scalar
coefficient function ``f`` — the constant ``reduce(e0)/f(e0)`` times the
identity, fixed at the unit parameter — and then certifies or refutes the
defining identity ``Psi_f o (f(e) Psi) = e . Psi`` by sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import (
    Operator,
    TAU_ID,
    combine,
    compose,
    identity_operator,
    op_distance,
    scalar_identity_extract,
    scale,
    symbol_operator,
)
from .parameters import (
    Param,
    ParamSpace,
    factored_param,
    reduce_param,
    unit_param,
)

__all__ = [
    "TAU_FC",
    "NotInImage",
    "VanishingCoefficient",
    "CalculusEntry",
    "act",
    "check_action_compatibility",
    "invert_r_identity",
    "calculus_operator",
]

TAU_FC = 1e-10


class NotInImage(ValueError):
    """The operator is not (numerically) a scalar multiple of the identity."""

    def __init__(self, residual: float):
        self.residual = residual
        super().__init__(
            f"operator is not a scalar multiple of the identity "
            f"(relative residual {residual:.3e})"
        )


class VanishingCoefficient(ValueError):
    """A coefficient function hit zero at a sampled parameter."""

    def __init__(self, eps: Param):
        self.eps = eps
        super().__init__(f"coefficient function vanishes at {eps.components}")


def act(eps: Param, psi: Operator) -> Operator:
    """Scale ``psi`` by the product of the components of ``eps``."""
    return scale(reduce_param(eps), psi)


def check_action_compatibility(eps: Param, psi: Operator, phi: Operator) -> float:
    """Relative defect of ``(e . psi) o phi = e . (psi o phi)``."""
    lhs = compose(act(eps, psi), phi)
    rhs = act(eps, compose(psi, phi))
    return op_distance(lhs, rhs)


def invert_r_identity(x: Operator, space: ParamSpace, tau_id: float = TAU_ID) -> Param:
    """Invert right-multiplication by the identity on ``x ~ lam * I``.

    Raises :class:`NotInImage` when the scalar-identity residual exceeds
    ``tau_id`` and :class:`~emergekit.parameters.ConstraintViolation` when the
    extracted scalar cannot live in ``space``.
    """
    lam, res = scalar_identity_extract(x)
    if res > tau_id:
        raise NotInImage(res)
    return factored_param(space, lam)


@dataclass(frozen=True)
class CalculusEntry:
    """Certification record for one coefficient function."""

    tag: str
    space: ParamSpace
    scale: complex
    psi_f: Operator
    validity: str  # "certified" | "refuted"
    residual: float
    witness: Param | None


def _certification_grid():
    from .background import make_grid

    return make_grid(1, [8], [1.0])


def calculus_operator(
    f,
    space: ParamSpace,
    samples: int = 64,
    seed: int = 0,
    grid=None,
    tau_fc: float = TAU_FC,
) -> CalculusEntry:
    """Build and certify the candidate calculus operator for ``f``.

    ``f`` is any scalar coefficient function of a parameter (callable, with a
    ``tag`` attribute used in reports).  The candidate is
    ``(reduce(e0)/f(e0)) * I`` at the unit parameter ``e0``; certification
    samples random parameters and small random multiplier operators and checks
    the defining identity to relative ``tau_fc``.  The first violating sample
    is recorded as the refutation witness.
    """
    from .emergence import sample_param  # shared sampling conventions

    if grid is None:
        grid = _certification_grid()
    e0 = unit_param(space)
    f0 = complex(f(e0))
    if f0 == 0:
        raise VanishingCoefficient(e0)
    c = reduce_param(e0) / f0
    psi_f = scale(c, identity_operator(grid))

    rng = np.random.default_rng(seed)
    tag = getattr(f, "tag", repr(f))
    worst = 0.0
    for _ in range(samples):
        eps = sample_param(space, rng)
        fe = complex(f(eps))
        if fe == 0:
            raise VanishingCoefficient(eps)
        sym = rng.standard_normal(grid.sizes) + 1j * rng.standard_normal(grid.sizes)
        psi = symbol_operator(grid, sym)
        lhs = compose(psi_f, scale(fe, psi))
        rhs = act(eps, psi)
        res = op_distance(lhs, rhs)
        worst = max(worst, res)
        if res > tau_fc:
            return CalculusEntry(tag, space, c, psi_f, "refuted", res, eps)
    return CalculusEntry(tag, space, c, psi_f, "certified", worst, None)
