"""Nowhere-vanishing parameter algebras.

A parameter space of degree ``l`` holds tuples of ``l`` scalars drawn from one
of three kinds: nonzero complex, positive real, or nonzero real.  Zero is never
representable in any component; operations that would produce it fail loudly.
The degree-0 space is a singleton (the empty tuple) whose product is 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "KINDS",
    "ParamSpace",
    "Param",
    "VanishingResult",
    "NoSquareRoot",
    "ConstraintViolation",
    "SpaceMismatchError",
    "make_param",
    "unit_param",
    "factored_param",
    "reduce_param",
    "nv_mul",
    "nv_combine",
    "nv_sqrt",
    "embed_params",
    "concat_params",
]

NONZERO_COMPLEX = "nonzero-complex"
POSITIVE_REAL = "positive-real"
NONZERO_REAL = "nonzero-real"
KINDS = (NONZERO_COMPLEX, POSITIVE_REAL, NONZERO_REAL)


class VanishingResult(ValueError):
    """An operation produced a forbidden zero (or nonpositive) component."""

    def __init__(self, index: int, detail: str = ""):
        self.index = index
        msg = f"component {index} vanishes"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class NoSquareRoot(ValueError):
    """A component has no square root inside its kind."""

    def __init__(self, index: int, value: complex):
        self.index = index
        self.value = value
        super().__init__(f"component {index} = {value} has no square root in kind")


class ConstraintViolation(ValueError):
    """A scalar cannot be represented in the requested space."""


class SpaceMismatchError(ValueError):
    """Two parameters that must share a space do not."""


@dataclass(frozen=True)
class ParamSpace:
    kind: str
    degree: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown parameter kind {self.kind!r}")
        if self.degree < 0:
            raise ValueError(f"negative parameter degree {self.degree}")


@dataclass(frozen=True)
class Param:
    space: ParamSpace
    components: tuple[complex, ...]


def _validate_component(kind: str, c: complex, index: int) -> complex:
    c = complex(c)
    if kind == NONZERO_COMPLEX:
        if c == 0:
            raise VanishingResult(index)
        return c
    if c.imag != 0.0:
        raise ConstraintViolation(
            f"component {index} = {c} is complex but the space is {kind}"
        )
    if kind == POSITIVE_REAL:
        if not c.real > 0:
            raise VanishingResult(index, "must be positive")
    else:  # nonzero-real
        if c.real == 0:
            raise VanishingResult(index)
    return c


def make_param(space: ParamSpace, components) -> Param:
    comps = tuple(complex(c) for c in components)
    if len(comps) != space.degree:
        raise ValueError(
            f"expected {space.degree} components, got {len(comps)}"
        )
    comps = tuple(
        _validate_component(space.kind, c, i) for i, c in enumerate(comps)
    )
    return Param(space, comps)


def unit_param(space: ParamSpace) -> Param:
    return Param(space, (1 + 0j,) * space.degree)


def coerce_scalar(space: ParamSpace, value: complex, tau: float = 1e-12) -> complex:
    """Coerce a numerically extracted scalar into the space's kind.

    Real-kind spaces accept imaginary dust up to ``tau`` relative and truncate
    it; anything larger, a zero, or a sign violation raises
    :class:`ConstraintViolation`.
    """
    value = complex(value)
    if space.kind == NONZERO_COMPLEX:
        if value == 0:
            raise ConstraintViolation("extracted scalar is zero")
        return value
    if abs(value.imag) > tau * max(1.0, abs(value)):
        raise ConstraintViolation(
            f"extracted scalar {value} is complex but the space is {space.kind}"
        )
    real = value.real
    if real == 0:
        raise ConstraintViolation("extracted scalar is zero")
    if space.kind == POSITIVE_REAL and real < 0:
        raise ConstraintViolation(
            f"extracted scalar {real} is negative but the space is positive-real"
        )
    return complex(real)


def factored_param(space: ParamSpace, value: complex) -> Param:
    """Canonical factored form ``(value, 1, ..., 1)`` in ``space``."""
    if space.degree < 1:
        raise ValueError("factored form needs degree >= 1")
    value = coerce_scalar(space, value)
    return make_param(space, (value,) + (1 + 0j,) * (space.degree - 1))


def reduce_param(x: Param) -> complex:
    """Product of the components (1 for the degree-0 singleton)."""
    out = 1 + 0j
    for c in x.components:
        out *= c
    return out


def _check_same_space(x: Param, y: Param) -> None:
    if x.space != y.space:
        raise SpaceMismatchError(f"parameter spaces differ: {x.space} vs {y.space}")


def nv_mul(x: Param, y: Param) -> Param:
    """Componentwise product (always stays inside the kind)."""
    _check_same_space(x, y)
    return make_param(x.space, tuple(a * b for a, b in zip(x.components, y.components)))


def nv_combine(a: complex, x: Param, b: complex, y: Param) -> Param:
    """Componentwise ``a*x + b*y``; :class:`VanishingResult` on a forbidden hit."""
    _check_same_space(x, y)
    if a == 0 and b == 0:
        raise ValueError("nv_combine weights cannot both be zero")
    return make_param(
        x.space,
        tuple(a * p + b * q for p, q in zip(x.components, y.components)),
    )


def nv_sqrt(x: Param) -> Param:
    """Componentwise principal square root; kind-impossible components raise."""
    out = []
    for i, c in enumerate(x.components):
        if x.space.kind == NONZERO_REAL and c.real < 0:
            raise NoSquareRoot(i, c)
        out.append(complex(np.sqrt(complex(c))))
    return make_param(x.space, tuple(out))


def embed_params(x: Param, target_degree: int) -> Param:
    """Embed into a higher degree by prepending unit components."""
    if target_degree < x.space.degree:
        raise ValueError(
            f"cannot embed degree {x.space.degree} into lower degree {target_degree}"
        )
    pad = (1 + 0j,) * (target_degree - x.space.degree)
    return make_param(ParamSpace(x.space.kind, target_degree), pad + x.components)


def concat_params(x: Param, y: Param) -> Param:
    """Concatenate into the product space (kinds must match)."""
    if x.space.kind != y.space.kind:
        raise SpaceMismatchError(
            f"parameter kinds differ: {x.space.kind} vs {y.space.kind}"
        )
    space = ParamSpace(x.space.kind, x.space.degree + y.space.degree)
    return make_param(space, x.components + y.components)


def split_param(x: Param, degrees: tuple[int, ...]) -> tuple[Param, ...]:
    """Split into consecutive blocks of the given degrees."""
    if sum(degrees) != x.space.degree:
        raise ValueError(f"degrees {degrees} do not sum to {x.space.degree}")
    out = []
    at = 0
    for d in degrees:
        out.append(make_param(ParamSpace(x.space.kind, d), x.components[at : at + d]))
        at += d
    return tuple(out)
