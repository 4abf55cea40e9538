"""Discrete periodic backgrounds: grids, complex fields, and the L2 pairing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "Grid",
    "Field",
    "GridMismatchError",
    "make_grid",
    "field_from_values",
    "inner_product",
    "action_value",
    "sample_field",
]

REAL = "real"
COMPLEX = "complex"


class GridMismatchError(ValueError):
    """Raised when two objects that must share a grid do not."""


@dataclass(frozen=True)
class Grid:
    """A periodic lattice with ``sizes[j]`` points and step ``spacing[j]`` on axis j."""

    dim: int
    sizes: tuple[int, ...]
    spacing: tuple[float, ...]

    @property
    def npoints(self) -> int:
        return int(np.prod(self.sizes))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))


def make_grid(dim: int, sizes: Sequence[int], spacing: Sequence[float]) -> Grid:
    """Validate and build a :class:`Grid`.

    Sizes must each be at least 2 and spacings strictly positive; the lengths of
    both sequences must equal ``dim``.
    """
    if dim < 1:
        raise ValueError(f"grid dimension must be >= 1, got {dim}")
    sizes = tuple(int(n) for n in sizes)
    spacing = tuple(float(h) for h in spacing)
    if len(sizes) != dim or len(spacing) != dim:
        raise ValueError(
            f"dimension mismatch: dim={dim} but got {len(sizes)} sizes "
            f"and {len(spacing)} spacings"
        )
    for n in sizes:
        if n < 2:
            raise ValueError(f"grid sizes must each be >= 2, got {n}")
    for h in spacing:
        if not h > 0:
            raise ValueError(f"grid spacings must be positive, got {h}")
    return Grid(dim, sizes, spacing)


@dataclass(frozen=True, eq=False)
class Field(object):
    """One complex (or real) scalar value per grid point, stored C-ordered."""

    grid: Grid
    values: np.ndarray
    scalar_kind: str = COMPLEX


def field_from_values(grid: Grid, values, scalar_kind: str = COMPLEX) -> Field:
    arr = np.asarray(values, dtype=np.complex128).reshape(grid.sizes).copy()
    if scalar_kind not in (REAL, COMPLEX):
        raise ValueError(f"unknown scalar kind {scalar_kind!r}")
    if scalar_kind == REAL and np.any(arr.imag != 0.0):
        raise ValueError("real-kind field has nonzero imaginary parts")
    arr.setflags(write=False)
    return Field(grid, arr, scalar_kind)


def _check_same_grid(a: Grid, b: Grid) -> None:
    if a != b:
        raise GridMismatchError(f"grids differ: {a} vs {b}")


def inner_product(phi: Field, psi: Field) -> complex:
    """Discrete L2 pairing ``vol * sum(conj(phi) * psi)``.

    Sesquilinear: conjugate-linear in the first argument, linear in the second.
    """
    _check_same_grid(phi.grid, psi.grid)
    if phi.scalar_kind != psi.scalar_kind:
        raise ValueError(
            f"scalar kinds differ: {phi.scalar_kind} vs {psi.scalar_kind}"
        )
    return complex(phi.grid.cell_volume * np.sum(np.conj(phi.values) * psi.values))


def action_value(phi: Field, psi_op) -> complex:
    """Quadratic action ``<<phi, Psi phi>>`` of an operator at a field."""
    _check_same_grid(phi.grid, psi_op.grid)
    out = psi_op.apply_values(phi.values)
    return complex(phi.grid.cell_volume * np.sum(np.conj(phi.values) * out))


def sample_field(grid: Grid, seed: int, scalar_kind: str = COMPLEX) -> Field:
    """Draw a field with i.i.d. standard-normal components (re and im for complex)."""
    rng = np.random.default_rng(seed)
    re = rng.standard_normal(grid.sizes)
    if scalar_kind == COMPLEX:
        vals = re + 1j * rng.standard_normal(grid.sizes)
    else:
        vals = re.astype(np.complex128)
    return field_from_values(grid, vals, scalar_kind)
