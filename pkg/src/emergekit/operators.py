"""Concrete operator algebra on periodic grids.

Two backends realize the same algebra:

* ``symbol`` — a Fourier multiplier, diagonal in the DFT basis.  Composition is
  a pointwise product, so symbol operators commute with each other.
* ``dense`` — an explicit n x n matrix on the flattened grid.

Mixed operations promote the symbol operand to dense by conjugating its
diagonal multiplier with the DFT matrix.  All derived quantities (norms,
traces, adjoints, distances) are backend-consistent because the normalized DFT
is unitary.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .background import Field, Grid, GridMismatchError, field_from_values

__all__ = [
    "TAU_INV",
    "TAU_ID",
    "NORM_FLOOR",
    "DENSE_CAP",
    "Operator",
    "RightInverse",
    "StencilSpec",
    "NotRightInvertible",
    "symbol_operator",
    "dense_operator",
    "identity_operator",
    "diff_operator",
    "combine",
    "compose",
    "scale",
    "apply",
    "adjoint",
    "to_dense",
    "dft_matrix",
    "right_inverse",
    "scalar_identity_extract",
    "self_adjointness_defect",
    "op_distance",
    "operator_power",
    "frobenius_norm",
]

TAU_INV = 1e-10
TAU_ID = 1e-8
NORM_FLOOR = 1e-300
DENSE_CAP = 4096

SYMBOL = "symbol"
DENSE = "dense"


class NotRightInvertible(ValueError):
    """The operator's symbol or spectrum reaches (numerical) zero."""

    def __init__(self, min_modulus: float, detail: str = ""):
        self.min_modulus = min_modulus
        msg = f"operator is not right-invertible (min modulus {min_modulus:.3e})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


@dataclass(frozen=True, eq=False)
class Operator:
    """A linear operator on fields over ``grid``; see module docstring."""

    grid: Grid
    backend: str
    data: np.ndarray  # symbol: shaped like the grid; dense: (n, n)

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        if self.backend == SYMBOL:
            return np.fft.ifftn(self.data * np.fft.fftn(values))
        flat = self.data @ np.asarray(values).ravel()
        return flat.reshape(self.grid.sizes)


@dataclass(frozen=True, eq=False)
class RightInverse:
    """A certified right inverse: ``compose(of, inverse)`` is the identity."""

    of: Operator
    inverse: Operator


def _lock(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


def symbol_operator(grid: Grid, symbol) -> Operator:
    sym = np.asarray(symbol, dtype=np.complex128).reshape(grid.sizes).copy()
    return Operator(grid, SYMBOL, _lock(sym))


def dense_operator(grid: Grid, matrix) -> Operator:
    n = grid.npoints
    if n > DENSE_CAP:
        raise ValueError(f"dense backend capped at {DENSE_CAP} points, grid has {n}")
    mat = np.asarray(matrix, dtype=np.complex128).reshape(n, n).copy()
    return Operator(grid, DENSE, _lock(mat))


def identity_operator(grid: Grid) -> Operator:
    return symbol_operator(grid, np.ones(grid.sizes))


@dataclass(frozen=True)
class StencilSpec:
    """A constant-coefficient differential expression ``sum_a c_a * D^a``.

    ``terms`` maps each multi-index (one entry per grid axis) to a complex
    coefficient.  Even per-axis orders use powers of the exact second-difference
    symbol; an extra odd order contributes one central-difference factor.
    """

    terms: tuple[tuple[tuple[int, ...], complex], ...]


def stencil(*terms: tuple[Sequence[int], complex]) -> StencilSpec:
    return StencilSpec(
        tuple((tuple(int(e) for e in alpha), complex(c)) for alpha, c in terms)
    )


def _axis_factors(grid: Grid, scheme: str) -> list[tuple[np.ndarray, np.ndarray]]:
    out = []
    for n, h in zip(grid.sizes, grid.spacing):
        k = np.arange(n)
        if scheme == "central":
            mu = 1j * np.sin(2.0 * np.pi * k / n) / h
            s2 = -4.0 * np.sin(np.pi * k / n) ** 2 / h**2
        elif scheme == "spectral":
            kk = np.fft.fftfreq(n) * n
            mu = 1j * 2.0 * np.pi * kk / (n * h)
            s2 = mu**2
        else:
            raise ValueError(f"unknown difference scheme {scheme!r}")
        out.append((mu.astype(np.complex128), s2.astype(np.complex128)))
    return out


def diff_operator(grid: Grid, spec: StencilSpec, scheme: str = "central") -> Operator:
    """Build the symbol operator for a constant-coefficient stencil."""
    axes = _axis_factors(grid, scheme)
    sym = np.zeros(grid.sizes, dtype=np.complex128)
    for alpha, coeff in spec.terms:
        if len(alpha) != grid.dim:
            raise ValueError(
                f"dimension mismatch: multi-index {alpha} on a {grid.dim}-d grid"
            )
        factor = np.ones(grid.sizes, dtype=np.complex128)
        for j, (mu, s2) in enumerate(axes):
            e = alpha[j]
            if e < 0:
                raise ValueError(f"negative derivative order {e}")
            axis = s2 ** (e // 2) * mu ** (e % 2)
            shape = [1] * grid.dim
            shape[j] = grid.sizes[j]
            factor = factor * axis.reshape(shape)
        sym += coeff * factor
    return symbol_operator(grid, sym)


def dft_matrix(grid: Grid) -> np.ndarray:
    """Unnormalized forward DFT matrix on the C-order-flattened grid."""
    w = np.ones((1, 1), dtype=np.complex128)
    for n in grid.sizes:
        j = np.arange(n)
        w = np.kron(w, np.exp(-2j * np.pi * np.outer(j, j) / n))
    return w


def to_dense(op: Operator) -> Operator:
    if op.backend == DENSE:
        return op
    n = op.grid.npoints
    if n > DENSE_CAP:
        raise ValueError(f"dense backend capped at {DENSE_CAP} points, grid has {n}")
    w = dft_matrix(op.grid)
    mat = (np.conj(w) @ (op.data.ravel()[:, None] * w)) / n
    return Operator(op.grid, DENSE, _lock(mat))


def _check_same_grid(a: Operator, b: Operator) -> None:
    if a.grid != b.grid:
        raise GridMismatchError(f"operator grids differ: {a.grid} vs {b.grid}")


def combine(a: complex, psi: Operator, b: complex, phi: Operator) -> Operator:
    """Linear combination ``a*psi + b*phi``."""
    _check_same_grid(psi, phi)
    if psi.backend == SYMBOL and phi.backend == SYMBOL:
        return symbol_operator(psi.grid, a * psi.data + b * phi.data)
    p, q = to_dense(psi), to_dense(phi)
    return Operator(psi.grid, DENSE, _lock(a * p.data + b * q.data))


def scale(a: complex, psi: Operator) -> Operator:
    if psi.backend == SYMBOL:
        return symbol_operator(psi.grid, a * psi.data)
    return Operator(psi.grid, DENSE, _lock(np.complex128(a) * psi.data))


def compose(psi: Operator, phi: Operator) -> Operator:
    """Operator composition ``psi o phi`` (apply ``phi`` first)."""
    _check_same_grid(psi, phi)
    if psi.backend == SYMBOL and phi.backend == SYMBOL:
        return symbol_operator(psi.grid, psi.data * phi.data)
    p, q = to_dense(psi), to_dense(phi)
    return Operator(psi.grid, DENSE, _lock(p.data @ q.data))


def operator_power(psi: Operator, n: int) -> Operator:
    if n < 0:
        raise ValueError("negative operator power")
    out = identity_operator(psi.grid)
    for _ in range(n):
        out = compose(out, psi)
    return out


def apply(psi: Operator, phi: Field) -> Field:
    """Apply an operator to a field.  The result is complex-kind."""
    if psi.grid != phi.grid:
        raise GridMismatchError(f"grids differ: {psi.grid} vs {phi.grid}")
    return field_from_values(psi.grid, psi.apply_values(phi.values))


def adjoint(psi: Operator) -> Operator:
    """Adjoint with respect to the discrete L2 pairing."""
    if psi.backend == SYMBOL:
        return symbol_operator(psi.grid, np.conj(psi.data))
    return Operator(psi.grid, DENSE, _lock(np.conj(psi.data.T).copy()))


def frobenius_norm(psi: Operator) -> float:
    # The normalized DFT is unitary, so the symbol's 2-norm equals the dense
    # Frobenius norm.
    return float(np.linalg.norm(psi.data))


def right_inverse(psi: Operator, tau_inv: float = TAU_INV) -> RightInverse:
    """Certified right inverse, or :class:`NotRightInvertible`.

    Symbol backend: the reciprocal symbol, valid when the minimum symbol
    modulus exceeds ``tau_inv``.  Dense backend: the pseudo-inverse, valid when
    the smallest singular value exceeds ``tau_inv``.
    """
    if psi.backend == SYMBOL:
        m = float(np.min(np.abs(psi.data)))
        if m <= tau_inv:
            raise NotRightInvertible(m, "symbol reaches zero")
        return RightInverse(psi, symbol_operator(psi.grid, 1.0 / psi.data))
    svals = np.linalg.svd(psi.data, compute_uv=False)
    m = float(svals[-1])
    if m <= tau_inv:
        raise NotRightInvertible(m, "smallest singular value too small")
    return RightInverse(psi, Operator(psi.grid, DENSE, _lock(np.linalg.pinv(psi.data))))


def scalar_identity_extract(x: Operator) -> tuple[complex, float]:
    """Best scalar ``lam`` with ``x ~ lam * I`` and the relative residual.

    ``lam`` is ``trace(x)/n`` (the symbol mean for multiplier operators);
    the residual is ``||x - lam*I||_F / max(||x||_F, floor)``.
    """
    if x.backend == SYMBOL:
        lam = complex(np.mean(x.data))
        res = float(np.linalg.norm(x.data - lam))
    else:
        n = x.grid.npoints
        lam = complex(np.trace(x.data) / n)
        res = float(np.linalg.norm(x.data - lam * np.eye(n)))
    return lam, res / max(frobenius_norm(x), NORM_FLOOR)


def self_adjointness_defect(psi: Operator) -> float:
    """``||psi - psi*||_F / max(||psi||_F, floor)``."""
    diff = combine(1.0, psi, -1.0, adjoint(psi))
    return frobenius_norm(diff) / max(frobenius_norm(psi), NORM_FLOOR)


def op_distance(psi: Operator, phi: Operator) -> float:
    """Relative Frobenius distance, normalized by the larger operator norm."""
    _check_same_grid(psi, phi)
    diff = combine(1.0, psi, -1.0, phi)
    denom = max(frobenius_norm(psi), frobenius_norm(phi), NORM_FLOOR)
    return frobenius_norm(diff) / denom
