"""Fourth-order tensor algebra: mode-n unfolding, Khatri-Rao products,
rank-K alternating-least-squares factorisation, and projection of new
descriptors onto a learned basis.

A fourth-order tensor is stored as a plain ``numpy`` array of shape
``(I1, I2, I3, I4)`` with the first mode slowest.  The mode-n unfolding
maps element ``(i1, i2, i3, i4)`` to row ``i_n`` and the column whose
(0-based) index is ``sum over k != n of i_k * prod of I_m for m < k,
m != n`` — i.e. the earliest remaining mode varies fastest.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np


def tensor_norm(t) -> float:
    """Frobenius norm (square root of the sum of squared entries)."""
    return float(np.sqrt(np.sum(np.square(np.asarray(t, dtype=float)))))


def _check_tensor4(t) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if arr.ndim != 4:
        raise ValueError(f"expected a 4-way tensor, got {arr.ndim} dimensions")
    return arr


def _check_mode(n: int) -> int:
    if n not in (1, 2, 3, 4):
        raise ValueError(f"mode index must be in 1..4, got {n}")
    return n - 1


def mode_n_unfold(t, n: int) -> np.ndarray:
    """Matricise along mode ``n`` (1-based), earliest remaining mode fastest."""
    arr = _check_tensor4(t)
    ax = _check_mode(n)
    return np.moveaxis(arr, ax, 0).reshape(arr.shape[ax], -1, order="F")


def mode_n_fold(m, n: int, dims) -> np.ndarray:
    """Inverse of :func:`mode_n_unfold` for a tensor of shape ``dims``."""
    ax = _check_mode(n)
    dims = tuple(int(d) for d in dims)
    if len(dims) != 4:
        raise ValueError("dims must have four entries")
    rest = tuple(d for i, d in enumerate(dims) if i != ax)
    arr = np.asarray(m, dtype=float).reshape((dims[ax],) + rest, order="F")
    return np.moveaxis(arr, 0, ax)


def khatri_rao(a, b) -> np.ndarray:
    """Column-wise Kronecker product; the second factor varies fastest."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("khatri_rao expects two matrices")
    if a.shape[1] != b.shape[1]:
        raise ValueError(
            f"column counts differ: {a.shape[1]} vs {b.shape[1]}"
        )
    return (a[:, None, :] * b[None, :, :]).reshape(
        a.shape[0] * b.shape[0], a.shape[1]
    )


def pseudo_inverse(m) -> np.ndarray:
    """Moore-Penrose pseudo-inverse with singular-value thresholding."""
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError("pseudo_inverse expects a nonempty matrix")
    return np.linalg.pinv(arr)


def _kr_excluding(factors, ax: int) -> np.ndarray:
    """Khatri-Rao stack of all factors except ``ax``, ordered so that the
    earliest remaining mode varies fastest (matches the unfolding).
    """
    rest = [f for i, f in enumerate(factors) if i != ax]
    out = rest[0]
    for f in rest[1:]:
        out = khatri_rao(f, out)
    return out


@dataclass
class CpModel:
    """Rank-K factorisation: one factor matrix per mode, K columns each."""

    rank: int
    factors: tuple
    residual: float
    residual_history: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.factors) != 4:
            raise ValueError("CpModel needs exactly four factor matrices")
        for i, f in enumerate(self.factors):
            if f.ndim != 2 or f.shape[1] != self.rank:
                raise ValueError(
                    f"factor {i} has shape {f.shape}, expected K={self.rank} columns"
                )


def reconstruct(model: CpModel) -> np.ndarray:
    """Full tensor implied by the factors."""
    dims = tuple(f.shape[0] for f in model.factors)
    m1 = model.factors[0] @ _kr_excluding(model.factors, 0).T
    return mode_n_fold(m1, 1, dims)


def cp_als(t, rank: int, max_sweeps: int = 100, tol: float = 1e-6,
           seed: int = 0) -> CpModel:
    """Alternating least squares for a rank-``rank`` factorisation.

    Each sweep updates the four factor matrices in mode order, each via the
    pseudo-inverse of the transposed Khatri-Rao stack of the others.  The
    last three factors are column-normalised each sweep with the scale
    folded into the first.  Stops when the residual change drops below
    ``tol`` times the input norm or after ``max_sweeps`` sweeps.
    """
    arr = _check_tensor4(t)
    if rank < 1:
        raise ValueError("rank must be at least 1")
    if max_sweeps < 1:
        raise ValueError("max_sweeps must be at least 1")
    dims = arr.shape
    norm = tensor_norm(arr)
    if norm == 0.0:
        factors = tuple(np.zeros((d, rank)) for d in dims)
        return CpModel(rank, factors, 0.0, [0.0])

    rng = np.random.default_rng(seed)
    factors = [np.zeros((dims[0], rank))]
    factors += [rng.uniform(size=(d, rank)) for d in dims[1:]]
    unfolds = [mode_n_unfold(arr, n) for n in (1, 2, 3, 4)]

    history: list[float] = []
    residual = norm
    for _ in range(max_sweeps):
        for ax in range(4):
            z = _kr_excluding(factors, ax)
            factors[ax] = unfolds[ax] @ pseudo_inverse(z.T)
        for ax in (1, 2, 3):
            scale = np.linalg.norm(factors[ax], axis=0)
            keep = scale > 0
            factors[ax][:, keep] /= scale[keep]
            factors[0][:, keep] *= scale[keep]
        approx = factors[0] @ _kr_excluding(factors, 0).T
        residual = float(np.linalg.norm(unfolds[0] - approx))
        history.append(residual)
        if len(history) > 1 and abs(history[-2] - residual) < tol * norm:
            break
    return CpModel(rank, tuple(factors), residual, history)


@dataclass
class CpBasis:
    """Frozen per-mode basis factors plus the projector that maps a new
    flattened descriptor onto its K coefficients."""

    dims: tuple
    rank: int
    factors: tuple          # basis matrices for modes 2..4
    projector: np.ndarray   # (rank, prod(dims))

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if len(self.dims) != 3 or len(self.factors) != 3:
            raise ValueError("CpBasis holds factors for modes 2..4")
        expected = (self.rank, int(np.prod(self.dims)))
        if self.projector.shape != expected:
            raise ValueError(
                f"projector shape {self.projector.shape}, expected {expected}"
            )


def basis_from_model(model: CpModel) -> CpBasis:
    """Freeze the trailing factors of a fit and precompute the projector."""
    z = _kr_excluding(model.factors, 0)
    projector = pseudo_inverse(z.T).T
    dims = tuple(f.shape[0] for f in model.factors[1:])
    return CpBasis(dims, model.rank, tuple(model.factors[1:]), projector)


def project_descriptor(d, basis: CpBasis) -> np.ndarray:
    """Coefficients of one descriptor under the basis (length ``rank``)."""
    arr = np.asarray(d, dtype=float)
    if arr.shape != basis.dims:
        raise ValueError(f"descriptor shape {arr.shape} != basis dims {basis.dims}")
    return basis.projector @ arr.reshape(-1, order="F")


def project_rows(rows, basis: CpBasis) -> np.ndarray:
    """Project already-unfolded descriptor rows, shape (N, prod(dims))."""
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != basis.projector.shape[1]:
        raise ValueError("row length does not match the basis")
    return arr @ basis.projector.T


_BASIS_MAGIC = "CPBASIS"
_BASIS_VERSION = 1


def _write_matrix(fp, name: str, m: np.ndarray) -> None:
    fp.write(f"matrix {name} {m.shape[0]} {m.shape[1]}\n")
    for row in m:
        fp.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def _read_matrix(lines, name: str) -> np.ndarray:
    head = next(lines).split()
    if len(head) != 4 or head[0] != "matrix" or head[1] != name:
        raise ValueError(f"expected matrix section '{name}', got {head!r}")
    rows, cols = int(head[2]), int(head[3])
    out = np.empty((rows, cols))
    for i in range(rows):
        vals = next(lines).split()
        if len(vals) != cols:
            raise ValueError(f"matrix '{name}' row {i} has {len(vals)} values")
        out[i] = [float(v) for v in vals]
    return out


def save_basis(basis: CpBasis, fp) -> None:
    """Write the basis to a text stream (versioned, full double precision)."""
    fp.write(f"{_BASIS_MAGIC} {_BASIS_VERSION}\n")
    fp.write("dims " + " ".join(str(d) for d in basis.dims) + "\n")
    fp.write(f"rank {basis.rank}\n")
    for i, f in enumerate(basis.factors):
        _write_matrix(fp, f"factor{i + 2}", f)
    _write_matrix(fp, "projector", basis.projector)


def load_basis(fp) -> CpBasis:
    """Read a basis written by :func:`save_basis`."""
    lines = iter(l.rstrip("\n") for l in fp)
    head = next(lines).split()
    if len(head) != 2 or head[0] != _BASIS_MAGIC:
        raise ValueError("not a basis file")
    if int(head[1]) != _BASIS_VERSION:
        warnings.warn(f"basis file version {head[1]} read as {_BASIS_VERSION}")
    dims_line = next(lines).split()
    if dims_line[0] != "dims":
        raise ValueError("malformed basis file: missing dims")
    dims = tuple(int(v) for v in dims_line[1:])
    rank_line = next(lines).split()
    if rank_line[0] != "rank":
        raise ValueError("malformed basis file: missing rank")
    rank = int(rank_line[1])
    factors = tuple(_read_matrix(lines, f"factor{i + 2}") for i in range(3))
    projector = _read_matrix(lines, "projector")
    return CpBasis(dims, rank, factors, projector)
