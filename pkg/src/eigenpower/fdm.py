"""Classical baseline: finite-difference matrices and matrix power iterations.

The assembly covers -Delta on the unit interval and unit square with
homogeneous Dirichlet data (3-point and 5-point stencils, spacing
h = 1/(n_h + 1), scaled by 1/h^2).  The 2D row ordering puts the first
coordinate slowest, matching :func:`eigenpower.sampling.uniform_grid`.

Vector norms inside these iterations are Euclidean, unlike the RMS norm the
training side uses for function samples; conversions happen only where
eigenvectors are compared against eigenfunction samples.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import sampling as sp
from .errors import DegeneracyError, ShapeError


@dataclass(frozen=True)
class SparseMatrix:
    """Compressed-row storage with sorted column indices per row."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray

    def matvec(self, u):
        u = np.asarray(u, dtype=np.float64)
        prod = self.data * u[self.indices]
        return np.add.reduceat(prod, self.indptr[:-1])

    def to_dense(self):
        out = np.zeros((self.n, self.n))
        for i in range(self.n):
            sl = slice(self.indptr[i], self.indptr[i + 1])
            out[i, self.indices[sl]] = self.data[sl]
        return out

    def add_diagonal(self, value):
        """A new matrix with ``value`` added to every diagonal entry."""
        data = self.data.copy()
        for i in range(self.n):
            sl = slice(self.indptr[i], self.indptr[i + 1])
            cols = self.indices[sl]
            hit = np.nonzero(cols == i)[0]
            if hit.size == 0:
                raise ShapeError("matrix has a structurally empty diagonal entry")
            data[self.indptr[i] + hit[0]] += value
        return SparseMatrix(self.n, self.indptr, self.indices, data)

    def diagonals(self):
        """(lower, diag, upper) bands; error if anything lies off the three bands."""
        lower = np.zeros(self.n - 1)
        diag = np.zeros(self.n)
        upper = np.zeros(self.n - 1)
        for i in range(self.n):
            for k in range(self.indptr[i], self.indptr[i + 1]):
                j = self.indices[k]
                if j == i:
                    diag[i] = self.data[k]
                elif j == i - 1:
                    lower[j] = self.data[k]
                elif j == i + 1:
                    upper[i] = self.data[k]
                elif self.data[k] != 0.0:
                    raise ShapeError("matrix is not tridiagonal")
        return lower, diag, upper

    @property
    def bandwidth(self):
        w = 0
        for i in range(self.n):
            for k in range(self.indptr[i], self.indptr[i + 1]):
                w = max(w, abs(int(self.indices[k]) - i))
        return w


def _from_rows(rows):
    """Build CSR from a list of per-row {col: value} dicts."""
    n = len(rows)
    indptr = np.zeros(n + 1, dtype=np.int64)
    indices, data = [], []
    for i, row in enumerate(rows):
        cols = sorted(row)
        indices.extend(cols)
        data.extend(row[c] for c in cols)
        indptr[i + 1] = len(indices)
    return SparseMatrix(n, indptr, np.asarray(indices, dtype=np.int64),
                        np.asarray(data, dtype=np.float64))


def assemble_neg_laplacian(d, n_h):
    """-Delta with homogeneous Dirichlet data on the unit box, h = 1/(n_h+1)."""
    if d not in (1, 2):
        raise ShapeError(f"assembly supports d in {{1, 2}}, got {d}")
    if n_h < 2:
        raise ShapeError(f"need n_h >= 2, got {n_h}")
    h2 = sp.grid_spacing(n_h) ** 2
    if d == 1:
        rows = []
        for i in range(n_h):
            row = {i: 2.0 / h2}
            if i > 0:
                row[i - 1] = -1.0 / h2
            if i < n_h - 1:
                row[i + 1] = -1.0 / h2
            rows.append(row)
        return _from_rows(rows)
    rows = []
    for i in range(n_h):
        for j in range(n_h):
            idx = i * n_h + j
            row = {idx: 4.0 / h2}
            if i > 0:
                row[idx - n_h] = -1.0 / h2
            if i < n_h - 1:
                row[idx + n_h] = -1.0 / h2
            if j > 0:
                row[idx - 1] = -1.0 / h2
            if j < n_h - 1:
                row[idx + 1] = -1.0 / h2
            rows.append(row)
    return _from_rows(rows)


def smallest_discrete_eigenvalue(d, n_h):
    """The analytic minimum eigenvalue of the assembled matrix: d*(2/h^2)(1-cos(pi h))."""
    h = sp.grid_spacing(n_h)
    return d * (2.0 / h ** 2) * (1.0 - math.cos(math.pi * h))


# -- LU factorizations ---------------------------------------------------------


@dataclass(frozen=True)
class LuFactors:
    """P A = L U, either banded-tridiagonal or dense (LAPACK) storage."""

    kind: str          # "tridiag" | "dense"
    n: int
    payload: tuple

    def solve(self, b):
        b = np.asarray(b, dtype=np.float64)
        if self.kind == "dense":
            lu, piv = self.payload
            return scipy.linalg.lu_solve((lu, piv), b)
        d, du, du2, lrows, perm = self.payload
        n = self.n
        y = b[perm].copy()
        for r in range(n):
            for c, m in lrows[r].items():
                y[r] -= m * y[c]
        x = np.zeros(n)
        x[n - 1] = y[n - 1] / d[n - 1]
        if n >= 2:
            x[n - 2] = (y[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2]
        for r in range(n - 3, -1, -1):
            x[r] = (y[r] - du[r] * x[r + 1] - du2[r] * x[r + 2]) / d[r]
        return x

    def reconstruct(self):
        """(P, L, U) as dense arrays with P A = L U."""
        n = self.n
        if self.kind == "dense":
            lu, piv = self.payload
            L = np.tril(lu, -1) + np.eye(n)
            U = np.triu(lu)
            order = np.arange(n)
            for i, j in enumerate(piv):
                order[i], order[j] = order[j], order[i]
            P = np.zeros((n, n))
            P[np.arange(n), order] = 1.0
            return P, L, U
        d, du, du2, lrows, perm = self.payload
        L = np.eye(n)
        for r, row in enumerate(lrows):
            for c, m in row.items():
                L[r, c] = m
        U = np.zeros((n, n))
        U[np.arange(n), np.arange(n)] = d
        U[np.arange(n - 1), np.arange(1, n)] = du
        if n > 2:
            U[np.arange(n - 2), np.arange(2, n)] = du2
        P = np.zeros((n, n))
        P[np.arange(n), perm] = 1.0
        return P, L, U


def lu_factor_tridiag(lower, diag, upper):
    """Partially pivoted LU of a tridiagonal matrix, O(n) storage."""
    d = np.asarray(diag, dtype=np.float64).copy()
    n = d.size
    dl = np.asarray(lower, dtype=np.float64).copy()
    du = np.asarray(upper, dtype=np.float64).copy()
    du2 = np.zeros(max(n - 2, 0))
    perm = np.arange(n)
    lrows = [dict() for _ in range(n)]
    for i in range(n - 1):
        if abs(d[i]) >= abs(dl[i]):
            if d[i] == 0.0:
                raise DegeneracyError(f"singular pivot at row {i}")
            fact = dl[i] / d[i]
            d[i + 1] -= fact * du[i]
            lrows[i + 1][i] = fact
        else:
            # swap rows i and i+1 (U bands, permutation, accumulated L parts)
            fact = d[i] / dl[i]
            d[i] = dl[i]
            temp = du[i]
            du[i] = d[i + 1]
            d[i + 1] = temp - fact * d[i + 1]
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du[i + 1]
            perm[i], perm[i + 1] = perm[i + 1], perm[i]
            lrows[i], lrows[i + 1] = lrows[i + 1], lrows[i]
            lrows[i + 1][i] = fact
    if d[n - 1] == 0.0:
        raise DegeneracyError("singular pivot at the last row")
    return LuFactors("tridiag", n, (d, du, du2, lrows, perm))


def lu_factor_dense(a):
    """Dense LAPACK LU behind the same interface."""
    a = np.asarray(a, dtype=np.float64)
    with warnings.catch_warnings():
        # singularity is reported as a structured error below
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a)
    if np.any(np.abs(np.diag(lu)) < 1e-300):
        raise DegeneracyError("singular matrix in dense factorization")
    return LuFactors("dense", a.shape[0], (lu, piv))


def lu_factor(matrix):
    """Banded path for tridiagonal operands, dense otherwise."""
    if isinstance(matrix, SparseMatrix):
        if matrix.bandwidth <= 1:
            return lu_factor_tridiag(*matrix.diagonals())
        return lu_factor_dense(matrix.to_dense())
    return lu_factor_dense(matrix)


# -- matrix iterations -----------------------------------------------------------


@dataclass(frozen=True)
class PowerResult:
    lam: float
    vector: np.ndarray
    iterations: int
    converged: bool


def _matvec(a, u):
    return a.matvec(u) if isinstance(a, SparseMatrix) else a @ u


def _prepare_u0(u0):
    u = np.asarray(u0, dtype=np.float64).copy()
    nrm = np.linalg.norm(u)
    if nrm == 0.0:
        raise ShapeError("starting vector must be nonzero")
    return u / nrm


def power_method(a, u0, k_max=10000, tol=1e-12):
    """Iterate p = A u, u = p/||p||; stop on ||u_k - u_{k-1}|| < tol.

    The iterate is sign-aligned with its predecessor before the difference
    test so a negative dominant eigenvalue still registers convergence; the
    reported lambda is the Rayleigh quotient u^T A u.
    """
    u = _prepare_u0(u0)
    converged = False
    k = 0
    for k in range(1, k_max + 1):
        p = _matvec(a, u)
        nrm = np.linalg.norm(p)
        if nrm < 1e-300:
            raise DegeneracyError("iterate annihilated: u lies in the kernel of A")
        u_new = p / nrm
        if float(u_new @ u) < 0.0:
            u_new = -u_new
        diff = np.linalg.norm(u_new - u)
        u = u_new
        if diff < tol:
            converged = True
            break
    lam = float(u @ _matvec(a, u))
    return PowerResult(lam, u, k, converged)


def inverse_power_method(a, u0, k_max=10000, tol=1e-12, shift=0.0):
    """Iterate with (A - shift I)^{-1} via one LU factorization.

    The Rayleigh quotient uses the unshifted A, so the returned lambda is an
    eigenvalue of A itself (the one nearest the shift).
    """
    if isinstance(a, SparseMatrix):
        shifted = a.add_diagonal(-shift) if shift != 0.0 else a
    else:
        shifted = a - shift * np.eye(a.shape[0]) if shift != 0.0 else a
    factors = lu_factor(shifted)
    u = _prepare_u0(u0)
    converged = False
    k = 0
    for k in range(1, k_max + 1):
        p = factors.solve(u)
        nrm = np.linalg.norm(p)
        if nrm < 1e-300:
            raise DegeneracyError("inverse iterate vanished")
        u_new = p / nrm
        if float(u_new @ u) < 0.0:
            u_new = -u_new
        diff = np.linalg.norm(u_new - u)
        u = u_new
        if diff < tol:
            converged = True
            break
    lam = float(u @ _matvec(a, u))
    return PowerResult(lam, u, k, converged)


# -- reference errors against the continuous problem -----------------------------


def product_of_sines(points):
    """prod_i sin(pi x_i) on an (N, d) array."""
    return np.prod(np.sin(math.pi * np.asarray(points, dtype=np.float64)), axis=1)


def fdm_reference_error(d, n_h, tol=1e-13, k_max=100000):
    """(|lambda - d pi^2|, max-norm eigenvector error) for the ground mode.

    The eigenvector and the exact eigenfunction samples are both normalized
    in the RMS norm and sign-aligned before the max-norm difference.
    """
    a = assemble_neg_laplacian(d, n_h)
    u0 = np.ones(a.n)
    res = inverse_power_method(a, u0, k_max=k_max, tol=tol, shift=0.0)
    lam_err = abs(res.lam - d * math.pi ** 2)
    grid = sp.uniform_grid(n_h, d, (0.0, 1.0))
    exact = sp.normalize(product_of_sines(grid.points))
    vec = sp.normalize(res.vector)
    if float(vec @ exact) < 0.0:
        vec = -vec
    return lam_err, float(np.max(np.abs(vec - exact)))


def fdm_sweep_csv(d, n_h_list, path):
    """Rows of (n_h, lambda_err, u_err) over a grid-refinement sweep."""
    with open(path, "w") as fh:
        fh.write("n_h,lambda_err,u_err\n")
        for n_h in n_h_list:
            lam_err, u_err = fdm_reference_error(d, n_h)
            fh.write(f"{n_h},{lam_err:.17g},{u_err:.17g}\n")
