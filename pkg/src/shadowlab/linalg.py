"""Small dense linear algebra: orthonormal bases, projectors, log-volume constants.

Everything here works on plain float64 numpy arrays at desk scale (n <= ~16).
Subspaces are represented by matrices with orthonormal columns; orthonormality
is enforced at construction within ``TOL_ORTH``.
"""

import math

import numpy as np

from .errors import DimensionError, DomainError, RankDeficient

TOL_ORTH = 1e-10
RANK_TOL = 1e-12


def as_vector(x, dim=None):
    """Coerce to a finite 1-D float64 array, optionally checking its length."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise DimensionError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite coordinates")
    if dim is not None and v.shape[0] != dim:
        raise DimensionError(f"expected dimension {dim}, got {v.shape[0]}")
    return v


def as_matrix(a):
    """Coerce to a finite 2-D float64 array."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


class Subspace:
    """A d-dimensional linear subspace of R^n given by an orthonormal basis.

    Immutable; the basis array is write-protected after construction.
    """

    __slots__ = ("ambient_dim", "dim", "basis")

    def __init__(self, ambient_dim, dim, basis):
        basis = as_matrix(basis)
        if basis.shape != (ambient_dim, dim):
            raise DimensionError(
                f"basis shape {basis.shape} != ({ambient_dim}, {dim})")
        if dim > ambient_dim:
            raise DimensionError(f"dim {dim} exceeds ambient dim {ambient_dim}")
        gram = basis.T @ basis
        if dim and np.max(np.abs(gram - np.eye(dim))) > TOL_ORTH:
            raise ValueError("basis columns are not orthonormal within tolerance")
        basis = basis.copy()
        basis.flags.writeable = False
        object.__setattr__(self, "ambient_dim", ambient_dim)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "basis", basis)

    def __setattr__(self, name, value):
        raise AttributeError("Subspace is immutable")

    def __reduce__(self):
        return (Subspace, (self.ambient_dim, self.dim, np.asarray(self.basis)))

    def __repr__(self):
        return f"Subspace(ambient_dim={self.ambient_dim}, dim={self.dim})"


def orthonormal_columns(a, rank_tol=RANK_TOL):
    """Modified Gram-Schmidt with one reorthogonalization pass.

    Dependent columns (residual norm below ``rank_tol`` times the column's
    input norm) are skipped. Returns ``(q, kept)`` where ``q`` has orthonormal
    columns spanning the kept columns of ``a`` and ``kept`` lists their
    original indices, in order.
    """
    a = np.asarray(a, dtype=float)
    n, k = a.shape
    q_cols = []
    kept = []
    for j in range(k):
        v = a[:, j].astype(float, copy=True)
        ref = np.linalg.norm(v)
        for _ in range(2):
            for q in q_cols:
                v -= (q @ v) * q
        norm = np.linalg.norm(v)
        if ref == 0.0 or norm <= rank_tol * ref:
            continue
        q_cols.append(v / norm)
        kept.append(j)
    q = np.column_stack(q_cols) if q_cols else np.zeros((n, 0))
    return q, kept


def orthonormalize(columns):
    """Orthonormalize a list of vectors into a Subspace spanning them.

    Raises RankDeficient if the vectors are not numerically independent.
    """
    if len(columns) == 0:
        raise DimensionError("need at least one input vector")
    vecs = [as_vector(c) for c in columns]
    n = vecs[0].shape[0]
    for v in vecs:
        if v.shape[0] != n:
            raise DimensionError("input vectors have mixed ambient dimensions")
    a = np.column_stack(vecs)
    q, kept = orthonormal_columns(a)
    if len(kept) < len(vecs):
        raise RankDeficient(
            f"numerical rank {len(kept)} < {len(vecs)} input columns")
    return Subspace(n, len(vecs), q)


def projector(s):
    """Orthogonal projection matrix P = B B^T onto the subspace."""
    return s.basis @ s.basis.T


def complement(s):
    """Deterministic orthonormal basis of the orthogonal complement.

    Built by running Gram-Schmidt over the subspace basis followed by the
    standard basis, keeping the vectors that survive; the construction is a
    pure function of the input basis, so embedded coordinates derived from it
    are reproducible across runs.
    """
    n = s.ambient_dim
    a = np.hstack([s.basis, np.eye(n)])
    q, kept = orthonormal_columns(a)
    if q.shape[1] != n:
        raise RankDeficient("complement construction lost rank")
    return Subspace(n, n - s.dim, q[:, s.dim:])


def principal_angles(s1, s2):
    """Principal angles between two subspaces, ascending, in [0, pi/2].

    Cosines are the singular values of B1^T B2, clamped into [0, 1] before
    arccos to avoid NaN from roundoff. The operands are put in a canonical
    order first, so swapping the arguments returns the bitwise-same list.
    """
    if s1.ambient_dim != s2.ambient_dim:
        raise DimensionError("subspaces live in different ambient dimensions")
    a, b = s1.basis, s2.basis
    if (a.shape[1], a.tobytes()) > (b.shape[1], b.tobytes()):
        a, b = b, a
    sv = np.linalg.svd(a.T @ b, compute_uv=False)
    return np.sort(np.arccos(np.clip(sv, 0.0, 1.0)))


def log_gamma(x):
    """ln Gamma(x) for x > 0."""
    if x <= 0:
        raise DomainError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def log_sphere_area(n):
    """Log surface measure of the unit sphere S^{n-1} in R^n: ln(2 pi^{n/2} / Gamma(n/2))."""
    if n < 1:
        raise DomainError(f"log_sphere_area requires n >= 1, got {n}")
    return math.log(2.0) + 0.5 * n * math.log(math.pi) - math.lgamma(0.5 * n)


def log_grassmannian_volume(n):
    """Log Haar volume of the 2-plane Grassmannian in R^n.

    ln( 4 pi^{n - 1/2} / (Gamma(n/2) Gamma((n-1)/2)) ), defined for n >= 3.
    """
    if n < 3:
        raise DomainError(f"log_grassmannian_volume requires n >= 3, got {n}")
    return (math.log(4.0) + (n - 0.5) * math.log(math.pi)
            - math.lgamma(0.5 * n) - math.lgamma(0.5 * (n - 1)))
