"""Convex polytopes in vertex representation, their shadows, and congruence.

Bodies are convex hulls of finite vertex sets; every operation works directly
on vertices (projection maps vertex sets to vertex sets, so no half-space
representation is ever needed).

A note on "equality" of projections: two shadows of the same body produced by
different subspaces live in different copies of R^d and can only be compared
after choosing an orthogonal identification between those copies. This library
therefore never tests literal set equality of shadows; it tests
epsilon-congruence, the existence of an orthogonal map carrying one centered
body within Hausdorff distance epsilon of the other. Exact equality is a
measure-zero event and is unobservable in floating point; every estimate that
relies on this notion reports its epsilon explicitly.
"""

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import cdist

from .errors import (
    Degenerate,
    DimensionError,
    NonConvergence,
    NotUnit,
    ZeroDirection,
)
from .linalg import Subspace, as_vector, orthonormal_columns

EXTREME_TOL = 1e-9
GROUP_TOL = 1e-8


class Polytope:
    """Convex hull of a finite, nonempty vertex set in R^n. Immutable."""

    __slots__ = ("ambient_dim", "vertices")

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2:
            raise DimensionError(f"vertices must be a 2-D array, got shape {v.shape}")
        if v.shape[0] == 0:
            raise ValueError("polytope needs at least one vertex")
        if v.shape[1] < 1:
            raise DimensionError("ambient dimension must be >= 1")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices contain non-finite coordinates")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "ambient_dim", int(v.shape[1]))
        object.__setattr__(self, "vertices", v)

    def __setattr__(self, name, value):
        raise AttributeError("Polytope is immutable")

    def __reduce__(self):
        return (Polytope, (np.asarray(self.vertices),))

    def __repr__(self):
        return f"Polytope({self.vertices.shape[0]} vertices in R^{self.ambient_dim})"


class EmbeddedBody:
    """A polytope expressed in the orthonormal basis of a subspace of R^n."""

    __slots__ = ("subspace", "body")

    def __init__(self, subspace, body):
        if body.ambient_dim != subspace.dim:
            raise DimensionError(
                f"body dim {body.ambient_dim} != subspace dim {subspace.dim}")
        object.__setattr__(self, "subspace", subspace)
        object.__setattr__(self, "body", body)

    def __setattr__(self, name, value):
        raise AttributeError("EmbeddedBody is immutable")

    def __reduce__(self):
        return (EmbeddedBody, (self.subspace, self.body))

    def embed(self):
        """Vertices mapped back into the ambient space R^n."""
        return Polytope(self.body.vertices @ self.subspace.basis.T)

    def __repr__(self):
        return (f"EmbeddedBody({self.body.vertices.shape[0]} vertices, "
                f"dim {self.subspace.dim} in R^{self.subspace.ambient_dim})")


class Ball:
    """Analytic Euclidean ball marker; the one non-polytopal body supported.

    Every orthogonal shadow of a ball is a ball of the same radius, so the
    estimators short-circuit on it instead of sampling vertices.
    """

    __slots__ = ("ambient_dim", "radius")

    def __init__(self, ambient_dim, radius):
        if ambient_dim < 1:
            raise DimensionError("ambient dimension must be >= 1")
        if not (radius > 0 and np.isfinite(radius)):
            raise ValueError("radius must be positive and finite")
        object.__setattr__(self, "ambient_dim", int(ambient_dim))
        object.__setattr__(self, "radius", float(radius))

    def __setattr__(self, name, value):
        raise AttributeError("Ball is immutable")

    def __reduce__(self):
        return (Ball, (self.ambient_dim, self.radius))

    def __repr__(self):
        return f"Ball(ambient_dim={self.ambient_dim}, radius={self.radius})"


# ---------------------------------------------------------------------------
# nearest point / Hausdorff machinery (Wolfe's minimum-norm-point algorithm)
# ---------------------------------------------------------------------------


def _affine_weights(sub):
    """Weights of the min-norm point in the affine hull of the rows of sub.

    Solves the KKT system [[0, 1^T], [1, G]] [mu; a] = [1; 0] with G the Gram
    matrix; falls back to least squares when the corral is degenerate.
    """
    m = sub.shape[0]
    mat = np.zeros((m + 1, m + 1))
    mat[0, 1:] = 1.0
    mat[1:, 0] = 1.0
    mat[1:, 1:] = sub @ sub.T
    rhs = np.zeros(m + 1)
    rhs[0] = 1.0
    try:
        sol = np.linalg.solve(mat, rhs)
        if not np.all(np.isfinite(sol)) or abs(sol[1:].sum() - 1.0) > 1e-6:
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(mat, rhs, rcond=None)[0]
    return sol[1:]


def _min_norm_point(points, gap_tol, max_iter=100000, stop_below=None):
    """Wolfe's algorithm: the minimum-norm point of conv(rows of points).

    Maintains a corral of affinely independent vertices and alternates linear
    minimization (major cycle) with exact affine minimization over the corral
    (minor cycle), which terminates finitely in exact arithmetic. Stops when
    the duality gap ||y||^2 - min_p <y, p> drops to gap_tol, when no vertex
    outside the corral can improve (floating-point stall), or, if stop_below
    is given, as soon as ||y|| <= stop_below.
    """
    pts = np.asarray(points, dtype=float)
    norms2 = np.einsum("ij,ij->i", pts, pts)
    start = int(np.argmin(norms2))
    corral = [start]
    lam = np.array([1.0])
    y = pts[start].copy()
    y2 = float(norms2[start])
    stalls = 0
    for _ in range(max_iter):
        if stop_below is not None and y2 <= stop_below * stop_below:
            return y
        dots = pts @ y
        j = int(np.argmin(dots))
        gap = y2 - dots[j]
        if gap <= gap_tol or j in corral:
            return y
        corral.append(j)
        lam = np.append(lam, 0.0)
        while True:
            alpha = _affine_weights(pts[corral])
            if np.all(alpha > 1e-12):
                lam = alpha
                break
            neg = np.where(alpha <= 1e-12)[0]
            denom = lam[neg] - alpha[neg]
            pos = denom > 0
            if np.any(pos):
                ratios = lam[neg][pos] / denom[pos]
                t = int(np.argmin(ratios))
                theta = min(1.0, float(ratios[t]))
                drop = int(neg[np.where(pos)[0][t]])
            else:
                theta = 0.0
                drop = int(neg[int(np.argmin(alpha[neg]))])
            lam = (1.0 - theta) * lam + theta * alpha
            lam[drop] = 0.0
            keep = lam > 1e-12
            if not np.any(keep):
                keep[int(np.argmax(lam))] = True
            corral = [c for c, k in zip(corral, keep) if k]
            lam = lam[keep]
            lam = lam / lam.sum()
        y = lam @ pts[corral]
        y2_new = float(y @ y)
        if y2 - y2_new <= 1e-14 * (1.0 + y2):
            stalls += 1
            if stalls >= 3:
                return y
        else:
            stalls = 0
        y2 = y2_new
    raise NonConvergence(
        f"minimum-norm point did not reach gap {gap_tol:g} in {max_iter} iterations")


def nearest_point(P, x):
    """Nearest point of conv(P) to x and its distance.

    Terminates when the duality gap max_v <x - y, v - y> falls below
    1e-10 * (1 + ||x||).
    """
    x = as_vector(x, P.ambient_dim)
    gap_tol = 1e-10 * (1.0 + float(np.linalg.norm(x)))
    z = _min_norm_point(P.vertices - x, gap_tol)
    return x + z, float(np.linalg.norm(z))


def _directed_hausdorff(a, b, gap_scale):
    worst = 0.0
    gap_tol = 1e-10 * gap_scale
    for row in a:
        z = _min_norm_point(b - row, gap_tol)
        worst = max(worst, float(z @ z))
    return np.sqrt(worst)


def hausdorff(P, Q):
    """Exact Hausdorff distance between two convex polytopes.

    The pointwise distance to a convex set is convex, so its maximum over a
    polytope is attained at a vertex; both directed distances reduce to
    nearest-point solves from vertices.
    """
    if P.ambient_dim != Q.ambient_dim:
        raise DimensionError("polytopes live in different ambient dimensions")
    scale = 1.0 + max(
        float(np.max(np.abs(P.vertices))), float(np.max(np.abs(Q.vertices))))
    return max(_directed_hausdorff(P.vertices, Q.vertices, scale),
               _directed_hausdorff(Q.vertices, P.vertices, scale))


def support(P, direction):
    """Support value max over vertices of <v, direction>."""
    d = as_vector(direction, P.ambient_dim)
    if float(np.linalg.norm(d)) == 0.0:
        raise ZeroDirection("support direction is zero")
    return float(np.max(P.vertices @ d))


def circumradius(body):
    """Largest vertex norm (sup of ||x|| over the body); ball radius for balls."""
    if isinstance(body, Ball):
        return body.radius
    return float(np.max(np.linalg.norm(body.vertices, axis=1)))


# ---------------------------------------------------------------------------
# extreme points and projections
# ---------------------------------------------------------------------------


def _dedupe(points, tol):
    """Merge points within Euclidean distance tol; canonical lexsorted output."""
    pts = np.asarray(points, dtype=float)
    order = np.lexsort(pts.T[::-1])
    pts = pts[order]
    kept = []
    for i in range(pts.shape[0]):
        p = pts[i]
        dup = False
        for k in kept:
            d = p - pts[k]
            if float(d @ d) <= tol * tol:
                dup = True
                break
        if not dup:
            kept.append(i)
    return pts[kept]


def _span_frame(centered, rel_tol=1e-9):
    """Deterministic orthonormal basis (n x r) of the linear span of the rows."""
    scale = float(np.max(np.linalg.norm(centered, axis=1), initial=0.0))
    if scale == 0.0:
        return np.zeros((centered.shape[1], 0))
    cols = []
    for row in centered:
        v = row.astype(float, copy=True)
        for _ in range(2):
            for q in cols:
                v -= (q @ v) * q
        norm = float(np.linalg.norm(v))
        if norm > rel_tol * scale:
            cols.append(v / norm)
    return np.column_stack(cols) if cols else np.zeros((centered.shape[1], 0))


def _filter_extreme(coords, threshold):
    """Indices of points not in the convex hull of the others.

    A cheap support certificate (the point is the strict maximizer in its own
    outward direction) settles most vertices; the rest run a min-norm-point
    solve against the remaining points and are kept when their hull distance
    exceeds the threshold.
    """
    k = coords.shape[0]
    gram = coords @ coords.T
    diag = np.diag(gram).copy()
    norms = np.sqrt(np.maximum(diag, 0.0))
    keep = []
    uncertain = []
    for i in range(k):
        col = gram[:, i].copy()
        col[i] = -np.inf
        margin = diag[i] - float(np.max(col))
        if norms[i] > 0 and margin / norms[i] > threshold:
            keep.append(i)
        else:
            uncertain.append(i)
    mask = np.ones(k, dtype=bool)
    for i in uncertain:
        mask[i] = False
        others = coords[mask]
        mask[i] = True
        z = _min_norm_point(others - coords[i], gap_tol=0.0,
                            stop_below=0.2 * threshold)
        if float(np.linalg.norm(z)) > threshold:
            keep.append(i)
    return sorted(keep)


def extreme_points(points, threshold=EXTREME_TOL, dedupe_tol=EXTREME_TOL):
    """Extreme points of conv(points), in canonical (lexicographic) order.

    Points are first merged within dedupe_tol and reduced to the affine span
    of the set; rank <= 3 uses an exact convex hull, higher ranks the
    certificate/min-norm filter (a point is extreme iff its distance to the
    hull of the others exceeds threshold).
    """
    pts = _dedupe(points, dedupe_tol)
    if pts.shape[0] <= 1:
        return pts
    center = pts.mean(axis=0)
    centered = pts - center
    frame = _span_frame(centered)
    r = frame.shape[1]
    if r == 0:
        return pts[:1]
    coords = centered @ frame
    if r == 1:
        keep = sorted({int(np.argmin(coords[:, 0])), int(np.argmax(coords[:, 0]))})
    elif r <= 3:
        try:
            keep = sorted(int(i) for i in ConvexHull(coords).vertices)
        except QhullError:
            keep = _filter_extreme(coords, threshold)
    else:
        keep = _filter_extreme(coords, threshold)
    return pts[keep]


def project_out(P, u):
    """Shadow of P on the hyperplane orthogonal to the unit vector u.

    Maps each vertex x to x - <x, u> u and expresses the images in a
    deterministic orthonormal basis of u-perp (the standard basis vectors,
    minus the pivot of largest |u_i|, orthonormalized against u). Duplicate
    images within 1e-12 are merged; for shadows of dimension <= 3 the vertex
    set is reduced to hull vertices.
    """
    u = as_vector(u, P.ambient_dim)
    if abs(float(np.linalg.norm(u)) - 1.0) > 1e-10:
        raise NotUnit(f"direction norm {np.linalg.norm(u):.3e} is not 1")
    n = P.ambient_dim
    pivot = int(np.argmax(np.abs(u)))
    cols = np.empty((n, n))
    cols[:, 0] = u
    j = 1
    for i in range(n):
        if i == pivot:
            continue
        cols[:, j] = 0.0
        cols[i, j] = 1.0
        j += 1
    q, kept = orthonormal_columns(cols)
    basis = q[:, 1:]
    sub = Subspace(n, n - 1, basis)
    coords = _dedupe(P.vertices @ basis, 1e-12)
    if sub.dim <= 3:
        coords = extreme_points(coords, dedupe_tol=1e-12)
    return EmbeddedBody(sub, Polytope(coords))


def project_to_subspace(P, sub):
    """Orthogonal projection of P onto a subspace, in that subspace's basis."""
    if P.ambient_dim != sub.ambient_dim:
        raise DimensionError("polytope and subspace ambient dimensions differ")
    if sub.dim < 1:
        raise DimensionError("target subspace must have dimension >= 1")
    coords = _dedupe(P.vertices @ sub.basis, 1e-12)
    if sub.dim <= 3:
        coords = extreme_points(coords, dedupe_tol=1e-12)
    return EmbeddedBody(sub, Polytope(coords))


# ---------------------------------------------------------------------------
# congruence and symmetry groups
# ---------------------------------------------------------------------------


def _centered_extremes(P):
    ep = extreme_points(P.vertices)
    return ep - ep.mean(axis=0)


def _base_tuple(coords):
    """Greedy max-volume tuple of r linearly independent rows (indices)."""
    r = coords.shape[1]
    norms = np.linalg.norm(coords, axis=1)
    idx = [int(np.argmax(norms))]
    basis = [coords[idx[0]] / norms[idx[0]]]
    while len(idx) < r:
        resid = coords.copy()
        for q in basis:
            resid -= np.outer(resid @ q, q)
        rn = np.linalg.norm(resid, axis=1)
        nxt = int(np.argmax(rn))
        idx.append(nxt)
        basis.append(resid[nxt] / rn[nxt])
    return idx


def _tuple_candidates(base_coords, cand_coords, norm_tol, gram_tol):
    """Backtracking enumeration of candidate vertex tuples in cand_coords
    whose norms and pairwise inner products match those of base_coords."""
    r = base_coords.shape[0]
    k = cand_coords.shape[0]
    b_norms = np.linalg.norm(base_coords, axis=1)
    c_norms = np.linalg.norm(cand_coords, axis=1)
    b_gram = base_coords @ base_coords.T
    c_gram = cand_coords @ cand_coords.T
    stack = [()]
    while stack:
        partial = stack.pop()
        t = len(partial)
        if t == r:
            yield partial
            continue
        for j in range(k - 1, -1, -1):
            if abs(c_norms[j] - b_norms[t]) > norm_tol:
                continue
            ok = True
            for s, js in enumerate(partial):
                if abs(c_gram[j, js] - b_gram[t, s]) > gram_tol:
                    ok = False
                    break
            if ok:
                stack.append(partial + (j,))


def _procrustes(src, dst):
    """Orthogonal matrix g minimizing ||g src_i - dst_i|| over the tuple."""
    h = dst.T @ src
    u, _, vt = np.linalg.svd(h)
    return u @ vt


def _assemble_ambient(g_span, frame_p, frame_q):
    """Extend a span-coordinate map to a full ambient orthogonal matrix."""
    n = frame_p.shape[0]
    a = np.hstack([frame_p, np.eye(n)])
    qp, _ = orthonormal_columns(a)
    a = np.hstack([frame_q, np.eye(n)])
    qq, _ = orthonormal_columns(a)
    r = frame_p.shape[1]
    return qq[:, :r] @ g_span @ qp[:, :r].T + qq[:, r:] @ qp[:, r:].T


def _span_hausdorff(a, b):
    scale = 1.0 + max(float(np.max(np.abs(a))), float(np.max(np.abs(b))))
    return max(_directed_hausdorff(a, b, scale), _directed_hausdorff(b, a, scale))


def congruence_map(p0, q0, tol):
    """Low-level congruence search on pre-centered extreme vertex arrays.

    Returns an ambient orthogonal matrix g with d_H(g p0, q0) <= tol, or
    None. Callers that already hold centered extreme points (the estimators'
    inner loops) use this directly to avoid re-extracting them.
    """
    n = p0.shape[1]
    frame_p = _span_frame(p0)
    frame_q = _span_frame(q0)
    if frame_p.shape[1] != frame_q.shape[1]:
        # ranks differ: only the identity alignment is attempted
        if _span_hausdorff(p0, q0) <= tol:
            return np.eye(n)
        return None
    r = frame_p.shape[1]
    if r == 0:
        return np.eye(n)
    cp = p0 @ frame_p
    cq = q0 @ frame_q
    radius = max(float(np.max(np.linalg.norm(cp, axis=1))),
                 float(np.max(np.linalg.norm(cq, axis=1))))
    norm_tol = tol + 1e-9
    gram_tol = 2.0 * tol * (radius + tol) + 1e-9
    base = _base_tuple(cp)
    base_coords = cp[base]
    for cand in _tuple_candidates(base_coords, cq, norm_tol, gram_tol):
        g_span = _procrustes(base_coords, cq[list(cand)])
        if _span_hausdorff(cp @ g_span.T, cq) <= tol:
            return _assemble_ambient(g_span, frame_p, frame_q)
    return None


def congruent(P, Q, tol):
    """Orthogonal map g with Hausdorff distance d(g P0, Q0) <= tol, or None.

    P0, Q0 are the bodies translated so the centroid of their extreme
    vertices sits at the origin. The search matches vertex tuples that span
    the bodies' affine hulls and have equal centered Gram matrices (within
    slack proportional to tol), solves the orthogonal Procrustes problem over
    each matched tuple, and verifies the candidate globally by Hausdorff
    distance; absence of a verified map is returned as None, not an error.
    """
    if P.ambient_dim != Q.ambient_dim:
        raise DimensionError("polytopes live in different ambient dimensions")
    return congruence_map(_centered_extremes(P), _centered_extremes(Q), tol)


class SymmetryGroup:
    """Finite set of orthogonal matrices closed under products."""

    __slots__ = ("elements",)

    def __init__(self, elements):
        e = np.asarray(elements, dtype=float)
        if e.ndim != 3 or e.shape[1] != e.shape[2]:
            raise DimensionError(f"elements must be (k, n, n), got {e.shape}")
        e = e.copy()
        e.flags.writeable = False
        object.__setattr__(self, "elements", e)

    def __setattr__(self, name, value):
        raise AttributeError("SymmetryGroup is immutable")

    def __reduce__(self):
        return (SymmetryGroup, (np.asarray(self.elements),))

    @property
    def order(self):
        return int(self.elements.shape[0])

    @property
    def dim(self):
        return int(self.elements.shape[1])

    def index_of(self, g, tol=GROUP_TOL):
        """Index of the element matching g entrywise within tol, or -1."""
        d = np.max(np.abs(self.elements - g[None, :, :]), axis=(1, 2))
        i = int(np.argmin(d))
        return i if d[i] <= tol else -1

    def contains(self, g, tol=GROUP_TOL):
        return self.index_of(g, tol) >= 0

    def validate(self, vertices=None, tol_group=GROUP_TOL, tol_orth=1e-10):
        """Check the group invariants; raises ValueError on any violation.

        Verifies identity membership, orthogonality of every element, closure
        of the product table within tol_group, and, when the generating
        vertex set is supplied, that every element permutes it.
        """
        k, n, _ = self.elements.shape
        eye = np.eye(n)
        if self.index_of(eye, tol_group) < 0:
            raise ValueError("group does not contain the identity")
        for g in self.elements:
            if np.max(np.abs(g.T @ g - eye)) > tol_orth:
                raise ValueError("group element is not orthogonal within tolerance")
        flat = self.elements.reshape(k, -1)
        width = flat.shape[1] * 8
        rounded = np.round(flat, 6) + 0.0  # adding 0.0 folds -0.0 into +0.0
        buf = np.ascontiguousarray(rounded).tobytes()
        keys = set(buf[j * width:(j + 1) * width] for j in range(k))
        for i in range(k):
            prods = np.einsum("ij,kjl->kil", self.elements[i], self.elements)
            pflat = prods.reshape(k, -1)
            pbuf = np.ascontiguousarray(np.round(pflat, 6) + 0.0).tobytes()
            unmatched = [j for j in range(k)
                         if pbuf[j * width:(j + 1) * width] not in keys]
            if unmatched:
                # rounding straddle: fall back to direct distance matching
                d = np.abs(pflat[unmatched][:, None, :] - flat[None, :, :])
                if float(d.max(axis=2).min(axis=1).max()) > tol_group:
                    raise ValueError("group is not closed under products")
        if vertices is not None:
            for g in self.elements:
                if not _permutes(g, vertices, tol_group):
                    raise ValueError("group element does not permute the vertex set")

    def __repr__(self):
        return f"SymmetryGroup(order={self.order}, dim={self.dim})"


def _permutes(g, vertices, tol):
    """True iff g maps the vertex set bijectively onto itself within tol."""
    imgs = vertices @ g.T
    d = cdist(imgs, vertices)
    rows = d.min(axis=1)
    if float(rows.max()) > tol:
        return False
    assign = d.argmin(axis=1)
    return len(set(int(a) for a in assign)) == vertices.shape[0]


def symmetry_group(P, tol=GROUP_TOL):
    """All orthogonal maps permuting the centered extreme vertices of P.

    Requires the hull to span R^n after centering (Degenerate otherwise).
    Candidates come from the same tuple-matching search as congruence testing
    with P matched against itself; each candidate is kept only if it permutes
    the vertex set, and the resulting element list is verified against the
    full group invariants before being returned.
    """
    p0 = _centered_extremes(P)
    n = P.ambient_dim
    frame = _span_frame(p0)
    if frame.shape[1] < n:
        raise Degenerate(
            f"hull spans only {frame.shape[1]} of {n} dimensions after centering")
    radius = float(np.max(np.linalg.norm(p0, axis=1)))
    base = _base_tuple(p0)
    base_coords = p0[base]
    norm_tol = tol + 1e-12
    gram_tol = 2.0 * tol * (radius + tol) + 1e-12
    found = []
    found_flat = np.empty((0, n * n))
    for cand in _tuple_candidates(base_coords, p0, norm_tol, gram_tol):
        g = _procrustes(base_coords, p0[list(cand)])
        if not _permutes(g, p0, tol):
            continue
        gf = g.reshape(-1)
        if found and float(np.abs(found_flat - gf).max(axis=1).min()) <= 1e-6:
            continue
        found.append(g)
        found_flat = np.vstack([found_flat, gf])
    group = SymmetryGroup(np.stack(found))
    group.validate(vertices=p0, tol_group=max(tol, GROUP_TOL))
    return group
