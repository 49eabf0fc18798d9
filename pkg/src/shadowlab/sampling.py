"""Seedable random streams, sphere and Grassmannian samplers, projection chains."""

import numpy as np

from .errors import ChainIdentityError, DimensionError
from .linalg import Subspace, complement, orthonormal_columns, orthonormalize
from .geometry import EmbeddedBody, hausdorff, project_out, project_to_subspace


class RandomSource:
    """A reproducible random stream identified by (seed, stream path).

    Backed by numpy's PCG64 seeded through SeedSequence, with the stream path
    used as the spawn key: the same (seed, stream) always reproduces the same
    sequence, distinct streams are statistically independent, and any stream
    can be constructed directly without touching its ancestors. Monte-Carlo
    code assigns one child stream per task index before execution, which makes
    results independent of scheduling and worker count.

    Instances are single-consumer: share seeds, not generators.
    """

    __slots__ = ("seed", "stream", "generator")

    def __init__(self, seed, stream=()):
        if isinstance(stream, int):
            stream = (stream,)
        stream = tuple(int(s) for s in stream)
        if any(s < 0 for s in stream):
            raise ValueError("stream indices must be non-negative")
        seq = np.random.SeedSequence(int(seed), spawn_key=stream)
        object.__setattr__(self, "seed", int(seed))
        object.__setattr__(self, "stream", stream)
        object.__setattr__(self, "generator", np.random.Generator(np.random.PCG64(seq)))

    def __setattr__(self, name, value):
        raise AttributeError("RandomSource configuration is immutable")

    def child(self, index):
        """Fresh independent stream at this stream's path extended by index."""
        return RandomSource(self.seed, self.stream + (int(index),))

    def __reduce__(self):
        # reconstruction restarts the stream; consumed state is not carried
        return (RandomSource, (self.seed, self.stream))

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, stream={self.stream})"


class DirectionChain:
    """Mutually orthogonal unit directions U_1..U_m in ambient coordinates."""

    __slots__ = ("ambient_dim", "directions")

    def __init__(self, ambient_dim, directions):
        d = np.asarray(directions, dtype=float)
        if d.size == 0:
            d = np.zeros((0, ambient_dim))
        if d.ndim != 2 or d.shape[1] != ambient_dim:
            raise DimensionError(f"directions shape {d.shape} incompatible with R^{ambient_dim}")
        m = d.shape[0]
        if m > ambient_dim - 1:
            raise DimensionError(f"chain length {m} exceeds n - 1 = {ambient_dim - 1}")
        if m:
            norms = np.linalg.norm(d, axis=1)
            if np.max(np.abs(norms - 1.0)) > 1e-10:
                raise ValueError("chain directions must be unit vectors")
            gram = d @ d.T
            if np.max(np.abs(gram - np.eye(m))) > 1e-10:
                raise ValueError("chain directions must be mutually orthogonal")
        d = d.copy()
        d.flags.writeable = False
        object.__setattr__(self, "ambient_dim", int(ambient_dim))
        object.__setattr__(self, "directions", d)

    def __setattr__(self, name, value):
        raise AttributeError("DirectionChain is immutable")

    def __reduce__(self):
        return (DirectionChain, (self.ambient_dim, np.asarray(self.directions)))

    def __len__(self):
        return int(self.directions.shape[0])

    def __repr__(self):
        return f"DirectionChain(m={len(self)}, ambient_dim={self.ambient_dim})"


def sample_unit_sphere(rng, n):
    """Uniform point on S^{n-1}: normalized standard Gaussian (redraw near 0)."""
    if n < 1:
        raise DimensionError(f"sphere sampling needs n >= 1, got {n}")
    while True:
        g = rng.generator.standard_normal(n)
        norm = float(np.linalg.norm(g))
        if norm >= 1e-6:
            return g / norm


def sample_chain(rng, n, m):
    """Chain of m directions, each uniform on the unit sphere of the current
    intersection of complements.

    Step i draws a Gaussian in R^n, projects it onto the intersection
    subspace W_{i-1} via its projector, normalizes, then shrinks the
    intersection basis by the new direction; conditionally on the first i-1
    directions the i-th is uniform on the (n-i)-sphere inside W_{i-1}.
    """
    if not 0 <= m <= n - 1:
        raise DimensionError(f"need 0 <= m <= n - 1, got m={m}, n={n}")
    basis = np.eye(n)
    dirs = []
    for _ in range(m):
        while True:
            g = rng.generator.standard_normal(n)
            w = basis @ (basis.T @ g)
            norm = float(np.linalg.norm(w))
            if norm >= 1e-6:
                break
        u = w / norm
        if dirs:
            # normalizing a near-degenerate draw amplifies roundoff along the
            # previous directions; re-orthogonalizing restores it at fp scale
            for prev in dirs:
                u = u - (prev @ u) * prev
            u = u / float(np.linalg.norm(u))
        dirs.append(u)
        stacked = np.column_stack([u, basis])
        q, _ = orthonormal_columns(stacked)
        basis = q[:, 1:]
    return DirectionChain(n, np.array(dirs) if dirs else np.zeros((0, n)))


def sample_grassmannian(rng, n, k):
    """Haar-distributed k-plane in R^n: orthonormalized Gaussian matrix."""
    if not 1 <= k <= n:
        raise DimensionError(f"need 1 <= k <= n, got k={k}, n={n}")
    while True:
        a = rng.generator.standard_normal((n, k))
        q, kept = orthonormal_columns(a)
        if len(kept) == k:
            return Subspace(n, k, q)


def project_chain(K0, chain, check_tol=1e-9):
    """Iterated shadows K_1..K_m of K_0 along a direction chain.

    Each returned body is embedded via the cumulative subspace basis, so it
    can be mapped back to R^n directly. After the last step the iterated
    result is checked against the direct projection of K_0 onto the
    intersection of the complements; a Hausdorff mismatch beyond check_tol
    raises ChainIdentityError (pass check_tol=None to skip).
    """
    if K0.ambient_dim != chain.ambient_dim:
        raise DimensionError("polytope and chain ambient dimensions differ")
    n = K0.ambient_dim
    basis = np.eye(n)
    body = K0
    results = []
    for u in chain.directions:
        u_local = basis.T @ u
        step = project_out(body, u_local)
        basis = basis @ step.subspace.basis
        body = step.body
        results.append(EmbeddedBody(Subspace(n, basis.shape[1], basis), body))
    if results and check_tol is not None:
        span = orthonormalize(list(chain.directions))
        direct = project_to_subspace(K0, complement(span))
        mismatch = hausdorff(results[-1].embed(), direct.embed())
        if mismatch > check_tol:
            raise ChainIdentityError(
                f"iterated vs direct projection differ by d_H = {mismatch:.3e}")
    return results
