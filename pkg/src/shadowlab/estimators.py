"""Monte-Carlo estimators: ambiguity fractions, E[log N], the mutual-information
upper bound, plug-in conditional MI, and the Markov/data-processing check.

All estimates that stand in for exact projection equality are epsilon-dependent
and are reported with their epsilon; see geometry's module notes. Estimators
take a RandomSource and assign one child stream per sample index, so any run is
bitwise reproducible for every worker count.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial.distance import pdist

from .errors import DimensionError, DomainError
from .geometry import Ball, EmbeddedBody, Polytope, congruence_map, extreme_points
from .linalg import complement, log_gamma
from .parallel import parallel_map
from .sampling import RandomSource, project_chain, sample_chain, sample_grassmannian

Z95 = 1.959963984540054  # Phi^{-1}(0.975)


class _Divergent:
    """Singleton flag: E[log N] diverges (some sampled fraction was zero)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "DIVERGENT"

    def __reduce__(self):
        return (_Divergent, ())


DIVERGENT = _Divergent()


def wilson_interval(hits, n, z=Z95):
    """Wilson score interval for a binomial fraction; sane at 0 and 1.

    The interval always contains the point estimate (clamped against
    floating-point noise at the 0 and 1 edges).
    """
    if n < 1:
        raise DomainError("need at least one sample")
    p = hits / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = (z / denom) * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n))
    return (min(p, max(0.0, center - half)), max(p, min(1.0, center + half)))


# ---------------------------------------------------------------------------
# shape descriptors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShapeDescriptor:
    """Hashable congruence-class key for a body.

    signature holds the sorted pairwise distances between the centered
    extreme vertices, each rounded to the nearest multiple of grid_step; it is
    invariant under orthogonal maps and vertex reordering, and congruent
    bodies share it whenever grid_step comfortably exceeds twice the
    congruence tolerance.
    """

    grid_step: float
    signature: tuple


def _body_vertices(body):
    if isinstance(body, EmbeddedBody):
        return body.body.vertices
    if isinstance(body, Polytope):
        return body.vertices
    raise TypeError(f"expected Polytope or EmbeddedBody, got {type(body).__name__}")


def shape_descriptor(body, grid_step):
    """Descriptor of a polytope (or embedded polytope) at the given grid."""
    if grid_step <= 0:
        raise DomainError("grid step must be positive")
    ep = extreme_points(_body_vertices(body))
    if ep.shape[0] < 2:
        return ShapeDescriptor(float(grid_step), ())
    dists = np.sort(pdist(ep))
    cells = np.rint(dists / grid_step).astype(np.int64)
    return ShapeDescriptor(float(grid_step), tuple(float(c * grid_step) for c in cells))


# ---------------------------------------------------------------------------
# N(K0, K2) and E[log N]
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NEstimate:
    """Monte-Carlo estimate of the epsilon-thickened ambiguity fraction."""

    epsilon: float
    n_samples: int
    hits: int
    fraction: float
    wilson_ci: tuple


@dataclass(frozen=True)
class ElogNEstimate:
    """E[log N] at one epsilon; value is a float or the DIVERGENT flag."""

    epsilon: float
    value: object
    ci: Optional[tuple]


def sample_codim2_shadow(K0, rng):
    """Shadow of K0 on the complement of a Haar 2-plane, in complement coords."""
    from .geometry import project_to_subspace

    w = sample_grassmannian(rng, K0.ambient_dim, 2)
    return project_to_subspace(K0, complement(w))


_shadow_codim2 = sample_codim2_shadow


def _shadow_signature(vertices):
    ep = extreme_points(vertices)
    centered = ep - ep.mean(axis=0)
    dists = np.sort(pdist(centered)) if ep.shape[0] > 1 else np.zeros(0)
    return centered, dists


def _eps_match(p_sig, q_sig, eps):
    """Monotone-in-eps congruence decision with the descriptor pre-filter.

    When the extreme counts agree, sorted distance lists further than 2 eps
    apart elementwise cannot verify and are rejected outright; everything
    else runs the full congruence search at tolerance eps.
    """
    p_centered, p_dists = p_sig
    q_centered, q_dists = q_sig
    if p_dists.size == q_dists.size and p_dists.size:
        if float(np.max(np.abs(p_dists - q_dists))) > 2.0 * eps:
            return False
    return congruence_map(p_centered, q_centered, eps) is not None


def _n_sweep_task(payload):
    K0, ref_sig, eps_desc, seed, stream = payload
    shadow = _shadow_codim2(K0, RandomSource(seed, stream))
    sig = _shadow_signature(shadow.body.vertices)
    hits = []
    ok = True
    for eps in eps_desc:
        if ok:
            ok = _eps_match(sig, ref_sig, eps)
        hits.append(ok)
    return hits


def _check_codim2(K0, K2ref):
    if K2ref.subspace.ambient_dim != K0.ambient_dim:
        raise DimensionError("reference shadow and body live in different ambient spaces")
    codim = K2ref.subspace.ambient_dim - K2ref.subspace.dim
    if codim != 2:
        raise DimensionError(f"reference body has codimension {codim}, expected 2")


def estimate_n_sweep(K0, K2ref, epsilons, n_samples, rng, workers=1):
    """NEstimates over an epsilon grid with one shared set of Haar draws.

    The per-sample decision is monotone in epsilon (filters and verification
    thresholds only relax as epsilon grows), so fractions are monotone
    non-increasing as epsilon decreases, sample by sample.
    """
    epsilons = [float(e) for e in epsilons]
    if not epsilons or any(e <= 0 for e in epsilons):
        raise DomainError("epsilon grid must be nonempty and positive")
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    if isinstance(K0, Ball):
        return [NEstimate(e, n_samples, n_samples, 1.0,
                          wilson_interval(n_samples, n_samples))
                for e in epsilons]
    _check_codim2(K0, K2ref)
    order = sorted(range(len(epsilons)), key=lambda i: -epsilons[i])
    eps_desc = [epsilons[i] for i in order]
    ref_sig = _shadow_signature(K2ref.body.vertices)
    payloads = [(K0, ref_sig, eps_desc, rng.seed, rng.stream + (i,))
                for i in range(n_samples)]
    rows = parallel_map(_n_sweep_task, payloads, workers)
    hits_desc = np.asarray(rows, dtype=int).sum(axis=0)
    out = [None] * len(epsilons)
    for pos, i in enumerate(order):
        h = int(hits_desc[pos])
        out[i] = NEstimate(epsilons[i], n_samples, h, h / n_samples,
                           wilson_interval(h, n_samples))
    return out


def estimate_N(K0, K2ref, epsilon, n_samples, rng, workers=1):
    """Fraction of Haar codimension-2 shadows epsilon-congruent to K2ref."""
    return estimate_n_sweep(K0, K2ref, [epsilon], n_samples, rng, workers)[0]


def _elogn_outer_task(payload):
    K0, eps_desc, inner, seed, stream = payload
    root = RandomSource(seed, stream)
    ref = _shadow_codim2(K0, root.child(0))
    ref_sig = _shadow_signature(ref.body.vertices)
    counts = np.zeros(len(eps_desc), dtype=int)
    for i in range(inner):
        inner_rng = RandomSource(seed, stream + (1, i))
        shadow = _shadow_codim2(K0, inner_rng)
        sig = _shadow_signature(shadow.body.vertices)
        ok = True
        for pos, eps in enumerate(eps_desc):
            if ok:
                ok = _eps_match(sig, ref_sig, eps)
            counts[pos] += ok
    return counts


def estimate_elogn_sweep(K0, epsilons, outer, inner, rng, workers=1):
    """E[log N_eps] over an epsilon grid, sharing all draws across the grid.

    The outer loop draws a reference shadow K2; the inner loop estimates the
    epsilon-fraction against it. A zero inner fraction at some epsilon makes
    that epsilon's estimate DIVERGENT (finite symmetry makes exact equality a
    measure-zero event, so this is an expected outcome, not an error).
    """
    epsilons = [float(e) for e in epsilons]
    if not epsilons or any(e <= 0 for e in epsilons):
        raise DomainError("epsilon grid must be nonempty and positive")
    if outer < 1 or inner < 1:
        raise DomainError("outer and inner sample counts must be >= 1")
    if isinstance(K0, Ball):
        return [ElogNEstimate(e, 0.0, (0.0, 0.0)) for e in epsilons]
    order = sorted(range(len(epsilons)), key=lambda i: -epsilons[i])
    eps_desc = [epsilons[i] for i in order]
    payloads = [(K0, eps_desc, inner, rng.seed, rng.stream + (j,))
                for j in range(outer)]
    rows = np.asarray(parallel_map(_elogn_outer_task, payloads, workers))
    fractions = rows / float(inner)  # (outer, n_eps)
    out = [None] * len(epsilons)
    for pos, i in enumerate(order):
        f = fractions[:, pos]
        if np.any(f == 0.0):
            out[i] = ElogNEstimate(epsilons[i], DIVERGENT, None)
            continue
        logs = np.log(f)
        mean = float(np.mean(logs))
        half = Z95 * float(np.std(logs, ddof=1)) / math.sqrt(outer) if outer > 1 else 0.0
        out[i] = ElogNEstimate(epsilons[i], mean, (mean - half, mean + half))
    return out


def estimate_ElogN(K0, epsilon, outer, inner, rng, workers=1):
    """(E[log N_eps] or DIVERGENT, confidence interval) at a single epsilon."""
    est = estimate_elogn_sweep(K0, [epsilon], outer, inner, rng, workers)[0]
    return est.value, est.ci


# ---------------------------------------------------------------------------
# Theorem-1 bound evaluation
# ---------------------------------------------------------------------------


def theorem1_first_term(n):
    """ln( pi^{n/2 - 2} / Gamma((n-2)/2) ); exact 0 at n = 4."""
    if n < 3:
        raise DomainError(f"first term requires n >= 3, got {n}")
    return (0.5 * n - 2.0) * math.log(math.pi) - log_gamma(0.5 * (n - 2))


def theorem1_bound(n, e_log_n):
    """Upper bound on the conditional MI: first term minus E[log N].

    DIVERGENT E[log N] yields +inf (the bound degenerates, as expected for
    bodies with finite symmetry groups).
    """
    first = theorem1_first_term(n)
    if e_log_n is DIVERGENT:
        return math.inf
    return first - float(e_log_n)


@dataclass(frozen=True)
class BoundReport:
    """Everything the bound evaluation produced for one body and epsilon."""

    n: int
    first_term: float
    e_log_n: object          # float or DIVERGENT
    bound: float             # +inf when e_log_n is DIVERGENT
    mi_plugin: float
    n_samples: dict
    seeds: dict
    epsilon: float
    delta: float
    flags: tuple = ()


def default_grid_step(body):
    """Default descriptor grid: 0.05 times the circumradius."""
    from .geometry import circumradius

    return 0.05 * circumradius(body)


def bound_report(K0, epsilon, outer, inner, mi_samples, grid_step, rng, workers=1):
    """Assemble a BoundReport: E[log N_eps], the bound, and plug-in MI at m=2."""
    n = K0.ambient_dim
    if grid_step is None:
        grid_step = default_grid_step(K0)
    value, ci = estimate_ElogN(K0, epsilon, outer, inner, rng.child(0), workers)
    mi = estimate_conditional_mi(K0, 2, mi_samples, grid_step, rng.child(1), workers)
    flags = () if isinstance(K0, Ball) else ("FINITE_GROUP_DEGENERATE",)
    return BoundReport(
        n=n,
        first_term=theorem1_first_term(n),
        e_log_n=value,
        bound=theorem1_bound(n, value),
        mi_plugin=mi.value,
        n_samples={"outer": outer, "inner": inner, "mi": mi_samples},
        seeds={"seed": rng.seed, "stream": list(rng.stream)},
        epsilon=float(epsilon),
        delta=float(grid_step),
        flags=flags,
    )


# ---------------------------------------------------------------------------
# plug-in conditional mutual information and the data-processing check
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MIEstimate:
    """Plug-in MI (nats) of the empirical joint over descriptor classes."""

    value: float
    n_samples: int
    class_counts: dict


def _entropy_from_counts(counts, n):
    p = counts / n
    return -float(np.sum(p * np.log(p)))


def _plugin_mi(l1, l2):
    """Maximum-likelihood MI of two integer label arrays, in nats.

    Computed as H(X) + H(Y) - H(X, Y) over empirical counts; the joint stays
    sparse, so label spaces as large as the sample count are fine.
    """
    n = l1.size
    c1 = np.unique(l1, return_counts=True)[1].astype(float)
    c2 = np.unique(l2, return_counts=True)[1].astype(float)
    codes = l1.astype(np.int64) * (int(l2.max()) + 1) + l2
    c12 = np.unique(codes, return_counts=True)[1].astype(float)
    mi = (_entropy_from_counts(c1, n) + _entropy_from_counts(c2, n)
          - _entropy_from_counts(c12, n))
    return max(0.0, mi)


def _label(descriptors):
    table = {}
    labels = np.empty(len(descriptors), dtype=np.int64)
    for i, d in enumerate(descriptors):
        labels[i] = table.setdefault(d.signature, len(table))
    return labels


def _count_dict(labels):
    vals, counts = np.unique(labels, return_counts=True)
    return {int(v): int(c) for v, c in zip(vals, counts)}

def _joint_count_dict(l1, l2):
    out = {}
    for a, b in zip(l1, l2):
        out[(int(a), int(b))] = out.get((int(a), int(b)), 0) + 1
    return out


def _mi_estimate(l1, l2, n_samples):
    return MIEstimate(
        value=_plugin_mi(l1, l2),
        n_samples=n_samples,
        class_counts={
            "first": _count_dict(l1),
            "second": _count_dict(l2),
            "joint": _joint_count_dict(l1, l2),
        },
    )


def _chain_descriptor_task(payload):
    K0, m, grid_step, stages, seed, stream = payload
    chain = sample_chain(RandomSource(seed, stream), K0.ambient_dim, m)
    bodies = project_chain(K0, chain)
    return tuple(shape_descriptor(bodies[s - 1], grid_step) for s in stages)


def _sample_stage_labels(K0, m, n_samples, grid_step, stages, rng, workers):
    payloads = [(K0, m, grid_step, stages, rng.seed, rng.stream + (i,))
                for i in range(n_samples)]
    rows = parallel_map(_chain_descriptor_task, payloads, workers)
    return [_label([row[s] for row in rows]) for s in range(len(stages))]


def _ball_mi(n_samples):
    return MIEstimate(0.0, n_samples,
                      {"first": {0: n_samples}, "second": {0: n_samples},
                       "joint": {(0, 0): n_samples}})


def estimate_conditional_mi(K0, m, n_samples, grid_step, rng, workers=1):
    """Plug-in MI between the first and m-th shadow classes, in nats.

    Samples n_samples independent chains, classifies K_1 and K_m by their
    shape descriptors at grid_step, and returns the MI of the empirical joint
    (conditioning on the fixed K0 is implicit: K0 is a constant here).
    """
    if grid_step is not None and grid_step <= 0:
        raise DomainError("grid step must be positive")
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    if isinstance(K0, Ball):
        return _ball_mi(n_samples)
    if not 2 <= m <= K0.ambient_dim - 1:
        raise DimensionError(f"need 2 <= m <= n - 1, got m={m}, n={K0.ambient_dim}")
    if grid_step is None:
        grid_step = default_grid_step(K0)
    l1, lm = _sample_stage_labels(K0, m, n_samples, grid_step, (1, m), rng, workers)
    return _mi_estimate(l1, lm, n_samples)


@dataclass(frozen=True)
class DPIReport:
    """Same-chain comparison of MI(K1;K2) against MI(K1;Km)."""

    mi_first_second: MIEstimate
    mi_first_last: MIEstimate
    difference: float
    bootstrap_stderr: float
    n_bootstrap: int
    passed: bool
    m: int


def validate_dpi(K0, m, n_samples, grid_step, rng, n_bootstrap=200, workers=1):
    """Data-processing check: MI(K1;Km) <= MI(K1;K2) + 2 bootstrap stderr.

    Both estimates use the same sampled chains, so the plug-in bias largely
    cancels in the comparison; the bootstrap resamples whole chains.
    """
    if isinstance(K0, Ball):
        zero = _ball_mi(n_samples)
        return DPIReport(zero, zero, 0.0, 0.0, n_bootstrap, True, m)
    if m < 3:
        raise DimensionError(f"DPI comparison needs m >= 3, got {m}")
    if not m <= K0.ambient_dim - 1:
        raise DimensionError(f"need m <= n - 1, got m={m}, n={K0.ambient_dim}")
    if n_samples < 2:
        raise DomainError("need at least two chains for a bootstrap")
    if grid_step is None:
        grid_step = default_grid_step(K0)
    l1, l2, lm = _sample_stage_labels(
        K0, m, n_samples, grid_step, (1, 2, m), rng.child(0), workers)
    mi12 = _mi_estimate(l1, l2, n_samples)
    mi1m = _mi_estimate(l1, lm, n_samples)
    gen = rng.child(1).generator
    diffs = np.empty(n_bootstrap)
    for b in range(n_bootstrap):
        idx = gen.integers(0, n_samples, n_samples)
        diffs[b] = _plugin_mi(l1[idx], l2[idx]) - _plugin_mi(l1[idx], lm[idx])
    stderr = float(np.std(diffs, ddof=1))
    passed = mi1m.value <= mi12.value + 2.0 * stderr
    return DPIReport(mi12, mi1m, mi12.value - mi1m.value, stderr,
                     n_bootstrap, passed, m)
