"""Stabilizers, orbits, conjugacy classes, and Monte-Carlo Grassmannian strata.

Finite groups are measured by counting: Vol(G) = |G| and v_[H] = |H0|. That is
the only self-consistent finite normalization of the Haar-volume expressions,
and every finite-group report is flagged FINITE_GROUP_DEGENERATE because the
true E[log N] diverges for finite symmetry; the evaluated formula is reported,
never asserted as a certified bound. Continuous symmetry is supported only
through the analytic ball fast path.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, DomainError, ModeUnsupported, OrbitStabilizerMismatch
from .geometry import SymmetryGroup
from .linalg import Subspace, log_grassmannian_volume, projector
from .parallel import parallel_map
from .sampling import RandomSource, sample_grassmannian

SUBSPACE_TOL = 1e-8

FINITE_GROUP_DEGENERATE = "FINITE_GROUP_DEGENERATE"
ANALYTIC_BALL = "ANALYTIC_BALL"


def stabilizer(G, W, tol=SUBSPACE_TOL):
    """Subgroup of G fixing the subspace W setwise.

    Setwise fixing is tested basis-independently: g fixes W iff conjugating
    W's projector by g reproduces it within tol (max norm).
    """
    if G.dim != W.ambient_dim:
        raise DimensionError("group and subspace ambient dimensions differ")
    pw = projector(W)
    conj = np.matmul(np.matmul(G.elements, pw), G.elements.transpose(0, 2, 1))
    dev = np.max(np.abs(conj - pw), axis=(1, 2))
    sub = SymmetryGroup(G.elements[dev <= tol])
    sub.validate(tol_group=max(tol, SUBSPACE_TOL))
    return sub


def orbit(G, W, tol=SUBSPACE_TOL):
    """Distinct images gW for g in G, deduplicated by projector distance.

    Raises OrbitStabilizerMismatch unless |orbit| * |stabilizer| equals |G|
    exactly, which guards the dedup tolerance.
    """
    if G.dim != W.ambient_dim:
        raise DimensionError("group and subspace ambient dimensions differ")
    bases = np.matmul(G.elements, W.basis)
    projs = np.matmul(bases, bases.transpose(0, 2, 1))
    reps = []
    for i in range(projs.shape[0]):
        dup = any(np.max(np.abs(projs[i] - projs[j])) <= tol for j in reps)
        if not dup:
            reps.append(i)
    subs = [Subspace(W.ambient_dim, W.dim, bases[i]) for i in reps]
    stab_order = stabilizer(G, W, tol).order
    if len(subs) * stab_order != G.order:
        raise OrbitStabilizerMismatch(
            f"|orbit| * |stab| = {len(subs)} * {stab_order} != |G| = {G.order}")
    return subs


def _conjugate_matches(G, H1, H2, tol):
    """True iff g H1 g^-1 = H2 as sets for some g in G."""
    if H1.order != H2.order:
        return False
    h2 = H2.elements
    for g in G.elements:
        imgs = np.matmul(np.matmul(g, H1.elements), g.T)
        d = np.max(np.abs(imgs[:, None, :, :] - h2[None, :, :, :]), axis=(2, 3))
        if float(d.min(axis=1).max()) <= tol:
            return True
    return False


def _canonical_key(H, decimals=6):
    flat = np.round(H.elements.reshape(H.order, -1), decimals)
    order = np.lexsort(flat.T[::-1])
    return flat[order].tobytes()


def conjugacy_classify(G, subgroups, tol=SUBSPACE_TOL):
    """Partition subgroups of G into conjugacy classes.

    Returns a list of (representative, member_indices); the representative of
    a class is its member with the smallest lexicographic (rounded, sorted)
    element list, which makes the output order-independent of the input.
    """
    for H in subgroups:
        for h in H.elements:
            if not G.contains(h, tol):
                raise ValueError("subgroup element not found in G")
    classes = []  # list of [member_indices]
    for i, H in enumerate(subgroups):
        placed = False
        for cls in classes:
            if _conjugate_matches(G, subgroups[cls[0]], H, tol):
                cls.append(i)
                placed = True
                break
        if not placed:
            classes.append([i])
    out = []
    for cls in classes:
        rep = min(cls, key=lambda i: _canonical_key(subgroups[i]))
        out.append((subgroups[rep], tuple(cls)))
    return out


@dataclass(frozen=True)
class Stratum:
    """One observed orbit-type stratum of the 2-plane Grassmannian."""

    class_rep: SymmetryGroup
    v: float          # counting-measure volume of the stabilizer class, |H0|
    mu_hat: float
    count: int


@dataclass(frozen=True)
class StratReport:
    """Monte-Carlo stratification and the stratified lower-bound formula."""

    strata: tuple
    group_order: Optional[int]   # None for the analytic ball (continuous G)
    n: int
    n_samples: int
    seed: dict
    lower_bound: float
    mode: str                    # "counting" or "analytic-ball"
    flags: tuple = ()


def _stabilizer_task(payload):
    elements, n, tol, seed, stream = payload
    G = SymmetryGroup(elements)
    w = sample_grassmannian(RandomSource(seed, stream), n, 2)
    pw = projector(w)
    conj = np.matmul(np.matmul(G.elements, pw), G.elements.transpose(0, 2, 1))
    dev = np.max(np.abs(conj - pw), axis=(1, 2))
    return G.elements[dev <= tol]


def stratify(G, n, n_samples, rng, tol=SUBSPACE_TOL, workers=1):
    """Sample Haar 2-planes, classify their stabilizers by conjugacy.

    mu_hat is the empirical frequency of each stabilizer conjugacy class; the
    lower bound is assembled with the counting-measure convention
    ln|G| - ln Vol(G_{n,2}) - sum ln(v) mu_hat and flagged degenerate.
    """
    if n < 3:
        raise DomainError(f"stratification needs n >= 3, got {n}")
    if G.dim != n:
        raise DimensionError("group does not act in R^n")
    if n_samples < 1:
        raise DomainError("n_samples must be >= 1")
    payloads = [(np.asarray(G.elements), n, tol, rng.seed, rng.stream + (i,))
                for i in range(n_samples)]
    stab_elements = parallel_map(_stabilizer_task, payloads, workers)
    key_to_class = {}
    reps = []      # representative SymmetryGroup per class
    counts = []
    for els in stab_elements:
        H = SymmetryGroup(els)
        key = _canonical_key(H)
        cls = key_to_class.get(key)
        if cls is None:
            for j, rep in enumerate(reps):
                if _conjugate_matches(G, rep, H, tol):
                    cls = j
                    break
            if cls is None:
                H.validate(tol_group=max(tol, SUBSPACE_TOL))
                reps.append(H)
                counts.append(0)
                cls = len(reps) - 1
            key_to_class[key] = cls
        counts[cls] += 1
    strata = tuple(
        Stratum(class_rep=rep, v=float(rep.order),
                mu_hat=c / n_samples, count=int(c))
        for rep, c in zip(reps, counts))
    lower = (math.log(G.order) - log_grassmannian_volume(n)
             - sum(math.log(s.v) * s.mu_hat for s in strata))
    return StratReport(
        strata=strata,
        group_order=G.order,
        n=n,
        n_samples=n_samples,
        seed={"seed": rng.seed, "stream": list(rng.stream)},
        lower_bound=lower,
        mode="counting",
        flags=(FINITE_GROUP_DEGENERATE,),
    )


def analytic_ball_report(n, n_samples=0):
    """Stratification stand-in for the ball: N is identically 1, E[log N] = 0."""
    if n < 3:
        raise DomainError(f"stratification needs n >= 3, got {n}")
    return StratReport(
        strata=(),
        group_order=None,
        n=n,
        n_samples=n_samples,
        seed={},
        lower_bound=0.0,
        mode="analytic-ball",
        flags=(ANALYTIC_BALL,),
    )


def theorem2_lower_bound(report, mode="counting"):
    """Evaluate the stratified lower bound on E[log N] under a convention.

    counting: ln|G| - ln Vol(G_{n,2}) - sum ln(v_[H]) mu_hat, only meaningful
    alongside its FINITE_GROUP_DEGENERATE caveat. analytic-ball: exactly 0,
    bypassing group volumes. Mixing modes and report kinds raises
    ModeUnsupported (general continuous groups are out of scope).
    """
    if mode == "analytic-ball":
        if report.mode != "analytic-ball":
            raise ModeUnsupported("analytic-ball mode requires a ball report")
        return 0.0
    if mode == "counting":
        if report.mode != "counting":
            raise ModeUnsupported(
                "counting mode applies to finite groups only; "
                "continuous symmetry is supported only via the analytic ball")
        return (math.log(report.group_order) - log_grassmannian_volume(report.n)
                - sum(math.log(s.v) * s.mu_hat for s in report.strata))
    raise ModeUnsupported(f"unknown mode {mode!r}")
