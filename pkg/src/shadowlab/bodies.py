"""Built-in body generators and the vertex-file format."""

import itertools
import math

import numpy as np

from .errors import BadParams, ConfigError, UnknownBody
from .geometry import Ball, Polytope, _span_frame
from .sampling import RandomSource

BUILTIN_BODIES = (
    "cube", "box", "cross-polytope", "simplex-regular", "simplex-random",
    "prism-regular-polygon", "random-hull", "ball",
)


def _require(params, allowed, required):
    unknown = set(params) - set(allowed)
    if unknown:
        raise BadParams(f"unknown parameters {sorted(unknown)}; allowed {sorted(allowed)}")
    missing = set(required) - set(params)
    if missing:
        raise BadParams(f"missing required parameters {sorted(missing)}")


def _positive_int(params, key, minimum=1):
    v = params[key]
    if not isinstance(v, int) or isinstance(v, bool) or v < minimum:
        raise BadParams(f"parameter {key!r} must be an integer >= {minimum}, got {v!r}")
    return v


def _cube(params):
    _require(params, {"n", "scale"}, {"n"})
    n = _positive_int(params, "n")
    s = float(params.get("scale", 1.0))
    verts = np.array(list(itertools.product((-s, s), repeat=n)))
    return Polytope(verts)


def _box(params):
    _require(params, {"half_widths"}, {"half_widths"})
    hw = [float(w) for w in params["half_widths"]]
    if not hw or any(w <= 0 for w in hw):
        raise BadParams("half_widths must be a nonempty list of positive numbers")
    verts = np.array(list(itertools.product(*[(-w, w) for w in hw])))
    return Polytope(verts)


def _cross_polytope(params):
    _require(params, {"n", "scale"}, {"n"})
    n = _positive_int(params, "n")
    s = float(params.get("scale", 1.0))
    return Polytope(np.vstack([s * np.eye(n), -s * np.eye(n)]))


def _simplex_regular(params):
    """Regular n-simplex: the centered standard-basis simplex of R^{n+1}
    expressed in a deterministic basis of its affine hull (edge length
    scale * sqrt(2))."""
    _require(params, {"n", "scale"}, {"n"})
    n = _positive_int(params, "n")
    s = float(params.get("scale", 1.0))
    pts = np.eye(n + 1) - 1.0 / (n + 1)
    frame = _span_frame(pts)
    return Polytope(s * (pts @ frame))


def _simplex_random(params):
    _require(params, {"n", "seed"}, {"n", "seed"})
    n = _positive_int(params, "n")
    seed = _positive_int(params, "seed", minimum=0)
    verts = RandomSource(seed).generator.standard_normal((n + 1, n))
    if _span_frame(verts - verts.mean(axis=0)).shape[1] < n:
        raise BadParams("degenerate random simplex draw")
    return Polytope(verts)


def _prism(params):
    _require(params, {"sides", "radius", "height"}, {"sides"})
    k = _positive_int(params, "sides", minimum=3)
    r = float(params.get("radius", 1.0))
    h = float(params.get("height", 1.0))
    if r <= 0 or h <= 0:
        raise BadParams("radius and height must be positive")
    angles = 2.0 * math.pi * np.arange(k) / k
    ring = np.column_stack([r * np.cos(angles), r * np.sin(angles)])
    top = np.column_stack([ring, np.full(k, h / 2.0)])
    bottom = np.column_stack([ring, np.full(k, -h / 2.0)])
    return Polytope(np.vstack([top, bottom]))


def _random_hull(params):
    _require(params, {"n", "points", "seed"}, {"n", "points", "seed"})
    n = _positive_int(params, "n")
    k = _positive_int(params, "points", minimum=2)
    seed = _positive_int(params, "seed", minimum=0)
    return Polytope(RandomSource(seed).generator.standard_normal((k, n)))


def _ball(params):
    _require(params, {"n", "radius"}, {"n"})
    n = _positive_int(params, "n")
    r = float(params.get("radius", 1.0))
    return Ball(n, r)


_GENERATORS = {
    "cube": _cube,
    "box": _box,
    "cross-polytope": _cross_polytope,
    "simplex-regular": _simplex_regular,
    "simplex-random": _simplex_random,
    "prism-regular-polygon": _prism,
    "random-hull": _random_hull,
    "ball": _ball,
}


def generate_body(name, params=None):
    """Construct a built-in body; returns a Polytope or the analytic Ball."""
    gen = _GENERATORS.get(name)
    if gen is None:
        raise UnknownBody(f"unknown body {name!r}; choose from {BUILTIN_BODIES}")
    return gen(dict(params or {}))


def read_polytope(path):
    """Read the vertex-file format: first line "dim n", one vertex per line."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ConfigError(f"{path}: empty vertex file")
    head = lines[0].split()
    if len(head) != 2 or head[0] != "dim":
        raise ConfigError(f'{path}: first line must be "dim n", got {lines[0]!r}')
    try:
        n = int(head[1])
    except ValueError:
        raise ConfigError(f"{path}: bad dimension {head[1]!r}") from None
    rows = []
    for i, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != n:
            raise ConfigError(f"{path}:{i}: expected {n} coordinates, got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ConfigError(f"{path}:{i}: non-numeric coordinate") from None
    if not rows:
        raise ConfigError(f"{path}: no vertices")
    return Polytope(np.array(rows))


def write_polytope(path, P):
    """Write a polytope in the vertex-file format (round-trip exact)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim {P.ambient_dim}\n")
        for row in P.vertices:
            fh.write(" ".join(repr(float(x)) for x in row) + "\n")
