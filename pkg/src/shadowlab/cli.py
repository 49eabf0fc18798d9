"""Reproducible experiment runner.

Usage: shadowlab <subcommand> --config cfg.yaml [--seed N] [--workers K] [--out DIR]

Subcommands mirror the library surface (sample, project, estimate-n, bound,
mi, dpi, stratify, full). Configuration is a YAML mapping validated
fail-closed: unknown keys are errors. Every run writes a manifest with the
config echo, master seed, and substream map; re-running the same manifest
reproduces all numeric outputs bitwise on one worker and within 1e-12 for any
worker count (in practice also bitwise, since every Monte-Carlo sample owns a
pre-assigned substream).

JSON floats are written in Python's shortest round-trip decimal form (at most
17 significant digits, exact on re-parse). Divergent or infinite quantities
are emitted as the string flags "DIVERGENT" / "+INF", never as JSON numbers.
"""

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np
import yaml

from . import __version__
from .bodies import BUILTIN_BODIES, generate_body, read_polytope
from .errors import (
    BadParams,
    ConfigError,
    NonConvergence,
    ShadowError,
    UnknownBody,
)
from .estimators import (
    DIVERGENT,
    default_grid_step,
    estimate_conditional_mi,
    estimate_elogn_sweep,
    estimate_n_sweep,
    sample_codim2_shadow,
    theorem1_bound,
    theorem1_first_term,
    validate_dpi,
)
from .geometry import Ball, circumradius, symmetry_group
from .sampling import RandomSource, project_chain, sample_chain, sample_grassmannian
from .strata import analytic_ball_report, stratify, theorem2_lower_bound

# fixed substream slot per pipeline, independent of which subcommands run
SLOTS = {
    "sample": 0,
    "project": 1,
    "estimate-n": 2,
    "bound": 3,
    "mi": 4,
    "dpi": 5,
    "stratify": 6,
}

_SAMPLE_DEFAULTS = {
    "n": 1000, "outer": 20, "inner": 500, "mi": 1000, "dpi": 1000,
    "strata": 2000, "bootstrap": 200,
}
_TOL_DEFAULTS = {"group": 1e-8, "subspace": 1e-8, "chain_check": 1e-9}


class ExperimentConfig:
    """Validated experiment configuration (see the schema in the README)."""

    def __init__(self, raw, base_dir="."):
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping")
        allowed = {"body", "n", "m", "seed", "workers", "out_dir",
                   "epsilon_grid", "delta", "delta_rel", "samples", "tolerances"}
        self._reject_unknown(raw, allowed, "top level")
        if "body" not in raw:
            raise ConfigError("config needs a 'body' section")
        self.body_spec = self._parse_body(raw["body"], base_dir)
        self.body = self._build_body()
        n = self.body.ambient_dim
        if "n" in raw and int(raw["n"]) != n:
            raise ConfigError(f"config n={raw['n']} but body lives in R^{n}")
        self.n = n
        self.m = int(raw.get("m", 2))
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        self.seed = int(raw.get("seed", 0))
        self.workers = int(raw.get("workers", 1))
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        self.out_dir = str(raw.get("out_dir", "results"))
        grid = raw.get("epsilon_grid", [0.5, 0.2, 0.1, 0.05])
        self.epsilon_grid = [float(e) for e in grid]
        if not self.epsilon_grid or any(e <= 0 for e in self.epsilon_grid):
            raise ConfigError("epsilon_grid must be nonempty and positive")
        if any(a <= b for a, b in zip(self.epsilon_grid, self.epsilon_grid[1:])):
            raise ConfigError("epsilon_grid must be strictly decreasing")
        if "delta" in raw and "delta_rel" in raw:
            raise ConfigError("give delta or delta_rel, not both")
        if "delta" in raw:
            self.delta = float(raw["delta"])
            if self.delta <= 0:
                raise ConfigError("delta must be positive")
        elif "delta_rel" in raw:
            rel = float(raw["delta_rel"])
            if rel <= 0:
                raise ConfigError("delta_rel must be positive")
            self.delta = rel * circumradius(self.body)
        else:
            self.delta = default_grid_step(self.body)
        samples = dict(_SAMPLE_DEFAULTS)
        user_samples = raw.get("samples", {})
        if not isinstance(user_samples, dict):
            raise ConfigError("'samples' must be a mapping")
        self._reject_unknown(user_samples, set(_SAMPLE_DEFAULTS), "samples")
        samples.update({k: int(v) for k, v in user_samples.items()})
        if any(v < 1 for v in samples.values()):
            raise ConfigError("all sample counts must be >= 1")
        self.samples = samples
        tols = dict(_TOL_DEFAULTS)
        user_tols = raw.get("tolerances", {})
        if not isinstance(user_tols, dict):
            raise ConfigError("'tolerances' must be a mapping")
        self._reject_unknown(user_tols, set(_TOL_DEFAULTS), "tolerances")
        tols.update({k: float(v) for k, v in user_tols.items()})
        if any(v <= 0 for v in tols.values()):
            raise ConfigError("tolerances must be positive")
        self.tolerances = tols
        self.echo = raw

    @staticmethod
    def _reject_unknown(mapping, allowed, where):
        unknown = set(mapping) - allowed
        if unknown:
            raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")

    def _parse_body(self, spec, base_dir):
        if not isinstance(spec, dict):
            raise ConfigError("'body' must be a mapping")
        self._reject_unknown(spec, {"name", "params", "file"}, "body")
        if "file" in spec:
            if "name" in spec or "params" in spec:
                raise ConfigError("body: give either file or name/params")
            path = spec["file"]
            if not os.path.isabs(path):
                path = os.path.join(base_dir, path)
            if not os.path.exists(path):
                raise ConfigError(f"body file not found: {path}")
            return {"file": path}
        if "name" not in spec:
            raise ConfigError("body needs 'name' or 'file'")
        if spec["name"] not in BUILTIN_BODIES:
            raise UnknownBody(f"unknown body {spec['name']!r}")
        return {"name": spec["name"], "params": dict(spec.get("params", {}))}

    def _build_body(self):
        if "file" in self.body_spec:
            return read_polytope(self.body_spec["file"])
        return generate_body(self.body_spec["name"], self.body_spec["params"])

    @property
    def body_id(self):
        if "file" in self.body_spec:
            return f"file:{self.body_spec['file']}"
        params = ",".join(f"{k}={v}" for k, v in sorted(self.body_spec["params"].items()))
        return f"{self.body_spec['name']}({params})"


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------


def _plain(value):
    """Recursively convert to JSON-safe plain Python (flags for non-finite)."""
    if value is DIVERGENT:
        return "DIVERGENT"
    if isinstance(value, float):
        if math.isinf(value):
            return "+INF" if value > 0 else "-INF"
        if math.isnan(value):
            return "NAN"
        return value
    if isinstance(value, (np.floating,)):
        return _plain(float(value))
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, dict):
        return {_key(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _key(k):
    if isinstance(k, tuple):
        return ",".join(str(x) for x in k)
    return str(k)


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_plain(obj), fh, indent=2, allow_nan=False)
        fh.write("\n")


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


# ---------------------------------------------------------------------------
# pipelines
# ---------------------------------------------------------------------------


def _slot_rng(cfg, name):
    return RandomSource(cfg.seed, (SLOTS[name],))


def _require_polytope(cfg, what):
    if isinstance(cfg.body, Ball):
        raise ConfigError(f"{what} needs a vertex body, not the analytic ball")


def _common_fields(cfg, quantity):
    return {
        "quantity": quantity,
        "body_id": cfg.body_id,
        "seed": cfg.seed,
        "n": cfg.n,
    }


def _check_chain_length(cfg):
    if cfg.m > cfg.n - 1:
        raise ConfigError(f"chain length m={cfg.m} exceeds n - 1 = {cfg.n - 1}")
    return cfg.m


def _run_sample(cfg, out_dir):
    rng = _slot_rng(cfg, "sample")
    n, m = cfg.n, _check_chain_length(cfg)
    chain = sample_chain(rng.child(0), n, m)
    plane = sample_grassmannian(rng.child(1), n, 2)
    rec = _common_fields(cfg, "sampled_chain_and_plane")
    rec.update({
        "m": m,
        "chain_directions": chain.directions,
        "grassmannian_plane_basis": plane.basis,
    })
    path = os.path.join(out_dir, "sample.json")
    _write_json(path, rec)
    return {"sample": path}


def _run_project(cfg, out_dir):
    _require_polytope(cfg, "project")
    rng = _slot_rng(cfg, "project")
    n, m = cfg.n, _check_chain_length(cfg)
    chain = sample_chain(rng.child(0), n, m)
    bodies = project_chain(cfg.body, chain,
                           check_tol=cfg.tolerances["chain_check"])
    rec = _common_fields(cfg, "projection_chain")
    rec.update({
        "m": m,
        "chain_directions": chain.directions,
        "stages": [
            {
                "stage": i + 1,
                "subspace_dim": b.subspace.dim,
                "subspace_basis": b.subspace.basis,
                "vertices": b.body.vertices,
            }
            for i, b in enumerate(bodies)
        ],
    })
    path = os.path.join(out_dir, "projections.json")
    _write_json(path, rec)
    return {"project": path}


def _run_estimate_n(cfg, out_dir):
    rng = _slot_rng(cfg, "estimate-n")
    body = cfg.body
    ref = None
    if not isinstance(body, Ball):
        ref = sample_codim2_shadow(body, rng.child(0))
    sweep = estimate_n_sweep(body, ref, cfg.epsilon_grid,
                             cfg.samples["n"], rng.child(1), cfg.workers)
    rec = _common_fields(cfg, "ambiguity_fraction_sweep")
    if ref is not None:
        rec["reference_shadow"] = {
            "subspace_basis": ref.subspace.basis,
            "vertices": ref.body.vertices,
        }
    rec.update({
        "n_samples": cfg.samples["n"],
        "entries": [
            {
                "epsilon": e.epsilon,
                "hits": e.hits,
                "fraction": e.fraction,
                "wilson_ci": list(e.wilson_ci),
            }
            for e in sweep
        ],
    })
    jpath = os.path.join(out_dir, "estimate_n.json")
    _write_json(jpath, rec)
    cpath = os.path.join(out_dir, "estimate_n.csv")
    _write_csv(cpath,
               ["epsilon", "hits", "n_samples", "fraction", "wilson_lo", "wilson_hi"],
               [[e.epsilon, e.hits, e.n_samples, e.fraction,
                 e.wilson_ci[0], e.wilson_ci[1]] for e in sweep])
    return {"estimate_n": jpath, "estimate_n_csv": cpath}


def _run_bound(cfg, out_dir):
    rng = _slot_rng(cfg, "bound")
    body = cfg.body
    sweep = estimate_elogn_sweep(body, cfg.epsilon_grid, cfg.samples["outer"],
                                 cfg.samples["inner"], rng.child(0), cfg.workers)
    mi = estimate_conditional_mi(body, 2, cfg.samples["mi"], cfg.delta,
                                 rng.child(1), cfg.workers)
    first = theorem1_first_term(cfg.n)
    flags = [] if isinstance(body, Ball) else ["FINITE_GROUP_DEGENERATE"]
    rec = _common_fields(cfg, "theorem1_bound")
    rec.update({
        "first_term": first,
        "mi_plugin": mi.value,
        "delta": cfg.delta,
        "n_samples": {"outer": cfg.samples["outer"],
                      "inner": cfg.samples["inner"],
                      "mi": cfg.samples["mi"]},
        "flags": flags,
        "entries": [
            {
                "epsilon": s.epsilon,
                "e_log_n": s.value,
                "ci": list(s.ci) if s.ci is not None else None,
                "bound": theorem1_bound(cfg.n, s.value),
            }
            for s in sweep
        ],
    })
    jpath = os.path.join(out_dir, "bound.json")
    _write_json(jpath, rec)
    cpath = os.path.join(out_dir, "bound.csv")
    rows = []
    for s in sweep:
        val = "DIVERGENT" if s.value is DIVERGENT else s.value
        bnd = theorem1_bound(cfg.n, s.value)
        rows.append([s.epsilon, val, "+INF" if math.isinf(bnd) else bnd])
    _write_csv(cpath, ["epsilon", "e_log_n", "bound"], rows)
    return {"bound": jpath, "bound_csv": cpath}


def _run_mi(cfg, out_dir):
    rng = _slot_rng(cfg, "mi")
    m = cfg.m
    if not isinstance(cfg.body, Ball) and not 2 <= m <= cfg.n - 1:
        raise ConfigError(f"mi needs 2 <= m <= n-1, got m={m}, n={cfg.n}")
    est = estimate_conditional_mi(cfg.body, m, cfg.samples["mi"], cfg.delta,
                                  rng, cfg.workers)
    rec = _common_fields(cfg, "conditional_mi_plugin")
    rec.update({
        "m": m,
        "delta": cfg.delta,
        "n_samples": est.n_samples,
        "value": est.value,
        "unit": "nats",
        "num_classes": {k: len(v) for k, v in est.class_counts.items()},
        "class_counts": est.class_counts,
    })
    path = os.path.join(out_dir, "mi.json")
    _write_json(path, rec)
    return {"mi": path}


def _run_dpi(cfg, out_dir):
    rng = _slot_rng(cfg, "dpi")
    m = cfg.m
    if not isinstance(cfg.body, Ball):
        if m < 3:
            raise ConfigError(f"dpi needs m >= 3, got m={m}")
        if m > cfg.n - 1:
            raise ConfigError(f"dpi needs m <= n-1, got m={m}, n={cfg.n}")
    rep = validate_dpi(cfg.body, m, cfg.samples["dpi"], cfg.delta, rng,
                       cfg.samples["bootstrap"], cfg.workers)
    rec = _common_fields(cfg, "data_processing_inequality")
    rec.update({
        "m": m,
        "delta": cfg.delta,
        "n_samples": cfg.samples["dpi"],
        "mi_first_second": rep.mi_first_second.value,
        "mi_first_last": rep.mi_first_last.value,
        "difference": rep.difference,
        "bootstrap_stderr": rep.bootstrap_stderr,
        "n_bootstrap": rep.n_bootstrap,
        "result": "PASS" if rep.passed else "FAIL",
    })
    path = os.path.join(out_dir, "dpi.json")
    _write_json(path, rec)
    cpath = os.path.join(out_dir, "dpi.csv")
    _write_csv(cpath,
               ["m", "mi_first_second", "mi_first_last", "difference",
                "bootstrap_stderr", "result"],
               [[m, rep.mi_first_second.value, rep.mi_first_last.value,
                 rep.difference, rep.bootstrap_stderr,
                 "PASS" if rep.passed else "FAIL"]])
    return {"dpi": path, "dpi_csv": cpath}


def _run_stratify(cfg, out_dir):
    rng = _slot_rng(cfg, "stratify")
    if isinstance(cfg.body, Ball):
        rep = analytic_ball_report(cfg.n)
        lower = theorem2_lower_bound(rep, mode="analytic-ball")
    else:
        group = symmetry_group(cfg.body, cfg.tolerances["group"])
        rep = stratify(group, cfg.n, cfg.samples["strata"], rng,
                       cfg.tolerances["subspace"], cfg.workers)
        lower = theorem2_lower_bound(rep, mode="counting")
    rec = _common_fields(cfg, "theorem2_stratification")
    rec.update({
        "mode": rep.mode,
        "group_order": rep.group_order,
        "n_samples": rep.n_samples,
        "lower_bound": lower,
        "flags": list(rep.flags),
        "strata": [
            {
                "class_order": s.class_rep.order,
                "v": s.v,
                "mu_hat": s.mu_hat,
                "count": s.count,
            }
            for s in rep.strata
        ],
    })
    jpath = os.path.join(out_dir, "strata.json")
    _write_json(jpath, rec)
    cpath = os.path.join(out_dir, "strata.csv")
    _write_csv(cpath, ["class_order", "v", "mu_hat", "count"],
               [[s.class_rep.order, s.v, s.mu_hat, s.count] for s in rep.strata])
    return {"stratify": jpath, "stratify_csv": cpath}


_PIPELINES = {
    "sample": _run_sample,
    "project": _run_project,
    "estimate-n": _run_estimate_n,
    "bound": _run_bound,
    "mi": _run_mi,
    "dpi": _run_dpi,
    "stratify": _run_stratify,
}


def _full_silent_skips(cfg):
    # parts of "full" that do not apply to the configured body/m
    skips = set()
    if isinstance(cfg.body, Ball):
        skips.add("project")
    else:
        if cfg.m < 3 or cfg.m > cfg.n - 1:
            skips.add("dpi")
        if not 2 <= cfg.m <= cfg.n - 1:
            skips.add("mi")
    return skips


# pipelines built on codimension-2 planes need an ambient dimension >= 3
_NEEDS_N3 = {"estimate-n", "bound", "mi", "dpi", "stratify"}


def run(cfg, subcommand, out_dir=None):
    """Execute a pipeline; returns the manifest dict (also written to disk)."""
    out_dir = out_dir or cfg.out_dir
    if subcommand in _NEEDS_N3 and cfg.n < 3:
        raise ConfigError(f"{subcommand} needs a body in R^n with n >= 3, got n={cfg.n}")
    os.makedirs(out_dir, exist_ok=True)
    started = time.time()
    outputs = {}
    if subcommand == "full":
        skips = _full_silent_skips(cfg)
        parts = [p for p in ("estimate-n", "bound", "mi", "dpi", "stratify")
                 if p not in skips]
    else:
        parts = [subcommand]
    if cfg.n < 3:
        parts = [p for p in parts if p not in _NEEDS_N3]
        if not parts:
            raise ConfigError(f"no applicable pipelines for n={cfg.n}")
    for part in parts:
        outputs.update(_PIPELINES[part](cfg, out_dir))
    manifest = {
        "library_version": __version__,
        "subcommand": subcommand,
        "config": cfg.echo,
        "body_id": cfg.body_id,
        "master_seed": cfg.seed,
        "workers": cfg.workers,
        "substream_map": {name: [SLOTS[name]] for name in SLOTS},
        "outputs": outputs,
        "wall_clock_seconds": time.time() - started,
    }
    _write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def load_config(path, seed=None, workers=None, out_dir=None):
    """Load and validate a YAML config file, applying CLI overrides."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if raw is None:
        raw = {}
    if seed is not None:
        raw["seed"] = seed
    if workers is not None:
        raw["workers"] = workers
    if out_dir is not None:
        raw["out_dir"] = out_dir
    return ExperimentConfig(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="shadowlab",
        description="Random orthogonal projection chains of convex bodies.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in list(_PIPELINES) + ["full"]:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML experiment config")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--workers", type=int, default=None,
                       help="worker count override (or env SHADOWLAB_WORKERS)")
        p.add_argument("--out", default=None, help="output directory override")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    workers = args.workers
    if workers is None and os.environ.get("SHADOWLAB_WORKERS"):
        try:
            workers = int(os.environ["SHADOWLAB_WORKERS"])
        except ValueError:
            _emit_error(ConfigError("SHADOWLAB_WORKERS must be an integer"))
            return 2
    try:
        cfg = load_config(args.config, seed=args.seed, workers=workers,
                          out_dir=args.out)
        run(cfg, args.subcommand)
    except (ConfigError, UnknownBody, BadParams) as exc:
        _emit_error(exc)
        return 2
    except NonConvergence as exc:
        _emit_error(exc)
        return 3
    except OSError as exc:
        _emit_error(exc)
        return 4
    except ShadowError as exc:
        _emit_error(exc)
        return 1
    return 0


def _emit_error(exc):
    sys.stderr.write(json.dumps(
        {"error": type(exc).__name__, "message": str(exc)}) + "\n")


if __name__ == "__main__":
    sys.exit(main())
