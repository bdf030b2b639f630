"""Command-line harness: domain -> Whitney cover -> tree -> partitions -> splines -> rates.

Exit codes: 0 all checks pass, 1 an invariant check failed, 2 invalid input.
The number of worker threads for rate runs is read from ``JOHNWIDTHS_THREADS``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from .cubepart import ResolutionError
from .cubetree import TreeError, estimate_john_constant
from .domainpart import domain_overlap, partition_domain, prepare_domain
from .dyadic import DomainSpec, SpecError, rasterize
from .exponents import report
from .measure import HypothesisError, MeasureError, WeightPair, psi_from_phi
from .spline import NormSpec, SampledFunction, approximate, generator_from_json, mixed_norm, rate_experiment
from .treepart import PartitionError
from .whitney import WhitneyError

DEFAULTS = {
    "domain": {"family": "cube", "params": {"dim": 2}},
    "L": 8,
    "p": 2, "q": 2, "r": 1,
    "weights": {},
    "function": {"kind": "sin"},
    "n": 8,
    "n_list": [16, 32, 64, 128, 256, 512, 1024],
    "m": 0,
    "m_list": [0, 1, 2, 3],
    "tree_weight": "side",
    "output": "out",
    "seed": 0,
}


class InvariantError(RuntimeError):
    pass


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, default=_plain)
        fh.write("\n")


def _plain(x):
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


def load_config(args) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS))
    if getattr(args, "config", None):
        with open(args.config) as fh:
            user = json.load(fh)
        if not isinstance(user, dict):
            raise SpecError("config must be a JSON object")
        cfg.update(user)
    for key in ("L", "n", "m", "out"):
        val = getattr(args, key, None)
        if val is not None:
            cfg["output" if key == "out" else key] = val
    np.random.seed(int(cfg["seed"]))
    return cfg


def _domain(cfg):
    spec = DomainSpec.from_json(cfg["domain"])
    return spec, int(cfg["L"])


def _weights(cfg, d):
    return WeightPair.from_json(cfg.get("weights"), cfg["p"], cfg["q"], int(cfg["r"]), d)


def _outdir(cfg) -> Path:
    out = Path(cfg["output"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("JOHNWIDTHS_THREADS", "1")))
    except ValueError:
        return 1


def cmd_decompose(cfg) -> dict:
    spec, L = _domain(cfg)
    from .whitney import whitney_decompose
    mask = rasterize(spec, L)
    cover = whitney_decompose(mask)
    out = _outdir(cfg)
    cover.write_json(out / "cover.json")
    if mask.dim == 2:
        (out / "cover.svg").write_text(cover.to_svg())
    rep = {"domain": spec.to_json(), "L": L, "checks": cover.check()}
    if spec.family == "cusp":
        ladder = {}
        for lev in sorted({max(3, L - 4), max(3, L - 2), L}):
            D = prepare_domain(spec, lev, weight=cfg["tree_weight"])
            ladder[str(lev)] = estimate_john_constant(D.cover, D.ct)
        vals = [ladder[k] for k in sorted(ladder, key=int)]
        rep["a_hat_by_level"] = ladder
        rep["a_hat_decreasing"] = all(b < a for a, b in zip(vals, vals[1:]))
        rep["note"] = "John constant estimate decreases with resolution (outward cusp)"
    _dump(rep, out / "decompose_report.json")
    failed = [k for k in ("non_overlap", "inside_mask", "cover", "distance_lower",
                          "distance_upper", "degree_bound") if not rep["checks"][k]]
    if failed:
        raise InvariantError(f"Whitney checks failed: {failed}")
    return rep


def cmd_tree(cfg) -> dict:
    spec, L = _domain(cfg)
    D = prepare_domain(spec, L, weight=cfg["tree_weight"])
    out = _outdir(cfg)
    D.ct.write_json(out / "tree.json")
    cert = D.certificate
    rep = {"cubes": D.ct.n, "depth": int(D.ct.tree.depth.max()),
           "max_children": D.ct.tree.max_children, "k_star": cert.k_star,
           "l_star": cert.l_star, "witness": list(cert.witness) if cert.witness else None,
           "dropped_cubes": D.ct.dropped_cubes,
           "a_hat": estimate_john_constant(D.cover, D.ct)}
    _dump(rep, out / "tree_report.json")
    return rep


def cmd_partition(cfg) -> dict:
    spec, L = _domain(cfg)
    n = int(cfg["n"])
    if n < 1:
        raise SpecError("n must be at least 1")
    D = prepare_domain(spec, L, weight=cfg["tree_weight"])
    W = _weights(cfg, spec.dim)
    phi = W.phi(D.mask)
    psi = psi_from_phi(D.ct, phi)
    out = _outdir(cfg)
    parts, rep = {}, {"n": n, "ladder": {}, "overlap": {}}
    for m in cfg["m_list"]:
        B = partition_domain(D.ct, phi, n, int(m), psi)
        parts[int(m)] = B
        B.write_json(out / f"partition_m{m}.json")
        if spec.dim == 2:
            (out / f"partition_m{m}.svg").write_text(B.to_svg())
        rep["ladder"][str(m)] = B.check()
    ms = sorted(parts)
    for a, b in zip(ms, ms[1:]):
        if b == a + 1:
            rep["overlap"][f"{a}->{b}"] = domain_overlap(parts[a], parts[b])
            rep["overlap"][f"{b}->{a}"] = domain_overlap(parts[b], parts[a])
    rep["overlap_max"] = max(rep["overlap"].values(), default=None)
    _dump(rep, out / "partition_report.json")
    bad = [m for m, c in rep["ladder"].items()
           if not (c["partition"] and c["budget"] and c["mass_bound"])]
    if bad:
        raise InvariantError(f"partition checks failed for m in {bad}")
    return rep


def _function(cfg, L, d):
    gen = generator_from_json(cfg["function"], d)
    return SampledFunction.from_generator(gen, L, d)


def cmd_approx(cfg) -> dict:
    spec, L = _domain(cfg)
    D = prepare_domain(spec, L, weight=cfg["tree_weight"])
    W = _weights(cfg, spec.dim)
    phi = W.phi(D.mask)
    B = partition_domain(D.ct, phi, int(cfg["n"]), int(cfg["m"]))
    ns = NormSpec(W.p, W.q, W.r, spec.dim, W.g_grid(D.mask), W.v_grid(D.mask))
    f = _function(cfg, L, spec.dim)
    S = approximate(f, B, ns)
    region = D.ct.cover.labels >= 0
    err = mixed_norm(np.where(region, f.values - S.evaluate(), 0.0), B, ns)
    out = _outdir(cfg)
    rep = {"cells": len(B), "error": err, "degree_fallbacks": S.diagnostics,
           "multi_indices": [list(b) for b in S.multi],
           "coefficients": S.coeffs, "centers": S.centers, "scales": S.scales}
    _dump(rep, out / "spline.json")
    return {"cells": len(B), "error": err}


def cmd_rates(cfg) -> dict:
    spec, L = _domain(cfg)
    W = _weights(cfg, spec.dim)
    D = prepare_domain(spec, L, weight=cfg["tree_weight"])
    ns = NormSpec(W.p, W.q, W.r, spec.dim)
    gen = generator_from_json(cfg["function"], spec.dim)
    n_list = [int(n) for n in cfg["n_list"]]
    m = int(cfg["m"])
    R = rate_experiment(gen, D, W, ns, n_list, m, workers=_threads())
    phi = W.phi(D.mask)
    psi = psi_from_phi(D.ct, phi)
    overlaps = []
    for row in R.rows:
        a = partition_domain(D.ct, phi, row["n"], m, psi)
        b = partition_domain(D.ct, phi, row["n"], m + 1, psi)
        overlaps.append(max(domain_overlap(a, b), domain_overlap(b, a)))
    R.manifest["overlap_by_n"] = overlaps
    R.manifest["overlap_max"] = max(overlaps, default=None)
    R.manifest["domain"] = spec.to_json()
    R.manifest["function"] = gen.to_json()
    R.manifest["tree_weight"] = cfg["tree_weight"]
    out = _outdir(cfg)
    R.write_csv(out / "rates.csv")
    R.write_manifest(out / "manifest.json")
    return {"slope": R.slope, "theory_exponent": R.theory_exponent,
            "errors": [r["error"] for r in R.rows]}


def cmd_exponent(args) -> dict:
    return report(args.p, args.q, args.r, args.d).to_json()


COMMANDS = {"decompose": cmd_decompose, "tree": cmd_tree, "partition": cmd_partition,
            "approx": cmd_approx, "rates": cmd_rates}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="johnwidths", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--L", type=int, help="grid level")
        sp.add_argument("--n", type=int, help="target number of cells")
        sp.add_argument("--m", type=int, help="refinement parameter")
    sp = sub.add_parser("exponent")
    for k in ("p", "q"):
        sp.add_argument(f"--{k}", required=True, help="exponent in [1, inf]")
    sp.add_argument("--r", type=int, required=True)
    sp.add_argument("--d", type=int, required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            if args.command == "exponent":
                result = cmd_exponent(args)
            else:
                result = COMMANDS[args.command](load_config(args))
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except InvariantError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 1
    except HypothesisError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except (SpecError, MeasureError, WhitneyError, TreeError, PartitionError,
            ResolutionError, ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(result, sort_keys=True, default=_plain, indent=1))
    return 0


if __name__ == "__main__":
    sys.exit(main())
