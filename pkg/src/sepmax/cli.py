"""Command-line experiment runner with versioned JSON configs.

Subcommands: simulate | theory | verify | sweep | asep. Every run hashes
its effective config and stamps the hash into each artifact, so a CSV or
JSON-lines file can be traced back to the exact inputs; with
--no-timestamp the artifacts are byte-identical across reruns.
Exit codes: 0 success, 2 config error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import datetime
import hashlib
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import acceptance, sep_sim
from .asep_zr import (AsepParams, ZrConfig, evolve_zr, mu_sum_distribution,
                      tagged_displacement)
from .limit_theory import (LimitLaw, ScalingPair, expected_count, limit_law,
                           mean_excess_asymptote, scaled_position,
                           scaling_full, scaling_L, threshold)
from .profiles import full_step, make_profile
from .stats_harness import EmpiricalDist, ks_distance, trend_report
from .walk_kernel import build_kernel
from ._rng import RngStream, DYN_ZR


class ConfigInvalid(ValueError):
    """Config rejected; the message names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


_TOP_KEYS = {"version", "kernel", "profile", "regime", "t", "t_grid",
             "x_grid", "n", "base_seed", "coupling", "out", "eps", "m_max",
             "L", "c", "p", "criteria"}
_DEFAULT_X_GRID = [x / 2.0 for x in range(-4, 13)]


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigInvalid(key, "required key is missing")
    return cfg[key]


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as e:
        raise ConfigInvalid("config", f"cannot read {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigInvalid("config", f"not valid JSON: {e}") from None
    if not isinstance(cfg, dict):
        raise ConfigInvalid("config", "top level must be an object")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise ConfigInvalid(sorted(unknown)[0], "unknown key")
    if cfg.get("version") != 1:
        raise ConfigInvalid("version", "must be 1")
    return cfg


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _build_kernel(cfg: dict):
    spec = _require(cfg, "kernel")
    if not isinstance(spec, dict):
        raise ConfigInvalid("kernel", "must be an object")
    unknown = set(spec) - {"offsets", "theta"}
    if unknown:
        raise ConfigInvalid(f"kernel.{sorted(unknown)[0]}", "unknown key")
    offsets = spec.get("offsets")
    if not offsets:
        raise ConfigInvalid("kernel.offsets", "required key is missing")
    try:
        pairs = [(int(o), float(p)) for o, p in offsets]
    except (TypeError, ValueError):
        raise ConfigInvalid("kernel.offsets",
                            "must be [offset, prob] pairs") from None
    theta = spec.get("theta", 1.0)
    try:
        return build_kernel(pairs, float(theta))
    except ValueError as e:
        raise ConfigInvalid("kernel", str(e)) from None


def _build_profile(cfg: dict):
    spec = cfg.get("profile", {"densities": [1.0]})
    if not isinstance(spec, dict):
        raise ConfigInvalid("profile", "must be an object")
    unknown = set(spec) - {"densities", "l_cut"}
    if unknown:
        raise ConfigInvalid(f"profile.{sorted(unknown)[0]}", "unknown key")
    l_cut = spec.get("l_cut")
    if l_cut is not None:
        l_cut = int(l_cut)
    try:
        dens = spec.get("densities", [1.0])
        if dens == [1.0]:
            return full_step(l_cut=l_cut)
        return make_profile([float(d) for d in dens], l_cut=l_cut)
    except ValueError as e:
        raise ConfigInvalid("profile", str(e)) from None


def _positive_int(cfg: dict, key: str, default=None) -> int:
    v = cfg.get(key, default)
    if v is None:
        raise ConfigInvalid(key, "required key is missing")
    try:
        iv = int(v)
    except (TypeError, ValueError):
        raise ConfigInvalid(key, "must be an integer") from None
    if iv <= 0:
        raise ConfigInvalid(key, "must be positive")
    return iv


def _scaling_for(cfg: dict, t: float) -> ScalingPair:
    regime = cfg.get("regime", "full")
    if regime == "full":
        return scaling_full(t)
    if regime in ("L_fast", "L_slow"):
        L = cfg.get("L")
        if L is None:
            raise ConfigInvalid("L", "required for L regimes")
        if regime == "L_fast":
            return scaling_full(t)
        return scaling_L(t, int(L))
    raise ConfigInvalid("regime", f"unknown regime {regime!r}")


def _law_for(cfg: dict, sigma: float, rho_bar: float) -> LimitLaw:
    regime = cfg.get("regime", "full")
    c = cfg.get("c")
    try:
        return limit_law(regime, sigma, rho_bar,
                         None if c is None else float(c))
    except ValueError as e:
        raise ConfigInvalid("regime", str(e)) from None


def _open_artifact(out_dir: str, name: str, hash_: str, stamp: bool):
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    fh = open(path, "w")
    fh.write(f"# config_hash={hash_}\n")
    if stamp:
        now = datetime.datetime.now(datetime.timezone.utc).isoformat()
        fh.write(f"# generated={now}\n")
    return fh, path


def emit_gumbel_table(samples, scaling: ScalingPair, sigma: float,
                      law: LimitLaw, x_grid=None) -> list:
    """CSV rows comparing the scaled-maximum empirical CDF to its limit.

    One row per x-grid point (x, empirical, limit, gap) and a final KS
    summary row taken over the sample points themselves.
    """
    if not samples:
        raise ValueError("samples must be nonempty")
    xs = np.sort(np.array([scaled_position(s.x_t, scaling, sigma)
                           for s in samples]))
    grid = list(x_grid) if x_grid is not None else _DEFAULT_X_GRID
    rows = ["x,empirical,limit,gap"]
    n = xs.size
    for x in grid:
        emp = float(np.searchsorted(xs, x, side="right")) / n
        lim = law.cdf(float(x))
        rows.append(f"{_fmt(float(x))},{_fmt(emp)},{_fmt(lim)},"
                    f"{_fmt(abs(emp - lim))}")
    ks = ks_distance(EmpiricalDist.from_sample(xs), law.cdf)
    rows.append(f"KS,{_fmt(ks)},,")
    return rows


def _cmd_simulate(cfg: dict, out_dir: str, stamp: bool, workers: int) -> int:
    kern = _build_kernel(cfg)
    prof = _build_profile(cfg)
    t = float(_require(cfg, "t"))
    n = _positive_int(cfg, "n")
    seed = int(cfg.get("base_seed", 0))
    coupling = cfg.get("coupling", "suppressed")
    if coupling not in sep_sim.COUPLINGS:
        raise ConfigInvalid("coupling", f"must be one of {sep_sim.COUPLINGS}")
    m_max = _positive_int(cfg, "m_max", 3)
    eps = cfg.get("eps", {})
    if not isinstance(eps, dict) or set(eps) - {"cut", "pmf"}:
        raise ConfigInvalid("eps", "must be an object with keys cut, pmf")
    sigma = math.sqrt(kern.sigma2)
    sc = _scaling_for(cfg, t)
    law = _law_for(cfg, sigma, prof.rho_bar)
    x_grid = cfg.get("x_grid", _DEFAULT_X_GRID)
    z_list = [threshold(sc, sigma, float(x)) for x in x_grid]
    h = config_hash(cfg)
    samples = sep_sim.run_replicates(
        prof, kern, t, z_list, m_max=m_max, n=n, base_seed=seed,
        coupling=coupling, eps_cut=float(eps.get("cut", 1e-6)))
    fh, _ = _open_artifact(out_dir, "samples.jsonl", h, stamp)
    with fh:
        for s in samples:
            fh.write(json.dumps(s.to_dict(), sort_keys=True) + "\n")
    fh, _ = _open_artifact(out_dir, "gumbel.csv", h, stamp)
    with fh:
        for row in emit_gumbel_table(samples, sc, sigma, law, x_grid):
            fh.write(row + "\n")
    return 0


def _cmd_theory(cfg: dict, out_dir: str, stamp: bool, workers: int) -> int:
    kern = _build_kernel(cfg)
    prof = _build_profile(cfg)
    t_grid = cfg.get("t_grid") or [cfg.get("t")]
    if not t_grid or t_grid[0] is None:
        raise ConfigInvalid("t_grid", "required key is missing")
    x_grid = cfg.get("x_grid", _DEFAULT_X_GRID)
    sigma = math.sqrt(kern.sigma2)
    rho = prof.rho_bar
    law = _law_for(cfg, sigma, rho)
    regime = cfg.get("regime", "full")
    h = config_hash(cfg)
    fh, _ = _open_artifact(out_dir, "theory.csv", h, stamp)
    with fh:
        fh.write("t,x,a_t,b_t,z,expected_count,surrogate,limit,gap\n")
        for t in t_grid:
            t = float(t)
            sc = _scaling_for(cfg, t)
            for x in x_grid:
                x = float(x)
                z = threshold(sc, sigma, x)
                e = expected_count(prof, kern, t, z)
                asym = mean_excess_asymptote(sc, sigma, rho, x, regime,
                                             cfg.get("c"))
                row = [t, x, sc.a_t, sc.b_t, z, e, asym.surrogate,
                       asym.limit, abs(e - asym.limit)]
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    return 0


def _cmd_sweep(cfg: dict, out_dir: str, stamp: bool, workers: int) -> int:
    kern = _build_kernel(cfg)
    prof = _build_profile(cfg)
    t_grid = [float(t) for t in (cfg.get("t_grid") or [])]
    if not t_grid:
        raise ConfigInvalid("t_grid", "required key is missing")
    n = _positive_int(cfg, "n")
    seed = int(cfg.get("base_seed", 0))
    coupling = cfg.get("coupling", "suppressed")
    if coupling not in sep_sim.COUPLINGS:
        raise ConfigInvalid("coupling", f"must be one of {sep_sim.COUPLINGS}")
    sigma = math.sqrt(kern.sigma2)
    _law_for(cfg, sigma, prof.rho_bar)  # validate regime early
    h = config_hash(cfg)
    jobs = [(cfg, kern, prof, t, n, seed + i, coupling, sigma)
            for i, t in enumerate(t_grid)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            legs = list(pool.map(_sweep_leg, jobs))
    else:
        legs = [_sweep_leg(j) for j in jobs]
    fh, _ = _open_artifact(out_dir, "sweep.csv", h, stamp)
    with fh:
        fh.write("t,n,z0,expected_count,pzero_gap,ks_to_limit\n")
        for t, leg in zip(t_grid, legs):
            row = [t, n, leg["z0"], leg["e_cnt"], leg["gap"], leg["ks"]]
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    trends = {
        "pzero_gap": trend_report(
            [(t, leg["gap"]) for t, leg in zip(t_grid, legs)]).to_dict(),
        "ks_to_limit": trend_report(
            [(t, leg["ks"]) for t, leg in zip(t_grid, legs)]).to_dict(),
    } if len(t_grid) >= 2 else {}
    fh, _ = _open_artifact(out_dir, "trends.json", h, stamp)
    with fh:
        fh.write(json.dumps({"config_hash": h, "trends": trends},
                            sort_keys=True, indent=1) + "\n")
    return 0


def _sweep_leg(job):
    cfg, kern, prof, t, n, seed, coupling, sigma = job
    sc = _scaling_for(cfg, t)
    law = _law_for(cfg, sigma, prof.rho_bar)
    z0 = threshold(sc, sigma, 0.0)
    samples = sep_sim.run_replicates(prof, kern, t, [z0], m_max=0, n=n,
                                     base_seed=seed, coupling=coupling,
                                     eps_cut=3e-5)
    n0 = np.array([s.n_t[z0] for s in samples])
    e_cnt = expected_count(prof, kern, t, z0)
    gap = abs(float((n0 == 0).mean()) - math.exp(-e_cnt))
    scaled = [scaled_position(s.x_t, sc, sigma) for s in samples]
    ks = ks_distance(EmpiricalDist.from_sample(scaled), law.cdf)
    return {"z0": z0, "e_cnt": e_cnt, "gap": gap, "ks": ks}


def _cmd_asep(cfg: dict, out_dir: str, stamp: bool, workers: int) -> int:
    try:
        params = AsepParams(float(_require(cfg, "p")))
    except ValueError as e:
        raise ConfigInvalid("p", str(e)) from None
    t_grid = sorted(float(t) for t in (cfg.get("t_grid") or [10, 50, 200]))
    n = _positive_int(cfg, "n")
    seed = int(cfg.get("base_seed", 0))
    eps = 1e-10
    pmf = mu_sum_distribution(params.ratio, eps)
    h = config_hash(cfg)
    fh, _ = _open_artifact(out_dir, "asep.csv", h, stamp)
    sums = {t: np.empty(n, dtype=np.int64) for t in t_grid}
    with fh:
        fh.write("t,replicate,sum\n")
        for rep in range(n):
            stream = RngStream.from_seed(seed, rep, DYN_ZR)
            state = ZrConfig()
            for t in t_grid:
                state = evolve_zr(state, params, t, stream)
                sums[t][rep] = tagged_displacement(state)
        for t in t_grid:
            for rep in range(n):
                fh.write(f"{_fmt(t)},{rep},{sums[t][rep]}\n")
    fh, _ = _open_artifact(out_dir, "mu_pmf.csv", h, stamp)
    with fh:
        fh.write("k,prob,eps\n")
        for k, prob in enumerate(pmf):
            fh.write(f"{k},{_fmt(float(prob))},{_fmt(eps)}\n")
    tvs = [(t, acceptance._tv_to_pmf(sums[t], pmf)) for t in t_grid]
    report = {
        "config_hash": h,
        "tv": [[t, v] for t, v in tvs],
        "mean_final": float(sums[t_grid[-1]].mean()),
    }
    if len(t_grid) >= 2:
        report["tv_trend"] = trend_report(tvs).to_dict()
    fh, _ = _open_artifact(out_dir, "asep_reports.json", h, stamp)
    with fh:
        fh.write(json.dumps(report, sort_keys=True, indent=1) + "\n")
    return 0


def _cmd_verify(cfg: dict, out_dir: str, stamp: bool, workers: int) -> int:
    numbers = cfg.get("criteria") if cfg else None
    if numbers is not None:
        try:
            numbers = [int(i) for i in numbers]
        except (TypeError, ValueError):
            raise ConfigInvalid("criteria",
                                "must be a list of integers") from None
        bad = [i for i in numbers if i not in acceptance.CRITERIA]
        if bad:
            raise ConfigInvalid("criteria", f"unknown criterion {bad[0]}")
    h = config_hash(cfg if cfg else {"criteria": sorted(acceptance.CRITERIA)})
    results = acceptance.run_criteria(numbers)
    manifest = {
        "config_hash": h,
        "criteria": [{"number": i, "name": r.name, "passed": r.passed,
                      "details": r.details} for i, r in results],
        "all_passed": all(r.passed for _, r in results),
    }
    fh, path = _open_artifact(out_dir, "manifest.json", h, stamp)
    with fh:
        fh.write(json.dumps(manifest, sort_keys=True, indent=1,
                            default=float) + "\n")
    for i, r in results:
        print(f"criterion {i:2d} {r.name:<28s} "
              f"{'PASS' if r.passed else 'FAIL'}")
    print(f"manifest: {path}")
    return 0 if manifest["all_passed"] else 3


_COMMANDS = {"simulate": _cmd_simulate, "theory": _cmd_theory,
             "verify": _cmd_verify, "sweep": _cmd_sweep, "asep": _cmd_asep}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="sepmax",
        description="exclusion-process extreme-value experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config path")
        p.add_argument("--seed", type=int, help="override base_seed")
        p.add_argument("--workers", type=int,
                       default=os.cpu_count() or 1,
                       help="parallel legs (replicate order is unaffected)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--no-timestamp", action="store_true",
                       help="omit the generated= header for byte-stable "
                            "artifacts")
    args = parser.parse_args(argv)
    try:
        if args.config:
            cfg = load_config(args.config)
        elif args.command == "verify":
            cfg = {}
        else:
            raise ConfigInvalid("config", "--config is required")
        if args.seed is not None:
            cfg = dict(cfg)
            cfg["base_seed"] = args.seed
        code = _COMMANDS[args.command](cfg, args.out, not args.no_timestamp,
                                       max(1, args.workers))
    except ConfigInvalid as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    return code


if __name__ == "__main__":
    sys.exit(main())
