"""Command-line driver: one subcommand per experiment.

Every run reads a JSON config, validates it, writes its artifacts (CSV data,
JSON reports) into ``--out`` together with ``manifest.json`` holding the
seed, the SHA-256 of the canonical config and the package version.  The exit
status is 0 only when every check of the run passed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .errors import ConfigError, PolyaError

# --- schemas ---------------------------------------------------------------------

_PI = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["deterministic", "finite", "geometric", "powerlaw"]},
        "k": {"type": "integer", "minimum": 0},
        "probs": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "array", "prefixItems": [{"type": "integer", "minimum": 0}, {"type": "number", "minimum": 0}], "minItems": 2, "maxItems": 2},
        },
        "p": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "support_start": {"enum": [0, 1]},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "beta": {"type": "number", "exclusiveMinimum": 0},
        "w": {"type": "integer", "minimum": 1},
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "deterministic"}}}, "then": {"required": ["k"]}},
        {"if": {"properties": {"kind": {"const": "finite"}}}, "then": {"required": ["probs"]}},
        {"if": {"properties": {"kind": {"const": "geometric"}}}, "then": {"required": ["p"]}},
        {"if": {"properties": {"kind": {"const": "powerlaw"}}}, "then": {"required": ["alpha", "beta", "w"]}},
    ],
}

_COEFFS = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["polynomial", "geometric"]},
        "a": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
        "alpha": {"type": "number", "exclusiveMinimum": 0},
        "beta": {"type": "number", "exclusiveMinimum": 0},
    },
    "allOf": [
        {"if": {"properties": {"kind": {"const": "polynomial"}}}, "then": {"required": ["a"]}},
        {"if": {"properties": {"kind": {"const": "geometric"}}}, "then": {"required": ["alpha", "beta"]}},
    ],
}

_POS = {"type": "integer", "minimum": 1}
_NONNEG = {"type": "integer", "minimum": 0}
_URN = {"b": _POS, "w": _POS, "pi": _PI, "n": _NONNEG}


def _obj(required, **props):
    return {"type": "object", "required": list(required), "properties": props, "additionalProperties": False}


SCHEMAS = {
    "simulate": _obj(["b", "w", "pi", "n", "paths"], **_URN, paths=_POS, first_stream=_NONNEG),
    "oracle": _obj(["b", "w", "pi", "n"], **_URN),
    "moments": _obj(
        ["b", "w", "pi", "n", "paths", "k_max"], **_URN, paths=_POS, k_max=_POS, bootstrap={"type": "boolean"}
    ),
    "ul": _obj(
        ["v", "coefficients"],
        v={"type": "number", "exclusiveMinimum": 0},
        coefficients=_COEFFS,
        k_max=_POS,
        tolerance={"type": "number", "exclusiveMinimum": 0},
        density_grid={"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
        sample_size=_POS,
    ),
    "fixedpoint": _obj(
        ["v", "coefficients", "size"],
        v={"type": "number", "exclusiveMinimum": 0},
        coefficients=_COEFFS,
        size=_POS,
        repetitions=_POS,
        min_pass=_NONNEG,
        level={"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
    ),
    "theorem2": _obj(
        ["b", "w", "pi", "n", "paths", "moment_paths"],
        **_URN,
        paths=_POS,
        moment_paths=_POS,
        moment_n=_POS,
        threshold={"type": "number", "exclusiveMinimum": 0},
        tail={"type": "number", "exclusiveMinimum": 0},
    ),
    "bernoulli": _obj(
        ["grid"],
        grid={"type": "array", "minItems": 1, "items": {"type": "array", "items": {"type": "number"}, "minItems": 3, "maxItems": 3}},
        scan_w=_POS,
        scan_points={"type": "integer", "minimum": 2},
    ),
    "powerlaw": _obj(
        ["alpha", "beta", "w"],
        alpha={"type": "number", "exclusiveMinimum": 0},
        beta={"type": "number", "exclusiveMinimum": 0},
        w=_POS,
        terms=_POS,
        exploratory=_obj(["n", "paths"], n=_POS, paths=_POS),
    ),
    "pa": _obj(
        ["degrees", "pi", "k", "n"],
        degrees={"type": "array", "minItems": 1, "items": _POS},
        pi=_PI,
        k=_POS,
        n=_NONNEG,
        mode={"enum": ["exact", "mc"]},
        paths=_POS,
        snapshot_steps={"type": "array", "items": _POS},
    ),
    "props": _obj(
        [],
        m_max=_POS,
        mills_fraction={"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        points=_POS,
    ),
}


def load_config(path, subcommand: str) -> tuple[dict, str]:
    """Parse and validate a config; returns it with the hash of its canonical form."""
    import jsonschema

    try:
        text = Path(path).read_text()
        config = json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(config, SCHEMAS[subcommand])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid {subcommand} config: {exc.message}") from exc
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return config, hashlib.sha256(canonical.encode()).hexdigest()


# --- output helpers -------------------------------------------------------------------


def _fmt(x):
    if isinstance(x, float):
        return format(x, ".17g")
    return x


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(x) for x in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _write_json(path: Path, data) -> None:
    # json writes floats with their shortest round-trip repr, which is lossless
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")


def _coefficients(cfg):
    from .ul_family import Geometric, Polynomial

    if cfg["kind"] == "geometric":
        return Geometric(cfg["alpha"], cfg["beta"])
    return Polynomial(tuple(cfg["a"]))


def _spec(cfg):
    from .ul_family import ULSpec

    return ULSpec(cfg["v"], _coefficients(cfg["coefficients"]))


def _pi(cfg):
    from .interarrival import make_interarrival

    return make_interarrival(cfg)


def _urn_config(cfg):
    from .urn_engine import UrnConfig

    return UrnConfig(cfg["b"], cfg["w"], _pi(cfg["pi"]), cfg["n"])


# --- subcommands ------------------------------------------------------------------------


def cmd_simulate(cfg, seed, out):
    from .urn_engine import simulate_batch

    batch = simulate_batch(_urn_config(cfg), cfg["paths"], seed, cfg.get("first_stream", 0))
    batch.to_csv(out / "urn.csv")
    return True, ["urn.csv"]


def cmd_oracle(cfg, seed, out):
    from .urn_engine import exact_pmf

    pmf = exact_pmf(_urn_config(cfg)).as_float()
    _write_json(out / "pmf.json", {str(k): v for k, v in pmf.items()})
    return abs(math.fsum(pmf.values()) - 1.0) < 1e-12, ["pmf.json"]


def cmd_moments(cfg, seed, out):
    from .conditional_moments import estimate_limit_moments, write_estimates_csv

    pi = _pi(cfg["pi"])
    est = estimate_limit_moments(cfg["k_max"], cfg["b"], cfg["w"], pi, cfg["n"], cfg["paths"], seed, cfg.get("bootstrap", False))
    write_estimates_csv(out / "moments.csv", est)
    return all(e.m_k > 0 for e in est), ["moments.csv"]


def cmd_ul(cfg, seed, out):
    from .ul_family import moment_recursion_residual, psi_from_ul

    spec = _spec(cfg)
    tol = cfg.get("tolerance", 1e-6)
    k_max = cfg.get("k_max", 6)
    residuals = [moment_recursion_residual(spec, k) for k in range(0, k_max + 1)]
    psi = psi_from_ul(spec)
    report = {
        "v": spec.v,
        "c": spec.c,
        "normalization_error": spec.total_mass() - 1.0,
        "moments": {k: spec.moment(k) for k in range(1, k_max + 1)},
        "recursion_residuals": {r.k: r.corrected for r in residuals},
        "psi_total": psi.total(),
        "tolerance": tol,
    }
    ok = abs(report["normalization_error"]) < 1e-8 and all(abs(r.corrected) <= tol for r in residuals)
    ok = ok and abs(psi.total() - 1.0) < 1e-8
    report["passed"] = ok
    artifacts = ["ul.json"]
    _write_json(out / "ul.json", report)
    if "density_grid" in cfg:
        grid = [x for x in cfg["density_grid"] if x < spec.rho]
        _write_csv(out / "density.csv", ["x", "density", "cdf"], [(x, float(spec.density(x)), float(spec.cdf(x))) for x in grid])
        artifacts.append("density.csv")
    if "sample_size" in cfg:
        batch = spec.sample(cfg["sample_size"], seed)
        _write_csv(out / "samples.csv", ["index", "value"], enumerate(batch.values.tolist()))
        artifacts.append("samples.csv")
    return ok, artifacts


def cmd_fixedpoint(cfg, seed, out):
    from .bias_transforms import ul_fixed_point_residual
    from .stat_harness import ks_critical

    spec = _spec(cfg)
    reps = cfg.get("repetitions", 1)
    level = cfg.get("level", 0.01)
    need = cfg.get("min_pass", math.ceil(0.95 * reps))
    rows, passes = [], 0
    for r in range(reps):
        rep = ul_fixed_point_residual(spec, cfg["size"], seed, stream=r)
        crit = ks_critical(rep.n1, rep.n2, level)
        passes += rep.ks < crit
        rows.append((r, rep.ks, rep.p_value, crit))
    _write_csv(out / "fixedpoint.csv", ["repetition", "ks", "p_value", "critical"], rows)
    last = json.loads(rep.to_json())
    _write_json(out / "fixedpoint.json", {"passes": passes, "repetitions": reps, "min_pass": need, "last": last})
    return passes >= need, ["fixedpoint.csv", "fixedpoint.json"]


def cmd_theorem2(cfg, seed, out):
    from .experiments import mixed_limit_end_to_end

    res = mixed_limit_end_to_end(
        cfg["b"], cfg["w"], _pi(cfg["pi"]), cfg["n"], cfg["paths"], cfg["moment_paths"], seed,
        cfg.get("threshold", 0.03), cfg.get("moment_n"), cfg.get("tail", 1e-6),
    )
    _write_json(out / "mixed_limit.json", res.summary())
    _write_csv(out / "samples.csv", ["index", "urn_scaled", "limit"], zip(range(res.paths), res.urn_values.tolist(), res.limit_values.tolist()))
    return res.passed, ["mixed_limit.json", "samples.csv"]


def cmd_bernoulli(cfg, seed, out):
    import numpy as np

    from .reference_laws import bernoulli_moments, bernoulli_pi_from_a
    from .special_functions import kummer_u

    rows, ok = [], True
    for w, a1, a2 in cfg["grid"]:
        ez, ez2 = bernoulli_moments(int(w), a1, a2)
        pi0, pi1 = bernoulli_pi_from_a(int(w), a1, a2)
        z = w * a1 * a1 / (2 * a2)
        # U(a, b, z) = z^(1-b) U(1+a-b, 2-b, z) at a = w/2, b = 1/2
        lhs = kummer_u(w / 2, 0.5, z)
        rhs = z**0.5 * kummer_u(w / 2 + 0.5, 1.5, z)
        identity = abs(lhs - rhs) / abs(lhs)
        total = a1 * ez + a2 * ez2
        ok &= abs(total - 1.0) < 1e-8 and identity < 1e-8
        rows.append((int(w), a1, a2, ez, ez2, pi0, pi1, total, identity))
    _write_csv(out / "bernoulli.csv", ["w", "a1", "a2", "EZ", "EZ2", "pi0", "pi1", "a1EZ_plus_a2EZ2", "kummer_identity_rel"], rows)
    scan_w = cfg.get("scan_w", 2)
    ratios = np.geomspace(1e-3, 1e3, cfg.get("scan_points", 61))
    scan = [(r, bernoulli_pi_from_a(scan_w, math.sqrt(r), 1.0)[0]) for r in ratios]
    monotone = all(b[1] > a[1] for a, b in zip(scan, scan[1:]))
    _write_csv(out / "scan.csv", ["a1_sq_over_a2", "pi0"], scan)
    _write_json(out / "bernoulli.json", {"grid_passed": bool(ok), "scan_monotone": monotone})
    return bool(ok) and monotone, ["bernoulli.csv", "scan.csv", "bernoulli.json"]


def cmd_powerlaw(cfg, seed, out):
    from .reference_laws import powerlaw_reference, powerlaw_urn_experiment

    ref = powerlaw_reference(cfg["alpha"], cfg["beta"], cfg["w"])
    total = ref.pi.normalization_check(cfg.get("terms", 1000))
    mu = ref.mu
    report = {
        "pmf_total": total,
        "mu": mu if isinstance(mu, float) else str(mu.name),
        "moments": {j: ref.moment(j) for j in range(1, 5)},
        "beta_law": {"a": ref.w, "b": ref.w * ref.beta + 1, "scale": ref.alpha},
    }
    ok = abs(total - 1.0) < 1e-10
    _write_csv(out / "pmf.csv", ["j", "pmf"], [(j, float(ref.pmf(j))) for j in range(50)])
    if "exploratory" in cfg:
        ex = powerlaw_urn_experiment(cfg["alpha"], cfg["beta"], cfg["w"], cfg["exploratory"]["n"], cfg["exploratory"]["paths"], seed)
        # reported only; never gates the exit status
        report["EXPLORATORY"] = {"n": ex.n, "paths": ex.paths, "theta": ex.theta, "ks": ex.ks, "p_value": ex.p_value}
    report["passed"] = ok
    _write_json(out / "powerlaw.json", report)
    return ok, ["powerlaw.json", "pmf.csv"]


def cmd_pa(cfg, seed, out):
    from .pref_attach import SeedGraph, correspondence_check, simulate_pa

    graph = SeedGraph(tuple(cfg["degrees"]))
    pi = _pi(cfg["pi"])
    mode = cfg.get("mode", "exact")
    rep = correspondence_check(graph, pi, cfg["k"], cfg["n"], cfg.get("paths", 0), seed, mode)
    report = {"mode": rep.mode, "k": rep.k, "n": rep.n, "passed": rep.passed}
    if rep.mode == "exact":
        report["max_abs_diff"] = rep.max_abs_diff
        report["pa_pmf"] = {k: float(v) for k, v in rep.pa_pmf.items()}
        report["urn_pmf"] = {k: float(v) for k, v in rep.urn_pmf.items()}
    else:
        report.update(ks=rep.ks.statistic, p_value=rep.ks.p_value, critical=rep.critical)
    _write_json(out / "pa.json", report)
    artifacts = ["pa.json"]
    steps = cfg.get("snapshot_steps", [])
    if steps and cfg["n"] > 0:
        state = simulate_pa(graph, pi, cfg["n"], seed, checkpoints=[s for s in steps if s <= cfg["n"]])
        for step in sorted(state.snapshots):
            name = f"degrees_{step}.csv"
            state.to_csv(out / name, step)
            artifacts.append(name)
    return rep.passed, artifacts


def cmd_props(cfg, seed, out):
    from .reference_laws import non_closure_checks
    from .ul_family import mills_check, moment_upper_bound, suite_specs

    m_max = cfg.get("m_max", 8)
    frac = cfg.get("mills_fraction", 0.5)
    rows, ok = [], True
    for name, spec in suite_specs().items():
        for m in range(1, m_max + 1):
            mu, bound = spec.moment(m), moment_upper_bound(spec, m)
            ok &= mu <= bound * (1 + 1e-10)
            rows.append((name, m, mu, bound))
    _write_csv(out / "moment_bounds.csv", ["spec", "m", "moment", "bound"], rows)
    mills = {}
    for name, spec in suite_specs().items():
        scale = spec.rho if math.isfinite(spec.rho) else spec.moment(1)
        rep = mills_check(spec, frac * scale, points=cfg.get("points", 100))
        mills[name] = {"alpha": rep.alpha, "applicable": rep.applicable, "max_ratio": rep.max_ratio, "holds": rep.holds}
        ok &= rep.holds or not rep.applicable
    nc = non_closure_checks()
    # the logarithmic divergence is asserted through E1(x) + log x + gamma -> 0
    gaps_ok = all(abs(g) <= 2 * x for g, x in zip(nc.euler_gap, nc.log_points))
    ok &= gaps_ok and nc.erfc_matches and nc.erfc_negative
    report = {
        "moment_bounds_hold": all(r[2] <= r[3] * (1 + 1e-10) for r in rows),
        "mills": mills,
        "log_divergence": {
            "x": nc.log_points,
            "density": nc.density,
            "ratio_to_minus_log": nc.log_ratio,
            "ratio_within_5pct": nc.log_ratio_within_5pct,
            "euler_gap": nc.euler_gap,
            "euler_gap_ok": gaps_ok,
        },
        "erfc": {"fourth": nc.erfc_fourth, "exact": nc.erfc_exact, "matches": nc.erfc_matches, "negative": nc.erfc_negative},
        "passed": bool(ok),
    }
    _write_json(out / "props.json", report)
    return bool(ok), ["moment_bounds.csv", "props.json"]


COMMANDS = {
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
    "moments": cmd_moments,
    "ul": cmd_ul,
    "fixedpoint": cmd_fixedpoint,
    "theorem2": cmd_theorem2,
    "bernoulli": cmd_bernoulli,
    "powerlaw": cmd_powerlaw,
    "pa": cmd_pa,
    "props": cmd_props,
}

HELP = {
    "simulate": "simulate urn paths and write X_n per path",
    "oracle": "exact pmf of X_n for small configurations",
    "moments": "Monte Carlo estimates of the limit moments",
    "ul": "normalization, moments and recursion residuals of a UL law",
    "fixedpoint": "KS comparison of Z with V Z^(psi)",
    "theorem2": "scaled urn against the predicted Beta-mixed UL limit",
    "bernoulli": "Kummer-U formulas for gaps on {0, 1}",
    "powerlaw": "power-law gap law and its Beta reference",
    "pa": "preferential attachment versus urn correspondence",
    "props": "moment bounds, tail bounds and non-closure examples",
}


def _threads(requested: int | None) -> int:
    if requested is None:
        env = os.environ.get("POLYA_THREADS")
        if env:
            try:
                requested = int(env)
            except ValueError:
                raise ConfigError(f"POLYA_THREADS must be an integer, got {env!r}") from None
    if requested is None:
        return 0
    if requested < 1:
        raise ConfigError("thread count must be positive")
    return requested


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polya-imm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=0, help="unsigned 64-bit seed")
        p.add_argument("--threads", type=int, default=None, help="worker threads (default: POLYA_THREADS or all)")
        p.add_argument("--out", default=".", help="output directory")
    return parser


def run(command: str, config_path, seed: int, threads: int | None, out_dir) -> int:
    """Run one subcommand; returns the process exit code."""
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    cfg, digest = load_config(config_path, command)
    nthreads = _threads(threads)
    import numba

    if nthreads:
        numba.set_num_threads(min(nthreads, numba.config.NUMBA_NUM_THREADS))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    passed, artifacts = COMMANDS[command](cfg, seed, out)
    manifest = {
        "command": command,
        "seed": seed,
        "threads": nthreads or numba.get_num_threads(),
        "config_sha256": digest,
        "config": cfg,
        "version": __version__,
        "artifacts": artifacts,
        "passed": bool(passed),
    }
    _write_json(out / "manifest.json", manifest)
    return 0 if passed else 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        code = run(args.command, args.config, args.seed, args.threads, args.out)
    except (ConfigError, PolyaError, ValueError) as exc:
        print(f"polya-imm {args.command}: {exc}", file=sys.stderr)
        return 2
    print(f"polya-imm {args.command}: {'passed' if code == 0 else 'FAILED'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
