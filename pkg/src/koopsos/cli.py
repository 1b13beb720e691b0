"""Command-line front end.

Subcommands: simulate | fit | bound | lyapunov | reproduce | verify.
Every command is driven by a JSON config file validated against a strict
schema (unknown keys are rejected), and every JSON output embeds the config
hash and library version so results are traceable to their inputs.

Exit codes: 0 success, 1 solver did not reach Optimal, 2 config error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, reference_values
from .auxfn import (circular_orbit_casestudy, ergodic_bound, exact_lie_matrix,
                    find_lyapunov)
from .koopman import convergence_study, fit_edmd, fit_gedmd, loglog_slope
from .polybasis import (CHEBYSHEV, MONOMIAL, Poly, monomial_to_cheb,
                        total_degree_dictionary)
from .snapshots import GENERATOR, KOOPMAN, empirical_average, save_csv
from .sos import SemialgebraicSet, posterior_verify
from .systems import (MAP_LYAP_2D, STOCHASTIC_LOGISTIC, VAN_DER_POL,
                      SystemSpec, make_rng, sample_snapshots)

EXIT_OK = 0
EXIT_NONOPTIMAL = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    pass


_SCHEMA = {
    "system": None,
    "sampling": {"mode", "tau", "n", "seed", "x0", "bounds"},
    "dictionaries": {"family", "alpha", "beta", "box"},
    "task": None,
    "lie_source": None,
    "observable": None,
    "domain": None,
    "solver": {"tol", "max_iter"},
    "output": {"path"},
}


def validate_config(cfg: dict) -> dict:
    """Reject unknown keys at the top level and within each section."""
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    for key, val in cfg.items():
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        allowed = _SCHEMA[key]
        if allowed is not None:
            if not isinstance(val, dict):
                raise ConfigError(f"config section {key!r} must be an object")
            for sub in val:
                if sub not in allowed:
                    raise ConfigError(f"unknown config key {key!r}.{sub!r}")
    if "system" not in cfg:
        raise ConfigError("missing config key 'system'")
    return cfg


def config_hash(cfg: dict) -> str:
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _load_config(path: str, overrides) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = validate_config(cfg)
    if overrides.seed is not None:
        cfg.setdefault("sampling", {})["seed"] = overrides.seed
    if overrides.tol is not None:
        cfg.setdefault("solver", {})["tol"] = overrides.tol
    if overrides.out is not None:
        cfg.setdefault("output", {})["path"] = overrides.out
    return cfg


def _system(cfg) -> SystemSpec:
    try:
        return SystemSpec(cfg["system"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _dictionaries(cfg, spec: SystemSpec):
    sec = cfg.get("dictionaries", {})
    family = sec.get("family",
                     CHEBYSHEV if spec.id == STOCHASTIC_LOGISTIC else MONOMIAL)
    if family not in (MONOMIAL, CHEBYSHEV):
        raise ConfigError(f"unknown dictionary family {family!r}")
    alpha = int(sec.get("alpha", 4))
    default_beta = 2 * alpha if spec.id == STOCHASTIC_LOGISTIC else alpha + 2
    beta = int(sec.get("beta", default_beta))
    box = sec.get("box")
    if box is None and family == CHEBYSHEV:
        box = [[0.0, 1.0]] * spec.dimension
    box = tuple(tuple(map(float, b)) for b in box) if box else None
    phi = total_degree_dictionary(family, spec.dimension, alpha, box)
    psi = total_degree_dictionary(family, spec.dimension, beta, box)
    return phi, psi


def _sample(cfg, spec: SystemSpec, kind: str = KOOPMAN, phi=None):
    sec = cfg.get("sampling", {})
    mode = sec.get("mode", "trajectory")
    tau = float(sec.get("tau", 1.0 if spec.time_kind == "discrete" else 1e-3))
    n = int(sec.get("n", 10_000))
    seed = int(sec.get("seed", 0))
    return sample_snapshots(spec, mode, tau, n, rng=make_rng(seed),
                            snapshot_kind=kind, x0=sec.get("x0"),
                            bounds=sec.get("bounds"), phi=phi, seed=seed)


def _observable(name: str, spec: SystemSpec, family, box) -> Poly:
    d = spec.dimension
    mono = total_degree_dictionary(MONOMIAL, d, 2)
    c = np.zeros(mono.size)
    if name == "energy":
        for j in range(d):
            c[mono.position(tuple(2 if k == j else 0 for k in range(d)))] = 1.0
    elif name == "state":
        c[mono.position(tuple(1 if k == 0 else 0 for k in range(d)))] = 1.0
    else:
        raise ConfigError(f"unknown observable {name!r}")
    p = Poly(mono, c)
    if family == CHEBYSHEV:
        p = monomial_to_cheb(p, total_degree_dictionary(CHEBYSHEV, d, 2, box))
    return p


def _domain(name: str, spec: SystemSpec, family, box) -> SemialgebraicSet:
    if name == "none":
        return SemialgebraicSet()
    if name == "unit_interval":
        mono = total_degree_dictionary(MONOMIAL, 1, 2)
        s = Poly(mono, np.array([0.0, 1.0, -1.0]))  # x - x^2
        if family == CHEBYSHEV:
            s = monomial_to_cheb(
                s, total_degree_dictionary(CHEBYSHEV, 1, 2, box))
        return SemialgebraicSet((s,))
    raise ConfigError(f"unknown domain {name!r}")


def _stamp(cfg, payload: dict) -> dict:
    payload["config_hash"] = config_hash(cfg)
    payload["version"] = __version__
    return payload


def _write_json(cfg, payload: dict, default_name: str) -> Path:
    path = Path(cfg.get("output", {}).get("path", default_name))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_stamp(cfg, payload), indent=2))
    return path


# -- commands -------------------------------------------------------------------

def cmd_simulate(cfg) -> int:
    spec = _system(cfg)
    data = _sample(cfg, spec)
    path = Path(cfg.get("output", {}).get("path", "snapshots.csv"))
    path.parent.mkdir(parents=True, exist_ok=True)
    data.metadata["config_hash"] = config_hash(cfg)
    data.metadata["version"] = __version__
    save_csv(data, path)
    print(f"wrote {data.n} snapshots to {path}")
    return EXIT_OK


def _fit_operators(cfg, spec):
    phi, psi = _dictionaries(cfg, spec)
    source = cfg.get("lie_source", "edmd")
    tol = float(cfg.get("solver", {}).get("tol", 1e-8))
    if source == "exact":
        return phi, psi, exact_lie_matrix(spec, phi, psi), source, tol
    if source == "gedmd":
        data = _sample(cfg, spec, kind=GENERATOR, phi=phi)
        ops = fit_gedmd(data, phi, psi)
        return phi, psi, ops.G, source, tol
    if source == "edmd":
        data = _sample(cfg, spec)
        ops = fit_edmd(data, phi, psi)
        return phi, psi, ops.L, source, tol
    raise ConfigError(f"unknown lie_source {cfg['lie_source']!r}")


def cmd_fit(cfg) -> int:
    spec = _system(cfg)
    phi, psi = _dictionaries(cfg, spec)
    source = cfg.get("lie_source", "edmd")
    if source == "gedmd":
        data = _sample(cfg, spec, kind=GENERATOR, phi=phi)
        ops = fit_gedmd(data, phi, psi)
    elif source == "edmd":
        data = _sample(cfg, spec)
        ops = fit_edmd(data, phi, psi)
    else:
        raise ConfigError("fit requires lie_source edmd or gedmd")
    path = _write_json(cfg, json.loads(ops.to_json()), "operators.json")
    print(f"wrote fitted operators to {path}")
    return EXIT_OK


def cmd_bound(cfg) -> int:
    spec = _system(cfg)
    task = cfg.get("task", "upper")
    if task not in ("upper", "lower"):
        raise ConfigError("bound requires task 'upper' or 'lower'")
    phi, psi, lie, source, tol = _fit_operators(cfg, spec)
    default_obs = "state" if spec.dimension == 1 else "energy"
    default_dom = ("unit_interval" if spec.id == STOCHASTIC_LOGISTIC
                   else "none")
    g = _observable(cfg.get("observable", default_obs), spec, phi.family,
                    phi.box)
    domain = _domain(cfg.get("domain", default_dom), spec, phi.family, phi.box)
    res = ergodic_bound(task, g, lie, psi, phi, domain=domain,
                        lie_source=source, tol=tol,
                        max_iter=int(cfg.get("solver", {}).get("max_iter", 200)))
    path = _write_json(cfg, json.loads(res.to_json()), "bound.json")
    print(f"{task} bound: {res.bound} ({res.status}); wrote {path}")
    return EXIT_OK if res.status == "Optimal" else EXIT_NONOPTIMAL


def cmd_lyapunov(cfg) -> int:
    spec = _system(cfg)
    phi, psi, lie, source, tol = _fit_operators(cfg, spec)
    posterior = exact_lie_matrix(spec, phi, psi)
    res = find_lyapunov(lie, psi, phi, objective="l1",
                        posterior_lie=posterior, tol=tol)
    payload = json.loads(res.to_json())
    payload["phi"] = json.loads(phi.to_json())
    path = _write_json(cfg, payload, "lyapunov.json")
    print(f"lyapunov feasible={res.feasible} "
          f"posterior_eps={res.epsilon_posterior}; wrote {path}")
    return EXIT_OK if res.feasible else EXIT_NONOPTIMAL


def cmd_verify(cfg) -> int:
    """Re-check a stored Lyapunov result against the exact generator."""
    spec = _system(cfg)
    result_path = cfg.get("output", {}).get("path")
    if result_path is None:
        raise ConfigError("verify requires output.path pointing at a "
                          "lyapunov result JSON")
    data = json.loads(Path(result_path).read_text())
    phi, psi = _dictionaries(cfg, spec)
    coeffs = np.array(data["V_coeffs"], dtype=float)
    report = posterior_verify(Poly(phi, coeffs),
                              exact_lie_matrix(spec, phi, psi), psi)
    eps = report.get("epsilon")
    print(f"posterior epsilon: {eps} ({report['status']})")
    return EXIT_OK if (eps is not None and eps > 0) else EXIT_NONOPTIMAL


# -- reproduce ------------------------------------------------------------------

def _retry_bound(*args, tol=1e-8, **kwargs):
    res = ergodic_bound(*args, tol=tol, **kwargs)
    if res.status != "Optimal":
        res = ergodic_bound(*args, tol=100 * tol, **kwargs)
    return res


def _reproduce_vdp(writer):
    spec = SystemSpec(VAN_DER_POL)
    ref = reference_values.VDP_TABLE
    g = _observable("energy", spec, MONOMIAL, None)
    rows = [("exact", None), ("T=1e2", 100_000), ("T=1e2.5", 316_228),
            ("T=1e3", 1_000_000)]
    failures = 0
    for row_name, n in rows:
        data = (None if n is None else
                sample_snapshots(spec, "trajectory", 1e-3, n, x0=(0.1, 0.2)))
        if data is not None:
            emp = empirical_average(data, g)
            writer(["vdp", row_name, "empirical", f"{emp:.4f}",
                    ref["rows"][row_name]["empirical"],
                    f"{emp - ref['rows'][row_name]['empirical']:+.4f}"])
        for alpha, expected in zip(ref["alphas"], ref["rows"][row_name]["bounds"]):
            phi = total_degree_dictionary(MONOMIAL, 2, alpha)
            psi = total_degree_dictionary(MONOMIAL, 2, alpha + 2)
            lie = (exact_lie_matrix(spec, phi, psi) if data is None
                   else fit_edmd(data, phi, psi).L)
            res = _retry_bound("upper", g, lie, psi, phi,
                               lie_source="exact" if data is None else "edmd")
            if res.status != "Optimal":
                failures += 1
            val = "failed" if res.bound is None else f"{res.bound:.4f}"
            diff = ("" if res.bound is None
                    else f"{res.bound - expected:+.4f}")
            writer(["vdp", row_name, f"alpha={alpha}", val, expected, diff])
    return failures


def _reproduce_logistic(writer):
    spec = SystemSpec(STOCHASTIC_LOGISTIC)
    box = ((0.0, 1.0),)
    ref = reference_values.LOGISTIC_TABLE
    g = _observable("state", spec, CHEBYSHEV, box)
    domain = _domain("unit_interval", spec, CHEBYSHEV, box)
    data = sample_snapshots(spec, "trajectory", 1.0, 10_000_000,
                            rng=make_rng(12345))
    failures = 0
    for direction in ("upper", "lower"):
        for row_name in ("exact", "n=1e7"):
            if row_name not in ref[direction]:
                continue
            for alpha, expected in zip(ref["alphas"], ref[direction][row_name]):
                phi = total_degree_dictionary(CHEBYSHEV, 1, alpha, box)
                psi = total_degree_dictionary(CHEBYSHEV, 1, 2 * alpha, box)
                lie = (exact_lie_matrix(spec, phi, psi) if row_name == "exact"
                       else fit_edmd(data, phi, psi).L)
                res = _retry_bound(direction, g, lie, psi, phi, domain=domain,
                                   lie_source="exact" if row_name == "exact"
                                   else "edmd")
                if res.status != "Optimal":
                    failures += 1
                val = "failed" if res.bound is None else f"{res.bound:.4f}"
                diff = ("" if res.bound is None
                        else f"{res.bound - expected:+.4f}")
                writer([f"logistic_{direction}", row_name, f"alpha={alpha}",
                        val, expected, diff])
    return failures


def _reproduce_logistic_rate(writer):
    spec = SystemSpec(STOCHASTIC_LOGISTIC)
    box = ((0.0, 1.0),)
    phi = total_degree_dictionary(CHEBYSHEV, 1, 4, box)
    psi = total_degree_dictionary(CHEBYSHEV, 1, 8, box)

    def sample(n, seed):
        return sample_snapshots(spec, "trajectory", 1.0, n,
                                rng=make_rng(seed))

    ns, dists, _ = convergence_study(sample, phi, psi,
                                     [10 ** 4, 10 ** 5, 10 ** 6],
                                     [0, 1, 2, 3, 4], 10 ** 7)
    for n, dist in zip(ns, dists):
        writer(["logistic_rate", f"n={int(n)}", "frobenius_distance",
                f"{dist:.6e}", "", ""])
    slope = loglog_slope(ns, dists)
    ref = reference_values.CONVERGENCE_RATE
    writer(["logistic_rate", "slope", "", f"{slope:.4f}", ref["slope"],
            f"{slope - ref['slope']:+.4f}"])
    return 0


def _reproduce_circle(writer):
    rep = circular_orbit_casestudy()
    ref = reference_values.CIRCLE_CASESTUDY
    for key in ("L_edmd", "L_gedmd"):
        writer(["circle", key, "", f"{rep[key]:.6f}", ref[key],
                f"{rep[key] - ref[key]:+.2e}"])
    writer(["circle", "divergence_indicator", "psi coefficients",
            " ".join(f"{c:.6f}" for c in rep["divergence_indicator"].coeffs),
            "", ""])
    return 0


def _reproduce_lyapunov(writer):
    spec = SystemSpec(MAP_LYAP_2D)
    phi = total_degree_dictionary(MONOMIAL, 2, 4)
    psi = total_degree_dictionary(MONOMIAL, 2, 8)
    data = sample_snapshots(spec, "iid_uniform_box", 1.0, 10_000,
                            rng=make_rng(7), bounds=[(-2, 2), (-2, 2)])
    ops = fit_edmd(data, phi, psi)
    res = find_lyapunov(ops.L, psi, phi, objective="l1",
                        posterior_lie=exact_lie_matrix(spec, phi, psi))
    ref = reference_values.LYAPUNOV_MAP2D
    writer(["lyapunov", "feasible", "", str(res.feasible), "True", ""])
    eps = res.epsilon_posterior
    writer(["lyapunov", "posterior_epsilon", "",
            "failed" if eps is None else f"{eps:.4f}",
            f">={ref['posterior_epsilon_min']}", ""])
    if res.V is not None:
        for idx, cv in zip(phi.indices, res.V.coeffs):
            expected = ref["V_reported"].get(idx)
            if abs(cv) > 1e-3 or expected is not None:
                writer(["lyapunov", "V", str(idx), f"{cv:.4f}",
                        "" if expected is None else expected,
                        "" if expected is None else f"{cv - expected:+.4f}"])
    return 0 if res.feasible and eps is not None and eps >= 0.99 else 1


_TABLES = {
    "vdp": _reproduce_vdp,
    "logistic": _reproduce_logistic,
    "logistic_rate": _reproduce_logistic_rate,
    "circle": _reproduce_circle,
    "lyapunov": _reproduce_lyapunov,
}


def cmd_reproduce(table_id: str, out: str | None) -> int:
    if table_id not in _TABLES:
        raise ConfigError(f"unknown table {table_id!r}; choose from "
                          f"{sorted(_TABLES)}")
    out_path = Path(out or f"{table_id}.csv")
    out_path.parent.mkdir(parents=True, exist_ok=True)
    rows = []

    def writer(row):
        rows.append(row)
        print("  ".join(str(v) for v in row))

    failures = _TABLES[table_id](writer)
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["table", "row", "cell", "value", "reference", "diff"])
        w.writerows(rows)
    print(f"wrote {out_path} ({failures} failed cells)")
    return EXIT_OK if failures == 0 else EXIT_NONOPTIMAL


# -- entry point ----------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="koopsos",
        description="Data-driven Lie derivatives with sum-of-squares "
                    "certificates")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "fit", "bound", "lyapunov", "verify"):
        sp = sub.add_parser(name)
        sp.add_argument("config", help="path to JSON config file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--tol", type=float, default=None)
    rp = sub.add_parser("reproduce")
    rp.add_argument("table", choices=sorted(_TABLES))
    rp.add_argument("--out", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "reproduce":
            return cmd_reproduce(args.table, args.out)
        cfg = _load_config(args.config, args)
        handler = {"simulate": cmd_simulate, "fit": cmd_fit,
                   "bound": cmd_bound, "lyapunov": cmd_lyapunov,
                   "verify": cmd_verify}[args.command]
        return handler(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
