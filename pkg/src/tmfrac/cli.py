"""Command-line driver: one subcommand per computation, JSON or CSV reports.

    tmfrac sup --p 2 --theta 1 --eta 0 --mu-frac 0.5
    tmfrac moser --p 2 --theta 1 --n 60 --rho 1,2
    tmfrac green --p 2 --theta 1 --eta 0.5
    tmfrac identities --p 2 --z 1

Exit codes: 0 success, 1 error, 2 blow-up detected or solver stopped short.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np


from ._version import version_string
from .errors import TruncationError

EXIT_OK, EXIT_ERROR, EXIT_BLOWUP = 0, 1, 2


class CLIError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError(message)


# -- configuration -----------------------------------------------------------

@dataclass
class GridConfig:
    r_out: float | None = None
    n_nodes: int | None = None
    grading: str | None = None
    r_min: float | None = None


@dataclass
class SolverConfig:
    tol: float | None = None
    max_iter: int = 50_000
    seed: int = 0


@dataclass
class OutputConfig:
    path: str | None = None
    format: str = "json"


@dataclass
class RunConfig:
    command: str
    p: float = 2.0
    theta: float = 1.0
    eta: list = field(default_factory=lambda: [0.0])
    mu: list | None = None
    mu_frac: list | None = None
    epsilon: float = 1e-3
    n: list = field(default_factory=lambda: [60])
    rho: list = field(default_factory=lambda: [1.0, 2.0])
    z: list = field(default_factory=lambda: [0.1, 1.0, 10.0, 100.0])
    mu_max: float = 1.0
    omega_convention: str = "sphere"
    jobs: int = 1
    grid: GridConfig = field(default_factory=GridConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self) -> None:
        if self.mu is not None and self.mu_frac is not None:
            raise CLIError("--mu and --mu-frac are mutually exclusive")
        if self.p < 2:
            raise CLIError("--p must be >= 2")
        if self.theta < self.p - 1:
            raise CLIError("--theta must be >= p - 1")
        for e in self.eta:
            if not 0.0 <= e <= 1.0:
                raise CLIError("--eta must lie in [0, 1]")
        if self.output.format not in ("json", "csv"):
            raise CLIError("--format must be json or csv")
        if self.jobs < 1:
            raise CLIError("--jobs must be >= 1")

    def measure(self):
        from .measure import MeasureParams
        return MeasureParams(self.p, self.theta, self.omega_convention)

    def mu_values(self, params) -> list:
        if self.mu is not None:
            return list(self.mu)
        return [f * params.mu_crit for f in (self.mu_frac or [0.5])]


def _floats(text: str) -> list:
    return [float(x) for x in str(text).split(",") if x.strip()]


def _ints(text: str) -> list:
    return [int(x) for x in str(text).split(",") if x.strip()]


FLAG_TYPES = {
    "p": float, "theta": float, "eta": _floats, "mu": _floats, "mu_frac": _floats,
    "epsilon": float, "n": _ints, "rho": _floats, "z": _floats, "mu_max": float,
    "grid_nodes": int, "r_out": float, "r_min": float, "grading": str, "tol": float,
    "max_iter": int, "seed": int, "jobs": int, "out": str, "format": str,
    "omega_convention": str,
}


def read_config_file(path) -> dict:
    """Plain key=value lines; '#' starts a comment; keys use flag names."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CLIError(f"{path}:{lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in FLAG_TYPES:
            raise CLIError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = FLAG_TYPES[key](val)
        except ValueError as exc:
            raise CLIError(f"{path}:{lineno}: bad value for {key}: {val!r}") from exc
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="tmfrac", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("sup", "moser", "profile", "green", "threshold", "b2", "nonexist", "identities"):
        sp = sub.add_parser(name)
        sp.add_argument("--p", type=float)
        sp.add_argument("--theta", type=float)
        sp.add_argument("--eta", type=_floats, help="value or comma list")
        sp.add_argument("--mu", type=_floats)
        sp.add_argument("--mu-frac", type=_floats, help="fractions of mu_crit")
        sp.add_argument("--epsilon", type=float)
        sp.add_argument("--n", type=_ints)
        sp.add_argument("--rho", type=_floats)
        sp.add_argument("--z", type=_floats)
        sp.add_argument("--mu-max", type=float, help="largest mu scanned, as a fraction of mu_crit")
        sp.add_argument("--grid-nodes", type=int)
        sp.add_argument("--r-out", type=float)
        sp.add_argument("--r-min", type=float)
        sp.add_argument("--grading", choices=("uniform", "geometric", "hybrid"))
        sp.add_argument("--tol", type=float)
        sp.add_argument("--max-iter", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--config")
        sp.add_argument("--out")
        sp.add_argument("--format", choices=("json", "csv"))
        sp.add_argument("--omega-convention", choices=("sphere", "literal"))
    return ap


def resolve_config(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    given = {k: v for k, v in vars(args).items() if v is not None and k not in ("command", "config")}
    merged = read_config_file(args.config) if args.config else {}
    merged.update(given)                       # flags win
    cfg = RunConfig(command=args.command)
    for key in ("p", "theta", "eta", "mu", "mu_frac", "epsilon", "n", "rho", "z", "mu_max",
                "omega_convention", "jobs"):
        if key in merged:
            setattr(cfg, key, merged[key])
    cfg.grid = GridConfig(merged.get("r_out"), merged.get("grid_nodes"), merged.get("grading"),
                          merged.get("r_min"))
    cfg.solver = SolverConfig(merged.get("tol"), merged.get("max_iter", 50_000), merged.get("seed", 0))
    cfg.output = OutputConfig(merged.get("out"), merged.get("format", "json"))
    cfg.validate()
    return cfg


# -- reporting ---------------------------------------------------------------

library_version = version_string


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def make_report(cfg: RunConfig, body: dict, grid=None) -> dict:
    prov = {"version": library_version(), "params": cfg.measure().as_dict()}
    if grid is not None:
        prov["grid"] = grid.spec()
    return {"command": cfg.command, "config": asdict(cfg), "omega_convention": cfg.omega_convention,
            "provenance": prov, "result": body,
            "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds")}


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2) + "\n"


def write_output(cfg: RunConfig, report: dict, rows: list | None = None) -> None:
    path = cfg.output.path
    if cfg.output.format == "csv":
        buf = io.StringIO()
        rows = rows or []
        if rows:
            w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
            w.writeheader()
            for row in rows:
                w.writerow({k: repr(float(v)) if isinstance(v, (float, np.floating)) else v
                            for k, v in row.items()})
        text = buf.getvalue()
        if path:
            Path(path).write_text(text)
            Path(path).with_suffix(".json").write_text(dumps(report))
        else:
            sys.stdout.write(text)
        return
    if path:
        Path(path).write_text(dumps(report))
    else:
        sys.stdout.write(dumps(report))


def _profile_rows(profile, name="value") -> list:
    return [{"r": float(r), name: float(v)} for r, v in zip(profile.r, profile.values)]


def _grid(cfg: RunConfig, params, r_out, n, grading, r_min=None):
    from .measure import make_grid
    g = cfg.grid
    return make_grid(params, g.r_out or r_out, g.n_nodes or n, g.grading or grading,
                     r_min=g.r_min if g.r_min is not None else r_min)


# -- commands ------------------------------------------------------------------

def _sup_point(args):
    cfg, eta, mu = args
    from .functional import FunctionalParams, SolveOptions, maximize_ad
    P = cfg.measure()
    grid = _grid(cfg, P, 10.0, 1024, "hybrid", 1e-6)
    fp = FunctionalParams(mu, eta, P.p)
    opts = SolveOptions(tol=cfg.solver.tol or 1e-7, max_iter=cfg.solver.max_iter,
                        allow_supercritical=True, rho=tuple(cfg.rho), seed=cfg.solver.seed)
    rep = maximize_ad(fp, P, grid, opts)
    d = rep.to_dict()
    d["functional"] = fp.as_dict()
    d["mu_frac"] = mu / P.mu_crit
    return d, grid.spec()


def cmd_sup(cfg: RunConfig) -> int:
    P = cfg.measure()
    points = [(cfg, e, m) for e in cfg.eta for m in cfg.mu_values(P)]
    if cfg.jobs > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as ex:
            results = list(ex.map(_sup_point, points))
    else:
        results = [_sup_point(pt) for pt in points]
    reports = [r for r, _ in results]
    body = reports[0] if len(reports) == 1 else {"points": reports}
    report = make_report(cfg, body)
    report["provenance"]["grid"] = results[0][1]
    rows = []
    if len(reports) == 1 and reports[0]["maximizer"] is not None:
        m = reports[0]["maximizer"]
        rows = [{"r": r, "value": v} for r, v in zip(m["r"], m["v"])]
    else:
        rows = [{"eta": r["functional"]["eta"], "mu": r["functional"]["mu"], "value": r["value"],
                 "converged": r["converged"], "blowup_detected": r["blowup_detected"]} for r in reports]
    write_output(cfg, report, rows)
    if any(r["blowup_detected"] for r in reports):
        return EXIT_BLOWUP
    return EXIT_OK if all(r["converged"] for r in reports) else EXIT_BLOWUP


def cmd_moser(cfg: RunConfig) -> int:
    from .asymptotics import (moser_grad_energy_quadrature, moser_lp_energy_exact, moser_lp_limit,
                              moser_profile, plateau_radius, sharpness_certificate)
    from .radial import grad_energy, lq_energy
    P = cfg.measure()
    rows, entries = [], []
    for n in cfg.n:
        for rho in cfg.rho:
            r0 = plateau_radius(n, rho, P)
            grid = _grid(cfg, P, 2.0 * rho, 4096, "geometric", r0 * 1e-3)
            prof = moser_profile(n, rho, P, grid)
            a = moser_lp_energy_exact(n, rho, P)
            ball = P.omega_theta * rho ** (P.theta + 1.0) / (P.theta + 1.0)
            cert = sharpness_certificate(n, rho, P, grid)
            entries.append({
                "n": n, "rho": rho, "plateau_radius": r0,
                "grad_energy_closed_form": 1.0,
                "grad_energy_quadrature": moser_grad_energy_quadrature(n, rho, P),
                "grad_energy_sampled": grad_energy(prof),
                "lp_energy_closed_form": a, "lp_energy_sampled": lq_energy(prof, P.p),
                "n_lp_energy_ratio_to_limit": n * a / (rho ** (P.theta + 1.0) * moser_lp_limit(P)),
                "certificate": cert, "ball_limit": ball, "certificate_ratio": cert / ball,
            })
            rows.append({"n": n, "rho": rho, "certificate": cert, "ball_limit": ball})
    write_output(cfg, make_report(cfg, {"entries": entries}), rows)
    return EXIT_OK


def cmd_profile(cfg: RunConfig) -> int:
    from .asymptotics import BlowupProfile, w_normalization, w_ode_residual, w_profile
    P = cfg.measure()
    b = BlowupProfile(P)
    grid = _grid(cfg, P, 10.0, 4096, "uniform")
    body = {"c_at": b.c_at, "normalization": w_normalization(b), "ode_residual": w_ode_residual(b, grid),
            "w_at_1": w_profile(b, 1.0)}
    rows = [{"r": float(r), "w": float(w)} for r, w in zip(grid.nodes, w_profile(b, grid.nodes))]
    write_output(cfg, make_report(cfg, body, grid), rows)
    return EXIT_OK


def _green(cfg, P, eta):
    from .asymptotics import green_grid, solve_green
    g = cfg.grid
    grid = green_grid(P, g.r_out or 20.0, g.n_nodes or 4096, g.r_min or 1e-10)
    return solve_green(eta, P, grid, tol=cfg.solver.tol or 1e-6), grid


def _green_body(gf, P) -> dict:
    from .asymptotics import cc_threshold
    return {"eta": gf.eta, "a_eta": gf.a_eta, "residual": gf.residual, "fit_slope": gf.fit_slope,
            "closure_defect": gf.closure_defect, "iterations": gf.iterations, "method": gf.method,
            "lp_energy": gf.lq(P.p), "threshold": cc_threshold(gf, P)}


def cmd_green(cfg: RunConfig) -> int:
    P = cfg.measure()
    entries, rows, grid = [], [], None
    for eta in cfg.eta:
        gf, grid = _green(cfg, P, eta)
        entries.append(_green_body(gf, P))
        rows.extend({"eta": eta, "r": float(r), "g": float(v)} for r, v in zip(gf.profile.r, gf.profile.values))
    body = entries[0] if len(entries) == 1 else {"entries": entries}
    write_output(cfg, make_report(cfg, body, grid), rows)
    return EXIT_OK


def cmd_threshold(cfg: RunConfig) -> int:
    from .asymptotics import critical_test_details, h_epsilon_eta
    P = cfg.measure()
    entries, rows, grid = [], [], None
    for eta in cfg.eta:
        gf, grid = _green(cfg, P, eta)
        tf = critical_test_details(cfg.epsilon, eta, gf, P)
        integer_p = float(P.p).is_integer()
        H = h_epsilon_eta(cfg.epsilon if (integer_p or eta == 0) else None, eta, gf, P)
        e = _green_body(gf, P)
        e.update({"epsilon": cfg.epsilon, "test_norm": tf.norm, "norm_defect": tf.norm_defect,
                  "test_value": tf.value, "glue_defect": tf.glue_defect, "Y": tf.Y, "b": tf.b,
                  "c_power": tf.c_power, "test_remainders": tf.remainders,
                  "H": H.value, "H_leading": H.leading, "H_correction": H.correction,
                  "H_epsilon": H.epsilon, "H_remainders": H.remainders})
        entries.append(e)
        rows.append({"eta": eta, "threshold": e["threshold"], "test_value": tf.value, "H": H.value})
    body = entries[0] if len(entries) == 1 else {"entries": entries}
    write_output(cfg, make_report(cfg, body, grid), rows)
    return EXIT_OK


def cmd_b2(cfg: RunConfig) -> int:
    from .functional import b2_solve, p2_attainment_threshold
    P = cfg.measure()
    if P.p != 2.0:
        raise CLIError("b2 is defined for p = 2")
    grid = _grid(cfg, P, 40.0, 2048, "hybrid", 1e-6)
    res = b2_solve(P.theta, grid, tol=cfg.solver.tol or 1e-9)
    th = [{"eta": e, "threshold": p2_attainment_threshold(e, P.theta, grid, res.constant)}
          for e in cfg.eta if e < 1.0]
    body = {"b2": res.constant, "quotient": res.quotient, "converged": res.converged,
            "iterations": res.iterations, "starts": res.starts, "thresholds": th, "mu_crit": P.mu_crit}
    write_output(cfg, make_report(cfg, body, grid), _profile_rows(res.minimizer))
    return EXIT_OK if res.converged else EXIT_BLOWUP


def cmd_nonexist(cfg: RunConfig) -> int:
    from .functional import ishiwata_derivative, nonexistence_bound, trial_family
    P = cfg.measure()
    if P.p != 2.0:
        raise CLIError("nonexist is defined for p = 2")
    grid = _grid(cfg, P, 20.0, 2048, "hybrid", 1e-6)
    family = trial_family(grid, cfg.solver.seed)
    eta = cfg.eta[0]
    bound = nonexistence_bound(family, P.theta)
    fracs = np.linspace(cfg.mu_max / 20.0, cfg.mu_max, 20)
    rows, scan = [], []
    for f in fracs:
        mu = float(f * P.mu_crit)
        derivs = []
        for k, u in enumerate(family):
            try:
                d = ishiwata_derivative(u, mu, eta, P.theta)
            except TruncationError:
                d = math.nan
            derivs.append(d)
            rows.append({"mu_frac": float(f), "profile": k, "derivative": d})
        scan.append({"mu_frac": float(f), "mu": mu, "derivatives": derivs,
                     "all_negative": bool(all(d < 0 for d in derivs))})
    below = [s for s in scan if s["mu"] < bound["bound"]]
    body = {"eta": eta, "bound": bound, "scan": scan,
            "all_negative_below_bound": bool(all(s["all_negative"] for s in below))}
    write_output(cfg, make_report(cfg, body, grid), rows)
    return EXIT_OK


def cmd_identities(cfg: RunConfig) -> int:
    from .special import beta_integral, lt_identity_residuals
    ps = [cfg.p]
    entries, rows = [], []
    for z in cfg.z:
        for p in ps:
            r1, r2, r3 = lt_identity_residuals(z, p)
            entries.append({"z": z, "p": p, "residual_1": r1, "residual_2": r2, "residual_3": r3})
            rows.append(entries[-1])
    body = {"entries": entries, "max_residual": max(max(e["residual_1"], e["residual_2"], e["residual_3"])
                                                    for e in entries),
            "beta_p_1": beta_integral(cfg.p, 1.0)}
    write_output(cfg, make_report(cfg, body), rows)
    return EXIT_OK


COMMANDS = {"sup": cmd_sup, "moser": cmd_moser, "profile": cmd_profile, "green": cmd_green,
            "threshold": cmd_threshold, "b2": cmd_b2, "nonexist": cmd_nonexist,
            "identities": cmd_identities}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = resolve_config(argv)
        return COMMANDS[cfg.command](cfg)
    except CLIError as exc:
        print(f"tmfrac: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:                     # uniform exit-code contract
        print(f"tmfrac: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
