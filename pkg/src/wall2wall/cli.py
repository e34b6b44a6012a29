"""Batch front-end: evaluate designs, sweep parameters, fit scalings, validate.

Subcommands:
    evaluate  one design (or a streamfunction file) -> JSON transport report
    sweep     a log-spaced epsilon/Pe grid -> CSV rows + JSON fit summary
    fit       post-process an existing sweep CSV -> fitted exponent JSON
    validate  run the randomized invariant suite (deterministic per seed)
    bound     emit bound certificates for a design -> JSON

Exit codes: 0 success, 2 configuration error, 3 solver failure,
4 invariant failure. Floats are emitted with 17 significant digits so runs
can be reproduced bit-for-bit (wall_time columns excepted).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from multiprocessing import Pool

import numpy as np

from . import __version__
from .advection import kernel_l1_bound_check, mode_decomposition
from .bounds import check_lingrowth, energy_bound, howard_value, symmetrization_bound_min
from .designs import (
    build_branching,
    build_roll,
    predicted_interaction_modes,
    roll_optimal_params,
    select_branching_params,
    suggest_branching_domain,
    suggest_roll_domain,
)
from .domain import build_domain
from .errors import SolverError
from .fields import (
    dx,
    dz,
    energy_norm,
    enstrophy_norm,
    field_from_json,
    grad_pair,
    h1_seminorm,
    pair,
    random_scalar,
    random_velocity,
    scale_to_intensity,
    streamfunction_to_velocity,
)
from .optimizer import efficiency_energy, efficiency_enstrophy, fit_scaling
from .transport import (
    conduction_lift,
    evaluate_transport,
    nu_direct,
    nu_dual,
    nu_primal,
    solve_steady_theta,
    solve_symmetrized,
)

CSV_COLUMNS = [
    "epsilon", "pe", "nu_direct", "nu_primal", "nu_dual", "E_total",
    "E_advection", "E_product", "n_layers", "l_bulk", "l_bl", "wall_time_s",
]


def fmt(x) -> str:
    """17-significant-digit float formatting (reproducibility contract)."""
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"unserializable {type(obj)}")


def _dump_json(payload, path):
    text = json.dumps(payload, indent=2, default=_json_default)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


class ConfigError(Exception):
    pass


def _load_config(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if path.endswith(".toml"):
        try:
            import tomllib
        except ImportError as exc:
            raise ConfigError("TOML config needs Python >= 3.11; use JSON") from exc
        return tomllib.loads(raw.decode())
    try:
        return json.loads(raw.decode())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def _apply_config(args, parser):
    if not getattr(args, "config", None):
        return args
    cfg = _load_config(args.config)
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a table/object")
    defaults = {a.dest: a.default for a in parser._actions}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest):
            raise ConfigError(f"unknown config key {key!r}")
        # flags win: only fill values the command line left at default
        if getattr(args, dest) == defaults.get(dest):
            setattr(args, dest, value)
    return args


def _parse_grid(spec: str, points: int) -> np.ndarray:
    """Parse 'lo..hi' into a log-spaced grid, or a single number."""
    if ".." in str(spec):
        lo_s, hi_s = str(spec).split("..", 1)
        lo, hi = float(lo_s), float(hi_s)
        if lo <= 0 or hi <= lo:
            raise ConfigError(f"bad range {spec!r}: need 0 < lo < hi")
        return np.geomspace(lo, hi, points)
    return np.array([float(spec)])


def _design_domain(args, epsilon):
    if args.modes and args.nz:
        return build_domain(args.lx, args.modes, args.nz)
    if args.design == "roll":
        dom = suggest_roll_domain(epsilon, l_x=args.lx)
    else:
        dom = suggest_branching_domain(epsilon, l_x=args.lx)
    if args.modes or args.nz:
        return build_domain(args.lx, args.modes or dom.M, args.nz or dom.N_z)
    return dom


def _build_design(args, epsilon):
    dom = _design_domain(args, epsilon)
    if args.design == "roll":
        params = roll_optimal_params(epsilon, dom)
        u, xi = build_roll(params, dom)
        return dom, u, xi, params
    u, xi, params = build_branching(epsilon, dom)
    return dom, u, xi, params


def _point_epsilon_pe(args):
    if args.epsilon is not None and args.pe is not None:
        raise ConfigError("give either --epsilon or --pe, not both")
    if args.epsilon is not None:
        eps = float(args.epsilon)
        return eps, eps ** -0.5
    if args.pe is not None:
        pe = float(args.pe)
        return pe ** -2.0, pe
    raise ConfigError("one of --epsilon or --pe is required")


# -- evaluate --------------------------------------------------------------------

def _cmd_evaluate(args) -> int:
    if args.design == "file":
        if not args.field:
            raise ConfigError("evaluate --design file needs --field")
        with open(args.field) as fh:
            psi = field_from_json(fh.read())
        u = streamfunction_to_velocity(psi)
        dom = psi.domain
        efficiency = None
        design_desc = {"type": "file", "path": args.field}
    else:
        eps, pe = _point_epsilon_pe(args)
        dom, u, xi, params = _build_design(args, eps)
        constraint = args.constraint or ("energy" if args.design == "roll" else "enstrophy")
        eff_fn = efficiency_energy if constraint == "energy" else efficiency_enstrophy
        branching = args.design == "branching"
        rep_eff = eff_fn(u, xi, eps, params if branching else None)
        efficiency = {
            "constraint": constraint,
            "advection": rep_eff.advection,
            "intensity_sq": rep_eff.enstrophy_u,
            "grad_xi": rep_eff.grad_xi,
            "total_E": rep_eff.total_E,
            "implied_nu_lower_bound": 1.0 / rep_eff.total_E,
            "analytic_bound": rep_eff.analytic_bound,
        }
        u = scale_to_intensity(u, pe, constraint)
        if branching:
            design_desc = {
                "type": "branching", "epsilon": eps, "n": params.n,
                "k_bulk": params.k_bulk, "c1": params.c1,
                "z_k": list(params.z_k), "l_k": list(params.l_k),
            }
        else:
            design_desc = {"type": "roll", "epsilon": eps,
                           "delta": params.delta, "l": params.l}
    report = evaluate_transport(u, tol=args.tol)
    payload = {
        "version": __version__,
        "design": design_desc,
        "domain": {"l_x": dom.l_x, "M": dom.M, "N_z": dom.N_z},
        "tol": args.tol,
        "nu_direct": report.nu_direct,
        "nu_primal": report.nu_primal,
        "nu_dual": report.nu_dual,
        "pe_energy": report.pe_energy,
        "pe_enstrophy": report.pe_enstrophy,
        "residuals": report.residuals,
        "efficiency": efficiency,
    }
    _dump_json(payload, args.out)
    return 0


# -- sweep -----------------------------------------------------------------------

def _sweep_point(task):
    args_d, eps = task
    ns = argparse.Namespace(**args_d)
    t0 = time.time()
    dom, u, xi, params = _build_design(ns, eps)
    constraint = ns.constraint or ("energy" if ns.design == "roll" else "enstrophy")
    pe = eps ** -0.5
    eff_fn = efficiency_energy if constraint == "energy" else efficiency_enstrophy
    eff = eff_fn(u, xi, eps, params if ns.design == "branching" else None)
    u_pe = scale_to_intensity(u, pe, constraint)
    rep = evaluate_transport(u_pe, tol=ns.tol)
    if ns.design == "roll":
        n_layers, l_bulk, l_bl = 1, params.l, params.l
    else:
        n_layers, l_bulk, l_bl = params.n, params.l_bulk, params.l_bl
    return {
        "epsilon": eps, "pe": pe,
        "nu_direct": rep.nu_direct, "nu_primal": rep.nu_primal,
        "nu_dual": rep.nu_dual, "E_total": eff.total_E,
        "E_advection": eff.advection,
        "E_product": eff.total_E - eff.advection,
        "n_layers": n_layers, "l_bulk": l_bulk, "l_bl": l_bl,
        "wall_time_s": time.time() - t0,
    }


def _cmd_sweep(args) -> int:
    if args.epsilon is not None and args.pe is not None:
        raise ConfigError("give either --epsilon or --pe, not both")
    if args.epsilon is not None:
        eps_grid = _parse_grid(args.epsilon, args.points)
    elif args.pe is not None:
        eps_grid = np.array([pe ** -2.0 for pe in _parse_grid(args.pe, args.points)])
    else:
        raise ConfigError("one of --epsilon or --pe is required")
    eps_grid = np.sort(eps_grid)[::-1]  # ascending Pe
    if len(eps_grid) == 0:
        raise ConfigError("empty grid")

    args_d = vars(args).copy()
    args_d.pop("func", None)
    tasks = [(args_d, float(e)) for e in eps_grid]
    if args.jobs > 1:
        with Pool(args.jobs) as pool:
            rows = pool.map(_sweep_point, tasks)
    else:
        rows = [_sweep_point(t) for t in tasks]

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        writer.writerow([fmt(row[c]) for c in CSV_COLUMNS])
    csv_text = buf.getvalue()
    out_csv = args.out or "sweep.csv"
    with open(out_csv, "w") as fh:
        fh.write(csv_text)

    summary = {"rows": len(rows), "csv": out_csv, "fits": {}}
    if len(rows) >= 2:
        pes = [r["pe"] for r in rows]
        for col in ("nu_direct", "E_total"):
            ys = [r[col] for r in rows]
            try:
                exponent, prefactor, r_sq = fit_scaling(list(zip(pes, ys)))
                summary["fits"][f"{col}_vs_pe"] = {
                    "exponent": exponent, "prefactor": prefactor, "r_squared": r_sq}
            except ValueError as exc:
                summary["fits"][f"{col}_vs_pe"] = {"error": str(exc)}
    _dump_json(summary, out_csv + ".summary.json")
    print(f"wrote {out_csv} ({len(rows)} rows) and {out_csv}.summary.json")
    return 0


# -- fit -------------------------------------------------------------------------

def _cmd_fit(args) -> int:
    with open(args.infile) as fh:
        reader = csv.DictReader(fh)
        data = [(float(r[args.x]), float(r[args.y])) for r in reader]
    exponent, prefactor, r_sq = fit_scaling(data)
    _dump_json({"x": args.x, "y": args.y, "n": len(data), "exponent": exponent,
                "prefactor": prefactor, "r_squared": r_sq}, args.out)
    return 0


# -- bound -----------------------------------------------------------------------

def _cmd_bound(args) -> int:
    eps, pe = _point_epsilon_pe(args)
    dom, u, xi, params = _build_design(args, eps)
    constraint = args.constraint or ("energy" if args.design == "roll" else "enstrophy")
    u_pe = scale_to_intensity(u, pe, constraint)
    nu = nu_direct(u_pe, tol=args.tol)
    certs = [{
        "kind": "energy", "value": energy_bound(u_pe),
        "profile": None, "delta": None,
    }]
    cert, scan = symmetrization_bound_min(u_pe)
    certs.append({
        "kind": "symmetrization", "value": cert.value,
        "profile": list(cert.profile), "delta": cert.delta,
        "scan": [{"delta": d, "value": v} for d, v in scan],
    })
    payload = {
        "design": args.design, "epsilon": eps, "pe": pe,
        "constraint": constraint, "nu_direct": nu, "certificates": certs,
        "all_dominate_nu": all(c["value"] >= nu - 1e-6 * nu for c in certs),
    }
    _dump_json(payload, args.out)
    return 0


# -- validate --------------------------------------------------------------------

def _invariant_suite(seed: int):
    """Yield (name, passed, detail) for the randomized invariant checks.

    Each check runs in isolation so one failure cannot hide the rest.
    """
    from .advection import advection_term
    from .designs import RollParams

    rng = np.random.default_rng(seed)
    dom = build_domain(2.0 * np.pi, 4, 33)
    state = {}

    def chk_hermitian():
        f = random_scalar(dom, rng, max_mode=4)
        herm = np.max(np.abs(dx(f).coeffs - np.conj(dx(f).coeffs[::-1])))
        return herm < 1e-12, f"asymmetry {herm:.2e}"

    def chk_divergence():
        psi = random_scalar(dom, rng, max_mode=4, clamped=True)
        u = streamfunction_to_velocity(psi)
        div = dx(u.u_x) + dz(u.u_z)
        rel = (pair(div, div) ** 0.5) / max(h1_seminorm(psi), 1e-300)
        return rel < 1e-10, f"residual {rel:.2e}"

    def chk_quadrature():
        zq = dom.cc_weights @ dom.z_grid ** (dom.N_z - 1)
        qerr = abs(zq - 1.0 / dom.N_z)
        return qerr < 1e-12, f"error {qerr:.2e}"

    def chk_duality():
        u = random_velocity(dom, rng, max_mode=4, pe=rng.uniform(5, 60))
        state["u"] = u
        rep = evaluate_transport(u, tol=1e-11)
        state["rep"] = rep
        gap = rep.residuals["duality_gap"] / rep.nu_direct
        return gap < 1e-8, f"relative gap {gap:.2e}"

    def chk_orthogonality():
        eta, xi = solve_symmetrized(state["u"], tol=1e-11)
        state["eta_xi"] = (eta, xi)
        rel = abs(grad_pair(eta, xi)) / max(h1_seminorm(eta) * h1_seminorm(xi), 1e-300)
        return rel < 1e-8, f"relative {rel:.2e}"

    def chk_nu_identity():
        theta = solve_steady_theta(state["u"], tol=1e-11)
        state["theta"] = theta
        nu_flux = 1.0 + pair(state["u"].w, theta)
        nu_grad = 1.0 + grad_pair(theta, theta)
        rel = abs(nu_flux - nu_grad) / nu_flux
        return rel < 1e-8, f"relative {rel:.2e}"

    def chk_theta_split():
        eta, xi = state["eta_xi"]
        theta = state["theta"]
        th_sum = eta + xi
        rel = np.max(np.abs(th_sum.coeffs - theta.coeffs)) / max(
            np.max(np.abs(theta.coeffs)), 1e-300)
        return rel < 1e-8, f"relative {rel:.2e}"

    def chk_antisymmetry():
        nu_neg = nu_direct(-1.0 * state["u"], tol=1e-11)
        rel = abs(nu_neg - state["rep"].nu_direct) / state["rep"].nu_direct
        return rel < 1e-8, f"relative {rel:.2e}"

    def chk_sandwich():
        u, rep = state["u"], state["rep"]
        eta_t = conduction_lift(dom) + 0.1 * random_scalar(dom, rng, max_mode=3)
        xi_t = 0.1 * random_scalar(dom, rng, max_mode=3)
        upper = nu_primal(u, eta_t)
        lower = nu_dual(u, xi_t)
        ok = lower <= rep.nu_direct + 1e-9 and rep.nu_direct <= upper + 1e-9
        return ok, f"{lower:.6f} <= {rep.nu_direct:.6f} <= {upper:.6f}"

    def chk_decomposition():
        xi_r = random_scalar(dom, rng, max_mode=4)
        state["xi_r"] = xi_r
        dec = mode_decomposition(state["u"], xi_r)
        adv = advection_term(state["u"], xi_r)
        rel = abs(adv - dec.total) / max(adv, 1e-300)
        return rel < 1e-10, f"relative {rel:.2e}"

    def chk_roll():
        dom_r = build_domain(2.0 * np.pi, 8, 65)
        ur, xr = build_roll(RollParams(delta=0.2, l=0.25), dom_r)
        dec_r = mode_decomposition(ur, xr)
        q_rel = max(dec_r.q_terms.values(), default=0.0) / max(dec_r.total, 1e-300)
        flux_err = abs(pair(ur.w, xr) - 1.0)
        ok = q_rel < 1e-12 and flux_err < 1e-12
        return ok, f"max Q ratio {q_rel:.2e}, flux error {flux_err:.2e}"

    def chk_branching():
        dom_b = suggest_branching_domain(1e-4)
        ub, xb, pb = build_branching(1e-4, dom_b)
        state["branching"] = (ub, xb, pb)
        dec_b = mode_decomposition(ub, xb)
        state["dec_b"] = dec_b
        sums, diffs = predicted_interaction_modes(pb)
        if sums & diffs:
            return False, "interaction sets overlap"
        allowed = sums | diffs
        stray = max((v for m, v in dec_b.q_terms.items() if m not in allowed),
                    default=0.0) / dec_b.total
        return stray < 1e-4, f"stray Q/total {stray:.2e} (interpolation cross-talk)"

    def chk_kernel_l1():
        worst = 0.0
        for _ in range(20):
            k = rng.choice([0.0, dom.wavenumber(int(rng.integers(1, 30)))])
            a0 = rng.uniform(0, 0.8)
            lhs, rhs = kernel_l1_bound_check(k, [(a0, a0 + rng.uniform(0.01, 1 - a0))])
            if rhs > 0:
                worst = max(worst, lhs / rhs)
        return worst <= 1.0 + 1e-9, f"max lhs/rhs {worst:.3f}"

    def chk_lingrowth():
        worst = 0.0
        for _ in range(20):
            wf = random_scalar(dom, rng, max_mode=3)
            tf = random_scalar(dom, rng, max_mode=3)
            ratio, cap = check_lingrowth(wf, tf)
            worst = max(worst, ratio / cap)
        return worst <= 1.0, f"max ratio/4 {worst:.3f}"

    def chk_howard_gap():
        ub, xb, pb = state["branching"]
        eff = efficiency_enstrophy(ub, xb, 1e-4, pb)
        hv = howard_value(ub, xb, 1e-4)
        gap_q = sum(state["dec_b"].q_terms.values())
        rel = abs(eff.total_E - hv - gap_q) / max(eff.total_E, 1e-300)
        return rel < 1e-10, f"relative {rel:.2e}"

    def chk_rescaling():
        adv1 = advection_term(state["u"], state["xi_r"])
        adv2 = advection_term(3.0 * state["u"], state["xi_r"] * (1.0 / 3.0))
        rel = abs(adv1 - adv2) / max(adv1, 1e-300)
        return rel < 1e-12, f"relative {rel:.2e}"

    checks = [
        ("hermitian_symmetry", chk_hermitian),
        ("divergence_free", chk_divergence),
        ("quadrature_exactness", chk_quadrature),
        ("strong_duality", chk_duality),
        ("orthogonality", chk_orthogonality),
        ("nu_identity", chk_nu_identity),
        ("theta_decomposition", chk_theta_split),
        ("advection_antisymmetry", chk_antisymmetry),
        ("duality_sandwich", chk_sandwich),
        ("decomposition_identity", chk_decomposition),
        ("roll_exactness", chk_roll),
        ("branching_support", chk_branching),
        ("kernel_l1_bounds", chk_kernel_l1),
        ("linear_growth_ratio", chk_lingrowth),
        ("howard_gap_identity", chk_howard_gap),
        ("advection_rescaling", chk_rescaling),
    ]
    for name, fn in checks:
        try:
            ok, detail = fn()
        except Exception as exc:
            ok, detail = False, f"exception: {exc}"
        yield name, ok, detail


def _cmd_validate(args) -> int:
    failures = []
    for name, ok, detail in _invariant_suite(args.seed):
        print(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")
        if not ok:
            failures.append(name)
    if failures:
        print(f"invariant failure: {', '.join(failures)}")
        return 4
    print("all invariants hold")
    return 0


# -- argument wiring --------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="JSON (or TOML on 3.11+) config file; flags win")
    p.add_argument("--lx", type=float, default=2.0 * np.pi, help="horizontal period")
    p.add_argument("--modes", type=int, default=0, help="mode cutoff M (0 = auto)")
    p.add_argument("--nz", type=int, default=0, help="z nodes (0 = auto)")
    p.add_argument("--tol", type=float, default=1e-10, help="solver tolerance")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized checks")
    p.add_argument("--out", default=None, help="output path (default: stdout/sweep.csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wall2wall",
        description="Steady wall-to-wall heat transport: designs, transport, bounds.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("evaluate", help="evaluate one design, write a JSON report")
    p_eval.add_argument("--design", choices=["roll", "branching", "file"], required=True)
    p_eval.add_argument("--epsilon", type=float, default=None)
    p_eval.add_argument("--pe", type=float, default=None)
    p_eval.add_argument("--field", help="streamfunction JSON (design=file)")
    p_eval.add_argument("--constraint", choices=["energy", "enstrophy"], default=None)
    _add_common(p_eval)
    p_eval.set_defaults(func=_cmd_evaluate)

    p_sweep = sub.add_parser("sweep", help="sweep a log grid, write CSV + fits")
    p_sweep.add_argument("--design", choices=["roll", "branching"], required=True)
    p_sweep.add_argument("--epsilon", default=None, help="value or lo..hi")
    p_sweep.add_argument("--pe", default=None, help="value or lo..hi")
    p_sweep.add_argument("--points", type=int, default=5)
    p_sweep.add_argument("--constraint", choices=["energy", "enstrophy"], default=None)
    p_sweep.add_argument("--jobs", type=int, default=1, help="worker processes")
    _add_common(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)

    p_fit = sub.add_parser("fit", help="fit a power law to an existing CSV")
    p_fit.add_argument("--in", dest="infile", required=True)
    p_fit.add_argument("--x", default="pe")
    p_fit.add_argument("--y", default="nu_direct")
    p_fit.add_argument("--out", default=None)
    p_fit.set_defaults(func=_cmd_fit)

    p_val = sub.add_parser("validate", help="run the invariant suite")
    p_val.add_argument("--seed", type=int, default=0)
    p_val.set_defaults(func=_cmd_validate)

    p_bound = sub.add_parser("bound", help="emit bound certificates as JSON")
    p_bound.add_argument("--design", choices=["roll", "branching"], required=True)
    p_bound.add_argument("--epsilon", type=float, default=None)
    p_bound.add_argument("--pe", type=float, default=None)
    p_bound.add_argument("--constraint", choices=["energy", "enstrophy"], default=None)
    _add_common(p_bound)
    p_bound.set_defaults(func=_cmd_bound)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        args = _apply_config(args, parser)
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
