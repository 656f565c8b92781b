"""Command line interface.

Subcommands: lorentz-norm, cauchy-selftest, stationary-phase,
carleman-sweep, bukhgeim, cauchy-distance, reconstruct, stability.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
Errors are emitted as a JSON object on stderr.  Sweeps write a CSV (the
authoritative artifact) and an SVG log-log plot encoding the same sample
values.  BKLAB_THREADS caps parallelism (0 = auto).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import recon, svgplot
from .boundary import FamilySpec, cauchy_distance
from .bukhgeim import assemble_u, carleman_sweep, solve_f
from .cauchy import cauchy, wirtinger
from .errors import BklabError, NumericalError
from .grid import (DomainSpec, Grid, PhaseParams, load_domain, load_field,
                   make_domain, make_grid, save_field)
from .lorentz import LorentzIndex, bessel_norm, lorentz_norm
from .stationary import smooth
from .util import fit_loglog


def _fmt(x) -> str:
    """Shortest round-trip decimal; deterministic across runs and thread
    counts.  Numpy scalars are cast so their verbose reprs never leak."""
    if isinstance(x, complex) and not isinstance(x, float):
        sign = "+" if x.imag >= 0 else "-"
        return f"{float(x.real)!r}{sign}{abs(float(x.imag))!r}j"
    if isinstance(x, float):
        return repr(float(x))
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _parse_taus(spec: str) -> list[float]:
    """'4:256' = geometric sweep with ratio 2; otherwise comma list."""
    if ":" in spec:
        lo, hi = (float(s) for s in spec.split(":", 1))
        out = []
        t = lo
        while t <= hi * (1 + 1e-12):
            out.append(t)
            t *= 2.0
        return out
    return [float(s) for s in spec.split(",") if s]


def _parse_z0(spec: str) -> complex:
    x, y = (float(s) for s in spec.split(","))
    return complex(x, y)


def _load_domain_arg(path) -> DomainSpec:
    return load_domain(path)


def _ensure_outdir(ns) -> str:
    out = getattr(ns, "out_dir", ".") or "."
    os.makedirs(out, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands

def cmd_lorentz_norm(ns) -> int:
    field, grid = load_field(ns.field)
    idx = LorentzIndex(ns.p, math.inf if ns.q in ("inf", "Inf") else float(ns.q),
                       normed=not ns.seminormed)
    domain = _load_domain_arg(ns.domain) if ns.domain else None
    if ns.s is not None:
        val = bessel_norm(field, ns.s, idx, grid, domain)
    else:
        val = lorentz_norm(field, idx, domain=domain, grid=grid)
    print(f"{val:.12g}")
    return 0


def cmd_cauchy_selftest(ns) -> int:
    out = _ensure_outdir(ns)
    rows = []
    for N in (64, 128, 256) if ns.n == 0 else (ns.n,):
        grid = make_grid(1.5, N)
        ball = np.abs(grid.Z) < 1.0
        g = cauchy(ball.astype(complex), grid=grid)
        exact = np.where(ball, np.conj(grid.Z), 1.0 / grid.Z)
        chi_err = float(np.abs(g - exact).max())
        r2 = np.abs(grid.Z) ** 2
        phi = np.where(r2 < 1.0, np.exp(-1.0 / np.maximum(1e-300, 1.0 - r2)), 0.0)
        dg = wirtinger(cauchy(phi.astype(complex), grid=grid), "dbar", grid,
                       method="fd")
        inv_err = float(np.abs(dg - phi)[3:-3, 3:-3].max())
        rows.append((N, chi_err, 10 * grid.h * math.log(1 / grid.h), inv_err))
    _write_csv(os.path.join(out, "cauchy_selftest.csv"),
               ["n", "chi_ball_sup_err", "bound_10hlog", "inverse_sup_err"], rows)
    for row in rows:
        print(f"N={row[0]}: chi_ball={row[1]:.3e} (bound {row[2]:.3e}) "
              f"inverse={row[3]:.3e}")
    return 0


def cmd_stationary_phase(ns) -> int:
    out = _ensure_outdir(ns)
    field, grid = load_field(ns.field)
    taus = _parse_taus(f"{ns.tau_min}:{ns.tau_max}")
    h2 = grid.cell_measure
    hnorm = math.sqrt(3 * math.pi / 2) if ns.norm is None else ns.norm
    rows = []
    for tau in taus:
        sm = smooth(field, tau, grid)
        err = float(np.sqrt((np.abs(field - sm) ** 2).sum() * h2))
        bound = 2.0 * tau ** (-ns.s / 2.0) * hnorm
        rows.append((tau, err, bound))
    _write_csv(os.path.join(out, "stationary_phase.csv"),
               ["tau", "error", "bound"], rows)
    fit = fit_loglog(taus, [r[1] for r in rows])
    svg = svgplot.loglog_svg(taus, {"error": [r[1] for r in rows],
                                    "bound": [r[2] for r in rows]},
                             "smoothing error vs tau", "tau", "L2 error",
                             {"error": f"slope {fit.slope:.3f}"})
    with open(os.path.join(out, "stationary_phase.svg"), "w") as f:
        f.write(svg)
    print(f"slope {fit.slope:.4f} over {len(taus)} taus")
    return 0


def cmd_carleman_sweep(ns) -> int:
    out = _ensure_outdir(ns)
    domain = _load_domain_arg(ns.domain)
    grid = domain.grid
    if ns.a == "one":
        a = np.ones((grid.N, grid.N), dtype=complex)
    else:
        a, agrid = load_field(ns.a)
        if (agrid.N, agrid.L) != (grid.N, grid.L):
            raise BklabError("field grid does not match the domain grid")
    rec = carleman_sweep(a, _parse_taus(ns.tau), domain, _parse_z0(ns.z0),
                         mode=ns.mode)
    if rec.insufficient:
        print("insufficient tau samples for a slope fit")
    rows = []
    for i, tau in enumerate(rec.taus):
        ref = rec.values["weak"][0] * (tau / rec.taus[0]) ** -1 \
            * (1 + math.log(tau)) / (1 + math.log(rec.taus[0]))
        rows.append((tau, rec.values["weak"][i], rec.values["sup"][i], ref))
    _write_csv(os.path.join(out, "carleman_sweep.csv"),
               ["tau", "norm_l2weak", "norm_sup", "bound"], rows)
    ann = {}
    if not rec.insufficient:
        ann = {"norm_l2weak": f"slope {rec.slopes['weak'].slope:.3f}",
               "norm_sup": f"slope {rec.slopes['sup'].slope:.3f}"}
    svg = svgplot.loglog_svg(list(rec.taus),
                             {"norm_l2weak": list(rec.values["weak"]),
                              "norm_sup": list(rec.values["sup"]),
                              "bound": [r[3] for r in rows]},
                             "weighted-transform decay", "tau", "norm", ann)
    with open(os.path.join(out, "carleman_sweep.svg"), "w") as f:
        f.write(svg)
    for t in rec.skipped:
        print(f"skipped tau={t:g}: aliasing guard")
    if not rec.insufficient:
        print(f"weak slope {rec.slopes['weak'].slope:.4f}, "
              f"sup slope {rec.slopes['sup'].slope:.4f}")
    return 0


def cmd_bukhgeim(ns) -> int:
    out = _ensure_outdir(ns)
    q, grid = load_field(ns.q)
    domain = _load_domain_arg(ns.domain)
    if (domain.grid.N, domain.grid.L) != (grid.N, grid.L):
        raise BklabError("field grid does not match the domain grid")
    params = PhaseParams(ns.tau, _parse_z0(ns.z0))
    phase = "antiholomorphic" if ns.phase == "anti" else "holomorphic"
    sol = solve_f(q, params, domain, phase, tol=ns.tol)
    save_field(os.path.join(out, "f.bkfld"), sol.f, grid)
    save_field(os.path.join(out, "u.bkfld"), assemble_u(sol), grid)
    diag = {
        "tau": ns.tau, "z0": [params.z0.real, params.z0.imag],
        "phase_type": phase, "iterations": sol.iterations,
        "final_update": sol.final_update, "defect": sol.defect,
        "sup_f": sol.sup_f, "contraction": sol.contraction,
        "converged": sol.converged,
    }
    with open(os.path.join(out, "bukhgeim.json"), "w") as f:
        json.dump(diag, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"converged in {sol.iterations} iterations, defect {sol.defect:.3e}")
    return 0


def cmd_cauchy_distance(ns) -> int:
    out = _ensure_outdir(ns)
    q1, grid = load_field(ns.q1)
    q2, grid2 = load_field(ns.q2)
    if (grid2.N, grid2.L) != (grid.N, grid.L):
        raise BklabError("q1 and q2 live on different grids")
    domain = _load_domain_arg(ns.domain)
    nx, ny = (int(s) for s in ns.z0_grid.split("x"))
    lattice = recon.make_z0_lattice(domain, max(nx, ny))
    fam = FamilySpec(tuple(lattice), tuple(_parse_taus(ns.taus)),
                     fd_modes=ns.fd_modes)
    rep = cauchy_distance(q1, q2, domain, fam)
    doc = {
        "d_hat": rep.d_hat,
        "family": rep.family,
        "pairs": [
            {k: ([v.real, v.imag] if isinstance(v, complex) else v)
             for k, v in p.items()} for p in rep.pairs],
        "skipped": [
            {k: ([v.real, v.imag] if isinstance(v, complex) else v)
             for k, v in p.items()} for p in rep.skipped],
    }
    with open(os.path.join(out, "cauchy_distance.json"), "w") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"d_hat = {rep.d_hat:.6e} over {len(rep.pairs)} pairs "
          f"({len(rep.skipped)} skipped)")
    return 0


def cmd_reconstruct(ns) -> int:
    out = _ensure_outdir(ns)
    q, grid = load_field(ns.q)
    domain = _load_domain_arg(ns.domain)
    if (domain.grid.N, domain.grid.L) != (grid.N, grid.L):
        raise BklabError("field grid does not match the domain grid")
    taus = _parse_taus(ns.tau)
    lattice = recon.make_z0_lattice(domain, ns.lattice)
    forms = ("interior", "boundary") if ns.form == "both" else (ns.form,)
    metrics: dict = {"taus": taus, "forms": list(forms), "errors": {}}
    sweep_err: dict = {f: [] for f in forms}
    for form in forms:
        fn = recon.reconstruct_interior if form == "interior" else recon.reconstruct_boundary
        for tau in taus:
            res = fn(q, tau, lattice, grid, domain)
            errs = res.errors()
            metrics["errors"].setdefault(form, {})[repr(tau)] = errs
            sweep_err[form].append(errs["sup"])
            if tau == taus[-1]:
                fld = np.zeros((grid.N, grid.N), dtype=complex)
                for z, v in zip(res.z0, res.values):
                    iy, ix = recon._cell_index(grid, complex(z))
                    fld[iy, ix] = v
                save_field(os.path.join(out, f"recon_{form}.bkfld"), fld, grid)
    with open(os.path.join(out, "recon_metrics.json"), "w") as f:
        json.dump(metrics, f, indent=2, sort_keys=True)
        f.write("\n")
    rows = [(tau, *(sweep_err[f][i] for f in forms)) for i, tau in enumerate(taus)]
    _write_csv(os.path.join(out, "recon_sweep.csv"),
               ["tau", *(f"sup_err_{f}" for f in forms)], rows)
    if len(taus) >= 2:
        svg = svgplot.loglog_svg(taus, {f: sweep_err[f] for f in forms},
                                 "reconstruction error vs tau", "tau", "sup error")
        with open(os.path.join(out, "recon_sweep.svg"), "w") as f:
            f.write(svg)
    for form in forms:
        print(f"{form}: sup errors {['%.3e' % e for e in sweep_err[form]]}")
    return 0


_STAB_KEYS = {"version", "domain", "pairs", "s", "lattice_n", "family_taus",
              "fd_modes", "tau_min", "recon_lattice_n", "norm_bound", "b_omega"}


def _field_from_spec(spec: dict, grid: Grid, domain: DomainSpec) -> np.ndarray:
    kind = spec.get("type")
    if kind == "bump":
        f = recon.bump_field(grid, complex(*spec["center"]), float(spec["width"]),
                             complex(spec["amplitude"]))
        return domain.restrict(f)
    if kind == "field":
        f, g = load_field(spec["path"])
        if (g.N, g.L) != (grid.N, grid.L):
            raise BklabError("potential grid does not match the domain grid")
        return f
    raise BklabError(f"unknown potential spec type {kind!r}")


def cmd_stability(ns) -> int:
    out = _ensure_outdir(ns)
    with open(ns.config) as f:
        cfg = json.load(f)
    extra = set(cfg) - _STAB_KEYS
    if extra:
        raise BklabError(f"unknown config keys {sorted(extra)}")
    if cfg.get("version") != 1:
        raise BklabError(f"unsupported config version {cfg.get('version')!r}")
    gspec = cfg["domain"]
    grid = make_grid(float(gspec["L"]), int(gspec["N"]))
    domain = make_domain(grid, gspec["shape"])
    pairs = [(_field_from_spec(p["q1"], grid, domain),
              _field_from_spec(p["q2"], grid, domain)) for p in cfg["pairs"]]
    sc = recon.StabilityConfig(
        lattice_n=cfg.get("lattice_n", 3),
        family_taus=tuple(cfg.get("family_taus", (8.0, 16.0, 32.0))),
        fd_modes=cfg.get("fd_modes", 8),
        smoothness=cfg.get("s", 0.25),
        norm_bound=cfg.get("norm_bound", 10.0),
        b_omega=cfg.get("b_omega"),
        tau_min=cfg.get("tau_min", 2.0),
        recon_lattice_n=cfg.get("recon_lattice_n", 3))
    records = recon.stability_experiment(pairs, domain, sc)
    rows = [(i, r.dq_weak, r.d_hat, r.bound_value, r.tau,
             r.pairing_l2 if r.pairing_l2 is not None else math.nan,
             int(r.excluded)) for i, r in enumerate(records)]
    _write_csv(os.path.join(out, "stability.csv"),
               ["pair", "dq_weak", "d_hat", "bound_value", "tau",
                "pairing_l2", "excluded"], rows)
    used = [r for r in records if not r.excluded]
    if len(used) >= 3:
        rho = recon.spearman_rank([r.dq_weak for r in used],
                                  [r.bound_value for r in used])
        svg = svgplot.loglog_svg([r.bound_value for r in used],
                                 {"dq_weak": [r.dq_weak for r in used]},
                                 "stability trend", "(ln 1/d)^(-s/4)",
                                 "||q1-q2|| weak",
                                 {"dq_weak": f"spearman {rho:.3f}"})
        with open(os.path.join(out, "stability.svg"), "w") as f:
            f.write(svg)
        print(f"spearman rank correlation: {rho:.4f} over {len(used)} pairs")
    else:
        print("fewer than 3 usable pairs; no trend computed")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bklab", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("lorentz-norm", help="Lorentz / Bessel norm of a field")
    s.add_argument("--field", required=True)
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--q", required=True, help="q index, or 'inf'")
    s.add_argument("--s", type=float, default=None, help="Bessel smoothness")
    s.add_argument("--domain", default=None)
    s.add_argument("--seminormed", action="store_true")
    s.set_defaults(fn=cmd_lorentz_norm)

    s = sub.add_parser("cauchy-selftest", help="closed-form transform checks")
    s.add_argument("--n", type=int, default=0, help="grid size (0 = 64,128,256)")
    s.add_argument("--out-dir", default=".")
    s.set_defaults(fn=cmd_cauchy_selftest)

    s = sub.add_parser("stationary-phase", help="smoothing error sweep")
    s.add_argument("--field", required=True)
    s.add_argument("--s", type=float, default=1.0)
    s.add_argument("--tau-min", type=float, default=4.0)
    s.add_argument("--tau-max", type=float, default=256.0)
    s.add_argument("--norm", type=float, default=None,
                   help="H^{s,2} norm of the field (default: the reference Gaussian's)")
    s.add_argument("--out-dir", default=".")
    s.set_defaults(fn=cmd_stationary_phase)

    s = sub.add_parser("carleman-sweep", help="weighted-transform decay rates")
    s.add_argument("--domain", required=True)
    s.add_argument("--a", default="one", help="'one' or a field file")
    s.add_argument("--tau", default="4:256")
    s.add_argument("--z0", default="0.1,0.07")
    s.add_argument("--mode", choices=("field", "operator"), default="field")
    s.add_argument("--out-dir", default=".")
    s.set_defaults(fn=cmd_carleman_sweep)

    s = sub.add_parser("bukhgeim", help="solve the oscillating fixed point")
    s.add_argument("--q", required=True)
    s.add_argument("--domain", required=True)
    s.add_argument("--tau", type=float, required=True)
    s.add_argument("--z0", required=True)
    s.add_argument("--phase", choices=("holo", "anti"), default="holo")
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--out-dir", default=".")
    s.set_defaults(fn=cmd_bukhgeim)

    s = sub.add_parser("cauchy-distance", help="boundary-data distance proxy")
    s.add_argument("--q1", required=True)
    s.add_argument("--q2", required=True)
    s.add_argument("--domain", required=True)
    s.add_argument("--z0-grid", default="3x3")
    s.add_argument("--taus", default="8,16,32")
    s.add_argument("--fd-modes", type=int, default=8)
    s.add_argument("--out-dir", default=".")
    s.set_defaults(fn=cmd_cauchy_distance)

    s = sub.add_parser("reconstruct", help="recover the potential on a lattice")
    s.add_argument("--q", required=True)
    s.add_argument("--domain", required=True)
    s.add_argument("--tau", default="32")
    s.add_argument("--form", choices=("interior", "boundary", "both"), default="both")
    s.add_argument("--lattice", type=int, default=3)
    s.add_argument("--out-dir", default=".")
    s.set_defaults(fn=cmd_reconstruct)

    s = sub.add_parser("stability", help="log-stability trend experiment")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", default=".")
    s.set_defaults(fn=cmd_stability)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else 0
    try:
        return ns.fn(ns)
    except (BklabError, FileNotFoundError, KeyError, json.JSONDecodeError) as e:
        json.dump({"error": {"type": type(e).__name__, "message": str(e)}},
                  sys.stderr)
        sys.stderr.write("\n")
        return 2
    except NumericalError as e:
        json.dump({"error": {"type": type(e).__name__, "message": str(e)}},
                  sys.stderr)
        sys.stderr.write("\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
