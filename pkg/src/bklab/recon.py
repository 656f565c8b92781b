"""Stationary-phase recovery of the potential on a z0 lattice (interior
quadrature, boundary-integral, and two-potential pairing forms) and the
log-stability experiment that drives the boundary-data distance through
the tau-selection rule tau = ln(1/d) / (2 B).

The boundary form uses the identity dbar u = -(1/4) e^{-i tau
(zbar-z0bar)^2} G, with G the inner transform stored by the fixed point;
the oscillating phases then cancel against the reconstruction weight and
the boundary integral reduces to (tau/pi) int conj(eta) G dsigma.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .boundary import FamilySpec, cauchy_distance, interp_bilinear, w12_norm
from .bukhgeim import assemble_u, solve_f
from .errors import BklabError, FixedPointDivergenceError
from .grid import DomainSpec, Grid, PhaseParams
from .lorentz import LorentzIndex, lorentz_norm
from .stationary import smooth
from .util import fit_loglog, parallel_map

__all__ = [
    "ReconstructionResult", "StabilityRecord", "StabilityConfig",
    "make_z0_lattice", "bump_field", "reconstruct_interior",
    "reconstruct_boundary", "reconstruct_pairing", "stability_experiment",
    "calibrate_exponential_rate",
]

_WEAK = LorentzIndex(2.0, np.inf, normed=True)


def bump_field(grid: Grid, center: complex, width: float,
               amplitude: complex) -> np.ndarray:
    """Gaussian bump amplitude * exp(-|z - center|^2 / width^2)."""
    return amplitude * np.exp(-(np.abs(grid.Z - center) / width) ** 2)


def make_z0_lattice(domain: DomainSpec, n: int, margin: float | None = None) -> np.ndarray:
    """n x n candidate points spanning the admissible region's bounding
    box, snapped to cell centers, keeping those at least `margin`
    (default 5h) inside the boundary."""
    grid = domain.grid
    if margin is None:
        margin = 5 * grid.h
    ok = domain.interior_mask(margin)
    if not ok.any():
        raise BklabError("no cells satisfy the interior margin")
    zs = grid.Z[ok]
    xs = np.linspace(zs.real.min(), zs.real.max(), n + 2)[1:-1] if n > 1 \
        else np.array([0.5 * (zs.real.min() + zs.real.max())])
    ys = np.linspace(zs.imag.min(), zs.imag.max(), n + 2)[1:-1] if n > 1 \
        else np.array([0.5 * (zs.imag.min() + zs.imag.max())])
    pts = []
    for yv in ys:
        for xv in xs:
            ix = int(np.clip(round((xv + grid.L) / grid.h - 0.5), 0, grid.N - 1))
            iy = int(np.clip(round((yv + grid.L) / grid.h - 0.5), 0, grid.N - 1))
            if ok[iy, ix]:
                pts.append(grid.Z[iy, ix])
    seen: dict[complex, None] = {}
    for p in pts:
        seen.setdefault(complex(p))
    return np.array(list(seen), dtype=complex)


@dataclass
class ReconstructionResult:
    form: str                      # interior | boundary | pairing
    tau: float
    z0: np.ndarray
    values: np.ndarray
    ok: np.ndarray                 # False where the fixed point diverged
    truth: np.ndarray | None = None
    baseline: np.ndarray | None = None   # pure-smoothing values at the lattice
    metadata: dict = field(default_factory=dict)

    def errors(self) -> dict:
        if self.truth is None:
            raise BklabError("no ground truth attached")
        d = np.abs(self.values[self.ok] - self.truth[self.ok])
        if d.size == 0:
            raise BklabError("no successful lattice points")
        w = self.metadata.get("lattice_measure", 1.0)
        t = w * np.arange(1, d.size + 1)
        ds = np.sort(d)[::-1]
        fss = np.cumsum(ds * w) / t
        return {
            "sup": float(d.max()),
            "l2": float(np.sqrt((d ** 2).mean())),
            "weak": float((np.sqrt(t) * fss).max()),
        }


def _cell_index(grid: Grid, z: complex) -> tuple[int, int]:
    ix = int(round((z.real + grid.L) / grid.h - 0.5))
    iy = int(round((z.imag + grid.L) / grid.h - 0.5))
    return iy, ix


def _check_lattice(domain: DomainSpec, lattice: np.ndarray):
    ok = domain.interior_mask(5 * domain.grid.h - 1e-12)
    for z in lattice:
        iy, ix = _cell_index(domain.grid, complex(z))
        if not ok[iy, ix]:
            raise BklabError(f"lattice point {z} is not >= 5h inside the boundary")


def _with_baseline(q, tau, grid, lattice):
    sm = smooth(q, tau, grid)
    return np.array([sm[_cell_index(grid, complex(z))] for z in lattice])


def reconstruct_interior(q, tau: float, lattice, grid: Grid,
                         domain: DomainSpec, tol: float = 1e-10) -> ReconstructionResult:
    """q(z0) by the interior quadrature (2 tau/pi) int e^{i tau R} q f dm,
    f the oscillating correction solved per lattice point."""
    lattice = np.asarray(lattice, dtype=complex)
    _check_lattice(domain, lattice)
    q = grid.check_field(np.asarray(q, dtype=complex))
    m = domain.mask
    h2 = grid.cell_measure

    def one(z0):
        params = PhaseParams(tau, complex(z0))
        try:
            sol = solve_f(q, params, domain, "holomorphic", tol=tol)
        except FixedPointDivergenceError:
            return (np.nan + 0j, False)
        P = params.weight(grid, +1)
        val = (2 * tau / np.pi) * complex((P[m] * q[m] * sol.f[m]).sum() * h2)
        return (val, True)

    out = parallel_map(one, list(lattice))
    values = np.array([v for v, _ in out])
    okv = np.array([o for _, o in out])
    truth = np.array([q[_cell_index(grid, complex(z))] for z in lattice])
    return ReconstructionResult(
        "interior", tau, lattice, values, okv, truth,
        _with_baseline(q, tau, grid, lattice),
        {"lattice_measure": domain.measure / max(1, lattice.size)})


def reconstruct_boundary(q, tau: float, lattice, grid: Grid,
                         domain: DomainSpec, tol: float = 1e-10) -> ReconstructionResult:
    """q(z0) from boundary data of the oscillating solution: the phase-
    cancelled form (tau/pi) int conj(eta) G dsigma with G the inner
    transform interpolated at the quadrature nodes."""
    lattice = np.asarray(lattice, dtype=complex)
    _check_lattice(domain, lattice)
    q = grid.check_field(np.asarray(q, dtype=complex))

    def one(z0):
        params = PhaseParams(tau, complex(z0))
        try:
            sol = solve_f(q, params, domain, "holomorphic", tol=tol)
        except FixedPointDivergenceError:
            return (np.nan + 0j, False)
        Gb = interp_bilinear(grid, sol.inner_transform, domain.nodes)
        val = (tau / np.pi) * complex(
            np.sum(np.conj(domain.normals) * Gb * domain.weights))
        return (val, True)

    out = parallel_map(one, list(lattice))
    values = np.array([v for v, _ in out])
    okv = np.array([o for _, o in out])
    truth = np.array([q[_cell_index(grid, complex(z))] for z in lattice])
    return ReconstructionResult(
        "boundary", tau, lattice, values, okv, truth,
        _with_baseline(q, tau, grid, lattice),
        {"lattice_measure": domain.measure / max(1, lattice.size)})


def reconstruct_pairing(q1, q2, tau: float, lattice, grid: Grid,
                        domain: DomainSpec, tol: float = 1e-10) -> ReconstructionResult:
    """(q1 - q2)(z0) from the two-solution pairing
    (2 tau/pi) int u1 (q1 - q2) u2 dm with opposite phase types."""
    lattice = np.asarray(lattice, dtype=complex)
    _check_lattice(domain, lattice)
    q1 = grid.check_field(np.asarray(q1, dtype=complex))
    q2 = grid.check_field(np.asarray(q2, dtype=complex))
    dq = q1 - q2
    m = domain.mask
    h2 = grid.cell_measure

    def one(z0):
        params = PhaseParams(tau, complex(z0))
        try:
            s1 = solve_f(q1, params, domain, "holomorphic", tol=tol)
            s2 = solve_f(q2, params, domain, "antiholomorphic", tol=tol)
        except FixedPointDivergenceError:
            return (np.nan + 0j, False)
        u1, u2 = assemble_u(s1), assemble_u(s2)
        val = (2 * tau / np.pi) * complex((u1[m] * dq[m] * u2[m]).sum() * h2)
        return (val, True)

    out = parallel_map(one, list(lattice))
    values = np.array([v for v, _ in out])
    okv = np.array([o for _, o in out])
    truth = np.array([dq[_cell_index(grid, complex(z))] for z in lattice])
    return ReconstructionResult(
        "pairing", tau, lattice, values, okv, truth,
        _with_baseline(dq, tau, grid, lattice),
        {"lattice_measure": domain.measure / max(1, lattice.size)})


# ---------------------------------------------------------------------------
# stability experiment

@dataclass(frozen=True)
class StabilityConfig:
    lattice_n: int = 3
    family_taus: tuple = (8.0, 16.0, 32.0)
    fd_modes: int = 8
    smoothness: float = 0.25
    norm_bound: float = 10.0          # admissibility cap for the potentials
    b_omega: float | None = None      # None: calibrate from the u-norm growth
    tau_min: float = 2.0
    recon_lattice_n: int = 3


@dataclass
class StabilityRecord:
    dq_weak: float          # ||q1 - q2||_{(2,infty)(Omega)}
    d_hat: float
    bound_value: float      # (ln 1/d_hat)^{-s/4}
    tau: float
    pairing_l2: float | None
    excluded: bool
    reason: str = ""


def calibrate_exponential_rate(domain: DomainSpec, taus=(2.0, 4.0, 8.0, 16.0)) -> float:
    """Growth rate C in ||u||_{BC(W^{1,2})} <= e^{C tau}: fitted slope of
    ln sup_{z0} ||e^{i tau (z-z0)^2}||_{W^{1,2}} against tau."""
    grid = domain.grid
    z0s = make_z0_lattice(domain, 3, margin=2 * grid.h)
    vals = []
    for tau in taus:
        best = 0.0
        for z0 in z0s:
            u = np.exp(1j * tau * (grid.Z - z0) ** 2)
            best = max(best, w12_norm(domain.restrict(u), domain))
        vals.append(best)
    lt = np.asarray(taus, dtype=float)
    ly = np.log(np.asarray(vals))
    A = np.vstack([lt, np.ones_like(lt)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    return float(max(coef[0], 1e-3))


def stability_experiment(pairs, domain: DomainSpec,
                         config: StabilityConfig = StabilityConfig()) -> list[StabilityRecord]:
    """For each potential pair: measure the boundary-data distance proxy,
    choose tau = ln(1/d)/2B clamped to the admissible window, run the
    pairing reconstruction, and record both sides of the stability trend.
    Pairs with identical potentials are excluded from the records."""
    grid = domain.grid
    s = config.smoothness
    if config.b_omega is None:
        B = 1.0 + 2.0 * calibrate_exponential_rate(domain)
    else:
        B = config.b_omega
    guard = grid.aliasing_guard()
    lattice = make_z0_lattice(domain, config.lattice_n)
    fam = FamilySpec(tuple(lattice), tuple(config.family_taus),
                     fd_modes=config.fd_modes)
    records = []
    for q1, q2 in pairs:
        q1 = grid.check_field(np.asarray(q1, dtype=complex))
        q2 = grid.check_field(np.asarray(q2, dtype=complex))
        for q in (q1, q2):
            nq = lorentz_norm(q, LorentzIndex(2.0, 1.0), domain=domain)
            if nq > config.norm_bound:
                raise BklabError(f"potential norm {nq:.3g} exceeds the configured "
                                 f"bound {config.norm_bound}")
        dq_weak = lorentz_norm(q1 - q2, _WEAK, domain=domain)
        rep = cauchy_distance(q1, q2, domain, fam)
        d_hat = rep.d_hat
        if d_hat <= 0.0:
            records.append(StabilityRecord(dq_weak, d_hat, math.nan, math.nan,
                                           None, True, "identical boundary data"))
            continue
        if d_hat >= 1.0:
            records.append(StabilityRecord(dq_weak, d_hat, math.nan, math.nan,
                                           None, True, "d_hat >= 1"))
            continue
        tau = math.log(1.0 / d_hat) / (2.0 * B)
        tau = float(np.clip(tau, config.tau_min, 0.98 * guard))
        rl = make_z0_lattice(domain, config.recon_lattice_n)
        try:
            rec = reconstruct_pairing(q1, q2, tau, rl, grid, domain)
            pairing_l2 = rec.errors()["l2"]
        except FixedPointDivergenceError:
            pairing_l2 = None
        bound = math.log(1.0 / d_hat) ** (-s / 4.0)
        records.append(StabilityRecord(dq_weak, d_hat, bound, tau,
                                       pairing_l2, False))
    return records


def spearman_rank(x, y) -> float:
    from scipy.stats import spearmanr
    rho = spearmanr(np.asarray(x), np.asarray(y)).statistic
    return float(rho)


def stability_trend(records: list[StabilityRecord]) -> float:
    rows = [(r.dq_weak, r.bound_value) for r in records if not r.excluded]
    if len(rows) < 3:
        raise BklabError("need at least 3 usable records for a trend")
    return spearman_rank([r[0] for r in rows], [r[1] for r in rows])


def decay_slope(taus, values) -> float:
    return fit_loglog(taus, values).slope
