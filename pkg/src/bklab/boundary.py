"""Forward Dirichlet solver for Delta U + q U = 0, the Dirichlet-Neumann
pairing, the Alessandrini identity check, and the Cauchy-data distance
proxy built from oscillating-solution pairs and trigonometric traces.

The solver is a Shortley-Weller five-point scheme: at cells whose stencil
crosses the boundary, the arms are cut at the exact shape intersection
and the Dirichlet datum enters through the cut point, which keeps the
scheme second order on disks and grid-aligned polygons.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bukhgeim import assemble_u, solve_f
from .errors import BklabError, DomainError, FixedPointDivergenceError, SingularSystemError
from .grid import Disk, DomainSpec, PhaseParams, Polygon
from .util import masked_gradient, parallel_map

__all__ = [
    "DirichletProblem", "DirichletSolver", "forward_solve", "w12_norm",
    "dn_pairing", "alessandrini_check", "AlessandriniReport",
    "FamilySpec", "CauchyDistanceReport", "cauchy_distance",
    "boundary_mode", "dn_norm_over_family",
]

_THETA_FLOOR = 1e-3


def _arm_cut(shape, zc: complex, ex: int, ey: int, h: float) -> float:
    """Distance (in units of h, in (0, 1]) from the masked cell center zc
    to the boundary along the +/-x or +/-y arm."""
    if isinstance(shape, Disk):
        w = zc - shape.center
        beta = w.real * ex + w.imag * ey
        gam = abs(w) ** 2 - shape.radius ** 2
        t = -beta + np.sqrt(beta * beta - gam)
    elif isinstance(shape, Polygon):
        verts = np.asarray(shape.vertices, dtype=complex)
        a, b = verts, np.roll(verts, -1)
        t = np.inf
        for av, bv in zip(a, b):
            # zc + s*(ex + i ey) = av + r*(bv - av)
            dx, dy = bv.real - av.real, bv.imag - av.imag
            det = ex * (-dy) - ey * (-dx)
            if abs(det) < 1e-300:
                continue
            rx, ry = av.real - zc.real, av.imag - zc.imag
            s = (rx * (-dy) + ry * dx) / det
            r = (ex * ry - ey * rx) / det
            if -1e-12 <= r <= 1 + 1e-12 and 1e-12 < s < t:
                t = s
        if not np.isfinite(t):
            raise DomainError("stencil arm does not cross the polygon boundary")
    else:
        raise DomainError(f"unsupported shape {shape!r}")
    return float(np.clip(t / h, _THETA_FLOOR, 1.0))


class DirichletSolver:
    """Factorized (Delta_h + q) with Dirichlet data on the cut stencil;
    reusable across boundary data for a fixed (domain, q)."""

    def __init__(self, domain: DomainSpec, q):
        grid = domain.grid
        self.domain = domain
        self.q = grid.check_field(np.asarray(q, dtype=complex))
        N, h = grid.N, grid.h
        mask = domain.mask
        idx = -np.ones((N, N), dtype=np.int64)
        cells = np.argwhere(mask)
        idx[mask] = np.arange(len(cells))
        self.n = len(cells)
        self.cells = cells
        self.idx = idx
        nb = {
            "E": np.roll(mask, -1, axis=1), "W": np.roll(mask, 1, axis=1),
            "N": np.roll(mask, -1, axis=0), "S": np.roll(mask, 1, axis=0),
        }
        regular = mask & nb["E"] & nb["W"] & nb["N"] & nb["S"]
        irregular = mask & ~regular
        rows, cols, vals = [], [], []
        kreg = idx[regular]
        for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
            nidx = idx[np.roll(np.roll(regular, -dy, axis=0), -dx, axis=1)]
            rows.append(kreg)
            cols.append(nidx)
            vals.append(np.full(kreg.size, 1.0 / (h * h), dtype=complex))
        rows.append(kreg)
        cols.append(kreg)
        vals.append(-4.0 / (h * h) + self.q[regular])
        # irregular cells: Shortley-Weller cut arms; Dirichlet values enter b
        self._bc_terms: list[tuple[int, complex, complex]] = []  # (row, coeff, z_boundary)
        ir, ic, iv = [], [], []
        for iy, ix in np.argwhere(irregular):
            k = idx[iy, ix]
            zc = grid.Z[iy, ix]
            diag = 0.0 + 0.0j
            arms = {}
            for name, ex, ey, jy, jx in (("E", 1, 0, iy, ix + 1), ("W", -1, 0, iy, ix - 1),
                                         ("N", 0, 1, iy + 1, ix), ("S", 0, -1, iy - 1, ix)):
                if 0 <= jy < N and 0 <= jx < N and mask[jy, jx]:
                    arms[name] = (1.0, idx[jy, jx], None)
                else:
                    t = _arm_cut(domain.shape, zc, ex, ey, h)
                    arms[name] = (t, None, zc + t * h * (ex + 1j * ey))
            for pos, neg in (("E", "W"), ("N", "S")):
                tp, kp, zp = arms[pos]
                tm, km, zm = arms[neg]
                cp = 2.0 / (tp * (tp + tm) * h * h)
                cm = 2.0 / (tm * (tp + tm) * h * h)
                diag -= cp + cm
                if kp is not None:
                    ir.append(k); ic.append(kp); iv.append(cp)
                else:
                    self._bc_terms.append((k, cp, zp))
                if km is not None:
                    ir.append(k); ic.append(km); iv.append(cm)
                else:
                    self._bc_terms.append((k, cm, zm))
            ir.append(k); ic.append(k); iv.append(diag + self.q[iy, ix])
        rows = np.concatenate([np.concatenate(rows), np.asarray(ir, dtype=np.int64)])
        cols = np.concatenate([np.concatenate(cols), np.asarray(ic, dtype=np.int64)])
        vals = np.concatenate([np.concatenate(vals), np.asarray(iv, dtype=complex)])
        self.matrix = sp.csc_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        try:
            self.factor = spla.splu(self.matrix)
        except RuntimeError as e:
            raise SingularSystemError(f"Dirichlet system is singular: {e}") from e
        # conditioning probe: q at (or extremely near) a discrete interior
        # Dirichlet eigenvalue makes the factored system unusable
        inv_op = spla.LinearOperator(
            self.matrix.shape, dtype=complex,
            matvec=lambda b: self.factor.solve(b.astype(complex)),
            rmatvec=lambda b: self.factor.solve(b.astype(complex), trans="H"))
        with np.errstate(all="ignore"):
            inv_norm = float(spla.onenormest(inv_op))
            cond = float(spla.onenormest(self.matrix)) * inv_norm
        if not np.isfinite(cond) or cond > 1e12:
            raise SingularSystemError(
                f"Dirichlet system is numerically singular (cond ~ {cond:.2e}): "
                f"q sits at an interior Dirichlet eigenvalue")

    def solve(self, g) -> "DirichletProblem":
        """Solve with Dirichlet datum g (callable on complex points)."""
        b = np.zeros(self.n, dtype=complex)
        if self._bc_terms:
            krows = np.array([t[0] for t in self._bc_terms])
            coeff = np.array([t[1] for t in self._bc_terms], dtype=complex)
            zb = np.array([t[2] for t in self._bc_terms], dtype=complex)
            np.add.at(b, krows, -coeff * np.asarray(g(zb), dtype=complex))
        U = self.factor.solve(b)
        resid = float(np.abs(self.matrix @ U - b).max())
        scale = float(np.abs(b).max())
        rel = resid / scale if scale > 0 else 0.0
        if not np.all(np.isfinite(U)) or rel > 1e-6:
            raise SingularSystemError(
                f"factorization residual {rel:.3e}: q sits at or near an interior "
                f"Dirichlet eigenvalue")
        grid = self.domain.grid
        Ug = np.zeros((grid.N, grid.N), dtype=complex)
        Ug[self.domain.mask] = U
        return DirichletProblem(self.domain, self.q, g, Ug, rel, self)


@dataclass
class DirichletProblem:
    domain: DomainSpec
    q: np.ndarray
    g: object                   # callable datum
    U: np.ndarray               # solution, zero outside the mask
    residual: float             # factorization residual (relative)
    solver: DirichletSolver = field(repr=False, default=None)


def forward_solve(q, g, domain: DomainSpec) -> DirichletProblem:
    return DirichletSolver(domain, q).solve(g)


def w12_norm(fld: np.ndarray, domain: DomainSpec) -> float:
    """Discrete W^{1,2} norm with the same centered-difference gradient
    the pairing quadrature uses."""
    grid = domain.grid
    fx, fy = masked_gradient(np.asarray(fld, dtype=complex), domain.mask, grid.h)
    m = domain.mask
    s = (np.abs(fld[m]) ** 2 + np.abs(fx[m]) ** 2 + np.abs(fy[m]) ** 2).sum()
    return float(np.sqrt(s * grid.cell_measure))


def _weak_form(U, V, q, domain: DomainSpec) -> complex:
    grid = domain.grid
    Ux, Uy = masked_gradient(U, domain.mask, grid.h)
    Vx, Vy = masked_gradient(V, domain.mask, grid.h)
    m = domain.mask
    val = (-(Ux[m] * Vx[m] + Uy[m] * Vy[m]) + q[m] * U[m] * V[m]).sum()
    return complex(val * grid.cell_measure)


def dn_pairing(P1: DirichletProblem, v) -> complex:
    """(Lambda_q u, v) = int(-grad U . grad V + q U V) dm by midpoint
    quadrature, V being the q-solve lift of v (or another problem's
    solution on the same domain)."""
    if isinstance(v, DirichletProblem):
        if v.domain is not P1.domain:
            raise BklabError("pairing requires problems on the same domain")
        V = v.U
    elif callable(v):
        V = P1.solver.solve(v).U
    else:
        raise BklabError("v must be a DirichletProblem or a trace callable")
    return _weak_form(P1.U, V, P1.q, P1.domain)


@dataclass(frozen=True)
class AlessandriniReport:
    interior: complex
    boundary: complex
    gap: float


def _normal_derivative(P: DirichletProblem) -> np.ndarray:
    """Outward normal derivative at the quadrature nodes: one-sided
    second-order difference through the boundary value and two interior
    samples along the inward normal."""
    domain = P.domain
    grid = domain.grid
    d = 2.0 * grid.h
    g0 = np.asarray(P.g(domain.nodes), dtype=complex)
    u1 = interp_bilinear(grid, P.U, domain.nodes - domain.normals * d)
    u2 = interp_bilinear(grid, P.U, domain.nodes - domain.normals * 2 * d)
    return (3.0 * g0 - 4.0 * u1 + u2) / (2.0 * d)


def interp_bilinear(grid, fld: np.ndarray, pts: np.ndarray) -> np.ndarray:
    gx = (pts.real + grid.L) / grid.h - 0.5
    gy = (pts.imag + grid.L) / grid.h - 0.5
    i0 = np.clip(np.floor(gx).astype(int), 0, grid.N - 2)
    j0 = np.clip(np.floor(gy).astype(int), 0, grid.N - 2)
    fx = np.clip(gx - i0, 0.0, 1.0)
    fy = np.clip(gy - j0, 0.0, 1.0)
    return (fld[j0, i0] * (1 - fx) * (1 - fy) + fld[j0, i0 + 1] * fx * (1 - fy)
            + fld[j0 + 1, i0] * (1 - fx) * fy + fld[j0 + 1, i0 + 1] * fx * fy)


def alessandrini_check(P1: DirichletProblem, P2: DirichletProblem) -> AlessandriniReport:
    """Interior side int U1 (q1 - q2) U2 dm versus the boundary side
    int Tr U1 dnu U2 - Tr U2 dnu U1 dsigma."""
    if P1.domain is not P2.domain:
        raise BklabError("both problems must live on the same domain")
    domain = P1.domain
    grid = domain.grid
    m = domain.mask
    interior = complex((P1.U[m] * (P1.q[m] - P2.q[m]) * P2.U[m]).sum()
                       * grid.cell_measure)
    tr1 = np.asarray(P1.g(domain.nodes), dtype=complex)
    tr2 = np.asarray(P2.g(domain.nodes), dtype=complex)
    dn1 = _normal_derivative(P1)
    dn2 = _normal_derivative(P2)
    boundary = complex(np.sum((tr1 * dn2 - tr2 * dn1) * domain.weights))
    return AlessandriniReport(interior, boundary, abs(interior - boundary))


# ---------------------------------------------------------------------------
# Cauchy-data distance

def save_trace(path, domain: DomainSpec, values) -> None:
    """Trace file: CSV rows `arclength,re,im` at the quadrature nodes."""
    values = np.asarray(values, dtype=complex)
    if values.shape != domain.nodes.shape:
        raise BklabError("trace values must be sampled at the quadrature nodes")
    s = domain.node_arclength()
    with open(path, "w") as f:
        f.write("arclength,re,im\n")
        for si, v in zip(s, values):
            f.write(f"{float(si)!r},{float(v.real)!r},{float(v.imag)!r}\n")


def load_trace(path, domain: DomainSpec):
    """Read an `arclength,re,im` CSV and return a periodic arclength
    interpolant usable as a Dirichlet datum (callable on complex points;
    points are mapped to the nearest boundary node's arclength)."""
    rows = []
    with open(path) as f:
        header = f.readline().strip()
        if header != "arclength,re,im":
            raise BklabError(f"{path}: expected header 'arclength,re,im'")
        for line in f:
            a, re, im = line.strip().split(",")
            rows.append((float(a), float(re), float(im)))
    if not rows:
        raise BklabError(f"{path}: empty trace")
    rows.sort()
    s = np.array([r[0] for r in rows])
    v = np.array([complex(r[1], r[2]) for r in rows])
    per = domain.perimeter
    from scipy.spatial import cKDTree
    tree = cKDTree(np.column_stack([domain.nodes.real, domain.nodes.imag]))
    s_nodes = domain.node_arclength()

    def g(z):
        z = np.asarray(z, dtype=complex)
        _, j = tree.query(np.column_stack([z.ravel().real, z.ravel().imag]))
        sz = s_nodes[j]
        sp = np.concatenate([s - per, s, s + per])
        vp = np.concatenate([v, v, v])
        out = np.interp(sz, sp, vp.real) + 1j * np.interp(sz, sp, vp.imag)
        return out.reshape(z.shape)
    return g


def boundary_mode(domain: DomainSpec, k: int):
    """k-th trigonometric boundary datum as a callable: e^{i k angle} on
    disks, e^{2 pi i k s / perimeter} in nearest-node arclength otherwise."""
    shape = domain.shape
    if isinstance(shape, Disk):
        c = shape.center

        def g(z):
            return np.exp(1j * k * np.angle(np.asarray(z, dtype=complex) - c))
        return g
    from scipy.spatial import cKDTree
    tree = cKDTree(np.column_stack([domain.nodes.real, domain.nodes.imag]))
    s = domain.node_arclength()
    per = domain.perimeter

    def g(z):
        z = np.asarray(z, dtype=complex)
        _, j = tree.query(np.column_stack([z.real, z.imag]))
        return np.exp(2j * np.pi * k * s[j] / per)
    return g


@dataclass(frozen=True)
class FamilySpec:
    """Finite solution family for the distance proxy: oscillating pairs
    over a z0 lattice and tau set, plus optional finite-difference pairs
    with trigonometric data."""

    z0_points: tuple
    taus: tuple
    fd_modes: int = 8
    tol: float = 1e-10
    max_iter: int = 200

    def validate(self):
        if len(self.z0_points) < 9:
            raise BklabError(f"need at least 9 lattice points, got {len(self.z0_points)}")
        if len(self.taus) < 3:
            raise BklabError(f"need at least 3 tau values, got {len(self.taus)}")


@dataclass
class CauchyDistanceReport:
    d_hat: float                 # certified lower bound on the true sup
    pairs: list                  # per-pair records: kind, parameters, value
    skipped: list                # (z0, tau, reason) for diverged solves
    family: dict

    def add(self, rec):
        self.pairs.append(rec)
        self.d_hat = max(self.d_hat, rec["value"])


def cauchy_distance(q1, q2, domain: DomainSpec, family: FamilySpec) -> CauchyDistanceReport:
    """Max over the family of |int U (q1 - q2) V dm| with both solutions
    normalized in discrete W^{1,2}.  A lower bound on the true supremum,
    reported as such."""
    family.validate()
    grid = domain.grid
    q1 = grid.check_field(np.asarray(q1, dtype=complex))
    q2 = grid.check_field(np.asarray(q2, dtype=complex))
    dq = domain.restrict(q1 - q2)
    m = domain.mask
    report = CauchyDistanceReport(0.0, [], [], {
        "z0_points": len(family.z0_points), "taus": list(family.taus),
        "fd_modes": family.fd_modes})

    def one_pair(args):
        z0, tau = args
        params = PhaseParams(tau, z0)
        try:
            s1 = solve_f(q1, params, domain, "holomorphic",
                         tol=family.tol, max_iter=family.max_iter)
            s2 = solve_f(q2, params, domain, "antiholomorphic",
                         tol=family.tol, max_iter=family.max_iter)
        except FixedPointDivergenceError as e:
            return ("skip", z0, tau, str(e))
        u1, u2 = assemble_u(s1), assemble_u(s2)
        n1, n2 = w12_norm(u1, domain), w12_norm(u2, domain)
        val = abs(complex((u1[m] * dq[m] * u2[m]).sum() * grid.cell_measure))
        return ("ok", z0, tau, val / (n1 * n2))

    jobs = [(z0, tau) for z0 in family.z0_points for tau in family.taus]
    for res in parallel_map(one_pair, jobs):
        if res[0] == "ok":
            report.add({"kind": "oscillating", "z0": res[1], "tau": res[2],
                        "value": res[3]})
        else:
            report.skipped.append({"z0": res[1], "tau": res[2], "reason": res[3]})
    if family.fd_modes > 0:
        solver1 = DirichletSolver(domain, q1)
        solver2 = DirichletSolver(domain, q2)
        sols1 = [solver1.solve(boundary_mode(domain, k))
                 for k in range(1, family.fd_modes + 1)]
        sols2 = [solver2.solve(boundary_mode(domain, k))
                 for k in range(1, family.fd_modes + 1)]
        for j, Pj in enumerate(sols1, start=1):
            nj = w12_norm(Pj.U, domain)
            for k, Pk in enumerate(sols2, start=1):
                nk = w12_norm(Pk.U, domain)
                val = abs(complex((Pj.U[m] * dq[m] * Pk.U[m]).sum()
                                  * grid.cell_measure))
                report.add({"kind": "fd", "modes": (j, k),
                            "value": val / (nj * nk)})
    return report


def dn_norm_over_family(q1, q2, domain: DomainSpec, modes: int = 8) -> float:
    """max |((Lambda_1 - Lambda_2) u_j, v_k)| over the trigonometric trace
    family, normalized by quotient-norm surrogates (the smallest W^{1,2}
    norm among the harmonic, q1- and q2-lifts of each trace)."""
    solver0 = DirichletSolver(domain, np.zeros_like(q1))
    solver1 = DirichletSolver(domain, q1)
    solver2 = DirichletSolver(domain, q2)
    dq = domain.restrict(np.asarray(q1, complex) - np.asarray(q2, complex))
    m = domain.mask
    h2 = domain.grid.cell_measure
    best = 0.0
    lifts = []
    for k in range(1, modes + 1):
        g = boundary_mode(domain, k)
        U1 = solver1.solve(g).U
        U2 = solver2.solve(g).U
        U0 = solver0.solve(g).U
        qn = min(w12_norm(U0, domain), w12_norm(U1, domain), w12_norm(U2, domain))
        lifts.append((U1, U2, qn))
    for (U1j, _, nj) in lifts:
        for (_, V2k, nk) in lifts:
            val = abs(complex((U1j[m] * dq[m] * V2k[m]).sum() * h2))
            best = max(best, val / (nj * nk))
    return best
