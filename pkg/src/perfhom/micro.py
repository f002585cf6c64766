"""Microscopic perforated-domain solves, effectiveness functionals and the
eps-ladders that compare them with the homogenized limits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ArgumentError, GeometryError
from .homog import (BIG, SUBCRITICAL, SUPERCRITICAL, ScalingLaw, calA, cell_effective_matrix,
                    coefficients, critical_reaction, solve_homogenized, sphere_area)
from .kinetics import Kinetics, Linear
from .mesh import DOMAIN, StarShape, Tag, TriMesh, build_cell_mesh, build_plain_mesh, integrate, tile_perforated
from .pde import (Dirichlet, EllipticSpec, GridFunction, Neumann, RadialProfile, RadialSpec, solve_radial,
                  solve_semilinear)


@dataclass(frozen=True)
class PerforatedProblem:
    """Omega = (0,1)^2 with n_cells^2 particles a_eps G0, eps = 1/n_cells.

    w-form: -Lap w = f in Omega_eps, d_nu w + beta(eps) sigma(w) = beta(eps) g
    on S_eps, w = boundary on the outer boundary."""

    law: ScalingLaw
    shape: StarShape
    n_cells: tuple = (2, 4, 8, 16)
    kinetics: Kinetics = field(default_factory=lambda: Linear(1.0))
    f: float = 0.0
    g: float = 0.0
    boundary: float = 1.0
    n_theta: int = 32
    n_r: int = 8
    homog_resolution: int = 256

    def __post_init__(self):
        if self.law.n != 2 or self.law.p != 2:
            raise ArgumentError("microscopic runs are two-dimensional with p = 2")
        phimax = float(np.max(self.shape.radii))
        for n in self.n_cells:
            eps = 1.0 / n
            if not self.law.a(eps) < eps / (2.0 * phimax):
                raise GeometryError(f"particles do not fit at n_cells={n}")

    def eps(self, i: int) -> float:
        return 1.0 / self.n_cells[i]

    def cell_scale(self, i: int) -> float:
        """Particle scale in cell units, a_eps / eps."""
        e = self.eps(i)
        return self.law.a(e) / e

    def cell(self, i: int) -> TriMesh:
        return build_cell_mesh(self.shape, self.cell_scale(i), self.n_theta, self.n_r)

    def mesh(self, i: int) -> TriMesh:
        return tile_perforated(self.cell(i), self.n_cells[i])


def solve_perforated(prob: PerforatedProblem, i: int, mesh: TriMesh | None = None) -> GridFunction:
    mesh = prob.mesh(i) if mesh is None else mesh
    spec = EllipticSpec(mesh=mesh, boundary_kinetics=prob.kinetics, boundary_weight=prob.law.beta(prob.eps(i)),
                        boundary_source=prob.g, f=prob.f, dirichlet=prob.boundary)
    return solve_semilinear(spec)


@dataclass(frozen=True)
class Effectiveness:
    E: float
    eta: float
    measure: float


def effectiveness(solution: GridFunction, kinetics: Kinetics, mode: str = "micro") -> Effectiveness:
    """micro: boundary average of sigma_hat(w) over the particles;
    homog: volume average over the domain. eta = sigma_hat(1) - E."""
    m = solution.mesh
    vals = kinetics(solution.values)
    if mode == "micro":
        if not m.has_tag(Tag.PARTICLE):
            raise ArgumentError("micro effectiveness needs Particle edges")
        meas = m.boundary_length(Tag.PARTICLE)
        E = integrate(m, vals, Tag.PARTICLE) / meas
    elif mode == "homog":
        meas = m.area
        E = integrate(m, vals, DOMAIN) / meas
    else:
        raise ArgumentError(f"unknown effectiveness mode {mode!r}")
    return Effectiveness(E=E, eta=float(kinetics(1.0)) - E, measure=meas)


@dataclass(frozen=True)
class EffectivenessReport:
    n_cells: int
    eps: float
    a_eps: float
    E_micro: float
    eta_micro: float
    E_homog: float
    eta_homog: float
    gap: float
    l2_error: float
    boundary_reaction: float
    particle_measure: float

    HEADER = ("n_cells", "eps", "a_eps", "E_micro", "E_homog", "gap", "l2_error", "boundary_reaction")

    def row(self) -> tuple:
        return (self.n_cells, self.eps, self.a_eps, self.E_micro, self.E_homog, self.gap, self.l2_error,
                self.boundary_reaction)


# ---------------------------------------------------------------- interpolation


def _neighbors(mesh: TriMesh) -> np.ndarray:
    """nb[t, k] = triangle across the edge opposite local vertex k, or -1."""
    T = mesh.tris
    nt = T.shape[0]
    loc = np.array([[1, 2], [2, 0], [0, 1]])
    e = np.sort(T[:, loc], axis=2).reshape(-1, 2)
    owner = np.repeat(np.arange(nt), 3)
    order = np.lexsort((e[:, 1], e[:, 0]))
    es = e[order]
    same = np.all(es[1:] == es[:-1], axis=1)
    nb = -np.ones(3 * nt, np.int64)
    i = np.flatnonzero(same)
    a, b = order[i], order[i + 1]
    nb[a] = owner[b]
    nb[b] = owner[a]
    return nb.reshape(nt, 3)


def _barycentric(mesh: TriMesh, t: np.ndarray, pts: np.ndarray) -> np.ndarray:
    P = mesh.nodes[mesh.tris[t]]
    v0, v1 = P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]
    d = pts - P[:, 0]
    det = v0[:, 0] * v1[:, 1] - v0[:, 1] * v1[:, 0]
    l1 = (d[:, 0] * v1[:, 1] - d[:, 1] * v1[:, 0]) / det
    l2 = (v0[:, 0] * d[:, 1] - v0[:, 1] * d[:, 0]) / det
    return np.column_stack([1.0 - l1 - l2, l1, l2])


def locate(mesh: TriMesh, pts, max_steps: int = 200) -> tuple[np.ndarray, np.ndarray]:
    """Triangle walk from the nearest centroid; points outside the mesh (slivers
    at curved boundaries) fall back to clamped coordinates in the last triangle."""
    pts = np.asarray(pts, float)
    cent = mesh.nodes[mesh.tris].mean(axis=1)
    _, t = cKDTree(cent).query(pts)
    t = np.asarray(t, np.int64)
    nb = _neighbors(mesh)
    tol = -1e-12
    active = np.arange(pts.shape[0])
    lam = np.empty((pts.shape[0], 3))
    for _ in range(max_steps):
        if active.size == 0:
            break
        L = _barycentric(mesh, t[active], pts[active])
        k = np.argmin(L, axis=1)
        inside = L[np.arange(active.size), k] >= tol
        nxt = nb[t[active], k]
        stop = inside | (nxt < 0)
        lam[active[stop]] = L[stop]
        go = ~stop
        t[active[go]] = nxt[go]
        active = active[go]
    if active.size:
        lam[active] = _barycentric(mesh, t[active], pts[active])
    lam = np.clip(lam, 0.0, None)
    lam /= lam.sum(axis=1, keepdims=True)
    return t, lam


def interpolate(src: GridFunction, pts) -> np.ndarray:
    t, lam = locate(src.mesh, pts)
    return np.sum(src.values[src.mesh.tris[t]] * lam, axis=1)


# ---------------------------------------------------------------- ladders


def homogenized_solution(prob: PerforatedProblem, regime: str) -> GridFunction:
    """Limit problem on a fine structured mesh of (0,1)^2, with coefficients
    computed on the same cell mesh as the microscopic runs."""
    mesh = build_plain_mesh(("rect", 1.0, 1.0), prob.homog_resolution)
    seed = EllipticSpec(mesh=mesh, f=prob.f, dirichlet=prob.boundary, boundary_kinetics=prob.kinetics,
                        boundary_source=prob.g)
    if regime == BIG:
        cell = cell_effective_matrix(prob.cell(0))
        return solve_homogenized(BIG, seed, cell=cell)
    if regime == SUBCRITICAL:
        cellm = prob.cell(0)
        a0 = prob.cell_scale(0)
        per = cellm.boundary_length(Tag.PARTICLE) / a0
        co = coefficients(prob.law, prob.shape, prob.eps(0), perimeter=per)
        return solve_homogenized(SUBCRITICAL, seed, coeffs=co)
    if regime == SUPERCRITICAL:
        return solve_semilinear(seed.replace(boundary_kinetics=None, boundary_source=0.0))
    raise ArgumentError(f"regime {regime!r} not available for microscopic ladders")


def convergence_study(prob: PerforatedProblem, regime: str, homog: GridFunction | None = None,
                      keep: bool = False):
    """One report per ladder rung. With keep=True the microscopic solutions are
    returned as well."""
    if regime not in (BIG, SUBCRITICAL, SUPERCRITICAL):
        raise ArgumentError(f"regime {regime!r} not supported microscopically")
    hom = homogenized_solution(prob, regime) if homog is None else homog
    Eh = effectiveness(hom, prob.kinetics, "homog")
    reports, sols = [], []
    for i, n in enumerate(prob.n_cells):
        mesh = prob.mesh(i)
        w = solve_perforated(prob, i, mesh)
        Em = effectiveness(w, prob.kinetics, "micro")
        if regime == SUPERCRITICAL:
            ref = solve_semilinear(EllipticSpec(mesh=mesh, f=prob.f, dirichlet=prob.boundary)).values
        else:
            ref = interpolate(hom, mesh.nodes)
        l2 = math.sqrt(float(np.dot(mesh.lumped, (w.values - ref) ** 2)))
        beta = prob.law.beta(prob.eps(i))
        reaction = beta * integrate(mesh, prob.kinetics(w.values), Tag.PARTICLE)
        reports.append(EffectivenessReport(
            n_cells=n, eps=prob.eps(i), a_eps=prob.law.a(prob.eps(i)), E_micro=Em.E, eta_micro=Em.eta,
            E_homog=Eh.E, eta_homog=Eh.eta, gap=abs(Em.E - Eh.E), l2_error=l2, boundary_reaction=reaction,
            particle_measure=Em.measure))
        if keep:
            sols.append(w)
    return (reports, sols, hom) if keep else reports


# ---------------------------------------------------------------- comparison of limits


@dataclass(frozen=True)
class ComparisonReport:
    crit: RadialProfile
    noncrit: RadialProfile
    min_diff: float
    E_crit: float
    E_noncrit: float
    coeff_crit: float
    coeff_noncrit: float


def _ball_average(prof: RadialProfile, vals: np.ndarray, n: int) -> float:
    r = prof.r
    wts = r ** (n - 1)
    integral = np.trapezoid(vals * wts, r)
    return float(n * integral / prof.r[-1] ** n)


def compare_critical_noncritical(sigma_hat: Kinetics, C0: float = 1.0, n: int = 3, R: float = 1.0,
                                 N: int = 801) -> ComparisonReport:
    """Radial ball instance, p = 2: reaction A h(w) (critical limit) against
    beta0 sigma_hat(w) (subcritical limit at the same particle size), w = 1 on
    the sphere."""
    if n < 3:
        raise ArgumentError("the radial comparison needs n >= 3")
    A = calA(n, 2.0, C0)
    Ahat = sphere_area(n) * C0 ** (n - 1)
    h = critical_reaction(sigma_hat, n, 2.0, C0)
    common = dict(n=n, p=2.0, r0=0.0, R=R, N=N, grid="uniform", left=Neumann(), right=Dirichlet(1.0))
    wc = solve_radial(RadialSpec(kinetics=h.as_kinetics(1.0), weight=A, **common))
    wn = solve_radial(RadialSpec(kinetics=sigma_hat, weight=Ahat, **common))
    Ec = _ball_average(wc, sigma_hat(wc.values), n)
    En = _ball_average(wn, sigma_hat(wn.values), n)
    return ComparisonReport(crit=wc, noncrit=wn, min_diff=float(np.min(wc.values - wn.values)),
                            E_crit=Ec, E_noncrit=En, coeff_crit=A, coeff_noncrit=Ahat)


# ---------------------------------------------------------------- particle shape in the subcritical model


@dataclass(frozen=True)
class ShapeComparison:
    names: tuple
    areas: tuple
    perimeters: tuple
    beta0: tuple
    E: tuple

    def ordered(self, slack: float = 1e-8) -> bool:
        """Smaller beta0 never gives a smaller effectiveness (beyond slack)."""
        order = np.argsort(self.beta0)
        E = np.asarray(self.E)[order]
        return bool(np.all(np.diff(E) <= slack))


def shape_effectiveness(law: ScalingLaw, shapes, kinetics: Kinetics = None, f: float = 0.0, g: float = 0.0,
                        boundary: float = 1.0, resolution: int = 64) -> ShapeComparison:
    """Subcritical homogenized problem on (0,1)^2 for several particle shapes:
    beta0 = |dG0| C0^(n-1) decides the reaction weight, and the volume
    effectiveness is recorded per shape."""
    kinetics = Linear(1.0) if kinetics is None else kinetics
    if law.regime != SUBCRITICAL or law.gamma_eff != law.gamma_star:
        raise ArgumentError("the comparison needs a subcritical law with gamma = gamma*")
    mesh = build_plain_mesh(("rect", 1.0, 1.0), resolution)
    seed = EllipticSpec(mesh=mesh, f=f, dirichlet=boundary, boundary_kinetics=kinetics, boundary_source=g)
    names, areas, pers, b0s, Es = [], [], [], [], []
    for s in shapes:
        co = coefficients(law, s, 1.0)
        w = solve_homogenized(SUBCRITICAL, seed, coeffs=co)
        names.append(s.name)
        areas.append(s.area)
        pers.append(s.perimeter)
        b0s.append(co.beta0)
        Es.append(effectiveness(w, kinetics, "homog").E)
    return ShapeComparison(tuple(names), tuple(areas), tuple(pers), tuple(b0s), tuple(Es))
