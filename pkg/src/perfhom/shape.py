"""Shape derivatives of semilinear Dirichlet problems and of the
effectiveness, their finite-difference validation by node motion, and the
dead-core truncation study."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import curve_fit

from .errors import ArgumentError, DeformationError
from .kinetics import Custom, Kinetics, Power, Truncated, Zero
from .mesh import DeformationField, Tag, TriMesh, deform_mesh
from .pde import (_System, Dirichlet, EllipticSpec, GridFunction, Neumann, RadialProfile, RadialSpec,
                  solve_linear_potential, solve_radial, solve_semilinear)

V_CLIP = 1e12
CORE_TOL = 1e-10


# ---------------------------------------------------------------- gradients


def nodal_gradient(mesh: TriMesh, u) -> np.ndarray:
    """Area-weighted average of the adjacent triangle gradients at every node."""
    g = mesh.field_gradient(np.asarray(u, float))
    w = mesh.areas
    acc = np.zeros((mesh.n_nodes, 2))
    wt = np.zeros(mesh.n_nodes)
    for k in range(3):
        np.add.at(acc, mesh.tris[:, k], g * w[:, None])
        np.add.at(wt, mesh.tris[:, k], w)
    return acc / wt[:, None]


def boundary_normals(mesh: TriMesh, tag: Tag = Tag.DIRICHLET) -> np.ndarray:
    """Unit outward normals at boundary nodes (average of the adjacent edge normals)."""
    e = mesh.tagged_edges(tag)
    nrm = mesh.edge_normals(tag)
    acc = np.zeros((mesh.n_nodes, 2))
    np.add.at(acc, e[:, 0], nrm)
    np.add.at(acc, e[:, 1], nrm)
    ln = np.linalg.norm(acc, axis=1)
    out = np.zeros_like(acc)
    ok = ln > 0
    out[ok] = acc[ok] / ln[ok, None]
    return out


def boundary_gradient(mesh: TriMesh, u, tag: Tag = Tag.DIRICHLET, method: str = "average",
                      spec: EllipticSpec | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Gradient at boundary nodes: normal part only, the tangential part being
    zero for constant Dirichlet data. Returns (grad, normals) as nodal arrays.

    method="average" takes the area-weighted average of the adjacent triangle
    gradients (first order). method="flux" reads the normal derivative off the
    discrete residual at the boundary nodes, divided by the trapezoid boundary
    weights (second order on the shipped meshes); it needs the spec."""
    n = boundary_normals(mesh, tag)
    if method == "average":
        gn = np.sum(nodal_gradient(mesh, u) * n, axis=1)
    elif method == "flux":
        if spec is None:
            raise ArgumentError("flux recovery needs the EllipticSpec of the solve")
        sysm = _System(spec)
        Ku, rea = sysm.parts(np.asarray(u, float))
        R = Ku + rea - sysm.F
        b = mesh.boundary_lumped(tag)
        gn = np.zeros(mesh.n_nodes)
        ok = b > 0
        gn[ok] = R[ok] / b[ok]
    else:
        raise ArgumentError(f"unknown boundary gradient method {method!r}")
    return gn[:, None] * n, n


# ---------------------------------------------------------------- derivative


@dataclass(frozen=True)
class ShapeDerivativeResult:
    base: GridFunction
    spec: EllipticSpec
    theta: DeformationField
    grad_n: np.ndarray  # normal derivative at boundary nodes
    grad: np.ndarray  # nodal gradient of the base solution
    u_prime: GridFunction
    clipped: int
    eta_hat_prime: float = math.nan
    eta_prime: float = math.nan
    table: list = field(default_factory=list)

    @property
    def material(self) -> np.ndarray:
        """u' + grad u . theta, the derivative of u_tau o (I + tau theta)."""
        return self.u_prime.values + np.sum(self.grad * self.theta.values, axis=1)


def _check_base(spec: EllipticSpec):
    if spec.p != 2 or spec.A is not None:
        raise ArgumentError("shape derivatives implemented for the Laplacian")
    if spec.boundary_kinetics is not None and spec.boundary_weight > 0:
        raise ArgumentError("shape derivatives implemented for Dirichlet problems")
    if np.ndim(spec.dirichlet) != 0:
        raise ArgumentError("shape derivatives need constant Dirichlet data")


def shape_derivative(spec: EllipticSpec, theta: DeformationField, base: GridFunction | None = None,
                     tol: float = 1e-12, gradient: str = "average") -> ShapeDerivativeResult:
    """u' solving -Lap u' + lam g'(u) u' = 0, u' = -grad u . theta on the boundary."""
    _check_base(spec)
    mesh = spec.mesh
    if theta.values.shape != mesh.nodes.shape:
        raise ArgumentError("deformation field does not live on this mesh")
    u = solve_semilinear(spec) if base is None else base
    g = spec.volume_kinetics or Zero()
    V = spec.volume_weight * np.asarray(g.deriv(u.values), float)
    clipped = int(np.sum(V > V_CLIP))
    V = np.minimum(V, V_CLIP)
    bn = spec.dirichlet_nodes()
    gb, nrm = boundary_gradient(mesh, u.values, method=gradient, spec=spec)
    data = np.zeros(mesh.n_nodes)
    data[bn] = -np.sum(gb[bn] * theta.values[bn], axis=1)
    up = solve_linear_potential(mesh, V, 0.0, data, dirichlet_nodes=bn, tol=tol)
    grad = nodal_gradient(mesh, u.values)
    grad[bn] = gb[bn]
    res = ShapeDerivativeResult(base=u, spec=spec, theta=theta, grad_n=np.sum(gb * nrm, axis=1), grad=grad,
                                u_prime=up, clipped=clipped)
    hp, ep = effectiveness_derivative(res)
    return ShapeDerivativeResult(**{**res.__dict__, "eta_hat_prime": hp, "eta_prime": ep})


def boundary_flux_integral(mesh: TriMesh, theta: DeformationField, weight=None,
                           tag: Tag = Tag.DIRICHLET) -> float:
    """int over the boundary of weight * theta . n, trapezoid rule per edge."""
    e = mesh.tagged_edges(tag)
    nrm = mesh.edge_normals(tag) * mesh.edge_lengths(tag)[:, None]
    th = 0.5 * (theta.values[e[:, 0]] + theta.values[e[:, 1]])
    w = np.ones(e.shape[0]) if weight is None else 0.5 * (weight[e[:, 0]] + weight[e[:, 1]])
    return float(np.sum(w * np.sum(th * nrm, axis=1)))


def effectiveness_derivative(res: ShapeDerivativeResult) -> tuple[float, float]:
    """(d/dtau int g(u), d/dtau of the average (1/|Omega|) int g(u)).

    The first is int g'(u) u' + int_boundary g(u) theta.n; the second follows
    from the quotient rule with d|Omega| = int theta.n."""
    spec, mesh = res.spec, res.spec.mesh
    g = spec.volume_kinetics or Zero()
    u = res.base.values
    gp = np.minimum(np.asarray(g.deriv(u), float), V_CLIP)
    vol = float(np.dot(mesh.lumped, gp * res.u_prime.values))
    gu = np.asarray(g(u), float)
    bnd = boundary_flux_integral(mesh, res.theta, gu)
    hat = vol + bnd
    area = mesh.area
    eta0 = float(np.dot(mesh.lumped, gu)) / area
    dA = boundary_flux_integral(mesh, res.theta)
    return hat, (hat - eta0 * dA) / area


# ---------------------------------------------------------------- FD validation


@dataclass(frozen=True)
class FDRow:
    tau: float
    eta_fd: float
    eta_analytic: float
    abs_err: float
    u_dot_l2_err: float
    error: str = ""

    def row(self) -> tuple:
        return (self.tau, self.eta_fd, self.eta_analytic, self.abs_err, self.u_dot_l2_err)


def _eta_hat(spec: EllipticSpec, mesh: TriMesh):
    s = spec.replace(mesh=mesh, initial=None)
    u = solve_semilinear(s, tol=1e-12)
    g = spec.volume_kinetics or Zero()
    return float(np.dot(mesh.lumped, g(u.values))), u


def fd_validate(spec: EllipticSpec, theta: DeformationField, taus=(1e-2, 1e-3, 1e-4),
                res: ShapeDerivativeResult | None = None, gradient: str = "average") -> tuple[ShapeDerivativeResult, list]:
    """Central differences of int g(u) and of u_tau o (I + tau theta) on moved
    meshes, against the derivative formulas."""
    res = shape_derivative(spec, theta, gradient=gradient) if res is None else res
    mesh = spec.mesh
    mat = res.material
    # relative to the larger of the two pieces of u' + grad u . theta
    l2 = lambda v: math.sqrt(float(np.dot(mesh.lumped, v ** 2)))
    adv = np.sum(res.grad * theta.values, axis=1)
    nm = max(l2(res.u_prime.values), l2(adv))
    rows = []
    for tau in taus:
        try:
            ep, up = _eta_hat(spec, deform_mesh(mesh, theta, tau))
            em, um = _eta_hat(spec, deform_mesh(mesh, theta, -tau))
        except DeformationError as exc:
            rows.append(FDRow(tau, math.nan, res.eta_hat_prime, math.nan, math.nan, str(exc)))
            continue
        fd = (ep - em) / (2.0 * tau)
        udot = (up.values - um.values) / (2.0 * tau)
        err = l2(udot - mat)
        rows.append(FDRow(tau, fd, res.eta_hat_prime, abs(fd - res.eta_hat_prime), err / nm if nm > 0 else err))
    return res, rows


# ---------------------------------------------------------------- dead core


@dataclass(frozen=True)
class DeadCoreReport:
    profile: RadialProfile
    has_core: bool
    core_radius: float
    core_measure: float
    slope: float
    fit_range: tuple
    ms: tuple
    v: tuple  # RadialProfile per truncation level
    cauchy: tuple  # ||v_{m_{k+1}} - v_{m_k}||_L2 on the ball
    core_sup: tuple  # max |v_m| over N
    core_norm: tuple  # max |v_m| over nodes of N at distance >= core_margin from its boundary
    core_margin: float
    free_boundary: float  # fitted position of the edge of N
    barrier_margin: float
    barrier_alpha: float

    HEADER = ("m", "cauchy_diff", "core_measure", "slope_fit")

    def rows(self) -> list:
        out = []
        for k, m in enumerate(self.ms):
            c = self.cauchy[k - 1] if k > 0 else math.nan
            out.append((m, c, self.core_measure, self.slope))
        return out


def _ball_l2(prof_r, vals, n):
    r = prof_r
    return math.sqrt(float(np.trapezoid(vals ** 2 * r ** (n - 1), r)) * 2 * math.pi ** (n / 2) / math.gamma(n / 2))


def psi_inverse(beta: Power, alpha: float, d, tmax: float = 1.0, npts: int = 400):
    """Psi^{-1}(d) for Psi(s) = int_0^s dt / G(t), G(t) = sqrt(2 (B(t) + alpha t))."""
    G = lambda t: math.sqrt(2.0 * (float(beta.primitive(t)) + alpha * t))
    ts = np.concatenate([[0.0], np.geomspace(1e-12, tmax, npts)])
    psi = np.zeros_like(ts)
    for i in range(1, ts.size):
        psi[i] = psi[i - 1] + quad(lambda t: 1.0 / G(t), ts[i - 1], ts[i], limit=200)[0]
    return np.interp(np.asarray(d, float), psi, ts, right=np.inf)


def _clipped_base(beta: Power, common: dict) -> RadialProfile:
    """Base solve with beta' clipped at V_CLIP, i.e. the truncation at m = 1e12,
    reached by continuation in m. It differs from beta only where
    w < (lam q / 1e12)^(1/(1-q)), far below the dead-core threshold."""
    init = None
    m = 10.0
    while True:
        w = solve_radial(RadialSpec(kinetics=Truncated(beta, m), weight=1.0, **common), initial=init)
        if m >= V_CLIP:
            return w
        init, m = w.values, min(10.0 * m, V_CLIP)


def dead_core_study(beta: Power, n: int = 2, R: float = 1.0, N: int = 20001,
                    ms=(10.0, 1e2, 1e3, 1e4), core_margin: float | None = None) -> DeadCoreReport:
    """w-form ball problem -Lap w + beta(w) = 0, w(R) = 1, with theta = x, so
    v(R) = -R w'(R). v_m solve the problems with the truncated kinetics.

    v_m decays into N over a length 1/sqrt(m); core_margin (default
    10/sqrt(max m)) sets the depth at which core_norm is measured."""
    if not isinstance(beta, Power) or not 0 < beta.q < 1:
        raise ArgumentError("dead-core study needs a root-type power kinetics")
    common = dict(n=n, p=2.0, r0=0.0, R=R, N=N, grid="uniform", left=Neumann(), right=Dirichlet(1.0))
    w = _clipped_base(beta, common)
    r, wv = w.r, w.values
    core = wv <= CORE_TOL
    has = bool(core[0])
    if has:
        last = int(np.flatnonzero(~core)[0]) - 1
        rN = float(r[last])
    else:
        last, rN = -1, 0.0
    core_measure = math.pi ** (n / 2) / math.gamma(n / 2 + 1) * rN ** n
    slope, rng, r0 = math.nan, (math.nan, math.nan), math.nan
    if has:
        # the threshold edge sits a few cells inside the free boundary, so the
        # edge position is fitted together with the exponent
        d = r - rN
        h = r[1] - r[0]
        lo = 20.0 * h
        sel = (d >= lo) & (d <= 10.0 * lo) & (wv > CORE_TOL)
        if np.count_nonzero(sel) >= 4:
            model = lambda x, s, c, x0: s * np.log(np.maximum(x - x0, 1e-300)) + c
            s0 = 2.0 / (1.0 - beta.q)
            (slope, _, r0), _ = curve_fit(model, r[sel], np.log(wv[sel]), p0=(s0, 0.0, rN))
            slope, r0 = float(slope), float(r0)
            rng = (lo, 10.0 * lo)
    # barrier with alpha = max(0, mean curvature * dw/dn) on the sphere
    h = r[-1] - r[-2]
    dwdr = (wv[-1] - wv[-2]) / h
    alpha = max(0.0, (n - 1) / R * dwdr)
    bmargin = math.nan
    if has:
        d = r - rN
        near = (d > 0) & (d <= 0.5 * (R - rN))
        bmargin = float(np.min(psi_inverse(beta, alpha, d[near]) - wv[near]))
    if core_margin is None:
        core_margin = 10.0 / math.sqrt(max(ms))
    vs, cauchy, corenorm, coresup = [], [], [], []
    for m in ms:
        bm = Truncated(beta, m)
        wm = solve_radial(RadialSpec(kinetics=bm, weight=1.0, **common), initial=wv)
        pot = np.asarray(bm.deriv(wm.values), float)
        slope_m = (wm.values[-1] - wm.values[-2]) / (wm.r[-1] - wm.r[-2])
        lin = Custom(lambda x, pot=pot: pot * x, lambda x, pot=pot: pot, "potential")
        spec = RadialSpec(kinetics=lin, weight=1.0, **{**common, "right": Dirichlet(-R * slope_m)})
        vm = solve_radial(spec)
        vs.append(vm)
        if has:
            inner = r <= rN - core_margin
            corenorm.append(float(np.max(np.abs(vm.values[inner]))) if np.any(inner) else 0.0)
            coresup.append(float(np.max(np.abs(vm.values[core]))))
        else:
            corenorm.append(math.nan)
            coresup.append(math.nan)
    for a, b in zip(vs[:-1], vs[1:]):
        cauchy.append(_ball_l2(r, b.values - a.values, n))
    return DeadCoreReport(profile=w, has_core=has, core_radius=rN, core_measure=core_measure, slope=slope,
                          fit_range=rng, ms=tuple(ms), v=tuple(vs), cauchy=tuple(cauchy),
                          core_sup=tuple(coresup), core_norm=tuple(corenorm), core_margin=core_margin,
                          free_boundary=r0, barrier_margin=bmargin, barrier_alpha=alpha)
