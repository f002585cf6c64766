"""Elliptic solvers: semilinear p-Laplacian with Robin particle kinetics on
triangle meshes, linear problems with a potential, and radial two-point
boundary-value problems.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.linalg import solve_banded
from scipy.sparse.linalg import cg, splu

from .errors import ArgumentError, NonConvergenceError, SolverError, UnsupportedError
from .kinetics import Kinetics, Power, Zero
from .mesh import Tag, TriMesh

DELTA = 1e-6
MAX_ITER = 400
NL_TOL = 1e-9
CG_TOL = 1e-12
RADIAL_TOL = 1e-10


# ---------------------------------------------------------------- linear algebra


def pcg(A: sp.spmatrix, b: np.ndarray, x0=None, tol: float = CG_TOL, maxiter: int | None = None):
    """Jacobi-preconditioned conjugate gradients (scipy). Returns (x, relres, its)."""
    A = sp.csr_matrix(A)
    n = b.size
    d = A.diagonal()
    if np.any(d <= 0):
        raise SolverError("matrix is not positive definite (nonpositive diagonal)")
    bn = np.linalg.norm(b)
    if bn == 0.0:
        return np.zeros(n), 0.0, 0
    M = sp.diags(1.0 / d)
    its = [0]

    def count(_):
        its[0] += 1

    x, info = cg(A, b, x0=x0, rtol=tol, atol=0.0, maxiter=maxiter or max(1000, 10 * n), M=M, callback=count)
    res = float(np.linalg.norm(b - A @ x) / bn)
    if info != 0:
        if info < 0:
            raise SolverError("CG breakdown: matrix not positive definite")
        raise SolverError(f"CG did not reach {tol:g} in {its[0]} iterations (residual {res:.3e})")
    return x, res, its[0]


def _direct(A, b):
    lu = splu(sp.csc_matrix(A), permc_spec="COLAMD")
    return lu.solve(b)


# ---------------------------------------------------------------- assembly


def _tri_coeff_matrices(mesh: TriMesh, A=None):
    """Per-triangle local stiffness area * G^T A G, shape (T, 3, 3)."""
    G = mesh.gradients()
    if A is None:
        AG = G
    else:
        AG = np.einsum("de,tke->tkd", np.asarray(A, float), G)
    return mesh.areas[:, None, None] * np.einsum("tkd,tld->tkl", G, AG)


def assemble(mesh: TriMesh, local: np.ndarray, coeff=None) -> sp.csr_matrix:
    loc = local if coeff is None else local * coeff[:, None, None]
    rows = np.repeat(mesh.tris, 3, axis=1).ravel()
    cols = np.tile(mesh.tris, (1, 3)).ravel()
    return sp.coo_matrix((loc.ravel(), (rows, cols)), shape=(mesh.n_nodes,) * 2).tocsr()


def stiffness(mesh: TriMesh, A=None) -> sp.csr_matrix:
    return assemble(mesh, _tri_coeff_matrices(mesh, A))


def plaplace_coefficient(mesh: TriMesh, u, p: float, delta: float = DELTA) -> np.ndarray:
    g = mesh.field_gradient(u)
    return (delta * delta + np.sum(g * g, axis=1)) ** ((p - 2.0) / 2.0)


# ---------------------------------------------------------------- problem data


def _nodal(mesh, v, name):
    if callable(v):
        v = v(mesh.nodes)
    a = np.asarray(v, float)
    if a.ndim == 0:
        a = np.full(mesh.n_nodes, float(a))
    if a.shape != (mesh.n_nodes,) or not np.all(np.isfinite(a)):
        raise ArgumentError(f"{name} must be a finite scalar or nodal field")
    return a


@dataclass(frozen=True)
class EllipticSpec:
    """-div(a(grad u)) + lam_vol g(u) = f in the mesh,
    a(grad u).n + beta sigma(u) = beta g_eps on Particle edges,
    u = dirichlet on DirichletOuter edges."""

    mesh: TriMesh
    p: float = 2.0
    A: np.ndarray | None = None
    volume_kinetics: Kinetics | None = None
    volume_weight: float = 0.0
    boundary_kinetics: Kinetics | None = None
    boundary_weight: float = 0.0
    boundary_source: object = 0.0
    f: object = 0.0
    dirichlet: object = 0.0
    dirichlet_tags: tuple = (Tag.DIRICHLET,)
    initial: object = None

    def __post_init__(self):
        if not self.p > 1:
            raise ArgumentError("p must exceed 1")
        if self.A is not None:
            A = np.asarray(self.A, float)
            if A.shape != (2, 2) or not np.allclose(A, A.T, rtol=0, atol=1e-13 * np.abs(A).max()) \
                    or np.any(np.linalg.eigvalsh(0.5 * (A + A.T)) <= 0):
                raise ArgumentError("diffusion matrix must be 2x2 symmetric positive definite")
            if self.p != 2 and not np.allclose(A, np.eye(2)):
                raise ArgumentError("anisotropic diffusion only supported for p = 2")
        if self.volume_weight < 0 or self.boundary_weight < 0:
            raise ArgumentError("reaction weights must be nonnegative")
        for k in (self.volume_kinetics,):
            if k is not None and k.multivalued:
                raise UnsupportedError("multivalued kinetics cannot enter the volume term; "
                                       "use the single-valued strange term instead")
        if self.boundary_kinetics is not None and self.boundary_kinetics.multivalued:
            raise UnsupportedError("multivalued kinetics not supported in assembly")

    def dirichlet_nodes(self) -> np.ndarray:
        idx = [self.mesh.tag_nodes(t) for t in self.dirichlet_tags if self.mesh.has_tag(t)]
        return np.unique(np.concatenate(idx)) if idx else np.zeros(0, np.int64)

    def replace(self, **kw) -> "EllipticSpec":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return EllipticSpec(**d)


@dataclass(frozen=True)
class GridFunction:
    mesh: TriMesh
    values: np.ndarray
    residual: float = 0.0
    iterations: int = 0
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.array(self.values, float)
        if v.shape != (self.mesh.n_nodes,) or not np.all(np.isfinite(v)):
            raise ArgumentError("grid function must hold one finite value per node")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def to_csv(self, path) -> None:
        from .csvio import write_csv
        rows = [(i, x, y, v) for i, ((x, y), v) in enumerate(zip(self.mesh.nodes.tolist(), self.values.tolist()))]
        write_csv(path, ["node_index", "x", "y", "value"], rows)


# ---------------------------------------------------------------- semilinear solver


class _System:
    """Discrete residual R(u) = K(u) u + M lam g(u) + B beta sigma(u) - F."""

    def __init__(self, spec: EllipticSpec):
        m = spec.mesh
        self.spec = spec
        self.local = _tri_coeff_matrices(m, spec.A if spec.p == 2 else None)
        self.K2 = assemble(m, self.local) if spec.p == 2 else None
        self.M = m.lumped
        self.lam = spec.volume_weight
        self.g = spec.volume_kinetics or Zero()
        self.beta = spec.boundary_weight
        self.sig = spec.boundary_kinetics or Zero()
        self.B = m.boundary_lumped(Tag.PARTICLE) if m.has_tag(Tag.PARTICLE) else np.zeros(m.n_nodes)
        self.F = self.M * _nodal(m, spec.f, "f") + self.beta * self.B * _nodal(m, spec.boundary_source, "g_eps")
        self.dn = spec.dirichlet_nodes()
        free = np.ones(m.n_nodes, bool)
        free[self.dn] = False
        self.free = np.flatnonzero(free)
        self.ud = _nodal(m, spec.dirichlet, "dirichlet")
        self.vol_on = self.lam > 0 and not isinstance(self.g, Zero)
        self.bnd_on = self.beta > 0 and not isinstance(self.sig, Zero) and np.any(self.B > 0)

    def K(self, u):
        if self.K2 is not None:
            return self.K2
        return assemble(self.spec.mesh, self.local, plaplace_coefficient(self.spec.mesh, u, self.spec.p))

    def parts(self, u, K=None):
        K = self.K(u) if K is None else K
        Ku = K @ u
        rea = np.zeros_like(u)
        if self.vol_on:
            rea += self.M * self.lam * self.g(u)
        if self.bnd_on:
            rea += self.B * self.beta * self.sig(u)
        return Ku, rea

    def residual(self, u, K=None):
        K = self.K(u) if K is None else K
        Ku, rea = self.parts(u, K)
        R = Ku + rea - self.F
        f = self.free
        ub = np.zeros_like(u)
        ub[self.dn] = u[self.dn]
        # the Dirichlet lifting sets the forcing scale when f = 0 and u is nearly constant
        lift = np.linalg.norm((K @ ub)[f])
        scale = np.linalg.norm(Ku[f]) + np.linalg.norm(rea[f]) + np.linalg.norm(self.F[f]) + lift
        nr = np.linalg.norm(R[f])
        rel = nr / scale if scale > 0 else 0.0
        return R, rel

    def reaction_jacobian(self, u):
        d = np.zeros_like(u)
        if self.vol_on:
            d += self.M * self.lam * self.g.deriv(u)
        if self.bnd_on:
            d += self.B * self.beta * self.sig.deriv(u)
        return d

    def kinks(self):
        ks = set()
        if self.vol_on:
            ks |= set(self.g.kinks)
        if self.bnd_on:
            ks |= set(self.sig.kinks)
        return sorted(ks)

    def energy(self, u):
        """Discrete energy for p = 2."""
        K = self.K(u)
        e = 0.5 * u @ (K @ u) - self.F @ u
        if self.vol_on:
            e += np.sum(self.M * self.lam * self.g.primitive(u))
        if self.bnd_on:
            e += np.sum(self.B * self.beta * self.sig.primitive(u))
        return float(e)


def _limit_at_kinks(u, d, kinks):
    """Shorten nodal steps that would jump across a kink of the kinetics so
    they land on it."""
    if not kinks:
        return d
    d = d.copy()
    for k in kinks:
        a, b = u - k, u + d - k
        cross = (a * b < 0) | ((a != 0) & (b == 0))
        d[cross] = k - u[cross]
    return d


def discrete_energy(spec: EllipticSpec, u) -> float:
    return _System(spec).energy(np.asarray(u, float))


def solve_semilinear(spec: EllipticSpec, tol: float = NL_TOL, max_iter: int = MAX_ITER) -> GridFunction:
    sysm = _System(spec)
    m = spec.mesh
    f = sysm.free
    if spec.initial is not None:
        u = _nodal(m, spec.initial, "initial").copy()
    else:
        u = np.full(m.n_nodes, float(np.mean(sysm.ud[sysm.dn])) if sysm.dn.size else 0.0)
    u[sysm.dn] = sysm.ud[sysm.dn]
    if f.size == 0:
        return GridFunction(m, u, 0.0, 0)
    if spec.p == 2:
        return _newton(sysm, u, tol, max_iter)
    if spec.initial is None:
        # a constant start makes the degenerate flux coefficient vanish; start from Poisson
        K = assemble(m, sysm.local)
        u[f] = _direct(K[f][:, f], sysm.F[f] - K[f][:, sysm.dn] @ u[sysm.dn])
    return _picard(sysm, u, tol, max_iter)


def _newton(sysm: _System, u, tol, max_iter):
    f = sysm.free
    K = sysm.K(u)
    R, rel = sysm.residual(u, K)
    kinks = sysm.kinks()
    it = 0
    while rel > tol:
        if it >= max_iter:
            raise NonConvergenceError(f"Newton stopped at relative residual {rel:.3e}", rel, it)
        it += 1
        J = K + sp.diags(sysm.reaction_jacobian(u))
        Jff = J[f][:, f]
        d = np.zeros_like(u)
        d[f] = _direct(Jff, -R[f])
        d = _limit_at_kinks(u, d, kinks)
        nr0 = np.linalg.norm(R[f])
        t = 1.0
        for _ in range(40):
            un = u + t * d
            Rn, reln = sysm.residual(un, K)
            if np.linalg.norm(Rn[f]) <= (1.0 - 1e-4 * t) * nr0 or reln <= tol:
                break
            t *= 0.5
        u, R, rel = un, Rn, reln
    return GridFunction(sysm.spec.mesh, u, rel, it)


def _plaplace_jacobian(sysm: _System, u) -> sp.csr_matrix:
    """Derivative of the regularized p-Laplacian flux: per triangle
    area * G^T [c I + (p-2) (delta^2+|g|^2)^{(p-4)/2} g g^T] G."""
    m = sysm.spec.mesh
    p = sysm.spec.p
    G = m.gradients()
    g = m.field_gradient(u)
    s = DELTA * DELTA + np.sum(g * g, axis=1)
    c = s ** ((p - 2.0) / 2.0)
    d = (p - 2.0) * s ** ((p - 4.0) / 2.0)
    Gg = np.einsum("tkd,td->tk", G, g)
    loc = c[:, None, None] * sysm.local + (m.areas * d)[:, None, None] * np.einsum("tk,tl->tkl", Gg, Gg)
    return assemble(m, loc)


# switch from lagged diffusivity to Newton below this relative residual
PICARD_SWITCH = 1e-4


def _picard(sysm: _System, u, tol, max_iter):
    """Lagged diffusivity for the p-Laplacian, Newton-linearised reaction,
    damping halved whenever the residual grows. Once the residual is below
    PICARD_SWITCH the full Jacobian is used, since lagged diffusivity only
    converges linearly where the flux degenerates."""
    f = sysm.free
    R, rel = sysm.residual(u)
    omega = 1.0
    it = 0
    while rel > tol:
        if it >= max_iter:
            raise NonConvergenceError(f"Picard stopped at relative residual {rel:.3e}", rel, it)
        it += 1
        K = sysm.K(u)
        Dr = sysm.reaction_jacobian(u)
        unew = u.copy()
        if rel < PICARD_SWITCH:
            J = _plaplace_jacobian(sysm, u) + sp.diags(Dr)
            unew[f] = u[f] + _direct(J[f][:, f], -R[f])
        else:
            J = K + sp.diags(Dr)
            _, rea = sysm.parts(u, K)
            rhs = sysm.F - rea + Dr * u
            unew[f] = _direct(J[f][:, f], rhs[f] - (J[f][:, sysm.dn] @ u[sysm.dn]))
        step = _limit_at_kinks(u, unew - u, sysm.kinks())
        while True:
            cand = u + omega * step
            Rn, reln = sysm.residual(cand)
            if reln <= rel or omega < 1e-6:
                break
            omega *= 0.5
        u, R, rel = cand, Rn, reln
        omega = min(1.0, 2.0 * omega)
    return GridFunction(sysm.spec.mesh, u, rel, it)


# ---------------------------------------------------------------- linear problem with potential


def solve_linear_potential(mesh: TriMesh, V, f, dirichlet, dirichlet_nodes=None,
                           tol: float = CG_TOL) -> GridFunction:
    """-Laplace u + V u = f with u = dirichlet on the boundary nodes
    (all DirichletOuter nodes unless given)."""
    Vn = _nodal(mesh, V, "V")
    if np.any(Vn < 0):
        raise ArgumentError("potential must be nonnegative")
    fn = _nodal(mesh, f, "f")
    dn = mesh.tag_nodes(Tag.DIRICHLET) if dirichlet_nodes is None else np.asarray(dirichlet_nodes)
    ud = np.zeros(mesh.n_nodes)
    dv = np.asarray(dirichlet, float)
    if dv.ndim == 0:
        ud[dn] = float(dv)
    elif dv.shape == (mesh.n_nodes,):
        ud[dn] = dv[dn]
    elif dv.shape == dn.shape:
        ud[dn] = dv
    else:
        raise ArgumentError("dirichlet data must be scalar, nodal, or one value per boundary node")
    K = stiffness(mesh) + sp.diags(mesh.lumped * Vn)
    free = np.ones(mesh.n_nodes, bool)
    free[dn] = False
    fr = np.flatnonzero(free)
    u = ud.copy()
    if fr.size:
        b = mesh.lumped[fr] * fn[fr] - K[fr][:, dn] @ ud[dn]
        Kff = K[fr][:, fr]
        x, res, its = pcg(Kff, b, tol=tol)
        u[fr] = x
    else:
        res, its = 0.0, 0
    return GridFunction(mesh, u, res, its)


# ---------------------------------------------------------------- radial problems


@dataclass(frozen=True)
class Dirichlet:
    value: float


@dataclass(frozen=True)
class Robin:
    """d_nu u + coeff * kinetics(u) = 0 with nu the outward normal."""

    coeff: float
    kinetics: Kinetics


@dataclass(frozen=True)
class DecayMatched:
    """u'(R) + ((n-2)/R) u(R) = 0."""


@dataclass(frozen=True)
class Neumann:
    """zero flux (symmetry at r = 0)."""


@dataclass(frozen=True)
class RadialSpec:
    """-(r^{n-1} |u'|^{p-2} u')' + r^{n-1} lam g(u) = r^{n-1} f on [r0, R]."""

    n: int
    p: float
    r0: float
    R: float
    N: int = 400
    grid: str = "geometric"
    kinetics: Kinetics | None = None
    weight: float = 0.0
    f: object = 0.0
    left: object = field(default_factory=Neumann)
    right: object = field(default_factory=lambda: Dirichlet(0.0))
    exterior: bool = False

    def __post_init__(self):
        if self.n < 1 or not self.p > 1 or self.N < 3:
            raise ArgumentError("invalid radial spec")
        if not self.R > self.r0 or self.r0 < 0:
            raise ArgumentError("need 0 <= r0 < R")
        if (self.exterior or self.grid == "geometric") and self.r0 <= 0:
            raise ArgumentError("exterior/geometric radial problems need r0 > 0")
        if self.weight < 0:
            raise ArgumentError("reaction weight must be nonnegative")

    def nodes(self) -> np.ndarray:
        if self.grid == "geometric":
            r = np.geomspace(self.r0, self.R, self.N)
        elif self.grid == "uniform":
            r = np.linspace(self.r0, self.R, self.N)
        else:
            raise ArgumentError(f"unknown grid {self.grid!r}")
        r[0], r[-1] = self.r0, self.R
        return r


@dataclass(frozen=True)
class RadialProfile:
    r: np.ndarray
    values: np.ndarray
    residual: float = 0.0
    iterations: int = 0
    boundary_flux: float = 0.0

    def to_csv(self, path) -> None:
        from .csvio import write_csv
        write_csv(path, ["r", "value"], list(zip(self.r.tolist(), self.values.tolist())))

    def __call__(self, r):
        return np.interp(r, self.r, self.values)


class _Radial:
    def __init__(self, spec: RadialSpec):
        self.s = spec
        r = spec.nodes()
        n = spec.n
        self.r = r
        mid = 0.5 * (r[1:] + r[:-1])
        self.dr = np.diff(r)
        if spec.p == 2 and r[0] > 0:
            # exact for radial harmonic functions: flux is constant between nodes
            if n == 2:
                integ = np.log(r[1:] / r[:-1])
            else:
                integ = (r[1:] ** (2 - n) - r[:-1] ** (2 - n)) / (2 - n)
            self.w = 1.0 / integ
            self.exact = True
        else:
            self.w = mid ** (n - 1) / self.dr
            self.exact = False
        edges = np.concatenate([[r[0]], mid, [r[-1]]])
        self.V = (edges[1:] ** n - edges[:-1] ** n) / n
        ff = spec.f(r) if callable(spec.f) else np.full(r.size, float(spec.f))
        self.F = self.V * ff
        self.g = spec.kinetics or Zero()
        self.lam = spec.weight

    def flux(self, u):
        """Interior fluxes r^{n-1}|u'|^{p-2}u' at the midpoints and their
        derivatives with respect to the difference."""
        D = np.diff(u)
        p = self.s.p
        if p == 2:
            return self.w * D, self.w.copy()
        dd = D / self.dr
        c = (DELTA ** 2 + dd * dd) ** ((p - 2) / 2)
        F = self.w * self.dr * c * dd
        dF = self.w * (c + (p - 2) * (DELTA ** 2 + dd * dd) ** ((p - 4) / 2) * dd * dd)
        return F, dF

    def bflux(self, bc, u0, at_left):
        """Return (boundary flux r^{n-1}u' at the end, derivative wrt u0) or None for Dirichlet."""
        s = self.s
        r = self.r[0] if at_left else self.r[-1]
        rn = r ** (s.n - 1)
        sign = 1.0 if at_left else -1.0  # u' = coeff*k at the left end, -coeff*k at the right
        if isinstance(bc, Dirichlet):
            return None
        if isinstance(bc, Neumann):
            return 0.0, 0.0
        if isinstance(bc, Robin):
            return sign * rn * bc.coeff * float(bc.kinetics(u0)), sign * rn * bc.coeff * float(bc.kinetics.deriv(u0))
        if isinstance(bc, DecayMatched):
            if at_left:
                raise ArgumentError("decay-matched condition applies at the outer end")
            c = (s.n - 2) / r
            return -rn * c * u0, -rn * c
        raise ArgumentError(f"unknown boundary condition {bc!r}")

    def residual(self, u):
        F, dF = self.flux(u)
        N = u.size
        R = np.zeros(N)
        R[:-1] -= F
        R[1:] += F
        # R_i = -(F_{i+1/2} - F_{i-1/2}) + V lam g - V f
        diag = np.zeros(N)
        lower = np.zeros(N - 1)
        upper = np.zeros(N - 1)
        diag[:-1] += dF
        diag[1:] += dF
        upper[:] -= dF
        lower[:] -= dF
        rea = self.V * self.lam * self.g(u) if self.lam > 0 else np.zeros(N)
        if self.lam > 0:
            diag += self.V * self.lam * self.g.deriv(u)
        R += rea - self.F
        scale_terms = [np.abs(F), np.abs(rea), np.abs(self.F)]
        bl = self.bflux(self.s.left, u[0], True)
        br = self.bflux(self.s.right, u[-1], False)
        if bl is not None:
            R[0] += bl[0]
            diag[0] += bl[1]
            scale_terms.append(np.array([bl[0]]))
        if br is not None:
            R[-1] -= br[0]
            diag[-1] -= br[1]
            scale_terms.append(np.array([br[0]]))
        if isinstance(self.s.left, Dirichlet):
            R[0] = u[0] - self.s.left.value
            diag[0], upper[0] = 1.0, 0.0
        if isinstance(self.s.right, Dirichlet):
            R[-1] = u[-1] - self.s.right.value
            diag[-1], lower[-1] = 1.0, 0.0
        scale = sum(np.linalg.norm(t) for t in scale_terms)
        inner = slice(1 if isinstance(self.s.left, Dirichlet) else 0,
                      -1 if isinstance(self.s.right, Dirichlet) else None)
        rel = np.linalg.norm(R[inner]) / scale if scale > 0 else 0.0
        if isinstance(self.s.left, Dirichlet) or isinstance(self.s.right, Dirichlet):
            rel = max(rel, np.max(np.abs(R[[0, -1]] * [isinstance(self.s.left, Dirichlet),
                                                        isinstance(self.s.right, Dirichlet)])))
        return R, rel, (lower, diag, upper)

    def kinks(self):
        ks = set(self.g.kinks) if self.lam > 0 else set()
        for bc in (self.s.left, self.s.right):
            if isinstance(bc, Robin):
                ks |= set(bc.kinetics.kinks)
        return sorted(ks)


def solve_radial(spec: RadialSpec, initial=None, tol: float = RADIAL_TOL,
                 max_iter: int = MAX_ITER) -> RadialProfile:
    prob = _Radial(spec)
    r = prob.r
    if initial is None:
        vals = [bc.value for bc in (spec.left, spec.right) if isinstance(bc, Dirichlet)]
        u = np.full(r.size, float(np.mean(vals)) if vals else 0.0)
    else:
        u = np.array(initial(r) if callable(initial) else initial, float)
    if isinstance(spec.left, Dirichlet):
        u[0] = spec.left.value
    if isinstance(spec.right, Dirichlet):
        u[-1] = spec.right.value
    g = prob.g
    # root kinetics: iterate in v with u = sign(v)|v|^(1/q), where lam*|u|^q*sign(u) = lam*v is
    # Lipschitz; Newton in u crawls near the free boundary of a dead core
    root = isinstance(g, Power) and g.q < 1 and g.lam > 0 and prob.lam > 0
    if root:
        q = g.q
        to_u = lambda v: np.sign(v) * np.abs(v) ** (1.0 / q)
        x = np.sign(u) * np.abs(u) ** q
    else:
        to_u = lambda v: v
        x = u
    kinks = [] if root else prob.kinks()

    def system(x):
        u = to_u(x)
        R, rel, (lower, diag, upper) = prob.residual(u)
        if root:
            dphi = np.abs(x) ** (1.0 / q - 1.0) / q
            rea = prob.V * prob.lam * g.deriv(u)
            inner = np.ones(u.size, bool)
            if isinstance(spec.left, Dirichlet):
                inner[0] = False
            if isinstance(spec.right, Dirichlet):
                inner[-1] = False
            diag = np.where(inner, (diag - rea) * dphi + prob.V * prob.lam * g.lam, diag * dphi)
            lower, upper = lower * dphi[:-1], upper * dphi[1:]
        return R, rel, (lower, diag, upper)

    R, rel, J = system(x)
    it = 0
    while rel > tol:
        if it >= max_iter:
            raise NonConvergenceError(f"radial Newton stopped at relative residual {rel:.3e}", rel, it)
        it += 1
        lower, diag, upper = J
        ab = np.zeros((3, r.size))
        ab[0, 1:] = upper
        ab[1] = diag
        ab[2, :-1] = lower
        d = solve_banded((1, 1), ab, -R)
        d = _limit_at_kinks(x, d, kinks)
        nr0 = np.linalg.norm(R)
        t = 1.0
        for _ in range(40):
            xn = x + t * d
            Rn, reln, Jn = system(xn)
            if np.linalg.norm(Rn) <= (1.0 - 1e-4 * t) * nr0 or reln <= tol:
                break
            t *= 0.5
        x, R, rel, J = xn, Rn, reln, Jn
    u = to_u(x)
    bl = prob.bflux(spec.left, u[0], True)
    if bl is None:
        F, _ = prob.flux(u)
        # flux through the inner end recovered from the first control volume balance
        g0 = prob.V[0] * prob.lam * float(prob.g(u[0])) if prob.lam > 0 else 0.0
        bflux = F[0] - g0 + prob.F[0]
    else:
        bflux = bl[0]
    return RadialProfile(r, u, rel, it, float(bflux))
