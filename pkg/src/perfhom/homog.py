"""Homogenization constants, the strange term and its radial oracle, periodic
cell problems, the explicit corrector, and the homogenized limit problems.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.integrate import simpson

from .errors import ArgumentError, DomainError, KineticsError, MeshError, ScaleError
from .kinetics import Kinetics, Linear
from .mesh import StarShape, Tag, TriMesh
from .pde import (DecayMatched, EllipticSpec, GridFunction, RadialProfile, RadialSpec, Robin,
                  _direct, _tri_coeff_matrices, assemble, solve_radial, solve_semilinear)
from .kinetics import Custom

BIG, SUBCRITICAL, CRITICAL, SUPERCRITICAL = "big", "subcritical", "critical", "supercritical"


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{n-1}."""
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def ball_volume(n: int) -> float:
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def calB0(n: int, p: float, C0: float) -> float:
    if not p < n:
        raise DomainError("B0 is defined for p < n only")
    return ((n - p) / (C0 * (p - 1.0))) ** (p - 1.0)


def calA(n: int, p: float, C0: float) -> float:
    """Critical capacity coefficient; the angular factor is the area of S^{n-1}."""
    if not p < n:
        raise DomainError("the critical coefficient is defined for p < n only")
    return ((n - p) / (p - 1.0)) ** (p - 1.0) * C0 ** (n - p) * sphere_area(n)


def critical_exponent(n: int, p: float) -> float:
    return n / (n - p) if p < n else math.inf


def critical_scale(n: int, p: float, eps: float) -> float:
    if p < n:
        return eps ** (n / (n - p))
    if p == n:
        return eps * math.exp(-eps ** (-n / (n - 1.0)))
    return 0.0


def classify_regime(n: int, p: float, alpha: float, exponential_law: bool = False) -> str:
    if alpha < 1:
        raise ArgumentError("alpha must be at least 1")
    if alpha == 1:
        return BIG
    if p < n:
        ac = n / (n - p)
        if abs(alpha - ac) <= 1e-12 * ac:
            return CRITICAL
        return SUBCRITICAL if alpha < ac else SUPERCRITICAL
    if p == n and exponential_law:
        return CRITICAL
    return SUBCRITICAL


@dataclass(frozen=True)
class ScalingLaw:
    n: int = 2
    p: float = 2.0
    C0: float = 1.0
    alpha: float = 1.0
    gamma: float | None = None  # None selects the matching exponent gamma*
    exponential_law: bool = False  # p = n with holes of size eps exp(-eps^(-n/(n-1)))

    def __post_init__(self):
        if self.n < 2 or not self.p > 1 or not self.C0 > 0 or self.alpha < 1:
            raise ArgumentError("scaling law needs n >= 2, p > 1, C0 > 0, alpha >= 1")

    @property
    def gamma_star(self) -> float:
        return self.alpha * (self.n - 1) - self.n

    @property
    def gamma_eff(self) -> float:
        return self.gamma_star if self.gamma is None else float(self.gamma)

    @property
    def critical(self) -> bool:
        return classify_regime(self.n, self.p, self.alpha, self.exponential_law) == CRITICAL

    @property
    def regime(self) -> str:
        return classify_regime(self.n, self.p, self.alpha, self.exponential_law)

    def a(self, eps: float) -> float:
        return self.C0 * eps ** self.alpha

    def beta(self, eps: float) -> float:
        return eps ** (-self.gamma_eff)


@dataclass(frozen=True)
class HomogCoeffs:
    eps: float
    a_eps: float
    calA: float
    B0: float
    theta: tuple
    beta_star: float
    gamma_star: float
    mu_eps: float
    beta0: float
    a_star: float
    a_star_law: str
    regime: str
    perimeter: float
    volume: float


def coefficients(law: ScalingLaw, shape: StarShape | None, eps: float,
                 perimeter: float | None = None, volume: float | None = None) -> HomogCoeffs:
    """All scalar constants at scale eps. In dimension n != 2 the particle is
    the unit n-ball; `perimeter`/`volume` override the shape measures."""
    n, p, C0 = law.n, law.p, law.C0
    if perimeter is None or volume is None:
        if n == 2:
            if shape is None:
                raise ArgumentError("a particle shape is needed in two dimensions")
            per, vol = shape.perimeter, shape.area
        else:
            per, vol = sphere_area(n), ball_volume(n)
        perimeter = per if perimeter is None else perimeter
        volume = vol if volume is None else volume
    a = law.a(eps)
    beta_star = a ** (1 - n) * eps ** n
    gs = law.gamma_star
    frac = (a / eps) ** n * volume
    mu = eps ** (-n) * a ** (n - 1) * perimeter / (1.0 - frac) if frac < 1 else math.inf
    g = law.gamma_eff
    if abs(g - gs) <= 1e-12 * max(1.0, abs(gs)):
        beta0 = perimeter * C0 ** (n - 1)
    elif g < gs:
        beta0 = 0.0
    else:
        beta0 = math.inf
    if p < n:
        A, B = calA(n, p, C0), calB0(n, p, C0)
        lawname = "power"
    else:
        A = B = math.nan
        lawname = "exponential" if p == n else "zero"
    return HomogCoeffs(eps=eps, a_eps=a, calA=A, B0=B, theta=(B, p), beta_star=beta_star,
                       gamma_star=gs, mu_eps=mu, beta0=beta0, a_star=critical_scale(n, p, eps),
                       a_star_law=lawname, regime=law.regime, perimeter=perimeter, volume=volume)


# ---------------------------------------------------------------- strange term


def _phi(x, p):
    x = np.asarray(x, float)
    return x if p == 2 else np.sign(x) * np.abs(x) ** (p - 1.0)


def bisect_functional(B0: float, p: float, sigma: Callable, r, lo=None, hi=None,
                      iters: int = 200) -> np.ndarray:
    """Solve B0 |H|^{p-2} H = sigma(r - H) for H by bisection on the increasing
    map F(H) = B0 |H|^{p-2} H - sigma(r - H). Without explicit brackets the
    interval [min(0,r), max(0,r)] is used, which is valid when sigma(0) = 0."""
    r = np.atleast_1d(np.asarray(r, float))
    lo = np.minimum(0.0, r) if lo is None else np.broadcast_to(np.asarray(lo, float), r.shape).copy()
    hi = np.maximum(0.0, r) if hi is None else np.broadcast_to(np.asarray(hi, float), r.shape).copy()
    F = lambda H: B0 * _phi(H, p) - sigma(r - H)
    with np.errstate(invalid="ignore"):
        flo, fhi = F(lo), F(hi)
    bad = (flo > 1e-12 * (1 + np.abs(lo))) | (fhi < -1e-12 * (1 + np.abs(hi)))
    if np.any(bad):
        raise KineticsError(f"bracket sign check failed at r={r[np.argmax(bad)]:.6g}; kinetics not monotone?")
    # an exact root at an end collapses the bracket there
    hi = np.where(flo == 0, lo, hi)
    lo = np.where(fhi == 0, hi, lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        with np.errstate(invalid="ignore"):
            fm = F(mid)
        if np.all((mid == lo) | (mid == hi)):
            break
        left = fm <= 0
        lo = np.where(left, mid, lo)
        hi = np.where(left, hi, mid)
        hit = fm == 0
        lo, hi = np.where(hit, mid, lo), np.where(hit, mid, hi)
    return 0.5 * (lo + hi)


class StrangeTerm:
    """H(r) solving B0 |H|^{p-2} H = sigma(r - H), with B0 = B0(n, p, C0)."""

    def __init__(self, kinetics: Kinetics, n: int, p: float, C0: float):
        self.kinetics = kinetics
        self.n, self.p, self.C0 = n, p, C0
        self.B0 = calB0(n, p, C0)

    def __call__(self, r):
        return self.evaluate(r)

    def evaluate(self, r):
        r_arr = np.asarray(r, float)
        H = bisect_functional(self.B0, self.p, self.kinetics, r_arr)
        return H.reshape(r_arr.shape) if r_arr.ndim else float(H[0])

    def reaction(self, r):
        """r -> |H(r)|^{p-2} H(r)."""
        return _phi(self.evaluate(r), self.p)

    def inclusion_gap(self, r) -> np.ndarray:
        """Distance of B0*Theta(H) from the graph interval [sigma(s-), sigma(s+)]."""
        r = np.asarray(r, float)
        H = np.asarray(self.evaluate(r))
        sarg = r - H
        lo, hi = self.kinetics.limits(sarg)
        tol = 1e-12 * (1.0 + np.abs(r))
        for x, a, b in self.kinetics.jumps():
            near = np.abs(sarg - x) <= tol
            lo = np.where(near, a, lo)
            hi = np.where(near, b, hi)
        t = self.B0 * _phi(H, self.p)
        with np.errstate(invalid="ignore"):
            return np.maximum(0.0, np.maximum(lo - t, t - hi))

    def as_kinetics(self, scale: float = 1.0) -> Kinetics:
        """scale * |H(.)|^{p-2}H(.) as a single-valued kinetics for the solvers."""
        def fn(s):
            return scale * self.reaction(s)

        def dfn(s):
            h = 1e-6 * np.maximum(1.0, np.abs(s))
            return (fn(s + h) - fn(s - h)) / (2.0 * h)
        return Custom(fn, dfn, f"strange[{self.kinetics.name}]")


def strange_term(kinetics: Kinetics, n: int, p: float, C0: float) -> StrangeTerm:
    if not p < n:
        raise DomainError("the strange term requires p < n")
    return StrangeTerm(kinetics, n, p, C0)


def exterior_radial_H(kinetics: Kinetics, n: int, C0: float, u: float, R: float = 100.0,
                      N: int = 400) -> tuple[RadialProfile, float]:
    """Radial exterior problem around the unit ball: harmonic w on [1, R],
    -w'(1) = C0 sigma(u - w(1)), decay-matched at R. Returns the profile and
    the total flux through the sphere divided by (n-2)|S^{n-1}|."""
    if n < 3:
        raise ArgumentError("exterior problem needs n >= 3")
    if R < 50:
        raise ArgumentError("truncation radius must be at least 50")
    k = Custom(lambda w: -kinetics(u - w), lambda w: kinetics.deriv(u - w),
               f"shift[{kinetics.name}]", kinks=tuple(u - c for c in kinetics.kinks))
    spec = RadialSpec(n=n, p=2.0, r0=1.0, R=R, N=N, grid="geometric",
                      left=Robin(C0, k), right=DecayMatched(), exterior=True)
    prof = solve_radial(spec)
    total = -prof.boundary_flux * sphere_area(n)
    return prof, total / ((n - 2) * sphere_area(n))


# ---------------------------------------------------------------- critical reaction


class CriticalReaction:
    """h(w) for the w-form of the critical limit: B0 |h|^{p-2} h = sigma_hat(w - h)."""

    def __init__(self, sigma_hat: Kinetics, n: int, p: float, C0: float):
        self.sigma_hat = sigma_hat
        self.n, self.p, self.C0 = n, p, C0
        self.H = strange_term(sigma_hat, n, p, C0)

    def __call__(self, w):
        return self.H.evaluate(w)

    def via_shifted_problem(self, w):
        """Same function through the u-variable equation
        B0 |H|^{p-2}H = sigma(s - H) - sigma_hat(1), sigma(u) = sigma_hat(1) - sigma_hat(1-u),
        with h(w) = -H(1 - w)."""
        sh = self.sigma_hat
        s1 = float(sh(1.0))
        rhs = lambda x: (s1 - sh(1.0 - x)) - s1
        w = np.atleast_1d(np.asarray(w, float))
        s = 1.0 - w
        B0 = self.H.B0
        lo, hi = -np.ones_like(s), np.ones_like(s)
        F = lambda H: B0 * _phi(H, self.p) - rhs(s - H)
        for _ in range(200):
            g = F(lo) > 0
            if not np.any(g):
                break
            lo = np.where(g, 2 * lo, lo)
        for _ in range(200):
            g = F(hi) < 0
            if not np.any(g):
                break
            hi = np.where(g, 2 * hi, hi)
        H = bisect_functional(B0, self.p, rhs, s, lo, hi)
        return -H

    def as_kinetics(self, scale: float) -> Kinetics:
        return self.H.as_kinetics(scale)


def critical_reaction(sigma_hat: Kinetics, n: int, p: float, C0: float) -> CriticalReaction:
    return CriticalReaction(sigma_hat, n, p, C0)


# ---------------------------------------------------------------- cell problem


@dataclass(frozen=True)
class CellSolution:
    chi: tuple
    q: np.ndarray
    alpha: float
    isotropic: bool
    lam: float
    perimeter: float
    free_area: float


def periodic_master(mesh: TriMesh, tol: float = 1e-10) -> np.ndarray:
    """Map every node to its periodic representative (x = +1/2 -> -1/2,
    y = +1/2 -> -1/2)."""
    X = mesh.nodes
    key = lambda x, y: (round(x / tol), round(y / tol))
    lookup = {key(x, y): i for i, (x, y) in enumerate(X.tolist())}
    master = np.arange(mesh.n_nodes)
    for axis in (0, 1):
        for i in range(mesh.n_nodes):
            j = master[i]
            x, y = X[j]
            c = (x, y)[axis]
            if abs(c - 0.5) < tol:
                target = (-0.5, y) if axis == 0 else (x, -0.5)
                k = lookup.get(key(*target))
                if k is None:
                    raise MeshError(f"node {i} at {tuple(X[i])} has no periodic partner")
                master[i] = k
    return master


def cell_effective_matrix(cell: TriMesh) -> CellSolution:
    if not cell.has_tag(Tag.OUTER):
        raise MeshError("cell mesh needs Outer edges")
    master = periodic_master(cell)
    dofs, idx = np.unique(master, return_inverse=True)
    idx = idx.ravel()
    P = sp.csr_matrix((np.ones(cell.n_nodes), (np.arange(cell.n_nodes), idx)),
                      shape=(cell.n_nodes, dofs.size))
    local = _tri_coeff_matrices(cell)
    K = assemble(cell, local)
    Kr = (P.T @ K @ P).tocsr()
    G = cell.gradients()
    area = cell.areas
    free_area = cell.area
    chis = []
    for i in range(2):
        b = np.zeros(cell.n_nodes)
        np.add.at(b, cell.tris.ravel(), -(area[:, None] * G[:, :, i]).ravel())
        br = P.T @ b
        x = np.zeros(dofs.size)
        if dofs.size > 1:
            keep = np.arange(1, dofs.size)
            x[keep] = _direct(Kr[keep][:, keep], br[keep])
        chi = P @ x
        chi -= np.dot(chi, cell.lumped) / free_area
        chis.append(chi)
    q = np.eye(2)
    for j in range(2):
        gj = cell.field_gradient(chis[j])
        for i in range(2):
            q[i, j] += np.dot(area, gj[:, i]) / free_area
    iso = abs(q[0, 1]) <= 1e-8 and abs(q[1, 0]) <= 1e-8 and abs(q[0, 0] - q[1, 1]) <= 1e-8
    alpha = q[0, 0] if iso else 0.5 * (q[0, 0] + q[1, 1])
    per = cell.boundary_length(Tag.PARTICLE) if cell.has_tag(Tag.PARTICLE) else 0.0
    lam = per / (alpha * free_area)
    from .pde import GridFunction as GF
    return CellSolution(chi=tuple(GF(cell, c) for c in chis), q=q, alpha=float(alpha), isotropic=iso,
                        lam=float(lam), perimeter=per, free_area=free_area)


# ---------------------------------------------------------------- corrector


@dataclass(frozen=True)
class CorrectorW:
    eps: float
    a: float
    n: int
    p: float

    @property
    def k(self) -> float:
        return (self.n - self.p) / (self.p - 1.0)

    def __call__(self, r):
        k = self.k
        r = np.asarray(r, float)
        b = (self.eps / 4.0) ** (-k)
        return (r ** (-k) - b) / (self.a ** (-k) - b)

    def dr(self, r):
        k = self.k
        b = (self.eps / 4.0) ** (-k)
        return -k * np.asarray(r, float) ** (-k - 1.0) / (self.a ** (-k) - b)

    def seminorm_q(self, q: float, npts: int = 10001) -> float:
        """eps^{-n} * int over one annulus of |grad w|^q (Simpson in log r)."""
        t = np.linspace(math.log(self.a), math.log(self.eps / 4.0), npts)
        r = np.exp(t)
        integrand = np.abs(self.dr(r)) ** q * r ** self.n
        cell = sphere_area(self.n) * simpson(integrand, x=t)
        return self.eps ** (-self.n) * cell


def corrector_W(law: ScalingLaw, eps: float) -> CorrectorW:
    if not law.p < law.n:
        raise DomainError("corrector requires p < n")
    a = law.a(eps)
    if a >= eps / 4.0:
        raise ScaleError(f"a_eps = {a:.4g} is not below eps/4 = {eps / 4:.4g}")
    return CorrectorW(eps, a, law.n, law.p)


def corrector_rate(n: int, p: float, q: float) -> float:
    """Exponent of the exact eps-decay of eps^{-n} int |grad w|^q for the
    critical size: the smaller of n(p-q)/(n-p) and q/(p-1) (logarithmic
    correction when they coincide)."""
    return min(n * (p - q) / (n - p), q / (p - 1.0))


# ---------------------------------------------------------------- homogenized problems


def solve_homogenized(regime: str, seed: EllipticSpec, coeffs: HomogCoeffs | None = None,
                      cell: CellSolution | None = None, H: StrangeTerm | None = None) -> GridFunction:
    """The seed carries the mesh of Omega, f, the Dirichlet value, the particle
    kinetics (boundary_kinetics) and the particle source (boundary_source)."""
    sigma = seed.boundary_kinetics
    g = seed.boundary_source
    base = dict(boundary_kinetics=None, boundary_weight=0.0, boundary_source=0.0)
    if regime == BIG:
        if cell is None:
            raise ArgumentError("big regime needs the cell solution")
        w = cell.perimeter / cell.free_area
        spec = seed.replace(A=cell.q, volume_kinetics=sigma if w > 0 else None, volume_weight=w,
                            f=_add(seed, seed.f, w, g), **base)
    elif regime == SUBCRITICAL:
        if coeffs is None or not np.isfinite(coeffs.beta0):
            raise ArgumentError("subcritical regime needs a finite beta0")
        b0 = coeffs.beta0
        spec = seed.replace(A=None, volume_kinetics=sigma if b0 > 0 else None, volume_weight=b0,
                            f=_add(seed, seed.f, b0, g), **base)
    elif regime in (CRITICAL, "critical_ball"):
        if H is None or coeffs is None or not np.isfinite(coeffs.calA):
            raise ArgumentError("critical regime needs the strange term and the coefficient A")
        spec = seed.replace(A=None, volume_kinetics=H.as_kinetics(1.0), volume_weight=coeffs.calA, **base)
    else:
        raise ArgumentError(f"unknown regime {regime!r}")
    return solve_semilinear(spec)


def _add(seed, f, w, g):
    from .pde import _nodal
    return _nodal(seed.mesh, f, "f") + w * _nodal(seed.mesh, g, "g")
