"""Discrete Dirichlet eigenbases on the unit interval and the unit square,
the optimal projection bound, the Poincare adversary and rigidity probes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh, solve_banded

from .errors import ArgumentError

ORTHO_TOL = 1e-10
VIOLATION_TOL = 1e-10


# ---------------------------------------------------------------- tridiagonal eigenpairs


def sturm_count(diag, off, x) -> np.ndarray:
    """Number of eigenvalues of the symmetric tridiagonal matrix below x
    (vectorized over x)."""
    x = np.atleast_1d(np.asarray(x, float))
    count = np.zeros(x.shape, np.int64)
    d = np.ones_like(x)
    with np.errstate(over="ignore", divide="ignore"):
        for i in range(len(diag)):
            d = diag[i] - x - (off[i - 1] ** 2 / d if i > 0 else 0.0)
            d = np.where(d == 0.0, -1e-300, d)
            count += d < 0
    return count


def _bisect_eigenvalues(diag, off, M: int, lo: float, hi: float) -> np.ndarray:
    """The M smallest eigenvalues by simultaneous bisection on the Sturm count."""
    k = np.arange(M)
    lo = np.full(M, lo)
    hi = np.full(M, hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        done = (mid == lo) | (mid == hi)
        if np.all(done):
            break
        up = sturm_count(diag, off, mid) > k
        hi = np.where(up & ~done, mid, hi)
        lo = np.where(~up & ~done, mid, lo)
    return 0.5 * (lo + hi)


def _inverse_iteration(diag, off, lam: float, iters: int = 4) -> np.ndarray:
    n = len(diag)
    shift = lam + 1e-12 * max(1.0, abs(lam))
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[1] = np.asarray(diag) - shift
    ab[2, :-1] = off
    x = np.ones(n) / math.sqrt(n)
    x[1::2] += 0.5 / math.sqrt(n)  # avoid starting orthogonal to the target
    for _ in range(iters):
        y = solve_banded((1, 1), ab, x)
        x = y / np.linalg.norm(y)
    return x


def tridiag_eigenpairs(diag, off, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Lowest M eigenpairs of a symmetric tridiagonal matrix (Euclidean-normalized
    eigenvectors, first component nonnegative). Assumes simple eigenvalues."""
    diag = np.asarray(diag, float)
    off = np.asarray(off, float)
    n = diag.size
    if not 1 <= M <= n:
        raise ArgumentError(f"need 1 <= M <= {n}")
    rad = np.abs(np.concatenate([[0.0], off])) + np.abs(np.concatenate([off, [0.0]]))
    lo, hi = float(np.min(diag - rad)), float(np.max(diag + rad))
    lam = _bisect_eigenvalues(diag, off, M, lo, hi)
    vecs = np.empty((M, n))
    for k in range(M):
        v = _inverse_iteration(diag, off, lam[k])
        vecs[k] = v if v[0] >= 0 else -v
    # re-orthogonalize against round-off drift
    q, r = np.linalg.qr(vecs.T)
    vecs = (q * np.sign(np.diag(r))).T
    return lam, vecs


# ---------------------------------------------------------------- bases


@dataclass(frozen=True)
class SpectralBasis:
    """Orthonormal eigenvectors in the lumped inner product (f, g) = w f.g,
    with discrete Dirichlet energy ||grad f||^2 = f.S f."""

    domain: str
    N: int
    lam: np.ndarray
    vecs: np.ndarray  # (M, dof)
    S: sp.csr_matrix
    w: float
    labels: tuple = ()

    @property
    def M(self) -> int:
        return self.lam.size

    @property
    def dof(self) -> int:
        return self.vecs.shape[1]

    @property
    def h(self) -> float:
        return 1.0 / (self.N + 1)

    def nodes(self) -> np.ndarray:
        x = self.h * np.arange(1, self.N + 1)
        if self.domain == "interval":
            return x
        X, Y = np.meshgrid(x, x, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    def inner(self, f, g) -> np.ndarray:
        return self.w * np.asarray(f, float) @ np.asarray(g, float).T

    def norm2(self, f) -> float:
        f = np.asarray(f, float)
        return float(self.w * f @ f)

    def grad2(self, f) -> float:
        f = np.asarray(f, float)
        return float(f @ (self.S @ f))

    def gram(self) -> np.ndarray:
        return self.inner(self.vecs, self.vecs)

    def coefficients(self, f, m: int | None = None) -> np.ndarray:
        E = self.vecs if m is None else self.vecs[:m]
        return self.inner(E, f)

    def project(self, f, m: int) -> np.ndarray:
        return self.coefficients(f, m) @ self.vecs[:m]


def _stiffness_1d(N: int) -> sp.csr_matrix:
    h = 1.0 / (N + 1)
    return sp.diags([-np.ones(N - 1), 2.0 * np.ones(N), -np.ones(N - 1)], [-1, 0, 1], format="csr") / h


def eigenbasis(domain: str, N: int, M: int | None = None) -> SpectralBasis:
    """domain 'interval': N interior nodes on (0,1); 'square': N x N interior
    nodes on (0,1)^2, tensor products sorted by eigenvalue with ties broken
    lexicographically on (m_x, m_y). M defaults to the full basis."""
    if N < 1:
        raise ArgumentError("need at least one interior node")
    h = 1.0 / (N + 1)
    S1 = _stiffness_1d(N)
    if domain == "interval":
        M = N if M is None else M
        if not 1 <= M <= N:
            raise ArgumentError(f"M must lie in [1, {N}]")
        lam, v = tridiag_eigenpairs(np.full(N, 2.0 / h ** 2), np.full(N - 1, -1.0 / h ** 2), M)
        vecs = v / math.sqrt(h)
        return SpectralBasis("interval", N, lam, vecs, S1, h, tuple(range(1, M + 1)))
    if domain == "square":
        dof = N * N
        M = dof if M is None else M
        if not 1 <= M <= dof:
            raise ArgumentError(f"M must lie in [1, {dof}]")
        lam1, v1 = tridiag_eigenpairs(np.full(N, 2.0 / h ** 2), np.full(N - 1, -1.0 / h ** 2), N)
        e1 = v1 / math.sqrt(h)
        mx, my = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
        mx, my = mx.ravel(), my.ravel()
        sums = lam1[mx] + lam1[my]
        order = np.lexsort((my, mx, sums))[:M]
        vecs = np.stack([np.outer(e1[mx[k]], e1[my[k]]).ravel() for k in order])
        I = sp.identity(N, format="csr")
        S = (h * (sp.kron(S1, I) + sp.kron(I, S1))).tocsr()
        labels = tuple((int(mx[k]) + 1, int(my[k]) + 1) for k in order)
        return SpectralBasis("square", N, sums[order], vecs, S, h * h, labels)
    raise ArgumentError(f"unknown spectral domain {domain!r}")


def exact_interval_eigenvalue(N: int, m) -> np.ndarray:
    h = 1.0 / (N + 1)
    return 4.0 / h ** 2 * np.sin(np.asarray(m) * np.pi * h / 2.0) ** 2


# ---------------------------------------------------------------- projection bound


def projection_bound_check(basis: SpectralBasis, f, m: int) -> float:
    """||grad f||^2 / lam_{m+1} - ||f - P_m f||^2 with P_m the projection on e_1..e_m."""
    if not 0 <= m < basis.M:
        raise ArgumentError(f"m must lie in [0, {basis.M - 1}]")
    f = np.asarray(f, float)
    r = f - basis.project(f, m) if m > 0 else f
    return basis.grad2(f) / basis.lam[m] - basis.norm2(r)


# ---------------------------------------------------------------- adversary


@dataclass(frozen=True)
class AdversaryResult:
    f: np.ndarray
    c: np.ndarray  # coefficients on e_1..e_{m+1}
    rho: float
    rank: int
    degenerate: bool  # numerical rank below m


def null_vector(A, rtol: float = 1e-12) -> tuple[np.ndarray, int]:
    """A nonzero null vector of an m x (m+1) matrix by Gaussian elimination with
    partial pivoting; the first non-pivot column is set to one."""
    U = np.array(A, float, copy=True)
    m, n = U.shape
    if n <= m:
        raise ArgumentError("need more unknowns than equations")
    scale = max(float(np.max(np.abs(U))), 1e-300)
    pivots = []
    row = 0
    for col in range(n):
        if row == m:
            break
        p = row + int(np.argmax(np.abs(U[row:, col])))
        if abs(U[p, col]) <= rtol * scale:
            continue
        U[[row, p]] = U[[p, row]]
        U[row + 1:] -= np.outer(U[row + 1:, col] / U[row, col], U[row])
        pivots.append(col)
        row += 1
    free = [c for c in range(n) if c not in pivots][0]
    x = np.zeros(n)
    x[free] = 1.0
    for i in range(len(pivots) - 1, -1, -1):
        c = pivots[i]
        x[c] = -(U[i, c + 1:] @ x[c + 1:]) / U[i, c]
    return x, len(pivots)


def poincare_adversary(psi, basis: SpectralBasis) -> AdversaryResult:
    """f in span(e_1..e_{m+1}) orthogonal to psi_1..psi_m, and the ratio
    rho = ||f - sum (f, psi_j) psi_j||^2 lam_{m+1} / ||grad f||^2."""
    psi = np.atleast_2d(np.asarray(psi, float))
    m = psi.shape[0]
    if m >= basis.M:
        raise ArgumentError("need fewer test functions than basis vectors")
    A = basis.inner(psi, basis.vecs[:m + 1])
    c, rank = null_vector(A)
    f = c @ basis.vecs[:m + 1]
    nf = math.sqrt(basis.norm2(f))
    f, c = f / nf, c / nf
    r = f - basis.inner(psi, f) @ psi
    rho = basis.norm2(r) * basis.lam[m] / basis.grad2(f)
    return AdversaryResult(f=f, c=c, rho=float(rho), rank=rank, degenerate=rank < m)


def worst_projection_margin(basis: SpectralBasis, b, m: int) -> tuple[float, np.ndarray]:
    """min over f of 1 - lam_{m+1} ||f - P_b f||^2 / ||grad f||^2, i.e. the exact
    discrete worst case of the projection bound for b_1..b_m, with its minimizer."""
    b = np.atleast_2d(np.asarray(b, float))[:m]
    w = basis.w
    Q = w * np.eye(basis.dof) - w * w * (b.T @ b)
    K = basis.S.toarray()
    vals, vecs = eigh(Q, K, subset_by_index=[basis.dof - 1, basis.dof - 1])
    return float(1.0 - basis.lam[m] * vals[0]), vecs[:, 0]


@dataclass(frozen=True)
class ProbeRow:
    m: int
    violation: bool
    rho: float  # adversary ratio
    worst_margin: float  # exact discrete worst case
    f_components: np.ndarray  # |(f, e_k)| of the witness

    def row(self) -> tuple:
        comps = ";".join(f"{x:.6e}" for x in self.f_components)
        return (self.m, int(self.violation), comps)


@dataclass(frozen=True)
class ProbeReport:
    passed: bool
    rows: list
    witness: tuple | None  # (m, f) of the first violation
    pattern_max: float = math.nan  # max |(b_j, e_k)| over j <= i < k at strict gaps
    pattern: dict = field(default_factory=dict)

    HEADER = ("m", "violation", "|f_components|")


def check_orthonormal(basis: SpectralBasis, b) -> None:
    G = basis.inner(b, b)
    err = float(np.max(np.abs(G - np.eye(G.shape[0]))))
    if err > ORTHO_TOL:
        raise ArgumentError(f"candidate sequence not orthonormal (defect {err:.2e})")


def rigidity_probe(b, basis: SpectralBasis, m_max: int, n_components: int = 6) -> ProbeReport:
    """For m <= m_max look for f violating the projection bound against b_1..b_m,
    first with the adversary, then with the exact worst case. On a pass, measure
    the orthogonality pattern (b_j, e_k) = 0 for j <= i < k at strict gaps."""
    b = np.atleast_2d(np.asarray(b, float))
    check_orthonormal(basis, b)
    m_max = min(m_max, b.shape[0], basis.M - 1)
    rows, witness = [], None
    for m in range(1, m_max + 1):
        adv = poincare_adversary(b[:m], basis)
        worst, fw = worst_projection_margin(basis, b, m)
        viol_adv = adv.rho > 1.0 + VIOLATION_TOL
        violation = viol_adv or worst < -VIOLATION_TOL
        f = adv.f if viol_adv else fw / math.sqrt(basis.norm2(fw))
        comps = np.abs(basis.coefficients(f, min(n_components, basis.M)))
        rows.append(ProbeRow(m, violation, adv.rho, worst, comps))
        if violation and witness is None:
            witness = (m, f)
    if witness is not None:
        return ProbeReport(False, rows, witness)
    C = np.abs(basis.inner(b[:m_max], basis.vecs))  # (b_j, e_k)
    pattern, worst_p = {}, 0.0
    lam = basis.lam
    for i in range(1, m_max + 1):
        if i < basis.M and lam[i - 1] < lam[i] * (1.0 - 1e-12):
            v = float(np.max(C[:i, i:]))
            pattern[i] = v
            worst_p = max(worst_p, v)
    return ProbeReport(True, rows, None, worst_p, pattern)


# ---------------------------------------------------------------- one-vector family


def family_vector(basis: SpectralBasis, chi, eps: float) -> np.ndarray:
    """b = alpha e_1 + eps chi with alpha^2 + eps^2 = 1, chi normalized and
    orthogonal to e_1, e_2."""
    if not 0 <= eps <= 1:
        raise ArgumentError("eps must lie in [0, 1]")
    return math.sqrt(1.0 - eps * eps) * basis.vecs[0] + eps * np.asarray(chi, float)


def family_chi(basis: SpectralBasis, seed: int | None = None) -> np.ndarray:
    """e_3 when seed is None, otherwise a seeded random vector orthogonalized
    against e_1, e_2 and normalized."""
    if seed is None:
        return basis.vecs[2].copy()
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(basis.dof)
    x -= basis.project(x, 2)
    return x / math.sqrt(basis.norm2(x))


@dataclass(frozen=True)
class EpsZeroResult:
    eps0: float
    lo: float
    hi: float
    iterations: int
    margin_lo: float
    margin_hi: float
    e2_overlap: float  # |(e_2, b_1)| at eps = lo


def family_eps0(basis: SpectralBasis, chi, tol: float = 1e-10, iters: int = 80) -> EpsZeroResult:
    """Largest eps for which b_1 = alpha e_1 + eps chi satisfies the m = 1
    projection bound, by bisection on the exact worst margin."""
    if basis.lam[1] >= basis.lam[2]:
        raise ArgumentError("the family needs lam_2 < lam_3")
    chi = np.asarray(chi, float)
    if abs(basis.inner(chi, basis.vecs[0])) > ORTHO_TOL or abs(basis.inner(chi, basis.vecs[1])) > ORTHO_TOL:
        raise ArgumentError("chi must be orthogonal to e_1 and e_2")
    margin = lambda e: worst_projection_margin(basis, family_vector(basis, chi, e), 1)[0]
    lo, hi = 0.0, 1.0
    ok = lambda e: margin(e) >= -VIOLATION_TOL
    if ok(hi):
        raise ArgumentError("the whole family satisfies the bound; no threshold")
    k = 0
    while hi - lo > tol and k < iters:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
        k += 1
    b = family_vector(basis, chi, lo)
    return EpsZeroResult(eps0=0.5 * (lo + hi), lo=lo, hi=hi, iterations=k, margin_lo=margin(lo),
                         margin_hi=margin(hi), e2_overlap=float(abs(basis.inner(b, basis.vecs[1]))))


def family_eps0_exact(lam1: float, lam2: float, lam3: float) -> float:
    """Threshold for chi = e_3: the 2x2 form on span(e_1, e_3) stops being
    nonnegative at eps^2 = lam1 (lam3 - lam2) / (lam2 (lam3 - lam1))."""
    return math.sqrt(lam1 * (lam3 - lam2) / (lam2 * (lam3 - lam1)))
