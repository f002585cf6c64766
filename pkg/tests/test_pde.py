import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from perfhom.errors import ArgumentError, UnsupportedError
from perfhom.kinetics import Heaviside, Linear, Power
from perfhom.mesh import StarShape, Tag, build_cell_mesh, build_plain_mesh, tile_perforated
from perfhom.pde import (DecayMatched, Dirichlet, EllipticSpec, GridFunction, Neumann, RadialSpec, discrete_energy,
                         pcg, plaplace_coefficient, solve_linear_potential, solve_radial, solve_semilinear, stiffness)


def _l2(mesh, v):
    return math.sqrt(float(np.dot(mesh.lumped, v ** 2)))


def _x_only(mesh, fn):
    """Dirichlet data from a function of x alone, so the 2D solution is fn(x)."""
    return fn(mesh.nodes[:, 0])


def test_zero_data_gives_zero():
    m = build_plain_mesh(("rect", 1.0, 1.0), 8)
    u = solve_semilinear(EllipticSpec(mesh=m, volume_kinetics=Linear(1.0), volume_weight=1.0))
    assert np.all(u.values == 0.0)


def test_poisson_strip_parabola():
    fn = lambda x: x * (1 - x) / 2
    errs = []
    for n in (8, 16, 32):
        m = build_plain_mesh(("rect", 1.0, 0.25), (n, max(2, n // 4)))
        u = solve_semilinear(EllipticSpec(mesh=m, f=1.0, dirichlet=_x_only(m, fn)))
        assert u.residual <= 1e-9
        errs.append(_l2(m, u.values - fn(m.nodes[:, 0])))
        assert np.max(u.values) == pytest.approx(0.125, abs=2.0 / n ** 2)
    assert all(e < 1e-12 or e / f >= 3 for e, f in zip(errs, errs[1:]))


def test_reaction_closed_form_second_order():
    fn = lambda x: 1 - np.cosh(x - 0.5) / math.cosh(0.5)
    errs = []
    for n in (8, 16, 32, 64):
        m = build_plain_mesh(("rect", 1.0, 0.25), (n, max(2, n // 4)))
        u = solve_semilinear(EllipticSpec(mesh=m, volume_kinetics=Linear(1.0), volume_weight=1.0, f=1.0,
                                          dirichlet=_x_only(m, fn)))
        errs.append(_l2(m, u.values - fn(m.nodes[:, 0])))
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    assert min(ratios) >= 3.0, ratios


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_p_laplacian_one_dimensional_profile(p):
    k = p / (p - 1)
    fn = lambda x: (p - 1) / p * (0.5 ** k - np.abs(x - 0.5) ** k)
    m = build_plain_mesh(("rect", 1.0, 0.25), (32, 8))
    u = solve_semilinear(EllipticSpec(mesh=m, p=p, f=1.0, dirichlet=_x_only(m, fn)))
    assert np.max(np.abs(u.values - fn(m.nodes[:, 0]))) < 5e-3


def test_p2_flux_coefficient_is_exactly_one():
    m = build_plain_mesh(("rect", 1.0, 1.0), 6)
    c = plaplace_coefficient(m, np.random.default_rng(0).normal(size=m.n_nodes), 2.0)
    assert np.all(c == 1.0)


def test_spec_validation():
    m = build_plain_mesh(("rect", 1.0, 1.0), 4)
    with pytest.raises(ArgumentError):
        EllipticSpec(mesh=m, p=1.0)
    with pytest.raises(ArgumentError):
        EllipticSpec(mesh=m, A=[[1.0, 0.5], [0.5, 0.1]])
    with pytest.raises(ArgumentError):
        EllipticSpec(mesh=m, p=3.0, A=[[2.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ArgumentError):
        EllipticSpec(mesh=m, volume_weight=-1.0)
    with pytest.raises(UnsupportedError):
        solve_semilinear(EllipticSpec(mesh=m, volume_kinetics=Heaviside(), volume_weight=1.0, f=1.0))


def test_linear_potential_consistency():
    m = build_plain_mesh(("disk", 1.0), 12)
    f = 1.0 + m.nodes[:, 0] ** 2
    a = solve_linear_potential(m, 0.0, f, 0.0)
    b = solve_semilinear(EllipticSpec(mesh=m, f=f, dirichlet=0.0), tol=1e-13)
    assert np.max(np.abs(a.values - b.values)) <= 1e-12
    c = solve_linear_potential(m, 0.0, 0.0, 2.5)
    assert np.max(np.abs(c.values - 2.5)) <= 1e-12
    fn = lambda x: 1 - np.cosh(x - 0.5) / math.cosh(0.5)
    s = build_plain_mesh(("rect", 1.0, 0.25), (64, 16))
    d = solve_linear_potential(s, 1.0, 1.0, _x_only(s, fn))
    assert d.residual <= 1e-12
    assert _l2(s, d.values - fn(s.nodes[:, 0])) < 1e-4
    with pytest.raises(ArgumentError):
        solve_linear_potential(m, -1.0, 0.0, 0.0)


def test_pcg_matches_direct():
    m = build_plain_mesh(("rect", 1.0, 1.0), 10)
    K = stiffness(m) + np.eye(m.n_nodes) * 0.0
    import scipy.sparse as sp
    K = sp.csr_matrix(K) + sp.identity(m.n_nodes)
    b = np.random.default_rng(1).normal(size=m.n_nodes)
    x, res, its = pcg(K, b)
    assert res <= 1e-12
    assert np.allclose(K @ x, b, atol=1e-10)


def _perforated_spec(weight, f=0.0):
    c = build_cell_mesh(StarShape.disk(1.0), 0.25, 16, 4)
    m = tile_perforated(c, 3)
    return EllipticSpec(mesh=m, boundary_kinetics=Linear(1.0), boundary_weight=weight, f=f, dirichlet=1.0)


@given(st.floats(0.0, 20.0), st.floats(0.0, 20.0))
def test_monotone_in_reaction_weight(b1, b2):
    lo, hi = min(b1, b2), max(b1, b2)
    u1 = solve_semilinear(_perforated_spec(lo)).values
    u2 = solve_semilinear(_perforated_spec(hi)).values
    assert np.all(u2 <= u1 + 1e-8)
    assert np.all(u2 >= -1e-8) and np.all(u1 <= 1 + 1e-8)


@given(st.floats(0.0, 1.0))
def test_box_bound_with_source(fr):
    # 0 <= f <= sigma_hat(1) * lam_vol with boundary value 1
    m = build_plain_mesh(("rect", 1.0, 1.0), 12)
    u = solve_semilinear(EllipticSpec(mesh=m, volume_kinetics=Power(lam=3.0, q=0.5), volume_weight=1.0,
                                      f=3.0 * fr, dirichlet=1.0))
    assert np.all(u.values >= -1e-8) and np.all(u.values <= 1 + 1e-8)


def test_energy_descent():
    m = build_plain_mesh(("disk", 1.0), 12)
    spec = EllipticSpec(mesh=m, volume_kinetics=Power(lam=2.0, q=0.5), volume_weight=1.0, f=1.0)
    u = solve_semilinear(spec)
    assert discrete_energy(spec, u.values) <= discrete_energy(spec, np.zeros(m.n_nodes)) + 1e-10


def test_deterministic_bits():
    s = _perforated_spec(4.0, f=0.3)
    assert np.array_equal(solve_semilinear(s).values, solve_semilinear(s).values)


def test_gridfunction_csv(tmp_path):
    m = build_plain_mesh(("rect", 1.0, 1.0), 2)
    GridFunction(m, np.arange(m.n_nodes, dtype=float)).to_csv(tmp_path / "g.csv")
    assert (tmp_path / "g.csv").read_text().splitlines()[0] == "node_index,x,y,value"
    with pytest.raises(ArgumentError):
        GridFunction(m, np.zeros(3))


def test_radial_harmonic_tail():
    prof = solve_radial(RadialSpec(n=3, p=2.0, r0=1.0, R=100.0, N=2000, left=Dirichlet(1.0), right=DecayMatched()))
    assert float(prof(2.0)) == pytest.approx(0.5, abs=1e-6)


def test_radial_corrector_profile_exact_for_harmonic():
    eps = 0.125
    a = eps ** 3
    k = 1.0
    b = (eps / 4) ** (-k)
    exact = lambda r: (r ** (-k) - b) / (a ** (-k) - b)
    errs = []
    for N in (51, 101, 201):
        prof = solve_radial(RadialSpec(n=3, p=2.0, r0=a, R=eps / 4, N=N, left=Dirichlet(1.0),
                                       right=Dirichlet(0.0)))
        errs.append(np.max(np.abs(prof.values - exact(prof.r))))
    # the flux weights integrate r^{1-n} exactly, so radial harmonics are reproduced
    assert max(errs) <= 1e-12


def test_radial_dead_core_against_finer_grid():
    common = dict(n=1, p=2.0, r0=0.0, R=1.0, grid="uniform", kinetics=Power(lam=60.0, q=0.5), weight=1.0,
                  left=Neumann(), right=Dirichlet(1.0))
    coarse = solve_radial(RadialSpec(N=2001, **common))
    fine = solve_radial(RadialSpec(N=20001, **common))
    assert np.min(coarse.values) <= 1e-10  # plateau w = 0 in the interior
    assert np.max(np.abs(coarse.values - fine(coarse.r))) <= 1e-6


def test_radial_rejects_bad_specs():
    with pytest.raises(ArgumentError):
        RadialSpec(n=3, p=2.0, r0=0.0, R=10.0, exterior=True)
    with pytest.raises(ArgumentError):
        RadialSpec(n=3, p=2.0, r0=2.0, R=1.0)
