import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vpfp.equilibrium import cosine_density, solve_poisson_boltzmann
from vpfp.phase_space import (Discretization, InitialDataSpec, SpectralState, apply_A,
                              apply_Astar, apply_B, apply_C, apply_FP, inner_product, load_state,
                              make_initial_data, mass, norm2, norms_bundle, project_mean_free,
                              save_state, tail_mass)

from conftest import basis_state, random_state, x_grid

DISC = Discretization(16, 8)


def test_discretization_validation():
    with pytest.raises(ValueError):
        Discretization(6, 8)
    with pytest.raises(ValueError):
        Discretization(16, 3)


def test_lowering_examples():
    A = apply_A(basis_state(DISC, 0, 0))
    assert all(np.all(a.coeffs == 0) for a in A)
    A = apply_A(basis_state(DISC, 1, 0))
    assert np.all(A[0].coeffs[0, 0] == 1) and np.count_nonzero(A[0].coeffs) == 16 * 16
    assert np.all(A[1].coeffs == 0)
    A = apply_A(basis_state(DISC, 2, 3))
    assert np.allclose(A[0].coeffs[1, 3], np.sqrt(2)) and np.allclose(A[1].coeffs[2, 2], np.sqrt(3))


def test_raising_examples():
    S = apply_Astar(basis_state(DISC, 0, 0))
    assert np.all(S[0].coeffs[1, 0] == 1) and np.all(S[1].coeffs[0, 1] == 1)
    S = apply_Astar(basis_state(DISC, 7, 0))
    assert np.all(S[0].coeffs == 0)


def test_ladders_against_velocity_quadrature(vq):
    """A_i is d/dv_i and A*_i is v_i - d/dv_i on the Hermite synthesis."""
    rng = np.random.default_rng(0)
    c = rng.standard_normal((8, 8))
    c[6:] = 0
    c[:, 6:] = 0
    v1, v2 = vq.v1, vq.v2
    eps = 1e-5
    d1 = (vq.synth(c, v1 + eps, v2) - vq.synth(c, v1 - eps, v2)) / (2 * eps)
    d2 = (vq.synth(c, v1, v2 + eps) - vq.synth(c, v1, v2 - eps)) / (2 * eps)
    h = SpectralState(np.broadcast_to(c[:, :, None, None], DISC.shape).copy(), DISC)
    A = apply_A(h)
    S = apply_Astar(h)
    assert np.allclose(A[0].coeffs[:, :, 0, 0], vq.project(d1), atol=1e-7)
    assert np.allclose(A[1].coeffs[:, :, 0, 0], vq.project(d2), atol=1e-7)
    assert np.allclose(S[0].coeffs[:, :, 0, 0], vq.project(v1 * vq.synth(c) - d1), atol=1e-7)
    assert np.allclose(S[1].coeffs[:, :, 0, 0], vq.project(v2 * vq.synth(c) - d2), atol=1e-7)


def test_number_operator_examples():
    assert np.all(apply_FP(basis_state(DISC, 0, 0)).coeffs == 0)
    assert np.allclose(apply_FP(basis_state(DISC, 1, 2)).coeffs[1, 2], 3.0)


def test_spatial_derivative_example():
    x1, _ = x_grid(16)
    C = apply_C(basis_state(DISC, 0, 0, np.cos(2 * np.pi * x1)))
    assert np.allclose(C[0].coeffs[0, 0], -2 * np.pi * np.sin(2 * np.pi * x1), atol=1e-10)
    assert np.allclose(C[1].coeffs, 0, atol=1e-12)
    const = basis_state(DISC, 2, 1)
    assert all(np.allclose(c.coeffs, 0) for c in apply_C(const))


def test_transport_vanishes_on_homogeneous_states(flat16):
    h = random_state(DISC, 0, kband=0)
    assert np.allclose(apply_B(h, flat16).coeffs, 0, atol=1e-12)


def test_inner_product_examples(flat16):
    one = basis_state(DISC, 0, 0)
    assert inner_product(one, one, flat16) == pytest.approx(1.0)
    assert inner_product(basis_state(DISC, 1, 0), basis_state(DISC, 0, 1), flat16) == 0.0


def test_inner_product_weighted_against_fine_grid():
    n = 32
    eq = solve_poisson_boltzmann(cosine_density(n, 0.3), 1.0)
    disc = Discretization(n, 4)
    x1, _ = x_grid(n)
    a = basis_state(disc, 0, 0, np.cos(2 * np.pi * x1))
    val = inner_product(a, a, eq)
    fine = solve_poisson_boltzmann(cosine_density(256, 0.3), 1.0)
    xf = np.arange(256) / 256
    ref = np.mean(np.cos(2 * np.pi * xf)[:, None] ** 2 * np.exp(-fine.phi))
    assert val == pytest.approx(ref, abs=1e-8)


def test_norms_bundle_examples(flat16):
    nb = norms_bundle(basis_state(DISC, 1, 0), flat16)
    assert (nb.norm_h2, nb.norm_Ah2, nb.norm_Ch2, nb.cross_AC, nb.norm_AsAh2) == \
        pytest.approx((1, 1, 0, 0, 1))
    x1, _ = x_grid(16)
    nb = norms_bundle(basis_state(DISC, 0, 0, np.cos(2 * np.pi * x1)), flat16)
    assert nb.norm_Ch2 == pytest.approx(2 * np.pi**2, rel=1e-12)


@pytest.mark.parametrize("dealias", [False, True])
def test_norms_bundle_matches_operator_compositions(cos16, dealias):
    disc = Discretization(16, 8, dealias)
    h = random_state(disc, 4)
    nb = norms_bundle(h, cos16)
    A, C = apply_A(h), apply_C(h)
    ip = lambda a, b: inner_product(a, b, cos16)
    assert nb.norm_h2 == pytest.approx(ip(h, h), rel=1e-12)
    assert nb.norm_Ah2 == pytest.approx(sum(ip(a, a) for a in A), rel=1e-12)
    assert nb.norm_Ch2 == pytest.approx(sum(ip(c, c) for c in C), rel=1e-12)
    assert nb.cross_AC == pytest.approx(sum(ip(A[i], C[i]) for i in range(2)), rel=1e-10)
    AA = [apply_A(a) for a in A]
    assert nb.norm_A2h2 == pytest.approx(sum(ip(x, x) for row in AA for x in row), rel=1e-12)
    AC = [apply_A(c) for c in C]
    assert nb.norm_ACh2 == pytest.approx(sum(ip(x, x) for row in AC for x in row), rel=1e-12)
    assert nb.norm_AsAh2 == pytest.approx(ip(apply_FP(h), apply_FP(h)), rel=1e-12)


@pytest.mark.parametrize("dealias", [False, True])
@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_operator_identities(cos16, dealias, seed):
    disc = Discretization(16, 8, dealias)
    h = random_state(disc, seed, top=7)
    g = random_state(disc, seed + 1, top=7)
    A, S, C = apply_A(h), apply_Astar(h), apply_C(h)
    ip = lambda a, b: inner_product(a, b, cos16)
    scale = np.sqrt(norm2(h, cos16))
    for i in range(2):
        for j in range(2):
            lhs = apply_A(S[j])[i].coeffs - apply_Astar(A[i])[j].coeffs
            assert np.allclose(lhs, h.coeffs if i == j else 0, atol=1e-12 * scale)
        # adjointness in the weighted product
        assert ip(A[i], g) == pytest.approx(ip(h, apply_Astar(g)[i]), abs=1e-10 * scale)
    Bh = apply_B(h, cos16)
    ref = np.sqrt(sum(norm2(x, cos16) for x in A + C))
    for i in range(2):
        assert np.sqrt(norm2(apply_A(Bh)[i] - apply_B(A[i], cos16) - C[i], cos16)) < 1e-9 * ref
        hess = sum(disc.grid.product(cos16.hess_phi[i, j], A[j].coeffs) for j in range(2))
        d = apply_B(C[i], cos16).coeffs - apply_C(Bh)[i].coeffs - hess
        assert np.sqrt(norm2(d, cos16)) < 1e-9 * ref
    assert abs(ip(Bh, h)) < 1e-9 * np.sqrt(norm2(Bh, cos16)) * scale
    lhs = norm2(apply_FP(h), cos16)
    rhs = sum(norm2(a, cos16) for a in A) + sum(norm2(x, cos16) for a in A for x in apply_A(a))
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_poincare_flat(flat16):
    for seed in range(100):
        h = project_mean_free(random_state(DISC, seed), flat16)
        nb = norms_bundle(h, flat16)
        assert nb.norm_h2 <= nb.norm_Ah2 + nb.norm_Ch2


def test_poincare_weighted(cos16):
    K = np.max(np.exp(cos16.phi)) * np.max(np.exp(-cos16.phi))
    for seed in range(100):
        h = project_mean_free(random_state(DISC, seed), cos16)
        nb = norms_bundle(h, cos16)
        assert nb.norm_h2 <= K * (nb.norm_Ah2 + nb.norm_Ch2)


def test_initial_data_contract(cos16):
    for seed in range(5):
        spec = InitialDataSpec(seed=seed, target_norm=0.7)
        h = make_initial_data(spec, DISC, cos16)
        assert abs(mass(h, cos16)) <= 1e-12
        assert np.sqrt(norm2(h, cos16)) == pytest.approx(0.7, abs=1e-10)
        assert h.mean_free
    a = make_initial_data(InitialDataSpec(seed=3), DISC, cos16)
    b = make_initial_data(InitialDataSpec(seed=3), DISC, cos16)
    assert np.array_equal(a.coeffs, b.coeffs)
    z = make_initial_data(InitialDataSpec(seed=3, target_norm=0.0), DISC, cos16)
    assert np.all(z.coeffs == 0)


def test_initial_data_bands(flat16):
    h = make_initial_data(InitialDataSpec(seed=1, spatial_band=1, hermite_band=2,
                                          homogeneous=False), DISC, flat16)
    deg = DISC.total_degree()[:, :, 0, 0]
    assert np.all(h.coeffs[deg > 2] == 0)
    F = DISC.grid.fft(h.coeffs)
    assert np.allclose(F[..., 0, 0], 0, atol=1e-12)
    assert np.allclose(F[..., 2:-1, :], 0, atol=1e-12) and np.allclose(F[..., 2:], 0, atol=1e-12)
    with pytest.raises(ValueError):
        make_initial_data(InitialDataSpec(spatial_band=8), DISC, flat16)


def test_single_mode_initial_data(flat16):
    h = make_initial_data(InitialDataSpec(kind="single_mode", mode_n=(1, 1), mode_k=(0, 2)),
                          DISC, flat16)
    _, x2 = x_grid(16)
    assert np.allclose(h.coeffs[1, 1], np.sqrt(2) * np.cos(4 * np.pi * x2))


def test_state_file_roundtrip(tmp_path, cos16):
    h = make_initial_data(InitialDataSpec(seed=2), DISC, cos16)
    save_state(h, tmp_path / "h.txt")
    back = load_state(tmp_path / "h.txt")
    assert np.array_equal(back.coeffs, h.coeffs)
    again = make_initial_data(InitialDataSpec(kind="grid_file", path=str(tmp_path / "h.txt")),
                              DISC, cos16)
    assert np.allclose(again.coeffs, h.coeffs, atol=1e-15)


def test_tail_mass(flat16):
    assert tail_mass(basis_state(DISC, 7, 0), flat16) == pytest.approx(1.0)
    assert tail_mass(basis_state(DISC, 3, 3), flat16) == 0.0
