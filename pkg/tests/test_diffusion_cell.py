import numpy as np
import pytest

import twoscale.diffusion_cell as dc
from twoscale.diffusion_cell import (CellInfrastructure, effective_point,
                                     solve_diffusion_cells,
                                     update_effective_field)
from twoscale.errors import DegenerateDeformation, SolverConvergenceError
from twoscale.fem import element_tables
from twoscale.kinematics import (CellCoefficientField, MacroGradientSample,
                                 compute_F0, compute_J0_D0)
from twoscale.mesh import build_cell_grid, build_full_cell_grid, build_macro_grid


def _undeformed_field(grid, d_hat):
    shape = (grid.num_cells, 4, 1, 1)
    field = CellCoefficientField(grid=grid,
                                 F0=np.tile(np.eye(2), shape))
    return compute_J0_D0(field, d_hat)


def test_correctors_periodic_and_mean_zero(cross3):
    grid, _, _, _ = cross3
    eta = solve_diffusion_cells(grid, _undeformed_field(grid, 0.5 * np.eye(2)))
    assert eta.shape == (grid.num_nodes, 2)
    a, b = grid.periodic_pairs.T
    np.testing.assert_allclose(eta[a], eta[b], atol=1e-12)
    w = element_tables(grid).lumped_weights
    np.testing.assert_allclose(w @ eta, 0.0, atol=1e-12)


def test_undeformed_cross_effective_values(cross3):
    grid, _, _, _ = cross3
    field = _undeformed_field(grid, 0.5 * np.eye(2))
    eta = solve_diffusion_cells(grid, field)
    val = effective_point(grid, field, eta)
    assert val.j_star == pytest.approx(grid.area, rel=1e-14)
    # quarter-turn symmetry of the cross
    assert val.d_star[0, 0] == pytest.approx(val.d_star[1, 1], rel=1e-10)
    assert abs(val.d_star[0, 1]) < 1e-12
    # homogenization can only degrade the unobstructed response
    assert 0.0 < val.d_star[0, 0] < 0.5 * grid.area


def test_energy_identity(cross3):
    grid, _, chi, _ = cross3
    d_hat = np.array([[0.5, 0.08], [0.08, 0.35]])
    field = compute_F0(MacroGradientSample([[0.04, 0.01], [0.02, -0.03]]),
                       chi, grid)
    compute_J0_D0(field, d_hat)
    eta = solve_diffusion_cells(grid, field)
    val = effective_point(grid, field, eta)
    # independent evaluation through the symmetric energy form
    # int (e_i + grad eta_i) . D0 (e_j + grad eta_j) dy
    tab = element_tables(grid)
    grads = np.einsum("cpm,qpk->cqkm", eta[grid.cells], tab.G)
    grads += np.eye(2)
    energy = np.einsum("q,cqki,cqkl,cqlj->ij", tab.wdet, grads, field.D0,
                       grads)
    np.testing.assert_allclose(val.d_star, energy, rtol=1e-10)
    assert np.abs(val.d_star - val.d_star.T).max() < 1e-13


def test_unperforated_identity():
    grid = build_full_cell_grid(2)
    d_hat = np.array([[0.7, 0.1], [0.1, 0.4]])
    field = _undeformed_field(grid, d_hat)
    eta = solve_diffusion_cells(grid, field)
    assert np.abs(eta).max() < 1e-12
    val = effective_point(grid, field, eta)
    assert val.j_star == pytest.approx(1.0, rel=1e-14)
    np.testing.assert_allclose(val.d_star, d_hat, atol=1e-12)


def test_conformal_stretch_leaves_d_star_unchanged(cross3):
    grid, _, _, _ = cross3
    d_hat = np.array([[0.5, 0.05], [0.05, 0.3]])
    base = _undeformed_field(grid, d_hat)
    eta0 = solve_diffusion_cells(grid, base)
    ref = effective_point(grid, base, eta0)
    gamma = 0.35
    shape = (grid.num_cells, 4, 1, 1)
    stretched = CellCoefficientField(
        grid=grid, F0=np.tile((1.0 + gamma) * np.eye(2), shape))
    compute_J0_D0(stretched, d_hat)
    eta1 = solve_diffusion_cells(grid, stretched)
    val = effective_point(grid, stretched, eta1)
    # in two dimensions the transformed coefficient is dilation invariant
    np.testing.assert_allclose(val.d_star, ref.d_star, atol=1e-12)
    assert val.j_star == pytest.approx((1.0 + gamma) ** 2 * ref.j_star,
                                       rel=1e-12)


def test_point_value_matches_batch_bitwise(cross3_infra):
    infra = cross3_infra
    rng = np.random.default_rng(2)
    Gs = 0.02 * rng.standard_normal((5, 2, 2))
    batch = infra.solve_batch([(i, G, 0.0, (0.0, 0.0))
                               for i, G in enumerate(Gs)])
    for i, G in enumerate(Gs):
        single = infra.point_value(G, 0.0, (0.0, 0.0))
        assert single.j_star == batch[i].j_star
        assert np.array_equal(single.d_star, batch[i].d_star)


def test_batch_results_independent_of_chunking(cross3_infra):
    infra = cross3_infra
    rng = np.random.default_rng(9)
    Gs = 0.02 * rng.standard_normal((7, 2, 2))
    tasks = [(i, G, 0.0, (0.0, 0.0)) for i, G in enumerate(Gs)]
    wide = infra.solve_batch(tasks)
    infra.assembler.chunk = 2
    try:
        narrow = infra.solve_batch(tasks)
    finally:
        infra.assembler.chunk = 8
    for i in range(len(Gs)):
        assert wide[i].j_star == narrow[i].j_star
        assert np.array_equal(wide[i].d_star, narrow[i].d_star)


def _random_displacement(grid, scale, seed):
    rng = np.random.default_rng(seed)
    return scale * rng.standard_normal((grid.num_nodes, 2))


def test_field_update_matches_per_point_solves(cross3, cross3_infra):
    cell_grid, _, _, _ = cross3
    infra = cross3_infra
    macro = build_macro_grid((-0.5, -0.5), (0.5, 0.5), 1)
    u = _random_displacement(macro, 0.002, 5)
    state = update_effective_field(macro, u, 0.25, infra)
    assert state.t == 0.25
    tab = element_tables(macro)
    grads = np.einsum("cpi,qpj->cqij", u[macro.cells], tab.G)
    grads = grads.reshape(-1, 2, 2)
    assert state.j_star.shape == (len(grads),)
    for i in (0, 3, len(grads) - 1):
        val = infra.point_value(grads[i], 0.25, (0.0, 0.0))
        assert state.j_star[i] == val.j_star
        assert np.array_equal(state.d_star[i], val.d_star)
    nc, nq = macro.num_cells, 4
    j_q, d_q = state.as_quadrature_arrays(nc, nq)
    assert j_q.shape == (nc, nq) and d_q.shape == (nc, nq, 2, 2)
    assert np.array_equal(j_q.ravel(), state.j_star)


def test_cache_toggle_is_bitwise_neutral(cross3):
    cell_grid, _, chi, _ = cross3
    macro = build_macro_grid((-0.5, -0.5), (0.5, 0.5), 1)
    u = _random_displacement(macro, 0.002, 12)
    results = {}
    for enabled in (True, False):
        infra = CellInfrastructure(cell_grid, chi, 0.5 * np.eye(2),
                                   cache_enabled=enabled)
        s1 = update_effective_field(macro, u, 0.0, infra)
        s2 = update_effective_field(macro, u, 0.5, infra)
        results[enabled] = (s1, s2)
        if enabled:
            assert len(infra.cache) > 0
        else:
            assert len(infra.cache) == 0
        infra.close()
    for k in range(2):
        a, b = results[True][k], results[False][k]
        assert np.array_equal(a.j_star, b.j_star)
        assert np.array_equal(a.d_star, b.d_star)


def test_cache_hits_skip_solves(cross3):
    cell_grid, _, chi, _ = cross3
    macro = build_macro_grid((-0.5, -0.5), (0.5, 0.5), 1)
    infra = CellInfrastructure(cell_grid, chi, 0.5 * np.eye(2))
    u = _random_displacement(macro, 0.002, 3)
    update_effective_field(macro, u, 0.0, infra)
    misses = len(infra.cache)
    calls = []
    original = infra.solve_batch

    def counting(tasks):
        calls.append(len(tasks))
        return original(tasks)

    infra.solve_batch = counting
    state = update_effective_field(macro, u, 1.0, infra)
    assert calls == [0]
    assert len(infra.cache) == misses
    assert np.isfinite(state.j_star).all()
    infra.close()


def test_quantized_cache_buckets_nearby_gradients(cross3):
    cell_grid, _, chi, _ = cross3
    infra = CellInfrastructure(cell_grid, chi, 0.5 * np.eye(2),
                               quantization=1e-3)
    macro = build_macro_grid((-0.5, -0.5), (0.5, 0.5), 0)
    rng = np.random.default_rng(8)
    base = 0.002 * rng.standard_normal((macro.num_nodes, 2))
    s1 = update_effective_field(macro, base, 0.0, infra)
    s2 = update_effective_field(macro, base + 1e-9, 0.0, infra)
    assert np.array_equal(s1.d_star, s2.d_star)
    infra.close()


def test_workers_pool_matches_serial(cross3):
    cell_grid, _, chi, _ = cross3
    macro = build_macro_grid((-0.5, -0.5), (0.5, 0.5), 1)
    u = _random_displacement(macro, 0.002, 21)
    serial = CellInfrastructure(cell_grid, chi, 0.5 * np.eye(2))
    pooled = CellInfrastructure(cell_grid, chi, 0.5 * np.eye(2), workers=2)
    try:
        a = update_effective_field(macro, u, 0.0, serial)
        b = update_effective_field(macro, u, 0.0, pooled)
        assert np.array_equal(a.j_star, b.j_star)
        assert np.array_equal(a.d_star, b.d_star)
    finally:
        serial.close()
        pooled.close()


def test_degenerate_point_reported_from_batch(cross3_infra):
    infra = cross3_infra
    bad = -0.6 * np.eye(2)
    tasks = [(0, np.zeros((2, 2)), 1.0, (-0.25, 0.0)),
             (1, bad, 1.0, (0.125, 0.375)),
             (2, bad, 1.0, (0.5, 0.5))]
    with pytest.raises(DegenerateDeformation) as err:
        infra.solve_batch(tasks)
    assert err.value.x_q == (0.125, 0.375)
    assert err.value.t == 1.0


def test_residual_guard_raises(cross3, monkeypatch):
    grid, _, _, _ = cross3
    field = _undeformed_field(grid, 0.5 * np.eye(2))
    monkeypatch.setattr(dc, "RESIDUAL_TOL", 0.0)
    with pytest.raises(SolverConvergenceError):
        solve_diffusion_cells(grid, field)
