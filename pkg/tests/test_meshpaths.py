import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import wzlab as wz
from wzlab.meshpaths import ChunkedBrownian, ConfigurationError


def test_make_mesh_counts():
    mesh = wz.make_mesh(1.0, 0.1, 8)
    assert mesh.n_coarse == 10
    assert mesh.n_fine == 80
    assert mesh.delta == pytest.approx(0.0125)
    big = wz.make_mesh(50.0, 0.05, 64)
    assert big.n_coarse == 1000
    assert big.n_fine == 64000


def test_make_mesh_rejects_bad_configs():
    with pytest.raises(ConfigurationError):
        wz.make_mesh(1.0, 0.3, 8)  # T/eps not integral
    with pytest.raises(ConfigurationError):
        wz.make_mesh(1.0, 0.1, 0)
    with pytest.raises(ConfigurationError):
        wz.make_mesh(1.0, 0.1, 3)  # not a power of two
    with pytest.raises(ConfigurationError):
        wz.make_mesh(-1.0, 0.1, 2)


def test_fine_nodes_hit_coarse_nodes_bit_exactly():
    mesh = wz.make_mesh(7.0, 0.35, 16)
    fine = mesh.fine_times()
    coarse = mesh.coarse_times()
    assert np.array_equal(fine[:: mesh.refine], coarse)


def test_brownian_starts_at_zero_and_is_deterministic():
    mesh = wz.make_mesh(1.0, 0.1, 8)
    bp1 = wz.sample_brownian(mesh, 2, seed=5, path_id=9)
    bp2 = wz.sample_brownian(mesh, 2, seed=5, path_id=9)
    assert np.all(bp1.values[0] == 0.0)
    assert np.array_equal(bp1.values, bp2.values)
    other = wz.sample_brownian(mesh, 2, seed=5, path_id=10)
    assert not np.allclose(bp1.values, other.values)


def test_coarse_values_invariant_under_refinement():
    for m in (1, 8, 64):
        mesh = wz.make_mesh(2.0, 0.2, m)
        bp = wz.sample_brownian(mesh, 1, seed=3, path_id=17)
        if m == 1:
            ref = bp.coarse_values()
        else:
            assert np.array_equal(bp.coarse_values(), ref)


def test_refined_path_restricts_to_coarser_path():
    # doubling m only appends a bridge level: shared nodes are bit-identical
    b64 = wz.sample_brownian(wz.make_mesh(5.0, 0.1, 64), 1, seed=11, path_id=4)
    b128 = wz.sample_brownian(wz.make_mesh(5.0, 0.1, 128), 1, seed=11, path_id=4)
    assert np.array_equal(b128.values[::2], b64.values)


def test_chunked_paths_match_single_paths():
    mesh = wz.make_mesh(1.0, 0.1, 8)
    cb = ChunkedBrownian(mesh, 1, 7, [2, 5, 8])
    fv = cb.fine_values(0, mesh.n_coarse)
    m = mesh.refine
    for i, pid in enumerate([2, 5, 8]):
        single = wz.sample_brownian(mesh, 1, 7, pid)
        stitched = np.concatenate([fv[i, :, :m, 0].ravel(), fv[i, -1, m:, 0]])
        assert np.array_equal(stitched, single.values[:, 0])


def test_chunk_stream_must_be_consumed_in_order():
    mesh = wz.make_mesh(12.8, 0.1, 4)
    cb = ChunkedBrownian(mesh, 1, 0, [0])
    cb.fine_values(0, 64)
    with pytest.raises(RuntimeError):
        cb.fine_values(0, 64)


def test_brownian_terminal_moments():
    # E[B_T] = 0, Var = T per coordinate, within 4 standard errors
    mesh = wz.make_mesh(1.0, 0.1, 8)
    cb = ChunkedBrownian(mesh, 2, 0, range(20000))
    fv = cb.fine_values(0, mesh.n_coarse)
    bt = fv[:, -1, mesh.refine, :]
    n = bt.shape[0]
    for j in range(2):
        se_mean = bt[:, j].std() / np.sqrt(n)
        assert abs(bt[:, j].mean()) <= 4 * se_mean
        v = bt[:, j] ** 2
        se_var = v.std() / np.sqrt(n)
        assert abs(v.mean() - 1.0) <= 4 * se_var


def test_polygonal_driver_interpolates():
    mesh = wz.make_mesh(1.0, 0.1, 8)
    bp = wz.sample_brownian(mesh, 1, seed=1, path_id=0)
    drv = wz.polygonal_driver(bp, mesh)
    m = mesh.refine
    assert np.array_equal(drv.values[::m], bp.coarse_values())
    coarse = bp.coarse_values()
    mid = drv.values[m // 2 :: m][: mesh.n_coarse]
    np.testing.assert_allclose(mid, 0.5 * (coarse[:-1] + coarse[1:]), atol=1e-15)
    # constant slope within each coarse cell
    slopes = drv.slopes.reshape(mesh.n_coarse, m)
    assert np.all(slopes == slopes[:, :1])


def test_driver_values_consistent_with_slopes():
    mesh = wz.make_mesh(1.0, 0.1, 16)
    bp = wz.sample_brownian(mesh, 1, seed=2, path_id=1)
    for drv in (wz.polygonal_driver(bp, mesh), wz.ou_driver(bp, mesh, 0.1)):
        incr = np.diff(drv.values, axis=0)
        np.testing.assert_allclose(incr, drv.slopes * mesh.delta, atol=1e-14)


def test_ou_driver_contract():
    mesh = wz.make_mesh(1.0, 0.1, 16)
    bp = wz.sample_brownian(mesh, 1, seed=2, path_id=1)
    drv = wz.ou_driver(bp, mesh, 0.1)
    assert np.all(drv.values[0] == 0.0)
    assert np.all(drv.ou_state[0] == 0.0)
    # explicit Euler recursion for the smoothing state
    dB = bp.increments()
    y = np.zeros(1)
    for j in range(5):
        y = y * (1 - mesh.delta / 0.1) + dB[j] / 0.1
        np.testing.assert_allclose(drv.ou_state[j + 1], y, atol=1e-15)
    with pytest.raises(ConfigurationError):
        wz.ou_driver(bp, mesh, 0.2)  # smoothing scale must equal eps
    mesh1 = wz.make_mesh(1.0, 0.1, 1)
    bp1 = wz.sample_brownian(mesh1, 1, seed=2, path_id=1)
    with pytest.raises(ConfigurationError):
        wz.ou_driver(bp1, mesh1, 0.1)  # delta/eps >= 1


def test_polygonal_gap_vanishes_at_coarse_nodes():
    mesh = wz.make_mesh(2.0, 0.1, 32)
    bp = wz.sample_brownian(mesh, 3, seed=9, path_id=7)
    drv = wz.polygonal_driver(bp, mesh)
    gap = bp.values[:: mesh.refine] - drv.values[:: mesh.refine]
    assert np.all(gap == 0.0)


def test_gap_moment_values():
    eps = 0.1
    assert wz.driver_gap_moments("polygonal", eps, 0.3, 1) == pytest.approx(0.0)
    assert wz.driver_gap_moments("polygonal", eps, 0.35, 1) == pytest.approx(eps / 4)
    assert wz.driver_gap_moments("polygonal", eps, 0.35, 2) == pytest.approx(3 * (eps / 4) ** 2)
    # OU: (eps/2)(1 - e^{-2t/eps}), saturating at eps/2
    assert wz.driver_gap_moments("ou", eps, 0.1, 1) == pytest.approx(eps / 2 * (1 - np.exp(-2.0)))
    assert wz.driver_gap_moments("ou", eps, 100.0, 1) == pytest.approx(eps / 2)
    with pytest.raises(ConfigurationError):
        wz.driver_gap_moments("polygonal", eps, 0.35, 0)
    with pytest.raises(ConfigurationError):
        wz.driver_gap_moments("mollifier", eps, 0.35, 1)


@settings(max_examples=50, deadline=None)
@given(u=st.floats(0.001, 0.999), p=st.integers(1, 4))
def test_polygonal_moments_symmetric_in_cell(u, p):
    eps = 0.25
    a = wz.driver_gap_moments("polygonal", eps, u * eps, p)
    b = wz.driver_gap_moments("polygonal", eps, (1.0 - u) * eps, p)
    assert a == pytest.approx(b, rel=1e-9, abs=1e-18)
    assert a >= 0.0


def test_mc_gap_moments_match_formulas():
    # pooled over cells for the polygonal driver; spot times for OU
    res = wz.driver_moment_experiment("polygonal", 0.1, 1.0, 8, [0.25, 0.5], 20000, seed=0)
    for u, accs in res.items():
        for p, acc in zip((1, 2), accs):
            formula = wz.driver_gap_moments("polygonal", 0.1, u * 0.1, p)
            assert abs(acc.mean - formula) <= 4 * acc.std_error
    res = wz.driver_moment_experiment("ou", 0.1, 1.0, 64, [0.5, 1.0], 20000, seed=0)
    delta = 0.1 / 64
    for t, accs in res.items():
        for p, acc in zip((1, 2), accs):
            formula = wz.driver_gap_moments("ou", 0.1, t, p)
            v = wz.driver_gap_moments("ou", 0.1, t, 1)
            allowance = p * np.prod(np.arange(2 * p - 1, 0, -2)) * v ** (p - 1) * delta
            assert abs(acc.mean - formula) <= 4 * acc.std_error + allowance
