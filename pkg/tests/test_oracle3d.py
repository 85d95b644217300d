import numpy as np
import pytest

from cplab import domain as dm
from cplab import nonlinearity as nlin
from cplab import oracle3d as o3
from cplab.errors import OracleMismatchError

from oracles import GELFAND1_U0


@pytest.fixture(scope="module")
def ball_torsion_vox():
    d = dm.MeridianDomain(3, dm.ball(1.0))
    return d, o3.solve_3d(d, nlin.constant(1.0), 32)


def center_value(v):
    k = np.argmin(np.abs(v.zs))
    j = np.argmin(np.abs(v.ys))
    i = np.argmin(np.abs(v.xs))
    return v.values[k, j, i]


def test_torsion_ball_center_value(ball_torsion_vox):
    _, v = ball_torsion_vox
    assert center_value(v) == pytest.approx(1.0 / 6.0, abs=2e-3)


def test_zero_source_gives_zero_solution():
    d = dm.MeridianDomain(3, dm.ball(1.0))
    v = o3.solve_3d(d, nlin.constant(0.0), 24)
    assert np.abs(v.values).max() == 0.0


def test_gelfand_center_matches_shooting():
    d = dm.MeridianDomain(3, dm.ball(1.0))
    v = o3.solve_3d(d, nlin.gelfand(1.0), 32)
    assert center_value(v) == pytest.approx(GELFAND1_U0, rel=1e-2)


def test_symmetry_witnesses_on_converged_solve(ball_torsion_vox):
    _, v = ball_torsion_vox
    rot, mir = o3.symmetry_witnesses(v)
    vmax = np.abs(v.values[v.mask]).max()
    assert rot <= 5e-3 * vmax
    assert mir <= 5e-3 * vmax


def test_witness_flags_asymmetric_perturbation(ball_torsion_vox):
    _, v = ball_torsion_vox
    vmax = np.abs(v.values[v.mask]).max()
    perturbed = o3.VoxelField(v.N, v.xs, v.ys, v.zs, v.mask, v.values.copy())
    sel = v.mask & (v.xs[None, None, :] > 0.3)
    perturbed.values[sel] += 0.05 * vmax
    rot, mir = o3.symmetry_witnesses(perturbed)
    assert rot > 5e-3 * vmax


def test_scan_single_cluster(ball_torsion_vox):
    _, v = ball_torsion_vox
    clusters = o3.scan_critical_voxels(v)
    assert len(clusters) == 1
    cx, cy, cz = clusters[0]["centroid"]
    assert np.hypot(cx, cy) < 2 * v.spacings[0]
    assert abs(cz) < 2 * v.spacings[2]


def double_bump(v):
    """Two single-voxel peaks on a tilted background.

    The tilt keeps the gradient alive everywhere else, so the scan flips
    in exactly the two peak voxels: a field with exactly two critical
    clusters by construction.
    """
    Z, Y, X = np.meshgrid(v.zs, v.ys, v.xs, indexing="ij")
    vals = 0.3 * X
    k0 = np.argmin(np.abs(v.zs))
    j0 = np.argmin(np.abs(v.ys))
    for x0 in (0.4, -0.4):
        vals[k0, j0, np.argmin(np.abs(v.xs - x0))] += 1.0
    return o3.VoxelField(v.N, v.xs, v.ys, v.zs, v.mask,
                         np.where(v.mask, vals, 0.0))


def test_scan_double_bump_two_clusters(ball_torsion_vox):
    _, v = ball_torsion_vox
    clusters = o3.scan_critical_voxels(double_bump(v))
    assert len(clusters) == 2


def test_compare_with_meridian(ball_torsion_vox, torsion_ball_65):
    _, v = ball_torsion_vox
    grid, u, _, _ = torsion_ball_65
    linf_rel, offset = o3.compare_with_axisymmetric(v, u)
    assert linf_rel <= 2e-2
    assert offset <= 2.0


def test_compare_mismatch_raises(ball_torsion_vox, torsion_ball_65):
    _, v = ball_torsion_vox
    grid, u, _, _ = torsion_ball_65
    with pytest.raises(OracleMismatchError):
        o3.compare_with_axisymmetric(double_bump(v), u)


def test_interpolation_round_trip(torsion_ball_65):
    """A voxel field sampled from the meridian field matches it to interp error."""
    from cplab.interp import Bicubic
    grid, u, _, _ = torsion_ball_65
    d = dm.MeridianDomain(3, dm.ball(1.0))
    op = o3._VoxelOperator(d, 24)
    interp = Bicubic(grid.rs, grid.zs, np.where(grid.inside, u.values, 0.0))
    rr = np.hypot(op.X, op.Y)
    vals = np.where(op.mask, interp.value(rr, op.Z), 0.0)
    v = o3.VoxelField(24, op.xs, op.ys, op.zs, op.mask, vals)
    linf_rel, _ = o3.compare_with_axisymmetric(v, u)
    assert linf_rel <= 1e-10


def test_guards():
    d = dm.MeridianDomain(4, dm.ball(1.0))
    with pytest.raises(ValueError):
        o3.solve_3d(d, nlin.constant(1.0), 24)
    d3 = dm.MeridianDomain(3, dm.ball(1.0))
    with pytest.raises(ValueError):
        o3.solve_3d(d3, nlin.constant(1.0), 128)
