import numpy as np
import pytest
from scipy.interpolate import RegularGridInterpolator

import hjbplan as hp
from hjbplan.errors import InvalidArgumentError, InvalidDataError

Z_MID = 1.2788100520461677       # -2*0.4^2 * ln(bc / cosh(3.125))
ZPRIME_025 = 1.8316490883375246  # 2 * tanh(1.5625)
PSTAR_025 = -0.9158245441687623


def test_constant_u_gives_constant_z():
    grid = hp.build_interval_grid(10, 1.0)
    bc = hp.boundary_value(0.4, 0.5)
    z = hp.value_function(hp.ScalarField(grid, np.full(10, bc)), 0.4)
    assert np.max(np.abs(z.values - 0.5)) < 1e-14


def test_zero_cost_zero_value():
    grid = hp.build_interval_grid(10, 1.0)
    z = hp.value_function(hp.ScalarField(grid, np.ones(10)), 0.7)
    assert np.max(np.abs(z.values)) == 0.0


def test_paper_midpoint_value(scenario_1d):
    grid, z = scenario_1d["grid"], scenario_1d["z"]
    z_mid = np.interp(0.5, grid.nodes, z.values)
    assert z_mid == pytest.approx(Z_MID, abs=5e-5)


def test_boundary_layer_value_is_z0(scenario_1d, scenario_2d):
    z1 = scenario_1d["z"]
    assert abs(z1.values[0] - 0.5) <= 1e-10
    assert abs(z1.values[-1] - 0.5) <= 1e-10
    z2, grid2 = scenario_2d["z"], scenario_2d["grid"]
    assert np.max(np.abs(z2.values[grid2.boundary] - 0.2)) <= 1e-10


def test_round_trip_reproduces_u(scenario_1d, scenario_2d):
    for scen in (scenario_1d, scenario_2d):
        u, z, sigma = scen["u"], scen["z"], scen["cfg"].sigma
        back = np.exp(-z.values / (2.0 * sigma**2))
        assert np.max(np.abs(back - u.values) / u.values) < 1e-12


def test_nonpositive_u_rejected():
    grid = hp.build_interval_grid(5, 1.0)
    with pytest.raises(InvalidDataError):
        hp.value_function(hp.ScalarField(grid, np.array([1.0, 0.5, 0.0, 0.5, 1.0])), 0.4)


class TestGradient:
    def test_exact_for_linear(self):
        grid = hp.build_interval_grid(9, 2.0)
        (g,) = hp.gradient(hp.ScalarField(grid, grid.nodes.copy()))
        assert np.max(np.abs(g - 1.0)) < 1e-13

    def test_exact_for_quadratic_including_edges(self):
        grid = hp.build_interval_grid(5, 1.0)  # h = 0.25
        (g,) = hp.gradient(hp.ScalarField(grid, grid.nodes**2))
        assert np.max(np.abs(g - 2.0 * grid.nodes)) < 1e-13

    def test_paper_slope(self, scenario_1d):
        grid, z = scenario_1d["grid"], scenario_1d["z"]
        (dz,) = hp.gradient(z)
        assert np.interp(0.25, grid.nodes, dz) == pytest.approx(ZPRIME_025, abs=1e-2)

    def test_2d_components_match_numpy(self, scenario_2d):
        grid, z = scenario_2d["grid"], scenario_2d["z"]
        gx, gy = hp.gradient(z)
        rx, ry = np.gradient(z.values, grid.h, grid.h, edge_order=2)
        assert np.array_equal(gx, rx) and np.array_equal(gy, ry)

    def test_too_few_nodes_rejected(self):
        grid = hp.build_interval_grid(3, 1.0)
        hp.gradient(hp.ScalarField(grid, grid.nodes.copy()))  # 3 nodes is the minimum
        stub = hp.Grid1D(n=2, length=1.0, h=1.0, nodes=np.array([0.0, 1.0]))
        with pytest.raises(InvalidArgumentError):
            hp.gradient(hp.ScalarField(stub, np.zeros(2)))


class TestOptimalControl:
    def test_flat_value_means_zero_control(self):
        grid = hp.build_interval_grid(7, 1.0)
        p = hp.optimal_control(hp.ScalarField(grid, np.full(7, 0.3)))
        assert np.max(np.abs(p.components[0])) == 0.0

    def test_paper_control_value(self, scenario_1d):
        grid, p = scenario_1d["grid"], scenario_1d["p"]
        assert np.interp(0.25, grid.nodes, p.components[0]) == pytest.approx(PSTAR_025, abs=1e-2)

    def test_radial_center_control_vanishes(self, scenario_2d):
        grid, p = scenario_2d["grid"], scenario_2d["p"]
        ci, cj = grid.shape[0] // 2, grid.shape[1] // 2
        assert abs(p.components[0][ci, cj]) < 1e-6
        assert abs(p.components[1][ci, cj]) < 1e-6

    def test_control_descends_the_value_function(self, scenario_1d, scenario_2d):
        # p* = -grad(z)/2 always points downhill of z
        (dz,) = hp.gradient(scenario_1d["z"])
        assert np.max(scenario_1d["p"].components[0] * dz) <= 0.0
        gx, gy = hp.gradient(scenario_2d["z"])
        p2 = scenario_2d["p"]
        assert np.max(p2.components[0] * gx + p2.components[1] * gy) <= 0.0

    def test_paper_scenarios_drive_outward(self, scenario_1d, scenario_2d):
        # with these costs the value function peaks at the centre, so the
        # feedback control pushes states toward the cheap boundary
        grid1, p1 = scenario_1d["grid"], scenario_1d["p"]
        inner = (grid1.nodes > 0.01) & (grid1.nodes < 0.99)
        assert np.all((p1.components[0] * (grid1.nodes - 0.5))[inner] >= 0.0)
        grid2, p2 = scenario_2d["grid"], scenario_2d["p"]
        X, Y = grid2.meshgrid()
        depth = hp.rim_depth(grid2)
        deep = grid2.interior & (depth >= 4)
        assert np.all((p2.components[0] * X + p2.components[1] * Y)[deep] >= -1e-12)


class TestQueryControl:
    def test_node_identity_1d(self, scenario_1d):
        grid, p = scenario_1d["grid"], scenario_1d["p"]
        got = hp.query_control(p, grid.nodes[17])
        assert got[0] == pytest.approx(p.components[0][17], abs=1e-14)

    def test_midpoint_mean_1d(self, scenario_1d):
        grid, p = scenario_1d["grid"], scenario_1d["p"]
        mid = 0.5 * (grid.nodes[3] + grid.nodes[4])
        expect = 0.5 * (p.components[0][3] + p.components[0][4])
        assert hp.query_control(p, mid)[0] == pytest.approx(expect, rel=1e-12)

    def test_far_outside_returns_zero(self, scenario_1d, scenario_2d):
        assert hp.query_control(scenario_1d["p"], 10.0)[0] == 0.0
        got = hp.query_control(scenario_2d["p"], (10.0, 10.0))
        assert got[0] == 0.0 and got[1] == 0.0

    def test_matches_scipy_interpolator(self, scenario_2d):
        grid, p = scenario_2d["grid"], scenario_2d["p"]
        rng = np.random.Generator(np.random.PCG64(11))
        pts = rng.uniform(-1.2, 1.2, size=(200, 2))
        got = hp.query_control(p, pts)
        for k, comp in enumerate(p.components):
            ref = RegularGridInterpolator((grid.x_axis, grid.y_axis), comp,
                                          bounds_error=False, fill_value=0.0)(pts)
            assert np.max(np.abs(got[:, k] - ref)) < 1e-12


def test_interp_scalar_clips_to_rectangle(scenario_1d):
    z = scenario_1d["z"]
    assert hp.interp_scalar(z, -0.3) == pytest.approx(z.values[0], abs=1e-14)
    assert hp.interp_scalar(z, 0.5) == pytest.approx(Z_MID, abs=5e-5)
