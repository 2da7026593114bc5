from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import netreduce as nr
from netreduce.case_io import ZonalAssignment
from netreduce.pipeline import EVAL_METHODS, reduce_network
from netreduce.scenario_eval import (
    DegenerateScenario,
    ScenarioSpec,
    bus_reduction_ratio,
    evaluate,
    nrmse,
    nrmse_batch,
    sample_injections,
)

from reference_values import IEEE14_CONNECTIONS, NRMSE_FIXED


@pytest.fixture(scope="module")
def base14(ieee14):
    net, _ = ieee14
    return net.p_inj[net.non_slack].astype(float)


class TestSampling:
    def test_deterministic(self, ieee14):
        net, _ = ieee14
        a = sample_injections(net, 50, seed=7)
        b = sample_injections(net, 50, seed=7)
        np.testing.assert_array_equal(a.injections, b.injections)
        assert a.injections.shape == (net.n_b - 1, 50)

    def test_seeds_differ(self, ieee14):
        net, _ = ieee14
        a = sample_injections(net, 5, seed=1).injections
        b = sample_injections(net, 5, seed=2).injections
        assert not np.array_equal(a, b)

    def test_zero_sigma_base_mean(self, ieee14, base14):
        net, _ = ieee14
        s = sample_injections(net, 3, seed=0, spec=ScenarioSpec("base", 0.0, 0.0))
        for k in range(3):
            np.testing.assert_array_equal(s.injections[:, k], base14)

    def test_sigma_floor(self, ieee14):
        net, _ = ieee14
        s = sample_injections(net, 20000, seed=3)
        np.testing.assert_allclose(s.injections.mean(axis=1), 0.0, atol=0.05)
        np.testing.assert_allclose(s.injections.std(axis=1), 1.0, atol=0.03)

    def test_relative_sigma(self, ieee14, base14):
        net, _ = ieee14
        s = sample_injections(net, 20000, seed=3, spec=ScenarioSpec("base", 0.1, 0.0))
        nz = base14 != 0
        np.testing.assert_allclose(s.injections[nz].std(axis=1), 0.1 * np.abs(base14[nz]), rtol=0.03)
        np.testing.assert_array_equal(s.injections[~nz], 0.0)

    @pytest.mark.parametrize("kw", [{"mean": "median"}, {"relative_sigma": -1.0},
                                    {"absolute_sigma_floor": -0.1}])
    def test_spec_rejects(self, kw):
        with pytest.raises(ValueError):
            ScenarioSpec(**kw)

    def test_needs_one(self, ieee14):
        with pytest.raises(ValueError):
            sample_injections(ieee14[0], 0, seed=0)


class TestNrmse:
    def test_fixed_injection_values(self, ieee14_red, base14):
        red = ieee14_red
        got = nrmse(red.H_f, red.maps, red.H_dep, base14)
        assert got == pytest.approx(NRMSE_FIXED["H_dep"], abs=1e-3)

    def test_dep_at_least_as_good_as_ind_at_base(self, ieee14_red, base14):
        red = ieee14_red
        dep = nrmse(red.H_f, red.maps, red.H_dep, base14)
        ind = nrmse(red.H_f, red.maps, red.H_ind, base14)
        assert dep <= ind

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-1e3, 1e3).filter(lambda a: abs(a) > 1e-3), st.integers(0, 10_000))
    def test_scale_invariant(self, ieee14_red, alpha, seed):
        red = ieee14_red
        p = np.random.default_rng(seed).normal(size=red.maps.T_bz.shape[1])
        a = nrmse(red.H_f, red.maps, red.H_ind, p)
        b = nrmse(red.H_f, red.maps, red.H_ind, alpha * p)
        assert b == pytest.approx(a, rel=1e-9)

    def test_identity_reduction_exact(self, rng):
        net = nr.read_case("ieee14")
        za = ZonalAssignment.identity(net)
        red = reduce_network(net, za, methods=["H_ind", "B_phys"])
        p = rng.normal(size=net.n_b - 1)
        assert nrmse(red.H_f, red.maps, red.H_ind, p) < 1e-12
        assert bus_reduction_ratio(net, za) == 1.0

    def test_zero_flows_degenerate(self, ieee14_red):
        red = ieee14_red
        with pytest.raises(DegenerateScenario):
            nrmse(red.H_f, red.maps, red.H_ind, np.zeros(red.maps.T_bz.shape[1]))

    def test_batch_nan_for_degenerate_column(self, ieee14_red, base14):
        red = ieee14_red
        P = np.column_stack([base14, np.zeros_like(base14)])
        out = nrmse_batch(red.H_f, red.maps, red.H_ind, P)
        assert np.isfinite(out[0]) and np.isnan(out[1])

    def test_bus_reduction_ratio(self, ieee14):
        assert bus_reduction_ratio(*ieee14) == 3.5


class TestEvaluate:
    def test_all_methods(self, ieee14):
        net, za = ieee14
        sc = sample_injections(net, 200, seed=0)
        rep = evaluate(net, za, EVAL_METHODS, sc)
        assert list(rep.methods) == list(EVAL_METHODS)
        assert rep.grid.n_b == 14 and rep.grid.n_z == 4
        assert rep.grid.bus_reduction_ratio == 3.5
        for stats in rep.methods.values():
            assert stats.values.shape == (200,)
            assert stats.failures == 0
            q = list(stats.quantiles.values())
            assert q == sorted(q)

    def test_mean_is_fsum_over_successes(self, ieee14_red, ieee14):
        net, za = ieee14
        sc = sample_injections(net, 50, seed=5)
        P = sc.injections.copy()
        P[:, 3] = 0.0
        sc = type(sc)(injections=P, seed=sc.seed, spec=sc.spec)
        rep = evaluate(net, za, ["H_ind"], sc, reduction=ieee14_red)
        st_ = rep.methods["H_ind"]
        assert st_.failures == 1
        ok = st_.values[np.isfinite(st_.values)]
        assert st_.mean == math.fsum(ok.tolist()) / ok.size

    def test_reproducible(self, ieee14):
        net, za = ieee14
        a = evaluate(net, za, ["B_opt"], sample_injections(net, 30, seed=9))
        b = evaluate(net, za, ["B_opt"], sample_injections(net, 30, seed=9))
        np.testing.assert_array_equal(a.methods["B_opt"].values, b.methods["B_opt"].values)

    def test_unknown_method(self, ieee14):
        net, za = ieee14
        with pytest.raises(ValueError, match="unknown method"):
            evaluate(net, za, ["H_xyz"], sample_injections(net, 2, seed=0))

    def test_failed_method_reported(self):
        # ieee39 identity: zero-injection buses leave the dependent PTDF undefined
        net = nr.read_case("ieee39")
        za = ZonalAssignment.identity(net)
        rep = evaluate(net, za, ["H_ind", "H_dep"], sample_injections(net, 4, seed=0))
        assert rep.methods["H_dep"].failures == 4
        assert math.isnan(rep.methods["H_dep"].mean)
        assert rep.methods["H_dep"].note
        assert rep.methods["H_ind"].failures == 0

    def test_fixture_grids_ind_not_worse_than_dep(self, grid, grid_red):
        # with random injections the fixed-point dependent map loses its advantage
        net, za = grid
        rep = evaluate(net, za, ["H_ind", "H_dep"], sample_injections(net, 500, seed=1), reduction=grid_red)
        assert rep.methods["H_ind"].mean <= rep.methods["H_dep"].mean

    def test_published_connections_match_default(self, ieee14, ieee14_red):
        net, za = ieee14
        red = reduce_network(net, za, methods=["H_ind"])
        assert {frozenset(c) for c in red.maps.connections} == {frozenset(c) for c in IEEE14_CONNECTIONS}
