from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import netreduce as nr
from netreduce.case_io import ZonalAssignment
from netreduce.dc_network import full_ptdf
from netreduce.zonal_reduction import (
    ReductionError,
    ZeroZonalInjection,
    build_maps,
    connection_blocks,
    reduced_ptdf_dependent,
    reduced_ptdf_independent,
    zonal_injections,
)

from reference_values import H_IND, IEEE14_CONNECTIONS


@pytest.fixture(scope="module")
def maps14(ieee14):
    net, za = ieee14
    return build_maps(net, za, IEEE14_CONNECTIONS)


class TestBuildMaps:
    def test_default_order_sorted(self, ieee14):
        net, za = ieee14
        maps = build_maps(net, za)
        assert maps.connections == ((1, 2), (1, 3), (1, 4), (2, 3), (3, 4))
        assert maps.n_lr == 5

    def test_t_f_row_1_3(self, ieee14, maps14):
        net, _ = ieee14
        labels = net.branch_labels()
        row = maps14.T_f[maps14.connections.index((1, 3))]
        assert row[labels.index("2-4")] == 1
        assert row[labels.index("4-5")] == -1
        assert np.count_nonzero(row) == 2

    def test_t_bz_zone_3(self, ieee14, maps14):
        net, _ = ieee14
        buses = net.bus_ids[net.non_slack]
        row = maps14.T_bz[maps14.zones.index(3)]
        assert sorted(buses[row == 1].tolist()) == [4, 7, 8, 9]

    def test_slack_zone_columns_empty(self, ieee14, maps14):
        net, _ = ieee14
        buses = net.bus_ids[net.non_slack].tolist()
        for b in (2, 5):
            assert not maps14.T_bz[:, buses.index(b)].any()

    def test_invariants(self, grid):
        net, za = grid
        maps = build_maps(net, za)
        assert set(np.unique(maps.T_bz)) <= {0, 1}
        assert (maps.T_bz.sum(axis=0) <= 1).all()
        assert set(np.unique(maps.T_f)) <= {-1, 0, 1}
        np.testing.assert_array_equal(maps.C_phys, np.abs(maps.T_f))
        zf = np.array([za.zone_of[int(b)] for b in net.from_bus])
        zt = np.array([za.zone_of[int(b)] for b in net.to_bus])
        for r, (i, j) in enumerate(maps.connections):
            assert i < j
            crossing = ((zf == i) & (zt == j)) | ((zf == j) & (zt == i))
            np.testing.assert_array_equal(maps.T_f[r] != 0, crossing)
            np.testing.assert_array_equal(maps.T_f[r][crossing], np.where(zf[crossing] == i, 1, -1))

    def test_identity(self):
        net = nr.read_case("six_bus")
        za = ZonalAssignment.identity(net)
        maps = build_maps(net, za)
        np.testing.assert_array_equal(maps.T_bz, np.eye(net.n_b - 1, dtype=int))
        np.testing.assert_array_equal(np.abs(maps.T_f), np.eye(net.n_l, dtype=int))

    def test_explicit_connections_must_match(self, ieee14):
        net, za = ieee14
        with pytest.raises(ReductionError, match="do not match"):
            build_maps(net, za, [(1, 4), (1, 3)])

    def test_no_interzonal_branches(self):
        net = nr.read_case("six_bus")
        za = ZonalAssignment(zone_of={b: (1 if b <= 3 else 2) for b in range(1, 7)}, slack_zone=1)
        # cut every branch between the halves
        keep = [k for k, (f, t) in enumerate(zip(net.from_bus, net.to_bus)) if (f <= 3) == (t <= 3)]
        cut = nr.Network(bus_ids=net.bus_ids, p_inj=net.p_inj, from_bus=net.from_bus[keep],
                         to_bus=net.to_bus[keep], x=net.x[keep], status=net.status[keep],
                         slack_bus=net.slack_bus)
        with pytest.raises(ReductionError, match="no branch crosses"):
            build_maps(cut, za)


class TestIndependent:
    def test_ieee14_rows(self, ieee14, maps14):
        net, _ = ieee14
        H = reduced_ptdf_independent(full_ptdf(net), maps14)
        np.testing.assert_allclose(H.values, H_IND, atol=1e-3)
        assert H.col_labels == (2, 3, 4)
        # 1-4 and 4-3 are in series: they differ by exactly one in the zone-4 column
        np.testing.assert_allclose(H.values[2] - H.values[0], [0.0, 0.0, 1.0], atol=1e-12)

    def test_identity_equals_full(self, grid):
        net, _ = grid
        za = ZonalAssignment.identity(net)
        maps = build_maps(net, za)
        H_f = full_ptdf(net)
        H = reduced_ptdf_independent(H_f, maps)
        # rows follow connections; map each back to its branch with sign
        aligned = maps.T_f @ H_f.values
        np.testing.assert_allclose(H.values, aligned @ maps.T_bz.T, atol=1e-12)
        np.testing.assert_allclose(np.abs(H.values).sum(), np.abs(H_f.values).sum(), rtol=1e-12)

    def test_aggregation_consistency(self, grid, rng):
        net, za = grid
        maps = build_maps(net, za)
        H_f = full_ptdf(net)
        p = rng.normal(0, 50, net.n_b - 1)
        flows = H_f @ p
        agg = maps.T_f @ flows
        for r in range(maps.n_lr):
            cols = np.flatnonzero(maps.T_f[r])
            assert agg[r] == pytest.approx(float(np.sum(maps.T_f[r, cols] * flows[cols])), abs=1e-10)


class TestDependent:
    def test_exact_at_operating_point(self, grid):
        net, za = grid
        maps = build_maps(net, za)
        H_f = full_ptdf(net)
        p = net.p_inj[net.non_slack]
        H = reduced_ptdf_dependent(H_f, maps, p)
        # exact for the injections T_bz keeps; slack-zone buses other than
        # the slack are not represented in the zonal model
        kept = p * maps.T_bz.sum(axis=0)
        np.testing.assert_allclose(H @ (maps.T_bz @ p), maps.T_f @ (H_f @ kept), atol=1e-8)

    def test_exact_when_slack_zone_is_quiet(self, ieee14, maps14):
        net, _ = ieee14
        H_f = full_ptdf(net)
        p = net.p_inj[net.non_slack] * maps14.T_bz.sum(axis=0)
        H = reduced_ptdf_dependent(H_f, maps14, p)
        np.testing.assert_allclose(H @ (maps14.T_bz @ p), maps14.T_f @ (H_f @ p), atol=1e-8)

    def test_uniform_zonal_injections_match_independent(self, ieee14, maps14):
        net, _ = ieee14
        H_f = full_ptdf(net)
        p = maps14.T_bz.T @ np.array([3.0, -2.0, 5.0])
        np.testing.assert_allclose(reduced_ptdf_dependent(H_f, maps14, p).values,
                                   reduced_ptdf_independent(H_f, maps14).values, atol=1e-12)

    def test_zero_zone(self, ieee14, maps14):
        net, _ = ieee14
        p = net.p_inj[net.non_slack].copy()
        buses = net.bus_ids[net.non_slack].tolist()
        p[buses.index(6)] -= zonal_injections(maps14, p)[0]
        with pytest.raises(ZeroZonalInjection, match="zone 2 has zero net injection") as exc:
            reduced_ptdf_dependent(full_ptdf(net), maps14, p)
        assert exc.value.zone == 2

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.floats(-100, 100).filter(lambda v: abs(v) > 1e-3), min_size=13, max_size=13))
    def test_slack_zone_injections_only_through_h_f(self, p):
        net = nr.read_case("ieee14")
        za = nr.read_zones("ieee14", net)
        maps = build_maps(net, za)
        p = np.array(p)
        pz = zonal_injections(maps, p)
        if np.any(np.abs(pz) < 1e-3):
            return
        H_ind = reduced_ptdf_independent(full_ptdf(net), maps)
        # zonal flows depend on non-slack zonal sums only
        np.testing.assert_allclose(H_ind @ pz, H_ind.values @ (maps.T_bz @ p), atol=1e-9)


class TestBlocks:
    def test_meshed_single_block(self, maps14):
        assert len(connection_blocks(maps14)) == 1

    def test_identity_ieee14_radial_bus(self):
        net = nr.read_case("ieee14")
        maps = build_maps(net, ZonalAssignment.identity(net))
        blocks = connection_blocks(maps)
        assert sorted(len(b) for b in blocks) == [1, 19]
        (single,) = [b for b in blocks if len(b) == 1]
        assert maps.connections[int(single[0])] == (7, 8)

    def test_partition(self, grid):
        net, za = grid
        maps = build_maps(net, za)
        idx = np.concatenate(connection_blocks(maps))
        np.testing.assert_array_equal(np.sort(idx), np.arange(maps.n_lr))
