"""Zonal mapping matrices and reduced PTDFs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import networkx as nx
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .case_io import CaseFormatError, Network, ZonalAssignment
from .dc_network import PtdfMatrix

__all__ = [
    "ReductionMaps",
    "ReductionError",
    "ZeroZonalInjection",
    "build_maps",
    "connection_blocks",
    "reduced_ptdf_independent",
    "reduced_ptdf_dependent",
    "zonal_injections",
]


class ReductionError(CaseFormatError):
    pass


class ZeroZonalInjection(ValueError):
    """The injection-dependent PTDF is undefined when a zone nets to zero."""

    def __init__(self, zone: int):
        super().__init__(
            f"zone {zone} has zero net injection: injection-dependent PTDF undefined for this scenario"
        )
        self.zone = zone


@dataclass(frozen=True, eq=False)
class ReductionMaps:
    """Matrices linking the original network to its zonal equivalent.

    Attributes
    ----------
    T_bz : (n_z-1, n_b-1) int
        Bus-to-zone aggregation over non-slack buses and non-slack zones.
    T_f : (n_lr, n_l) int
        Signed sum of original branch flows into each interzonal connection.
    C_red : (n_lr, n_z-1) int
        Incidence of the reduced network, slack-zone column removed.
    C_phys : (n_lr, n_l) int
        Unsigned selector of the branches crossing each connection.
    connections : list of (from_zone, to_zone)
    """

    T_bz: np.ndarray
    T_f: np.ndarray
    C_red: np.ndarray
    C_phys: np.ndarray
    connections: tuple[tuple[int, int], ...]
    zones: tuple[int, ...]  # non-slack zones, column order of T_bz rows / C_red
    slack_zone: int

    @property
    def n_lr(self) -> int:
        return len(self.connections)

    @property
    def connection_labels(self) -> tuple[str, ...]:
        return tuple(f"{i}-{j}" for i, j in self.connections)

    @property
    def zone_sizes(self) -> np.ndarray:
        return self.T_bz.sum(axis=1)


def build_maps(
    net: Network,
    za: ZonalAssignment,
    connections: Sequence[tuple[int, int]] | None = None,
) -> ReductionMaps:
    """Build the zonal mapping matrices.

    By default connections are the zone pairs joined by at least one branch,
    sorted by zone id and oriented from the lower to the higher id. An
    explicit ``connections`` list fixes both order and orientation; it must
    name every crossed zone pair exactly once.
    """
    live = net.in_service()
    zf = np.array([za.zone_of[int(b)] for b in live.from_bus])
    zt = np.array([za.zone_of[int(b)] for b in live.to_bus])
    crossing = {tuple(sorted(p)) for p in zip(zf.tolist(), zt.tolist()) if p[0] != p[1]}
    if not crossing:
        raise ReductionError("no branch crosses a zone boundary")

    if connections is None:
        conns = tuple(sorted(crossing))
    else:
        conns = tuple((int(i), int(j)) for i, j in connections)
        given = [tuple(sorted(c)) for c in conns]
        if len(set(given)) != len(given) or set(given) != crossing:
            raise ReductionError(
                f"explicit connections {list(conns)} do not match crossed zone pairs {sorted(crossing)}"
            )

    row_of = {}
    for r, (i, j) in enumerate(conns):
        row_of[(i, j)] = (r, 1)
        row_of[(j, i)] = (r, -1)
    T_f = np.zeros((len(conns), live.n_l), dtype=int)
    for k, pair in enumerate(zip(zf.tolist(), zt.tolist())):
        if pair[0] != pair[1]:
            r, sign = row_of[pair]
            T_f[r, k] = sign
    C_phys = np.abs(T_f)

    zones = za.non_slack_zones
    zcol = {z: c for c, z in enumerate(zones)}
    C_red = np.zeros((len(conns), len(zones)), dtype=int)
    for r, (i, j) in enumerate(conns):
        if i in zcol:
            C_red[r, zcol[i]] = 1
        if j in zcol:
            C_red[r, zcol[j]] = -1

    T_bz = np.zeros((len(zones), net.n_b - 1), dtype=int)
    for col, pos in enumerate(net.non_slack):
        z = za.zone_of[int(net.bus_ids[pos])]
        if z in zcol:
            T_bz[zcol[z], col] = 1

    # reduced graph over all zones, slack included
    zid = {z: n for n, z in enumerate(za.zones)}
    a = [zid[i] for i, _ in conns]
    b = [zid[j] for _, j in conns]
    graph = coo_matrix((np.ones(len(a)), (a, b)), shape=(za.n_z, za.n_z))
    n_comp, _ = connected_components(graph, directed=False)
    if n_comp > 1:
        raise ReductionError(f"reduced zonal graph is disconnected ({n_comp} components)")

    return ReductionMaps(T_bz=T_bz, T_f=T_f, C_red=C_red, C_phys=C_phys,
                         connections=conns, zones=zones, slack_zone=za.slack_zone)


def connection_blocks(maps: ReductionMaps) -> tuple[np.ndarray, ...]:
    """Group connections into the biconnected blocks of the zonal graph.

    Blocks meet only at articulation zones; a bridge forms a block of its
    own. The reduced PTDF does not change when all susceptances of one block
    are scaled together, so each block carries one undetermined scale.
    """
    g = nx.MultiGraph()
    for k, (i, j) in enumerate(maps.connections):
        g.add_edge(i, j, key=k)
    index = {frozenset(c): k for k, c in enumerate(maps.connections)}
    blocks = []
    for comp in nx.biconnected_component_edges(g):
        blocks.append(np.array(sorted({index[frozenset(e[:2])] for e in comp}), dtype=int))
    return tuple(sorted(blocks, key=lambda a: int(a[0])))


def _check_shapes(H_f: PtdfMatrix, maps: ReductionMaps) -> None:
    n_l, n_b1 = H_f.shape
    if maps.T_f.shape[1] != n_l or maps.T_bz.shape[1] != n_b1:
        raise ValueError(
            f"PTDF shape {H_f.shape} inconsistent with maps "
            f"(T_f {maps.T_f.shape}, T_bz {maps.T_bz.shape})"
        )


def _wrap(values: np.ndarray, maps: ReductionMaps) -> PtdfMatrix:
    return PtdfMatrix(values=values, row_labels=maps.connection_labels,
                      col_labels=maps.zones, slack=maps.slack_zone)


def zonal_injections(maps: ReductionMaps, p_inj: np.ndarray) -> np.ndarray:
    """Net injection of each non-slack zone (``T_bz @ p_inj``)."""
    return maps.T_bz @ np.asarray(p_inj, dtype=float)


def reduced_ptdf_independent(H_f: PtdfMatrix, maps: ReductionMaps) -> PtdfMatrix:
    """Injection-independent reduced PTDF.

    ``T_f H_f T_bz^T (T_bz T_bz^T)^-1``; the Gram matrix is diagonal with the
    non-slack zone sizes, so the inverse is a column scaling.
    """
    _check_shapes(H_f, maps)
    flows = maps.T_f @ H_f.values @ maps.T_bz.T
    return _wrap(flows / maps.zone_sizes[None, :], maps)


def reduced_ptdf_dependent(H_f: PtdfMatrix, maps: ReductionMaps, p_inj: np.ndarray) -> PtdfMatrix:
    """Injection-dependent reduced PTDF at the operating point ``p_inj``.

    ``p_inj`` holds non-slack bus injections. Raises :class:`ZeroZonalInjection`
    when a non-slack zone has zero net injection.
    """
    _check_shapes(H_f, maps)
    p = np.asarray(p_inj, dtype=float)
    pz = zonal_injections(maps, p)
    scale = max(float(np.abs(p).sum()), 1.0)
    for z, v in zip(maps.zones, pz):
        if abs(v) <= 1e-12 * scale:
            raise ZeroZonalInjection(z)
    weighted = (maps.T_f @ H_f.values) @ (p[:, None] * maps.T_bz.T)
    return _wrap(weighted / pz[None, :], maps)
