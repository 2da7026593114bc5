"""Random planar test grids with a geographic zone split.

Buses are scattered in the unit square, connected by a minimum spanning tree
plus the shortest remaining Delaunay edges, and grouped into zones around
spread-out seed buses. Reactance grows with line length.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial import Delaunay

from .case_io import Network, ZonalAssignment

__all__ = ["synthetic_grid"]


def _delaunay_edges(pts: np.ndarray) -> np.ndarray:
    tri = Delaunay(pts)
    edges = set()
    for simplex in tri.simplices:
        for a in range(3):
            i, j = sorted((int(simplex[a]), int(simplex[(a + 1) % 3])))
            edges.add((i, j))
    return np.array(sorted(edges), dtype=int)


def _spread_seeds(pts: np.ndarray, k: int, rng: np.random.Generator) -> list[int]:
    # farthest-point sampling, starting from the slack bus
    seeds = [0]
    dist = np.linalg.norm(pts - pts[0], axis=1)
    while len(seeds) < k:
        nxt = int(np.argmax(dist + 1e-9 * rng.random(dist.size)))
        seeds.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(pts - pts[nxt], axis=1))
    return seeds


def synthetic_grid(
    n_buses: int = 185,
    n_branches: int = 352,
    n_zones: int = 21,
    seed: int = 0,
    injection_sigma: float = 50.0,
) -> tuple[Network, ZonalAssignment]:
    """Connected grid of ``n_buses`` buses and ``n_branches`` branches split into zones.

    Bus 1 is the slack and sits in zone 1.
    """
    if n_branches < n_buses - 1:
        raise ValueError("need at least n_buses - 1 branches for a connected grid")
    if not 2 <= n_zones <= n_buses:
        raise ValueError("n_zones must be between 2 and n_buses")
    rng = np.random.default_rng(seed)
    pts = rng.random((n_buses, 2))

    cand = _delaunay_edges(pts)
    if n_branches > len(cand):
        raise ValueError(f"at most {len(cand)} planar branches available for this layout")
    length = np.linalg.norm(pts[cand[:, 0]] - pts[cand[:, 1]], axis=1)
    w = coo_matrix((length, (cand[:, 0], cand[:, 1])), shape=(n_buses, n_buses))
    tree = minimum_spanning_tree(w).tocoo()
    in_tree = {tuple(sorted((int(i), int(j)))) for i, j in zip(tree.row, tree.col)}
    chosen = [k for k, e in enumerate(map(tuple, cand)) if e in in_tree]
    rest = [k for k in np.argsort(length, kind="stable") if tuple(cand[k]) not in in_tree]
    chosen += rest[: n_branches - len(chosen)]
    chosen.sort()
    edges, lengths = cand[chosen], length[chosen]

    seeds = _spread_seeds(pts, n_zones, rng)
    d = np.linalg.norm(pts[:, None, :] - pts[seeds][None, :, :], axis=2)
    zone_idx = np.argmin(d, axis=1)  # seed k -> zone k + 1, slack seed first

    p = rng.normal(0.0, injection_sigma, n_buses).round(1)
    p[0] = -p[1:].sum()

    bus_ids = np.arange(1, n_buses + 1)
    net = Network(
        bus_ids=bus_ids,
        p_inj=p,
        from_bus=bus_ids[edges[:, 0]],
        to_bus=bus_ids[edges[:, 1]],
        x=np.round(0.01 + 0.4 * lengths, 5),
        status=np.ones(len(edges), dtype=int),
        slack_bus=1,
        base_mva=100.0,
        name=f"synthetic{n_buses}",
        comments=(f"Synthetic planar grid, seed {seed}.",),
    )
    za = ZonalAssignment(zone_of={int(b): int(z) + 1 for b, z in zip(bus_ids, zone_idx)}, slack_zone=1)
    return net, za
