"""Independent oracles shared by the test modules."""

import numpy as np
from shapely.geometry import Polygon, box
from shapely.strtree import STRtree


def brute_blocked(p0, p1, boxes):
    """Slab test against every building, no index and no prefilter."""
    p0 = np.asarray(p0, dtype=float)
    d = np.asarray(p1, dtype=float) - p0
    lo = np.column_stack([boxes[:, 0], boxes[:, 1], np.zeros(len(boxes))])
    hi = np.column_stack([boxes[:, 2], boxes[:, 3], boxes[:, 4]])
    t_in = np.zeros(len(boxes))
    t_out = np.ones(len(boxes))
    alive = np.ones(len(boxes), dtype=bool)
    for ax in range(3):
        if d[ax] == 0.0:
            alive &= (p0[ax] > lo[:, ax]) & (p0[ax] < hi[:, ax])
            continue
        with np.errstate(over="ignore"):  # subnormal directions give +-inf, which is correct
            a = (lo[:, ax] - p0[ax]) / d[ax]
            b = (hi[:, ax] - p0[ax]) / d[ax]
        t_in = np.maximum(t_in, np.minimum(a, b))
        t_out = np.minimum(t_out, np.maximum(a, b))
    return bool(np.any(alive & (t_in < t_out)))


def footprint_polygons(layout):
    return [box(b.x, b.y, b.x + b.width, b.y + b.length) for b in layout.buildings]


def max_pairwise_overlap(layout) -> float:
    polys = footprint_polygons(layout)
    tree = STRtree(polys)
    worst = 0.0
    for i, p in enumerate(polys):
        for j in tree.query(p):
            if j > i:
                worst = max(worst, p.intersection(polys[j]).area)
    return worst


def highway_overlap(layout) -> float:
    polys = footprint_polygons(layout)
    total = 0.0
    for hw in layout.highways:
        hp = Polygon(hw.corners())
        total += sum(hp.intersection(p).area for p in polys)
    return total


def random_links_outside(boxes, area, n, rng, h_range=(5.0, 300.0)):
    """Random ABS/GU pairs with both endpoints outside every footprint."""
    from a2g.geomlos import inside_footprints

    abs_xyz = np.column_stack([rng.random((n, 2)) * area, rng.uniform(*h_range, n)])
    gu = np.column_stack([rng.random((n, 2)) * area, np.full(n, 1.5)])
    keep = ~inside_footprints(gu[:, :2], boxes) & ~inside_footprints(abs_xyz[:, :2], boxes)
    return abs_xyz[keep], gu[keep]


def state_split_dataset(layout, env, heights, n_per_state, seed, area=2000.0):
    """Synthetic links with ``n_per_state`` forced-LoS and forced-NLoS draws per height."""
    from a2g.geomlos import LinkDataset, random_links
    from a2g.lsfmod import builtin_model, synthesize
    from a2g.seeding import substream

    model = builtin_model(layout, env)
    parts = []
    for k, mode in enumerate(("los", "nlos")):
        geo = random_links(heights, n_per_state, substream(seed, "test-geometry", k), area=area)
        parts.append(synthesize(geo, model, substream(seed, "test-channel", k), mode))
    return LinkDataset.concat(parts), model
