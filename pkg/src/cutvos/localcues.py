"""Unsupervised partition of a masked object into coherent sub-regions.

The object mask is projected onto a coarse feature grid (default: mean Lab
color of 16x16 pixel cells). A 4-connected graph over masked cells is
weighted by feature dissimilarity (Euclidean distance); a minimum spanning
forest is built with Kruskal's algorithm and the k-1 heaviest forest edges
are removed, which is the same thing as keeping only the strongest
similarity links. Each resulting component becomes a region whose center is
its pole of inaccessibility, usable as a point prompt.

Tie-breaking is fully specified so partitions are reproducible: edges are
ordered by (weight, construction index), and pruning drops accepted edges
from the heavy end of that order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import cv2
import numpy as np
from scipy import ndimage

from .errors import BadFeatureFile, EmptyMask, KTooLarge

DEFAULT_TAU_P = 0.025
DEFAULT_GROUPS = 4
DEFAULT_CELL = 16  # grid scale 1/16
_FEATURE_MAGIC = b"FGRD"


def _cell_extents(full: int, cells: int) -> int:
    return -(-full // cells)  # ceil division


@dataclass
class FeatureGrid:
    """h x w x c feature map at a coarse scale of the frame.

    `cell_h`/`cell_w` record the pixel block each grid cell covers; for
    externally supplied grids they are derived by ceil division against the
    frame the grid is used with.
    """

    values: np.ndarray  # float32
    scale: float = 1.0 / DEFAULT_CELL
    cell_h: int | None = None
    cell_w: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32)
        if self.values.ndim != 3 or self.values.shape[0] * self.values.shape[1] < 1:
            raise BadFeatureFile(f"feature grid must be h x w x c, got {self.values.shape}")
        if not np.isfinite(self.values).all():
            raise BadFeatureFile("feature grid contains non-finite values")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape[:2]

    def cell_sizes(self, frame_shape: tuple[int, int]) -> tuple[int, int]:
        gh, gw = self.shape
        ch = self.cell_h if self.cell_h else _cell_extents(frame_shape[0], gh)
        cw = self.cell_w if self.cell_w else _cell_extents(frame_shape[1], gw)
        return ch, cw


def _block_reduce(values: np.ndarray, ch: int, cw: int) -> np.ndarray:
    h, w = values.shape[:2]
    part = np.add.reduceat(values, np.arange(0, h, ch), axis=0)
    return np.add.reduceat(part, np.arange(0, w, cw), axis=1)


def color_feature_grid(frame: np.ndarray, cell: int = DEFAULT_CELL) -> FeatureGrid:
    """Mean color per cell in Lab (perceptually uniform, so Euclidean
    feature distance tracks visual dissimilarity)."""
    h, w = frame.shape[:2]
    sums = _block_reduce(frame.astype(np.float64), cell, cell)
    rows = np.minimum(np.arange(0, h, cell) + cell, h) - np.arange(0, h, cell)
    cols = np.minimum(np.arange(0, w, cell) + cell, w) - np.arange(0, w, cell)
    counts = np.outer(rows, cols).astype(np.float64)
    mean_rgb = (sums / counts[..., None]).astype(np.float32) / 255.0
    lab = cv2.cvtColor(mean_rgb, cv2.COLOR_RGB2LAB)
    return FeatureGrid(values=lab, scale=1.0 / cell, cell_h=cell, cell_w=cell)


def grid_mask(mask: np.ndarray, cell: int = DEFAULT_CELL, cell_w: int | None = None) -> np.ndarray:
    """Cell is inside the grid mask iff any of its pixels is foreground."""
    counts = _block_reduce(
        (np.asarray(mask) > 0).astype(np.int64), cell, cell_w if cell_w else cell
    )
    return counts > 0


def build_mask_graph(
    feature: FeatureGrid, mask: np.ndarray
) -> tuple[list[tuple[int, int]], list[tuple[int, int, float]]]:
    """Nodes are masked cells in row-major order; edges join 4-neighbor
    masked pairs with Euclidean feature distance as weight.

    Returns (nodes, edges) where each edge is (u_index, v_index, weight) and
    the edge list order (right neighbor then down neighbor per cell) defines
    the tie-break index.
    """
    m = np.asarray(mask) > 0
    if m.shape != feature.shape:
        raise EmptyMask(f"mask {m.shape} does not match grid {feature.shape}")
    if not m.any():
        raise EmptyMask("mask support is empty")
    h, w = m.shape
    node_id = -np.ones((h, w), dtype=np.int64)
    nodes: list[tuple[int, int]] = []
    for r in range(h):
        for c in range(w):
            if m[r, c]:
                node_id[r, c] = len(nodes)
                nodes.append((r, c))
    feats = feature.values
    edges: list[tuple[int, int, float]] = []
    for r, c in nodes:
        u = int(node_id[r, c])
        if c + 1 < w and m[r, c + 1]:
            d = float(np.linalg.norm(feats[r, c] - feats[r, c + 1]))
            edges.append((u, int(node_id[r, c + 1]), d))
        if r + 1 < h and m[r + 1, c]:
            d = float(np.linalg.norm(feats[r, c] - feats[r + 1, c]))
            edges.append((u, int(node_id[r + 1, c]), d))
    return nodes, edges


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


@dataclass
class RegionPartition:
    """Label map over the grid: 0 outside the mask, 1..k regions."""

    labels: np.ndarray
    k: int
    centers: list[tuple[int, int]] = field(default_factory=list)


def mst_partition(
    nodes: list[tuple[int, int]],
    edges: list[tuple[int, int, float]],
    k: int,
    shape: tuple[int, int],
) -> RegionPartition:
    """Partition into k regions by dropping the heaviest spanning-forest edges.

    Kruskal accepts edges in ascending (weight, edge index) order; keeping
    the first n - k accepted edges leaves exactly k components (k is clamped
    up to the number of mask components, since disconnected pieces cannot be
    merged). Region numbering follows the row-major order of first cells.
    """
    n = len(nodes)
    if n == 0:
        raise EmptyMask("cannot partition an empty node set")
    if k > n:
        raise KTooLarge(f"k={k} exceeds {n} masked cells")
    order = sorted(range(len(edges)), key=lambda i: (edges[i][2], i))
    uf = _UnionFind(n)
    accepted: list[int] = []
    for ei in order:
        u, v, _ = edges[ei]
        if uf.union(u, v):
            accepted.append(ei)
    m_components = n - len(accepted)
    k_eff = max(k, m_components)
    uf2 = _UnionFind(n)
    for ei in accepted[: n - k_eff]:
        u, v, _ = edges[ei]
        uf2.union(u, v)
    labels = np.zeros(shape, dtype=np.int32)
    root_to_label: dict[int, int] = {}
    for idx, (r, c) in enumerate(nodes):
        root = uf2.find(idx)
        if root not in root_to_label:
            root_to_label[root] = len(root_to_label) + 1
        labels[r, c] = root_to_label[root]
    part = RegionPartition(labels=labels, k=len(root_to_label))
    part.centers = region_centers(part)
    return part


def pole_of_inaccessibility(region: np.ndarray) -> tuple[int, int]:
    """Interior cell maximizing Euclidean distance to the region's
    complement (grid borders count as outside); ties resolve to the
    smallest row-major index."""
    padded = np.pad(region.astype(bool), 1)
    dist = ndimage.distance_transform_edt(padded)[1:-1, 1:-1]
    dist = np.where(region, dist, -1.0)
    r, c = np.unravel_index(int(np.argmax(dist)), dist.shape)
    return int(r), int(c)


def region_centers(partition: RegionPartition) -> list[tuple[int, int]]:
    """Pole of inaccessibility per region, in region-label order."""
    return [
        pole_of_inaccessibility(partition.labels == label)
        for label in range(1, partition.k + 1)
    ]


@dataclass(frozen=True)
class RegionDescriptor:
    mean_feature: tuple[float, ...]
    area_fraction: float
    centroid: tuple[float, float]  # (row, col) normalized by (H, W)
    center: tuple[int, int]  # full-resolution (row, col) prompt point


@dataclass(frozen=True)
class LocalCueSet:
    """Per-region descriptors plus point prompts.

    When the mask is too small for partitioning (area fraction below tau_p)
    the set is `skipped` and holds a single whole-object descriptor. The
    prompt protocol: region i takes points[i] as its positive point and
    every other entry of points as a negative.
    """

    skipped: bool
    descriptors: tuple[RegionDescriptor, ...]
    points: tuple[tuple[int, int], ...]

    def prompts_for(self, i: int) -> tuple[tuple[int, int], list[tuple[int, int]]]:
        return self.points[i], [p for j, p in enumerate(self.points) if j != i]

    def to_json_dict(self) -> dict:
        return {
            "skipped": self.skipped,
            "descriptors": [
                {
                    "mean_feature": [round(float(v), 6) for v in d.mean_feature],
                    "area_fraction": round(d.area_fraction, 6),
                    "centroid": [round(d.centroid[0], 6), round(d.centroid[1], 6)],
                    "center": list(d.center),
                }
                for d in self.descriptors
            ],
            "points": [list(p) for p in self.points],
        }


def _center_pixel(
    cell_rc: tuple[int, int], mask: np.ndarray, ch: int, cw: int
) -> tuple[int, int]:
    """Project a grid cell to a full-resolution masked pixel near the cell
    block's center."""
    h, w = mask.shape
    r, c = cell_rc
    r0, r1 = r * ch, min((r + 1) * ch, h)
    c0, c1 = c * cw, min((c + 1) * cw, w)
    mid = ((r0 + r1 - 1) // 2, (c0 + c1 - 1) // 2)
    if mask[mid] > 0:
        return mid
    block = np.argwhere(mask[r0:r1, c0:c1] > 0)
    if block.size == 0:
        return mid
    d = np.abs(block[:, 0] + r0 - mid[0]) + np.abs(block[:, 1] + c0 - mid[1])
    best = block[int(np.argmin(d))]
    return int(best[0] + r0), int(best[1] + c0)


def extract_local_cues(
    feature: FeatureGrid,
    mask: np.ndarray,
    partition: RegionPartition,
    centers: list[tuple[int, int]],
    tau_p: float = DEFAULT_TAU_P,
) -> LocalCueSet:
    """Descriptors and prompts for a conditional-frame partition.

    Masks whose area fraction is below tau_p are not partitioned (a single
    whole-object descriptor is returned instead) to avoid shattering small
    objects into meaningless pieces.
    """
    mask = np.asarray(mask)
    h, w = mask.shape
    ch, cw = feature.cell_sizes((h, w))
    area_fraction = float(np.count_nonzero(mask) / (h * w))
    fg = mask > 0

    def descriptor(region_cells: np.ndarray, cell_rc: tuple[int, int]) -> RegionDescriptor:
        # full-resolution pixels whose cell belongs to this region
        up = np.repeat(np.repeat(region_cells, ch, axis=0), cw, axis=1)[:h, :w]
        member = up & fg
        count = int(np.count_nonzero(member))
        coords = np.argwhere(member)
        centroid = (
            float(coords[:, 0].mean() / h) if count else 0.0,
            float(coords[:, 1].mean() / w) if count else 0.0,
        )
        mean_feat = tuple(
            float(v) for v in feature.values[region_cells].mean(axis=0)
        )
        return RegionDescriptor(
            mean_feature=mean_feat,
            area_fraction=count / (h * w),
            centroid=centroid,
            center=_center_pixel(cell_rc, mask, ch, cw),
        )

    if not fg.any():
        return LocalCueSet(skipped=True, descriptors=(), points=())

    if area_fraction < tau_p:
        support = partition.labels > 0
        pole = pole_of_inaccessibility(support)
        desc = descriptor(support, pole)
        return LocalCueSet(skipped=True, descriptors=(desc,), points=(desc.center,))

    descs = []
    for label in range(1, partition.k + 1):
        cells = partition.labels == label
        descs.append(descriptor(cells, centers[label - 1]))
    return LocalCueSet(
        skipped=False,
        descriptors=tuple(descs),
        points=tuple(d.center for d in descs),
    )


def partition_object(
    frame: np.ndarray,
    mask: np.ndarray,
    k: int = DEFAULT_GROUPS,
    tau_p: float = DEFAULT_TAU_P,
    cell: int = DEFAULT_CELL,
    feature: FeatureGrid | None = None,
) -> tuple[FeatureGrid, RegionPartition, LocalCueSet]:
    """Feature grid + partition + cues for one conditional frame."""
    if feature is None:
        feature = color_feature_grid(frame, cell=cell)
    ch, cw = feature.cell_sizes(mask.shape)
    gm = grid_mask(mask, cell=ch, cell_w=cw)
    if gm.shape != feature.shape:
        # external grid slightly larger than the pixel tiling: pad with
        # background cells so dims agree
        padded = np.zeros(feature.shape, dtype=bool)
        padded[: gm.shape[0], : gm.shape[1]] = gm
        gm = padded
    nodes, edges = build_mask_graph(feature, gm)
    k_eff = min(k, len(nodes))
    part = mst_partition(nodes, edges, k_eff, gm.shape)
    cues = extract_local_cues(feature, mask, part, part.centers, tau_p=tau_p)
    return feature, part, cues


def write_feature_file(path, grid: FeatureGrid) -> None:
    """Flat binary: 16-byte header (magic FGRD + h, w, c as u32 LE) then
    h*w*c float32 LE values."""
    h, w = grid.shape
    c = grid.values.shape[2]
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIII", _FEATURE_MAGIC, h, w, c))
        fh.write(np.ascontiguousarray(grid.values, dtype="<f4").tobytes())


def read_feature_file(path) -> FeatureGrid:
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise BadFeatureFile(f"{path}: truncated header")
        magic, h, w, c = struct.unpack("<4sIII", header)
        if magic != _FEATURE_MAGIC:
            raise BadFeatureFile(f"{path}: bad magic {magic!r}")
        data = np.frombuffer(fh.read(), dtype="<f4")
    if data.size != h * w * c:
        raise BadFeatureFile(f"{path}: expected {h * w * c} floats, got {data.size}")
    return FeatureGrid(values=data.reshape(h, w, c).copy(), scale=1.0)
