"""Observed affordance maps derived from ground truth.

The observation pipeline mirrors a two-speed perception stack: an expensive
full classification pass (farthest-point region partition + per-region
labeling by a pluggable classifier oracle) runs every `reclassify_period`
frames, while cheap temporal propagation (union of newly transformed cells
into the tracked mask) fills the frames in between. A noise model perturbs
region boundaries and flips labels in the boundary band to emulate
segmentation and tracking error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .world import CellState, WorldState

__all__ = [
    "SpocMap",
    "RegionPartition",
    "ClassifierOracle",
    "NoiseModel",
    "PerceptionState",
    "partition_regions",
    "classify_regions",
    "propagate_mask",
    "observe",
    "default_region_count",
    "dilate_mask",
    "erode_mask",
    "boundary_band",
    "pooled_fraction",
]


@dataclass
class SpocMap:
    """Observed segmentation into background / actionable / transformed.

    Same label encoding as the ground-truth grid, but this is what the
    policy sees, not the truth.
    """

    grid: np.ndarray
    frame_index: int = 0

    def count(self, state: CellState) -> int:
        return int(np.count_nonzero(self.grid == state))


@dataclass
class RegionPartition:
    """Intra-object regions: seed cells plus a per-cell region id.

    seeds are flat row-major cell indices; region_id is an int array with
    -1 outside the object and values in [0, K) inside.
    """

    seeds: list[int]
    region_id: np.ndarray

    @property
    def num_regions(self) -> int:
        return len(self.seeds)


@dataclass
class ClassifierOracle:
    """Stand-in for a vision-language region classifier.

    With error_rate 0 it returns the ground-truth majority label of each
    region; otherwise each region label is flipped independently with the
    given probability.
    """

    error_rate: float = 0.05
    rng: np.random.Generator = None

    def __post_init__(self):
        if not 0.0 <= self.error_rate < 1.0 + 1e-12:
            raise ValueError(f"error_rate must be in [0, 1], got {self.error_rate}")
        if self.rng is None:
            self.rng = np.random.default_rng(0)

    @classmethod
    def from_seed(cls, seed: int, error_rate: float = 0.05) -> "ClassifierOracle":
        return cls(error_rate=error_rate, rng=np.random.default_rng([int(seed), 101]))


@dataclass(frozen=True)
class NoiseModel:
    """Perception error knobs.

    flip_prob flips labels per cell, but only on the actionable/transformed
    boundary band; dilate_radius grows (or erodes, if negative) the newly
    transformed cells folded in by propagation; reclassify_period is the
    number of frames between full classification passes.
    """

    flip_prob: float = 0.02
    dilate_radius: int = 1
    reclassify_period: int = 4

    def __post_init__(self):
        if not 0.0 <= self.flip_prob <= 0.2:
            raise ValueError(f"flip_prob must be in [0, 0.2], got {self.flip_prob}")
        if abs(self.dilate_radius) > 2:
            raise ValueError(f"|dilate_radius| must be <= 2, got {self.dilate_radius}")
        if self.reclassify_period < 1:
            raise ValueError(f"reclassify_period must be >= 1, got {self.reclassify_period}")

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        # Reclassification under a large period never reruns mid-episode, so
        # the observed map tracks ground truth exactly from a clean start.
        return cls(flip_prob=0.0, dilate_radius=0, reclassify_period=1_000_000_000)


@dataclass
class PerceptionState:
    """Carry-over between observation frames.

    Besides the tracked map and the reclassification clock this holds the
    oracle and the propagation rng so `observe` is self-contained.
    """

    last_map: SpocMap | None
    frames_since_reclassify: int
    oracle: ClassifierOracle
    rng: np.random.Generator
    num_regions: int | None = None

    @classmethod
    def initial(
        cls,
        seed: int,
        error_rate: float = 0.05,
        num_regions: int | None = None,
    ) -> "PerceptionState":
        return cls(
            last_map=None,
            frames_since_reclassify=0,
            oracle=ClassifierOracle.from_seed(seed, error_rate),
            rng=np.random.default_rng([int(seed), 202]),
            num_regions=num_regions,
        )


def default_region_count(n_object_cells: int) -> int:
    """One region per ~50 object cells, at least 4."""
    return max(4, int(round(n_object_cells / 50)))


def partition_regions(object_mask: np.ndarray, num_regions: int, seed: int = 0) -> RegionPartition:
    """Partition object cells into regions around farthest-point seeds.

    The first seed is the object cell nearest the object centroid; each
    following seed maximizes its minimum distance to the seeds already
    chosen. Every object cell is then assigned to its nearest seed.
    All ties break toward the smallest row-major cell index. Distances are
    Euclidean over cell centers. The selection is fully deterministic; the
    seed argument is accepted for interface symmetry with the noisy stages.
    """
    del seed
    iy, ix = np.nonzero(object_mask)
    n = ix.size
    if num_regions < 1:
        raise ValueError(f"num_regions must be >= 1, got {num_regions}")
    if num_regions > n:
        raise ValueError(f"num_regions {num_regions} exceeds object cell count {n}")
    pts = np.stack([ix, iy], axis=1).astype(np.int64)
    centroid = pts.mean(axis=0)
    d2_centroid = ((pts - centroid) ** 2).sum(axis=1)
    # nonzero() yields row-major order, so argmin's first match is the tie-break.
    chosen = [int(np.argmin(d2_centroid))]
    min_d2 = ((pts - pts[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < num_regions:
        nxt = int(np.argmax(min_d2))
        chosen.append(nxt)
        min_d2 = np.minimum(min_d2, ((pts - pts[nxt]) ** 2).sum(axis=1))

    width = object_mask.shape[1]
    seed_flat = [int(pts[c, 1]) * width + int(pts[c, 0]) for c in chosen]
    # Assign to nearest seed; among ties prefer the seed cell with the
    # smallest row-major index, regardless of the order seeds were chosen.
    order = np.argsort(np.asarray(seed_flat, dtype=np.int64), kind="stable")
    d2 = np.stack(
        [((pts - pts[chosen[k]]) ** 2).sum(axis=1) for k in order],
        axis=1,
    )
    nearest_ordered = np.argmin(d2, axis=1)
    assignment = order[nearest_ordered]

    region_id = np.full(object_mask.shape, -1, dtype=np.int32)
    region_id[iy, ix] = assignment
    return RegionPartition(seeds=seed_flat, region_id=region_id)


def classify_regions(partition: RegionPartition, truth: WorldState, oracle: ClassifierOracle) -> SpocMap:
    """Label each region by the majority ground-truth state of its cells.

    Ties label Actionable (the conservative choice). Each region label is
    then flipped with probability oracle.error_rate. Background passes
    through untouched.
    """
    k = partition.num_regions
    inside = partition.region_id >= 0
    ids = partition.region_id[inside]
    trf = (truth.grid[inside] == CellState.TRANSFORMED).astype(np.int64)
    n_trf = np.bincount(ids, weights=trf, minlength=k)
    n_all = np.bincount(ids, minlength=k)
    labels = np.where(n_trf > n_all - n_trf, CellState.TRANSFORMED, CellState.ACTIONABLE)
    flips = oracle.rng.random(k) < oracle.error_rate
    flipped = np.where(
        labels == CellState.TRANSFORMED, CellState.ACTIONABLE, CellState.TRANSFORMED
    )
    labels = np.where(flips, flipped, labels).astype(np.uint8)

    out = np.full(truth.grid.shape, CellState.BACKGROUND, dtype=np.uint8)
    out[inside] = labels[ids]
    return SpocMap(grid=out, frame_index=truth.step)


def _disc_shifts(radius: int) -> list[tuple[int, int]]:
    r = int(radius)
    return [
        (dx, dy)
        for dy in range(-r, r + 1)
        for dx in range(-r, r + 1)
        if dx * dx + dy * dy <= r * r
    ]


def _shift(mask: np.ndarray, dx: int, dy: int, fill: bool) -> np.ndarray:
    out = np.full_like(mask, fill)
    h, w = mask.shape
    ys = slice(max(0, dy), min(h, h + dy))
    xs = slice(max(0, dx), min(w, w + dx))
    ys_src = slice(max(0, -dy), min(h, h - dy))
    xs_src = slice(max(0, -dx), min(w, w - dx))
    out[ys, xs] = mask[ys_src, xs_src]
    return out


def dilate_mask(mask: np.ndarray, radius: int) -> np.ndarray:
    """Binary dilation with a Euclidean disc of the given cell radius."""
    out = np.zeros_like(mask)
    for dx, dy in _disc_shifts(radius):
        out |= _shift(mask, dx, dy, False)
    return out


def erode_mask(mask: np.ndarray, radius: int) -> np.ndarray:
    """Binary erosion with a Euclidean disc; cells beyond the border count empty."""
    out = np.ones_like(mask)
    for dx, dy in _disc_shifts(radius):
        out &= _shift(mask, dx, dy, False)
    return out


def boundary_band(transformed: np.ndarray, object_mask: np.ndarray) -> np.ndarray:
    """Object cells with a 4-neighbor object cell of the opposite observed label."""
    actionable = object_mask & ~transformed
    near_trf = np.zeros_like(transformed)
    near_act = np.zeros_like(transformed)
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        near_trf |= _shift(transformed, dx, dy, False)
        near_act |= _shift(actionable, dx, dy, False)
    return (transformed & near_act) | (actionable & near_trf)


def propagate_mask(
    state: PerceptionState,
    truth: WorldState,
    noise: NoiseModel,
    rng: np.random.Generator | None = None,
) -> tuple[SpocMap, PerceptionState]:
    """Track the transformed region forward one frame without reclassifying.

    Newly transformed ground-truth cells (relative to the tracked map) are
    boundary-perturbed by dilate_radius and unioned into the tracked
    transformed set; flip noise then applies on the one-cell boundary band.
    """
    if state.last_map is None:
        raise ValueError("propagate_mask requires a prior classification pass")
    gen = rng if rng is not None else state.rng
    obj = truth.object_mask
    prev_trf = state.last_map.grid == CellState.TRANSFORMED
    new_cells = (truth.grid == CellState.TRANSFORMED) & ~prev_trf
    r = noise.dilate_radius
    if r > 0:
        new_cells = dilate_mask(new_cells, r) & obj
    elif r < 0:
        new_cells = erode_mask(new_cells, -r)
    obs_trf = (prev_trf | new_cells) & obj
    if noise.flip_prob > 0.0:
        band = boundary_band(obs_trf, obj)
        flips = band & (gen.random(obj.shape) < noise.flip_prob)
        obs_trf ^= flips

    out = np.full(obj.shape, CellState.BACKGROUND, dtype=np.uint8)
    out[obj] = CellState.ACTIONABLE
    out[obs_trf] = CellState.TRANSFORMED
    new_map = SpocMap(grid=out, frame_index=state.last_map.frame_index + 1)
    new_state = PerceptionState(
        last_map=new_map,
        frames_since_reclassify=state.frames_since_reclassify + 1,
        oracle=state.oracle,
        rng=gen,
        num_regions=state.num_regions,
    )
    return new_map, new_state


def observe(truth: WorldState, pstate: PerceptionState, noise: NoiseModel) -> tuple[SpocMap, PerceptionState]:
    """Produce this frame's observation, classifying or propagating per schedule.

    Frame 0 (no prior map) always classifies; afterwards a fresh
    classification replaces propagation every reclassify_period frames.
    """
    due = pstate.last_map is None or pstate.frames_since_reclassify + 1 >= noise.reclassify_period
    if not due:
        return propagate_mask(pstate, truth, noise)
    obj = truth.object_mask
    k = pstate.num_regions or default_region_count(int(np.count_nonzero(obj)))
    partition = partition_regions(obj, k)
    new_map = classify_regions(partition, truth, pstate.oracle)
    new_state = PerceptionState(
        last_map=new_map,
        frames_since_reclassify=0,
        oracle=pstate.oracle,
        rng=pstate.rng,
        num_regions=pstate.num_regions,
    )
    return new_map, new_state


def pooled_fraction(mask: np.ndarray, pool: int) -> np.ndarray:
    """Average-pool a boolean mask down to (pool, pool) block fractions.

    Dimensions that do not divide evenly are padded with False on the
    bottom/right edges before pooling.
    """
    h, w = mask.shape
    bh = -(-h // pool)
    bw = -(-w // pool)
    padded = np.zeros((bh * pool, bw * pool), dtype=bool)
    padded[:h, :w] = mask
    return padded.reshape(pool, bh, pool, bw).mean(axis=(1, 3))
