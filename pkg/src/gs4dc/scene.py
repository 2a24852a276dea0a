"""Uncompressed scene data model: canonical Gaussians + Hexplane pyramid.

A Scene is the codec's input: one static set of 3D Gaussians covering the
whole dynamic sequence, a coarse-to-fine pyramid of six feature planes per
level (three space-time, three space-space), and a small MLP decoder that
turns interpolated plane features into per-Gaussian deformation deltas.

Plane conventions used throughout the codec, recorded in file metadata:

* planes 0, 1, 2 are spatiotemporal, pairing spatial axis (x, y, z) with
  time; grids are (C, T, R) with time on the first grid axis;
* planes 3, 4, 5 are purely spatial for (x,y), (x,z), (y,z); grids are
  (C, A, B);
* per-level features are fused by elementwise product over the six planes,
  then concatenated across levels (coarse first);
* query coordinates are normalized to [0,1] by the scene bounds and
  sampled with align-corners bilinear interpolation, out-of-range
  coordinates clamp to the border.

Scene values are immutable in spirit: nothing here mutates them after
construction, so they are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .numkit import MlpSpec, mlp_forward

ST_PLANES = (0, 1, 2)
SPATIAL_PLANES = (3, 4, 5)
SPATIAL_PAIRS = {3: (0, 1), 4: (0, 2), 5: (1, 2)}
HEAD_ORDER = ("positions", "scales", "rotations", "opacities", "sh")
FUSION_RULE = "product-concat"
ROTATION_NORM_TOL = 1e-5


def plane_kind(plane_id: int) -> str:
    return "st" if plane_id in ST_PLANES else "spatial"


@dataclass
class CanonicalGaussians:
    positions: np.ndarray  # (N, 3) world units
    scales: np.ndarray  # (N, 3) log-scale
    rotations: np.ndarray  # (N, 4) unit quaternions
    opacities: np.ndarray  # (N, 1) pre-activation logits
    sh_coeffs: np.ndarray  # (N, D), D = 3*(deg+1)^2

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def sh_dim(self) -> int:
        return self.sh_coeffs.shape[1]


@dataclass
class HexplanePyramid:
    planes: list  # planes[level][plane_id] -> float32 grid

    @property
    def levels(self) -> int:
        return len(self.planes)

    @property
    def channels(self) -> int:
        return self.planes[0][0].shape[0]

    @property
    def time_steps(self) -> int:
        return self.planes[0][0].shape[1]


@dataclass
class DeformationDecoder:
    trunk_spec: MlpSpec
    trunk_weights: list  # [(W, b)] float32
    heads: dict  # name -> (W, b), input = trunk output width

    @property
    def feature_width(self) -> int:
        return self.trunk_spec.widths[0]


@dataclass
class SceneMeta:
    name: str = "scene"
    time_range: tuple = (0.0, 1.0)
    version: int = 1
    bounds_min: tuple = (-1.0, -1.0, -1.0)
    bounds_max: tuple = (1.0, 1.0, 1.0)
    fusion: str = FUSION_RULE


@dataclass
class Scene:
    gaussians: CanonicalGaussians
    voxels: HexplanePyramid
    decoder: DeformationDecoder
    meta: SceneMeta = field(default_factory=SceneMeta)

    @property
    def sh_degree(self) -> int:
        return int(np.sqrt(self.gaussians.sh_dim / 3.0)) - 1


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)  # (path, message)

    def add(self, path: str, message: str):
        self.violations.append((path, message))

    @property
    def valid(self) -> bool:
        return not self.violations

    def __str__(self):
        if self.valid:
            return "scene valid"
        return "\n".join(f"{path}: {msg}" for path, msg in self.violations)


def validate_scene(scene: Scene) -> ValidationReport:
    """Check every structural invariant; violations are data, not failures."""
    rep = ValidationReport()
    g = scene.gaussians
    n = g.count

    for name in ("positions", "scales", "rotations", "opacities", "sh_coeffs"):
        arr = getattr(g, name)
        if arr.shape[0] != n:
            rep.add(f"gaussians.{name}", f"row count {arr.shape[0]} != {n}")
        if not np.all(np.isfinite(arr)):
            rep.add(f"gaussians.{name}", "contains non-finite values")
    widths = {"positions": 3, "scales": 3, "rotations": 4, "opacities": 1}
    for name, width in widths.items():
        arr = getattr(g, name)
        if arr.ndim != 2 or arr.shape[1] != width:
            rep.add(f"gaussians.{name}", f"expected (N, {width}), got {arr.shape}")
    if g.rotations.shape == (n, 4) and np.all(np.isfinite(g.rotations)):
        norms = np.linalg.norm(g.rotations.astype(np.float64), axis=1)
        bad = np.flatnonzero(np.abs(norms - 1.0) > ROTATION_NORM_TOL)
        for row in bad[:8]:
            rep.add(f"gaussians.rotations[{row}]", f"norm {norms[row]:.6g} != 1")
        if bad.size > 8:
            rep.add("gaussians.rotations", f"{bad.size} rows off unit norm")
    deg_f = np.sqrt(g.sh_dim / 3.0) - 1 if g.sh_dim % 3 == 0 else -1.0
    if deg_f < 0 or deg_f != int(deg_f):
        rep.add("gaussians.sh_coeffs", f"width {g.sh_dim} is not 3*(deg+1)^2")

    v = scene.voxels
    if v.levels < 1:
        rep.add("voxels", "pyramid needs at least one level")
    c = None
    t_steps = None
    for s, level in enumerate(v.planes):
        if len(level) != 6:
            rep.add(f"voxels.level{s}", f"expected 6 planes, got {len(level)}")
            continue
        for p, grid in enumerate(level):
            if grid.ndim != 3:
                rep.add(f"voxels.level{s}.plane{p}", f"grid must be 3D, got {grid.ndim}D")
                continue
            if c is None:
                c = grid.shape[0]
            if grid.shape[0] != c:
                rep.add(
                    f"voxels.level{s}.plane{p}",
                    f"channel width {grid.shape[0]} != {c}",
                )
            if not np.all(np.isfinite(grid)):
                rep.add(f"voxels.level{s}.plane{p}", "contains non-finite values")
            if p in ST_PLANES:
                if t_steps is None:
                    t_steps = grid.shape[1]
                if grid.shape[1] != t_steps:
                    rep.add(
                        f"voxels.level{s}.plane{p}",
                        f"time steps {grid.shape[1]} != {t_steps}",
                    )
    for s in range(1, v.levels):
        if len(v.planes[s]) != 6 or len(v.planes[s - 1]) != 6:
            continue
        for p in range(6):
            fine, coarse = v.planes[s][p], v.planes[s - 1][p]
            if fine.ndim != 3 or coarse.ndim != 3:
                continue
            axes = (2,) if p in ST_PLANES else (1, 2)
            for ax in axes:
                if fine.shape[ax] <= coarse.shape[ax]:
                    rep.add(
                        f"voxels.level{s}.plane{p}",
                        f"axis {ax} resolution {fine.shape[ax]} does not exceed "
                        f"coarser {coarse.shape[ax]}",
                    )
                elif fine.shape[ax] % coarse.shape[ax] != 0:
                    rep.add(
                        f"voxels.level{s}.plane{p}",
                        f"axis {ax} resolution {fine.shape[ax]} is not an integer "
                        f"multiple of {coarse.shape[ax]}",
                    )

    d = scene.decoder
    if c is not None and d.trunk_spec.widths[0] != v.levels * c:
        rep.add(
            "decoder.trunk",
            f"input width {d.trunk_spec.widths[0]} != levels*channels {v.levels * c}",
        )
    if len(d.trunk_weights) != d.trunk_spec.n_layers:
        rep.add("decoder.trunk", "weight count does not match trunk spec")
    else:
        for i, ((W, b), w_in, w_out) in enumerate(
            zip(d.trunk_weights, d.trunk_spec.widths[:-1], d.trunk_spec.widths[1:])
        ):
            if W.shape != (w_out, w_in) or b.shape != (w_out,):
                rep.add(f"decoder.trunk[{i}]", f"layer shape {W.shape} breaks chain")
    head_widths = {
        "positions": 3,
        "scales": 3,
        "rotations": 4,
        "opacities": 1,
        "sh": g.sh_dim,
    }
    hidden = d.trunk_spec.widths[-1]
    for name in HEAD_ORDER:
        if name not in d.heads:
            rep.add(f"decoder.heads.{name}", "missing head")
            continue
        W, b = d.heads[name]
        if W.shape != (head_widths[name], hidden) or b.shape != (head_widths[name],):
            rep.add(
                f"decoder.heads.{name}",
                f"expected ({head_widths[name]}, {hidden}), got {W.shape}",
            )

    if tuple(scene.meta.time_range) != (0.0, 1.0):
        rep.add("meta.time_range", f"expected (0, 1), got {scene.meta.time_range}")
    if scene.meta.fusion != FUSION_RULE:
        rep.add("meta.fusion", f"unknown fusion rule {scene.meta.fusion!r}")
    return rep


# ---------------------------------------------------------------------------
# voxel queries and deformation
# ---------------------------------------------------------------------------


def _sample_plane(grid: np.ndarray, u0: np.ndarray, u1: np.ndarray) -> np.ndarray:
    """Align-corners bilinear sample of (C, R0, R1) at normalized (u0, u1).

    u0/u1 are (N,) in [0, 1]; values outside clamp to the border. Returns
    (C, N) float64.
    """
    g = grid.astype(np.float64, copy=False)
    _, r0, r1 = g.shape
    x0 = np.clip(u0, 0.0, 1.0) * (r0 - 1)
    x1 = np.clip(u1, 0.0, 1.0) * (r1 - 1)
    i0 = np.clip(np.floor(x0).astype(np.int64), 0, max(r0 - 2, 0))
    i1 = np.clip(np.floor(x1).astype(np.int64), 0, max(r1 - 2, 0))
    f0 = x0 - i0
    f1 = x1 - i1
    j0 = np.minimum(i0 + 1, r0 - 1)
    j1 = np.minimum(i1 + 1, r1 - 1)
    v00 = g[:, i0, i1]
    v01 = g[:, i0, j1]
    v10 = g[:, j0, i1]
    v11 = g[:, j0, j1]
    return (
        v00 * (1 - f0) * (1 - f1)
        + v01 * (1 - f0) * f1
        + v10 * f0 * (1 - f1)
        + v11 * f0 * f1
    )


def query_voxels_batch(
    voxels: HexplanePyramid, positions: np.ndarray, t: float, meta: SceneMeta
) -> np.ndarray:
    """Fused pyramid features for (N, 3) world positions at time t.

    Output is (N, levels*channels): per level the six plane features are
    multiplied elementwise, levels are concatenated coarse-first.
    """
    pos = np.asarray(positions, dtype=np.float64)
    if pos.ndim != 2 or pos.shape[1] != 3:
        raise ShapeError(f"positions must be (N, 3), got {pos.shape}")
    lo = np.asarray(meta.bounds_min, dtype=np.float64)
    hi = np.asarray(meta.bounds_max, dtype=np.float64)
    span = np.where(hi > lo, hi - lo, 1.0)
    u = np.clip((pos - lo) / span, 0.0, 1.0)
    tt = np.full(pos.shape[0], float(np.clip(t, 0.0, 1.0)))

    pieces = []
    for level in voxels.planes:
        fused = None
        for p, grid in enumerate(level):
            if p in ST_PLANES:
                feat = _sample_plane(grid, tt, u[:, p])
            else:
                a, b = SPATIAL_PAIRS[p]
                feat = _sample_plane(grid, u[:, a], u[:, b])
            fused = feat if fused is None else fused * feat
        pieces.append(fused)
    return np.concatenate(pieces, axis=0).T


def query_voxels(
    voxels: HexplanePyramid, position, t: float, meta: SceneMeta | None = None
) -> np.ndarray:
    """Single-point version of query_voxels_batch."""
    meta = meta or SceneMeta()
    return query_voxels_batch(voxels, np.asarray(position)[None, :], t, meta)[0]


def apply_deformation(scene: Scene, t: float) -> CanonicalGaussians:
    """Deform the canonical Gaussians to time t via the decoder heads.

    Each head adds its delta to the stored (pre-activation) attribute;
    rotations are re-normalized after the additive update.
    """
    g = scene.gaussians
    feats = query_voxels_batch(scene.voxels, g.positions, t, scene.meta)
    d = scene.decoder
    trunk_weights = [
        (W.astype(np.float64), b.astype(np.float64)) for W, b in d.trunk_weights
    ]
    h = mlp_forward(d.trunk_spec, trunk_weights, feats)

    def head_delta(name):
        W, b = d.heads[name]
        return h @ W.astype(np.float64).T + b.astype(np.float64)

    rot = g.rotations.astype(np.float64) + head_delta("rotations")
    norms = np.linalg.norm(rot, axis=1, keepdims=True)
    rot = rot / np.maximum(norms, 1e-12)
    return CanonicalGaussians(
        positions=g.positions.astype(np.float64) + head_delta("positions"),
        scales=g.scales.astype(np.float64) + head_delta("scales"),
        rotations=rot,
        opacities=g.opacities.astype(np.float64) + head_delta("opacities"),
        sh_coeffs=g.sh_coeffs.astype(np.float64) + head_delta("sh"),
    )
