"""Finite-dimensional l_p vectors and the block direct-sum target space.

The target is an l_q sum of coordinate blocks, one block per (shell, level)
pair. Blocks are laid out level-major, so the partial-sum projection onto
levels ``<= n`` is a plain coordinate restriction of norm one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class BlockNotFoundError(KeyError):
    pass


class InstanceError(ValueError):
    """Raised for malformed or degenerate point clouds."""


def parse_exponent(p) -> float:
    if isinstance(p, str):
        if p.strip().lower() in ("inf", "infinity", "oo"):
            return math.inf
        p = float(p)
    p = float(p)
    if not p >= 1:
        raise ValueError(f"norm exponent must be >= 1, got {p}")
    return p


def format_exponent(p: float):
    return "inf" if math.isinf(p) else p


def lp_norm(v, p: float) -> float:
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return 0.0
    a = np.abs(v)
    if math.isinf(p):
        return float(a.max())
    if p == 1:
        return float(a.sum())
    m = a.max()
    if m == 0:
        return 0.0
    # rescale to avoid under/overflow in a**p
    if p == 2:
        return float(m * np.linalg.norm(a / m))
    return float(m * np.sum((a / m) ** p) ** (1.0 / p))


def conjugate_exponent(p: float) -> float:
    if p == 1:
        return math.inf
    if math.isinf(p):
        return 1.0
    return p / (p - 1.0)


@dataclass(frozen=True)
class AmbientSpace:
    p: float
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "p", parse_exponent(self.p))
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))

    def norm(self, v) -> float:
        return lp_norm(v, self.p)

    def dist(self, x, y) -> float:
        return lp_norm(np.asarray(x, float) - np.asarray(y, float), self.p)


@dataclass(frozen=True, eq=False)
class PointCloud:
    """A finite sample of a proper subset of l_p^dim.

    ``points`` is an (m, dim) float array; rows must be pairwise distinct.
    """

    points: np.ndarray
    ambient: AmbientSpace

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim == 1 and self.ambient.dim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise InstanceError("point cloud must be a non-empty list of points")
        if pts.shape[1] != self.ambient.dim:
            raise InstanceError(
                f"points have dimension {pts.shape[1]}, ambient dim is {self.ambient.dim}"
            )
        if not np.all(np.isfinite(pts)):
            raise InstanceError("point coordinates must be finite")
        _, first = np.unique(pts, axis=0, return_index=True)
        if len(first) != len(pts):
            dup = sorted(set(range(len(pts))) - set(first.tolist()))
            raise InstanceError(f"duplicate points at indices {dup}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> float:
        return self.ambient.p

    @property
    def contains_origin(self) -> bool:
        return bool(np.any(np.all(self.points == 0.0, axis=1)))

    def norms(self) -> np.ndarray:
        return np.array([self.ambient.norm(x) for x in self.points])

    def distance_matrix(self) -> np.ndarray:
        return pairwise_distances(self.points, self.p)

    def to_json(self) -> dict:
        return {
            "p": format_exponent(self.p),
            "dim": self.ambient.dim,
            "points": self.points.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PointCloud":
        try:
            ambient = AmbientSpace(obj["p"], obj["dim"])
            points = obj["points"]
        except (KeyError, TypeError) as exc:
            raise InstanceError(f"bad point-cloud JSON: missing or invalid field {exc}") from exc
        except ValueError as exc:
            raise InstanceError(f"bad point-cloud JSON: {exc}") from exc
        if not isinstance(points, list) or not points:
            raise InstanceError("bad point-cloud JSON: 'points' must be a non-empty list")
        try:
            arr = np.array(points, dtype=float)
        except (TypeError, ValueError) as exc:
            raise InstanceError(f"bad point-cloud JSON: ragged or non-numeric points ({exc})") from exc
        return cls(arr, ambient)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path) -> "PointCloud":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InstanceError(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_json(obj)


def pairwise_distances(points: np.ndarray, p: float) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    diff = np.abs(pts[:, None, :] - pts[None, :, :])
    if math.isinf(p):
        return diff.max(axis=2)
    if p == 1:
        return diff.sum(axis=2)
    if p == 2:
        return np.sqrt(np.sum(diff * diff, axis=2))
    return np.sum(diff**p, axis=2) ** (1.0 / p)


@dataclass(frozen=True)
class Block:
    shell: int
    level: int
    dim: int
    offset: int


@dataclass(frozen=True, eq=False)
class BlockSpec:
    """Layout of the target l_q sum: an ordered tuple of coordinate blocks."""

    blocks: tuple[Block, ...]
    q: float
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "q", parse_exponent(self.q))
        blocks = tuple(self.blocks)
        object.__setattr__(self, "blocks", blocks)
        expected = 0
        index = {}
        for b in blocks:
            if b.level < 1 or b.dim < 1:
                raise ValueError(f"invalid block {b}")
            if b.offset != expected:
                raise ValueError(f"block {b} is not consecutive (expected offset {expected})")
            if (b.shell, b.level) in index:
                raise ValueError(f"duplicate block ({b.shell}, {b.level})")
            index[(b.shell, b.level)] = b
            expected += b.dim
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_dims(cls, dims: Iterable[tuple[int, int, int]], q: float) -> "BlockSpec":
        """Lay out blocks given ``(shell, level, dim)`` triples in order."""
        blocks, offset = [], 0
        for k, n, d in dims:
            blocks.append(Block(int(k), int(n), int(d), offset))
            offset += int(d)
        return cls(tuple(blocks), q)

    @property
    def total_dim(self) -> int:
        if not self.blocks:
            return 0
        last = self.blocks[-1]
        return last.offset + last.dim

    @property
    def max_level(self) -> int:
        return max((b.level for b in self.blocks), default=0)

    def block(self, k: int, n: int) -> Block:
        try:
            return self._index[(k, n)]
        except KeyError:
            raise BlockNotFoundError(f"no block ({k}, {n}) in layout") from None

    def has_block(self, k: int, n: int) -> bool:
        return (k, n) in self._index

    def slice(self, k: int, n: int) -> slice:
        b = self.block(k, n)
        return slice(b.offset, b.offset + b.dim)

    def zeros(self) -> "BlockVector":
        return BlockVector(np.zeros(self.total_dim), self)

    def to_json(self) -> dict:
        return {
            "q": format_exponent(self.q),
            "blocks": [[b.shell, b.level, b.dim, b.offset] for b in self.blocks],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "BlockSpec":
        return cls(tuple(Block(*map(int, row)) for row in obj["blocks"]), obj["q"])


@dataclass(frozen=True, eq=False)
class BlockVector:
    coords: np.ndarray
    spec: BlockSpec

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        if c.shape != (self.spec.total_dim,):
            raise ValueError(
                f"coordinate length {c.shape} does not match layout dimension {self.spec.total_dim}"
            )
        object.__setattr__(self, "coords", c)

    def __add__(self, other: "BlockVector") -> "BlockVector":
        return BlockVector(self.coords + other.coords, self.spec)

    def __sub__(self, other: "BlockVector") -> "BlockVector":
        return BlockVector(self.coords - other.coords, self.spec)

    def __mul__(self, c: float) -> "BlockVector":
        return BlockVector(c * self.coords, self.spec)

    __rmul__ = __mul__


def norm(v, p: float | None = None) -> float:
    """Norm of a BlockVector (its layout's exponent) or of a plain vector in l_p."""
    if isinstance(v, BlockVector):
        return lp_norm(v.coords, v.spec.q if p is None else p)
    if p is None:
        raise TypeError("exponent p is required for plain vectors")
    return lp_norm(v, p)


def block_project(v: BlockVector, n: int) -> BlockVector:
    """Zero every block whose level exceeds ``n``."""
    out = np.zeros_like(v.coords)
    for b in v.spec.blocks:
        if b.level <= n:
            out[b.offset : b.offset + b.dim] = v.coords[b.offset : b.offset + b.dim]
    return BlockVector(out, v.spec)


def block_extract(v: BlockVector, k: int, n: int) -> np.ndarray:
    return v.coords[v.spec.slice(k, n)].copy()


def block_embed(spec: BlockSpec, k: int, n: int, values: Sequence[float]) -> BlockVector:
    out = np.zeros(spec.total_dim)
    out[spec.slice(k, n)] = values
    return BlockVector(out, spec)


def projection_norm_bound(spec: BlockSpec, n: int) -> float:
    """Operator norm of ``block_project(., n)`` on the l_q block sum.

    A nonzero coordinate restriction has norm exactly one in any l_q sum.
    """
    return 1.0 if any(b.level <= n for b in spec.blocks) else 0.0
