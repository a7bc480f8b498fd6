"""Dyadic shells, greedy epsilon-nets anchored at the origin, and retractions."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .normed_spaces import InstanceError, PointCloud, lp_norm, pairwise_distances


class OutOfShellError(ValueError):
    pass


def floor_log2(r: float) -> int:
    """Exact floor(log2 r) for r > 0, so that powers of two land on their own shell."""
    if not r > 0:
        raise ValueError(f"floor_log2 needs a positive argument, got {r}")
    _, e = math.frexp(r)
    return e - 1


def shell_radius(k: int) -> float:
    return math.ldexp(1.0, k + 1)


@dataclass(frozen=True)
class ShellSystem:
    """Shells ``B_k = {x in M : ||x|| <= 2**(k+1)}`` for k in [k_min, k_max + 1].

    ``shells[k]`` lists point indices sorted by norm, then lexicographically.
    """

    k_min: int
    k_max: int
    shells: dict[int, tuple[int, ...]]

    @property
    def ks(self) -> list[int]:
        return sorted(self.shells)


def canonical_order(points: np.ndarray, norms: np.ndarray) -> np.ndarray:
    keys = [points[:, j] for j in range(points.shape[1] - 1, -1, -1)] + [norms]
    return np.lexsort(keys)


def build_shells(M: PointCloud) -> ShellSystem:
    norms = M.norms()
    nonzero = norms[norms > 0]
    if nonzero.size == 0:
        raise InstanceError("degenerate instance: every point is the origin")
    k_min = floor_log2(float(nonzero.min()))
    k_max = floor_log2(float(nonzero.max()))
    order = canonical_order(M.points, norms)
    shells = {}
    for k in range(k_min, k_max + 2):
        r = shell_radius(k)
        shells[k] = tuple(int(i) for i in order if norms[i] <= r)
    return ShellSystem(k_min, k_max, shells)


def greedy_net(points: np.ndarray, eps: float, p: float, seed_origin=None) -> list[int]:
    """Greedy eps-net of ``points`` seeded with the origin.

    Returns indices into ``points`` of the admitted points, in admission
    order; the origin seed itself is implicit (net row 0). A point is
    admitted iff it is more than ``eps`` away from everything admitted so far.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    pts = np.asarray(points, dtype=float)
    d = pts.shape[1] if pts.ndim == 2 else 1
    origin = np.zeros(d) if seed_origin is None else np.asarray(seed_origin, dtype=float)
    admitted_rows = [origin]
    admitted: list[int] = []
    for i, x in enumerate(pts):
        dists = pairwise_to(np.array(admitted_rows), x, p)
        if dists.min() > eps:
            admitted.append(i)
            admitted_rows.append(x)
    return admitted


def pairwise_to(rows: np.ndarray, x: np.ndarray, p: float) -> np.ndarray:
    diff = np.abs(rows - x)
    if math.isinf(p):
        return diff.max(axis=1)
    if p == 1:
        return diff.sum(axis=1)
    if p == 2:
        return np.sqrt(np.sum(diff * diff, axis=1))
    return np.sum(diff**p, axis=1) ** (1.0 / p)


@dataclass(frozen=True)
class Net:
    """One net G_{k,n}: ``members[j]`` is the cloud index of net row j + 1.

    Row 0 of ``points`` is always the origin.
    """

    eps: float
    members: tuple[int, ...]
    points: np.ndarray

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class NetTable:
    nets: dict[tuple[int, int], Net]
    retraction: dict[tuple[int, int], dict[int, int]]

    @property
    def eps(self) -> dict[tuple[int, int], float]:
        return {key: net.eps for key, net in self.nets.items()}


def make_net(M: PointCloud, shell: tuple[int, ...], eps: float) -> Net:
    pts = M.points[list(shell)] if shell else np.zeros((0, M.ambient.dim))
    chosen = greedy_net(pts, eps, M.p)
    members = tuple(shell[i] for i in chosen)
    rows = np.vstack([np.zeros((1, M.ambient.dim)), M.points[list(members)]]) if members else np.zeros((1, M.ambient.dim))
    rows.setflags(write=False)
    return Net(float(eps), members, rows)


def nearest(net: Net, x: np.ndarray, p: float) -> int:
    """Index of the nearest net row; ``argmin`` breaks ties toward the origin."""
    return int(np.argmin(pairwise_to(net.points, np.asarray(x, dtype=float), p)))


def build_net_table(M: PointCloud, shells: ShellSystem, eps: dict[tuple[int, int], float]) -> NetTable:
    nets: dict[tuple[int, int], Net] = {}
    retraction: dict[tuple[int, int], dict[int, int]] = {}
    cache: dict[tuple[int, float], Net] = {}
    for (k, n), e in sorted(eps.items()):
        key = (k, e)
        if key not in cache:
            cache[key] = make_net(M, shells.shells[k], e)
        net = cache[key]
        nets[(k, n)] = net
        retraction[(k, n)] = {i: nearest(net, M.points[i], M.p) for i in shells.shells[k]}
    return NetTable(nets, retraction)


def retract(table: NetTable, k: int, n: int, x, p: float) -> np.ndarray:
    """Nearest net point of G_{k,n} to ``x``; ``x`` must lie in the shell ball."""
    x = np.asarray(x, dtype=float)
    if lp_norm(x, p) > shell_radius(k):
        raise OutOfShellError(f"point of norm {lp_norm(x, p):g} is outside shell {k} (radius {shell_radius(k):g})")
    net = table.nets[(k, n)]
    return net.points[nearest(net, x, p)]


def net_quality(points: np.ndarray, net: Net, p: float) -> tuple[float, float]:
    """Brute-force (covering radius, minimum separation among non-origin net points)."""
    if len(points) == 0:
        cover = 0.0
    else:
        d = np.abs(np.asarray(points, float)[:, None, :] - net.points[None, :, :])
        if math.isinf(p):
            dist = d.max(axis=2)
        elif p == 1:
            dist = d.sum(axis=2)
        else:
            dist = np.sum(d**p, axis=2) ** (1.0 / p)
        cover = float(dist.min(axis=1).max())
    inner = net.points[1:]
    if len(inner) < 2:
        sep = math.inf
    else:
        dd = pairwise_distances(inner, p)
        sep = float(dd[np.triu_indices(len(inner), 1)].min())
    return cover, sep
