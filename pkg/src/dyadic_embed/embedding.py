"""Assemble the dyadic embedding f from nets, retractions and block maps.

For a point x with 2**k <= ||x|| < 2**(k+1):

    f(x)   = lam_x * f_k(x) + (1 - lam_x) * f_{k+1}(x),  lam_x = (2**(k+1) - ||x||) / 2**k
    f_k(x) = sum_{n=1}^{n_max} 2**-n * R_{k,n}(retract_{k,n}(x))

Each R_{k,n} writes into its own block (k, n), so the images of shells never
overlap within a level.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .modulus import CompressionTarget, GaugePair, default_grid, majorant_mu
from .nets import (
    Net,
    NetTable,
    OutOfShellError,
    ShellSystem,
    build_net_table,
    build_shells,
    floor_log2,
    nearest,
    shell_radius,
)
from .normed_spaces import BlockSpec, BlockVector, InstanceError, PointCloud, lp_norm
from .representability import FcrOracle, LinearMap, OracleError, check_map, parse_oracle

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BuildConfig:
    eta: float = 4.0
    gamma: float = 0.0
    n_max: int = 24
    tail_tol: float | None = None
    phi: CompressionTarget = field(default_factory=lambda: CompressionTarget("rational"))
    oracle: str = "identity"
    seed: int = 0

    def __post_init__(self):
        if not self.eta > 2:
            raise ValueError(f"eta must exceed 2, got {self.eta}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be a positive integer, got {self.n_max}")

    def to_json(self) -> dict:
        d = asdict(self)
        d["phi"] = self.phi.to_json()
        return d

    @classmethod
    def from_json(cls, obj: dict) -> "BuildConfig":
        obj = dict(obj)
        obj["phi"] = CompressionTarget.from_json(obj["phi"])
        obj.pop("C", None)
        return cls(**obj)


def epsilon_schedule(k: int, n: int, gauge: GaugePair | float, eta: float) -> float:
    """``min(2**-k, 2**k) * min(sigma(-n) / eta, 1)``.

    ``gauge`` may be a GaugePair or a precomputed value of sigma(-n).
    """
    if not eta > 2 or n < 1:
        raise ValueError("need eta > 2 and n >= 1")
    s = gauge if isinstance(gauge, (int, float)) else gauge.sigma(-n)
    return math.ldexp(1.0, -abs(k)) * min(s / eta, 1.0)


@dataclass(frozen=True, eq=False)
class EmbeddingArtifact:
    cloud: PointCloud
    config: BuildConfig
    C: float
    shells: ShellSystem
    gauge: GaugePair
    sigma: dict[int, float]
    nets: NetTable
    maps: dict[tuple[int, int], LinearMap]
    spec: BlockSpec

    @property
    def p(self) -> float:
        return self.cloud.p

    @property
    def eps(self) -> dict[tuple[int, int], float]:
        return self.nets.eps

    @property
    def r(self) -> float:
        eta, gamma = self.config.eta, self.config.gamma
        return (eta - 2) / (16 * eta * self.C * (1 + gamma))

    @property
    def tail_tol(self) -> float:
        if self.config.tail_tol is not None:
            return self.config.tail_tol
        scale = float(self.cloud.norms().max())
        return math.ldexp(scale + 2.0, -self.config.n_max)

    def to_json(self) -> dict:
        nets = []
        for (k, n), net in sorted(self.nets.nets.items()):
            nets.append({
                "k": k,
                "n": n,
                "eps": net.eps,
                "members": list(net.members),
                "retraction": [[i, j] for i, j in sorted(self.nets.retraction[(k, n)].items())],
            })
        maps = [{"k": k, "n": n, **m.to_json()} for (k, n), m in sorted(self.maps.items())]
        return {
            "config": {**self.config.to_json(), "C": self.C},
            "instance": self.cloud.to_json(),
            "gauge": self.gauge.to_json(),
            "sigma": [[n, s] for n, s in sorted(self.sigma.items())],
            "shells": {
                "k_min": self.shells.k_min,
                "k_max": self.shells.k_max,
                "members": [[k, list(v)] for k, v in sorted(self.shells.shells.items())],
            },
            "nets": nets,
            "maps": maps,
            "block_spec": self.spec.to_json(),
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def from_json(cls, obj: dict) -> "EmbeddingArtifact":
        cloud = PointCloud.from_json(obj["instance"])
        config = BuildConfig.from_json(obj["config"])
        sh = obj["shells"]
        shells = ShellSystem(sh["k_min"], sh["k_max"], {int(k): tuple(v) for k, v in sh["members"]})
        nets, retraction, cache = {}, {}, {}
        for row in obj["nets"]:
            key = (row["eps"], tuple(row["members"]))
            if key not in cache:
                members = tuple(row["members"])
                pts = np.vstack([np.zeros((1, cloud.ambient.dim)), cloud.points[list(members)]])
                pts.setflags(write=False)
                cache[key] = Net(float(row["eps"]), members, pts)
            nets[(row["k"], row["n"])] = cache[key]
            retraction[(row["k"], row["n"])] = {int(i): int(j) for i, j in row["retraction"]}
        maps = {(m["k"], m["n"]): LinearMap.from_json(m) for m in obj["maps"]}
        return cls(
            cloud=cloud,
            config=config,
            C=float(obj["config"]["C"]),
            shells=shells,
            gauge=GaugePair.from_json(obj["gauge"]),
            sigma={int(n): float(s) for n, s in obj["sigma"]},
            nets=NetTable(nets, retraction),
            maps=maps,
            spec=BlockSpec.from_json(obj["block_spec"]),
        )

    @classmethod
    def load(cls, path) -> "EmbeddingArtifact":
        return cls.from_json(json.loads(Path(path).read_text()))

    # evaluation ---------------------------------------------------------

    def _point(self, x) -> tuple[np.ndarray, int | None]:
        if isinstance(x, (int, np.integer)):
            return self.cloud.points[int(x)], int(x)
        return np.asarray(x, dtype=float), None

    def _retract_index(self, k: int, n: int, x: np.ndarray, idx: int | None) -> int:
        table = self.nets.retraction[(k, n)]
        if idx is not None and idx in table:
            return table[idx]
        return nearest(self.nets.nets[(k, n)], x, self.p)

    def _check_shell(self, k: int, x: np.ndarray) -> None:
        if k not in self.shells.shells:
            raise OutOfShellError(f"shell {k} is not part of this artifact")
        if lp_norm(x, self.p) > shell_radius(k):
            raise OutOfShellError(
                f"point of norm {lp_norm(x, self.p):g} is outside shell {k} (radius {shell_radius(k):g})"
            )

    def retraction(self, k: int, n: int, x) -> np.ndarray:
        pt, idx = self._point(x)
        self._check_shell(k, pt)
        return self.nets.nets[(k, n)].points[self._retract_index(k, n, pt, idx)]

    def _add_level(self, out: np.ndarray, k: int, n: int, pt, idx, weight: float) -> None:
        R = self.maps.get((k, n))
        if R is None:
            return
        g = self.nets.nets[(k, n)].points[self._retract_index(k, n, pt, idx)]
        out[self.spec.slice(k, n)] += weight * R(g)

    def level_map(self, k: int, n: int, x) -> BlockVector:
        pt, idx = self._point(x)
        self._check_shell(k, pt)
        out = np.zeros(self.spec.total_dim)
        self._add_level(out, k, n, pt, idx, 1.0)
        return BlockVector(out, self.spec)

    def _shell_into(self, out: np.ndarray, k: int, pt, idx, weight: float, n_max: int) -> None:
        for n in range(1, n_max + 1):
            self._add_level(out, k, n, pt, idx, weight * math.ldexp(1.0, -n))

    def shell_map(self, k: int, x, n_max: int | None = None) -> BlockVector:
        pt, idx = self._point(x)
        self._check_shell(k, pt)
        out = np.zeros(self.spec.total_dim)
        self._shell_into(out, k, pt, idx, 1.0, min(n_max or self.config.n_max, self.config.n_max))
        return BlockVector(out, self.spec)

    def weights(self, x, shell: int | None = None) -> tuple[int, float] | None:
        """(k, lam_x) for the gluing, or None at the origin.

        ``shell`` overrides the default k = floor(log2 ||x||); it must satisfy
        2**k <= ||x|| <= 2**(k+1).
        """
        pt, _ = self._point(x)
        r = lp_norm(pt, self.p)
        if r == 0:
            return None
        k = floor_log2(r) if shell is None else shell
        if not math.ldexp(1.0, k) <= r <= shell_radius(k):
            raise OutOfShellError(f"norm {r:g} is not in [2^{k}, 2^{k + 1}]")
        return k, (shell_radius(k) - r) / math.ldexp(1.0, k)

    def glue(self, x, shell: int | None = None) -> BlockVector:
        pt, idx = self._point(x)
        out = np.zeros(self.spec.total_dim)
        w = self.weights(pt, shell)
        if w is not None:
            k, lam = w
            if lam > 0:
                self._check_shell(k, pt)
                self._shell_into(out, k, pt, idx, lam, self.config.n_max)
            if lam < 1:
                self._check_shell(k + 1, pt)
                self._shell_into(out, k + 1, pt, idx, 1.0 - lam, self.config.n_max)
        return BlockVector(out, self.spec)

    __call__ = glue

    def images(self, threads: int = 1) -> np.ndarray:
        """f evaluated at every cloud point, one row per point."""
        m = len(self.cloud)
        if threads > 1 and m > 1:
            with ThreadPoolExecutor(threads) as pool:
                rows = list(pool.map(lambda i: self.glue(i).coords, range(m)))
        else:
            rows = [self.glue(i).coords for i in range(m)]
        return np.array(rows).reshape(m, self.spec.total_dim)


def glue(artifact: EmbeddingArtifact, x, shell: int | None = None) -> BlockVector:
    return artifact.glue(x, shell)


def level_map(artifact: EmbeddingArtifact, k: int, n: int, x) -> BlockVector:
    return artifact.level_map(k, n, x)


def shell_map(artifact: EmbeddingArtifact, k: int, x) -> BlockVector:
    return artifact.shell_map(k, x)


def gauge_for(M: PointCloud, phi: CompressionTarget) -> GaugePair:
    """Gauge whose grid spans the instance's distances and contains them all."""
    D = M.distance_matrix()
    dists = np.unique(D[np.triu_indices(len(M), 1)])
    dists = dists[dists > 0]
    if dists.size:
        grid = default_grid(float(dists.min()), float(dists.max()), extra=dists)
    else:
        grid = default_grid()
    return majorant_mu(phi, grid=grid)


def build(M: PointCloud, oracle: FcrOracle | str | None = None, config: BuildConfig | None = None) -> EmbeddingArtifact:
    config = config or BuildConfig()
    if oracle is None:
        oracle = config.oracle
    if isinstance(oracle, str):
        oracle = parse_oracle(oracle)
    if oracle.name != config.oracle:
        config = BuildConfig(**{**config.__dict__, "oracle": oracle.name})

    gauge = gauge_for(M, config.phi)
    sigma = {n: gauge.sigma(-n) for n in range(1, config.n_max + 1)}

    if not np.any(M.norms() > 0):
        # M = {0}: nothing to embed, f is identically zero
        shells = ShellSystem(0, -1, {})
        return EmbeddingArtifact(M, config, oracle.C, shells, gauge, sigma, NetTable({}, {}), {}, BlockSpec((), M.p))

    shells = build_shells(M)
    eps = {
        (k, n): epsilon_schedule(k, n, sigma[n], config.eta)
        for k in shells.ks
        for n in range(1, config.n_max + 1)
    }
    nets = build_net_table(M, shells, eps)

    maps: dict[tuple[int, int], LinearMap] = {}
    by_net: dict[int, LinearMap | None] = {}
    dims = []
    for n in range(1, config.n_max + 1):
        for k in shells.ks:
            net = nets.nets[(k, n)]
            if id(net) not in by_net:
                R = oracle(net.points, M.p, M.p)
                if R is not None:
                    chk = check_map(R, oracle.C, seed=config.seed)
                    if not chk.ok:
                        raise OracleError(
                            f"oracle {oracle.name} violated its budget at block ({k}, {n}): "
                            f"||R|| = {chk.norm.value:.6g}, ||R^-1|| = {chk.inverse_norm.value:.6g}, C = {oracle.C:g}"
                        )
                by_net[id(net)] = R
            R = by_net[id(net)]
            if R is not None:
                maps[(k, n)] = R
                dims.append((k, n, R.matrix.shape[0]))
    spec = BlockSpec.from_dims(dims, M.p)
    log.info("built %d blocks over shells %s, total dim %d", len(dims), shells.ks, spec.total_dim)
    return EmbeddingArtifact(M, config, oracle.C, shells, gauge, sigma, nets, maps, spec)
