"""Compression targets phi and their gauge pair (mu, sigma).

``mu`` is a continuous, non-decreasing majorant gauge with ``phi <= 2**mu``
and range (-inf, 0); ``sigma`` is its generalized inverse
``sigma(y) = inf{t > 0 : mu(t) >= y}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

DEFAULT_GRID_SIZE = 2048


class PhiError(ValueError):
    pass


def _rational(t):
    t = np.asarray(t, dtype=float)
    return t / (2.0 * (1.0 + t))


def _sqrt_log(t):
    # 1 / (2 sqrt(log2(4 + 1/t))): decays to 0 like 1/sqrt(log(1/t)) and
    # stays below 1/(2 sqrt 2) for large t.
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    with np.errstate(divide="ignore"):
        out[pos] = 0.5 / np.sqrt(np.log2(4.0 + 1.0 / t[pos]))
    return out


BUILTINS: dict[str, Callable] = {"rational": _rational, "sqrt-log": _sqrt_log}


@dataclass(frozen=True, eq=False)
class CompressionTarget:
    """A candidate phi, either a named built-in or a piecewise-linear table.

    Tables are interpolated linearly, anchored at (0, 0) when the first node
    is positive, and held constant after the last node.
    """

    name: str
    table: tuple[tuple[float, float], ...] | None = None
    _t: np.ndarray | None = field(default=None, init=False, repr=False)
    _v: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.table is None:
            if self.name not in BUILTINS:
                raise PhiError(f"unknown phi {self.name!r}; expected one of {sorted(BUILTINS)} or a table")
            return
        rows = [(float(a), float(b)) for a, b in self.table]
        if not rows:
            raise PhiError("tabulated phi needs at least one (t, phi(t)) pair")
        rows.sort(key=lambda r: r[0])
        t = np.array([r[0] for r in rows])
        v = np.array([r[1] for r in rows])
        if np.any(t < 0) or not np.all(np.isfinite(t)) or not np.all(np.isfinite(v)):
            raise PhiError("tabulated phi needs finite nodes with t >= 0")
        if np.any(np.diff(t) == 0):
            raise PhiError("tabulated phi has repeated t nodes (a jump discontinuity)")
        if t[0] > 0:
            t = np.concatenate([[0.0], t])
            v = np.concatenate([[0.0], v])
        object.__setattr__(self, "table", tuple(rows))
        object.__setattr__(self, "_t", t)
        object.__setattr__(self, "_v", v)

    @classmethod
    def tabulated(cls, pairs: Sequence[Sequence[float]], name: str = "tabulated") -> "CompressionTarget":
        return cls(name, tuple((float(a), float(b)) for a, b in pairs))

    @classmethod
    def parse(cls, spec: str) -> "CompressionTarget":
        """``rational``, ``sqrt-log`` or ``tabulated:<path to JSON pairs>``."""
        if spec.startswith("tabulated:"):
            path = spec.split(":", 1)[1]
            try:
                pairs = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise PhiError(f"cannot read tabulated phi from {path}: {exc}") from exc
            return cls.tabulated(pairs)
        return cls(spec)

    @property
    def breakpoints(self) -> np.ndarray:
        if self._t is None:
            return np.empty(0)
        return self._t[self._t > 0]

    def __call__(self, t):
        if self._t is None:
            return BUILTINS[self.name](t)
        return np.interp(np.asarray(t, dtype=float), self._t, self._v)

    def to_json(self) -> dict:
        if self.table is None:
            return {"name": self.name}
        return {"name": self.name, "table": [list(r) for r in self.table]}

    @classmethod
    def from_json(cls, obj: dict) -> "CompressionTarget":
        if obj.get("table") is not None:
            return cls(obj.get("name", "tabulated"), tuple(tuple(r) for r in obj["table"]))
        return cls(obj["name"])


@dataclass
class PhiReport:
    ok: bool
    violations: list[tuple[float, str]]


def default_grid(t_min: float = 1.0, t_max: float = 1.0, size: int = DEFAULT_GRID_SIZE, extra=()) -> np.ndarray:
    """Log-spaced nodes on [1e-6 t_min, 1e3 t_max] merged with ``extra``."""
    nodes = np.geomspace(1e-6 * t_min, 1e3 * t_max, size)
    extra = np.asarray(list(extra), dtype=float)
    if extra.size:
        nodes = np.concatenate([nodes, extra[extra > 0]])
    return np.unique(nodes)


def validate_phi(phi: CompressionTarget, grid=None, max_jump: float = 0.25) -> PhiReport:
    """Check phi(0) = 0 and 0 < phi(t) < 1 on a grid, plus a jump heuristic.

    The continuity heuristic flags consecutive grid nodes whose values differ
    by more than ``max_jump``; it only runs for tabulated inputs.
    """
    if grid is None:
        grid = default_grid(1.0, 1e3)
        if phi.table is not None:
            grid = np.unique(np.concatenate([grid, phi.breakpoints]))
    grid = np.asarray(grid, dtype=float)
    violations: list[tuple[float, str]] = []
    v0 = float(phi(np.array([0.0]))[0])
    if v0 != 0.0:
        violations.append((0.0, f"phi(0) = {v0} != 0"))
    vals = np.asarray(phi(grid), dtype=float)
    for t, v in zip(grid, vals):
        if not math.isfinite(v):
            violations.append((float(t), "phi(t) is not finite"))
        elif v <= 0:
            violations.append((float(t), f"phi(t) = {v} <= 0"))
        elif v >= 1:
            violations.append((float(t), f"phi(t) = {v} >= 1"))
    if phi.table is not None and len(grid) > 1:
        jumps = np.abs(np.diff(vals))
        for i in np.flatnonzero(jumps > max_jump):
            violations.append((float(grid[i + 1]), f"jump of {jumps[i]:.3g} between grid nodes"))
    return PhiReport(not violations, violations)


@dataclass(frozen=True, eq=False)
class GaugePair:
    """Majorant gauge mu = log2(max(psi(t), t/(1+t))) and its inverse sigma.

    ``psi`` is the running supremum of phi on ``grid``, interpolated linearly
    in t, extended by ``psi[0] * t / grid[0]`` below the grid and held
    constant above it.
    """

    source: CompressionTarget
    grid: np.ndarray
    psi: np.ndarray

    def mu(self, t):
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        if np.any(t <= 0):
            raise ValueError("mu is defined on (0, inf)")
        psi = np.interp(t, self.grid, self.psi)
        below = t < self.grid[0]
        psi[below] = self.psi[0] * t[below] / self.grid[0]
        target = np.maximum(psi, t / (1.0 + t))
        with np.errstate(divide="ignore"):
            out = np.log2(target)
        # keep 2**mu >= psi exact in floating point, not just up to rounding
        for _ in range(8):
            low = np.exp2(out) < target
            if not low.any():
                break
            out[low] = np.nextafter(out[low], 0.0)
        return float(out[0]) if scalar else out

    def sigma(self, y: float, rtol: float = 1e-12) -> float:
        return sigma_of(self, y, rtol)

    def to_json(self) -> dict:
        return {"phi": self.source.to_json(), "grid": self.grid.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "GaugePair":
        return majorant_mu(CompressionTarget.from_json(obj["phi"]), grid=np.array(obj["grid"], dtype=float))


def majorant_mu(phi: CompressionTarget, grid=None) -> GaugePair:
    report = validate_phi(phi)
    if not report.ok:
        t, why = report.violations[0]
        raise PhiError(f"phi is not admissible: {why} (t = {t:g}); {len(report.violations)} violation(s)")
    if grid is None:
        grid = default_grid()
    grid = np.unique(np.concatenate([np.asarray(grid, dtype=float), phi.breakpoints]))
    grid = grid[grid > 0]
    psi = np.maximum.accumulate(np.asarray(phi(grid), dtype=float))
    grid.setflags(write=False)
    psi.setflags(write=False)
    return GaugePair(phi, grid, psi)


def sigma_of(g: GaugePair, y: float, rtol: float = 1e-12) -> float:
    """Smallest t with mu(t) >= y, by bisection; ``inf`` if mu never gets there."""
    if not y < 0:
        raise ValueError(f"sigma is defined on (-inf, 0), got {y}")
    hi = max(1.0, float(g.grid[-1]))
    while g.mu(hi) < y:
        hi *= 2.0
        if hi > 1e300:
            return math.inf
    lo = min(float(g.grid[0]), hi) / 2.0
    while g.mu(lo) >= y:
        lo /= 2.0
        if lo < 1e-300:
            return lo
    while hi - lo > rtol * hi:
        mid = math.sqrt(lo * hi) if hi > 4.0 * lo else 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g.mu(mid) >= y:
            hi = mid
        else:
            lo = mid
    return hi
