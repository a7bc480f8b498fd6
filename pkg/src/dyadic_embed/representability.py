"""Linear copies of net spans in fresh target blocks, with norm certificates.

A :class:`LinearMap` acts on ambient coordinates but is only meaningful on
the span of its ``source_basis``; every norm below is the norm of that
restriction. Exact values are available for (1, q), (p, inf), (2, 2) and
square diagonal (p, p) matrices on full spans; everything else falls back to
a sampled lower bound flagged as an estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from .normed_spaces import conjugate_exponent, lp_norm, parse_exponent, format_exponent

PIVOT_TOL = 1e-10
ILL_CONDITIONED = 1e-8
DEFAULT_SAMPLES = 10_000


class NotAnIsomorphismError(ValueError):
    pass


class OracleError(ValueError):
    pass


def span_basis(vectors: np.ndarray, tol: float = PIVOT_TOL) -> tuple[np.ndarray, float]:
    """Select a well-conditioned basis among ``vectors`` (rows) by pivoted QR.

    Returns the chosen vectors as columns (d x r) and the smallest retained
    pivot ratio |R_ii| / |R_00|.
    """
    G = np.asarray(vectors, dtype=float).T
    if G.size == 0 or not np.any(G):
        return np.zeros((G.shape[0], 0)), 1.0
    _, R, piv = scipy.linalg.qr(G, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    ratios = diag / diag[0]
    r = int(np.sum(ratios > tol))
    return G[:, np.sort(piv[:r])], float(ratios[r - 1])


def orthonormal(basis: np.ndarray) -> np.ndarray:
    if basis.shape[1] == 0:
        return basis
    q, _ = np.linalg.qr(basis)
    return q


@dataclass(frozen=True, eq=False)
class LinearMap:
    matrix: np.ndarray
    source_basis: np.ndarray
    p_in: float
    p_out: float
    pivot_ratio: float = 1.0
    _q: np.ndarray = field(init=False, repr=False)
    _pinv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        # C order so that evaluation rounds identically after a JSON round trip
        m = np.array(self.matrix, dtype=float, order="C")
        b = np.array(self.source_basis, dtype=float, order="C")
        if b.ndim != 2 or m.ndim != 2 or m.shape[1] != b.shape[0]:
            raise ValueError(f"matrix {m.shape} does not act on basis of shape {b.shape}")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "source_basis", b)
        object.__setattr__(self, "p_in", parse_exponent(self.p_in))
        object.__setattr__(self, "p_out", parse_exponent(self.p_out))
        q = orthonormal(b)
        object.__setattr__(self, "_q", q)
        aq = m @ q
        object.__setattr__(self, "_pinv", q @ np.linalg.pinv(aq) if q.shape[1] else np.zeros((m.shape[1], m.shape[0])))

    @property
    def rank(self) -> int:
        return self.source_basis.shape[1]

    @property
    def ill_conditioned(self) -> bool:
        return self.pivot_ratio < ILL_CONDITIONED

    def __call__(self, v) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)

    def inverse(self, w) -> np.ndarray:
        """Preimage in the source span of an image-space vector."""
        return self._pinv @ np.asarray(w, dtype=float)

    def restricted(self) -> np.ndarray:
        """Matrix of the map in orthonormal coordinates of the source span."""
        return self.matrix @ self._q

    def scaled(self, c: float) -> "LinearMap":
        return LinearMap(c * self.matrix, self.source_basis, self.p_in, self.p_out, self.pivot_ratio)

    def to_json(self) -> dict:
        return {
            "matrix": self.matrix.tolist(),
            "source_basis": self.source_basis.T.tolist(),
            "p_in": format_exponent(self.p_in),
            "p_out": format_exponent(self.p_out),
            "pivot_ratio": self.pivot_ratio,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LinearMap":
        basis = np.array(obj["source_basis"], dtype=float)
        m = np.array(obj["matrix"], dtype=float)
        basis = basis.T if basis.size else np.zeros((m.shape[1], 0))
        return cls(m, basis, obj["p_in"], obj["p_out"], obj.get("pivot_ratio", 1.0))


@dataclass(frozen=True)
class NormResult:
    value: float
    exact: bool
    upper: float | None = None

    @property
    def bound(self) -> float:
        """Best available upper bound (the value itself when exact)."""
        if self.exact:
            return self.value
        return self.upper if self.upper is not None else self.value


@dataclass(frozen=True)
class DistortionResult:
    value: float
    exact: bool
    norm: NormResult
    inverse_norm: NormResult


def full_norm(matrix: np.ndarray, p_in: float, p_out: float) -> float | None:
    """Exact l_{p_in} -> l_{p_out} norm on the full coordinate space, if cheap."""
    A = np.asarray(matrix, dtype=float)
    if A.size == 0:
        return 0.0
    if p_in == 1:
        return max(lp_norm(A[:, j], p_out) for j in range(A.shape[1]))
    if math.isinf(p_out):
        pc = conjugate_exponent(p_in)
        return max(lp_norm(A[i, :], pc) for i in range(A.shape[0]))
    if p_in == 2 and p_out == 2:
        return float(np.linalg.norm(A, 2))
    if p_in == p_out and A.shape[0] == A.shape[1] and np.count_nonzero(A - np.diag(np.diag(A))) == 0:
        return float(np.abs(np.diag(A)).max())
    return None


def _ratios(A: LinearMap, coeffs: np.ndarray) -> np.ndarray:
    V = A._q @ coeffs
    W = A.matrix @ V
    num = np.array([lp_norm(W[:, j], A.p_out) for j in range(W.shape[1])])
    den = np.array([lp_norm(V[:, j], A.p_in) for j in range(V.shape[1])])
    return num / den


def _ascend(A: LinearMap, c: np.ndarray, sign: float, sweeps: int = 30) -> float:
    """Coordinate ascent on sign * ratio starting from span coefficients ``c``."""
    best = sign * _ratios(A, c[:, None])[0]
    h = 0.5 * float(np.abs(c).max() or 1.0)
    r = len(c)
    for _ in range(sweeps):
        improved = False
        for j in range(r):
            for step in (h, -h):
                trial = c.copy()
                trial[j] += step
                if not np.any(trial):
                    continue
                val = sign * _ratios(A, trial[:, None])[0]
                if val > best:
                    best, c, improved = val, trial, True
        if not improved:
            h *= 0.5
            if h < 1e-9:
                break
    return sign * best


def sampled_extremes(A: LinearMap, seed: int = 0, samples: int = DEFAULT_SAMPLES) -> tuple[float, float]:
    """(max, min) of ||Av|| / ||v|| over random span vectors plus coordinate ascent."""
    r = A.rank
    if r == 0:
        return 0.0, math.inf
    rng = np.random.default_rng(seed)
    C = rng.standard_normal((r, samples))
    # the basis vectors themselves are natural extremal candidates
    B = np.linalg.lstsq(A._q, A.source_basis, rcond=None)[0]
    C = np.hstack([np.eye(r), B, C])
    ratios = _ratios(A, C)
    hi = _ascend(A, C[:, int(np.argmax(ratios))], 1.0)
    lo = _ascend(A, C[:, int(np.argmin(ratios))], -1.0)
    return max(hi, float(ratios.max())), min(lo, float(ratios.min()))


def _sandwich(lower: float, upper: float | None) -> NormResult:
    if upper is not None and lower >= upper * (1 - 1e-12):
        return NormResult(upper, True, upper)
    return NormResult(lower, False, upper)


def _singular_values(A: LinearMap) -> np.ndarray:
    """Singular values of the restricted map, zero-padded to the span rank."""
    s = np.linalg.svd(A.restricted(), compute_uv=False)
    return np.concatenate([s, np.zeros(A.rank - len(s))])


def operator_norm(A: LinearMap, seed: int = 0, samples: int = DEFAULT_SAMPLES) -> NormResult:
    """Norm of ``A`` restricted to its source span."""
    if A.rank == 0:
        return NormResult(0.0, True, 0.0)
    if A.p_in == 2 and A.p_out == 2:
        return NormResult(float(_singular_values(A)[0]), True)
    full = full_norm(A.matrix, A.p_in, A.p_out)
    if full is not None and A.rank == A.matrix.shape[1]:
        return NormResult(full, True, full)
    hi, _ = sampled_extremes(A, seed, samples)
    return _sandwich(hi, full)


def inverse_norm(A: LinearMap, seed: int = 0, samples: int = DEFAULT_SAMPLES) -> NormResult:
    """Norm of the inverse of ``A`` on its image, i.e. 1 / inf ||Av|| / ||v||."""
    if A.rank == 0:
        return NormResult(0.0, True, 0.0)
    s = _singular_values(A)
    if s[-1] <= 1e-12 * s[0]:
        raise NotAnIsomorphismError("map is rank deficient on its source span")
    if A.p_in == 2 and A.p_out == 2:
        return NormResult(float(1.0 / s[-1]), True)
    full = None
    M = A.matrix
    if M.shape[0] == M.shape[1]:
        try:
            full = full_norm(np.linalg.inv(M), A.p_out, A.p_in)
        except np.linalg.LinAlgError:
            full = None
    if full is not None and A.rank == M.shape[1]:
        return NormResult(full, True, full)
    _, lo = sampled_extremes(A, seed, samples)
    return _sandwich(1.0 / lo, full)


def distortion(A: LinearMap, seed: int = 0, samples: int = DEFAULT_SAMPLES) -> DistortionResult:
    n = operator_norm(A, seed, samples)
    inv = inverse_norm(A, seed, samples)
    if A.rank == 0:
        raise NotAnIsomorphismError("map has an empty source span")
    return DistortionResult(n.value * inv.value, n.exact and inv.exact, n, inv)


@dataclass(frozen=True)
class MapCheck:
    norm: NormResult
    inverse_norm: NormResult
    C: float
    norm_ok: bool
    inverse_ok: bool
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.norm_ok and self.inverse_ok

    def to_json(self) -> dict:
        return {
            "norm": self.norm.value,
            "norm_exact": self.norm.exact,
            "inverse_norm": self.inverse_norm.value,
            "inverse_norm_exact": self.inverse_norm.exact,
            "norm_ok": self.norm_ok,
            "inverse_ok": self.inverse_ok,
            "error": self.error,
        }


def check_map(A: LinearMap, C: float, tol: float = 1e-9, seed: int = 0) -> MapCheck:
    """Verify ``||A|| <= 1`` and ``||A^{-1}|| <= C`` up to relative ``tol``.

    Uses upper bounds when exact values are unavailable; with only a sampled
    lower bound, the check means that no sampled witness violates the bound.
    """
    n = operator_norm(A, seed)
    try:
        inv = inverse_norm(A, seed)
    except NotAnIsomorphismError as exc:
        return MapCheck(n, NormResult(math.inf, True), C, n.bound <= 1 + tol, False, str(exc))
    return MapCheck(n, inv, C, n.bound <= 1 + tol, inv.bound <= C * (1 + tol))


@dataclass(frozen=True)
class FcrOracle:
    """Supplier of block maps for net spans with ``||R|| <= 1``, ``||R^-1|| <= C``."""

    name: str
    C: float
    builder: Callable[[np.ndarray, float, float], LinearMap | None]

    def __call__(self, net_points: np.ndarray, p_in: float, p_out: float) -> LinearMap | None:
        return self.builder(net_points, p_in, p_out)


def _identity_map(net_points: np.ndarray, p_in: float, p_out: float) -> LinearMap | None:
    if p_in != p_out:
        raise OracleError(f"identity oracle needs matching exponents, got {p_in} -> {p_out}")
    pts = np.asarray(net_points, dtype=float)
    pts = pts[np.any(pts != 0, axis=1)]
    if len(pts) == 0:
        return None
    basis, ratio = span_basis(pts)
    d = basis.shape[0]
    if p_in == 2:
        # orthonormal coordinates of the span: an isometry onto l_2^r
        matrix = orthonormal(basis).T
    else:
        matrix = np.eye(d)
    return LinearMap(matrix, basis, p_in, p_out, ratio)


def identity_oracle(C: float = 1.0) -> FcrOracle:
    return FcrOracle("identity", 1.0, _identity_map)


def diagonal_oracle(C: float) -> FcrOracle:
    """Identity copy followed by diag(1, 1/C, 1, 1/C, ...), rescaled to norm <= 1."""
    if C == 1:
        return identity_oracle()
    if not C > 1:
        raise OracleError(f"diagonal oracle needs C > 1, got {C}")

    def build(net_points, p_in, p_out):
        base = _identity_map(net_points, p_in, p_out)
        if base is None:
            return None
        m = base.matrix.shape[0]
        D = np.where(np.arange(m) % 2 == 0, 1.0, 1.0 / C)
        A = LinearMap(D[:, None] * base.matrix, base.source_basis, p_in, p_out, base.pivot_ratio)
        s = operator_norm(A).bound
        return A.scaled(1.0 / s) if s > 1 else A

    return FcrOracle(f"diagonal:{C:g}", float(C), build)


def parse_oracle(spec: str) -> FcrOracle:
    if spec == "identity":
        return identity_oracle()
    if spec.startswith("diagonal:"):
        try:
            C = float(spec.split(":", 1)[1])
        except ValueError:
            raise OracleError(f"bad oracle spec {spec!r}; expected diagonal:<C>") from None
        return diagonal_oracle(C)
    raise OracleError(f"unknown oracle {spec!r}; expected 'identity' or 'diagonal:<C>'")
