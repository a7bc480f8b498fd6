"""All-pairs moduli and certificates for a built embedding.

Three checks, each exact over the finite instance:

* upper:   ||f(x) - f(y)|| <= 45 ||x - y|| + 2 * tail slack
* lower:   ||f(x) - f(y)|| >= 2**mu(t) * (eta - 2) * t / (16 eta C (1 + gamma)),  t = ||x - y||
* witness: the block combination sum_r R_{r,L}^{-1}(block_{r,L}(f(x) - f(y))) at the
           level L selected by t is at least 2**-L (eta - 2)/eta * t and at most
           8 C (1 + gamma) ||f(x) - f(y)||.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .embedding import EmbeddingArtifact
from .nets import floor_log2, net_quality
from .normed_spaces import lp_norm, pairwise_distances
from .representability import check_map

UPPER_CONSTANT = 45.0
WITNESS_FUNCTIONAL = 8.0
RTOL = 1e-9


class DegeneratePairError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ModulusProfile:
    """Every unordered pair (i < j) with its distance and image distance, sorted by distance."""

    t: np.ndarray
    image: np.ndarray
    i: np.ndarray
    j: np.ndarray
    norms: np.ndarray
    _suffix_min: np.ndarray = field(init=False, repr=False)
    _prefix_max: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_suffix_min", np.minimum.accumulate(self.image[::-1])[::-1])
        object.__setattr__(self, "_prefix_max", np.maximum.accumulate(self.image))

    def __len__(self) -> int:
        return len(self.t)

    def rho(self, t):
        """Compression modulus: inf of image distances over pairs at distance >= t."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.t, t, side="left")
        out = np.full(idx.shape, math.inf)
        ok = idx < len(self.t)
        out[ok] = self._suffix_min[idx[ok]]
        return out if out.ndim else float(out)

    def omega(self, t):
        """Expansion modulus: sup of image distances over pairs at distance <= t (0 if none)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.t, t, side="right") - 1
        out = np.zeros(idx.shape)
        ok = idx >= 0
        out[ok] = self._prefix_max[idx[ok]]
        return out if out.ndim else float(out)

    def pairs(self):
        for a, b, t, im in zip(self.i, self.j, self.t, self.image):
            yield int(a), int(b), float(t), float(im)


def moduli_from_images(points: np.ndarray, images: np.ndarray, p: float, q: float | None = None) -> ModulusProfile:
    q = p if q is None else q
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    imgs = np.asarray(images, dtype=float)
    if imgs.ndim == 1:
        imgs = imgs[:, None]
    m = len(pts)
    iu, ju = np.triu_indices(m, 1)
    D = pairwise_distances(pts, p)[iu, ju]
    E = pairwise_distances(imgs, q)[iu, ju] if imgs.shape[1] else np.zeros(len(iu))
    # stable sort keeps (i, j) lexicographic order among equal distances
    order = np.argsort(D, kind="stable")
    norms = np.array([lp_norm(x, p) for x in pts])
    return ModulusProfile(D[order], E[order], iu[order], ju[order], norms)


def moduli(artifact: EmbeddingArtifact, images: np.ndarray | None = None, threads: int = 1) -> ModulusProfile:
    if images is None:
        images = artifact.images(threads)
    return moduli_from_images(artifact.cloud.points, images, artifact.p, artifact.spec.q)


def part1_case(nx: float, ny: float) -> str:
    """Classify a pair by norms the way the Lipschitz estimate splits it."""
    a, b = sorted((nx, ny))
    if a <= 0.5 * b:
        return "1"
    return "2.a" if floor_log2(a) == floor_log2(b) else "2.b"


@dataclass
class Verdict:
    passed: bool
    worst: dict | None
    violations: list[dict] = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"passed": self.passed, "worst": self.worst, "violations": self.violations[:20],
                "n_violations": len(self.violations), **self.extra}


def _pair_record(profile: ModulusProfile, idx: int, **kw) -> dict:
    return {"i": int(profile.i[idx]), "j": int(profile.j[idx]), "t": float(profile.t[idx]),
            "image": float(profile.image[idx]), **kw}


def _first_extreme(values: np.ndarray, profile: ModulusProfile, largest: bool) -> int:
    """Index of the extreme value; ties go to the lexicographically lowest pair."""
    target = values.max() if largest else values.min()
    cand = np.flatnonzero(values == target)
    return int(min(cand, key=lambda c: (profile.i[c], profile.j[c])))


def certify_upper(profile: ModulusProfile, tail_slack: float = 0.0, constant: float = UPPER_CONSTANT) -> Verdict:
    if len(profile) == 0:
        return Verdict(True, None, extra={"vacuous": True, "worst_ratio": None})
    ratio = profile.image / profile.t
    bound = constant * profile.t + 2.0 * tail_slack
    bad = np.flatnonzero(profile.image > bound)
    w = _first_extreme(ratio, profile, largest=True)
    case = part1_case(profile.norms[profile.i[w]], profile.norms[profile.j[w]])
    worst = _pair_record(profile, w, ratio=float(ratio[w]), case=case)
    violations = [_pair_record(profile, b, ratio=float(ratio[b]),
                               case=part1_case(profile.norms[profile.i[b]], profile.norms[profile.j[b]])) for b in bad]
    return Verdict(len(bad) == 0, worst, violations,
                   {"vacuous": False, "worst_ratio": float(ratio[w]), "constant": constant,
                    "slack": 2.0 * tail_slack})


def lower_bound_curve(t, gauge, r: float):
    t = np.asarray(t, dtype=float)
    return r * np.exp2(gauge.mu(t)) * t


def certify_lower(profile: ModulusProfile, gauge, r: float) -> Verdict:
    """Pairwise compression certificate; also reports the phi-form r t phi(t)."""
    if len(profile) == 0:
        return Verdict(True, None, extra={"vacuous": True, "phi_form_passed": True, "r": r})
    bound = lower_bound_curve(profile.t, gauge, r)
    margin = profile.image / bound
    bad = np.flatnonzero(profile.image < bound)
    phi_bound = r * profile.t * np.asarray(gauge.source(profile.t), dtype=float)
    phi_ok = bool(np.all(profile.image >= phi_bound))
    w = _first_extreme(margin, profile, largest=False)
    worst = _pair_record(profile, w, bound=float(bound[w]), margin=float(margin[w]))
    violations = [_pair_record(profile, b, bound=float(bound[b]), margin=float(margin[b])) for b in bad]
    return Verdict(len(bad) == 0, worst, violations,
                   {"vacuous": False, "phi_form_passed": phi_ok, "r": r})


@dataclass
class WitnessRecord:
    i: int
    j: int
    t: float
    level: int | None
    value: float = math.nan
    image: float = math.nan
    lower_target: float = math.nan
    upper_target: float = math.nan
    retraction_error: float = math.nan
    retraction_budget: float = math.nan
    lower_ok: bool = False
    upper_ok: bool = False
    premise_ok: bool = False
    refused: str | None = None

    @property
    def ok(self) -> bool:
        return self.refused is None and self.lower_ok and self.upper_ok and self.premise_ok

    def to_json(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def select_level(artifact: EmbeddingArtifact, t: float) -> int | None:
    """Smallest level L with sigma(-L) <= t, or None beyond the truncation depth."""
    for L in range(1, artifact.config.n_max + 1):
        if artifact.sigma[L] <= t:
            return L
    return None


def witness_lower_bound(artifact: EmbeddingArtifact, x: int, y: int, images: np.ndarray | None = None) -> WitnessRecord:
    """Block-combination witness for the pair of cloud points ``x`` and ``y``."""
    px, py = artifact.cloud.points[x], artifact.cloud.points[y]
    p = artifact.p
    t = lp_norm(px - py, p)
    if t == 0:
        raise DegeneratePairError(f"points {x} and {y} coincide")
    rec = WitnessRecord(x, y, t, select_level(artifact, t))
    if rec.level is None:
        rec.refused = "level beyond truncation depth"
        return rec
    L = rec.level
    fx = images[x] if images is not None else artifact.glue(x).coords
    fy = images[y] if images is not None else artifact.glue(y).coords
    z = fx - fy
    shells: set[int] = set()
    for pt in (px, py):
        w = artifact.weights(pt)
        if w is not None:
            shells.update((w[0], w[0] + 1))
    combo = np.zeros(artifact.cloud.ambient.dim)
    for r in sorted(shells):
        R = artifact.maps.get((r, L))
        if R is None:
            continue
        if R.ill_conditioned:
            rec.refused = f"map ({r}, {L}) is ill-conditioned (pivot ratio {R.pivot_ratio:.3g})"
            return rec
        combo += R.inverse(z[artifact.spec.slice(r, L)])
    err = 0.0
    for idx, pt in ((x, px), (y, py)):
        w = artifact.weights(pt)
        if w is None:
            continue
        for r in (w[0], w[0] + 1):
            err = max(err, lp_norm(artifact.retraction(r, L, idx) - pt, p))
    eta, gamma = artifact.config.eta, artifact.config.gamma
    rec.value = lp_norm(combo, p)
    rec.image = lp_norm(z, artifact.spec.q)
    rec.lower_target = math.ldexp(1.0, -L) * (eta - 2) / eta * t
    rec.upper_target = WITNESS_FUNCTIONAL * artifact.C * (1 + gamma) * rec.image
    rec.retraction_error = err
    rec.retraction_budget = artifact.sigma[L] / eta
    rec.lower_ok = rec.value >= rec.lower_target * (1 - RTOL)
    rec.upper_ok = rec.value <= rec.upper_target * (1 + RTOL)
    rec.premise_ok = err <= rec.retraction_budget * (1 + RTOL)
    return rec


def witness_all(artifact: EmbeddingArtifact, images: np.ndarray | None = None) -> list[WitnessRecord]:
    if images is None:
        images = artifact.images()
    m = len(artifact.cloud)
    return [witness_lower_bound(artifact, a, b, images) for a in range(m) for b in range(a + 1, m)]


def level_map_check(artifact: EmbeddingArtifact) -> dict:
    """Brute-force two-sided pair bounds for every level map f_{k,n} on B_k."""
    p, C = artifact.p, artifact.C
    checked = 0
    violations = []
    for (k, n), net in sorted(artifact.nets.nets.items()):
        members = artifact.shells.shells[k]
        if len(members) < 2:
            continue
        eps = net.eps
        R = artifact.maps.get((k, n))
        table = artifact.nets.retraction[(k, n)]
        retracted = net.points[[table[i] for i in members]]
        img = retracted @ R.matrix.T if R is not None else np.zeros((len(members), 1))
        pts = artifact.cloud.points[list(members)]
        iu, ju = np.triu_indices(len(members), 1)
        D = pairwise_distances(pts, p)[iu, ju]
        E = pairwise_distances(img, artifact.spec.q)[iu, ju]
        lo = (D - 2 * eps) / C
        hi = D + 2 * eps
        bad = np.flatnonzero((E < lo - RTOL * D) | (E > hi + RTOL * hi))
        checked += len(D)
        for b in bad[:20]:
            violations.append({"k": k, "n": n, "i": members[iu[b]], "j": members[ju[b]],
                               "t": float(D[b]), "image": float(E[b]), "low": float(lo[b]), "high": float(hi[b])})
    return {"passed": not violations, "pairs_checked": checked, "violations": violations}


def net_check(artifact: EmbeddingArtifact) -> dict:
    """Covering radius <= eps and non-origin separation > eps for every net."""
    violations = []
    checked = 0
    for (k, n), net in sorted(artifact.nets.nets.items()):
        pts = artifact.cloud.points[list(artifact.shells.shells[k])]
        cover, sep = net_quality(pts, net, artifact.p)
        checked += 1
        if cover > net.eps or sep <= net.eps:
            violations.append({"k": k, "n": n, "eps": net.eps, "cover": cover, "separation": sep})
    return {"passed": not violations, "nets_checked": checked, "violations": violations}


def map_check(artifact: EmbeddingArtifact) -> dict:
    failures = []
    seen: dict[int, object] = {}
    for (k, n), R in sorted(artifact.maps.items()):
        if id(R) not in seen:
            seen[id(R)] = check_map(R, artifact.C, seed=artifact.config.seed)
        chk = seen[id(R)]
        if not chk.ok:
            failures.append({"k": k, "n": n, **chk.to_json()})
    exact = all(c.norm.exact and c.inverse_norm.exact for c in seen.values())
    return {"passed": not failures, "maps_checked": len(artifact.maps), "all_exact": exact, "failures": failures}


def r_versus_eta(C: float, gamma: float, etas=(2.5, 3.0, 4.0, 8.0, 16.0, 64.0, 1024.0)) -> list[list[float]]:
    return [[eta, (eta - 2) / (16 * eta * C * (1 + gamma))] for eta in etas]


@dataclass
class CertificateReport:
    r: float
    D_effective: float | None
    upper: Verdict
    lower: Verdict
    witness: dict
    maps: dict
    nets: dict
    level_maps: dict
    slack: dict
    meta: dict

    @property
    def upper_pass(self) -> bool:
        return self.upper.passed

    @property
    def lower_pass(self) -> bool:
        # the pairwise inequality only certifies compression if every block map
        # really is an isomorphism within budget
        return self.lower.passed and self.maps["passed"]

    @property
    def witness_pass(self) -> bool:
        return self.witness["passed"]

    @property
    def passed(self) -> bool:
        return (self.upper_pass and self.lower_pass and self.witness_pass
                and self.nets["passed"] and self.level_maps["passed"])

    def to_json(self) -> dict:
        worst = []
        if self.upper.worst:
            worst.append({"check": "upper", **self.upper.worst})
        if self.lower.worst:
            worst.append({"check": "lower", **self.lower.worst})
        if self.witness.get("worst"):
            worst.append({"check": "witness", **self.witness["worst"]})
        return _clean({
            "r": self.r,
            "D_effective": self.D_effective,
            "upper_pass": self.upper_pass,
            "lower_pass": self.lower_pass,
            "witness_pass": self.witness_pass,
            "passed": self.passed,
            "worst_pairs": worst,
            "slack": self.slack,
            "upper": self.upper.to_json(),
            "lower": {**self.lower.to_json(), "pairwise_passed": self.lower.passed,
                      "maps_passed": self.maps["passed"]},
            "witness": self.witness,
            "maps": self.maps,
            "nets": self.nets,
            "level_maps": self.level_maps,
            **self.meta,
        })

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def _clean(obj):
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, (np.floating,)):
        return _clean(float(obj))
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _witness_summary(records: list[WitnessRecord]) -> dict:
    bad = [w for w in records if not w.ok]
    levels: dict[int, int] = {}
    for w in records:
        if w.level is not None:
            levels[w.level] = levels.get(w.level, 0) + 1
    worst = None
    scored = [w for w in records if w.refused is None]
    if scored:
        w = min(scored, key=lambda w: (w.value / w.lower_target, w.i, w.j))
        worst = {"i": w.i, "j": w.j, "t": w.t, "level": w.level, "value": w.value,
                 "lower_target": w.lower_target, "ratio": w.value / w.lower_target}
    return {
        "passed": not bad,
        "pairs": len(records),
        "violations": [w.to_json() for w in bad[:20]],
        "n_violations": len(bad),
        "n_refused": sum(w.refused is not None for w in records),
        "levels_used": {str(k): v for k, v in sorted(levels.items())},
        "worst": worst,
    }


def report(artifact: EmbeddingArtifact, threads: int = 1) -> CertificateReport:
    """Run every check; failures show up in the verdicts, never as exceptions."""
    cfg = artifact.config
    images = artifact.images(threads)
    profile = moduli(artifact, images)
    meta = {
        "n_points": len(artifact.cloud),
        "n_pairs": len(profile),
        "status": "ok" if len(profile) else "no pairs",
        "config": {**cfg.to_json(), "C": artifact.C},
        "seed": cfg.seed,
        "layout": {"blocks": len(artifact.spec.blocks), "total_dim": artifact.spec.total_dim,
                   "shells": artifact.shells.ks},
        "r_vs_eta": r_versus_eta(artifact.C, cfg.gamma),
    }
    upper = certify_upper(profile, artifact.tail_tol)
    lower = certify_lower(profile, artifact.gauge, artifact.r)
    try:
        records = witness_all(artifact, images)
        witness = _witness_summary(records)
    except Exception as exc:  # a broken artifact must still yield a report
        witness = {"passed": False, "error": str(exc), "pairs": len(profile)}
    D_eff = float(np.max(profile.image / profile.t)) if len(profile) else None
    return CertificateReport(
        r=artifact.r,
        D_effective=D_eff,
        upper=upper,
        lower=lower,
        witness=witness,
        maps=map_check(artifact),
        nets=net_check(artifact),
        level_maps=level_map_check(artifact),
        slack={"tail_tol": artifact.tail_tol, "upper_slack": 2.0 * artifact.tail_tol, "rtol": RTOL},
        meta=meta,
    )


def write_plot_csv(artifact: EmbeddingArtifact, profile: ModulusProfile, path) -> None:
    """Columns t, rho, omega, upper_bound, lower_bound at every realized distance."""
    ts = np.unique(profile.t)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "rho", "omega", "upper_bound", "lower_bound"])
        if ts.size == 0:
            return
        rho = profile.rho(ts)
        omega = profile.omega(ts)
        lower = lower_bound_curve(ts, artifact.gauge, artifact.r)
        for row in zip(ts, rho, omega, UPPER_CONSTANT * ts, lower):
            w.writerow([repr(float(v)) for v in row])


def save_report(rep: CertificateReport, path) -> None:
    Path(path).write_text(rep.dumps())
