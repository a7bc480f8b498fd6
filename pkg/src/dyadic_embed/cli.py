"""Command-line front end: gen, build, certify, report.

Exit codes: 0 all certificates pass, 2 a certificate failed, 3 bad input.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .certification import moduli, report, save_report, write_plot_csv
from .embedding import BuildConfig, EmbeddingArtifact, build
from .modulus import CompressionTarget, PhiError
from .normed_spaces import AmbientSpace, InstanceError, PointCloud, lp_norm, parse_exponent
from .representability import OracleError, parse_oracle

EXIT_OK, EXIT_CERT, EXIT_INPUT = 0, 2, 3

log = logging.getLogger("dyadic_embed")


class InputError(Exception):
    pass


# instance generators -------------------------------------------------------

def ball_grid(d: int = 3, p: float = 2.0, h: float = 0.5, scale: float = 1.0) -> np.ndarray:
    """Points of the lattice h*Z^d inside the closed unit ball of l_p^d, times ``scale``."""
    m = int(math.floor(1.0 / h + 1e-9))
    pts = []
    for c in itertools.product(range(-m, m + 1), repeat=d):
        x = h * np.array(c, dtype=float)
        if lp_norm(x, p) <= 1.0 + 1e-12:
            pts.append(scale * x)
    return np.array(pts)


def convergent_sequence(count: int = 50, d: int = 1) -> np.ndarray:
    """{0} together with e_1 / m for m = 1..count."""
    pts = np.zeros((count + 1, d))
    pts[1:, 0] = 1.0 / np.arange(1, count + 1)
    return pts


def annulus_sample(n_points: int = 100, d: int = 2, p: float = 2.0, k_min: int = -3, k_max: int = 1,
                   seed: int = 0) -> np.ndarray:
    """Gaussian directions normalized in l_p, radii uniform in [2**k_min, 2**k_max]."""
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n_points, d))
    g /= np.array([lp_norm(row, p) for row in g])[:, None]
    radii = rng.uniform(2.0**k_min, 2.0**k_max, n_points)
    return g * radii[:, None]


KINDS = ("ball-grid", "convergent-sequence", "annulus-sample")


def gen(kind: str, params: dict, seed: int = 0) -> PointCloud:
    p = parse_exponent(params.get("p", 2))
    d = int(params.get("d", 1 if kind == "convergent-sequence" else 3 if kind == "ball-grid" else 2))
    if kind == "ball-grid":
        pts = ball_grid(d, p, float(params.get("h", 0.5)), float(params.get("scale", 1.0)))
    elif kind == "convergent-sequence":
        pts = convergent_sequence(int(params.get("count", 50)), d)
    elif kind == "annulus-sample":
        pts = annulus_sample(int(params.get("n_points", 100)), d, p, int(params.get("k_min", -3)),
                             int(params.get("k_max", 1)), seed)
    else:
        raise InputError(f"unknown instance kind {kind!r}; expected one of {', '.join(KINDS)}")
    if len(pts) == 0:
        raise InputError(f"{kind} with {params} produced no points")
    return PointCloud(pts, AmbientSpace(p, d))


# configuration --------------------------------------------------------------

@dataclass
class RunConfig:
    command: str
    instance: str | None = None
    artifact: str | None = None
    oracle: str = "identity"
    eta: float = 4.0
    gamma: float = 0.0
    nmax: int = 24
    phi: str = "rational"
    out: str | None = None
    csv: str | None = None
    seed: int = 0
    threads: int = 1
    kind: str | None = None
    gen_params: dict = field(default_factory=dict)

    def build_config(self) -> BuildConfig:
        try:
            phi = CompressionTarget.parse(self.phi)
            return BuildConfig(eta=self.eta, gamma=self.gamma, n_max=self.nmax, phi=phi,
                               oracle=self.oracle, seed=self.seed)
        except (PhiError, ValueError) as exc:
            raise InputError(str(exc)) from exc


CONFIG_KEYS = {f.name for f in fields(RunConfig)} - {"command"}


def load_config_file(path: str) -> dict:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    unknown = set(obj) - CONFIG_KEYS
    if unknown:
        raise InputError(f"config {path}: unknown keys {sorted(unknown)}")
    return obj


def _require_file(path: str | None, what: str) -> Path:
    if not path:
        raise InputError(f"--{what} is required")
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{what} file {path} does not exist")
    return p


def _require_out(path: str | None, is_dir: bool = False) -> Path:
    if not path:
        raise InputError("--out is required")
    p = Path(path)
    parent = p if is_dir else p.parent
    if is_dir:
        parent.mkdir(parents=True, exist_ok=True)
    elif not parent.exists():
        raise InputError(f"output directory {parent} does not exist")
    return p


def _load_instance(path: str | None) -> PointCloud:
    p = _require_file(path, "instance")
    try:
        return PointCloud.load(p)
    except InstanceError as exc:
        raise InputError(str(exc) if str(path) in str(exc) else f"{path}: {exc}") from exc


def _build(cfg: RunConfig, M: PointCloud) -> EmbeddingArtifact:
    bc = cfg.build_config()
    try:
        oracle = parse_oracle(cfg.oracle)
    except OracleError as exc:
        raise InputError(str(exc)) from exc
    return build(M, oracle, bc)


def run_pipeline(cfg: RunConfig) -> int:
    """Execute one command; return the process exit code."""
    if cfg.command == "gen":
        out = _require_out(cfg.out)
        M = gen(cfg.kind or "", cfg.gen_params, cfg.seed)
        obj = M.to_json()
        obj["meta"] = {"kind": cfg.kind, "seed": cfg.seed, **cfg.gen_params}
        out.write_text(json.dumps(obj) + "\n")
        log.info("wrote %d points to %s", len(M), out)
        return EXIT_OK

    if cfg.command == "build":
        out = _require_out(cfg.out)
        M = _load_instance(cfg.instance)
        art = _build(cfg, M)
        art.save(out)
        log.info("wrote artifact (%d blocks, dim %d) to %s", len(art.spec.blocks), art.spec.total_dim, out)
        return EXIT_OK

    if cfg.command == "certify":
        path = _require_file(cfg.artifact, "artifact")
        out = _require_out(cfg.out)
        try:
            art = EmbeddingArtifact.load(path)
        except (KeyError, ValueError, TypeError) as exc:
            raise InputError(f"{path}: malformed artifact ({exc})") from exc
        rep = report(art, cfg.threads)
        save_report(rep, out)
        if cfg.csv:
            write_plot_csv(art, moduli(art), cfg.csv)
        return _verdict(rep)

    if cfg.command == "report":
        M = _load_instance(cfg.instance)
        out = _require_out(cfg.out, is_dir=True)
        art = _build(cfg, M)
        art.save(out / "artifact.json")
        rep = report(art, cfg.threads)
        save_report(rep, out / "report.json")
        write_plot_csv(art, moduli(art), out / "moduli.csv")
        return _verdict(rep)

    raise InputError(f"unknown command {cfg.command!r}")


def _verdict(rep) -> int:
    j = rep.to_json()
    for key in ("upper_pass", "lower_pass", "witness_pass"):
        log.info("%s: %s", key, j[key])
    if not rep.passed:
        log.error("certificate failed")
        return EXIT_CERT
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with defaults; flags win")
    common.add_argument("--out", help="output file (directory for 'report')")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    embed = argparse.ArgumentParser(add_help=False)
    embed.add_argument("--instance", help="point-cloud JSON")
    embed.add_argument("--oracle", help="identity | diagonal:C")
    embed.add_argument("--eta", type=float)
    embed.add_argument("--gamma", type=float)
    embed.add_argument("--nmax", type=int)
    embed.add_argument("--phi", help="rational | sqrt-log | tabulated:PATH")

    parser = argparse.ArgumentParser(prog="dyadic-embed", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate a point cloud")
    g.add_argument("--kind", required=True, choices=KINDS)
    g.add_argument("--d", type=int)
    g.add_argument("--p")
    g.add_argument("--h", type=float, help="ball-grid mesh")
    g.add_argument("--scale", type=float, help="ball-grid scale")
    g.add_argument("--count", type=int, help="convergent-sequence length")
    g.add_argument("--n-points", type=int, help="annulus-sample size")
    g.add_argument("--k-min", type=int)
    g.add_argument("--k-max", type=int)

    sub.add_parser("build", parents=[common, embed], help="build an embedding artifact")
    c = sub.add_parser("certify", parents=[common], help="certify a saved artifact")
    c.add_argument("--artifact", help="artifact JSON from 'build'")
    c.add_argument("--csv", help="also write moduli plot data here")
    sub.add_parser("report", parents=[common, embed], help="build + certify, writing everything to --out DIR")
    return parser


GEN_KEYS = ("d", "p", "h", "scale", "count", "n_points", "k_min", "k_max")


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        values.update(load_config_file(args.config))
    for key in CONFIG_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    gen_params = dict(values.pop("gen_params", {}) or {})
    for key in GEN_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            gen_params[key] = v
    return RunConfig(command=args.command, gen_params=gen_params, **values)


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        cfg = config_from_args(args)
        return run_pipeline(cfg)
    except (InputError, InstanceError, PhiError, OracleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
