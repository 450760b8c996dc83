"""Command-line entry point.

    toporecon reconstruct --input ring.xyz --loss two_holes.json --out run/
    toporecon reconstruct --preset dual_circle_2holes --out run/
    toporecon diagram --input ring.xyz --out diagram.json
    toporecon evaluate --meshes a.obj b.obj --clouds a.xyz b.xyz --truth truth.json
    toporecon synth --preset sphere_void --out sphere.xyz

Every subcommand exits 0 on success. Library errors are reported as
``error: <ErrorName>: <message>`` on stderr with exit status 1.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import DimensionError, ParseError, TopoReconError
from .extract import load_mesh
from .field import GaussianParams, init_params
from .metrics import evaluate
from .pipeline import default_grid, initial_diagram, reconstruct
from .pointcloud_io import PointCloud, load_pointcloud, normalize, save_xyz
from .presets import PRESETS, get_preset
from .topo_opt import LossSpec, OptimizerConfig

log = logging.getLogger("toporecon")


@dataclass
class RunConfig:
    input: str | None = None
    out: str = "out"
    dim: int | None = None
    base_res: int | None = None
    extra_samples: int | None = None
    loss: str | None = None
    preset: str | None = None
    n_points: int | None = None
    learning_rate: float | None = None
    max_iters: int | None = None
    plateau_tol: float | None = None
    plateau_window: int | None = None
    settle_iters: int | None = None
    rng_seed: int = 0
    threads: int = 1
    debug: bool = False
    export_diagram: bool = True
    export_trace: bool = True
    export_complex: bool = False

    def validate(self) -> None:
        if self.input is None and self.preset is None:
            raise ValueError("either --input or --preset is required")
        if self.input is not None and self.loss is None and self.preset is None:
            raise ValueError("--loss is required unless a preset supplies the loss")
        if self.dim is not None and self.dim not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.dim}")
        for name in ("base_res", "extra_samples", "n_points", "max_iters", "plateau_window"):
            value = getattr(self, name)
            if value is not None and value < (0 if name == "extra_samples" else 1):
                raise ValueError(f"{name} out of range: {value}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        values = {k: v for k, v in vars(args).items() if k in names}
        cfg = cls(**values)
        if getattr(args, "config", None):
            cfg = cfg.overridden(_read_json(args.config))
        cfg.validate()
        return cfg

    def overridden(self, data: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(self)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ParseError(f"unknown config keys: {', '.join(unknown)}")
        return dataclasses.replace(self, **data)


def _read_json(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from exc


def _versions() -> dict:
    import scipy

    return {"toporecon": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_cloud(cfg: RunConfig) -> tuple[PointCloud, PointCloud]:
    """Raw cloud in file coordinates plus its normalized copy."""
    if cfg.input is not None:
        raw = load_pointcloud(cfg.input)
    else:
        raw = PointCloud.from_points(get_preset(cfg.preset).cloud(cfg.rng_seed, cfg.n_points))
    if cfg.dim is not None and raw.dim != cfg.dim:
        raise DimensionError(f"cloud has dimension {raw.dim}, expected {cfg.dim}")
    return raw, normalize(raw)


def _resolve(cfg: RunConfig, dim: int):
    """Loss, grid and optimizer settings; explicit fields beat preset values."""
    preset = get_preset(cfg.preset) if cfg.preset else None
    if preset is not None and cfg.n_points:
        preset = preset.resized(cfg.n_points)
    spec = LossSpec.load(cfg.loss) if cfg.loss else preset.loss
    base, extra = (preset.base_res, preset.extra) if preset else default_grid(dim)
    base = cfg.base_res if cfg.base_res is not None else base
    extra = cfg.extra_samples if cfg.extra_samples is not None else extra
    opt = dataclasses.asdict(preset.optimizer) if preset else dataclasses.asdict(OptimizerConfig())
    for name in ("learning_rate", "max_iters", "plateau_tol", "plateau_window", "settle_iters"):
        if getattr(cfg, name) is not None:
            opt[name] = getattr(cfg, name)
    opt["rng_seed"] = cfg.rng_seed
    return spec, base, extra, OptimizerConfig(**opt)


def trace_csv(trace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["iteration", "loss", "learning_rate", "n_active", "on_target", "lifetimes"])
    for r in trace:
        writer.writerow([r.iteration, repr(r.loss), repr(r.learning_rate), r.n_active, int(r.on_target),
                         ";".join(repr(x) for x in r.lifetimes)])
    return buf.getvalue()


def params_json(params: GaussianParams) -> str:
    return json.dumps({"alphas": params.alphas.tolist()})


def load_params(path, n: int, d: int) -> GaussianParams:
    data = _read_json(path)
    try:
        alphas = np.asarray(data["alphas"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: expected an 'alphas' array ({exc})") from exc
    if alphas.shape != (n, d, d):
        raise DimensionError(f"{path}: alphas have shape {alphas.shape}, expected {(n, d, d)}")
    return GaussianParams(alphas)


def cmd_reconstruct(cfg: RunConfig) -> int:
    raw, cloud = _load_cloud(cfg)
    spec, base, extra, opt = _resolve(cfg, cloud.dim)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    result = reconstruct(cloud, spec, base, extra, opt, seed=cfg.rng_seed, debug=cfg.debug)
    mesh = result.mesh.transformed(cloud.scale.to_original)
    files = list(mesh.write(out / "mesh"))
    if cfg.export_diagram:
        files.append(out / "diagram.json")
        files[-1].write_text(result.diagram.to_json())
    if cfg.export_trace:
        files.append(out / "trace.csv")
        files[-1].write_text(trace_csv(result.optimization.trace))
    files.append(out / "params.json")
    files[-1].write_text(params_json(result.optimization.params))
    if cfg.export_complex:
        files.append(out / "complex.json")
        K = result.complex
        files[-1].write_text(json.dumps({"vertices": K.vertices.tolist(),
                                         "top": K.simplices[K.dim].tolist()}))
    summary = {
        "betti": mesh.betti(),
        "chamfer_one_way": result.chamfer,
        "provenance": mesh.provenance,
        "fallback": result.fallback,
        "iterations": len(result.optimization.trace),
        "best_iteration": result.optimization.best_iteration,
        "on_target": result.optimization.converged,
    }
    manifest = {
        "command": "reconstruct",
        "config": dataclasses.asdict(cfg),
        "resolved": {"loss": spec.to_dict(), "base_res": base, "extra_samples": extra,
                     "optimizer": dataclasses.asdict(opt)},
        "versions": _versions(),
        "result": summary,
        "artifacts": {p.name: _sha256(p) for p in files},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    log.info("timings: %s", {k: round(v, 2) for k, v in result.timings.items()})
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_diagram(args: argparse.Namespace) -> int:
    cfg = RunConfig(input=args.input, preset=args.preset, dim=args.dim, rng_seed=args.seed,
                    n_points=args.n_points, loss=None, out=args.out or "-")
    if cfg.input is None and cfg.preset is None:
        raise ValueError("either --input or --preset is required")
    raw, cloud = _load_cloud(cfg)
    b0, e0 = default_grid(cloud.dim)
    if cfg.preset:
        preset = get_preset(cfg.preset)
        if cfg.n_points:
            preset = preset.resized(cfg.n_points)
        b0, e0 = preset.base_res, preset.extra
    base = args.base_res if args.base_res is not None else b0
    extra = args.extra_samples if args.extra_samples is not None else e0
    params = load_params(args.params, len(cloud), cloud.dim) if args.params else init_params(cloud)
    dims = args.dims if args.dims else None
    text = initial_diagram(cloud, base, extra, seed=cfg.rng_seed, params=params, dims=dims).to_json() + "\n"
    if cfg.out == "-":
        sys.stdout.write(text)
    else:
        Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg.out).write_text(text)
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    truth = _read_json(args.truth)
    if isinstance(truth, dict):
        truth = truth.get("counts", truth.get("truth"))
    if not isinstance(truth, list):
        raise ParseError(f"{args.truth}: expected a list of Betti-number lists")
    if isinstance(truth and truth[0], int):
        truth = [truth] * len(args.meshes)
    clouds = [load_pointcloud(p) for p in args.clouds]
    ambient = clouds[0].dim if clouds else None
    meshes = [load_mesh(p, ambient_dim=ambient) for p in args.meshes]
    ids = [Path(p).stem if Path(p).stem != "mesh" else Path(p).parent.name or p for p in args.meshes]
    report = evaluate(ids, clouds, meshes, truth)
    text = report.to_json() + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    preset = get_preset(args.preset)
    pts = preset.cloud(args.seed, args.n_points)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_xyz(out, pts)
    if args.loss_out:
        Path(args.loss_out).write_text(json.dumps(preset.loss.to_dict(), indent=1) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toporecon", description=__doc__.splitlines()[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    rec = sub.add_parser("reconstruct", parents=[common], help="optimize the field and extract a surface")
    rec.add_argument("--input", help="point cloud (.xyz or ASCII .ply)")
    rec.add_argument("--preset", choices=sorted(PRESETS), help="synthetic experiment to run")
    rec.add_argument("--n-points", dest="n_points", type=int, help="preset cloud size")
    rec.add_argument("--loss", help="loss spec JSON (defaults to the preset's loss)")
    rec.add_argument("--out", default="out", help="output directory")
    rec.add_argument("--dim", type=int, choices=(2, 3))
    rec.add_argument("--base-res", dest="base_res", type=int)
    rec.add_argument("--extra", dest="extra_samples", type=int, help="extra near-surface vertices")
    rec.add_argument("--lr", dest="learning_rate", type=float)
    rec.add_argument("--max-iters", dest="max_iters", type=int)
    rec.add_argument("--plateau-tol", dest="plateau_tol", type=float)
    rec.add_argument("--plateau-window", dest="plateau_window", type=int)
    rec.add_argument("--settle-iters", dest="settle_iters", type=int)
    rec.add_argument("--seed", dest="rng_seed", type=int, default=0)
    rec.add_argument("--threads", type=int, default=1, help="recorded in the manifest; the pipeline is serial")
    rec.add_argument("--debug", action="store_true", help="assert Betti numbers after every refinement move")
    rec.add_argument("--no-diagram", dest="export_diagram", action="store_false")
    rec.add_argument("--no-trace", dest="export_trace", action="store_false")
    rec.add_argument("--export-complex", dest="export_complex", action="store_true")
    rec.add_argument("--config", help="JSON file whose keys override the flags above")

    dg = sub.add_parser("diagram", parents=[common], help="persistence diagram at given or initial parameters")
    dg.add_argument("--input")
    dg.add_argument("--preset", choices=sorted(PRESETS))
    dg.add_argument("--n-points", dest="n_points", type=int)
    dg.add_argument("--params", help="JSON with an 'alphas' array (default: isotropic init)")
    dg.add_argument("--dim", type=int, choices=(2, 3))
    dg.add_argument("--dims", type=int, nargs="*", help="homology dimensions to compute")
    dg.add_argument("--base-res", dest="base_res", type=int)
    dg.add_argument("--extra", dest="extra_samples", type=int)
    dg.add_argument("--seed", type=int, default=0)
    dg.add_argument("--out", help="output JSON path (default: stdout)")

    ev = sub.add_parser("evaluate", parents=[common], help="TFI and one-way Chamfer over matched meshes and clouds")
    ev.add_argument("--meshes", nargs="+", required=True)
    ev.add_argument("--clouds", nargs="+", required=True)
    ev.add_argument("--truth", required=True, help="JSON list of true Betti-number lists")
    ev.add_argument("--out", help="report path (default: stdout)")

    sy = sub.add_parser("synth", parents=[common], help="write a preset's synthetic cloud")
    sy.add_argument("--preset", choices=sorted(PRESETS), required=True)
    sy.add_argument("--n-points", dest="n_points", type=int)
    sy.add_argument("--seed", type=int, default=0)
    sy.add_argument("--out", required=True)
    sy.add_argument("--loss-out", dest="loss_out", help="also write the preset's loss spec here")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "reconstruct":
            return cmd_reconstruct(RunConfig.from_args(args))
        if args.command == "diagram":
            return cmd_diagram(args)
        if args.command == "evaluate":
            return cmd_evaluate(args)
        return cmd_synth(args)
    except (TopoReconError, FileNotFoundError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
