"""Command-line entry point: ``bevdet {gen,infer,eval,bench,check}``.

Set ``BEVDET_COLOR=1`` to force colored pass/fail markers, ``0`` to disable
them; by default they are colored only on a terminal.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from . import io
from .checks import REGISTRY, run_checks
from .config import PipelineConfig, load_config, substream_seed
from .errors import BevDetError
from .geometry import corrupted_inverse
from .metrics import TP_METRICS, evaluate, nds
from .scenegen import generate_scene
from .view_transform import BevGrid, PointFeatureCloud, splat_naive, splat_sorted

MANIFEST = "manifest.json"
GROUND_TRUTH = "ground_truth.json"


def _color_enabled(stream) -> bool:
    flag = os.environ.get("BEVDET_COLOR")
    if flag is not None:
        return flag.strip().lower() not in ("0", "false", "no", "off", "")
    return hasattr(stream, "isatty") and stream.isatty()


def _mark(ok: bool) -> str:
    text = "PASS" if ok else "FAIL"
    if _color_enabled(sys.stdout):
        return f"\033[{32 if ok else 31}m{text}\033[0m"
    return text


def _config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _pool(jobs: int):
    return ProcessPoolExecutor(max_workers=jobs) if jobs > 1 else None


# -- gen ---------------------------------------------------------------


def _gen_one(task: tuple[PipelineConfig, int, str]) -> tuple[int, io.SceneSample]:
    cfg, i, _ = task
    sid = f"{i:06d}"
    return i, generate_scene(cfg.scene, substream_seed(cfg.seed, "scenegen", i), sample_id=sid)


def cmd_gen(cfg: PipelineConfig, n_samples: int, out_dir: Path, jobs: int = 1) -> dict[str, Any]:
    """Write `n_samples` scenes, their ground truth and a manifest into `out_dir`."""
    if n_samples < 0:
        raise BevDetError("number of samples must be non-negative")
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create {out_dir}: {e.strerror or e}") from e
    tasks = [(cfg, i, str(out_dir)) for i in range(n_samples)]
    pool = _pool(jobs)
    scenes = dict(pool.map(_gen_one, tasks) if pool else map(_gen_one, tasks))
    if pool:
        pool.shutdown()
    files, gts = [], {}
    for i in sorted(scenes):
        s = scenes[i]
        files.append(io.save_scene(out_dir / f"scene-{s.sample_id}.json", s))
        gts[s.sample_id] = s.boxes
    files.append(io.save_boxes(out_dir / GROUND_TRUTH, gts, kind="ground_truth"))
    manifest = io.make_manifest(cfg.hash(), cfg.seed, files, out_dir, {"n_samples": n_samples, "preset": cfg.preset})
    io.write_json(out_dir / MANIFEST, manifest)
    return manifest


# -- infer ---------------------------------------------------------------


def scene_paths(inputs: Sequence[str]) -> list[Path]:
    """Expand directories (via their manifest, else scene-*.json) and manifests to scene files."""
    out: list[Path] = []
    for raw in inputs:
        p = Path(raw)
        if p.is_dir():
            if (p / MANIFEST).exists():
                p = p / MANIFEST
            else:
                out.extend(sorted(p.glob("scene-*.json")))
                continue
        if p.name == MANIFEST:
            man = io.load_manifest(p)
            out.extend(p.parent / f["path"] for f in man["files"] if Path(f["path"]).name.startswith("scene-"))
        else:
            out.append(p)
    return out


def _infer_one(task: tuple[PipelineConfig, int, str]) -> tuple[str, list]:
    from .pipeline import infer

    cfg, index, path = task
    scene = io.load_scene(path)
    return scene.sample_id, infer(scene, cfg, index)


def cmd_infer(cfg: PipelineConfig, scenes: Sequence[Path], out: Optional[Path], jobs: int = 1) -> dict[str, list]:
    """Run the pipeline over scene files; sample `k` of the list uses augmentation index `k`."""
    tasks = [(cfg, k, str(p)) for k, p in enumerate(scenes)]
    pool = _pool(jobs)
    pairs = list(pool.map(_infer_one, tasks) if pool else map(_infer_one, tasks))
    if pool:
        pool.shutdown()
    results: dict[str, list] = {}
    for sid, dets in pairs:
        if sid in results:
            raise BevDetError(f"duplicate sample id {sid!r} among the input scenes")
        results[sid] = dets
    if out is not None:
        io.save_boxes(out, results, kind="detections")
    return results


# -- eval ---------------------------------------------------------------


def _fmt_table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    cells = [[str(h) for h in header]] + [[f"{v:.4f}" if isinstance(v, float) else str(v) for v in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def cmd_eval_nds(rows_path: Path) -> list[dict[str, Any]]:
    """NDS recomputed from precomputed (mAP, mATE, mASE, mAOE, mAVE, mAAE) rows."""
    out = []
    for r in io.load_indicator_rows(rows_path):
        value = nds(float(r["mAP"]), [float(r[k]) for k in io.INDICATOR_KEYS[1:]])
        row = {"name": r.get("name", ""), "NDS": value}
        if "NDS" in r:
            row["reported_NDS"] = float(r["NDS"])
        out.append(row)
    return out


def id_mismatch(preds: dict, gts: dict) -> tuple[list[str], list[str]]:
    """(ground-truth ids without predictions, prediction ids without ground truth)."""
    return sorted(set(gts) - set(preds)), sorted(set(preds) - set(gts))


def cmd_eval(cfg: PipelineConfig, preds_path: Path, gts_path: Path):
    preds = io.load_boxes(preds_path, kind="detections")
    gts = io.load_boxes(gts_path, kind="ground_truth")
    missing, extra = id_mismatch(preds, gts)
    if missing or extra:
        return None, missing, extra
    classes = range(cfg.num_classes)
    return evaluate(preds, gts, cfg.metrics, classes), [], []


# -- bench ---------------------------------------------------------------


def bench_kernels(counts: Sequence[int], seed: int = 0, grid: BevGrid = BevGrid(), channels: int = 8, repeat: int = 1) -> list[dict[str, Any]]:
    """Time both splat kernels on random in-ROI clouds; best of `repeat` runs."""
    if any(n < 1 for n in counts):
        raise BevDetError("point counts must be >= 1")
    rows = []
    rng = np.random.default_rng(seed)
    for n in counts:
        pos = np.column_stack(
            [
                rng.uniform(grid.x_min, grid.x_max, n),
                rng.uniform(grid.y_min, grid.y_max, n),
                rng.uniform(grid.z_min, grid.z_max, n),
            ]
        )
        cloud = PointFeatureCloud(pos, rng.standard_normal((n, channels)), rng.uniform(0, 1, n))
        timings, outputs = {}, {}
        for name, fn in (("naive", splat_naive), ("sorted", splat_sorted)):
            best = float("inf")
            for _ in range(repeat):
                t0 = time.perf_counter_ns()
                outputs[name] = fn(cloud, grid).data
                best = min(best, time.perf_counter_ns() - t0)
            timings[name] = int(best)
        ref = outputs["naive"]
        err = float(np.max(np.abs(outputs["sorted"] - ref) / np.maximum(np.abs(ref), 1e-12)))
        speedup = timings["naive"] / max(timings["sorted"], 1)
        for name in ("naive", "sorted"):
            rows.append({"kernel": name, "count": int(n), "ns": timings[name], "max_error": err, "speedup": speedup if name == "sorted" else 1.0})
    return rows


# -- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML pipeline config (defaults built in)")
    common.add_argument("--seed", type=int, help="root seed, overrides the config")
    common.add_argument("--jobs", type=int, default=1, help="worker processes over samples")

    p = argparse.ArgumentParser(prog="bevdet", description="Camera BEV detection core on synthetic scenes.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", parents=[common], help="generate synthetic scenes and a manifest")
    g.add_argument("-n", "--n-samples", type=int, default=10)
    g.add_argument("--out", required=True, help="output directory")

    i = sub.add_parser("infer", parents=[common], help="run the pipeline on scene files")
    i.add_argument("scenes", nargs="+", help="scene files, scene directories or manifests")
    i.add_argument("--out", help="detections JSON (default: print a summary only)")

    e = sub.add_parser("eval", parents=[common], help="score detections against ground truth")
    e.add_argument("inputs", nargs="+", help="PREDS GTS, or one indicator-rows file with --nds-only")
    e.add_argument("--nds-only", action="store_true", help="recompute NDS from precomputed indicator rows")
    e.add_argument("--out", help="result JSON")

    b = sub.add_parser("bench", parents=[common], help="time the two splat kernels")
    b.add_argument("--counts", type=int, nargs="+", default=[100, 10_000, 1_000_000])
    b.add_argument("--repeat", type=int, default=1)
    b.add_argument("--out", help="report JSON")

    c = sub.add_parser("check", parents=[common], help="run the seeded invariant suite")
    c.add_argument("--trials", type=int, default=100)
    c.add_argument("--only", nargs="+", metavar="NAME", help="restrict to these invariants")
    c.add_argument("--list", action="store_true", help="list invariants and exit")
    c.add_argument("--out", help="report JSON")
    c.add_argument("--corrupt-inverse", action="store_true", help=argparse.SUPPRESS)
    return p


def _run(args: argparse.Namespace) -> int:
    if args.jobs < 1:
        raise BevDetError("--jobs must be >= 1")
    cfg = _config(args)
    if args.command == "gen":
        man = cmd_gen(cfg, args.n_samples, Path(args.out), args.jobs)
        print(f"wrote {args.n_samples} scenes to {args.out} (manifest {io.manifest_hash(man)[:16]})")
        return 0

    if args.command == "infer":
        paths = scene_paths(args.scenes)
        res = cmd_infer(cfg, paths, Path(args.out) if args.out else None, args.jobs)
        for sid in sorted(res):
            print(f"{sid}: {len(res[sid])} detections")
        return 0

    if args.command == "eval":
        if args.nds_only:
            if len(args.inputs) != 1:
                raise BevDetError("--nds-only takes exactly one indicator-rows file")
            rows = cmd_eval_nds(Path(args.inputs[0]))
            print(_fmt_table(["name", "NDS", "reported"], [[r["name"], r["NDS"], r.get("reported_NDS", "-")] for r in rows]))
            if args.out:
                io.write_json(args.out, {"format_version": io.FORMAT_VERSION, "kind": "nds_rows", "rows": rows})
            return 0
        if len(args.inputs) != 2:
            raise BevDetError("eval takes PREDS and GTS files")
        result, missing, extra = cmd_eval(cfg, Path(args.inputs[0]), Path(args.inputs[1]))
        if result is None:
            if missing:
                print(f"error: no predictions for sample ids: {', '.join(missing)}", file=sys.stderr)
            if extra:
                print(f"error: predictions for unknown sample ids: {', '.join(extra)}", file=sys.stderr)
            return 3
        names = cfg.class_names
        rows = [[names[c]] + [result.class_ap[c][t] for t in cfg.metrics.dist_thresholds] for c in sorted(result.class_ap)]
        print(_fmt_table(["class"] + [f"AP@{t:g}" for t in cfg.metrics.dist_thresholds], rows))
        print(f"mAP {result.mean_ap:.4f}  NDS {result.nds:.4f}  " + "  ".join(f"{k} {result.tp[k]:.4f}" for k in TP_METRICS))
        if args.out:
            doc = {"format_version": io.FORMAT_VERSION, "kind": "eval_result", "config_hash": cfg.hash(), **result.to_dict(names)}
            io.write_json(args.out, doc)
        return 0

    if args.command == "bench":
        rows = bench_kernels(args.counts, cfg.seed, cfg.grid, repeat=args.repeat)
        print(_fmt_table(["kernel", "count", "ns", "max_error", "speedup"], [[r["kernel"], r["count"], r["ns"], f"{r['max_error']:.2e}", r["speedup"]] for r in rows]))
        doc = {"format_version": io.FORMAT_VERSION, "kind": "bench", "rows": rows}
        if args.out:
            io.write_json(args.out, doc)
        else:
            print(json.dumps(doc, sort_keys=True))
        return 0

    if args.command == "check":
        if args.list:
            for c in REGISTRY:
                print(f"{c.module}.{c.name}")
            return 0
        known = {c.name for c in REGISTRY}
        unknown = sorted(set(args.only or ()) - known)
        if unknown:
            raise BevDetError(f"unknown invariant(s): {', '.join(unknown)}")
        if args.corrupt_inverse:
            with corrupted_inverse():
                results = run_checks(cfg, cfg.seed, args.trials, args.only)
        else:
            results = run_checks(cfg, cfg.seed, args.trials, args.only)
        for r in results:
            line = f"{_mark(r.ok)} {r.module}.{r.name} ({r.trials} trials)"
            if not r.ok:
                seed, msg = r.failures[0]
                line += f": {len(r.failures)} failed; first at seed {seed}: {msg}"
            print(line)
        if args.out:
            io.write_json(
                args.out,
                {
                    "format_version": io.FORMAT_VERSION,
                    "kind": "check_report",
                    "config_hash": cfg.hash(),
                    "seed": cfg.seed,
                    "results": [{"name": r.name, "module": r.module, "trials": r.trials, "failures": [list(f) for f in r.failures]} for r in results],
                },
            )
        return 0 if all(r.ok for r in results) else 1
    raise AssertionError(args.command)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _run(args)
    except BevDetError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
