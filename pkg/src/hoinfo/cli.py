"""Command-line entry point: ``hoinfo views|rank|check-cnn|bench``.

Exit status is 0 only when nothing failed and no defects were recorded,
1 when artifacts were written but contain defects, 2 on errors.
"""

from __future__ import annotations

import argparse
import datetime
import glob
import os
import sys
import time
from pathlib import Path

from . import __version__, bench, brainnet, groups
from .core import (Estimator, EstimatorConfig, content_digest, load_timeseries, read_tensor,
                   write_manifest, write_matrix_csv, write_tensor)
from .errors import DefectThresholdExceeded, HoiError, InputError
from .views import build_order_view, build_pairwise_view, sparsify_top_fraction

EXIT_OK, EXIT_DEFECTS, EXIT_ERROR = 0, 1, 2

VIEW_NAMES = {2: "v1", 3: "v2", 4: "v3"}


def _workers(flag: int | None, default: int) -> int:
    if flag is not None:
        return flag
    env = os.environ.get("HOI_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise InputError(f"HOI_WORKERS must be an integer, got {env!r}") from None
    return default


def _available_cpus() -> int:
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:
        return os.cpu_count() or 1


def _bandwidth(text: str):
    if text == "median":
        return "median"
    try:
        return float(text)
    except ValueError:
        raise InputError(f"--sigma must be 'median' or a number, got {text!r}") from None


def _config(args) -> EstimatorConfig:
    return EstimatorConfig(
        estimator=args.estimator, alpha=args.alpha, bandwidth=_bandwidth(args.sigma),
        probes=args.probes, master_seed=args.seed, ridge=args.ridge,
        standardize=args.standardize)


def _orders(text: str) -> list[int]:
    try:
        orders = sorted({int(s) for s in text.split(",") if s.strip()})
    except ValueError:
        raise InputError(f"--orders must be a comma list drawn from 2,3,4, got {text!r}") from None
    if not orders or any(o not in (2, 3, 4) for o in orders):
        raise InputError(f"--orders must be a comma list drawn from 2,3,4, got {text!r}")
    return orders


def _claim(paths: list[Path], force: bool) -> None:
    existing = [str(p) for p in paths if p.exists()]
    if existing and not force:
        raise InputError(f"refusing to overwrite {', '.join(existing)} (use --force)")
    for p in paths:
        p.parent.mkdir(parents=True, exist_ok=True)


def _now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _defect_summary(defects, limit=5) -> str:
    head = "; ".join(f"{d.tuple}: {d.message}" for d in defects[:limit])
    more = f" (+{len(defects) - limit} more)" if len(defects) > limit else ""
    return head + more


def cmd_views(args) -> int:
    cfg = _config(args)
    orders = _orders(args.orders)
    if not 0 < args.threshold <= 1:
        raise InputError(f"--threshold must lie in (0, 1], got {args.threshold}")
    out = Path(args.out)
    targets = []
    for o in orders:
        if o == 2:
            targets += [out / "v1_raw.csv", out / "v1_thresholded.csv"]
        else:
            targets.append(out / f"{VIEW_NAMES[o]}.hoit")
    _claim(targets + [t.with_name(t.name + ".json") for t in targets], args.force)

    input_path = Path(args.input)
    x = load_timeseries(input_path, args.format, args.manifest)
    raw = input_path.read_bytes()
    if args.format == "raw":
        meta = Path(args.manifest) if args.manifest else input_path.with_name(input_path.name + ".json")
        raw += meta.read_bytes()
    workers = _workers(args.workers, _available_cpus())
    base = {
        "command": ["hoinfo"] + list(args.argv),
        "flags": {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "argv")},
        "seed": cfg.master_seed,
        "input": {"path": str(input_path), "format": args.format, "digest": content_digest(raw),
                  "digest_algorithm": "blake2b-64", "channels": x.num_channels,
                  "timepoints": x.num_timepoints},
        "estimator": cfg.to_dict(),
        "estimator_tag": cfg.tag,
        "workers": workers,
        "version": __version__,
    }
    total_defects = 0
    for o in orders:
        started, t0 = _now(), time.perf_counter()
        if o == 2:
            m = build_pairwise_view(x, cfg, workers=workers)
            thr = sparsify_top_fraction(m, args.threshold)
            seconds = time.perf_counter() - t0
            labels = list(x.labels) if x.labels else None
            defects = [{"tuple": d.tuple, "message": d.message} for d in m.defects]
            for name, mat, extra in (("v1_raw.csv", m, {}),
                                     ("v1_thresholded.csv", thr, {"threshold": args.threshold,
                                                                  "kept_pairs": thr.nonzero_pairs()})):
                path = out / name
                write_matrix_csv(mat, path, labels)
                write_manifest(path.with_name(name + ".json"), {
                    **base, "artifact": name, "order": 2, "defects": defects, **extra,
                    "wall_clock": {"started": started, "seconds": seconds}})
            n_def = len(m.defects)
        else:
            try:
                tensor = build_order_view(x, o, cfg, workers=workers)
                failed = None
            except DefectThresholdExceeded as exc:
                tensor, failed = exc.result, str(exc)
            seconds = time.perf_counter() - t0
            path = out / f"{VIEW_NAMES[o]}.hoit"
            write_tensor(tensor, path)
            write_manifest(path.with_name(path.name + ".json"), {
                **base, "artifact": path.name, "order": o, "entries": len(tensor),
                "defects": [{"tuple": d.tuple, "message": d.message} for d in tensor.defects],
                "failed": failed, "wall_clock": {"started": started, "seconds": seconds}})
            n_def = len(tensor.defects)
            if failed:
                print(f"error: order {o}: {failed}", file=sys.stderr)
                return EXIT_ERROR
        if n_def:
            listed = m.defects if o == 2 else tensor.defects
            print(f"order {o}: {n_def} defect(s): {_defect_summary(listed)}", file=sys.stderr)
        total_defects += n_def
        print(f"order {o}: done in {seconds:.2f}s")
    return EXIT_DEFECTS if total_defects else EXIT_OK


def _expand(pattern: str) -> list[Path]:
    paths = sorted(Path(p) for p in glob.glob(pattern))
    if not paths:
        raise InputError(f"glob {pattern!r} matched no files")
    return paths


def _top_path(path: Path, k: int) -> Path:
    return path.with_name(f"{path.stem}.top{k}{path.suffix or '.csv'}")


def cmd_rank(args) -> int:
    files_a, files_b = _expand(args.group_a), _expand(args.group_b)
    out = Path(args.out)
    top_out = _top_path(out, args.top)
    targets = [out, top_out]
    _claim(targets + [t.with_name(t.name + ".json") for t in targets], args.force)
    contrast = groups.group_contrast([read_tensor(p) for p in files_a], [read_tensor(p) for p in files_b])
    top = groups.top_k_by_delta(contrast, args.top, args.mode)
    groups.write_report(contrast, out)
    groups.write_report(top, top_out)
    base = {
        "command": ["hoinfo"] + list(args.argv),
        "flags": {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "argv")},
        "group_a": [{"path": str(p), "digest": content_digest(p.read_bytes())} for p in files_a],
        "group_b": [{"path": str(p), "digest": content_digest(p.read_bytes())} for p in files_b],
        "digest_algorithm": "blake2b-64", "order": contrast.order, "channels": contrast.num_channels,
        "tuples": len(contrast), "excluded": contrast.excluded, "warnings": list(contrast.warnings),
        "version": __version__, "created": _now(),
    }
    write_manifest(out.with_name(out.name + ".json"), {**base, "artifact": out.name})
    write_manifest(top_out.with_name(top_out.name + ".json"),
                   {**base, "artifact": top_out.name, "top": args.top, "mode": args.mode})
    for i, rec in enumerate(top, 1):
        print(f"{i:>3}  {', '.join(map(str, rec.tuple)):<20} {rec.render()}")
    if contrast.excluded:
        print(f"{len(contrast.excluded)} tuple(s) excluded (missing in some subject)", file=sys.stderr)
        return EXIT_DEFECTS
    return EXIT_OK


def cmd_check_cnn(args) -> int:
    sizes = (3, 4, 5) if args.c is None else (args.c,)
    for c in sizes:
        if c > brainnet.MAX_DENSE_CHANNELS:
            raise InputError(f"--c {c} exceeds the dense reference bound C <= {brainnet.MAX_DENSE_CHANNELS}")
    results = brainnet.run_checks(sizes, seed=args.seed)
    for name, ok in results:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return EXIT_OK if all(ok for _, ok in results) else EXIT_DEFECTS


def cmd_bench(args) -> int:
    cfg = _config(args)
    names = [s.strip() for s in args.estimators.split(",") if s.strip()]
    try:
        ests = [Estimator(n) for n in names]
    except ValueError as exc:
        raise InputError(str(exc)) from None
    targets = [Path(args.out)] if args.out else []
    _claim(targets, args.force)
    report = bench.run_benchmark(args.c, args.t, args.k, ests, cfg,
                                 structure=bench.parse_structure(args.structure),
                                 workers=_workers(args.workers, 1))
    report.config["command"] = ["hoinfo"] + list(args.argv)
    print(report.table())
    if args.out:
        Path(args.out).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_DEFECTS if any(e.defects for e in report.per_estimator) else EXIT_OK


def _estimator_flags(p: argparse.ArgumentParser, probes_default=30) -> None:
    p.add_argument("--estimator", default="gaussian", choices=[e.value for e in Estimator])
    p.add_argument("--alpha", type=float, default=2.0, help="Renyi order (integer >= 2 for renyi-randomized)")
    p.add_argument("--sigma", default="median", help="kernel bandwidth: 'median' or a positive number")
    p.add_argument("--probes", type=int, default=probes_default, help="Hutchinson probe count")
    p.add_argument("--seed", type=int, default=0, help="master seed for probe streams / synthetic data")
    p.add_argument("--ridge", type=float, default=1e-10, help="covariance ridge (fraction of trace/K)")
    std = p.add_mutually_exclusive_group()
    std.add_argument("--standardize", dest="standardize", action="store_true", default=None)
    std.add_argument("--no-standardize", dest="standardize", action="store_false")
    p.add_argument("--workers", type=int, default=None, help="worker threads (fallback: $HOI_WORKERS)")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hoinfo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hoinfo {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("views", help="build V1 (pairwise MI) and V2/V3 (O-information tensors)")
    p.add_argument("--input", required=True)
    p.add_argument("--format", default="csv", choices=["csv", "raw"])
    p.add_argument("--manifest", default=None, help="sidecar JSON for --format raw (default: INPUT.json)")
    p.add_argument("--orders", default="2,3,4")
    p.add_argument("--threshold", type=float, default=0.30, help="fraction of V1 pairs kept")
    p.add_argument("--out", required=True)
    _estimator_flags(p)
    p.set_defaults(func=cmd_views)

    p = sub.add_parser("rank", help="group contrast and top-k tuples by mean delta")
    p.add_argument("--group-a", required=True, help="glob of HOIT files for group A")
    p.add_argument("--group-b", required=True, help="glob of HOIT files for group B")
    p.add_argument("--top", type=int, default=5)
    p.add_argument("--mode", default="abs", choices=["abs", "pos", "neg", "positive", "negative"])
    p.add_argument("--out", required=True, help="full contrast CSV; top-k goes to OUT_STEM.topK.csv")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("check-cnn", help="run Brain4DCNN oracle and symmetry checks")
    p.add_argument("--c", type=int, default=None, help=f"single channel count (<= {brainnet.MAX_DENSE_CHANNELS})")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check_cnn)

    p = sub.add_parser("bench", help="time the estimators over one tuple sweep")
    p.add_argument("--c", type=int, default=30)
    p.add_argument("--t", type=int, default=150)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--estimators", default="gaussian,renyi-randomized,renyi-exact")
    p.add_argument("--structure", default="white", help="white | ar1:PHI | blockcorr:RHO:SIZE[:NBLOCKS]")
    p.add_argument("--out", default=None, help="JSON report path")
    _estimator_flags(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    try:
        return args.func(args)
    except HoiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
