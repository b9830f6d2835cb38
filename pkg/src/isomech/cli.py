"""Command-line entry point: ``isomech {simulate,calibrate,evaluate,verify-truthfulness,report}``.

Exit codes: 0 success, 1 input/validation error, 2 I/O error, 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import time
from pathlib import Path

from isomech import __version__
from isomech.data import DatasetError, load_dataset, resolve_paths, write_dataset
from isomech.evaluation import EvaluationReport, build_report
from isomech.isotonic import TieMode
from isomech.mechanism import (
    MechanismOptions,
    Variant,
    WeightMode,
    run_mechanism,
    write_calibration,
    write_residuals,
)
from isomech.simulation import (
    ConfigError,
    SyntheticWorld,
    WorldConfig,
    gen_world,
    policy_from_config,
    run_paired_experiment,
)
from isomech.truthfulness import GuardError, UtilitySpec, verify_truthful

EXIT_OK, EXIT_INPUT, EXIT_IO, EXIT_INTERNAL = 0, 1, 2, 3


class InputError(Exception):
    pass


class OutputError(Exception):
    pass


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _read_json(path: str) -> dict:
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError:
        raise InputError(f"{path}: file not found") from None
    except OSError as e:
        raise OutputError(f"{path}: {e.strerror}") from None
    text = raw.decode("utf-8", errors="replace")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        offset = len(text[: e.pos].encode("utf-8"))
        raise InputError(f"{path}: malformed JSON at byte offset {offset}: {e.msg}") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top-level JSON value must be an object")
    return doc


def _prepare_out(out_dir: str, names: list[str], force: bool) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(f"cannot create output directory {out}: {e.strerror}") from None
    if not force:
        clash = [n for n in names if (out / n).exists()]
        if clash:
            raise OutputError(
                f"refusing to overwrite {', '.join(clash)} in {out}; pass --force"
            )
    probe = out / ".isomech-write-test"
    try:
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as e:
        raise OutputError(f"output directory {out} is not writable: {e.strerror}") from None
    return out


def _write_manifest(out: Path, name: str, command: str, config: dict, seed,
                    inputs: list[Path], outputs: list[Path], started: float) -> Path:
    manifest = {
        "tool": "isomech",
        "version": __version__,
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs] + [str(out / name)],
        "duration_seconds": round(time.perf_counter() - started, 6),
    }
    path = out / name
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def _parse_scale(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise InputError(f"--scale expects MIN,MAX, got {text!r}") from None
    return lo, hi


def _options(args, variant: Variant | None = None) -> MechanismOptions:
    try:
        return MechanismOptions(
            variant=variant or Variant(args.variant),
            tie_mode=TieMode(args.ties),
            weight_mode=WeightMode(args.weights),
            flag_threshold=args.flag_threshold,
        )
    except ValueError as e:
        raise InputError(str(e)) from None


def _split_config(doc: dict) -> tuple[WorldConfig, object]:
    doc = dict(doc)
    policy_doc = doc.pop("policy", None)
    try:
        return WorldConfig.from_dict(doc), policy_from_config(policy_doc)
    except (ConfigError, KeyError, TypeError, ValueError) as e:
        raise InputError(f"invalid config: {e}") from None


# --- commands -------------------------------------------------------------


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    doc = _read_json(args.config)
    doc["seed"] = args.seed
    cfg, policy = _split_config(doc)
    names = ["submissions.csv", "reviews.csv", "authorships.csv", "rankings.csv",
             "theta.csv", "manifest.json"]
    out = _prepare_out(args.out, names, args.force)
    world = gen_world(cfg, policy)
    try:
        written = write_dataset(world.dataset, out)
        theta_path = out / "theta.csv"
        with open(theta_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("paper_id", "theta"))
            for p, v in world.theta.items():
                w.writerow((p, repr(v)))
        written.append(theta_path)
        resolved = cfg.to_dict()
        resolved["policy"] = doc.get("policy")
        _write_manifest(out, "manifest.json", "simulate", resolved, args.seed,
                        [Path(args.config)], written, started)
    except OSError as e:
        raise OutputError(f"write failed: {e}") from None
    print(f"wrote {len(written) + 1} files to {out}", file=sys.stderr)
    return EXIT_OK


def _load(args):
    try:
        return load_dataset(args.data, _parse_scale(args.scale))
    except DatasetError as e:
        raise InputError(str(e)) from None


def cmd_calibrate(args) -> int:
    from isomech.data import partial_rankings

    started = time.perf_counter()
    options = _options(args)
    ds = _load(args)
    out = _prepare_out(args.out or args.data,
                       ["calibration.csv", "residuals.csv", "calibrate.manifest.json"], args.force)
    partial = partial_rankings(ds)
    for aid in partial:
        print(f"note: ranking of {aid} covers only part of their submissions", file=sys.stderr)
    result = run_mechanism(ds, options)
    try:
        outputs = [
            write_calibration(result, ds, out / "calibration.csv"),
            write_residuals(result, ds, out / "residuals.csv"),
        ]
        inputs = list(resolve_paths(args.data).values())
        _write_manifest(out, "calibrate.manifest.json", "calibrate",
                        {"mechanism": options.to_dict(), "scale": list(ds.scale),
                         "partial_rankings": partial}, None,
                        inputs, outputs, started)
    except OSError as e:
        raise OutputError(f"write failed: {e}") from None
    print(f"calibrated {len(ds.submissions)} papers; {len(result.flagged)} flagged",
          file=sys.stderr)
    return EXIT_OK


def load_theta(path: str) -> dict[str, float]:
    p = Path(path)
    if not p.exists():
        raise InputError(f"{p}: theta file not found")
    theta = {}
    with open(p, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["paper_id", "theta"]:
            raise InputError(f"{p}: expected header paper_id,theta")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise InputError(f"{p}, row {lineno}: expected 2 fields")
            try:
                v = float(row[1])
            except ValueError:
                raise InputError(f"{p}, row {lineno}: {row[1]!r} is not a number") from None
            if not math.isfinite(v):
                raise InputError(f"{p}, row {lineno}: theta must be finite")
            theta[row[0].strip()] = v
    return theta


FIGURE1_COLUMNS = ("ranking_length", "n_authors", "mse_raw", "mse_full", "mse_partition",
                   "mae_raw", "mae_full", "mae_partition")


def write_figure1(full: EvaluationReport, part: EvaluationReport, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FIGURE1_COLUMNS)
        for k in sorted(full.per_length):
            f, q = full.per_length[k], part.per_length[k]
            w.writerow([k, f["n_authors"], repr(f["mse_raw"]), repr(f["mse_modified"]),
                        repr(q["mse_modified"]), repr(f["mae_raw"]), repr(f["mae_modified"]),
                        repr(q["mae_modified"])])
    return path


def _paired_summary(full: EvaluationReport, part: EvaluationReport) -> dict:
    pairs = [
        (a["slope_mse"], b["slope_mse"])
        for a, b in zip(full.replications, part.replications)
        if a["slope_mse"] is not None and b["slope_mse"] is not None
    ]
    if not pairs:
        return {"n_pairs": 0, "frac_partition_slope_below_full": None}
    below = sum(1 for f, q in pairs if q < f)
    return {"n_pairs": len(pairs), "frac_partition_slope_below_full": below / len(pairs)}


def cmd_evaluate(args) -> int:
    started = time.perf_counter()
    base = dict(ties=args.ties, weights=args.weights, flag_threshold=args.flag_threshold)
    ns = argparse.Namespace(variant="full", **base)
    opts = [_options(ns, Variant.FULL), _options(ns, Variant.TOPIC_PARTITION)]
    names = ["report.json", "figure1.csv", "evaluate.manifest.json"]

    if args.config:
        if args.seed is None:
            raise InputError("--seed is required with --config")
        if args.reps < 1:
            raise InputError("--reps must be >= 1")
        doc = _read_json(args.config)
        doc["seed"] = args.seed
        cfg, policy = _split_config(doc)
        out = _prepare_out(args.out, names, args.force)
        full, part = run_paired_experiment(cfg, policy, opts, args.reps, args.jobs, args.regression)
        config = {"mode": "experiment", "world": cfg.to_dict(), "policy": doc.get("policy"),
                  "replications": args.reps}
        inputs = [Path(args.config)]
    else:
        if not args.data or not args.theta:
            raise InputError("evaluate needs either --config or both --data and --theta")
        theta = load_theta(args.theta)
        ds = _load(args)
        missing = [p for p in ds.submissions if p not in theta]
        if missing:
            raise InputError(f"{args.theta}: no theta for papers {', '.join(missing[:5])}")
        out = _prepare_out(args.out, names, args.force)
        world = SyntheticWorld(ds, theta)
        full, part = (build_report(world, run_mechanism(ds, o), o, args.regression) for o in opts)
        config = {"mode": "world", "scale": list(ds.scale)}
        inputs = list(resolve_paths(args.data).values()) + [Path(args.theta)]
        args.reps = 1

    config["mechanism"] = {k: v for k, v in opts[0].to_dict().items() if k != "variant"}
    config["regression_level"] = args.regression
    report = {
        "tool": "isomech",
        "version": __version__,
        "config": config,
        "variants": {"full": full.to_dict(), "partition": part.to_dict()},
        "paired": _paired_summary(full, part),
    }
    try:
        rp = out / "report.json"
        rp.write_text(json.dumps(report, indent=2, allow_nan=False) + "\n", encoding="utf-8")
        fp = write_figure1(full, part, out / "figure1.csv")
        manifest_cfg = dict(config, jobs=args.jobs)
        _write_manifest(out, "evaluate.manifest.json", "evaluate", manifest_cfg, args.seed,
                        inputs, [rp, fp], started)
    except OSError as e:
        raise OutputError(f"write failed: {e}") from None
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        theta = [float(v) for v in args.theta.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"--theta expects comma-separated numbers, got {args.theta!r}") from None
    if not theta:
        raise InputError("--theta is empty")
    try:
        utility = UtilitySpec.parse(args.utility)
        res = verify_truthful(theta, utility, args.noise, args.draws, args.seed,
                              dist=args.dist, knowledge_noise=args.knowledge_noise)
    except (GuardError, ValueError) as e:
        raise InputError(str(e)) from None
    config = {"theta": theta, "utility": str(utility), "noise": args.noise,
              "draws": args.draws, "seed": args.seed, "dist": args.dist,
              "knowledge_noise": args.knowledge_noise}
    print(json.dumps(res.to_dict(config), indent=2))
    return EXIT_OK


def cmd_report(args) -> int:
    doc = _read_json(args.input)
    try:
        variants = doc["variants"]
        full, part = variants["full"], variants["partition"]
    except (KeyError, TypeError):
        raise InputError(f"{args.input}: not an evaluate report") from None
    lines = []
    for name, rep in (("full", full), ("partition", part)):
        o = rep["overall"]
        lines.append(
            f"[{name}] overall MSE raw {o['mse_raw']:.4f} -> modified {o['mse_modified']:.4f}"
            f" ({_pct(o['mse_improvement_pct'])}); MAE raw {o['mae_raw']:.4f} ->"
            f" {o['mae_modified']:.4f} ({_pct(o['mae_improvement_pct'])})"
        )
        for metric in ("mse", "mae"):
            r = rep["regression"][metric]
            if r is None:
                lines.append(f"[{name}] {metric.upper()} regression: undefined")
            else:
                lines.append(
                    f"[{name}] {metric.upper()} % improvement vs submissions: slope"
                    f" {r['slope']:.3f} (p={r['p_value']:.3g}, n={r['n_points']})"
                )
    lines.append("")
    lines.append(f"{'len':>4} {'authors':>8} {'mse_raw':>8} {'mse_full':>8} {'mse_part':>8}"
                 f" {'mae_raw':>8} {'mae_full':>8} {'mae_part':>8}")
    for k, f in full["per_length"].items():
        q = part["per_length"][k]
        lines.append(
            f"{k:>4} {f['n_authors']:>8} {f['mse_raw']:>8.3f} {f['mse_modified']:>8.3f}"
            f" {q['mse_modified']:>8.3f} {f['mae_raw']:>8.3f} {f['mae_modified']:>8.3f}"
            f" {q['mae_modified']:>8.3f}"
        )
    print("\n".join(lines))
    return EXIT_OK


def _pct(v) -> str:
    return "n/a" if v is None else f"{v:.1f}% better"


def _add_mechanism_flags(p, with_variant: bool):
    if with_variant:
        p.add_argument("--variant", choices=["full", "partition"], default="full")
    p.add_argument("--ties", choices=["equality", "dominance"], default="equality")
    p.add_argument("--weights", choices=["unit", "reviews"], default="unit")
    p.add_argument("--flag-threshold", type=float, default=1.0)
    p.add_argument("--scale", default="1,10", help="review scale as MIN,MAX")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="isomech", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"isomech {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic review world")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="run the mechanism on a dataset directory")
    p.add_argument("--data", required=True)
    p.add_argument("--out")
    _add_mechanism_flags(p, with_variant=True)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="score both variants against latent quality")
    p.add_argument("--data")
    p.add_argument("--theta")
    p.add_argument("--config", help="world config; runs replicated synthetic experiments")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--regression", choices=["author", "group"], default="author")
    p.add_argument("--out", required=True)
    _add_mechanism_flags(p, with_variant=False)
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("verify-truthfulness", help="exhaustive truthfulness check")
    p.add_argument("--theta", required=True, help="comma-separated latent qualities")
    p.add_argument("--utility", default="power:2", help="power:<p> or accept:<t>")
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--draws", type=int, default=20000)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dist", choices=["gaussian", "laplace", "t3"], default="gaussian")
    p.add_argument("--knowledge-noise", type=float, default=0.0)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="print an evaluate report.json as text")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except OutputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except Exception as e:  # noqa: BLE001
        print(f"internal error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
