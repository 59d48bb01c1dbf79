"""
Experiment harness: dataset generation, reconstruction sweeps, evaluation,
the exact-recovery and noise-rate experiments, and ghost analysis.

Every handler takes the parsed command-line namespace.
"""
from dataclasses import fields, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple
import csv
import hashlib
import json
import logging
import math

import numpy as np

import env
from modules.analysis.index import direction_report, ghost_report
from modules.datagen.config import get_dataset_config
from modules.datagen.index import (
    DatasetSpec, far_pair_spec, rejection_sample_dataset, single_particle_spec, thin_dataset,
)
from modules.datagen.storage import load_dataset, save_dataset
from modules.experiments.config import ExperimentConfig, build_config, config_hash, load_config_file
from modules.experiments.pipeline import InstanceJob, reconstruct_instance
from modules.experiments.placement import place_directions
from modules.experiments.results import ResultWriter, read_results
from modules.geometry.index import TimeGrid
from modules.reports.export import blob_plot_svg, export_table_to_pdf, line_plot_svg
from scheduler.pool import run_jobs
from shared.constants.command_register import (
    COMMAND_EXP_EXACT, COMMAND_EXP_NOISE, COMMAND_RECONSTRUCT, METHOD_REDUCED, METHOD_STATIC, STATUS_OK,
)
from shared.constants.defaults import FULL_DATASET_COUNT

logger = logging.getLogger(__name__)

DATASET_BALANCED = "balanced"
DATASET_FAR_PAIR = "far-pair"
DATASET_SINGLE = "single"
DATASET_KINDS = (DATASET_BALANCED, DATASET_FAR_PAIR, DATASET_SINGLE)

SUMMARY_COLUMNS = ["method", "delta", "instances", "failed", "matched_rate", "mean_uw", "median_runtime_ms",
                   "converged_rate"]
EXACT_COLUMNS = ["K", "method", "bin_lower", "bin_upper", "instances", "correct", "rate"]
GROUP_COLUMNS = ["K", "both", "only_static", "only_reduced", "neither"]
NOISE_COLUMNS = ["delta", "alpha", "instances", "mean_uw", "std_uw"]

# Lower end of the pooled separation range reported by the exact experiment
POOLED_SEPARATION_MIN = 0.06


def experiment_from_args(args) -> ExperimentConfig:
    """Defaults < config file (--config) < flags"""
    file_values = load_config_file(args.config) if getattr(args, 'config', None) else {}
    flag_values = {f.name: getattr(args, f.name) for f in fields(ExperimentConfig) if hasattr(args, f.name)}
    return build_config(file_values, flag_values)


def _output_dir(config: ExperimentConfig) -> Path:
    path = Path(config.output_dir or env.OUTPUT_DIR)
    path.mkdir(parents=True, exist_ok=True)
    return path


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def make_dataset_spec(kind: str, K: int, count: int, seed: int, n_min: Optional[int] = None,
                      n_max: Optional[int] = None) -> DatasetSpec:
    times = TimeGrid.from_k(K).measurement_times
    if kind == DATASET_BALANCED:
        defaults = get_dataset_config()
        return DatasetSpec(count=count, times=times, seed=seed,
                           n_min=defaults["n_min"] if n_min is None else n_min,
                           n_max=defaults["n_max"] if n_max is None else n_max)
    if kind == DATASET_FAR_PAIR:
        return far_pair_spec(count, times, seed)
    if kind == DATASET_SINGLE:
        return single_particle_spec(count, times, seed)
    raise ValueError(f"unknown dataset kind {kind!r}, expected one of {DATASET_KINDS}")


def generate_dataset(spec: DatasetSpec, path) -> Path:
    if spec.count >= FULL_DATASET_COUNT:
        logger.warning(f"Generating a full-scale dataset of {spec.count} configurations")
    configs = rejection_sample_dataset(spec)
    return save_dataset(path, spec, configs)


def _dataset_or_generate(config: ExperimentConfig, kind: str, K: int, stem: str) -> Path:
    if config.dataset:
        return Path(config.dataset)
    spec = make_dataset_spec(kind, K, config.count, config.seed)
    path = _output_dir(config) / "datasets" / f"{stem}_K{K}_n{config.count}_s{config.seed}.jsonl"
    if path.exists() and load_dataset(path)[0] == spec:
        logger.info(f"Reusing dataset {path}")
        return path
    return generate_dataset(spec, path)


def run_sweep(config: ExperimentConfig, configs: Sequence, times: Sequence[float], methods: Sequence[str],
              deltas: Sequence[float], results_path, run_hash: str, command: str,
              instance_ids: Optional[Sequence[int]] = None) -> List[dict]:
    """
    Reconstruct every (instance, method, delta) and write one row each.

    Returns the rows of this sweep, including rows skipped on resume (read
    back from the results file).
    """
    ids = list(range(len(configs))) if instance_ids is None else list(instance_ids)
    with ResultWriter(results_path, run_hash) as writer:
        writer.register_run(command, json.dumps(config.to_dict(), sort_keys=True))
        jobs = []
        for delta_index, delta in enumerate(deltas):
            for method in methods:
                done = writer.completed(method, delta) if config.resume else set()
                if done:
                    logger.warning(f"Resuming: skipping {len(done)} completed instances for {method}, delta={delta}")
                jobs.extend(
                    InstanceJob(config, run_hash, i, configs[i], tuple(times), float(delta), delta_index, method)
                    for i in ids if i not in done
                )
        run_jobs(reconstruct_instance, jobs, on_result=writer.write, workers=config.workers)
    if not Path(results_path).exists():
        return []
    wanted = set(ids)
    return [
        row for row in read_results(results_path)
        if row["config_hash"] == run_hash and row["instance_id"] in wanted
        and row["method"] in methods and row["delta"] in {float(d) for d in deltas}
    ]


def _write_csv(path, columns: Sequence[str], rows: Sequence[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='') as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), extrasaction='ignore')
        writer.writeheader()
        writer.writerows(rows)
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path


def cmd_generate(args) -> Path:
    spec = make_dataset_spec(args.kind, args.K, args.count, args.seed, args.n_min, args.n_max)
    path = Path(args.output) if args.output else \
        Path(env.OUTPUT_DIR) / "datasets" / f"{args.kind}_K{args.K}_n{args.count}_s{args.seed}.jsonl"
    return generate_dataset(spec, path)


def cmd_reconstruct(args) -> Path:
    config = experiment_from_args(args)
    if not config.dataset:
        raise ValueError("reconstruct needs a dataset file (--dataset)")
    if config.method == METHOD_STATIC and (config.n_directions is not None or config.n_extra is not None):
        logger.warning("The static method reconstructs a single snapshot; direction and extra-time flags are ignored")
    spec, configs = load_dataset(config.dataset)
    run_hash = config_hash(config, file_digest(config.dataset))
    path = _output_dir(config) / f"reconstruct_{config.method}_{run_hash[:12]}.csv"
    rows = run_sweep(config, configs, spec.times, [config.method], config.deltas, path, run_hash,
                     COMMAND_RECONSTRUCT)
    logger.info(f"Reconstructed {len(configs)} instances ({len(rows)} rows) into {path}")
    return path


def summarize(rows: Sequence[dict]) -> List[dict]:
    """Per (method, delta) aggregates; failed rows count as unmatched"""
    groups: Dict[Tuple[str, float], List[dict]] = {}
    for row in rows:
        groups.setdefault((row["method"], row["delta"]), []).append(row)
    summary = []
    for (method, delta), group in sorted(groups.items()):
        ok = [row for row in group if row["status"] == STATUS_OK]
        uw = [row["uw"] for row in ok if math.isfinite(row["uw"])]
        summary.append({
            "method": method,
            "delta": delta,
            "instances": len(group),
            "failed": len(group) - len(ok),
            "matched_rate": sum(row["matched"] for row in ok) / len(group),
            "mean_uw": float(np.mean(uw)) if uw else math.nan,
            "median_runtime_ms": float(np.median([row["runtime_ms"] for row in ok])) if ok else math.nan,
            "converged_rate": sum(row["converged"] for row in ok) / len(group),
        })
    return summary


def cmd_evaluate(args) -> List[dict]:
    path = Path(args.results)
    rows = read_results(path)
    summary = summarize(rows)
    stem = path.with_suffix("")
    _write_csv(f"{stem}_summary.csv", SUMMARY_COLUMNS, summary)
    export_table_to_pdf(f"{stem}_summary.pdf", "Reconstruction summary", SUMMARY_COLUMNS, summary,
                        notes=[f"Source: {path.name}", f"Rows: {len(rows)}"])
    return summary


def separation_rates(rows: Sequence[dict], bin_width: float, sep_max: float) -> List[dict]:
    """Correct-reconstruction rate per method and separation bin on [0, sep_max]"""
    edges = np.arange(0.0, sep_max + 0.5 * bin_width, bin_width)
    rates = []
    for method in sorted({row["method"] for row in rows}):
        method_rows = [row for row in rows if row["method"] == method]
        for lo, hi in zip(edges[:-1], edges[1:]):
            last = hi >= edges[-1] - 1e-12
            in_bin = [
                row for row in method_rows
                if lo <= row["dynamic_separation"] < hi or (last and row["dynamic_separation"] == hi)
            ]
            correct = sum(1 for row in in_bin if row["status"] == STATUS_OK and row["matched"])
            rates.append({
                "method": method,
                "bin_lower": float(lo),
                "bin_upper": float(hi),
                "instances": len(in_bin),
                "correct": correct,
                "rate": correct / len(in_bin) if in_bin else math.nan,
            })
    return rates


def group_counts(rows: Sequence[dict]) -> dict:
    """Instances reconstructed correctly by both, only one, or neither of static and reduced"""
    correct = {METHOD_STATIC: set(), METHOD_REDUCED: set()}
    seen = {METHOD_STATIC: set(), METHOD_REDUCED: set()}
    for row in rows:
        if row["method"] in correct:
            seen[row["method"]].add(row["instance_id"])
            if row["status"] == STATUS_OK and row["matched"]:
                correct[row["method"]].add(row["instance_id"])
    ids = seen[METHOD_STATIC] & seen[METHOD_REDUCED]
    s, r = correct[METHOD_STATIC] & ids, correct[METHOD_REDUCED] & ids
    return {
        "both": len(s & r),
        "only_static": len(s - r),
        "only_reduced": len(r - s),
        "neither": len(ids - s - r),
    }


def pooled_rate(rows: Sequence[dict], method: str, sep_min: float = POOLED_SEPARATION_MIN) -> float:
    pool = [row for row in rows if row["method"] == method and row["dynamic_separation"] >= sep_min]
    if not pool:
        return math.nan
    return sum(1 for row in pool if row["status"] == STATUS_OK and row["matched"]) / len(pool)


def _log_trend(rates: Sequence[dict], method: str) -> None:
    values = [r["rate"] for r in rates if r["method"] == method and math.isfinite(r["rate"])]
    drops = sum(1 for a, b in zip(values, values[1:]) if b < a)
    logger.info(f"{method}: rate decreases between {drops} of {max(len(values) - 1, 0)} neighbouring bins")


def cmd_experiment_exact(args) -> dict:
    """
    Exact recovery against dynamic separation, for every K in config.ks on
    the same configurations (noise-free, alpha = 0.005 unless set).
    """
    config = experiment_from_args(args)
    config = replace(config, deltas=(0.0,))
    dataset = _dataset_or_generate(config, DATASET_BALANCED, max(config.ks), "exact")
    _, configs = load_dataset(dataset)
    digest = file_digest(dataset)
    out = _output_dir(config)

    all_rates, groups, pooled = [], [], {}
    series = {}
    for K in config.ks:
        times = TimeGrid.from_k(K).measurement_times
        run = replace(config, K=K, ks=(K,))
        run_hash = config_hash(run, digest)
        rows = run_sweep(run, configs, times, config.methods, (0.0,), out / f"exact_K{K}_{run_hash[:12]}.csv",
                         run_hash, COMMAND_EXP_EXACT)
        rates = separation_rates(rows, config.bin_width, config.sep_max)
        for rate in rates:
            rate["K"] = K
        all_rates.extend(rates)
        for method in config.methods:
            _log_trend(rates, method)
            pooled[(K, method)] = pooled_rate(rows, method)
            series[f"{method} K={K}"] = [
                (0.5 * (r["bin_lower"] + r["bin_upper"]), r["rate"]) for r in rates if r["method"] == method
            ]
            logger.info(f"K={K} {method}: pooled rate for separation >= {POOLED_SEPARATION_MIN}: "
                        f"{pooled[(K, method)]:.3f}")
        if METHOD_STATIC in config.methods and METHOD_REDUCED in config.methods:
            counts = group_counts(rows)
            groups.append({"K": K, **counts})
            blob_plot_svg(out / f"exact_groups_K{K}.svg", counts, f"Correct reconstructions, K={K}")

    _write_csv(out / "exact_rates.csv", EXACT_COLUMNS, all_rates)
    if groups:
        _write_csv(out / "exact_groups.csv", GROUP_COLUMNS, groups)
    line_plot_svg(out / "exact_rates.svg", series, "Exact recovery by dynamic separation",
                  "dynamic separation", "correct rate", y_range=(0.0, 1.05))
    return {"rates": all_rates, "groups": groups, "pooled": pooled}


def fit_slope(deltas: Sequence[float], means: Sequence[float], fit_min: float, fit_max: float) -> float:
    """Least-squares slope of log(mean) against log(delta) over [fit_min, fit_max]"""
    points = [(math.log(d), math.log(m)) for d, m in zip(deltas, means)
              if fit_min <= d <= fit_max and d > 0 and math.isfinite(m) and m > 0]
    if len(points) < 2:
        logger.warning(f"Need two noise levels in [{fit_min}, {fit_max}] to fit a slope, got {len(points)}")
        return math.nan
    x, y = np.array(points).T
    return float(np.polyfit(x, y, 1)[0])


def noise_means(rows: Sequence[dict], deltas: Sequence[float]) -> List[dict]:
    means = []
    for delta in deltas:
        uw = [row["uw"] for row in rows if row["delta"] == float(delta) and row["status"] == STATUS_OK
              and math.isfinite(row["uw"])]
        alpha = next((row["alpha"] for row in rows if row["delta"] == float(delta)), math.nan)
        means.append({
            "delta": float(delta),
            "alpha": alpha,
            "instances": len(uw),
            "mean_uw": float(np.mean(uw)) if uw else math.nan,
            "std_uw": float(np.std(uw)) if uw else math.nan,
        })
    return means


def cmd_experiment_noise(args) -> dict:
    """
    Mean unbalanced Wasserstein error per noise level with alpha = C_alpha
    sqrt(delta), and the fitted log-log slope.
    """
    config = experiment_from_args(args)
    dataset = _dataset_or_generate(config, DATASET_SINGLE, config.K, "noise")
    spec, configs = load_dataset(dataset)
    digest = file_digest(dataset)
    out = _output_dir(config)
    ids = list(range(len(configs)))

    if config.filter_correct:
        check = replace(config, deltas=(0.0,), filter_correct=False, keep_per_level=None)
        check_hash = config_hash(check, digest)
        rows = run_sweep(check, configs, spec.times, [config.method], (0.0,),
                         out / f"noise_filter_{check_hash[:12]}.csv", check_hash, COMMAND_EXP_NOISE)
        ids = sorted(row["instance_id"] for row in rows if row["status"] == STATUS_OK and row["matched"])
        logger.info(f"{len(ids)}/{len(configs)} instances reconstructed correctly without noise")
    if config.keep_per_level is not None:
        ids = thin_dataset(ids, config.keep_per_level)

    run_hash = config_hash(config, digest)
    rows = run_sweep(config, configs, spec.times, [config.method], config.deltas,
                     out / f"noise_{config.method}_{run_hash[:12]}.csv", run_hash, COMMAND_EXP_NOISE,
                     instance_ids=ids)
    means = noise_means(rows, config.deltas)
    slope = fit_slope([m["delta"] for m in means], [m["mean_uw"] for m in means], config.fit_min, config.fit_max)
    logger.info(f"Fitted log-log slope over [{config.fit_min}, {config.fit_max}]: {slope:.3f}")

    _write_csv(out / "noise_means.csv", NOISE_COLUMNS, means)
    (out / "noise_slope.json").write_text(json.dumps({
        "method": config.method, "slope": slope if math.isfinite(slope) else None,
        "fit_min": config.fit_min, "fit_max": config.fit_max, "config_hash": run_hash,
    }, sort_keys=True))
    measured = [(math.log10(m["delta"]), math.log10(m["mean_uw"])) for m in means
                if m["delta"] > 0 and math.isfinite(m["mean_uw"]) and m["mean_uw"] > 0]
    series = {f"mean UW ({config.method})": measured}
    if measured:
        x0, y0 = measured[0]
        series["sqrt(delta)"] = [(x, y0 + 0.5 * (x - x0)) for x, _ in measured]
    line_plot_svg(out / "noise_rate.svg", series, "Reconstruction error by noise level",
                  "log10 delta", "log10 mean UW", dashed=("sqrt(delta)",))
    return {"means": means, "slope": slope}


def cmd_analyze_ghosts(args) -> Path:
    """One JSON line per configuration with its coincidences and ghosts"""
    spec, configs = load_dataset(args.dataset)
    times = TimeGrid.from_k(args.K).measurement_times if args.K else spec.times
    directions = place_directions(args.n_directions) if args.n_directions else []
    delta = args.delta or 0.0
    path = Path(args.output) if args.output else \
        Path(env.OUTPUT_DIR) / f"ghosts_{Path(args.dataset).stem}.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    with_ghosts = 0
    with open(path, 'w') as fh:
        for i, config in enumerate(configs):
            report = ghost_report(config, times, delta)
            record = {"instance_id": i, "times": list(times), "report": report.to_dict()}
            if directions:
                record["directions"] = [list(d.vector) for d in directions]
                record["direction_report"] = direction_report(config.positions, directions, delta).to_dict()
            with_ghosts += bool(report.ghosts)
            fh.write(json.dumps(record) + "\n")
    logger.info(f"Analyzed {len(configs)} configurations, {with_ghosts} with exact ghosts; wrote {path}")
    return path
