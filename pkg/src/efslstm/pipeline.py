"""End-to-end runs: split, evolve, stack, forecast, and write the run directory."""
from __future__ import annotations

import csv
import json
import logging
import platform
import shutil
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__, kernels, schemas
from .config import RunConfig, thread_count
from .data import WindowedDataset, load_csv, prepare
from .ensemble import EnsembleModel, fit_ensemble
from .errors import EfsError, StageError, UsageError
from .forecast import (
    HorizonForecast,
    diebold_mariano,
    overfitting_ratio,
    pairwise_dm,
    persistence_model,
    recursive_forecast,
    win_loss_ranking,
)
from .forest import OLSRegressor, RandomForestRegressor
from .moea import MoeaResult, run_moea

log = logging.getLogger(__name__)

OUTPUT_FILES = (
    "pareto_front.json",
    "pareto_front.csv",
    "ensemble_model.json",
    "importance.csv",
    "hypervolume.csv",
    "predictions_train.csv",
    "predictions_test.csv",
    "metrics.json",
    "run_manifest.json",
)


@contextmanager
def stage(name: str):
    try:
        yield
    except StageError:
        raise
    except (EfsError, ValueError, ArithmeticError, OSError, KeyError) as exc:
        raise StageError(name, exc) from exc


def _dump_json(path: Path, doc: dict) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=False, allow_nan=False) + "\n")


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt_time(t) -> str:
    return str(t.item() if hasattr(t, "item") and not isinstance(t, np.datetime64) else t)


def _split_metrics(fc: HorizonForecast) -> dict:
    return {
        "per_step_rmse": fc.rmse.tolist(),
        "per_step_mae": fc.mae.tolist(),
        "mean_rmse": fc.mean_rmse,
        "pooled_rmse": fc.pooled_rmse,
        "mean_mae": fc.mean_mae,
        "pooled_mae": fc.pooled_mae,
    }


def _prediction_rows(fc: HorizonForecast, data: WindowedDataset):
    for s in range(1, fc.h + 1):
        for t, (p, o) in enumerate(zip(fc.predictions[s - 1], fc.observations[s - 1])):
            yield (t, s, _fmt_time(data.times[t + s - 1]), repr(float(p)), repr(float(o)))


def versions() -> dict:
    out = {"efslstm": __version__, "python": platform.python_version(), "numpy": np.__version__}
    try:
        import numba

        out["numba"] = numba.__version__
    except ImportError:  # pragma: no cover
        pass
    import scipy

    out["scipy"] = scipy.__version__
    out["kernel_backend"] = kernels.backend()
    return out


def _prepare_output(path: Path, overwrite: bool) -> Path:
    if path.exists():
        if not path.is_dir():
            raise UsageError(f"output path {path} exists and is not a directory")
        if any(path.iterdir()) and not overwrite:
            raise UsageError(f"output directory {path} is not empty (use --overwrite)")
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.parent / f".{path.name}.partial"
    if tmp.exists():
        shutil.rmtree(tmp)
    tmp.mkdir()
    return tmp


def _make_meta(cfg: RunConfig):
    if cfg.meta_learner == "ols":
        return OLSRegressor()
    return RandomForestRegressor(
        cfg.forest_trees, cfg.forest_mtry or None, cfg.forest_min_leaf, cfg.seed,
        threads=thread_count(),
    )


def run_pipeline(cfg: RunConfig, overwrite: bool = False) -> dict:
    """Execute the full pipeline and write every artifact into ``cfg.output``.

    Outputs are staged in a hidden sibling directory and moved into place
    only after all of them validate; on failure nothing is left behind.
    """
    with stage("validate"):
        cfg.validate()
        out = Path(cfg.output)
        tmp = _prepare_output(out, overwrite)
    try:
        report = _run_into(cfg, tmp)
        if out.exists():
            shutil.rmtree(out)
        tmp.rename(out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    report["output"] = str(out)
    return report


def _run_into(cfg: RunConfig, outdir: Path) -> dict:
    with stage("load"):
        series = load_csv(
            cfg.data, cfg.target, cfg.timestamp_column or None, cfg.delimiter, cfg.missing_sentinel
        )
    with stage("preprocess"):
        train, test, partitions = prepare(
            series, cfg.window, cfg.test_fraction, cfg.n_partitions, cfg.norm_mode,
            cfg.include_target_lags,
        )
        log.info("train %d rows in %d partitions, test %d rows, q=%d",
                 train.n_rows, len(partitions), test.n_rows, train.q)
    with stage("moea"):
        result: MoeaResult = run_moea(partitions, cfg.moea_config())
        front = result.front
        log.info("front of %d models, final hypervolume %.6f", len(front), result.hypervolume[-1])
    with stage("ensemble-training"):
        model = fit_ensemble(front, train, _make_meta(cfg), cfg.hidden_units)
    with stage("forecast"):
        fc_train = recursive_forecast(model, train, cfg.horizon)
        fc_test = recursive_forecast(model, test, cfg.horizon)
        persist = recursive_forecast(persistence_model(test), test, cfg.horizon) \
            if test.target_lag_indices().get(1) is not None else None
        ratio = overfitting_ratio(fc_train.mean_rmse, fc_test.mean_rmse)
    with stage("write"):
        report = _write_outputs(cfg, outdir, train, test, front, result, model, fc_train,
                                fc_test, persist, ratio, [p.n_rows for p in partitions])
    return report


def _write_outputs(cfg, outdir, train, test, front, result, model: EnsembleModel, fc_train,
                   fc_test, persist, ratio, partition_sizes=()) -> dict:
    q = train.q
    masks = np.array([g.mask for g in front.genomes])
    selected = float(masks.sum(axis=1).mean())

    dm_rows = []
    if persist is not None:
        for s in range(1, cfg.horizon + 1):
            res = diebold_mariano(fc_test.errors(s), persist.errors(s), s, cfg.alpha) \
                if fc_test.errors(s).size >= 10 else None
            if res is not None:
                dm_rows.append({"step": s, **res.to_dict()})

    metrics = {
        "schema_version": schemas.SCHEMA_VERSION,
        "norm_mode": cfg.norm_mode,
        "rows": {"train": train.n_rows, "test": test.n_rows, "partitions": list(partition_sizes)},
        "train": _split_metrics(fc_train),
        "test": _split_metrics(fc_test),
        "overfitting_ratio": ratio,
        "front_size": len(front),
        "selected_attributes": selected,
        "selected_fraction": selected / q,
        "hypervolume_final": float(result.hypervolume[-1]),
        "dm_vs_persistence": dm_rows,
    }
    if persist is not None:
        metrics["persistence_test"] = _split_metrics(persist)

    pf_doc = {
        "schema_version": schemas.SCHEMA_VERSION,
        "q": q,
        "hidden_units": cfg.hidden_units,
        "feature_names": list(train.feature_names),
        **front.to_dict(),
    }
    ens_doc = model.to_dict(cfg.to_dict())
    ens_doc["schema_version"] = schemas.SCHEMA_VERSION
    manifest = {
        "schema_version": schemas.SCHEMA_VERSION,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "versions": versions(),
        "train_norm_stats": train.norm_stats.to_dict() if train.norm_stats else None,
        "outputs": list(OUTPUT_FILES),
    }

    for name, doc in (("metrics.json", metrics), ("pareto_front.json", pf_doc),
                      ("ensemble_model.json", ens_doc), ("run_manifest.json", manifest)):
        schemas.validate(name, doc)
        _dump_json(outdir / name, doc)

    n_obj = front.objectives.shape[1]
    _write_csv(outdir / "pareto_front.csv", ["model"] + [f"f{k + 1}" for k in range(n_obj)],
               ([j] + [repr(float(v)) for v in f] for j, f in enumerate(front.objectives)))
    _write_csv(outdir / "importance.csv", ["feature", "importance"],
               ((n, repr(float(v))) for n, v in zip(train.feature_names, model.importance)))
    _write_csv(outdir / "hypervolume.csv", ["generation", "hypervolume"],
               ((g + 1, repr(float(v))) for g, v in enumerate(result.hypervolume)))
    header = ["origin", "step", "time", "prediction", "observation"]
    _write_csv(outdir / "predictions_train.csv", header, _prediction_rows(fc_train, train))
    _write_csv(outdir / "predictions_test.csv", header, _prediction_rows(fc_test, test))
    return {"metrics": metrics, "front_size": len(front)}


# ---------------------------------------------------------------------------
# Comparing runs
# ---------------------------------------------------------------------------


def read_predictions(path: Path) -> dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """step -> (origins, predictions, observations) from a predictions CSV."""
    by_step: dict[int, list[tuple[int, float, float]]] = {}
    with Path(path).open() as fh:
        for row in csv.DictReader(fh):
            by_step.setdefault(int(row["step"]), []).append(
                (int(row["origin"]), float(row["prediction"]), float(row["observation"]))
            )
    out = {}
    for s, rows in sorted(by_step.items()):
        arr = sorted(rows)
        out[s] = (
            np.array([r[0] for r in arr]),
            np.array([r[1] for r in arr]),
            np.array([r[2] for r in arr]),
        )
    return out


def _run_names(run_dirs: Sequence[Path]) -> list[str]:
    names, seen = [], {}
    for d in run_dirs:
        base = d.resolve().name
        seen[base] = seen.get(base, 0) + 1
        names.append(base if seen[base] == 1 else f"{base}#{seen[base]}")
    return names


def compare_runs(run_dirs: Sequence[str | Path], alpha: float = 0.05,
                 output: str | Path | None = None, names: Sequence[str] | None = None) -> dict:
    """Pairwise DM tests per step over test predictions, then a win-loss ranking."""
    dirs = [Path(d) for d in run_dirs]
    if len(dirs) < 2:
        raise UsageError("compare needs at least two run directories")
    names = list(names) if names else _run_names(dirs)
    preds = {}
    ref = None
    for name, d in zip(names, dirs):
        path = d / "predictions_test.csv"
        if not path.exists():
            raise UsageError(f"{d} has no predictions_test.csv")
        p = read_predictions(path)
        key = {s: (o, obs) for s, (o, _, obs) in p.items()}
        if ref is None:
            ref = key
        elif key.keys() != ref.keys() or any(
            not (np.array_equal(key[s][0], ref[s][0]) and np.array_equal(key[s][1], ref[s][1]))
            for s in key
        ):
            raise UsageError(f"{d}: test set does not match {dirs[0]}")
        preds[name] = [p[s][1] - p[s][2] for s in sorted(p)]
    results = pairwise_dm(preds, alpha)
    ranking = win_loss_ranking(results)
    if output is not None:
        out = Path(output)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / "compare_dm.csv", ["method_a", "method_b", "step", "statistic", "p_value", "winner"],
                   ((a, b, s, r.to_dict()["statistic"], r.p_value, r.winner)
                    for (a, b, s), r in results.items()))
        _write_csv(out / "compare_ranking.csv", ["method", "wins", "losses", "win_minus_loss"],
                   ((r.method, r.wins, r.losses, r.score) for r in ranking))
    return {"tests": results, "ranking": ranking}


def format_ranking(ranking) -> str:
    width = max([len("method")] + [len(r.method) for r in ranking])
    lines = [f"{'method':<{width}}  {'wins':>6} {'losses':>6} {'win-loss':>8}"]
    for r in ranking:
        lines.append(f"{r.method:<{width}}  {r.wins:>6.1f} {r.losses:>6.1f} {r.score:>8.1f}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Multiple seeds
# ---------------------------------------------------------------------------

AGG_COLUMNS = ("train_rmse", "test_rmse", "overfitting_ratio", "selected_attributes", "selected_pct")


def multi_seed(cfg: RunConfig, seeds: Sequence[int], overwrite: bool = False) -> dict:
    """Run the pipeline once per seed under ``cfg.output/seed_<s>`` and aggregate."""
    if not seeds:
        raise UsageError("multi-seed needs at least one seed")
    cfg.validate()
    root = Path(cfg.output)
    rows = []
    for seed in seeds:
        run_cfg = cfg.replace(seed=int(seed), output=str(root / f"seed_{seed}"))
        try:
            rep = run_pipeline(run_cfg, overwrite=overwrite)
        except EfsError as exc:
            done = [r["seed"] for r in rows]
            raise StageError(f"multi-seed seed={seed} (completed: {done})", exc) from exc
        m = rep["metrics"]
        rows.append({
            "seed": int(seed),
            "train_rmse": m["train"]["mean_rmse"],
            "test_rmse": m["test"]["mean_rmse"],
            "overfitting_ratio": m["overfitting_ratio"],
            "selected_attributes": m["selected_attributes"],
            "selected_pct": 100.0 * m["selected_fraction"],
        })
    summary = {}
    for label, fn in (("average", np.mean), ("min", np.min), ("max", np.max)):
        summary[label] = {c: float(fn([r[c] for r in rows])) for c in AGG_COLUMNS}
    doc = {"schema_version": schemas.SCHEMA_VERSION, "runs": rows, "summary": summary}
    root.mkdir(parents=True, exist_ok=True)
    _dump_json(root / "aggregate.json", doc)
    table = [[r["seed"]] + [repr(r[c]) for c in AGG_COLUMNS] for r in rows]
    table += [[label.capitalize()] + [repr(summary[label][c]) for c in AGG_COLUMNS] for label in summary]
    _write_csv(root / "aggregate.csv", ("run",) + AGG_COLUMNS, table)
    return doc


def inspect_run(path: str | Path) -> str:
    """Pretty-print a run manifest (accepts the run directory or the file)."""
    p = Path(path)
    if p.is_dir():
        p = p / "run_manifest.json"
    if not p.exists():
        raise UsageError(f"no manifest at {p}")
    doc = json.loads(p.read_text())
    schemas.validate("run_manifest.json", doc)
    lines = [f"manifest: {p}", f"schema_version: {doc['schema_version']}", f"seed: {doc['seed']}",
             "versions:"]
    lines += [f"  {k}: {v}" for k, v in doc["versions"].items()]
    lines.append("config:")
    lines += [f"  {k} = {v}" for k, v in doc["config"].items()]
    metrics = p.parent / "metrics.json"
    if metrics.exists():
        m = json.loads(metrics.read_text())
        lines.append("metrics:")
        lines.append(f"  test mean RMSE: {m['test']['mean_rmse']:.6f}")
        lines.append(f"  train mean RMSE: {m['train']['mean_rmse']:.6f}")
        lines.append(f"  overfitting ratio: {m['overfitting_ratio']:.6f}")
        lines.append(f"  front size: {m['front_size']}")
    return "\n".join(lines)
