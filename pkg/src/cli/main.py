"""
Command-line interface for the Bearing Fault Toolkit.

One JSON config drives every subcommand; flags override individual keys.
All outputs are written under the ``--out`` directory with fixed names.

Exit codes: 0 success, 2 configuration or usage error, 3 extract,
4 train, 5 tune, 6 benchmark, 7 evaluate, 8 compare.
"""
import argparse
import json
import logging
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import ValidationError

from src.core.benchmarks import benchmark_registry
from src.core.config import PipelineConfig, settings
from src.core.errors import FaultKitError, StageError
from src.core.optimizer import run
from src.core.tuner import TuneSpace, tune
from src.data.features import extract_features, extract_raw_ternary_features, time_domain_features
from src.data.shapelet import discover
from src.data.signal import Dataset, fault_presets, load_csv, save_csv, split, synthesize_dataset
from src.data.ternary import export_feature_csv, load_feature_csv
from src.models.gbdt import load_model, save_model, train
from src.models.metrics import confusion, roc_auc, timed, write_reports

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EXTRACT = 3
EXIT_TRAIN = 4
EXIT_TUNE = 5
EXIT_BENCHMARK = 6
EXIT_EVALUATE = 7
EXIT_COMPARE = 8

DATASET_FILE = "dataset.csv"
TRAIN_FEATURES_FILE = "train_features.csv"
TEST_FEATURES_FILE = "test_features.csv"
SHAPELETS_FILE = "shapelets.json"
MODEL_FILE = "model.json"
TIMING_FILE = "train_timing.json"
TUNE_RESULT_FILE = "tune_result.json"
TUNE_TRACE_FILE = "tune_trace.csv"
CONFIG_FILE = "config.json"
COMPARISON_FILE = "comparison.csv"


@contextmanager
def stage(name: str, exit_code: int):
    """Re-raise library errors as a StageError naming ``name``."""
    try:
        yield
    except StageError:
        raise
    except (FaultKitError, ValueError, OSError) as exc:
        raise StageError(name, exit_code, str(exc)) from exc


def _out_dir(config: PipelineConfig) -> Path:
    out = Path(config.paths.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> Path:
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path


def load_dataset(config: PipelineConfig) -> Dataset:
    """The configured dataset file, or a synthetic one; split per class when unsplit."""
    if config.paths.dataset:
        dataset = load_csv(config.paths.dataset)
    else:
        section = config.dataset
        dataset = synthesize_dataset(
            fault_presets(section.sample_rate_hz)[:section.class_count],
            per_class=section.per_class_train + section.per_class_test,
            length=section.record_length,
            seed=config.seed,
        )
    if not dataset.has_split:
        dataset = split(dataset, config.dataset.per_class_train, config.dataset.per_class_test, config.seed)
    return dataset


def cmd_synthesize(config: PipelineConfig, args: argparse.Namespace) -> int:
    """Write the synthetic dataset (CSV + sidecar with the split)."""
    with stage("signal.synthesize", EXIT_CONFIG):
        section = config.dataset
        dataset = synthesize_dataset(
            fault_presets(section.sample_rate_hz)[:section.class_count],
            per_class=section.per_class_train + section.per_class_test,
            length=section.record_length,
            seed=config.seed,
        )
        dataset = split(dataset, section.per_class_train, section.per_class_test, config.seed)
        path = save_csv(dataset, _out_dir(config) / DATASET_FILE)
    print(f"Wrote {len(dataset)} records to {path}")
    return EXIT_OK


def cmd_extract(config: PipelineConfig, args: argparse.Namespace) -> int:
    """discover -> transform -> featurize over both splits."""
    out = _out_dir(config)
    with stage("signal.load", EXIT_EXTRACT):
        dataset = load_dataset(config)

    section = config.shapelet
    with stage("shapelet.discover", EXIT_EXTRACT):
        shapelets = discover(
            dataset,
            min_len=section.min_len,
            max_len=section.max_len,
            r=section.r,
            quality=section.quality,
            seed=config.seed,
            budget=section.budget,
            work_budget=section.work_budget,
        )
        shapelets.save(out / SHAPELETS_FILE)

    k = config.ternary.k
    with stage("ternary.featurize", EXIT_EXTRACT):
        for records, indices, name in (
            (dataset.train_records(), dataset.train_index_array(), TRAIN_FEATURES_FILE),
            (dataset.test_records(), dataset.test_index_array(), TEST_FEATURES_FILE),
        ):
            matrix = extract_features(records, shapelets, k)
            export_feature_csv(matrix, dataset.labels()[indices], out / name, k)
    config.save(out / CONFIG_FILE)
    print(f"Extracted features for {len(dataset)} records into {out}")
    return EXIT_OK


def cmd_train(config: PipelineConfig, args: argparse.Namespace) -> int:
    out = _out_dir(config)
    with stage("gbdt.train", EXIT_TRAIN):
        features, labels = load_feature_csv(args.features or out / TRAIN_FEATURES_FILE)
        model, seconds = timed(train, features, labels, config.booster)
        save_model(model, out / MODEL_FILE)
        _write_json(out / TIMING_FILE, {"fit_seconds": seconds})
    print(f"Trained {config.booster.n_estimators} rounds in {seconds:.2f}s; model saved to {out / MODEL_FILE}")
    return EXIT_OK


def cmd_tune(config: PipelineConfig, args: argparse.Namespace) -> int:
    out = _out_dir(config)
    section = config.tuner
    with stage("tuner.tune", EXIT_TUNE):
        features, labels = load_feature_csv(args.features or out / TRAIN_FEATURES_FILE)
        eval_features = eval_labels = None
        if section.holdout:
            eval_features, eval_labels = load_feature_csv(out / TEST_FEATURES_FILE)
        space = TuneSpace.full(config.booster) if section.space == "full" else TuneSpace.table7(config.booster)
        result = tune(
            features, labels, space=space,
            config=section.run_config(config.seed),
            algorithm=section.algorithm,
            folds=section.folds,
            eval_features=eval_features,
            eval_labels=eval_labels,
        )
        _write_json(out / TUNE_RESULT_FILE, result.to_dict())
        pd.DataFrame({
            "iteration": np.arange(1, result.trace.best_values.size + 1),
            "best_accuracy": result.trace.best_values,
        }).to_csv(out / TUNE_TRACE_FILE, index=False, float_format="%.17g")
    print(f"Best accuracy {result.best_accuracy:.4f} with {result.best_params.model_dump()}")
    return EXIT_OK


def benchmark_file_stem(function: str, algorithm: str, repetition: int) -> str:
    return f"benchmark_{function}_{algorithm}_rep{repetition}"


def cmd_benchmark(config: PipelineConfig, args: argparse.Namespace) -> int:
    """Run the configured optimizer; repetition i uses seed + i."""
    out = _out_dir(config)
    section = config.optimizer
    with stage("optimizer.benchmark", EXIT_BENCHMARK):
        function = benchmark_registry.require(section.function)
        for repetition in range(section.repetitions):
            seed = config.seed + repetition
            trace = run(function.search_space(), section.run_config(seed), section.algorithm)
            stem = benchmark_file_stem(function.name, section.algorithm, repetition)
            pd.DataFrame({
                "iteration": np.arange(1, trace.best_values.size + 1),
                "best_f": trace.best_values,
            }).to_csv(out / f"{stem}.csv", index=False, float_format="%.17g")
            summary = trace.to_summary()
            summary.update({"function": function.name, "seed": seed, "target": function.target})
            _write_json(out / f"{stem}.json", summary)
            print(f"{function.name} {section.algorithm} rep {repetition} (seed {seed}): best_f {trace.best_value:.6g}")
    return EXIT_OK


def cmd_evaluate(config: PipelineConfig, args: argparse.Namespace) -> int:
    out = _out_dir(config)
    with stage("metrics.evaluate", EXIT_EVALUATE):
        model_path = Path(args.model or out / MODEL_FILE)
        model = load_model(model_path)
        features, labels = load_feature_csv(args.features or out / TEST_FEATURES_FILE)
        probabilities = model.predict_proba(features)
        cm = confusion(labels, np.argmax(probabilities, axis=1), model.class_count)
        curves = roc_auc(labels, probabilities)

        timing_path = model_path.with_name(TIMING_FILE)
        fit_seconds = 0.0
        if timing_path.exists():
            fit_seconds = json.loads(timing_path.read_text(encoding="utf-8"))["fit_seconds"]
        write_reports(out, cm, curves, fit_seconds)
    print(f"Accuracy {cm.accuracy():.4f} on {cm.total} records")
    return EXIT_OK


def _score_features(name: str, train_features: np.ndarray, train_labels: np.ndarray,
                    test_features: np.ndarray, test_labels: np.ndarray, config: PipelineConfig) -> dict:
    model, seconds = timed(train, train_features, train_labels, config.booster)
    predicted = model.predict(test_features)
    accuracy = float(np.mean(predicted == test_labels))
    logger.info(f"{name}: accuracy {accuracy:.4f} with {train_features.shape[1]} features")
    return {
        "method": name,
        "features": int(train_features.shape[1]),
        "accuracy": accuracy,
        "fit_seconds": seconds,
    }


def cmd_compare(config: PipelineConfig, args: argparse.Namespace) -> int:
    """
    Train the configured booster on three feature sets and report test accuracy.

    The shapelet features come from a prior ``extract`` into the same ``--out``;
    the raw-signal 1D-TP and time-domain baselines are computed from the dataset.
    """
    out = _out_dir(config)
    with stage("metrics.compare", EXIT_COMPARE):
        dataset = load_dataset(config)
        train_records, test_records = dataset.train_records(), dataset.test_records()
        if not test_records:
            raise ValueError("comparison needs a non-empty test split")
        train_labels = dataset.labels()[dataset.train_index_array()]
        test_labels = dataset.labels()[dataset.test_index_array()]

        shapelet_train, shapelet_train_labels = load_feature_csv(out / TRAIN_FEATURES_FILE)
        shapelet_test, shapelet_test_labels = load_feature_csv(out / TEST_FEATURES_FILE)
        if not (np.array_equal(shapelet_train_labels, train_labels)
                and np.array_equal(shapelet_test_labels, test_labels)):
            raise ValueError(f"feature files in {out} were extracted from a different dataset or split")

        k = config.ternary.k
        rows = [
            _score_features("shapelet_1dtp", shapelet_train, train_labels, shapelet_test, test_labels, config),
            _score_features(
                "raw_1dtp",
                extract_raw_ternary_features(train_records, k), train_labels,
                extract_raw_ternary_features(test_records, k), test_labels,
                config,
            ),
            _score_features(
                "time_domain",
                time_domain_features(train_records), train_labels,
                time_domain_features(test_records), test_labels,
                config,
            ),
        ]
        pd.DataFrame(rows).to_csv(out / COMPARISON_FILE, index=False, float_format="%.17g")
    for row in rows:
        print(f"{row['method']}: accuracy {row['accuracy']:.4f} ({row['fit_seconds']:.2f}s fit)")
    return EXIT_OK


def cmd_schema(config: PipelineConfig, args: argparse.Namespace) -> int:
    print(PipelineConfig.published_schema())
    return EXIT_OK


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Pipeline config JSON")
    common.add_argument("--seed", dest="seed", type=int, help="Base seed")
    common.add_argument("--out", dest="paths.out", help="Output directory")
    common.add_argument("--log-level", default=None, help="Logging level (default from settings)")
    return common


def build_parser() -> argparse.ArgumentParser:
    """
    Build the argument parser.

    Flags whose ``dest`` contains a dot override that config key.
    """
    parser = argparse.ArgumentParser(prog="faultkit", description="Bearing fault detection toolkit")
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = _common_options()

    def add(name: str, handler: Callable, help_text: str) -> argparse.ArgumentParser:
        sub = subparsers.add_parser(name, parents=[common], help=help_text)
        sub.set_defaults(handler=handler)
        return sub

    sub = add("synthesize", cmd_synthesize, "Write a synthetic dataset")
    sub.add_argument("--classes", dest="dataset.class_count", type=int)
    sub.add_argument("--length", dest="dataset.record_length", type=int)
    sub.add_argument("--per-class-train", dest="dataset.per_class_train", type=int)
    sub.add_argument("--per-class-test", dest="dataset.per_class_test", type=int)

    sub = add("extract", cmd_extract, "Discover shapelets and write feature CSVs")
    sub.add_argument("--dataset", dest="paths.dataset", help="Dataset CSV (synthesized when omitted)")
    sub.add_argument("--min-len", dest="shapelet.min_len", type=int)
    sub.add_argument("--max-len", dest="shapelet.max_len", type=int)
    sub.add_argument("--r", dest="shapelet.r", type=int)
    sub.add_argument("--quality", dest="shapelet.quality", type=float)
    sub.add_argument("--budget", dest="shapelet.budget", type=int)
    sub.add_argument("--work-budget", dest="shapelet.work_budget", type=float)
    sub.add_argument("--k", dest="ternary.k", type=int)

    for name, handler, help_text in (
        ("train", cmd_train, "Train the classifier on extracted features"),
        ("evaluate", cmd_evaluate, "Evaluate a trained model"),
    ):
        sub = add(name, handler, help_text)
        sub.add_argument("--features", help="Feature CSV (default under --out)")
        if name == "train":
            sub.add_argument("--n-estimators", dest="booster.n_estimators", type=int)
            sub.add_argument("--learning-rate", dest="booster.learning_rate", type=float)
            sub.add_argument("--max-depth", dest="booster.max_depth", type=int)
        else:
            sub.add_argument("--model", help="Model JSON (default under --out)")

    sub = add("tune", cmd_tune, "Tune classifier hyperparameters with a bee colony")
    sub.add_argument("--features", help="Training feature CSV (default under --out)")
    sub.add_argument("--algorithm", dest="tuner.algorithm", choices=["abc", "iabc"])
    sub.add_argument("--colony-size", dest="tuner.colony_size", type=int)
    sub.add_argument("--iterations", dest="tuner.max_iterations", type=int)
    sub.add_argument("--folds", dest="tuner.folds", type=int)
    sub.add_argument("--space", dest="tuner.space", choices=["table7", "full"])
    sub.add_argument("--holdout", dest="tuner.holdout", action="store_true", default=None)

    sub = add("benchmark", cmd_benchmark, "Run the optimizers on a benchmark function")
    sub.add_argument("--function", dest="optimizer.function")
    sub.add_argument("--algorithm", dest="optimizer.algorithm", choices=["abc", "iabc"])
    sub.add_argument("--colony-size", dest="optimizer.colony_size", type=int)
    sub.add_argument("--iterations", dest="optimizer.max_iterations", type=int)
    sub.add_argument("--v", dest="optimizer.v", type=int)
    sub.add_argument("--weight-step", dest="optimizer.weight_step", type=float)
    sub.add_argument("--layout", dest="optimizer.layout", choices=["slices", "grid"])
    sub.add_argument("--repetitions", dest="optimizer.repetitions", type=int)

    sub = add("compare", cmd_compare, "Compare shapelet features against raw 1D-TP and time-domain baselines")
    sub.add_argument("--dataset", dest="paths.dataset", help="Dataset CSV (synthesized when omitted)")

    add("schema", cmd_schema, "Print the config JSON schema")
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    """Config file (or defaults) with flag overrides applied."""
    config = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    overrides: Dict[str, object] = {
        key: value for key, value in vars(args).items() if key == "seed" or "." in key
    }
    return config.with_overrides(overrides)


def resolve_log_level(requested: Optional[str] = None) -> str:
    """The flag value, else settings.log_level; settings.debug forces DEBUG."""
    if settings.debug:
        return "DEBUG"
    return (requested or settings.log_level).upper()


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=resolve_log_level(args.log_level),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    )

    try:
        config = resolve_config(args)
    except (ValidationError, ValueError, OSError) as exc:
        logger.error(f"Invalid configuration: {exc}")
        return EXIT_CONFIG

    try:
        return args.handler(config, args)
    except StageError as exc:
        logger.error(f"Stage {exc.stage} failed: {exc}")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
