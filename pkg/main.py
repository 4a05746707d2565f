"""
fourier-shap: exact interventional SHAP values from sparse Walsh-Hadamard spectra

Pipeline: model -> sparse spectrum (transform / approximate) -> SHAP values
for many queries against one background dataset (explain), plus the
verification and benchmarking harnesses (verify / bench).
"""
import argparse
import hashlib
import json
import logging
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from blackbox_approx import (SYNTHETIC_NAMES, QueryHandle, RecoveryConfig, fidelity_r2, low_degree_fit,
                             exhaustive_transform)
from data_io import BackgroundSpec, aggregate_groups, load_csv, load_points_csv, load_queries, select_background
from errors import DimensionMismatchError, FourierShapError, PropertyViolation
from fourier_core import (PRESET_PRUNE, EnergyReport, amplitude_prune, load_spectrum, prune, random_spectrum,
                          save_spectrum)
from oracles import (DEFAULT_FACTORS, ORACLE_MAX_N, WIDE_FACTORS, KernelShapConfig, PropertySuite,
                     convergence_report, exact_shap_bruteforce, kernel_shap, r2_vector, spectrum_model)
from shap_engine import (BackgroundDataset, FourierShapExplainer, VariantId, summary_records,
                         variant_diff, weight_table, write_shap_csv)
from tree_fourier import CONVERTERS, TransformStats, ensemble_to_spectrum, load_tree_model

__version__ = "0.1.0"

logger = logging.getLogger("fourier_shap")

THREADS_ENV = "FOURIER_SHAP_THREADS"
BENCH_COLUMNS = ["method", "sample_factor", "min_amplitude", "support_size", "repeats", "queries",
                 "wall_time_s", "wall_time_std", "r2_vs_exact"]
CONVERGENCE_COLUMNS = ["sample_factor", "wall_time_s", "r2_vs_exact"]
# amplitude thresholds of the default speed-vs-accuracy sweep
PRUNE_SWEEP = tuple(float(t) for t in np.geomspace(1e-4, 0.05, 10))


def default_threads() -> int:
    value = os.environ.get(THREADS_ENV)
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", THREADS_ENV, value)
    return os.cpu_count() or 1


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


class RunManifest:
    """Command, resolved parameters, input digests and per-phase wall times"""

    def __init__(self, command: str, params: dict):
        self.command = command
        self.params = {k: (str(v) if isinstance(v, Path) else v) for k, v in params.items()
                       if k not in ("func", "config")}
        self.inputs: Dict[str, str] = {}
        self.phases: Dict[str, float] = {}

    def add_input(self, path):
        if path:
            self.inputs[str(path)] = file_digest(path)

    @contextmanager
    def phase(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.phases[name] = self.phases.get(name, 0.0) + time.perf_counter() - start
            logger.debug("phase %s: %.3fs", name, self.phases[name])

    def to_dict(self) -> dict:
        return {"command": self.command, "version": __version__, "parameters": self.params,
                "inputs": self.inputs, "wall_time_s": self.phases}

    def write(self, directory):
        path = Path(directory) / "manifest.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path


def write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


class FourierShapPipeline:
    def __init__(self, threads: int = 1, dry_run: bool = False):
        self.threads = max(1, threads)
        self.dry_run = dry_run

    def _finish(self, manifest: RunManifest, out_dir) -> int:
        if self.dry_run:
            logger.info("dry run: inputs valid, nothing written")
            return 0
        manifest.write(out_dir)
        return 0

    # -- transform ---------------------------------------------------------

    def transform(self, args) -> int:
        manifest = RunManifest("transform", vars(args))
        manifest.add_input(args.model)
        energy_fraction, min_amp = args.prune_energy, args.min_amp
        if args.preset_prune:
            energy_fraction, min_amp = PRESET_PRUNE

        with manifest.phase("load"):
            ensemble = load_tree_model(args.model, args.format)
        if self.dry_run:
            return self._finish(manifest, None)

        stats = TransformStats()
        with manifest.phase("transform"):
            spectrum = ensemble_to_spectrum(ensemble, workers=self.threads, stats=stats)
        with manifest.phase("prune"):
            if energy_fraction < 1.0 or min_amp > 0.0:
                spectrum, report = prune(spectrum, energy_fraction, min_amp)
            else:
                total = spectrum.energy()
                report = EnergyReport(total, total, 0)

        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        save_spectrum(spectrum, out)
        report_path = Path(args.report) if args.report else out.with_name(out.stem + "_energy.json")
        write_json(report_path, {**report.to_dict(), "support_size": spectrum.support_size,
                                 "max_node_support": stats.max_node_support,
                                 "bound_checks": stats.bound_checks})
        logger.info("wrote %s: %d terms, %.6f of energy kept", out, spectrum.support_size,
                    report.kept_fraction)
        return self._finish(manifest, out.parent)

    # -- approximate -------------------------------------------------------

    def _handle(self, args) -> QueryHandle:
        if args.model:
            return QueryHandle.from_tree_model(args.model, args.format)
        if args.spectrum:
            return QueryHandle.from_spectrum(args.spectrum)
        if args.truth_table:
            return QueryHandle.from_truth_table_csv(args.truth_table)
        params = {"k": args.k, "d": args.synthetic_degree, "seed": args.seed}
        return QueryHandle.from_synthetic(args.synthetic, args.n, **params)

    def approximate(self, args) -> int:
        manifest = RunManifest("approximate", vars(args))
        for path in (args.model, args.spectrum, args.truth_table):
            manifest.add_input(path)
        with manifest.phase("load"):
            handle = self._handle(args)
        if self.dry_run:
            return self._finish(manifest, None)

        config = RecoveryConfig(mode=args.mode, max_degree=args.max_degree, num_samples=args.samples,
                                ridge=args.ridge, rng_seed=args.seed, top_k=args.top_k)
        details = {"mode": args.mode}
        with manifest.phase("recover"):
            if config.mode == "exhaustive":
                spectrum = exhaustive_transform(handle, handle.n, workers=self.threads)
            else:
                fit = low_degree_fit(handle, handle.n, config)
                spectrum = fit.spectrum
                details.update(condition_number=fit.condition_number, in_sample_r2=fit.in_sample_r2,
                               warnings=fit.warnings)
        details["queries"] = handle.query_count
        with manifest.phase("fidelity"):
            details["fidelity_r2"] = fidelity_r2(handle, spectrum, args.eval_samples, args.seed)
        details["support_size"] = spectrum.support_size

        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        save_spectrum(spectrum, out)
        write_json(out.with_name(out.stem + "_fidelity.json"), details)
        logger.info("wrote %s: %d terms, fidelity R^2 %.6f", out, spectrum.support_size,
                    details["fidelity_r2"])
        return self._finish(manifest, out.parent)

    # -- explain -----------------------------------------------------------

    def _inputs(self, args, manifest: RunManifest, n: int):
        """Background rows, query rows and (with a schema) the encoding report"""
        for path in (args.data, args.schema, args.queries):
            manifest.add_input(path)
        report = None
        if args.schema:
            dataset = load_csv(args.data, args.schema)
            if dataset.n != n:
                raise DimensionMismatchError(f"encoded width {dataset.n} != spectrum n={n}", "schema")
            rows = dataset.points
            queries = load_queries(args.queries, dataset)
            report = dataset.report
        else:
            rows = load_points_csv(args.data)
            if rows.shape[1] != n:
                raise DimensionMismatchError(f"{rows.shape[1]} columns != spectrum n={n}", "data")
            queries = load_points_csv(args.queries)
        if queries.shape[1] != n:
            raise DimensionMismatchError(f"{queries.shape[1]} columns != spectrum n={n}", "queries")
        strategy, seed = args.background_strategy, args.background_seed
        if seed is not None:
            strategy = "random"
        selection = BackgroundSpec(strategy, args.background_size, 0 if seed is None else seed)
        return select_background(rows, selection), queries, report

    def explain(self, args) -> int:
        manifest = RunManifest("explain", vars(args))
        manifest.add_input(args.spectrum)
        with manifest.phase("load"):
            spectrum = load_spectrum(args.spectrum)
            background, queries, report = self._inputs(args, manifest, spectrum.n)
        if self.dry_run:
            return self._finish(manifest, None)

        variants = list(VariantId) if args.diff_variants else [VariantId(args.variant)]
        results = {}
        for variant in variants:
            with manifest.phase(f"explain:{variant.value}"):
                explainer = FourierShapExplainer(spectrum, background, variant)
                results[variant.value] = explainer.explain_batch(queries, self.threads)
        primary = results[args.variant]

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_shap_csv(primary, out / "shap.csv")
        records = summary_records(primary)
        worst = max((abs(r["efficiency_residual"]) for r in records), default=0.0)
        write_json(out / "summary.json", {"variant": args.variant, "background_size": background.size,
                                          "max_abs_efficiency_residual": worst, "queries": records})
        if report is not None:
            report.save(out / "encoding_report.json")
        if args.diff_variants:
            diffs = variant_diff(results)
            write_json(out / "variant_diff.json", diffs)
            logger.info("max pairwise variant deviation %.3e", max(diffs.values(), default=0.0))
        if args.group_aggregate:
            if report is None:
                raise ValueError("--group-aggregate needs --schema")
            phi = np.array([r.attributions for r in primary]).reshape(len(primary), spectrum.n)
            aggregate_groups(phi, report).to_csv(out / "shap_grouped.csv", index=False, float_format="%.17g")
        logger.info("explained %d queries into %s (max |efficiency residual| %.3e)",
                    len(primary), out, worst)
        return self._finish(manifest, out)

    # -- verify ------------------------------------------------------------

    def verify(self, args) -> int:
        manifest = RunManifest("verify", vars(args))
        weights = None
        if args.corrupt_weight_table:
            weights = weight_table(args.n).copy()
            weights[0] = 1.5
        if self.dry_run:
            return self._finish(manifest, None)
        if args.n > ORACLE_MAX_N:
            logger.warning("n=%d: brute-force legs need n <= %d and are skipped", args.n, ORACLE_MAX_N)

        suite = PropertySuite(args.n, args.k, args.dd, args.trials, args.seed, weights)
        with manifest.phase("suite"):
            outcomes = suite.run()

        print("\nProperty checks:")
        print("-" * 50)
        for o in outcomes:
            mark = "ok" if o.passed else "FAIL"
            print(f"{o.prop:20s} {o.max_deviation:12.3e} <= {o.tolerance:8.1e}  {mark}")
        print("-" * 50)

        manifest_dir = Path(args.out_dir)
        if args.out:
            out = Path(args.out)
            out.parent.mkdir(parents=True, exist_ok=True)
            pd.DataFrame([o.to_dict() for o in outcomes]).to_csv(out, index=False, float_format="%.17g")
            manifest_dir = out.parent
        manifest_dir.mkdir(parents=True, exist_ok=True)
        manifest.write(manifest_dir)
        for o in outcomes:
            if not o.passed:
                raise PropertyViolation(o.prop, o.max_deviation, o.tolerance, o.seed)
        return 0

    # -- bench -------------------------------------------------------------

    def _bench_instance(self, args, manifest):
        if args.random_instance:
            rng = np.random.default_rng(args.seed)
            spectrum = random_spectrum(args.n, args.k, rng=rng)
            background = BackgroundDataset(rng.integers(0, 2, size=(args.dd, args.n), dtype=np.uint8))
            queries = rng.integers(0, 2, size=(args.num_queries, args.n), dtype=np.uint8)
            return spectrum, background, queries
        if not (args.spectrum and args.data and args.queries):
            raise ValueError("bench needs --spectrum, --data and --queries, or --random-instance")
        manifest.add_input(args.spectrum)
        spectrum = load_spectrum(args.spectrum)
        background, queries, _ = self._inputs(args, manifest, spectrum.n)
        return spectrum, background, queries

    def bench(self, args) -> int:
        manifest = RunManifest("bench", vars(args))
        thresholds = _parse_thresholds(args.prune_thresholds)
        with manifest.phase("load"):
            spectrum, background, queries = self._bench_instance(args, manifest)
        if self.dry_run:
            return self._finish(manifest, None)

        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        if len(queries) == 0:
            logger.info("no queries: writing header-only %s", out)
            pd.DataFrame(columns=BENCH_COLUMNS).to_csv(out, index=False)
            return self._finish(manifest, out.parent)

        n = spectrum.n
        model = spectrum_model(spectrum)
        truth = None
        if n <= ORACLE_MAX_N:
            with manifest.phase("exact"):
                truth = [exact_shap_bruteforce(model, q, background) for q in queries]

        def score(estimates) -> float:
            if truth is None or n < 2:
                return float("nan")
            return float(np.mean([r2_vector(e, t) for e, t in zip(estimates, truth)]))

        names = [v.value for v in VariantId] if args.variants == "all" else args.variants.split(",")
        rows: List[dict] = []
        for name in names:
            times, estimates = self._time_fourier(spectrum, background, queries, VariantId(name), args.repeat)
            rows.append(self._bench_row(f"fourier:{name}", times, len(queries), score(estimates),
                                        support_size=spectrum.support_size))

        for threshold in thresholds:
            with manifest.phase(f"prune:{threshold:g}"):
                pruned, _ = amplitude_prune(spectrum, threshold)
                times, estimates = self._time_fourier(pruned, background, queries, VariantId.PRECOMPUTE,
                                                      args.repeat)
            rows.append(self._bench_row("fourier:pruned", times, len(queries), score(estimates),
                                        min_amplitude=threshold, support_size=pruned.support_size))

        if n > ORACLE_MAX_N:
            logger.warning("n=%d > %d: kernel_shap baselines skipped", n, ORACLE_MAX_N)
        else:
            for factor in DEFAULT_FACTORS:
                times, estimates = [], None
                for rep in range(args.repeat):
                    config = KernelShapConfig(sample_factor=factor, rng_seed=args.seed)
                    start = time.perf_counter()
                    estimates = [kernel_shap(model, q, background, config, rep)[0] for q in queries]
                    times.append(time.perf_counter() - start)
                rows.append(self._bench_row("kernel_shap", times, len(queries), score(estimates),
                                            sample_factor=factor))

        pd.DataFrame(rows, columns=BENCH_COLUMNS).to_csv(out, index=False, float_format="%.6g")
        print("\nBenchmark:")
        print("-" * 50)
        for row in rows:
            setting = row["sample_factor"] if row["method"] == "kernel_shap" else row["min_amplitude"]
            print(f"{row['method']:20s} {str(setting):8.8s} {row['wall_time_s']:10.4f}s "
                  f"R2={row['r2_vs_exact']:.6f}")
        print("-" * 50)

        if args.convergence:
            if truth is None:
                logger.warning("n=%d > %d: convergence report skipped", n, ORACLE_MAX_N)
            else:
                factors = WIDE_FACTORS if args.factors == "wide" else DEFAULT_FACTORS
                with manifest.phase("convergence"):
                    report = convergence_report(model, queries[0], background, factors,
                                                seeds=range(args.convergence_seeds), truth=truth[0],
                                                workers=self.threads)
                path = Path(args.convergence)
                path.parent.mkdir(parents=True, exist_ok=True)
                pd.DataFrame(report, columns=CONVERGENCE_COLUMNS).to_csv(path, index=False, float_format="%.6g")
                logger.info("wrote %s: %d sample factors", path, len(report))
        return self._finish(manifest, out.parent)

    def _time_fourier(self, spectrum, background, queries, variant: VariantId, repeat: int):
        times, estimates = [], None
        for _ in range(repeat):
            start = time.perf_counter()
            results = FourierShapExplainer(spectrum, background, variant).explain_batch(queries, self.threads)
            times.append(time.perf_counter() - start)
            estimates = [r.attributions for r in results]
        return times, estimates

    @staticmethod
    def _bench_row(method, times, queries, r2, sample_factor="", min_amplitude="", support_size="") -> dict:
        return {"method": method, "sample_factor": sample_factor, "min_amplitude": min_amplitude,
                "support_size": support_size, "repeats": len(times), "queries": queries,
                "wall_time_s": float(np.mean(times)),
                "wall_time_std": float(np.std(times)) if len(times) > 1 else 0.0,
                "r2_vs_exact": r2}


def _parse_thresholds(value: Optional[str]) -> List[float]:
    """--prune-thresholds: unset, 'sweep' or a comma list of amplitudes"""
    if not value:
        return []
    if value == "sweep":
        return list(PRUNE_SWEEP)
    thresholds = [float(v) for v in value.split(",")]
    if any(t < 0.0 for t in thresholds):
        raise ValueError("--prune-thresholds must be >= 0")
    return thresholds


def _add_data_args(p):
    p.add_argument("--data", help="background rows: raw CSV (with --schema) or encoded 0/1 CSV")
    p.add_argument("--schema", help="column schema JSON; omit when --data is already encoded")
    p.add_argument("--queries", help="rows to explain, same format as --data")
    p.add_argument("--background-size", type=int, default=10, help="background rows (default: 10)")
    p.add_argument("--background-strategy", choices=["first_rows", "random"], default="first_rows",
                   help="how background rows are chosen (default: first_rows)")
    p.add_argument("--background-seed", type=int, default=None,
                   help="seed a random background selection (implies --background-strategy random)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fourier-shap",
        description="Exact SHAP values from sparse Fourier spectra",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  fourier-shap transform --model data/ensemble.json --out out/spectrum.json --paper-prune
  fourier-shap approximate --synthetic random_sparse --n 12 --k 20 --out out/spectrum.json
  fourier-shap explain --spectrum out/spectrum.json --data data/dataset.csv \\
      --schema data/schema.json --queries data/queries.csv --out out/explain
  fourier-shap verify --n 10 --k 32 --dd 10 --trials 20 --seed 1
  fourier-shap bench --random-instance --n 12 --k 64 --dd 20 --num-queries 100 --out out/bench.csv

Exit codes: 0 ok, 1 property failure, 2 input schema error, 3 dimension mismatch, 4 resource guard
        """
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="JSON file of flag defaults (explicit flags win)")
    parser.add_argument("--threads", type=int, default=None,
                        help=f"worker cap (default: ${THREADS_ENV} or CPU count)")
    parser.add_argument("--dry-run", action="store_true", help="validate inputs, write nothing")
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    parser.add_argument("--quiet", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("transform", help="tree model -> exact spectrum", formatter_class=fmt)
    p.add_argument("--model", required=True, help="tree model JSON")
    p.add_argument("--format", choices=sorted(CONVERTERS), default="native", help="model file format")
    p.add_argument("--out", required=True, help="spectrum JSON to write")
    p.add_argument("--report", help="energy report JSON (default: <out>_energy.json)")
    p.add_argument("--prune-energy", type=float, default=1.0, help="energy fraction to keep")
    p.add_argument("--min-amp", type=float, default=0.0, help="never drop terms with |c| >= this")
    p.add_argument("--paper-prune", "--preset-prune", dest="preset_prune", action="store_true",
                   help=f"prune preset: energy {PRESET_PRUNE[0]}, min amplitude {PRESET_PRUNE[1]}")
    p.set_defaults(func="transform")

    p = sub.add_parser("approximate", help="black box -> sparse spectrum", formatter_class=fmt)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="tree model JSON")
    src.add_argument("--spectrum", help="spectrum JSON")
    src.add_argument("--truth-table", help="CSV of all 2^n points with a value column")
    src.add_argument("--synthetic", choices=SYNTHETIC_NAMES, help="named synthetic function")
    p.add_argument("--format", choices=sorted(CONVERTERS), default="native", help="model file format")
    p.add_argument("--n", type=int, default=12, help="features of a synthetic function")
    p.add_argument("--k", type=int, default=20, help="terms of random_sparse")
    p.add_argument("--synthetic-degree", type=int, default=2, help="degree cap of random_sparse")
    p.add_argument("--mode", choices=["exhaustive", "low_degree"], default="low_degree")
    p.add_argument("--max-degree", type=int, default=2)
    p.add_argument("--samples", type=int, default=None, help="fit samples (default: 4x basis size)")
    p.add_argument("--ridge", type=float, default=1e-6)
    p.add_argument("--top-k", type=int, default=None)
    p.add_argument("--eval-samples", type=int, default=1000, help="fresh points for fidelity R^2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="spectrum JSON to write")
    p.set_defaults(func="approximate")

    p = sub.add_parser("explain", help="SHAP values for query rows", formatter_class=fmt)
    p.add_argument("--spectrum", required=True)
    _add_data_args(p)
    p.add_argument("--variant", choices=[v.value for v in VariantId], default=VariantId.PRECOMPUTE.value)
    p.add_argument("--diff-variants", action="store_true", help="run all variants, write variant_diff.json")
    p.add_argument("--group-aggregate", action="store_true", help="also write per-column sums of phi")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func="explain")

    p = sub.add_parser("verify", help="randomized property suite", formatter_class=fmt)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--k", type=int, default=32)
    p.add_argument("--dd", type=int, default=10, help="background size")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV of property outcomes")
    p.add_argument("--out-dir", default=".", help="manifest directory when --out is not given")
    p.add_argument("--corrupt-weight-table", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func="verify")

    p = sub.add_parser("bench", help="wall time and accuracy per method", formatter_class=fmt)
    p.add_argument("--spectrum")
    _add_data_args(p)
    p.add_argument("--random-instance", action="store_true", help="seeded uniform instance, no files")
    p.add_argument("--n", type=int, default=12)
    p.add_argument("--k", type=int, default=64)
    p.add_argument("--dd", type=int, default=20, help="background size of a random instance")
    p.add_argument("--num-queries", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variants", default="all", help="'all' or comma list of variants")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--prune-thresholds", default=None,
                   help="amplitude pruning sweep: 'sweep' (10 values in [1e-4, 0.05]) or a comma list")
    p.add_argument("--convergence", help="also write a kernel_shap convergence CSV for the first query")
    p.add_argument("--factors", choices=["default", "wide"], default="default",
                   help="sample factors of the convergence report")
    p.add_argument("--convergence-seeds", type=int, default=20, help="kernel_shap runs per sample factor")
    p.add_argument("--out", required=True, help="benchmark CSV")
    p.set_defaults(func="bench")
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: List[str]):
    """Install --config values as parser defaults"""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    payload = json.loads(Path(known.config).read_text())
    if not isinstance(payload, dict):
        raise ValueError(f"{known.config}: config must be a JSON object")
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for sub in [parser] + list(subparsers.choices.values()):
        dests = {a.dest for a in sub._actions}
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in payload.items()
                            if k.replace("-", "_") in dests})


def setup_logging(verbose: bool = False, quiet: bool = False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="[%(levelname)s] %(message)s", force=True)


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (OSError, ValueError) as e:
        print(f"Error: bad --config: {e}")
        return 2
    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.quiet)

    threads = args.threads if args.threads is not None else default_threads()
    pipeline = FourierShapPipeline(threads, args.dry_run)
    try:
        return getattr(pipeline, args.func)(args)
    except FourierShapError as e:
        logger.error("%s", e)
        return e.exit_code
    except (ValueError, OSError, NotImplementedError) as e:
        logger.error("%s", e)
        return 2


if __name__ == "__main__":
    sys.exit(main())
