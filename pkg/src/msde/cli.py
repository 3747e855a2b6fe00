"""Command-line front end: ``msde score``, ``msde bench`` and ``msde export``.

Exit codes: 0 success, 1 runtime or I/O failure, 2 invalid configuration.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import asdict, dataclass, fields
from importlib import resources
from pathlib import Path

from .bench.runner import BenchGrid, run_benchmark, write_aggregates, write_results
from .bench.synthetic import MODES, NOISE_LEVELS
from .dataset import DataError, load_csv, standardize
from .detector import MSDE
from .fuzzygraph import build_fuzzy_graph, write_edge_list
from .meanshift import write_feature_shift, write_trajectories
from .weights import write_weights

logger = logging.getLogger("msde")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2
EXPORT_KINDS = ("trajectories", "weights", "feature-shift", "graph")


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"invalid {field_name}: {message}")
        self.field_name = field_name


@dataclass
class RunConfig:
    k: int = 100
    nbd_sample_count_threshold: int = 70
    learning_rate: float = 0.1
    max_iters_shift: int = 6
    shift_threshold: float = 0.003
    max_iters_weight_count: int = 4
    satisfiability_proportion: float = 0.3
    batch_size: int = 4096
    standardize: bool = True
    seed: int = 0
    label_column: str = ""

    def validate(self) -> "RunConfig":
        positive_int = ("k", "nbd_sample_count_threshold", "max_iters_shift",
                        "max_iters_weight_count")
        for name in positive_int:
            if getattr(self, name) < 1:
                raise ConfigError(name, f"must be a positive integer, got {getattr(self, name)}")
        if self.batch_size < 2:
            raise ConfigError("batch_size", f"must be at least 2, got {self.batch_size}")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate", f"must be nonnegative, got {self.learning_rate}")
        if self.shift_threshold <= 0:
            raise ConfigError("shift_threshold", f"must be positive, got {self.shift_threshold}")
        if not 0 < self.satisfiability_proportion <= 1:
            raise ConfigError("satisfiability_proportion",
                              f"must lie in (0, 1], got {self.satisfiability_proportion}")
        if self.seed < 0:
            raise ConfigError("seed", f"must be nonnegative, got {self.seed}")
        return self

    def detector(self) -> MSDE:
        params = asdict(self)
        params.pop("label_column")
        return MSDE(**params)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, raw):
    kind = _FIELD_TYPES[name]
    if isinstance(raw, str):
        text = raw.strip()
        try:
            if kind == "bool":
                low = text.lower()
                if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                    raise ValueError(text)
                return low in ("1", "true", "yes", "on")
            if kind == "int":
                return int(text)
            if kind == "float":
                return float(text)
        except ValueError:
            raise ConfigError(name, f"cannot parse {text!r} as {kind}") from None
        return text
    return raw


def read_config_file(path: str | Path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment, dashes equal underscores."""
    values = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(key, f"unknown key (allowed: {', '.join(_FIELD_TYPES)})")
        values[key] = _coerce(key, value)
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, overridden by the config file, overridden by explicit flags."""
    merged = {}
    if getattr(args, "config", None):
        try:
            merged.update(read_config_file(args.config))
        except OSError as exc:
            raise ConfigError("config", str(exc)) from None
    for name in _FIELD_TYPES:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = _coerce(name, value)
    return RunConfig(**merged).validate()


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model parameters")
    g.add_argument("--k", type=int, help="neighbors per mean-shift update (default 100)")
    g.add_argument("--nbd-sample-count-threshold", dest="nbd_sample_count_threshold", type=int,
                   help="neighbor count threshold for the radius search (default 70)")
    g.add_argument("--learning-rate", dest="learning_rate", type=float,
                   help="mean-shift step size (default 0.1)")
    g.add_argument("--max-iters-shift", dest="max_iters_shift", type=int,
                   help="maximum mean-shift iterations (default 6)")
    g.add_argument("--shift-threshold", dest="shift_threshold", type=float,
                   help="early-stop threshold on mean displacement (default 0.003)")
    g.add_argument("--max-iters-weight-count", dest="max_iters_weight_count", type=int,
                   help="radii averaged per weight (default 4)")
    g.add_argument("--satisfiability-proportion", dest="satisfiability_proportion", type=float,
                   help="fraction of rows that must meet the count condition (default 0.3)")
    g.add_argument("--batch-size", dest="batch_size", type=int,
                   help="rows per weight-estimation batch (default 4096)")
    g.add_argument("--no-standardize", dest="standardize", action="store_const", const=False,
                   help="skip z-scoring the input features")
    g.add_argument("--seed", type=int, help="single source of randomness (default 0)")
    g.add_argument("--config", help="key=value config file; flags take precedence")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msde", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score every row of a CSV file")
    p.add_argument("input", nargs="?", help="input CSV (omit with --demo)")
    p.add_argument("-o", "--output", required=True, help="output CSV")
    p.add_argument("--label-column", dest="label_column", help="column to exclude from features")
    p.add_argument("--demo", action="store_true", help="use the bundled demo CSV")
    _add_model_flags(p)

    p = sub.add_parser("bench", help="run the synthetic benchmark grid")
    p.add_argument("-o", "--output-dir", required=True)
    p.add_argument("--modes", default=",".join(MODES),
                   help=f"comma-separated subset of {','.join(MODES)}")
    p.add_argument("--noise", default=",".join(f"{r:.2f}" for r in NOISE_LEVELS),
                   help="comma-separated noise ratios")
    p.add_argument("--seeds", type=int, default=3, help="number of seeds, counting up from --seed")
    p.add_argument("--n-normal", type=int, default=950)
    p.add_argument("--n-anomaly", type=int, default=50)
    p.add_argument("--dims", type=int, default=10)
    p.add_argument("--n-components", type=int, default=3)
    p.add_argument("--baseline-k", type=int, default=5)
    p.add_argument("--workers", type=int, default=1)
    _add_model_flags(p)

    p = sub.add_parser("export", help="write trajectories, weights or per-feature shifts")
    p.add_argument("input", nargs="?")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--kind", required=True, choices=EXPORT_KINDS)
    p.add_argument("--label-column", dest="label_column")
    p.add_argument("--demo", action="store_true")
    _add_model_flags(p)
    return parser


def demo_csv_path() -> Path:
    return Path(str(resources.files("msde") / "data" / "demo.csv"))


def _load_input(args, cfg: RunConfig):
    if args.demo:
        path, label = demo_csv_path(), cfg.label_column or "label"
    elif args.input:
        path, label = Path(args.input), cfg.label_column or None
    else:
        raise ConfigError("input", "give an input CSV or --demo")
    data = load_csv(path, label)
    if cfg.k >= data.n_samples:
        raise ConfigError("k", f"k={cfg.k} must be smaller than the number of rows N={data.n_samples}")
    return data


def cmd_score(args, cfg: RunConfig) -> int:
    data = _load_input(args, cfg)
    result = cfg.detector().run(data)
    with Path(args.output).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row_index", "displacement", "score"])
        for i, (d, s) in enumerate(zip(result.scores.displacement, result.scores.scores)):
            writer.writerow([i, f"{d:.12g}", f"{s:.12g}"])
    logger.info("wrote %d scores to %s", data.n_samples, args.output)
    return EXIT_OK


def _parse_list(name: str, text: str, cast, allowed=None):
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise ConfigError(name, "empty list")
    out = []
    for t in items:
        try:
            v = cast(t)
        except ValueError:
            raise ConfigError(name, f"cannot parse {t!r}") from None
        if allowed is not None and not any(v == a or (isinstance(a, float) and abs(v - a) < 1e-9)
                                           for a in allowed):
            raise ConfigError(name, f"{t!r} not allowed; choose from {', '.join(map(str, allowed))}")
        out.append(v)
    return tuple(out)


def cmd_bench(args, cfg: RunConfig) -> int:
    modes = _parse_list("modes", args.modes, str, MODES)
    noise = _parse_list("noise", args.noise, float, NOISE_LEVELS)
    if args.seeds < 1:
        raise ConfigError("seeds", "need at least one seed")
    if cfg.k >= args.n_normal + args.n_anomaly:
        raise ConfigError("k", f"k={cfg.k} must be smaller than N={args.n_normal + args.n_anomaly}")
    grid = BenchGrid(modes, noise, tuple(range(cfg.seed, cfg.seed + args.seeds)),
                     args.n_normal, args.n_anomaly, args.dims, args.n_components)
    params = asdict(cfg)
    for key in ("label_column", "seed", "standardize"):
        params.pop(key)

    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outcome = run_benchmark(grid, params, args.baseline_k, args.workers)
    write_results(outcome.results, out_dir / "results.csv")
    if outcome.results:
        paths = write_aggregates(outcome.results, out_dir)
        logger.info("aggregate table:\n%s", (out_dir / "aggregate.txt").read_text())
        logger.info("wrote %s", ", ".join(str(p) for p in paths.values()))
    if outcome.failures:
        logger.error("%d of %d cells failed", len(outcome.failures), len(grid.cells()))
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_export(args, cfg: RunConfig) -> int:
    data = _load_input(args, cfg)
    if args.kind == "graph":
        x = standardize(data) if cfg.standardize else data
        k_graph = max(2, min(cfg.k, data.n_samples - 1))
        write_edge_list(build_fuzzy_graph(x, k_graph, seed=cfg.seed), args.output)
        return EXIT_OK
    result = cfg.detector().run(data, record_trajectory=args.kind == "trajectories")
    if args.kind == "weights":
        write_weights(result.weights, args.output)
    elif args.kind == "trajectories":
        write_trajectories(result.state, args.output)
    else:
        write_feature_shift(result.state, args.output, data.feature_names)
    logger.info("wrote %s export to %s", args.kind, args.output)
    return EXIT_OK


COMMANDS = {"score": cmd_score, "bench": cmd_bench, "export": cmd_export}


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose + 1, 2)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        cfg = build_config(args)
        logger.info("effective config: %s", " ".join(f"{k}={v}" for k, v in asdict(cfg).items()))
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        logger.error("%s", exc)
        print(f"msde: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OSError, FloatingPointError, ValueError) as exc:
        print(f"msde: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
