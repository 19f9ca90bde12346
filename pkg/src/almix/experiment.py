"""Active-learning orchestration: declarative experiment configs, the
select/label/retrain cycle loop, multi-seed aggregation, and report emission."""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from .cmam import fit
from .core import RngStream
from .data import (
    Dataset,
    PoolState,
    gen_blobs,
    gen_two_moons,
    init_pool,
    load_csv,
    make_imbalanced,
)
from .metrics import (
    accuracy,
    evaluate,
    expected_calibration_error,
    overconfidence_error,
    save_records_csv,
)
from .model import TrainConfig, init_model, predict_proba
from .sampling import (
    SELECT_LARGEST,
    SELECT_SMALLEST,
    ScoredCandidate,
    apply_selection,
    score_entropy,
    score_least_confidence,
    score_margin,
    score_rankedms,
    select_batch,
    select_random,
)

GENERATORS = ("blobs", "two_moons")

SAMPLERS = {
    "rankedms": (score_rankedms, SELECT_SMALLEST),
    "entropy": (score_entropy, SELECT_LARGEST),
    "margin": (score_margin, SELECT_SMALLEST),
    "least_confidence": (score_least_confidence, SELECT_SMALLEST),
    "random": None,
}

_GENERATOR_PARAMS = {
    "blobs": ("n_per_class", "num_classes", "dim", "spread"),
    "two_moons": ("n", "noise"),
}

CYCLES_CSV_HEADER = "cycle,seed,labeled,accuracy,oe,ece,train_seconds"


class ConfigError(ValueError):
    """Raised for malformed or inconsistent experiment configuration."""


@dataclass(frozen=True)
class ImbalanceConfig:
    minority_classes: tuple[int, ...]
    ratio: int


@dataclass(frozen=True)
class DatasetConfig:
    generator: str | None = None
    params: dict = field(default_factory=dict)
    path: str | None = None
    label_column: int | str = -1
    num_classes: int | None = None
    test_path: str | None = None
    test_fraction: float = 0.25
    imbalance: ImbalanceConfig | None = None

    def __post_init__(self):
        if (self.generator is None) == (self.path is None):
            raise ConfigError("dataset needs exactly one of 'generator' or 'path'")
        if self.generator is not None and self.generator not in GENERATORS:
            raise ConfigError(f"unknown generator {self.generator!r}; expected one of {GENERATORS}")
        if self.path is not None and self.num_classes is None:
            raise ConfigError("file datasets require 'num_classes'")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must be in (0, 1), got {self.test_fraction}")


@dataclass(frozen=True)
class ModelConfig:
    hidden_widths: tuple[int, ...]
    mix_point: int = 1

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(int(w) for w in self.hidden_widths))
        if not self.hidden_widths or any(w < 1 for w in self.hidden_widths):
            raise ConfigError(f"hidden_widths must be positive, got {self.hidden_widths}")
        if not 0 <= self.mix_point <= len(self.hidden_widths):
            raise ConfigError(
                f"mix_point {self.mix_point} out of range [0, {len(self.hidden_widths)}]"
            )


@dataclass(frozen=True)
class CmamConfig:
    enabled: bool = True
    alpha: float = 0.4

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")


@dataclass(frozen=True)
class LoopConfig:
    initial_budget: int
    budget_per_cycle: int
    cycles: int

    def __post_init__(self):
        if self.cycles < 1:
            raise ConfigError(f"cycles must be >= 1, got {self.cycles}")
        if self.initial_budget < 1 or self.budget_per_cycle < 1:
            raise ConfigError("budgets must be >= 1")

    @property
    def final_labeled(self) -> int:
        return self.initial_budget + (self.cycles - 1) * self.budget_per_cycle


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    model: ModelConfig
    trainer: TrainConfig
    loop: LoopConfig
    seeds: tuple[int, ...]
    cmam: CmamConfig = CmamConfig()
    sampler: str = "rankedms"
    output_dir: str | None = None

    def __post_init__(self):
        if self.sampler not in SAMPLERS:
            raise ConfigError(
                f"unknown sampler {self.sampler!r}; expected one of {tuple(SAMPLERS)}"
            )
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.cmam.enabled and self.loop.initial_budget < 2:
            raise ConfigError("cross-mix training needs an initial budget of at least 2")


@dataclass(frozen=True)
class CycleReport:
    cycle: int
    seed: int
    labeled_count: int
    test_accuracy: float
    oe: float
    ece: float
    train_seconds: float


def _take(mapping, allowed, context: str) -> dict:
    if not isinstance(mapping, dict):
        raise ConfigError(f"{context}: expected a mapping, got {type(mapping).__name__}")
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"{context}: unknown keys {unknown}; allowed keys are {sorted(allowed)}")
    return dict(mapping)


def parse_config(doc: dict) -> ExperimentConfig:
    """Build an ExperimentConfig from a nested key-value document.

    Unknown keys at any level are errors, not warnings.
    """
    top = _take(
        doc,
        ("dataset", "model", "trainer", "cmam", "sampler", "loop", "seeds", "output_dir"),
        "config",
    )
    for required in ("dataset", "model", "trainer", "loop", "seeds"):
        if required not in top:
            raise ConfigError(f"config: missing required section {required!r}")

    ds_doc = _take(
        top["dataset"],
        ("generator", "path", "label_column", "num_classes", "test_path",
         "test_fraction", "imbalance", *_GENERATOR_PARAMS["blobs"], *_GENERATOR_PARAMS["two_moons"]),
        "dataset",
    )
    generator = ds_doc.pop("generator", None)
    imb_doc = ds_doc.pop("imbalance", None)
    all_gen_params = _GENERATOR_PARAMS["blobs"] + _GENERATOR_PARAMS["two_moons"]
    params = {}
    if generator is not None:
        if generator not in GENERATORS:
            raise ConfigError(f"dataset: unknown generator {generator!r}")
        wanted = _GENERATOR_PARAMS[generator]
        for key in list(ds_doc):
            if key in wanted:
                params[key] = ds_doc.pop(key)
        missing = sorted(set(wanted) - set(params))
        if missing:
            raise ConfigError(f"dataset: generator {generator!r} missing parameters {missing}")
    stray = sorted(k for k in ds_doc if k in all_gen_params)
    if stray:
        target = f"generator {generator!r}" if generator else "a file dataset"
        raise ConfigError(f"dataset: parameters {stray} do not apply to {target}")
    imbalance = None
    if imb_doc is not None:
        imb = _take(imb_doc, ("minority_classes", "ratio"), "dataset.imbalance")
        imbalance = ImbalanceConfig(
            minority_classes=tuple(int(c) for c in imb["minority_classes"]),
            ratio=int(imb["ratio"]),
        )
    try:
        dataset = DatasetConfig(generator=generator, params=params, imbalance=imbalance, **ds_doc)
        model = ModelConfig(**_take(top["model"], ("hidden_widths", "mix_point"), "model"))
        trainer = TrainConfig(
            **_take(
                top["trainer"],
                ("epochs", "batch_size", "learning_rate", "momentum", "weight_decay",
                 "lr_drop_fraction", "lr_drop_factor"),
                "trainer",
            )
        )
        cmam = CmamConfig(**_take(top.get("cmam", {}), ("enabled", "alpha"), "cmam"))
        loop = LoopConfig(
            **_take(top["loop"], ("initial_budget", "budget_per_cycle", "cycles"), "loop")
        )
        return ExperimentConfig(
            dataset=dataset,
            model=model,
            trainer=trainer,
            cmam=cmam,
            sampler=top.get("sampler", "rankedms"),
            loop=loop,
            seeds=tuple(int(s) for s in top["seeds"]),
            output_dir=top.get("output_dir"),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    """Parse a YAML or JSON experiment config file."""
    text = Path(path).read_text(encoding="utf-8")
    if str(path).endswith((".yaml", ".yml")):
        import yaml

        doc = yaml.safe_load(text)
    else:
        doc = json.loads(text)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config root must be a mapping")
    return parse_config(doc)


def config_as_dict(config: ExperimentConfig) -> dict:
    return dataclasses.asdict(config)


def resolve_dataset(cfg: DatasetConfig, seed: int) -> tuple[Dataset, Dataset]:
    """Materialize the (train pool, test) datasets for one trial.

    Synthetic test sets are generated fresh from a dedicated stream at
    test_fraction of the pool size; file datasets use test_path when given and
    a seeded holdout split otherwise. Imbalance, when configured, subsamples
    the train pool only and is redrawn per seed.
    """
    gen_rng = RngStream(seed, "data-gen")
    test_rng = RngStream(seed, "test-data-gen")
    if cfg.generator == "blobs":
        p = cfg.params
        train = gen_blobs(p["n_per_class"], p["num_classes"], p["dim"], p["spread"], gen_rng)
        n_test = max(1, round(cfg.test_fraction * p["n_per_class"]))
        test = gen_blobs(n_test, p["num_classes"], p["dim"], p["spread"], test_rng)
    elif cfg.generator == "two_moons":
        p = cfg.params
        train = gen_two_moons(p["n"], p["noise"], gen_rng)
        test = gen_two_moons(max(2, round(cfg.test_fraction * p["n"])), p["noise"], test_rng)
    else:
        full = load_csv(cfg.path, cfg.label_column, cfg.num_classes)
        if cfg.test_path is not None:
            train = full
            test = load_csv(cfg.test_path, cfg.label_column, cfg.num_classes)
        else:
            n_test = max(1, round(cfg.test_fraction * full.n))
            if n_test >= full.n:
                raise ConfigError("test_fraction leaves no training rows")
            perm = test_rng.gen.permutation(full.n)
            test_idx = sorted(int(i) for i in perm[:n_test])
            train_idx = sorted(int(i) for i in perm[n_test:])
            train = Dataset(
                full.features[train_idx],
                tuple(full.labels[i] for i in train_idx),
                full.num_classes,
            )
            test = Dataset(
                full.features[test_idx],
                tuple(full.labels[i] for i in test_idx),
                full.num_classes,
            )
    if cfg.imbalance is not None:
        train = make_imbalanced(
            train, cfg.imbalance.minority_classes, cfg.imbalance.ratio, gen_rng.substream(1)
        )
    return train, test


def _select_indices(config: ExperimentConfig, model, train: Dataset, pool: PoolState,
                    seed: int, cycle: int) -> list[int]:
    b = config.loop.budget_per_cycle
    if config.sampler == "random":
        return select_random(pool, b, RngStream(seed, "select-tiebreak", (cycle,)))
    scorer, direction = SAMPLERS[config.sampler]
    probs = predict_proba(model, train.features[list(pool.unlabeled)])
    candidates = [
        ScoredCandidate(pool_index=idx, score=scorer(probs[k]))
        for k, idx in enumerate(pool.unlabeled)
    ]
    return select_batch(candidates, b, direction)


def run_trial(config: ExperimentConfig, seed: int, record_sink=None) -> list[CycleReport]:
    """One full active-learning trial: cycle 1 trains on a random initial pool;
    each later cycle scores the unlabeled pool with the configured sampler,
    labels the per-cycle budget, retrains from scratch, and evaluates.

    record_sink, when given, is called as record_sink(cycle, records) with the
    per-sample evaluation records of each cycle.
    """
    train, test = resolve_dataset(config.dataset, seed)
    loop = config.loop
    if loop.final_labeled > train.n:
        raise ConfigError(
            f"budget exhausted: {loop.final_labeled} labels needed over "
            f"{loop.cycles} cycles but the pool holds {train.n}"
        )
    if train.dim != test.dim or train.num_classes != test.num_classes:
        raise ConfigError("train and test datasets disagree on shape or classes")

    pool = init_pool(train, loop.initial_budget, RngStream(seed, "init"))
    model = None
    reports = []
    for cycle in range(1, loop.cycles + 1):
        if cycle > 1:
            selected = _select_indices(config, model, train, pool, seed, cycle)
            before = len(pool.labeled)
            pool = apply_selection(pool, selected)
            assert len(pool.labeled) == before + loop.budget_per_cycle
        started = time.perf_counter()
        model = init_model(
            [train.dim, *config.model.hidden_widths],
            train.num_classes,
            RngStream(seed, "init", (cycle,)),
        )
        fit(
            model,
            train,
            pool,
            config.trainer,
            RngStream(seed, "shuffle", (cycle,)),
            use_cmam=config.cmam.enabled,
            mix_point=config.model.mix_point,
            alpha=config.cmam.alpha,
            beta_rng=RngStream(seed, "beta", (cycle,)),
        )
        train_seconds = time.perf_counter() - started
        records = evaluate(model, test)
        reports.append(
            CycleReport(
                cycle=cycle,
                seed=seed,
                labeled_count=len(pool.labeled),
                test_accuracy=accuracy(records),
                oe=overconfidence_error(records),
                ece=expected_calibration_error(records),
                train_seconds=train_seconds,
            )
        )
        if record_sink is not None:
            record_sink(cycle, records)
    return reports


def _mean_std(values) -> dict:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return {"mean": mean, "std": 0.0}
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return {"mean": mean, "std": var**0.5}


def summarize(config: ExperimentConfig, reports) -> dict:
    """Per-cycle mean and sample std (n-1 denominator) over seeds, per metric."""
    by_cycle: dict[int, list[CycleReport]] = {}
    for r in reports:
        by_cycle.setdefault(r.cycle, []).append(r)
    cycles = []
    for cycle in sorted(by_cycle):
        rows = by_cycle[cycle]
        labeled = {r.labeled_count for r in rows}
        if len(labeled) != 1:
            raise ValueError(f"cycle {cycle}: labeled counts differ across trials: {labeled}")
        cycles.append(
            {
                "cycle": cycle,
                "labeled": labeled.pop(),
                "accuracy": _mean_std([r.test_accuracy for r in rows]),
                "oe": _mean_std([r.oe for r in rows]),
                "ece": _mean_std([r.ece for r in rows]),
            }
        )
    return {"config": config_as_dict(config), "num_trials": len(config.seeds), "cycles": cycles}


def run_experiment(config: ExperimentConfig, record_sink=None):
    """Run every seed's trial sequentially and aggregate.

    Returns (reports, summary): all CycleReports in seed order, and the
    per-cycle mean/std summary. record_sink, when given, is called as
    record_sink(seed, cycle, records).
    """
    reports: list[CycleReport] = []
    for seed in config.seeds:
        sink = None
        if record_sink is not None:
            sink = lambda cycle, records, _seed=seed: record_sink(_seed, cycle, records)
        try:
            reports.extend(run_trial(config, seed, record_sink=sink))
        except ConfigError:
            raise
        except Exception as exc:
            raise RuntimeError(f"trial with seed {seed} failed: {exc}") from exc
    return reports, summarize(config, reports)


def emit_reports(reports, summary: dict, out_dir, sample_dumps=None) -> list[str]:
    """Write cycles.csv and summary.json (plus optional per-sample dumps).

    sample_dumps maps (seed, cycle) to evaluation records; each lands in
    seed_{seed}/samples_cycle_{cycle}.csv. Returns the written paths.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("no cycle reports to emit")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        cycles_path = out / "cycles.csv"
        with open(cycles_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(CYCLES_CSV_HEADER + "\n")
            for r in reports:
                fh.write(
                    f"{r.cycle},{r.seed},{r.labeled_count},{r.test_accuracy!r},"
                    f"{r.oe!r},{r.ece!r},{r.train_seconds!r}\n"
                )
        written.append(str(cycles_path))
        summary_path = out / "summary.json"
        summary_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        written.append(str(summary_path))
        if sample_dumps:
            for (seed, cycle), records in sorted(sample_dumps.items()):
                seed_dir = out / f"seed_{seed}"
                seed_dir.mkdir(exist_ok=True)
                dump_path = seed_dir / f"samples_cycle_{cycle}.csv"
                save_records_csv(records, dump_path)
                written.append(str(dump_path))
        return written
    except OSError as exc:
        raise OSError(f"failed writing reports under {out}: {exc}") from exc
