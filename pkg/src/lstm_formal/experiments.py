"""Training trials, sweeps over the experiment grid, and their CSV outputs."""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import json
import logging
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lstm_formal.distributions import PRESETS, DistributionSpec, LengthWindow, sample_lengths
from lstm_formal.encoding import input_indices, target_matrix
from lstm_formal.evaluation import EvalConfig, ErrorProfile, evaluate
from lstm_formal.languages import Language, Sample, generate_sample
from lstm_formal.lstm import (
    Gradients,
    LstmParameters,
    NonFiniteError,
    OptimizerState,
    apply_update,
    backward_arrays,
    init_trial_parameters,
    save_checkpoint,
)

log = logging.getLogger(__name__)

_PARSERS = {
    "language": Language.parse,
    "distribution": DistributionSpec.parse,
    "window": LengthWindow.parse,
}


@dataclass(frozen=True)
class ExperimentConfig:
    language: Language = Language.ANBN
    distribution: DistributionSpec = PRESETS["uniform"]
    window: LengthWindow = LengthWindow(1, 50)
    hidden_units: int = 2
    training_set_size: int = 1000
    epochs: int = 100
    trials: int = 10
    k: int = 5
    max_n: int = 1000
    optimizer: str = "adam"
    lr: float = 1e-3
    grad_clip: float | None = None
    data_seed: int = 0
    trial_seed_base: int = 0
    resample_each_epoch: bool = False
    recurrent_only_reseed: bool = False

    def __post_init__(self):
        if self.trials < 1 or self.training_set_size < 1:
            raise ValueError("trials and training_set_size must be >= 1")
        if self.hidden_units < 1 or self.epochs < 0:
            raise ValueError("hidden_units must be >= 1 and epochs >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.grad_clip is not None and not self.grad_clip > 0:
            raise ValueError("grad_clip must be positive when set")
        EvalConfig(self.k, self.max_n)

    @property
    def eval(self) -> EvalConfig:
        return EvalConfig(self.k, self.max_n)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            out[f.name] = value.value if isinstance(value, Language) else str(value) if f.name in _PARSERS else value
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kwargs = {}
        for key, value in data.items():
            kwargs[key] = _PARSERS[key](value) if key in _PARSERS and isinstance(value, str) else value
        return cls(**kwargs)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def slug(self) -> str:
        return f"{self.language.value}_{self.distribution}_{self.window.lo}-{self.window.hi}_h{self.hidden_units}".replace(":", "-").replace(",", "-")


@dataclass(frozen=True)
class EpochRecord:
    trial: int
    epoch: int
    training_loss: float
    error_profile: ErrorProfile


@dataclass
class TrialResult:
    records: list[EpochRecord]
    params: LstmParameters
    training_ns: np.ndarray = field(repr=False)


def _draw_lengths(cfg: ExperimentConfig, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return sample_lengths(cfg.distribution, cfg.window, rng, cfg.training_set_size)


def build_training_set(cfg: ExperimentConfig) -> list[Sample]:
    return [generate_sample(cfg.language, int(n)) for n in _draw_lengths(cfg, cfg.data_seed)]


class _EncodedSamples(dict):
    """Encoded (inputs, targets) arrays keyed by n, built on first use."""

    def __init__(self, lang: Language):
        super().__init__()
        self.lang = lang

    def __missing__(self, n: int):
        sample = generate_sample(self.lang, n)
        self[n] = value = (input_indices(sample), target_matrix(sample))
        return value


def train(cfg: ExperimentConfig, trial_index: int) -> TrialResult:
    """Train one trial; evaluate after every epoch."""
    trial_seed = cfg.trial_seed_base + trial_index
    d = cfg.language.order
    params = init_trial_parameters(d, cfg.hidden_units, cfg.trial_seed_base, trial_seed, cfg.recurrent_only_reseed)
    opt = OptimizerState(rule=cfg.optimizer, lr=cfg.lr)
    shuffle_rng = np.random.default_rng([trial_seed, 1])
    encoded = _EncodedSamples(cfg.language)
    ns = _draw_lengths(cfg, cfg.data_seed)
    grad = Gradients.zeros(d, cfg.hidden_units)
    records = []
    for epoch in range(cfg.epochs):
        if cfg.resample_each_epoch and epoch > 0:
            ns = _draw_lengths(cfg, [cfg.data_seed, epoch])
        total = 0.0
        for idx in shuffle_rng.permutation(len(ns)):
            n = int(ns[idx])
            xs, Y = encoded[n]
            _, loss = backward_arrays(params, xs, Y, out=grad)
            if not (math.isfinite(loss) and np.all(np.isfinite(grad.flat))):
                raise NonFiniteError(
                    f"non-finite loss/gradient in trial {trial_index}, epoch {epoch}, sample n={n} (loss={loss})"
                )
            total += loss
            if cfg.grad_clip is not None:
                norm = float(np.linalg.norm(grad.flat))
                if norm > cfg.grad_clip:
                    grad.flat *= cfg.grad_clip / norm
            apply_update(params, grad, opt)
        mean_loss = total / len(ns)
        profile = evaluate(params, cfg.language, cfg.eval, loss_at_eval=mean_loss)
        records.append(EpochRecord(trial_index, epoch, mean_loss, profile))
        log.debug("trial %d epoch %d loss %.6g errors %s", trial_index, epoch, mean_loss, profile.slots())
    return TrialResult(records, params, ns)


def run_trial(cfg: ExperimentConfig, trial_index: int) -> list[EpochRecord]:
    return train(cfg, trial_index).records


def capacity_grid(language: Language) -> list[int]:
    return {Language.ANBN: [1, 2, 3, 36], Language.ANBNCN: [2, 3, 4, 36], Language.ANBNCNDN: [3, 4, 5, 36]}[language]


_DEFAULT_HIDDEN = {Language.ANBN: 2, Language.ANBNCN: 3, Language.ANBNCNDN: 4}
WINDOWS = [LengthWindow(1, 30), LengthWindow(1, 50), LengthWindow(50, 100)]


def preset_grid(name: str, language: Language, **overrides) -> list[ExperimentConfig]:
    """The three sweeps: ``distribution``, ``window`` and ``capacity``."""
    base = dict(language=language, hidden_units=_DEFAULT_HIDDEN[language], window=LengthWindow(1, 50))
    base.update(overrides)
    if name == "distribution":
        return [ExperimentConfig(**{**base, "distribution": spec}) for spec in PRESETS.values()]
    if name == "window":
        return [ExperimentConfig(**{**base, "window": w}) for w in WINDOWS]
    if name == "capacity":
        return [ExperimentConfig(**{**base, "hidden_units": h}) for h in capacity_grid(language)]
    raise ValueError(f"unknown preset {name!r}; expected distribution, window or capacity")


def expand_grid(doc: dict | list) -> list[ExperimentConfig]:
    """A flat config object (list-valued keys form a cartesian product), or a list of them."""
    if isinstance(doc, list):
        return [cfg for item in doc for cfg in expand_grid(item)]
    if not isinstance(doc, dict):
        raise ValueError("sweep config must be a JSON object or a list of objects")
    keys = sorted(doc)
    axes = [doc[k] if isinstance(doc[k], list) else [doc[k]] for k in keys]
    return [ExperimentConfig.from_dict(dict(zip(keys, combo))) for combo in itertools.product(*axes)]


def _fmt_float(x: float) -> str:
    return repr(float(x))


def trial_csv_header(k: int) -> list[str]:
    return ["trial", "epoch", "loss"] + [f"e{i}" for i in range(1, k + 1)] + [f"e{i}_censored" for i in range(1, k + 1)]


def trial_csv(records: list[EpochRecord], k: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trial_csv_header(k))
    for rec in records:
        slots = rec.error_profile.slots()
        w.writerow(
            [rec.trial, rec.epoch, _fmt_float(rec.training_loss)]
            + ["" if e is None else e for e in slots]
            + [int(e is None) for e in slots]
        )
    return buf.getvalue()


def read_trial_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    k = sum(1 for key in rows[0] if key.startswith("e") and key[1:].isdigit()) if rows else 0
    out = []
    for row in rows:
        slots = [None if row[f"e{i}_censored"] == "1" else int(row[f"e{i}"]) for i in range(1, k + 1)]
        out.append({"trial": int(row["trial"]), "epoch": int(row["epoch"]), "loss": float(row["loss"]), "errors": slots})
    return out


def aggregate(trials: list[list[EpochRecord]], k: int) -> list[dict]:
    """Per-epoch mean of each e-slot over the trials where it is not censored."""
    by_epoch: dict[int, list[EpochRecord]] = {}
    for records in trials:
        for rec in records:
            by_epoch.setdefault(rec.epoch, []).append(rec)
    rows = []
    for epoch in sorted(by_epoch):
        row = {"epoch": epoch}
        slots = [rec.error_profile.slots() for rec in by_epoch[epoch]]
        for i in range(k):
            values = [s[i] for s in slots if s[i] is not None]
            row[f"mean_e{i + 1}"] = sum(values) / len(values) if values else None
            row[f"censored_trials_e{i + 1}"] = len(slots) - len(values)
        rows.append(row)
    return rows


def aggregate_csv(rows: list[dict], k: int) -> str:
    header = ["epoch"] + [f"mean_e{i}" for i in range(1, k + 1)] + [f"censored_trials_e{i}" for i in range(1, k + 1)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if row[h] is None else _fmt_float(row[h]) if h.startswith("mean") else row[h] for h in header])
    return buf.getvalue()


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    tmp.replace(path)


def write_trial(out_dir: Path, cfg: ExperimentConfig, result: TrialResult, trial_index: int) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_atomic(out_dir / f"trial_{trial_index:03d}.csv", trial_csv(result.records, cfg.k))
    meta = {"language": cfg.language.value, "trial": trial_index, "config": cfg.to_dict()}
    save_checkpoint(out_dir / f"trial_{trial_index:03d}.ckpt", result.params, meta)


def _run_cell(cfg: ExperimentConfig, cell_dir: Path) -> str | None:
    """Run every trial of one grid cell; returns an error message instead of raising."""
    cell_dir.mkdir(parents=True, exist_ok=True)
    _write_atomic(cell_dir / "config.json", json.dumps(cfg.to_dict(), sort_keys=True, indent=2) + "\n")
    trials = []
    try:
        for t in range(cfg.trials):
            result = train(cfg, t)
            write_trial(cell_dir, cfg, result, t)
            trials.append(result.records)
    except Exception as exc:
        msg = f"{type(exc).__name__}: {exc}"
        _write_atomic(cell_dir / "error.txt", msg + "\n" + traceback.format_exc())
        return msg
    _write_atomic(cell_dir / "aggregate.csv", aggregate_csv(aggregate(trials, cfg.k), cfg.k))
    return None


def run_sweep(grid: list[ExperimentConfig], out_dir: str | Path, jobs: int = 1) -> Path:
    """Run every cell; failed cells leave an ``error.txt`` and are listed in ``summary.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cell_dirs = [out_dir / f"cell_{i:03d}_{cfg.slug()}" for i, cfg in enumerate(grid)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            errors = list(pool.map(_run_cell, grid, cell_dirs))
    else:
        errors = [_run_cell(cfg, d) for cfg, d in zip(grid, cell_dirs)]
    summary = [
        {"cell": d.name, "status": "ok" if err is None else "failed", "error": err}
        for d, err in zip(cell_dirs, errors)
    ]
    _write_atomic(out_dir / "summary.json", json.dumps(summary, indent=2) + "\n")
    return out_dir
