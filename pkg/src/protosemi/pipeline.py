"""End-to-end orchestration: warm-up, split, correct, semi-train, report.

A run is: supervised warm-up on all working labels, then a main loop
that re-splits the data by prediction agreement each epoch, applies
prototype-based label correction for the first few epochs, and trains
semi-supervised on the resulting labeled/unlabeled views.  The held-out
set is scored after every epoch.  Everything is deterministic in the
run seed; the caller's dataset is never mutated (label corrections act
on an internal copy).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .data import NoisyDataset
from .errors import DegenerateClassError, FormatError, ParameterError
from .mixmatch import SemiConfig, semi_train_epoch
from .net import Network, TrainConfig, init_network, train_epoch
from .select import (
    CorrectionRecord,
    Partition,
    PrototypeMatrix,
    StatsRow,
    Thresholds,
    build_prototypes,
    correction_stats,
    repartition,
    split_by_agreement,
)

REPORT_HEADER = "protosemi-report"
VARIANTS = ("full", "no_repar", "no_semi")

_REPARTITION_STREAM = 2  # rng stream tag; shuffle owns 0, mixing owns 1

# header key order of the report file; also the config-echo contract
_ECHO_KEYS = (
    "hidden_dims", "warmup_epochs", "proto_split_epochs", "main_epochs",
    "alpha", "beta", "base_lr", "batch_size", "weight_decay",
    "k_aug", "temperature", "mix_alpha", "lambda_u", "aug_sigma",
    "eval_split", "seed",
)

_EPOCH_COLUMNS = ("epoch", "phase", "loss_labeled", "loss_unlabeled",
                  "confident", "unconfident", "heldout_accuracy")
_CORRECTION_COLUMNS = ("epoch", "unconfident_size", "small_circle",
                       "corrected", "right", "accuracy_pct")


@dataclass(frozen=True)
class PipelineConfig:
    """Full recipe for one run.

    The nested TrainConfig is normalized on construction: its seed is
    replaced by the pipeline seed and its total_epochs by
    warmup_epochs + main_epochs, so one seed and one learning-rate
    schedule govern the whole run.
    """

    hidden_dims: tuple
    warmup_epochs: int
    proto_split_epochs: int
    main_epochs: int
    thresholds: Thresholds
    train: TrainConfig
    semi: SemiConfig
    eval_split: float = 0.2
    seed: int = 0

    def __post_init__(self):
        dims = tuple(int(d) for d in self.hidden_dims)
        if len(dims) < 1 or any(d < 1 for d in dims):
            raise ParameterError(f"hidden_dims must be positive ints, got {self.hidden_dims}")
        object.__setattr__(self, "hidden_dims", dims)
        if self.warmup_epochs < 1:
            raise ParameterError("warmup_epochs must be at least 1")
        if self.main_epochs < 0:
            raise ParameterError("main_epochs must be nonnegative")
        if not 0 <= self.proto_split_epochs <= self.main_epochs:
            raise ParameterError(
                f"proto_split_epochs must lie in [0, main_epochs], got "
                f"{self.proto_split_epochs} with main_epochs={self.main_epochs}"
            )
        if not isinstance(self.thresholds, Thresholds):
            raise ParameterError("thresholds must be a Thresholds instance")
        if not 0.0 < self.eval_split < 1.0:
            raise ParameterError(f"eval_split must be in (0, 1), got {self.eval_split}")
        object.__setattr__(self, "train", dataclasses.replace(
            self.train,
            total_epochs=self.warmup_epochs + self.main_epochs,
            seed=self.seed,
        ))

    @property
    def total_epochs(self) -> int:
        return self.warmup_epochs + self.main_epochs

    def echo(self) -> dict:
        """Flat key=value view of the effective config, CLI-file style."""
        return {
            "hidden_dims": ",".join(str(d) for d in self.hidden_dims),
            "warmup_epochs": str(self.warmup_epochs),
            "proto_split_epochs": str(self.proto_split_epochs),
            "main_epochs": str(self.main_epochs),
            "alpha": repr(self.thresholds.alpha),
            "beta": repr(self.thresholds.beta),
            "base_lr": repr(self.train.base_lr),
            "batch_size": str(self.train.batch_size),
            "weight_decay": repr(self.train.weight_decay),
            "k_aug": str(self.semi.k_aug),
            "temperature": repr(self.semi.temperature),
            "mix_alpha": repr(self.semi.mix_alpha),
            "lambda_u": repr(self.semi.lambda_u),
            "aug_sigma": repr(self.semi.aug_sigma),
            "eval_split": repr(self.eval_split),
            "seed": str(self.seed),
        }


@dataclass(frozen=True)
class EpochRecord:
    """One row of the per-epoch trace."""

    epoch: int
    phase: str  # warmup | semi
    loss_labeled: float
    loss_unlabeled: float
    confident: int
    unconfident: int
    heldout_accuracy: float


@dataclass(frozen=True)
class CorrectionEpoch:
    """Correction summary of one repartition epoch."""

    epoch: int
    stats: StatsRow


@dataclass
class RunReport:
    """Everything measurable about one run."""

    variant: str
    seed: int
    config_echo: dict
    epochs: list
    corrections: list
    final_accuracy: float
    best_accuracy: float
    best_epoch: int


@dataclass
class RunResult:
    """A report plus the artifacts the report was computed from."""

    report: RunReport
    net: Network
    correction_logs: list  # [(epoch, [CorrectionRecord, ...]), ...]


def repartition_rng(seed: int, epoch: int) -> np.random.Generator:
    """The rng that draws ring-zone correction decisions for an epoch."""
    return np.random.default_rng([seed, _REPARTITION_STREAM, epoch])


def evaluate(net: Network, heldout: NoisyDataset) -> float:
    """Fraction of held-out samples whose predicted class is the true one."""
    if heldout.n == 0:
        raise ParameterError("held-out set must be nonempty")
    preds = np.argmax(net.forward(heldout.features), axis=1)
    return float(np.mean(preds == heldout.true_labels))


def run_with_artifacts(dataset: NoisyDataset, heldout: NoisyDataset,
                       config: PipelineConfig, variant: str = "full") -> RunResult:
    """Run one variant end to end, keeping the net and correction logs.

    Variants: full (the whole method), no_repar (label correction
    disabled), no_semi (warm-up only, stopping before the main loop).
    """
    if variant not in VARIANTS:
        raise ParameterError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if dataset.num_classes != heldout.num_classes or dataset.dim != heldout.dim:
        raise ParameterError("dataset and heldout must share classes and dimension")

    proto_epochs = 0 if variant == "no_repar" else config.proto_split_epochs
    main_epochs = 0 if variant == "no_semi" else config.main_epochs

    ds = dataset.copy()  # corrections must not leak into the caller's data
    net = init_network([ds.dim, *config.hidden_dims, ds.num_classes], config.seed)

    epochs: list[EpochRecord] = []
    corrections: list[CorrectionEpoch] = []
    logs: list[tuple[int, list[CorrectionRecord]]] = []

    for epoch in range(config.warmup_epochs):
        loss = train_epoch(net, ds.features, ds.working_labels, config.train, epoch)
        acc = evaluate(net, heldout)
        epochs.append(EpochRecord(epoch, "warmup", loss, 0.0, ds.n, 0, acc))

    for i in range(1, main_epochs + 1):
        epoch = config.warmup_epochs + i - 1
        part = split_by_agreement(net, ds)
        if i <= proto_epochs:
            try:
                part, log = repartition(net, ds, part, config.thresholds,
                                        repartition_rng(config.seed, epoch))
            except DegenerateClassError as err:
                raise DegenerateClassError(
                    f"epoch {epoch}: {err}", class_index=err.class_index
                ) from err
            corrections.append(CorrectionEpoch(epoch, correction_stats(log, ds)))
            logs.append((epoch, log))
        loss_l, loss_u = semi_train_epoch(
            net,
            (ds.features[part.confident_idx], part.confident_labels),
            ds.features[part.unconfident_idx],
            config.semi, config.train, epoch,
        )
        acc = evaluate(net, heldout)
        epochs.append(EpochRecord(epoch, "semi", loss_l, loss_u,
                                  int(part.confident_idx.size),
                                  int(part.unconfident_idx.size), acc))

    accuracies = [r.heldout_accuracy for r in epochs]
    best_epoch = int(np.argmax(accuracies))
    report = RunReport(
        variant=variant,
        seed=config.seed,
        config_echo=config.echo(),
        epochs=epochs,
        corrections=corrections,
        final_accuracy=accuracies[-1],
        best_accuracy=accuracies[best_epoch],
        best_epoch=best_epoch,
    )
    return RunResult(report=report, net=net, correction_logs=logs)


def run_protosemi(dataset: NoisyDataset, heldout: NoisyDataset,
                  config: PipelineConfig) -> RunReport:
    """The full method; see :func:`run_with_artifacts`."""
    return run_with_artifacts(dataset, heldout, config, "full").report


def run_ablation(dataset: NoisyDataset, heldout: NoisyDataset,
                 config: PipelineConfig, variant: str) -> RunReport:
    """One named variant: full, no_repar, or no_semi."""
    return run_with_artifacts(dataset, heldout, config, variant).report


def export_embeddings(net: Network, dataset: NoisyDataset, partition: Partition,
                      prototypes: PrototypeMatrix, path) -> None:
    """CSV of prototype rows and unconfident-sample embeddings.

    Prototype rows come first (label = class index, no true label),
    then one row per unconfident sample in ascending index order with
    its current working label and true label.  Floats round-trip.
    """
    m = prototypes.rows.shape[1]
    header = ["row_type", "label", "true_label"] + [f"e{j}" for j in range(m)]
    lines = [",".join(header)]
    for k in range(prototypes.rows.shape[0]):
        coords = [repr(float(v)) for v in prototypes.rows[k]]
        lines.append(",".join(["prototype", str(k), ""] + coords))
    if partition.unconfident_idx.size:
        embeddings = net.embed(dataset.features[partition.unconfident_idx])
        for row, i in enumerate(partition.unconfident_idx):
            coords = [repr(float(v)) for v in embeddings[row]]
            lines.append(",".join([
                "sample",
                str(int(dataset.working_labels[i])),
                str(int(dataset.true_labels[i])),
            ] + coords))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def _stats_cells(epoch: int, stats: StatsRow) -> list:
    acc = "n/a" if stats.accuracy_pct is None else repr(stats.accuracy_pct)
    return [str(epoch), str(stats.unconfident_size), str(stats.small_circle),
            str(stats.corrected), str(stats.right), acc]


def write_stats_csv(corrections: list, path) -> None:
    """Correction summaries, one row per repartition epoch."""
    lines = [",".join(_CORRECTION_COLUMNS)]
    for entry in corrections:
        lines.append(",".join(_stats_cells(entry.epoch, entry.stats)))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report(report: RunReport, path) -> None:
    """Serialize a report: key=value header, then two CSV blocks."""
    lines = [f"{REPORT_HEADER} v1"]
    lines.append(f"variant={report.variant}")
    for key in _ECHO_KEYS:
        lines.append(f"{key}={report.config_echo[key]}")
    lines.append(f"final_accuracy={report.final_accuracy!r}")
    lines.append(f"best_accuracy={report.best_accuracy!r}")
    lines.append(f"best_epoch={report.best_epoch}")
    lines.append("")
    lines.append("[epochs]")
    lines.append(",".join(_EPOCH_COLUMNS))
    for r in report.epochs:
        lines.append(",".join([
            str(r.epoch), r.phase, repr(r.loss_labeled), repr(r.loss_unlabeled),
            str(r.confident), str(r.unconfident), repr(r.heldout_accuracy),
        ]))
    lines.append("")
    lines.append("[corrections]")
    lines.append(",".join(_CORRECTION_COLUMNS))
    for entry in report.corrections:
        lines.append(",".join(_stats_cells(entry.epoch, entry.stats)))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def parse_report(path) -> RunReport:
    """Read back a report written by :func:`write_report`."""
    with open(path, encoding="ascii") as fh:
        text = fh.read()
    lines = text.splitlines()
    if not lines or lines[0] != f"{REPORT_HEADER} v1":
        raise FormatError(f"{path}: not a {REPORT_HEADER} v1 file")

    def take_kv(lineno: int, key: str) -> tuple:
        if lineno >= len(lines) or "=" not in lines[lineno]:
            raise FormatError(f"line {lineno + 1}: expected {key}=...")
        got, _, value = lines[lineno].partition("=")
        if got != key:
            raise FormatError(f"line {lineno + 1}: expected key {key}, got {got}")
        return lineno + 1, value

    pos = 1
    pos, variant = take_kv(pos, "variant")
    echo = {}
    for key in _ECHO_KEYS:
        pos, echo[key] = take_kv(pos, key)
    pos, final_acc = take_kv(pos, "final_accuracy")
    pos, best_acc = take_kv(pos, "best_accuracy")
    pos, best_epoch = take_kv(pos, "best_epoch")

    def expect(lineno: int, value: str) -> int:
        if lineno >= len(lines) or lines[lineno] != value:
            raise FormatError(f"line {lineno + 1}: expected {value!r}")
        return lineno + 1

    try:
        pos = expect(pos, "")
        pos = expect(pos, "[epochs]")
        pos = expect(pos, ",".join(_EPOCH_COLUMNS))
        epochs = []
        while pos < len(lines) and lines[pos] != "":
            cells = lines[pos].split(",")
            if len(cells) != len(_EPOCH_COLUMNS):
                raise FormatError(f"line {pos + 1}: bad epoch row")
            epochs.append(EpochRecord(
                epoch=int(cells[0]), phase=cells[1],
                loss_labeled=float(cells[2]), loss_unlabeled=float(cells[3]),
                confident=int(cells[4]), unconfident=int(cells[5]),
                heldout_accuracy=float(cells[6]),
            ))
            pos += 1
        pos = expect(pos, "")
        pos = expect(pos, "[corrections]")
        pos = expect(pos, ",".join(_CORRECTION_COLUMNS))
        corrections = []
        while pos < len(lines) and lines[pos] != "":
            cells = lines[pos].split(",")
            if len(cells) != len(_CORRECTION_COLUMNS):
                raise FormatError(f"line {pos + 1}: bad correction row")
            corrections.append(CorrectionEpoch(
                epoch=int(cells[0]),
                stats=StatsRow(
                    unconfident_size=int(cells[1]), small_circle=int(cells[2]),
                    corrected=int(cells[3]), right=int(cells[4]),
                    accuracy_pct=None if cells[5] == "n/a" else float(cells[5]),
                ),
            ))
            pos += 1
    except ValueError:
        raise FormatError(f"{path}: unparsable numeric field") from None
    try:
        return RunReport(
            variant=variant, seed=int(echo["seed"]), config_echo=echo,
            epochs=epochs, corrections=corrections,
            final_accuracy=float(final_acc), best_accuracy=float(best_acc),
            best_epoch=int(best_epoch),
        )
    except ValueError:
        raise FormatError(f"{path}: unparsable numeric field") from None
