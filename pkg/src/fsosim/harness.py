"""Experiment orchestration: config files, Es/N0 sweeps, and CSV output.

Config files are `key = value` lines with `#` comments. A minimal file
names the modulation order, turbulence regime (or explicit alpha/beta),
transceiver kind, Es/N0 grid, and master seed; everything else has tuned
defaults.

Reproducibility contract: every random stream in a sweep derives from
``SeedSequence((master_seed, point_index, role))`` with role 0 for training
and 1 for evaluation, so adding grid points never perturbs the streams of
existing points, and rerunning a config yields byte-identical data rows.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .mimo import CombinerKind, LinkConfig
from .neural import ActivationKind, activation_from_name
from .transceivers import (
    CsiMode,
    DegenerateConstellation,
    SerEstimate,
    TrainConfig,
    TrainingDiverged,
    TransceiverKind,
    evaluate_ser,
    qam_ml_transceiver,
    train,
)
from .turbulence import GammaGammaParams, TurbulenceRegime


class ConfigError(ValueError):
    """Malformed or inconsistent simulation configuration."""


@dataclass(frozen=True)
class SimConfig:
    """One sweep: what to build, which channel, and which grid to walk."""

    order: int
    turbulence: GammaGammaParams | None
    kind: TransceiverKind
    esn0_grid_db: tuple[float, ...]
    seed: int
    n_t: int = 1
    n_r: int = 1
    eta: float = 1.0
    normalize_tx_power: bool = False
    combiner: CombinerKind = CombinerKind.MRC
    csi_mode: CsiMode = CsiMode.EQUALIZED
    symbols_per_point: int = 100_000
    train: TrainConfig = field(default_factory=TrainConfig)
    out: str | None = None

    def __post_init__(self):
        if self.order not in (4, 16):
            raise ConfigError(f"unsupported modulation order {self.order}")
        grid = tuple(float(v) for v in self.esn0_grid_db)
        if len(grid) == 0:
            raise ConfigError("esn0_grid_db must not be empty")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("grid not ascending")
        object.__setattr__(self, "esn0_grid_db", grid)
        if self.symbols_per_point < 100:
            raise ConfigError("symbols_per_point must be >= 100")

    @property
    def link(self) -> LinkConfig:
        return LinkConfig(
            n_t=self.n_t,
            n_r=self.n_r,
            eta=self.eta,
            turbulence=self.turbulence,
            normalize_tx_power=self.normalize_tx_power,
        )

    def metadata(self) -> dict[str, str]:
        """Config echo for the CSV header."""
        meta = {
            "version": __version__,
            "kind": self.kind.value,
            "m": str(self.order),
            "n_t": str(self.n_t),
            "n_r": str(self.n_r),
            "eta": repr(self.eta),
            "normalize_tx_power": str(self.normalize_tx_power).lower(),
            "combiner": self.combiner.value,
            "csi_mode": self.csi_mode.value,
            "symbols_per_point": str(self.symbols_per_point),
            "seed": str(self.seed),
        }
        if self.turbulence is None:
            meta["turbulence"] = "none"
        else:
            meta["alpha"] = repr(self.turbulence.alpha)
            meta["beta"] = repr(self.turbulence.beta)
        tc = self.train
        meta.update(
            hidden_layers=str(tc.hidden_layers),
            neurons_per_layer=str(tc.neurons_per_layer),
            activation="auto" if tc.activation is None else tc.activation.name,
            batch_size=str(tc.batch_size),
            iterations=str(tc.iterations),
            learning_rate=repr(tc.learning_rate),
            optimizer=tc.optimizer,
            train_esn0_db="auto" if tc.train_esn0_db is None else repr(tc.train_esn0_db),
        )
        return meta


@dataclass(frozen=True)
class SweepPoint:
    """One grid point: the SER estimate plus training outcome."""

    esn0_db: float
    ser: float
    ci_low: float
    ci_high: float
    n_symbols: int
    n_errors: int
    final_train_loss: float
    failure: str | None = None


@dataclass
class SweepResult:
    config: SimConfig
    points: list[SweepPoint]
    wall_time_s: float = 0.0

    @property
    def failed(self) -> bool:
        return any(p.failure is not None for p in self.points)


_REQUIRED_KEYS = ("m", "kind", "esn0_grid_db", "seed")

_KNOWN_KEYS = {
    "m", "regime", "alpha", "beta", "kind", "esn0_grid_db", "seed",
    "n_t", "n_r", "eta", "normalize_tx_power", "combiner", "csi_mode",
    "symbols_per_point", "hidden_layers", "neurons_per_layer", "activation",
    "batch_size", "iterations", "learning_rate", "optimizer",
    "train_esn0_db", "out",
}


def _parse_bool(value: str, line_no: int) -> bool:
    if value.lower() in ("true", "yes", "1"):
        return True
    if value.lower() in ("false", "no", "0"):
        return False
    raise ConfigError(f"line {line_no}: expected a boolean, got {value!r}")


def parse_config(text: str) -> SimConfig:
    """Parse and validate the key-value config format."""
    raw: dict[str, tuple[str, int]] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        raw[key] = (value, line_no)

    for key in _REQUIRED_KEYS:
        if key not in raw:
            raise ConfigError(f"missing required key: {key}")
    if "regime" not in raw and not ("alpha" in raw and "beta" in raw):
        raise ConfigError("missing turbulence: set 'regime' or both 'alpha' and 'beta'")
    if "regime" in raw and ("alpha" in raw or "beta" in raw):
        raise ConfigError("set either 'regime' or explicit alpha/beta, not both")

    def take(key, convert, default=None):
        if key not in raw:
            return default
        value, line_no = raw[key]
        try:
            return convert(value)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"line {line_no}: bad value for {key}: {value!r} ({exc})") from exc

    if "regime" in raw:
        value, line_no = raw["regime"]
        if value.lower() == "none":
            turbulence = None
        else:
            try:
                turbulence = TurbulenceRegime(value.lower()).params
            except ValueError:
                raise ConfigError(f"line {line_no}: unknown regime {value!r}") from None
    else:
        try:
            turbulence = GammaGammaParams(alpha=take("alpha", float), beta=take("beta", float))
        except ValueError as exc:
            raise ConfigError(f"line {raw['alpha'][1]}: {exc}") from exc

    def parse_grid(value: str) -> tuple[float, ...]:
        return tuple(float(v) for v in value.split(","))

    def parse_activation(value: str) -> ActivationKind | None:
        return None if value.lower() == "auto" else activation_from_name(value)

    def parse_train_esn0(value: str) -> float | None:
        return None if value.lower() == "auto" else float(value)

    train_cfg = TrainConfig(
        hidden_layers=take("hidden_layers", int, 4),
        neurons_per_layer=take("neurons_per_layer", int, 40),
        activation=take("activation", parse_activation),
        batch_size=take("batch_size", int, 4096),
        iterations=take("iterations", int, 1000),
        learning_rate=take("learning_rate", float, 0.005),
        optimizer=take("optimizer", str, "adam"),
        train_esn0_db=take("train_esn0_db", parse_train_esn0),
    )

    return SimConfig(
        order=take("m", int),
        turbulence=turbulence,
        kind=take("kind", TransceiverKind),
        esn0_grid_db=take("esn0_grid_db", parse_grid),
        seed=take("seed", int),
        n_t=take("n_t", int, 1),
        n_r=take("n_r", int, 1),
        eta=take("eta", float, 1.0),
        normalize_tx_power=take(
            "normalize_tx_power", lambda v: _parse_bool(v, raw["normalize_tx_power"][1]), False
        ),
        combiner=take("combiner", lambda v: CombinerKind(v.lower()), CombinerKind.MRC),
        csi_mode=take("csi_mode", lambda v: CsiMode(v.lower()), CsiMode.EQUALIZED),
        symbols_per_point=take("symbols_per_point", int, 100_000),
        train=train_cfg,
        out=take("out", str),
    )


def parse_config_file(path) -> SimConfig:
    return parse_config(Path(path).read_text())


def point_rngs(master_seed: int, index: int) -> tuple[np.random.Generator, np.random.Generator]:
    """(training, evaluation) generators for one grid point."""
    train_rng = np.random.default_rng(np.random.SeedSequence((master_seed, index, 0)))
    eval_rng = np.random.default_rng(np.random.SeedSequence((master_seed, index, 1)))
    return train_rng, eval_rng


def run_point(cfg: SimConfig, index: int) -> SweepPoint:
    """Train (if the kind needs it) and evaluate one grid point."""
    esn0 = cfg.esn0_grid_db[index]
    train_rng, eval_rng = point_rngs(cfg.seed, index)
    final_loss = float("nan")
    try:
        if cfg.kind.trains:
            point_train = cfg.train
            if point_train.train_esn0_db is None:
                point_train = replace(point_train, train_esn0_db=esn0)
            tr, history = train(
                cfg.kind, cfg.order, cfg.link, cfg.combiner, point_train,
                rng=train_rng, csi_mode=cfg.csi_mode,
            )
            final_loss = float(history[-1])
        else:
            tr = qam_ml_transceiver(cfg.order, cfg.link)
        est = evaluate_ser(
            tr, cfg.link, cfg.combiner, esn0, cfg.symbols_per_point, eval_rng
        )
    except (TrainingDiverged, DegenerateConstellation) as exc:
        return SweepPoint(
            esn0_db=esn0, ser=float("nan"), ci_low=float("nan"), ci_high=float("nan"),
            n_symbols=0, n_errors=0, final_train_loss=final_loss, failure=str(exc),
        )
    return SweepPoint(
        esn0_db=esn0, ser=est.ser, ci_low=est.ci_low, ci_high=est.ci_high,
        n_symbols=est.n_symbols, n_errors=est.n_errors, final_train_loss=final_loss,
    )


def run_sweep(cfg: SimConfig, csv_path=None) -> SweepResult:
    """Walk the Es/N0 grid in order, training fresh transceivers as needed.

    With `csv_path` given, rows are flushed to disk as they complete so an
    interrupted run leaves a salvageable partial file; the finished file
    carries the same metadata and data rows as `emit_csv` output (only the
    wall-time comment placement differs).
    """
    started = time.perf_counter()
    result = SweepResult(config=cfg, points=[])
    writer = None
    if csv_path is not None:
        writer = open(csv_path, "w")
        _write_header(writer, cfg.metadata())
    try:
        for index in range(len(cfg.esn0_grid_db)):
            point = run_point(cfg, index)
            result.points.append(point)
            if writer is not None:
                _write_point(writer, point)
                writer.flush()
    finally:
        if writer is not None:
            result.wall_time_s = time.perf_counter() - started
            writer.write(f"# wall_time_s = {result.wall_time_s:.3f}\n")
            writer.close()
    result.wall_time_s = time.perf_counter() - started
    return result


CSV_COLUMNS = ("esn0_db", "ser", "ci_low", "ci_high", "n_symbols", "n_errors", "final_train_loss")


def _write_header(fh, metadata: dict[str, str]) -> None:
    fh.write("# fsosim sweep result\n")
    for key, value in metadata.items():
        fh.write(f"# {key} = {value}\n")
    fh.write(",".join(CSV_COLUMNS) + "\n")


def _write_point(fh, p: SweepPoint) -> None:
    if p.failure is not None:
        fh.write(f"# point at {p.esn0_db!r} dB failed: {p.failure}\n")
    fields = [
        repr(float(p.esn0_db)), repr(float(p.ser)), repr(float(p.ci_low)),
        repr(float(p.ci_high)), str(p.n_symbols), str(p.n_errors),
        repr(float(p.final_train_loss)),
    ]
    fh.write(",".join(fields) + "\n")


def emit_csv(result: SweepResult, path) -> Path:
    """Write the sweep to CSV: metadata comments, header row, one row per point."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(path, "w") as fh:
            meta = dict(result.config.metadata())
            meta["wall_time_s"] = f"{result.wall_time_s:.3f}"
            _write_header(fh, meta)
            for point in result.points:
                _write_point(fh, point)
    except OSError as exc:
        raise OSError(f"cannot write sweep CSV to {path}: {exc}") from exc
    return path


def read_sweep_csv(path) -> tuple[list[str], list[dict[str, float]]]:
    """Parse back an emitted CSV; returns (comment lines, row dicts)."""
    comments, rows = [], []
    header = None
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            comments.append(line)
            continue
        if not line.strip():
            continue
        if header is None:
            header = line.split(",")
            if tuple(header) != CSV_COLUMNS:
                raise ValueError(f"{path}: unexpected CSV header {header!r}")
            continue
        values = line.split(",")
        row = {key: float(v) for key, v in zip(header, values)}
        rows.append(row)
    if header is None:
        raise ValueError(f"{path}: no header row found")
    return comments, rows
