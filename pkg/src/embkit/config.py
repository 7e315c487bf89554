"""Experiment configuration: flat key=value files, overrides, provenance.

Grammar: one ``key = value`` pair per line; blank lines and ``#`` comments
ignored. Values are typed by the schema below; unknown keys are rejected.
Command-line overrides take precedence over file keys, and the resolved
configuration is rendered back to the same grammar and written next to the
outputs so every run can be replayed.
"""

from dataclasses import dataclass, fields

from .net import TrainConfig


class ConfigError(ValueError):
    """Bad configuration file or override."""


def _parse_bool(s):
    low = s.strip().lower()
    if low in ("true", "1", "yes", "on"):
        return True
    if low in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {s!r}")


def _parse_int_tuple(s):
    try:
        return tuple(int(p) for p in s.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {s!r}") from None


def _opt(parser):
    def run(s):
        return None if s.strip().lower() in ("none", "") else parser(s)
    return run


@dataclass
class ExperimentConfig:
    """Everything a run needs: training, dataset, evaluation, simulation."""

    # training
    loss: str = "margin"
    sampler: str = "distance_weighted"
    alpha: float = 0.2
    beta0: float = 1.2
    nu: float = 0.0
    learn_beta: bool = True
    use_beta_img: bool = False
    batch_size: int = 40
    m_per_class: int = 5
    epochs: int = 50
    lr: float = 0.01
    lr_beta: float | None = None
    hidden: tuple = (64, 64)
    embed_dim: int = 128
    semihard_floor: float = 0.5
    weight_lambda: float | None = None
    weight_d_floor: float = 0.5
    weight_d_ceil: float = 1.4
    eval_ks: tuple = (1, 2, 4, 8)
    eval_fraction: float = 0.2
    seed: int = 1
    # dataset: a file path, or the synthetic generator below
    dataset: str | None = None
    synthetic_classes: int = 10
    synthetic_per_class: int = 20
    synthetic_dim: int = 20
    synthetic_spread: float = 0.35
    synthetic_radius: float = 1.0
    dataset_seed: int = 7
    # simulations
    sim_dims: tuple = (4, 8, 16, 32, 64, 128)
    sim_dim: int = 64
    sim_sigma: float = 0.05
    sim_grid_start: float = 0.05
    sim_grid_stop: float = 1.85
    sim_grid_step: float = 0.05
    sim_replicates: int = 10000
    sim_noise_mode: str = "reproject"
    sim_draws: int = 100000
    sim_classes: int = 16
    sim_m: int = 8
    sim_bin_width: float = 0.02
    sim_log_interval: int = 1
    sim_stability_ms: tuple = (2, 10)
    sim_stability_epochs: int = 15
    # isotonic verification sweep
    isotonic_instances: int = 1000
    isotonic_max_pos: int = 5
    isotonic_max_neg: int = 5
    isotonic_seed: int = 1


_PARSERS = {
    "loss": str, "sampler": str, "alpha": float, "beta0": float, "nu": float,
    "learn_beta": _parse_bool, "use_beta_img": _parse_bool,
    "batch_size": int, "m_per_class": int, "epochs": int,
    "lr": float, "lr_beta": _opt(float),
    "hidden": _parse_int_tuple, "embed_dim": int,
    "semihard_floor": float, "weight_lambda": _opt(float),
    "weight_d_floor": float, "weight_d_ceil": float,
    "eval_ks": _parse_int_tuple, "eval_fraction": float, "seed": int,
    "dataset": _opt(str),
    "synthetic_classes": int, "synthetic_per_class": int,
    "synthetic_dim": int, "synthetic_spread": float,
    "synthetic_radius": float, "dataset_seed": int,
    "sim_dims": _parse_int_tuple, "sim_dim": int, "sim_sigma": float,
    "sim_grid_start": float, "sim_grid_stop": float, "sim_grid_step": float,
    "sim_replicates": int, "sim_noise_mode": str, "sim_draws": int,
    "sim_classes": int, "sim_m": int, "sim_bin_width": float,
    "sim_log_interval": int, "sim_stability_ms": _parse_int_tuple,
    "sim_stability_epochs": int,
    "isotonic_instances": int, "isotonic_max_pos": int,
    "isotonic_max_neg": int, "isotonic_seed": int,
}


def parse_config_file(path):
    """Read a key=value file into a raw string mapping."""
    raw = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"{path}: line {lineno}: expected key = value")
            key, _, value = stripped.partition("=")
            raw[key.strip()] = value.strip()
    return raw


def resolve_config(file_values=None, overrides=None):
    """Typed ExperimentConfig from file values plus overrides (both raw strings)."""
    merged = dict(file_values or {})
    merged.update(overrides or {})
    cfg = ExperimentConfig()
    for key, raw in merged.items():
        if key not in _PARSERS:
            raise ConfigError(f"unknown configuration key {key!r}")
        try:
            setattr(cfg, key, _PARSERS[key](raw))
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from None
    try:
        train_config(cfg)  # validate the training slice eagerly
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def train_config(cfg):
    """The TrainConfig slice of an ExperimentConfig."""
    names = {f.name for f in fields(TrainConfig)}
    return TrainConfig(**{f.name: getattr(cfg, f.name)
                          for f in fields(ExperimentConfig) if f.name in names})


def render_config(cfg):
    """Render back to the file grammar (stable field order, replayable)."""
    lines = []
    for f in fields(ExperimentConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif v is None:
            v = "none"
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
