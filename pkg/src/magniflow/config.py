"""Flat key=value run configuration with a validating registry."""

from __future__ import annotations

import os

from .errors import ConfigError

SEED_ENV_VAR = "MAGNIFLOW_SEED"


def _parse_int(text):
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {text!r}") from exc


def _parse_float(text):
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {text!r}") from exc


def _parse_int_tuple(text):
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    try:
        return tuple(int(part) for part in str(text).split(","))
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


_PARSERS = {"int": _parse_int, "float": _parse_float, "ints": _parse_int_tuple, "str": str}

# key -> (type, default); defaults follow the reference training recipe
REGISTRY = {
    "seed": ("int", 0),
    # synthetic flow dataset
    "width": ("int", 64),
    "height": ("int", 64),
    "regions": ("int", 5),
    "segments": ("int", 36),
    "m_min": ("float", 0.0),
    "m_max": ("float", 0.3),
    "alpha_min": ("float", 0.0),
    "alpha_max": ("float", 100.0),
    "scale_min": ("float", 4.0),
    "scale_max": ("float", 12.0),
    "noise_mu": ("float", -4.303),
    "noise_sigma": ("float", 0.527),
    "noise_blur_sigma": ("float", 3.0),
    # diffusion schedule and sampling
    "t_count": ("int", 1000),
    "sample_steps": ("int", 50),
    "f_max": ("float", 32.0),
    # magnifier model
    "dmm_widths": ("ints", (256, 256, 512)),
    "k_terms": ("int", 4),
    # synthesizer model and losses
    "fvs_widths": ("ints", (16, 32, 64)),
    "style_seed": ("int", 0),
    "lam_l1": ("float", 1.0),
    "lam_style": ("float", 40.0),
    # optimizer and loop
    "lr": ("float", 2e-4),
    "batch_size": ("int", 4),
    "weight_decay": ("float", 0.01),
    "steps": ("int", 20000),
    "log_every": ("int", 25),
    "eval_every": ("int", 0),
}


class RunConfig:
    """Validated settings bag; unknown keys are hard errors.

    The ``MAGNIFLOW_SEED`` environment variable overrides the seed from any
    file or flag so scripted reruns can pin determinism externally.
    """

    def __init__(self, values=None):
        self._values = {key: default for key, (_, default) in REGISTRY.items()}
        for key, value in (values or {}).items():
            self.set(key, value)
        env_seed = os.environ.get(SEED_ENV_VAR)
        if env_seed is not None:
            self._values["seed"] = _parse_int(env_seed)

    def set(self, key: str, value) -> None:
        if key not in REGISTRY:
            raise ConfigError(f"unknown config key {key!r}")
        kind = REGISTRY[key][0]
        self._values[key] = _PARSERS[kind](value)

    def __getitem__(self, key: str):
        if key not in REGISTRY:
            raise ConfigError(f"unknown config key {key!r}")
        return self._values[key]

    def as_dict(self) -> dict:
        return dict(self._values)


def parse_config_text(text: str) -> dict:
    """key = value lines; blank lines and ``#`` comments ignored."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def load_config(path=None, overrides=None) -> RunConfig:
    """Build a RunConfig from an optional file plus key=value overrides."""
    values = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as handle:
                values.update(parse_config_text(handle.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values.update(overrides or {})
    return RunConfig(values)
