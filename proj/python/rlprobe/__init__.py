"""Python access to the rlprobe environments and harness."""

from ._rlprobe import (
    ConfigError,
    Env,
    IncompatibleConfig,
    env_names,
    generalization_gap,
    protocol,
    resolve_config,
    selftest,
    train,
)

__all__ = [
    "ConfigError",
    "Env",
    "IncompatibleConfig",
    "env_names",
    "generalization_gap",
    "protocol",
    "resolve_config",
    "selftest",
    "train",
]
