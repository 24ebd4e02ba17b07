"""Conditional facial-expression GAN with a synthetic face corpus."""

from ._core import (
    DomainError,
    IntegrityError,
    IoError,
    Model,
    Service,
    ShapeError,
    VersionError,
    affects,
    blend,
    checkpoint_checksum,
    checkpoint_config,
    generate_corpus,
    one_hot,
    read_png,
    train,
    write_png,
)

__all__ = [
    "DomainError",
    "IntegrityError",
    "IoError",
    "Model",
    "Service",
    "ShapeError",
    "VersionError",
    "affects",
    "blend",
    "checkpoint_checksum",
    "checkpoint_config",
    "generate_corpus",
    "one_hot",
    "read_png",
    "train",
    "write_png",
]
