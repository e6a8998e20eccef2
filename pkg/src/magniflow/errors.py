"""Exception taxonomy shared across the package.

The CLI maps these onto stable exit codes: user/config mistakes exit 2,
checkpoint/state problems exit 3.
"""


class ContractError(ValueError):
    """An argument violates a documented precondition."""


class FlowFormatError(ValueError):
    """A flow or image file does not have the expected magic/header."""


class TruncatedFileError(FlowFormatError):
    """A flow or image file ends before the payload declared in its header."""


class EmptyMaskError(ValueError):
    """A region shape rasterized to an empty mask (fully outside the field)."""


class DegenerateFitError(ValueError):
    """A statistical fit had no usable observations."""


class ConfigError(ValueError):
    """A config file or CLI flag is malformed, unknown, or out of range."""


class CheckpointError(RuntimeError):
    """A checkpoint is missing, corrupt, or incompatible with the model."""
