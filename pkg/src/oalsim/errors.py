"""Exception hierarchy.

Exit-code mapping used by the CLI: ConfigError -> 2, DataError -> 3,
anything else raised past the command handler -> 4.
"""


class OalsimError(Exception):
    """Base class for all package errors."""


class ConfigError(OalsimError):
    """Bad configuration: unknown keys, invalid values, unresolvable names."""


class DataError(OalsimError):
    """Problems with corpus files, splits, or sampling preconditions."""


class CorpusError(DataError):
    """Malformed or inconsistent region data (dimension mismatch, duplicate id)."""


class ParseError(CorpusError):
    """Unparseable record; message names the offending line/record."""


class SplitError(DataError):
    """Split construction failed (e.g. no predicate meets the frequency threshold)."""


class SamplingError(DataError):
    """Interaction sampling failed (subset too small, no describable target)."""


class GenerationError(DataError):
    """Synthetic generation failed (bad sizes, resample budget exhausted)."""


class ProtocolError(OalsimError):
    """Episode protocol violation (action on terminated episode, query outside O_A)."""


class ContractError(OalsimError):
    """Internal contract violation (conflicting oracle labels, unterminated transcript)."""


class UndefinedMarginError(OalsimError):
    """Margin requested for a predicate with no trained hyperplane."""


class PolicyUpdateError(OalsimError):
    """Policy update rejected (non-finite gradient)."""


class CheckpointError(OalsimError):
    """Checkpoint file unreadable, truncated, or version-incompatible."""


class DegenerateVarianceError(OalsimError):
    """Welch t-test on samples whose variance structure admits no statistic."""
