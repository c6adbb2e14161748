"""Exception hierarchy for the codec.

Every failure mode that can cross the library boundary gets a distinct type so
the CLI can map it to a stable exit code.
"""


class SsmzipError(Exception):
    """Base class for all codec errors."""


class DefinitionLoadError(SsmzipError):
    """Tokenizer definition file is missing or malformed."""


class CorruptArchiveError(SsmzipError):
    """Archive bytes are truncated, inconsistent, or fail checksum."""


class BadMagicError(CorruptArchiveError):
    """Archive does not start with the expected magic bytes."""


class UnsupportedVersionError(SsmzipError):
    """Archive version byte is not supported by this build."""


class IncompatibleTokenizerError(SsmzipError):
    """Archive was produced with a different tokenizer asset."""


class NumericFaultError(SsmzipError):
    """A NaN/Inf appeared in the model; the stream cannot be continued."""


class UnsupportedVocabularyError(SsmzipError):
    """Effective vocabulary too large for the coder's frequency scale."""


class CoderMisuseError(SsmzipError):
    """Range coder API used out of contract (e.g. finish() called twice)."""
