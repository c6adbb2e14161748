"""Self-contained lossless text compression with an online-trained state-space model."""

__version__ = "1.0.0"

from .errors import (
    BadMagicError,
    CoderMisuseError,
    CorruptArchiveError,
    DefinitionLoadError,
    IncompatibleTokenizerError,
    NumericFaultError,
    SsmzipError,
    UnsupportedVersionError,
    UnsupportedVocabularyError,
)
from .pipeline import PipelineConfig, compress, decompress
from .tokenizer import TokenizerDefinition, load_definition, save_definition

__all__ = [
    "BadMagicError",
    "CoderMisuseError",
    "CorruptArchiveError",
    "DefinitionLoadError",
    "IncompatibleTokenizerError",
    "NumericFaultError",
    "PipelineConfig",
    "SsmzipError",
    "TokenizerDefinition",
    "UnsupportedVersionError",
    "UnsupportedVocabularyError",
    "compress",
    "decompress",
    "load_definition",
    "save_definition",
    "__version__",
]
