"""Synthetic paired corpus (audio, tokens, motion) and its file formats."""

from .dataset import Clip, Corpus
from .formats import (
    CorpusFormatError,
    MagicMismatchError,
    Motion,
    TruncatedFileError,
    UnsupportedVersionError,
    read_audio,
    read_motion,
    read_tokens,
    write_audio,
    write_motion,
    write_tokens,
)
from .synth import (
    SPLITS,
    CorpusSpec,
    assign_splits,
    build_world,
    generate_corpus,
    split_counts,
    synthesize_clip,
)
