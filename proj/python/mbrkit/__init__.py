"""MBR reranking, corpus filtering and self-training tools."""

from ._mbrkit import (
    MbrkitError,
    __version__,
    bleu_corpus,
    bleu_sentence,
    chrf_corpus,
    chrf_sentence,
    compare,
    filter_corpus,
    mbr_decode,
    mbr_select,
    mock_translate,
    paired_bootstrap,
    run_loop,
    sweep,
)

__all__ = [
    "MbrkitError",
    "bleu_corpus",
    "bleu_sentence",
    "chrf_corpus",
    "chrf_sentence",
    "compare",
    "filter_corpus",
    "mbr_decode",
    "mbr_select",
    "mock_translate",
    "paired_bootstrap",
    "run_loop",
    "sweep",
]
