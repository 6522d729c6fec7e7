"""Few-shot instruction-learning toolkit.

Subpackages cover the pseudo-language grammar, the three experiment
protocols, response scoring and bias analysis, a from-scratch seq2seq
LSTM baseline, a simulated-participant engine, and an HTTP service for
running sessions in a browser.
"""

__version__ = "0.1.0"

from .grammar import (  # noqa: F401
    ColorSymbol,
    Functor,
    GrammarConfig,
    Lexicon,
    canonical_lexicon,
    enumerate_instructions,
    evaluate,
    interpret,
    parse,
    sample_lexicon,
)
