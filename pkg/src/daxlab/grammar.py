"""Pseudo-language interpretation grammar.

Instructions are sequences of lowercase pseudowords; denotations are
sequences of abstract color symbols.  A lexicon assigns each meaningful
word either a single color (a *primitive*) or one of three functional
roles:

* repeat-three: takes the single preceding primitive, repeats its output
  three times ("dax fep" -> RED RED RED).
* alternate: takes the preceding and following primitive, producing
  x y x ("wif blicket dax" -> GREEN RED GREEN).
* reverse-concat: takes the preceding and following strings, evaluates
  both, and concatenates the outputs in reverse order
  ("dax kiki lug" -> BLUE RED).

Scoping: reverse-concat takes widest scope.  The parser splits at the
leftmost reverse-concat word over the whole string and recurses on the
right, so "a kiki b kiki c" denotes eval(c) ++ eval(b) ++ eval(a).
Within a reverse-concat-free segment, phrases are concatenated left to
right (when the config allows bare concatenation), alternate binds its
two neighbours, and repeat-three binds tightest to the single preceding
primitive.  This ladder yields a unique parse for every accepted string.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence, Union


class GrammarError(Exception):
    """Base class for grammar failures."""


class UnknownWordError(GrammarError):
    def __init__(self, word: str):
        super().__init__(f"word not in lexicon: {word!r}")
        self.word = word


class MalformedInstructionError(GrammarError):
    """Function word with a missing or ill-typed argument."""


class OutputTooLongError(GrammarError):
    def __init__(self, length: int, limit: int):
        super().__init__(f"denotation has {length} symbols, limit is {limit}")
        self.length = length
        self.limit = limit


class PoolTooSmallError(GrammarError):
    """Word or color pool too small for the requested lexicon."""


class ColorSymbol:
    """Abstract output symbol.

    Identity is the ``COLORk`` id; the display name is a UI label only
    and never participates in equality or hashing.
    """

    __slots__ = ("id", "display_name")

    def __init__(self, id: str, display_name: str = ""):
        self.id = id
        self.display_name = display_name or id

    def __eq__(self, other):
        return isinstance(other, ColorSymbol) and self.id == other.id

    def __hash__(self):
        return hash(self.id)

    def __repr__(self):
        return f"ColorSymbol({self.id}, {self.display_name})"


# Full palette: experiments draw their color pools from here.  Display
# names are what a participant sees; COLORk ids are the wire format.
PALETTE: tuple[ColorSymbol, ...] = tuple(
    ColorSymbol(f"COLOR{i + 1}", name)
    for i, name in enumerate(
        ["RED", "GREEN", "BLUE", "YELLOW", "PURPLE", "ORANGE", "PINK", "BROWN"]
    )
)


def palette_colors(n: int) -> tuple[ColorSymbol, ...]:
    if not 2 <= n <= len(PALETTE):
        raise PoolTooSmallError(f"color pools hold 2..{len(PALETTE)} symbols, got {n}")
    return PALETTE[:n]


class Functor(Enum):
    """The three functional word roles."""

    REPEAT3 = "repeat_three"
    ALTERNATE = "alternate"
    REV_CONCAT = "reverse_concat"


Meaning = Union[ColorSymbol, Functor]

# Instructions are plain tuples of words; responses and denotations are
# tuples of ColorSymbol.
Instruction = tuple[str, ...]
OutputSeq = tuple[ColorSymbol, ...]


def as_words(instr: str | Sequence[str]) -> Instruction:
    """Normalize an instruction given as a string or word sequence."""
    if isinstance(instr, str):
        words = tuple(instr.split())
    else:
        words = tuple(instr)
    if not words:
        raise MalformedInstructionError("instruction is empty")
    return words


@dataclass(frozen=True)
class GrammarConfig:
    strict_blicket_args: bool = True
    allow_concat: bool = True
    max_output_len: int = 20

    def __post_init__(self):
        if self.max_output_len < 6:
            raise ValueError("max_output_len must be >= 6")


DEFAULT_CONFIG = GrammarConfig()


@dataclass(frozen=True)
class Lexicon:
    """Assignment of pseudowords to colors and function roles."""

    entries: dict[str, Meaning]
    word_pool: tuple[str, ...]
    color_pool: tuple[ColorSymbol, ...]

    def __post_init__(self):
        pool = set(self.word_pool)
        if len(pool) != len(self.word_pool):
            raise ValueError("word pool contains duplicates")
        ids = [c.id for c in self.color_pool]
        if len(set(ids)) != len(ids):
            raise ValueError("color pool contains duplicate ids")
        colors_seen: set[str] = set()
        functors_seen: set[Functor] = set()
        for word, meaning in self.entries.items():
            if word not in pool:
                raise ValueError(f"entry word {word!r} not drawn from the word pool")
            if isinstance(meaning, ColorSymbol):
                if meaning.id in colors_seen:
                    raise ValueError(f"two primitives map to {meaning.id}")
                colors_seen.add(meaning.id)
            else:
                if meaning in functors_seen:
                    raise ValueError(f"functor {meaning} assigned twice")
                functors_seen.add(meaning)

    @property
    def primitive_words(self) -> tuple[str, ...]:
        return tuple(
            w for w, m in self.entries.items() if isinstance(m, ColorSymbol)
        )

    @property
    def function_words(self) -> tuple[str, ...]:
        return tuple(w for w, m in self.entries.items() if isinstance(m, Functor))

    def meaning_of(self, word: str) -> Meaning:
        try:
            return self.entries[word]
        except KeyError:
            raise UnknownWordError(word) from None

    def color_of(self, word: str) -> ColorSymbol:
        meaning = self.meaning_of(word)
        if not isinstance(meaning, ColorSymbol):
            raise MalformedInstructionError(f"{word!r} is not a primitive")
        return meaning

    def word_for(self, functor: Functor) -> str | None:
        for word, meaning in self.entries.items():
            if meaning is functor:
                return word
        return None

    def is_primitive(self, word: str) -> bool:
        return isinstance(self.entries.get(word), ColorSymbol)


def canonical_lexicon() -> Lexicon:
    """The worked-example assignment used in docs and golden tests.

    dax->RED, wif->GREEN, lug->BLUE, zup->COLOR4, fep->repeat-three,
    blicket->alternate, kiki->reverse-concat.  A configuration input,
    not ground truth: experiment generation randomizes the assignment.
    """
    colors = palette_colors(6)
    entries: dict[str, Meaning] = {
        "dax": colors[0],
        "wif": colors[1],
        "lug": colors[2],
        "zup": colors[3],
        "fep": Functor.REPEAT3,
        "blicket": Functor.ALTERNATE,
        "kiki": Functor.REV_CONCAT,
    }
    return Lexicon(
        entries=entries, word_pool=tuple(EXP1_WORD_POOL), color_pool=colors
    )


# Canonical pseudoword pools.  The first nine are the single-session
# vocabulary; the full list of twenty backs the independent-trials
# experiment which re-randomizes words per trial.
EXP1_WORD_POOL: tuple[str, ...] = (
    "dax", "wif", "lug", "zup", "fep", "blicket", "kiki", "tufa", "gazzer",
)
FULL_WORD_POOL: tuple[str, ...] = EXP1_WORD_POOL + (
    "wug", "blick", "kleek", "pilk", "glerk", "snod",
    "florp", "teeg", "vash", "mip", "zib",
)


# ---------------------------------------------------------------------------
# Parse trees


@dataclass(frozen=True)
class Prim:
    word: str


@dataclass(frozen=True)
class Repeat3:
    arg: "ParseTree"


@dataclass(frozen=True)
class Alternate:
    left: "ParseTree"
    right: "ParseTree"


@dataclass(frozen=True)
class RevConcat:
    left: "ParseTree"
    right: "ParseTree"


@dataclass(frozen=True)
class Concat:
    parts: tuple["ParseTree", ...]

    def __post_init__(self):
        if len(self.parts) < 2:
            raise ValueError("Concat needs at least two parts")
        if any(isinstance(p, Concat) for p in self.parts):
            raise ValueError("Concat parts must not be Concat")


ParseTree = Union[Prim, Repeat3, Alternate, RevConcat, Concat]


def count_compositions(tree: ParseTree) -> int:
    """Number of function applications (repeat/alternate/reverse) in a tree."""
    if isinstance(tree, Prim):
        return 0
    if isinstance(tree, Repeat3):
        return 1 + count_compositions(tree.arg)
    if isinstance(tree, (Alternate, RevConcat)):
        return 1 + count_compositions(tree.left) + count_compositions(tree.right)
    return sum(count_compositions(p) for p in tree.parts)


# ---------------------------------------------------------------------------
# Parsing


def parse(
    instr: str | Sequence[str],
    lex: Lexicon,
    cfg: GrammarConfig = DEFAULT_CONFIG,
) -> ParseTree:
    """Parse an instruction into its unique tree under the precedence ladder."""
    words = as_words(instr)
    meanings = [lex.meaning_of(w) for w in words]
    return _parse_span(words, meanings, cfg)


def _parse_span(words, meanings, cfg) -> ParseTree:
    # Widest scope: split at the leftmost reverse-concat word, recursing
    # on the right so later splits nest inside the right argument.
    for i, m in enumerate(meanings):
        if m is Functor.REV_CONCAT:
            if i == 0 or i == len(words) - 1:
                raise MalformedInstructionError(
                    f"{words[i]!r} needs a string on each side"
                )
            left = _parse_segment(words[:i], meanings[:i], cfg)
            right = _parse_span(words[i + 1 :], meanings[i + 1 :], cfg)
            return RevConcat(left, right)
    return _parse_segment(words, meanings, cfg)


def _parse_segment(words, meanings, cfg) -> ParseTree:
    # words contain no reverse-concat entries here
    phrases: list[ParseTree] = []
    pos = 0
    while pos < len(words):
        phrase, pos = _parse_phrase(words, meanings, pos, cfg)
        phrases.append(phrase)
    if len(phrases) == 1:
        return phrases[0]
    if not cfg.allow_concat:
        raise MalformedInstructionError(
            "bare phrase concatenation is disabled by the grammar config"
        )
    return Concat(tuple(phrases))


def _parse_phrase(words, meanings, pos, cfg):
    left, pos = _parse_term(words, meanings, pos, cfg)
    if pos < len(words) and meanings[pos] is Functor.ALTERNATE:
        op = words[pos]
        pos += 1
        if pos >= len(words):
            raise MalformedInstructionError(f"{op!r} is missing its right argument")
        right, pos = _parse_term(words, meanings, pos, cfg)
        if cfg.strict_blicket_args and not (
            isinstance(left, Prim) and isinstance(right, Prim)
        ):
            raise MalformedInstructionError(
                f"{op!r} takes primitive arguments in strict mode"
            )
        return Alternate(left, right), pos
    return left, pos


def _parse_term(words, meanings, pos, cfg):
    # term := primitive [repeat-three-word]
    meaning = meanings[pos]
    if not isinstance(meaning, ColorSymbol):
        raise MalformedInstructionError(
            f"{words[pos]!r} has no preceding primitive argument"
        )
    node: ParseTree = Prim(words[pos])
    pos += 1
    if pos < len(words) and meanings[pos] is Functor.REPEAT3:
        node = Repeat3(node)
        pos += 1
        if pos < len(words) and meanings[pos] is Functor.REPEAT3:
            raise MalformedInstructionError(
                f"{words[pos]!r} takes a primitive, not a repeated phrase"
            )
    return node, pos


# ---------------------------------------------------------------------------
# Evaluation


def evaluate(
    tree: ParseTree,
    lex: Lexicon,
    cfg: GrammarConfig = DEFAULT_CONFIG,
    *,
    kiki_reverses: bool = True,
) -> OutputSeq:
    """Denotation of a parse tree.

    ``kiki_reverses=False`` evaluates under the variant grammar in which
    the wide-scope function concatenates forward instead of reversing;
    the bias classifiers use it, nothing else should.
    """
    out = _eval(tree, lex, kiki_reverses)
    if len(out) > cfg.max_output_len:
        raise OutputTooLongError(len(out), cfg.max_output_len)
    if not out:
        raise MalformedInstructionError("empty denotation")
    return out


def _eval(tree: ParseTree, lex: Lexicon, kiki_reverses: bool) -> OutputSeq:
    if isinstance(tree, Prim):
        return (lex.color_of(tree.word),)
    if isinstance(tree, Repeat3):
        return _eval(tree.arg, lex, kiki_reverses) * 3
    if isinstance(tree, Alternate):
        x = _eval(tree.left, lex, kiki_reverses)
        y = _eval(tree.right, lex, kiki_reverses)
        return x + y + x
    if isinstance(tree, RevConcat):
        x = _eval(tree.left, lex, kiki_reverses)
        y = _eval(tree.right, lex, kiki_reverses)
        return y + x if kiki_reverses else x + y
    return tuple(
        sym for part in tree.parts for sym in _eval(part, lex, kiki_reverses)
    )


def interpret(
    instr: str | Sequence[str],
    lex: Lexicon,
    cfg: GrammarConfig = DEFAULT_CONFIG,
) -> OutputSeq:
    """Parse then evaluate."""
    return evaluate(parse(instr, lex, cfg), lex, cfg)


# ---------------------------------------------------------------------------
# Lexicon sampling and enumeration


def sample_lexicon(
    word_pool: Sequence[str],
    color_pool: Sequence[ColorSymbol],
    n_primitives: int,
    seed: int,
) -> Lexicon:
    """Random word/color assignment: uniform, deterministic per seed."""
    words = tuple(word_pool)
    colors = tuple(color_pool)
    if len(words) < n_primitives + 3:
        raise PoolTooSmallError(
            f"need {n_primitives + 3} words for {n_primitives} primitives "
            f"plus three function words, pool has {len(words)}"
        )
    if len(colors) < n_primitives:
        raise PoolTooSmallError(
            f"need {n_primitives} colors, pool has {len(colors)}"
        )
    rng = random.Random(seed)
    chosen_words = rng.sample(words, n_primitives + 3)
    chosen_colors = rng.sample(colors, n_primitives)
    entries: dict[str, Meaning] = {}
    for word, color in zip(chosen_words[:n_primitives], chosen_colors):
        entries[word] = color
    for word, functor in zip(chosen_words[n_primitives:], Functor):
        entries[word] = functor
    return Lexicon(entries=entries, word_pool=words, color_pool=colors)


def enumerate_instructions(
    lex: Lexicon,
    cfg: GrammarConfig = DEFAULT_CONFIG,
    max_words: int = 6,
) -> list[tuple[Instruction, OutputSeq]]:
    """All well-formed instructions up to ``max_words``, with denotations.

    Brute force: every word sequence over the lexicon's meaningful words
    is attempted; the accepted set is exactly what ``parse`` accepts.
    """
    if max_words > 8:
        raise ValueError("enumeration is bounded at 8 words")
    vocabulary = tuple(lex.entries)
    pairs: list[tuple[Instruction, OutputSeq]] = []
    for n in range(1, max_words + 1):
        for combo in itertools.product(vocabulary, repeat=n):
            try:
                pairs.append((combo, interpret(combo, lex, cfg)))
            except GrammarError:
                continue
    return pairs


# ---------------------------------------------------------------------------
# JSON wire format


def color_to_json(color: ColorSymbol) -> dict:
    return {"id": color.id, "display_name": color.display_name}


def color_from_json(obj: dict) -> ColorSymbol:
    return ColorSymbol(obj["id"], obj.get("display_name", ""))


def output_to_json(out: Iterable[ColorSymbol]) -> list[str]:
    return [sym.id for sym in out]


def output_from_json(ids: Iterable[str], pool: Sequence[ColorSymbol]) -> OutputSeq:
    by_id = {c.id: c for c in pool}
    for c in PALETTE:
        by_id.setdefault(c.id, c)
    return tuple(by_id[i] if i in by_id else ColorSymbol(i) for i in ids)


def lexicon_to_json(lex: Lexicon) -> dict:
    entries = {}
    for word, meaning in lex.entries.items():
        if isinstance(meaning, ColorSymbol):
            entries[word] = {"kind": "primitive", "color": meaning.id}
        else:
            entries[word] = {"kind": "function", "function": meaning.value}
    return {
        "format_version": 1,
        "word_pool": list(lex.word_pool),
        "color_pool": [color_to_json(c) for c in lex.color_pool],
        "entries": entries,
    }


def lexicon_from_json(obj: dict) -> Lexicon:
    colors = [color_from_json(c) for c in obj["color_pool"]]
    by_id = {c.id: c for c in colors}
    entries: dict[str, Meaning] = {}
    for word, spec in obj["entries"].items():
        if spec["kind"] == "primitive":
            entries[word] = by_id[spec["color"]]
        else:
            entries[word] = Functor(spec["function"])
    return Lexicon(
        entries=entries,
        word_pool=tuple(obj["word_pool"]),
        color_pool=tuple(colors),
    )
