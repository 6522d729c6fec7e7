"""Independent brute-force oracles used by the test suite.

The tree enumerator below builds every normal-form parse tree over a
lexicon up to a word budget and evaluates it with its own recursion.
It never calls the package parser or evaluator, so agreement between
the two paths is meaningful.

Normal form mirrors the grammar's scoping rules structurally:

* expr     := segment | RevCat(segment, expr)     (left side is split-free)
* segment  := one phrase, or >= 2 phrases when concatenation is allowed
* phrase   := term | Alt(arg, arg)  with args restricted to bare
              primitives in strict mode
* term     := primitive | Rep3(primitive)
"""

from __future__ import annotations

from collections import defaultdict

from daxlab.grammar import ColorSymbol, Functor, Lexicon


def _role_words(lex: Lexicon):
    prims = {}
    rep = alt = rev = None
    for word, meaning in lex.entries.items():
        if isinstance(meaning, ColorSymbol):
            prims[word] = meaning
        elif meaning is Functor.REPEAT3:
            rep = word
        elif meaning is Functor.ALTERNATE:
            alt = word
        else:
            rev = word
    return prims, rep, alt, rev


def oracle_enumerate(
    lex: Lexicon,
    max_words: int,
    *,
    strict: bool = True,
    allow_concat: bool = True,
    max_output_len: int = 20,
) -> dict[tuple[str, ...], tuple[str, ...]]:
    """Map each enumerable instruction to its denotation (color ids).

    Raises AssertionError if two distinct normal-form trees flatten to
    the same word string (grammar ambiguity).
    """
    prims, rep, alt, rev = _role_words(lex)

    terms = [((w,), (c.id,)) for w, c in prims.items()]
    if rep is not None:
        terms += [((w, rep), (c.id,) * 3) for w, c in prims.items()]

    phrases = list(terms)
    if alt is not None:
        args = [t for t in terms if len(t[0]) == 1] if strict else terms
        for lw, lo in args:
            for rw, ro in args:
                phrases.append((lw + (alt,) + rw, lo + ro + lo))

    phrase_by_width: dict[int, list] = defaultdict(list)
    for words, out in phrases:
        if len(words) <= max_words:
            phrase_by_width[len(words)].append((words, out))

    # segments: ordered sequences of phrases (>= 2 needs concatenation)
    seg_by_width: dict[int, list] = defaultdict(list)
    for w, items in phrase_by_width.items():
        seg_by_width[w].extend(items)
    if allow_concat:
        for width in range(2, max_words + 1):
            for first_w in range(1, width):
                for fw, fo in phrase_by_width.get(first_w, []):
                    for sw, so in seg_by_width.get(width - first_w, []):
                        # only extend by single phrases on the left to
                        # decompose each sequence exactly once
                        seg_by_width[width].append((fw + sw, fo + so))
        # the loop above appends while iterating widths ascending; the
        # inner reads of seg_by_width[width - first_w] only touch
        # smaller widths, so each multi-phrase segment is built once
    exprs: dict[int, list] = defaultdict(list)
    for width in range(1, max_words + 1):
        exprs[width].extend(seg_by_width.get(width, []))
        if rev is not None:
            for left_w in range(1, width - 1):
                for lw, lo in seg_by_width.get(left_w, []):
                    for rw, ro in exprs.get(width - left_w - 1, []):
                        exprs[width].append((lw + (rev,) + rw, ro + lo))

    table: dict[tuple[str, ...], tuple[str, ...]] = {}
    for width in range(1, max_words + 1):
        for words, out in exprs[width]:
            if len(out) > max_output_len:
                continue
            if words in table:
                assert table[words] == out, f"ambiguous string: {words}"
                raise AssertionError(f"duplicate tree for string: {words}")
            table[words] = out
    return table
