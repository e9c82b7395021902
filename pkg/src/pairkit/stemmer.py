"""Porter's suffix-stripping algorithm (1980), used by the caption metric's
stem-matching stage. Words of length <= 2 pass through unchanged."""

from __future__ import annotations

_VOWELS = frozenset("aeiou")


def _is_consonant(word: str, i: int) -> bool:
    c = word[i]
    if c in _VOWELS:
        return False
    if c == "y":
        return True if i == 0 else not _is_consonant(word, i - 1)
    return True


def _measure(stem: str) -> int:
    """Number of vowel-to-consonant transitions: the m of [C](VC)^m[V]."""
    m = 0
    for i in range(1, len(stem)):
        if _is_consonant(stem, i) and not _is_consonant(stem, i - 1):
            m += 1
    return m


def _has_vowel(stem: str) -> bool:
    return any(not _is_consonant(stem, i) for i in range(len(stem)))


def _ends_double_consonant(stem: str) -> bool:
    return (
        len(stem) >= 2
        and stem[-1] == stem[-2]
        and _is_consonant(stem, len(stem) - 1)
    )


def _ends_cvc(stem: str) -> bool:
    if len(stem) < 3:
        return False
    return (
        _is_consonant(stem, len(stem) - 3)
        and not _is_consonant(stem, len(stem) - 2)
        and _is_consonant(stem, len(stem) - 1)
        and stem[-1] not in "wxy"
    )


def _longest_rule(word: str, rules: tuple[tuple[str, str], ...]) -> tuple[str, str] | None:
    # Rules are tried longest-suffix-first; the first suffix that matches
    # claims the word even if its condition later fails (per the algorithm).
    for suffix, replacement in rules:
        if word.endswith(suffix):
            return suffix, replacement
    return None


_STEP2 = (
    ("ational", "ate"), ("ization", "ize"), ("iveness", "ive"), ("fulness", "ful"),
    ("ousness", "ous"), ("tional", "tion"), ("biliti", "ble"), ("entli", "ent"),
    ("ousli", "ous"), ("ation", "ate"), ("alism", "al"), ("aliti", "al"),
    ("iviti", "ive"), ("enci", "ence"), ("anci", "ance"), ("izer", "ize"),
    ("abli", "able"), ("alli", "al"), ("ator", "ate"), ("eli", "e"),
)

_STEP3 = (
    ("icate", "ic"), ("ative", ""), ("alize", "al"), ("iciti", "ic"),
    ("ical", "ic"), ("ful", ""), ("ness", ""),
)

_STEP4 = (
    ("ement", ""), ("ance", ""), ("ence", ""), ("able", ""), ("ible", ""),
    ("ment", ""), ("ant", ""), ("ent", ""), ("ion", ""), ("ism", ""),
    ("ate", ""), ("iti", ""), ("ous", ""), ("ive", ""), ("ize", ""),
    ("al", ""), ("er", ""), ("ic", ""), ("ou", ""),
)


def stem(word: str) -> str:
    """Stem one lowercase word."""
    if len(word) <= 2:
        return word

    # step 1a
    if word.endswith("sses"):
        word = word[:-2]
    elif word.endswith("ies"):
        word = word[:-2]
    elif word.endswith("ss"):
        pass
    elif word.endswith("s"):
        word = word[:-1]

    # step 1b
    if word.endswith("eed"):
        if _measure(word[:-3]) > 0:
            word = word[:-1]
    elif word.endswith("ed") and _has_vowel(word[:-2]):
        word = word[:-2]
        word = _step1b_cleanup(word)
    elif word.endswith("ing") and _has_vowel(word[:-3]):
        word = word[:-3]
        word = _step1b_cleanup(word)

    # step 1c
    if word.endswith("y") and _has_vowel(word[:-1]):
        word = word[:-1] + "i"

    # step 2
    rule = _longest_rule(word, _STEP2)
    if rule is not None:
        suffix, replacement = rule
        if _measure(word[: -len(suffix)]) > 0:
            word = word[: -len(suffix)] + replacement

    # step 3
    rule = _longest_rule(word, _STEP3)
    if rule is not None:
        suffix, replacement = rule
        if _measure(word[: -len(suffix)]) > 0:
            word = word[: -len(suffix)] + replacement

    # step 4
    rule = _longest_rule(word, _STEP4)
    if rule is not None:
        suffix, _ = rule
        stem_part = word[: -len(suffix)]
        if _measure(stem_part) > 1:
            if suffix == "ion" and stem_part[-1:] not in ("s", "t"):
                pass
            else:
                word = stem_part

    # step 5a
    if word.endswith("e"):
        stem_part = word[:-1]
        m = _measure(stem_part)
        if m > 1 or (m == 1 and not _ends_cvc(stem_part)):
            word = stem_part

    # step 5b
    if _measure(word) > 1 and _ends_double_consonant(word) and word.endswith("l"):
        word = word[:-1]

    return word


def _step1b_cleanup(word: str) -> str:
    if word.endswith(("at", "bl", "iz")):
        return word + "e"
    if _ends_double_consonant(word) and word[-1] not in "lsz":
        return word[:-1]
    if _measure(word) == 1 and _ends_cvc(word):
        return word + "e"
    return word
