"""Classic Porter suffix-stripping stemmer (1980 algorithm).

Matches the behaviour of the author's widely distributed ANSI C version,
including its two documented departures (step 2 "bli"->"ble", the extra
"logi"->"log" rule) and the guard that leaves words of length <= 2
untouched. Input is expected to be a lowercase, ASCII-folded word; the
function lowercases defensively but does no other normalization.
"""

from __future__ import annotations

__all__ = ["stem"]

_VOWELS = "aeiou"


class _Buffer:
    """Mutable word buffer with the algorithm's measure/ending predicates."""

    __slots__ = ("b", "k", "j")

    def __init__(self, word: str):
        self.b = word
        self.k = len(word) - 1  # index of last live char
        self.j = 0  # end of the stem for the suffix last matched by ends()

    def is_consonant(self, i: int) -> bool:
        ch = self.b[i]
        if ch in _VOWELS:
            return False
        if ch == "y":
            return i == 0 or not self.is_consonant(i - 1)
        return True

    def measure(self) -> int:
        """Number of vowel-consonant sequences in b[0..j]."""
        n = 0
        i = 0
        while True:
            if i > self.j:
                return n
            if not self.is_consonant(i):
                break
            i += 1
        i += 1
        while True:
            while True:
                if i > self.j:
                    return n
                if self.is_consonant(i):
                    break
                i += 1
            i += 1
            n += 1
            while True:
                if i > self.j:
                    return n
                if not self.is_consonant(i):
                    break
                i += 1
            i += 1

    def has_vowel(self) -> bool:
        return any(not self.is_consonant(i) for i in range(self.j + 1))

    def double_consonant(self, i: int) -> bool:
        return i > 0 and self.b[i] == self.b[i - 1] and self.is_consonant(i)

    def cvc(self, i: int) -> bool:
        """consonant-vowel-consonant ending at i, last consonant not w/x/y."""
        if i < 2 or not self.is_consonant(i) or self.is_consonant(i - 1) or not self.is_consonant(i - 2):
            return False
        return self.b[i] not in "wxy"

    def ends(self, suffix: str) -> bool:
        length = len(suffix)
        if length > self.k + 1:
            return False
        if self.b[self.k - length + 1 : self.k + 1] != suffix:
            return False
        self.j = self.k - length
        return True

    def set_tail(self, s: str) -> None:
        self.b = self.b[: self.j + 1] + s
        self.k = len(self.b) - 1

    def replace_if_measure(self, s: str) -> None:
        if self.measure() > 0:
            self.set_tail(s)


def _step1ab(w: _Buffer) -> None:
    # plurals and -ed / -ing
    if w.b[w.k] == "s":
        if w.ends("sses"):
            w.k -= 2
        elif w.ends("ies"):
            w.set_tail("i")
        elif w.b[w.k - 1] != "s":
            w.k -= 1
    if w.ends("eed"):
        if w.measure() > 0:
            w.k -= 1
    elif (w.ends("ed") or w.ends("ing")) and w.has_vowel():
        w.k = w.j
        if w.ends("at"):
            w.set_tail("ate")
        elif w.ends("bl"):
            w.set_tail("ble")
        elif w.ends("iz"):
            w.set_tail("ize")
        elif w.double_consonant(w.k):
            if w.b[w.k - 1] not in "lsz":
                w.k -= 1
        elif w.measure() == 1 and w.cvc(w.k):
            w.set_tail("e")


def _step1c(w: _Buffer) -> None:
    if w.ends("y") and w.has_vowel():
        w.b = w.b[: w.k] + "i"


# Steps 2-3: (suffix, replacement) applied when the remaining stem has
# measure > 0, dispatched on one anchor character to preserve the
# original algorithm's first-match-in-listed-order semantics.
_STEP2 = {
    "a": (("ational", "ate"), ("tional", "tion")),
    "c": (("enci", "ence"), ("anci", "ance")),
    "e": (("izer", "ize"),),
    "l": (("bli", "ble"), ("alli", "al"), ("entli", "ent"), ("eli", "e"), ("ousli", "ous")),
    "o": (("ization", "ize"), ("ation", "ate"), ("ator", "ate")),
    "s": (("alism", "al"), ("iveness", "ive"), ("fulness", "ful"), ("ousness", "ous")),
    "t": (("aliti", "al"), ("iviti", "ive"), ("biliti", "ble")),
    "g": (("logi", "log"),),
}

_STEP3 = {
    "e": (("icate", "ic"), ("ative", ""), ("alize", "al")),
    "i": (("iciti", "ic"),),
    "l": (("ical", "ic"), ("ful", "")),
    "s": (("ness", ""),),
}


def _apply_table(w: _Buffer, table: dict, anchor: str) -> None:
    for suffix, replacement in table.get(anchor, ()):
        if w.ends(suffix):
            w.replace_if_measure(replacement)
            return


# Step 4: suffixes dropped outright when measure > 1, dispatched on the
# penultimate character. "ion" additionally requires a preceding s or t.
_STEP4 = {
    "a": ("al",),
    "c": ("ance", "ence"),
    "e": ("er",),
    "i": ("ic",),
    "l": ("able", "ible"),
    "n": ("ant", "ement", "ment", "ent"),
    "o": ("ion", "ou"),
    "s": ("ism",),
    "t": ("ate", "iti"),
    "u": ("ous",),
    "v": ("ive",),
    "z": ("ize",),
}


def _step4(w: _Buffer) -> None:
    for suffix in _STEP4.get(w.b[w.k - 1], ()):
        if w.ends(suffix):
            if suffix == "ion" and w.b[w.j] not in "st":
                continue
            if w.measure() > 1:
                w.k = w.j
            return


def _step5(w: _Buffer) -> None:
    w.j = w.k
    if w.b[w.k] == "e":
        a = w.measure()
        if a > 1 or (a == 1 and not w.cvc(w.k - 1)):
            w.k -= 1
    if w.b[w.k] == "l" and w.double_consonant(w.k) and w.measure() > 1:
        w.k -= 1


def stem(word: str) -> str:
    """Return the Porter stem of ``word``."""
    word = word.lower()
    if len(word) <= 2:
        return word
    w = _Buffer(word)
    _step1ab(w)
    _step1c(w)
    _apply_table(w, _STEP2, w.b[w.k - 1])
    _apply_table(w, _STEP3, w.b[w.k])
    _step4(w)
    _step5(w)
    return w.b[: w.k + 1]
