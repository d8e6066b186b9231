import re
from collections import Counter

WORD_PATTERN = re.compile(r"[a-z']+")


def tokenize(text):
    return WORD_PATTERN.findall(text.lower())


def word_frequencies(text, min_length=1):
    counts = Counter(w for w in tokenize(text) if len(w) >= min_length)
    return dict(counts)


def top_words(text, limit=3):
    freq = word_frequencies(text)
    ranked = sorted(freq.items(), key=lambda pair: (-pair[1], pair[0]))
    return [word for word, _ in ranked[:limit]]


def summarize(text):
    words = tokenize(text)
    if not words:
        return "empty"
    longest = max(words, key=len)
    average = sum(len(w) for w in words) / len(words)
    return f"{len(words)} words, longest={longest!r}, avg={average:.2f}"
