"""Slow string-based reference implementation used as a test oracle.

Shares no code with the package: sequences are plain ``H``/``T`` strings,
positions are scanned one at a time and everything is exact.
"""

from fractions import Fraction
from itertools import product


def counts(s, m, after):
    """(successes, eligible) for hits following ``m`` copies of ``after``."""
    successes = eligible = 0
    for t in range(m, len(s)):
        if s[t - m:t] == after * m:
            eligible += 1
            successes += s[t] == "H"
    return successes, eligible


def freq(s, m, after):
    succ, elig = counts(s, m, after)
    return Fraction(succ, elig) if elig else None


def diff(s, m):
    a, b = freq(s, m, "H"), freq(s, m, "T")
    return None if a is None or b is None else a - b


def value(s, kind, m):
    if kind == "hh":
        return freq(s, m, "H")
    if kind == "th":
        return freq(s, m, "T")
    return diff(s, m)


def all_sequences(k):
    return ["".join(x) for x in product("HT", repeat=k)]


def summary(k, p, kind, m, include_zero=False):
    """Exact expectations over all 2**k strings, weighted by Bernoulli(p)."""
    p = Fraction(p)
    q = 1 - p
    defined_mass = Fraction(0)
    defined_count = 0
    acc = Fraction(0)
    hist = {}
    pool = {"H": [Fraction(0), Fraction(0)], "T": [Fraction(0), Fraction(0)]}
    for s in all_sequences(k):
        w = p ** s.count("H") * q ** s.count("T")
        for after in "HT":
            succ, elig = counts(s, m, after)
            pool[after][0] += w * succ
            pool[after][1] += w * elig
        v = value(s, kind, m)
        if v is None:
            continue
        defined_count += 1
        defined_mass += w
        acc += w * v
        hist[v] = hist.get(v, Fraction(0)) + w
    if include_zero:
        unweighted = acc
    else:
        unweighted = acc / defined_mass if defined_mass else None

    def ratio(side):
        return pool[side][0] / pool[side][1] if pool[side][1] else None

    if kind == "hh":
        pooled = ratio("H")
    elif kind == "th":
        pooled = ratio("T")
    else:
        pooled = ratio("H") - ratio("T")
    return {
        "unweighted": unweighted,
        "pooled": pooled,
        "defined_count": defined_count,
        "defined_mass": defined_mass,
        "histogram": hist,
    }
