"""Reference table for the noisy-string predicate.

Computes the expected verdicts with the zxcvbn Python package and a word set
taken straight from wordfreq, independent of the Rust implementation.

Requires: pip install zxcvbn==4.5.0 wordfreq
Usage: python3 tools/algorithm1_oracle.py > crates/core/tests/data/algorithm1_cases.json
"""
import json
import math
import random
import string
import sys

from wordfreq import top_n_list
from zxcvbn import zxcvbn

WORDS = set([w for w in top_n_list("en", 20000) if w.isalpha() and w.isascii() and len(w) >= 3][:10000])
MAX_WORD = max(len(w) for w in WORDS)


def has_word(s):
    low = s.lower()
    for i in range(len(low)):
        for j in range(i + 3, min(len(low), i + MAX_WORD) + 1):
            if low[i:j] in WORDS:
                return True
    return False


def verdict(s, threshold, max_len=100):
    if len(s) >= max_len:
        return True, None, None
    if len(s) <= 2:
        return False, None, None
    guesses = float(zxcvbn(s, max_length=1000)["guesses"])
    score = math.log2(guesses) / len(s)
    word = has_word(s)
    return (not word) and score > threshold, guesses, score


def cases():
    rng = random.Random(20240611)
    out = []

    # length branches
    out += ["", "a", "ab", "Z9", "é€", "x" * 100, "x" * 150, "a1" * 60]
    out += ["".join(rng.choice(string.ascii_letters) for _ in range(n)) for n in (100, 101, 180)]
    out += ["abc", "q7z", "xyz"]

    # attribute values built from dictionary words
    out += [
        "add-to-cart-button", "hidden", "menuitem", "navigation", "search-bar", "departmentButton navBC",
        "btn btn-primary", "header__menu--open", "product-title", "https://example.com/shop/tents",
        "/account/login", "checkout", "SearchInput", "aria-label", "toggle-switch", "dropdown-item",
        "main-content", "footer-links", "SignInButton", "camping gear", "newsletter-signup",
        "card-body", "carousel-next", "close", "submit", "email", "password", "Lowest Price",
        "departmentButton_3074457345616967", "user-profile-avatar",
    ]
    words = sorted(WORDS)
    for _ in range(40):
        w = rng.choice(words)
        noise = "".join(rng.choice(string.ascii_lowercase + string.digits) for _ in range(rng.randint(2, 10)))
        out.append(rng.choice([f"{w}-{noise}", f"{noise}_{w}", f"{w.capitalize()}{noise}"]))

    # framework hashes and random ids
    out += ["css-1x8zk9q", "jx9qZk2vRb81tGm4", "sc-bdVaJa", "jsx-2954815398", "_3xk9Lq", "e1x7k2p0",
            "MuiBox-root css-0", "qZ7", "Xk2", "g8h2"]
    # low-entropy strings without words
    out += ["aaaaaaaa", "zzzzzz", "1234567890", "9876543", "qwertyuiop", "asdfgh", "zxcvbnm",
            "qazwsx", "1q2w3e4r", "xoxoxoxo", "abcabcabc", "19851985", "2016", "04/05/2011",
            "1357", "ababab", "000000", "qqqq1111", "zyxwvu", "mnbvcx"]

    # non-ASCII
    out += ["日本語テキスト", "Überblick", "ñandú", "Ψυχή", "😀😀😀", "кнопка", "ç-9f2k", "İstanbul"]

    # random strings over several alphabets
    alphabets = [string.ascii_lowercase, string.ascii_letters + string.digits, string.hexdigits.lower(),
                 string.ascii_lowercase + string.digits + "-_"]
    for _ in range(90):
        alpha = rng.choice(alphabets)
        n = rng.randint(3, 40)
        out.append("".join(rng.choice(alpha) for _ in range(n)))

    return out


def main():
    table = []
    thresholds = [0.65, 0.65, 0.65, 0.3, 1.0, 2.0, 3.0]
    seen = set()
    for i, s in enumerate(cases()):
        if s in seen:
            continue
        seen.add(s)
        t = thresholds[i % len(thresholds)]
        noisy, guesses, score = verdict(s, t)
        table.append({"input": s, "threshold": t, "noisy": noisy, "guesses": guesses, "score": score})
        if len(table) == 200:
            break
    json.dump(table, sys.stdout, ensure_ascii=False, indent=1)
    sys.stdout.write("\n")
    print(f"{len(table)} cases", file=sys.stderr)


if __name__ == "__main__":
    main()
