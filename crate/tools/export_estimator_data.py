"""Export the ranked frequency lists and keyboard adjacency graphs used by the
guess estimator, plus the common-English word list used by the noise filter.

Requires: pip install zxcvbn wordfreq
"""
import json
import os
import sys

from zxcvbn import adjacency_graphs, frequency_lists
from wordfreq import top_n_list

out = sys.argv[1] if len(sys.argv) > 1 else "crates/core/data"
os.makedirs(os.path.join(out, "zxcvbn"), exist_ok=True)

for name, words in frequency_lists.FREQUENCY_LISTS.items():
    with open(os.path.join(out, "zxcvbn", f"{name}.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(words))
        fh.write("\n")

with open(os.path.join(out, "zxcvbn", "adjacency_graphs.json"), "w", encoding="utf-8") as fh:
    json.dump(adjacency_graphs.ADJACENCY_GRAPHS, fh, sort_keys=True)

words = [w for w in top_n_list("en", 20000) if w.isalpha() and w.isascii() and len(w) >= 3]
with open(os.path.join(out, "words_en.txt"), "w", encoding="utf-8") as fh:
    fh.write("# Common English words (wordfreq top list, alphabetic, length >= 3).\n")
    fh.write("# Source: wordfreq, CC-BY-SA 4.0.\n")
    fh.write("\n".join(words[:10000]))
    fh.write("\n")
