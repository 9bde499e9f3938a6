#!/usr/bin/env python3
"""Reference implementations of the text metrics, used to freeze test values.

Each metric is written directly from its published definition:
  * BLEU-n  -- Papineni et al. 2002: corpus-level clipped modified n-gram
    precision, cumulative geometric mean over orders 1..n, brevity penalty
    from the closest reference length (ties resolved toward the shorter).
  * ROUGE-L -- Lin 2004: LCS-based F1 (beta = 1), best reference per
    candidate, corpus score = mean over candidates.
  * CIDEr-D -- Vedantam et al. 2015 (the "-D" variant of the official
    implementation): tf-idf n-gram vectors per n = 1..4, idf from per-image
    document frequency over each image's reference union, length-difference
    Gaussian penalty (sigma = 6), clipped candidate counts, x10 scale.

Run from the repository root:
    python3 tests/oracles/text_metrics_reference.py
writes fixtures/text-metrics.json and prints the hand-check cases that the
unit tests embed. The expected values in the fixture come from HERE, never
from the C++ side, so the two routes stay independent.
"""

import json
import math
import os
from collections import Counter

PUNCT = set("?.,!:;")


def tokenize(text):
    out, cur = [], []
    for c in text:
        if c.isspace():
            if cur:
                out.append("".join(cur))
                cur = []
        elif c in PUNCT:
            if cur:
                out.append("".join(cur))
                cur = []
            out.append(c)
        else:
            cur.append(c.lower())
    if cur:
        out.append("".join(cur))
    return out


def ngrams(tokens, n):
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidates, references, max_n):
    assert len(candidates) == len(references)
    clipped = [0] * max_n
    total = [0] * max_n
    cand_len = 0
    ref_len = 0
    for cand, refs in zip(candidates, references):
        c = tokenize(cand)
        rs = [tokenize(r) for r in refs]
        cand_len += len(c)
        # closest reference length; ties toward the shorter reference
        ref_len += min((abs(len(r) - len(c)), len(r)) for r in rs)[1]
        for n in range(1, max_n + 1):
            cn = ngrams(c, n)
            best = Counter()
            for r in rs:
                rn = ngrams(r, n)
                for g, k in rn.items():
                    best[g] = max(best[g], k)
            total[n - 1] += sum(cn.values())
            clipped[n - 1] += sum(min(k, best[g]) for g, k in cn.items())
    log_p = 0.0
    for n in range(max_n):
        if total[n] == 0 or clipped[n] == 0:
            return 0.0
        log_p += math.log(clipped[n] / total[n])
    bp = 1.0 if cand_len >= ref_len else math.exp(1.0 - ref_len / max(1, cand_len))
    if cand_len == 0:
        return 0.0
    return bp * math.exp(log_p / max_n)


def lcs_len(a, b):
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l_single(candidate, refs):
    c = tokenize(candidate)
    best = 0.0
    for ref in refs:
        r = tokenize(ref)
        l = lcs_len(c, r)
        if l == 0 or not c or not r:
            continue
        p, rec = l / len(c), l / len(r)
        best = max(best, 2 * p * rec / (p + rec))
    return best


def rouge_l(candidates, references):
    if not candidates:
        return 0.0
    return sum(rouge_l_single(c, r) for c, r in zip(candidates, references)) / len(candidates)


def cider_d(candidates, references, max_n=4, sigma=6.0):
    n_images = len(candidates)
    # document frequency: number of images whose reference union contains g
    df = [Counter() for _ in range(max_n)]
    for refs in references:
        seen = [set() for _ in range(max_n)]
        for ref in refs:
            toks = tokenize(ref)
            for n in range(max_n):
                seen[n].update(ngrams(toks, n + 1).keys())
        for n in range(max_n):
            for g in seen[n]:
                df[n][g] += 1
    log_docs = math.log(n_images)

    def vectorize(tokens):
        vecs, norms = [], []
        for n in range(max_n):
            v = {}
            for g, cnt in ngrams(tokens, n + 1).items():
                idf = log_docs - math.log(max(1.0, df[n][g]))
                v[g] = cnt * idf
            vecs.append(v)
            norms.append(math.sqrt(sum(x * x for x in v.values())))
        return vecs, norms

    total = 0.0
    for cand, refs in zip(candidates, references):
        c_toks = tokenize(cand)
        c_vec, c_norm = vectorize(c_toks)
        image_score = 0.0
        for ref in refs:
            r_toks = tokenize(ref)
            r_vec, r_norm = vectorize(r_toks)
            delta = float(len(c_toks) - len(r_toks))
            penalty = math.exp(-(delta * delta) / (2.0 * sigma * sigma))
            for n in range(max_n):
                if c_norm[n] == 0.0 or r_norm[n] == 0.0:
                    continue
                dot = sum(min(w, r_vec[n].get(g, 0.0)) * r_vec[n].get(g, 0.0)
                          for g, w in c_vec[n].items())
                image_score += penalty * dot / (c_norm[n] * r_norm[n]) / max_n
        total += 10.0 * image_score / len(refs)
    return total / n_images


# ---------------------------------------------------------------------------
# Fixture corpus: 20 candidate strings over varied reference sets, phrased in
# the synthetic-UI register so tokenization paths (punctuation, casing,
# numbers) are all exercised.
CASES = [
    ("a button on the screen", ["a button on the screen"]),
    ("the button", ["a button on the screen", "the button widget"]),
    ("tap the icon below the label", ["tap the icon below the label ."]),
    ("a list with three items", ["a list with four items", "the list widget"]),
    ("is the toggle clickable ?", ["is the toggle clickable ?"]),
    ("yes", ["yes"]),
    ("no", ["yes"]),
    ("a screen with two buttons and a slider",
     ["a screen with two buttons and a slider", "two buttons and a slider"]),
    ("the the the the the the the", ["the cat sat on the mat"]),
    ("a card above the bar", ["the card above the bar", "a card sits above the bar"]),
    ("click on the badge", ["click on the badge", "tap the badge"]),
    ("an image inside a card", ["an image inside a card ."]),
    ("the screen shows a column of rows", ["the screen shows a column of rows"]),
    ("slider", ["a slider on the screen"]),
    ("a field , a label and an icon", ["a field , a label and an icon"]),
    ("this screen has many widgets", ["the screen has many widgets on it"]),
    ("tap the second button", ["tap the second button", "click the second button"]),
    ("a toggle to the right of the field", ["a toggle right of the field"]),
    ("zero one two three four five", ["zero one two three four five six"]),
    ("the bar at the top of the screen", ["a bar at the top", "the top bar"]),
]


def main():
    candidates = [c for c, _ in CASES]
    references = [r for _, r in CASES]
    expected = {
        "bleu1": bleu(candidates, references, 1),
        "bleu2": bleu(candidates, references, 2),
        "bleu3": bleu(candidates, references, 3),
        "bleu4": bleu(candidates, references, 4),
        "rouge_l": rouge_l(candidates, references),
        "cider_d": cider_d(candidates, references),
    }
    fixture = {
        "cases": [{"candidate": c, "references": r} for c, r in CASES],
        "expected": expected,
    }
    root = os.path.join(os.path.dirname(__file__), "..", "..")
    out = os.path.join(root, "fixtures", "text-metrics.json")
    os.makedirs(os.path.dirname(out), exist_ok=True)
    with open(out, "w") as f:
        json.dump(fixture, f, indent=2, sort_keys=True)
        f.write("\n")
    print("wrote", os.path.normpath(out))
    for k in sorted(expected):
        print(f"  {k} = {expected[k]!r}")

    print("\nhand-check cases for the unit tests:")
    # clipped-count classic: candidate of 7x "the" vs a reference with two "the"
    print("  bleu1 'the the the the the the the' vs 'the cat sat on the mat' =",
          repr(bleu(["the the the the the the the"], [["the cat sat on the mat"]], 1)))
    # brevity penalty: 3-token candidate, 6-token reference, perfect unigrams
    print("  bleu1 'a button widget' vs 'a button widget on the screen' =",
          repr(bleu(["a button widget"], [["a button widget on the screen"]], 1)))
    print("  bleu2 same pair =",
          repr(bleu(["a button widget"], [["a button widget on the screen"]], 2)))
    # closest-length tie toward shorter: candidate len 3, refs len 2 and 4
    print("  bleu1 tie case =",
          repr(bleu(["a b c"], [["a b", "a b c d"]], 1)))
    print("  rouge_l 'the button on screen' vs 'the button on the screen' =",
          repr(rouge_l_single("the button on screen", ["the button on the screen"])))
    print("  rouge_l disjoint =", repr(rouge_l_single("alpha beta", ["gamma delta"])))
    # cider: two images, identical distinct sentences -> every n-gram df = 1,
    # idf = log(2); each image scores penalty 1 and cosine 1 at every n.
    print("  cider two identical distinct pairs =",
          repr(cider_d(["a red button", "a blue slider"],
                       [["a red button"], ["a blue slider"]])))
    print("  cider disjoint candidate =",
          repr(cider_d(["x y z", "a blue slider"],
                       [["a red button"], ["a blue slider"]])))
    print("  cider single image =",
          repr(cider_d(["a red button"], [["a red button"]])))


if __name__ == "__main__":
    main()
