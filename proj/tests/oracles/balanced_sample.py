#!/usr/bin/env python3
"""Independent reference for the seeded balanced sampler.

Pool: 600 records "p000".."p599"; record i is positive iff i is even.
Prints the selected ids for balanced_sample(pool, 200, 200, seed) as JSON.
"""
import json
import sys

MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def bounded(self, n):
        reject_below = (1 << 64) % n
        x = self.next()
        while x < reject_below:
            x = self.next()
        return x % n


def sample_prefix(items, k, rng):
    items = list(items)
    for i in range(k):
        j = i + rng.bounded(len(items) - i)
        items[i], items[j] = items[j], items[i]
    return items[:k]


def shuffle(items, rng):
    items = list(items)
    for i in range(len(items), 1, -1):
        j = rng.bounded(i)
        items[i - 1], items[j] = items[j], items[i - 1]
    return items


def balanced_sample(pool, n_pos, n_neg, seed):
    rng = SplitMix64(seed)
    pos = [r for r in pool if r[1]]
    neg = [r for r in pool if not r[1]]
    chosen = sample_prefix(pos, n_pos, rng) + sample_prefix(neg, n_neg, rng)
    return shuffle(chosen, rng)


if __name__ == "__main__":
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 7
    pool = [("p%03d" % i, i % 2 == 0) for i in range(600)]
    first = SplitMix64(seed)
    print(json.dumps({
        "seed": seed,
        "first_outputs": [str(first.next()) for _ in range(3)],
        "ids": [r[0] for r in balanced_sample(pool, 200, 200, seed)],
    }))
