"""Independent brute-force reference used by several test modules.

Builds the full joint distribution of a few spins with itertools, swaps two
basis probabilities, and reads back the marginals.  Deliberately shares no
code with the package.
"""

import itertools


def product_probs(biases):
    """{bits: prob} with bits[0] = spin 1 (0 means spin up)."""
    out = {}
    for bits in itertools.product((0, 1), repeat=len(biases)):
        p = 1.0
        for b, eps in zip(bits, biases):
            p *= (1 + eps) / 2 if b == 0 else (1 - eps) / 2
        out[bits] = p
    return out


def marginal_biases(probs, n):
    return [sum(p if bits[i] == 0 else -p for bits, p in probs.items()) for i in range(n)]


def brute_compress(biases, k, width):
    """Exchange |1 0..0> <-> |0 1..1> on spins k (MSB) down to k-width+1."""
    n = len(biases)
    probs = product_probs(biases)
    lo_spins = range(k - width + 1, k)
    out = dict(probs)
    for bits in probs:
        if bits[k - 1] == 1 and all(bits[s - 1] == 0 for s in lo_spins):
            partner = list(bits)
            partner[k - 1] = 0
            for s in lo_spins:
                partner[s - 1] = 1
            partner = tuple(partner)
            out[bits], out[partner] = probs[partner], probs[bits]
    return marginal_biases(out, n)
