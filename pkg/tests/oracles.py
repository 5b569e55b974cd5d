"""Independent scalar-loop reference implementations.

Written with ``math`` and plain Python loops only, so they share no code
path with the vectorized library versions they check.
"""

import math


def _logsumexp(values):
    m = max(values)
    return m + math.log(sum(math.exp(v - m) for v in values))


def contrastive(sim, scale):
    """(L_t2v, L_v2t, L_con) for a square matrix with videos on rows."""
    b = len(sim)
    t2v = v2t = 0.0
    for i in range(b):
        col = [scale * sim[j][i] for j in range(b)]
        row = [scale * sim[i][j] for j in range(b)]
        t2v -= scale * sim[i][i] - _logsumexp(col)
        v2t -= scale * sim[i][i] - _logsumexp(row)
    t2v /= b
    v2t /= b
    return t2v, v2t, 0.5 * (t2v + v2t)


def two_class_ce(logits, labels):
    total = 0.0
    for (z0, z1), y in zip(logits, labels):
        total -= (z1 if y == 1 else z0) - _logsumexp([z0, z1])
    return total / len(labels)


def masked_ce(logits, labels, positions):
    total = 0.0
    for (q, m), y in zip(positions, labels):
        row = list(logits[q][m])
        total -= row[y] - _logsumexp(row)
    return total / len(labels)


def dsl(sim, temp):
    nq, nc = len(sim), len(sim[0])
    out = [[0.0] * nc for _ in range(nq)]
    for j in range(nc):
        col = [temp * sim[k][j] for k in range(nq)]
        lse = _logsumexp(col)
        for i in range(nq):
            out[i][j] = sim[i][j] * math.exp(temp * sim[i][j] - lse)
    return out


def ranks(sim, truth):
    out = []
    for i, t in enumerate(truth):
        r = 1
        for j, s in enumerate(sim[i]):
            if s > sim[i][t] or (s == sim[i][t] and j < t):
                r += 1
        out.append(r)
    return out


def rollout(layers):
    """Layers are lists of head matrices; returns the rolled-out matrix."""
    n = len(layers[0][0])
    result = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    for heads in layers:
        mixed = []
        for i in range(n):
            row = [0.5 * sum(h[i][j] for h in heads) / len(heads) + (0.5 if i == j else 0.0) for j in range(n)]
            z = sum(row)
            mixed.append([x / z for x in row])
        result = [[sum(mixed[i][k] * result[k][j] for k in range(n)) for j in range(n)] for i in range(n)]
    return result
