"""Linear-chain CRF over emission scores: path scores, the forward
algorithm, forward-backward marginals and exact top-k Viterbi.

Labels are integer indices; ties between equal-scoring paths are broken
by the lexicographic order of the label index tuples.
"""

from __future__ import annotations

import numpy as np


def logsumexp(a, axis=None):
    a = np.asarray(a, dtype=np.float64)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis) if axis is not None else out.item()


def path_score(E, T, start, end, labels) -> float:
    """Unnormalized score of one label path.

    Accumulated left to right in the same order as :func:`viterbi_topk`
    so the two agree bit for bit.
    """
    if len(labels) != len(E):
        raise ValueError(f"{len(labels)} labels for {len(E)} positions")
    if len(E) == 0:
        raise ValueError("empty sequence")
    s = start[labels[0]] + E[0, labels[0]]
    for t in range(1, len(labels)):
        s = s + T[labels[t - 1], labels[t]] + E[t, labels[t]]
    return float(s + end[labels[-1]])


def forward(E, T, start):
    n, L = E.shape
    alpha = np.empty((n, L))
    alpha[0] = start + E[0]
    for t in range(1, n):
        alpha[t] = logsumexp(alpha[t - 1][:, None] + T, axis=0) + E[t]
    return alpha


def backward(E, T, end):
    n, L = E.shape
    beta = np.empty((n, L))
    beta[-1] = end
    for t in range(n - 2, -1, -1):
        beta[t] = logsumexp(T + (E[t + 1] + beta[t + 1])[None, :], axis=1)
    return beta


def log_partition(E, T, start, end) -> float:
    if len(E) == 0:
        raise ValueError("log partition of an empty sequence is undefined")
    alpha = forward(E, T, start)
    return logsumexp(alpha[-1] + end)


def marginals(E, T, start, end):
    """Return ``(logZ, unary, pairwise)`` posterior marginals."""
    alpha = forward(E, T, start)
    beta = backward(E, T, end)
    logz = logsumexp(alpha[-1] + end)
    unary = np.exp(alpha + beta - logz)
    pair = np.exp(alpha[:-1, :, None] + T[None] + (E[1:] + beta[1:])[:, None, :] - logz)
    return logz, unary, pair


def nll(E, T, start, end, gold):
    """Negative conditional log likelihood of ``gold`` and its gradients
    with respect to emissions, transitions, start and end scores."""
    logz, unary, pair = marginals(E, T, start, end)
    loss = logz - path_score(E, T, start, end, gold)
    dE = unary.copy()
    dT = pair.sum(axis=0)
    dstart = unary[0].copy()
    dend = unary[-1].copy()
    dE[np.arange(len(gold)), gold] -= 1.0
    for a, b in zip(gold[:-1], gold[1:]):
        dT[a, b] -= 1.0
    dstart[gold[0]] -= 1.0
    dend[gold[-1]] -= 1.0
    return max(loss, 0.0), dE, dT, dstart, dend


def viterbi_topk(E, T, start, end, k: int) -> list[tuple[tuple[int, ...], float]]:
    """Exact k best label paths as ``(labels, score)``.

    Keeps the k best partial paths per (position, label); because every
    completion adds the same suffix score to all partial paths ending in
    the same label, pruning to k there loses nothing.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    n, L = E.shape
    if n == 0:
        raise ValueError("cannot decode an empty sequence")

    def prune(cands):
        cands.sort(key=lambda c: (-c[0], c[1]))
        return cands[:k]

    beams = [[(start[y] + E[0, y], (y,))] for y in range(L)]
    for t in range(1, n):
        beams = [
            prune([(s + T[lab[-1], y] + E[t, y], lab + (y,)) for prev in beams for s, lab in prev])
            for y in range(L)
        ]
    final = prune([(s + end[lab[-1]], lab) for beam in beams for s, lab in beam])
    return [(lab, float(s)) for s, lab in final]
