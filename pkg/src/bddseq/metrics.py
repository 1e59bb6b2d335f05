"""Rank-correlation metrics between a predicted and a reference ordering."""

from __future__ import annotations


def _ranks(predicted, label):
    pred = list(predicted)
    lab = list(label)
    if len(pred) != len(lab):
        raise ValueError(f"length mismatch: {len(pred)} vs {len(lab)}")
    if len(pred) < 2:
        raise ValueError("need at least two elements")
    if sorted(pred) != sorted(lab):
        raise ValueError("orderings are over different element sets")
    pos_pred = {v: i for i, v in enumerate(pred)}
    pos_lab = {v: i for i, v in enumerate(lab)}
    return [(pos_pred[v], pos_lab[v]) for v in lab]


def kendall_tau(predicted, label) -> float:
    """(C - D) / (n(n-1)/2) over all element pairs."""
    ranks = _ranks(predicted, label)
    n = len(ranks)
    concordant = discordant = 0
    for i in range(n):
        for j in range(i + 1, n):
            s = (ranks[i][0] - ranks[j][0]) * (ranks[i][1] - ranks[j][1])
            if s > 0:
                concordant += 1
            else:
                discordant += 1
    return (concordant - discordant) / (n * (n - 1) / 2)


def spearman_rho(predicted, label) -> float:
    """1 - 6*sum(d_i^2) / (n(n^2-1)) over per-element rank differences."""
    ranks = _ranks(predicted, label)
    n = len(ranks)
    d2 = sum((a - b) ** 2 for a, b in ranks)
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))
