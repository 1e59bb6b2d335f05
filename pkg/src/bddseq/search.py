"""Sequence decoding over a trained model: greedy, beam, and grouped
diversity-promoting beam search.

The diverse search ranks one shared pool of beams. At every step the groups
act in a fixed order on the pool's candidate continuations: group i rescales
the raw pointer score of any token that an earlier group has already taken
at this step by (1 - alpha) before the log-softmax, then claims its
group-quota of best remaining (beam, token) continuations. Claimed
continuations are excluded from later groups, so with alpha = 0 the groups
jointly reproduce exactly the plain width-m beam search, and a single
one-beam group reproduces greedy decoding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as M
from .autodiff import Tensor
from .bdd import NodeCapExceeded, VarOrder, build_from_netlist, node_count
from .blif import Netlist
from .graph import CircuitGraph


@dataclass
class Beam:
    tokens: tuple[int, ...]
    score: float
    state: M.DecoderState


@dataclass
class SearchConfig:
    beam_width: int = 20
    groups: int = 10
    alpha: float = 0.25
    mode: str = "balance"
    penalty: str = "scale"  # "scale": score *= (1-alpha); "subtract": score -= alpha*range
    trace: list | None = None

    def __post_init__(self):
        if self.beam_width % self.groups != 0:
            raise ValueError(
                f"groups {self.groups} must divide beam width {self.beam_width}"
            )
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")

    @staticmethod
    def efficiency() -> "SearchConfig":
        return SearchConfig(beam_width=1, groups=1, alpha=0.0, mode="efficiency")

    @staticmethod
    def balance() -> "SearchConfig":
        return SearchConfig(beam_width=20, groups=10, alpha=0.25, mode="balance")

    @staticmethod
    def quality() -> "SearchConfig":
        return SearchConfig(beam_width=50, groups=25, alpha=0.25, mode="quality")

    @staticmethod
    def for_mode(mode: str) -> "SearchConfig":
        key = mode.lower()
        if key == "efficiency":
            return SearchConfig.efficiency()
        if key == "balance":
            return SearchConfig.balance()
        if key == "quality":
            return SearchConfig.quality()
        raise ValueError(f"unknown mode '{mode}'")


def _advance(beam: Beam, pi_embs: Tensor, params: M.ModelParams):
    """Raw pointer scores for the beam's next step plus the advanced state."""
    if beam.tokens:
        prev = M.selection_embedding(pi_embs, beam.tokens[-1])
    else:
        prev = M.start_embedding(params)
    raw, state = M.decoder_advance(beam.state, prev, pi_embs, params)
    return raw.data.copy(), state


def _log_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max()
    return shifted - np.log(np.exp(shifted).sum())


def greedy_decode(graph: CircuitGraph, params: M.ModelParams) -> VarOrder:
    """Argmax decoding; the visited mask guarantees a permutation."""
    emb = M.encode(graph, params)
    pi_embs = M.pi_embeddings(graph, emb)
    num_pis = graph.num_pis
    beam = Beam(tokens=(), score=0.0, state=M.initial_state(params))
    for _ in range(num_pis):
        raw, state = _advance(beam, pi_embs, params)
        masked = raw + M.visited_mask(beam.state.visited, num_pis)
        token = int(np.argmax(masked))
        logp = _log_softmax(masked)[token]
        beam = Beam(
            tokens=beam.tokens + (token,),
            score=beam.score + float(logp),
            state=M.DecoderState(
                state.hidden,
                state.cell,
                beam.state.visited | {token},
                beam.state.step + 1,
            ),
        )
    return VarOrder(beam.tokens)


def _expand_scores(beam: Beam, raw: np.ndarray, num_pis: int, penalized=None,
                   alpha: float = 0.0, penalty: str = "scale") -> np.ndarray:
    """Per-token log-probabilities for one beam, with the group penalty applied
    to raw scores before normalization."""
    scores = raw.copy()
    if penalized:
        if penalty == "scale":
            for t in penalized:
                scores[t] = (1.0 - alpha) * scores[t]
        else:
            span = float(scores.max() - scores.min())
            for t in penalized:
                scores[t] = scores[t] - alpha * span
    return _log_softmax(scores + M.visited_mask(beam.state.visited, num_pis))


def diverse_beam_search(
    graph: CircuitGraph, params: M.ModelParams, config: SearchConfig
) -> list[tuple[VarOrder, float]]:
    """Grouped beam search over one shared pool; see the module docstring.

    Returns up to beam_width complete orderings sorted by score descending
    (fewer only when the number of permutations is smaller).
    """
    emb = M.encode(graph, params)
    pi_embs = M.pi_embeddings(graph, emb)
    num_pis = graph.num_pis
    quota = config.beam_width // config.groups
    pool = [Beam(tokens=(), score=0.0, state=M.initial_state(params))]
    for step in range(num_pis):
        advanced = []
        for beam in pool:
            raw, state = _advance(beam, pi_embs, params)
            advanced.append((beam, raw, state))
        taken: set[tuple[int, int]] = set()  # (beam index, token)
        step_tokens: set[int] = set()  # tokens claimed by earlier groups
        next_pool: list[Beam] = []
        for group in range(config.groups):
            candidates = []
            for b_idx, (beam, raw, state) in enumerate(advanced):
                log_probs = _expand_scores(
                    beam, raw, num_pis, step_tokens, config.alpha, config.penalty
                )
                for token in range(num_pis):
                    if token in beam.state.visited or (b_idx, token) in taken:
                        continue
                    candidates.append(
                        (beam.score + float(log_probs[token]), b_idx, token)
                    )
            candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
            for score, b_idx, token in candidates[:quota]:
                beam, _, state = advanced[b_idx]
                taken.add((b_idx, token))
                step_tokens.add(token)
                next_pool.append(
                    Beam(
                        tokens=beam.tokens + (token,),
                        score=score,
                        state=M.DecoderState(
                            state.hidden,
                            state.cell,
                            beam.state.visited | {token},
                            beam.state.step + 1,
                        ),
                    )
                )
                if config.trace is not None:
                    config.trace.append(
                        {
                            "step": step,
                            "group": group,
                            "beam": len(next_pool) - 1,
                            "token": token,
                            "score": score,
                        }
                    )
        pool = next_pool
    pool.sort(key=lambda b: (-b.score, b.tokens))
    return [(VarOrder(b.tokens), b.score) for b in pool]


def beam_search(
    graph: CircuitGraph, params: M.ModelParams, width: int
) -> list[tuple[VarOrder, float]]:
    """Plain beam search keeping the best `width` partial sequences."""
    return diverse_beam_search(
        graph, params, SearchConfig(beam_width=width, groups=1, alpha=0.0, mode="beam")
    )


def select_best_order(
    candidates, netlist: Netlist, node_cap: int = 2_000_000
) -> VarOrder:
    """Re-rank candidate orders by actual BDD size.

    Candidates must arrive sorted by model score descending; on node-count
    ties the earlier (higher-scoring) candidate wins. Candidates that blow
    the node cap are skipped.
    """
    if not candidates:
        raise ValueError("no candidate orders")
    best = None
    best_count = None
    failures = 0
    for cand in candidates:
        order = cand if isinstance(cand, VarOrder) else VarOrder.of(cand)
        try:
            mgr, roots = build_from_netlist(netlist, order, node_cap=node_cap)
        except NodeCapExceeded:
            failures += 1
            continue
        count = node_count(mgr, roots)
        if best_count is None or count < best_count:
            best, best_count = order, count
    if best is None:
        raise NodeCapExceeded(
            f"all {failures} candidate orders exceeded the node cap"
        )
    return best
