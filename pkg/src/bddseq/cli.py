"""Command-line pipeline: augment, label, train, predict, synth, eval.

Each command reads an optional flat key=value config file, embeds the
resolved configuration into every artifact it writes, and is deterministic
for a fixed config and seed (wall-time columns excepted; disable
record_times to make those reproducible too).
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import bdd, model as M, search, synth
from .blif import BlifError, bound_fanin, negate_random_signals, parse_blif, write_blif
from .corpus import (
    Corpus,
    CorpusEntry,
    RunConfig,
    load_corpus,
    names_to_order,
    order_to_names,
    read_orders,
    split_of,
    write_csv,
    write_jsonl,
    write_manifest,
    write_orders,
)
from .graph import FeatureConfig, blif2graph
from .metrics import kendall_tau, spearman_rho


def _clock(cfg: RunConfig, start: float) -> float:
    return time.perf_counter() - start if cfg.record_times else 0.0


def _feature_config(cfg: RunConfig) -> FeatureConfig:
    return FeatureConfig(
        max_table_len=cfg.max_table_len,
        normalize_structural=cfg.normalize_structural,
    )


def _prepare_netlist(netlist, cfg: RunConfig):
    return bound_fanin(netlist, cfg.decompose_arity)


def _graph_for(netlist, cfg: RunConfig):
    return blif2graph(_prepare_netlist(netlist, cfg), _feature_config(cfg))


# -- augment -------------------------------------------------------------------


def cmd_augment(args, cfg: RunConfig) -> int:
    in_dir, out_dir = Path(args.input), Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "blif").mkdir(exist_ok=True)
    entries = []
    sources = sorted(in_dir.glob("*.blif"))
    for src_path in sources:
        try:
            source = parse_blif(src_path.read_text())
        except BlifError as exc:
            print(f"skipping {src_path.name}: {exc}", file=sys.stderr)
            continue
        base = src_path.stem
        copy_path = f"blif/{base}.blif"
        (out_dir / copy_path).write_text(write_blif(source))
        entries.append(
            CorpusEntry(base, copy_path, src_path.name, "copy", split_of(base, cfg.seed))
        )
        for j in range(args.variants):
            variant_id = f"{base}_v{j}"
            rng_seed = _variant_seed(cfg.seed, base, j)
            decomposed = bound_fanin(source, cfg.decompose_arity)
            k = min(cfg.negations_per_variant, len(decomposed.internal_signals()))
            variant = negate_random_signals(decomposed, k, rng_seed)
            variant.name = variant_id
            var_path = f"blif/{variant_id}.blif"
            (out_dir / var_path).write_text(write_blif(variant))
            entries.append(
                CorpusEntry(
                    variant_id,
                    var_path,
                    src_path.name,
                    f"bound_fanin({cfg.decompose_arity})+negate({k},seed={rng_seed})",
                    split_of(variant_id, cfg.seed),
                )
            )
    write_manifest(out_dir / "manifest.csv", entries, cfg)
    print(f"wrote {len(entries)} corpus entries to {out_dir}")
    return 0


def _variant_seed(seed: int, base: str, j: int) -> int:
    return int.from_bytes(
        __import__("hashlib").sha256(f"{seed}:{base}:{j}".encode()).digest()[:4], "big"
    )


# -- label ---------------------------------------------------------------------


def cmd_label(args, cfg: RunConfig) -> int:
    corpus = load_corpus(args.corpus)
    labels = dict(corpus.labels)
    rows = []
    for entry in corpus.entries:
        if entry.circuit_id in labels and not args.force:
            continue
        netlist = _prepare_netlist(corpus.load_netlist(entry), cfg)
        start = time.perf_counter()
        try:
            report = bdd.generate_label_report(
                netlist,
                seed=cfg.seed,
                node_cap=cfg.node_cap,
                ga_population=cfg.ga_population,
                ga_generations=cfg.ga_generations,
                ga_tournament=cfg.ga_tournament,
                ga_mutation=cfg.ga_mutation,
            )
        except bdd.NodeCapExceeded:
            print(
                f"warning: {entry.circuit_id} exceeded the node cap; dropped",
                file=sys.stderr,
            )
            continue
        elapsed = _clock(cfg, start)
        labels[entry.circuit_id] = order_to_names(netlist, report.order)
        rows.append(
            [
                entry.circuit_id,
                report.winner,
                report.counts.get("natural", ""),
                report.counts.get("sifting", ""),
                report.counts.get("ga", ""),
                min(report.counts.values()),
                f"{elapsed:.6f}",
            ]
        )
    ordered = {
        e.circuit_id: labels[e.circuit_id]
        for e in corpus.entries
        if e.circuit_id in labels
    }
    write_orders(corpus.root / "labels.txt", ordered, cfg)
    write_csv(
        corpus.root / "label_report.csv",
        ["circuit_id", "winner", "natural", "sifting", "ga", "label_count", "time_seconds"],
        rows,
        cfg,
    )
    print(f"labeled {len(rows)} circuits ({len(ordered)} total labels)")
    return 0


# -- train -----------------------------------------------------------------------


def _dataset(corpus: Corpus, cfg: RunConfig, split: str):
    data = []
    for entry in corpus.by_split(split):
        names = corpus.labels.get(entry.circuit_id)
        if names is None:
            continue
        netlist = _prepare_netlist(corpus.load_netlist(entry), cfg)
        graph = blif2graph(netlist, _feature_config(cfg))
        data.append((graph, names_to_order(netlist, names)))
    return data


def _decode_metrics(params, val_dataset):
    taus, rhos = [], []
    for graph, label in val_dataset:
        order = search.greedy_decode(graph, params)
        taus.append(kendall_tau(order.permutation, label.permutation))
        rhos.append(spearman_rho(order.permutation, label.permutation))
    return {"val_tau": float(np.mean(taus)), "val_rho": float(np.mean(rhos))}


def cmd_train(args, cfg: RunConfig) -> int:
    corpus = load_corpus(args.corpus)
    train_set = _dataset(corpus, cfg, "train")
    val_set = _dataset(corpus, cfg, "val")
    if not train_set:
        print("error: no labeled training circuits", file=sys.stderr)
        return 1
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    feature_dim = train_set[0][0].features.shape[1]
    mconfig = M.ModelConfig(
        feature_dim=feature_dim, hidden=cfg.hidden, layers=cfg.layers, heads=cfg.heads
    )
    if args.resume:
        params, opt_state, start_epoch = M.load_checkpoint(args.resume)
    else:
        params, opt_state, start_epoch = M.init_params(mconfig, seed=cfg.seed), None, 0
    one_epoch = M.TrainConfig(
        epochs=1,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        seed=cfg.seed,
        uniform_weights=cfg.uniform_weights,
    )
    # per-epoch shuffling depends only on (seed, epoch), so training one epoch
    # at a time is identical to one long run and lets us checkpoint the best
    rows = []
    best_tau = None
    best_epoch = None
    for epoch in range(start_epoch, start_epoch + cfg.epochs):
        params, history, opt_state = M.train(
            train_set,
            one_epoch,
            params=params,
            val_dataset=val_set,
            eval_fn=_decode_metrics,
            optimizer_state=opt_state,
            start_epoch=epoch,
        )
        row = history[0]
        rows.append(
            [
                row["epoch"],
                f"{row['train_loss']:.6f}",
                f"{row.get('val_loss', float('nan')):.6f}",
                f"{row.get('val_tau', float('nan')):.6f}",
                f"{row.get('val_rho', float('nan')):.6f}",
            ]
        )
        tau = row.get("val_tau")
        if tau is not None and (best_tau is None or tau > best_tau):
            best_tau, best_epoch = tau, epoch
            M.save_params(params, out_dir / "best.bin")
    write_csv(
        out_dir / "loss_trace.csv",
        ["epoch", "train_loss", "val_loss", "val_tau", "val_rho"],
        rows,
        cfg,
    )
    M.save_params(params, out_dir / "weights.bin")
    M.save_checkpoint(params, opt_state, start_epoch + cfg.epochs, out_dir / "checkpoint.bin")
    if best_tau is None:
        print(f"trained {cfg.epochs} epochs on {len(train_set)} circuits (no val split)")
    else:
        print(
            f"trained {cfg.epochs} epochs on {len(train_set)} circuits; "
            f"best val tau {best_tau:.4f} at epoch {best_epoch}"
        )
    return 0


# -- predict ---------------------------------------------------------------------


def predict_order(netlist, params, mode: str, cfg: RunConfig, trace=None):
    """Decode candidates for the given mode and re-rank by BDD size."""
    graph = _graph_for(netlist, cfg)
    prepared = _prepare_netlist(netlist, cfg)
    if mode == "efficiency":
        order = search.greedy_decode(graph, params)
        candidates = [order]
    else:
        config = search.SearchConfig.for_mode(mode)
        config = search.SearchConfig(
            beam_width=config.beam_width,
            groups=config.groups,
            alpha=cfg.alpha,
            mode=mode,
            trace=trace,
        )
        scored = search.diverse_beam_search(graph, params, config)
        candidates = [order for order, _ in scored]
        greedy = search.greedy_decode(graph, params)
        if greedy not in candidates:
            candidates.append(greedy)
    return search.select_best_order(candidates, prepared, node_cap=cfg.node_cap), len(
        candidates
    )


def cmd_predict(args, cfg: RunConfig) -> int:
    netlist = parse_blif(Path(args.circuit).read_text())
    params = M.load_params(args.weights)
    trace = [] if args.trace else None
    order, n_candidates = predict_order(netlist, params, args.mode, cfg, trace)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_orders(
        out_dir / f"{netlist.name}.order",
        {netlist.name: order_to_names(netlist, order)},
        cfg,
    )
    if trace is not None:
        write_jsonl(out_dir / f"{netlist.name}.trace.jsonl", trace, cfg)
    print(
        f"{netlist.name}: {args.mode} explored {n_candidates} candidates -> "
        + " ".join(order_to_names(netlist, order))
    )
    return 0


# -- synth -----------------------------------------------------------------------


def synthesize_circuit(netlist, order, cfg: RunConfig):
    prepared = _prepare_netlist(netlist, cfg)
    start = time.perf_counter()
    mgr, roots = bdd.build_from_netlist(prepared, order, node_cap=cfg.node_cap)
    circuit = synth.synthesize(mgr, roots, prepared)
    elapsed = _clock(cfg, start)
    if len(prepared.primary_inputs) <= 10:
        if not synth.verify_synthesis(circuit, prepared):
            raise RuntimeError(
                f"synthesized circuit does not match netlist '{netlist.name}'"
            )
    return circuit, bdd.node_count(mgr, roots), elapsed


def cmd_synth(args, cfg: RunConfig) -> int:
    netlist = parse_blif(Path(args.circuit).read_text())
    orders = read_orders(args.orders)
    if netlist.name not in orders:
        print(f"error: no order for '{netlist.name}' in {args.orders}", file=sys.stderr)
        return 1
    prepared = _prepare_netlist(netlist, cfg)
    order = names_to_order(prepared, orders[netlist.name])
    circuit, nodes, elapsed = synthesize_circuit(netlist, order, cfg)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"{netlist.name}.real").write_text(synth.write_real(circuit))
    write_csv(
        out_dir / f"{netlist.name}.metrics.csv",
        ["circuit", "mode", "gates", "lines", "qc", "transistor_cost", "time_seconds"],
        [
            [
                netlist.name,
                args.mode or "given-order",
                len(circuit.gates),
                circuit.lines,
                synth.quantum_cost(circuit),
                synth.transistor_cost(circuit),
                f"{elapsed:.6f}",
            ]
        ],
        cfg,
    )
    print(
        f"{netlist.name}: gates={len(circuit.gates)} lines={circuit.lines} "
        f"qc={synth.quantum_cost(circuit)} transistor={synth.transistor_cost(circuit)} "
        f"nodes={nodes}"
    )
    return 0


# -- eval ------------------------------------------------------------------------


def cmd_eval(args, cfg: RunConfig) -> int:
    corpus = load_corpus(args.corpus)
    params = M.load_params(args.weights)
    test_entries = corpus.by_split("test")
    if args.circuits:
        wanted = set(args.circuits.split(","))
        tagged = {e.circuit_id: e.split for e in corpus.entries}
        for cid in wanted:
            if tagged.get(cid) in ("train", "val"):
                print(
                    f"error: circuit '{cid}' is in the {tagged[cid]} split; "
                    "evaluation only covers held-out circuits",
                    file=sys.stderr,
                )
                return 1
        test_entries = [e for e in test_entries if e.circuit_id in wanted]
    if not test_entries:
        print("error: empty test split", file=sys.stderr)
        return 1

    # ordering time (heuristic or model inference) is reported separately
    # from BDD construction + synthesis time; time_seconds is their sum
    header = [
        "circuit",
        "method",
        "node_count",
        "qc",
        "order_seconds",
        "synth_seconds",
        "time_seconds",
        "tau",
        "rho",
    ]
    rows = []
    totals: dict[str, list[float]] = {}
    taus: dict[str, list[float]] = {}
    rhos: dict[str, list[float]] = {}

    def record(circuit_id, method, nodes, qc, order_secs, synth_secs, tau="", rho=""):
        rows.append(
            [
                circuit_id,
                method,
                nodes,
                qc,
                f"{order_secs:.6f}",
                f"{synth_secs:.6f}",
                f"{order_secs + synth_secs:.6f}",
                tau,
                rho,
            ]
        )
        totals.setdefault(method, [0.0, 0.0, 0.0])
        totals[method][0] += nodes
        totals[method][1] += qc
        totals[method][2] += order_secs + synth_secs

    for entry in test_entries:
        netlist = _prepare_netlist(corpus.load_netlist(entry), cfg)
        n = len(netlist.primary_inputs)
        label_names = corpus.labels.get(entry.circuit_id)
        label = names_to_order(netlist, label_names) if label_names else None

        def run(method, order_fn):
            start = time.perf_counter()
            order = order_fn()
            order_secs = _clock(cfg, start)
            start = time.perf_counter()
            mgr, roots = bdd.build_from_netlist(netlist, order, node_cap=cfg.node_cap)
            circuit = synth.synthesize(mgr, roots, netlist)
            synth_secs = _clock(cfg, start)
            tau = rho = ""
            if label is not None and method.startswith("model") and n >= 2:
                t = kendall_tau(order.permutation, label.permutation)
                r = spearman_rho(order.permutation, label.permutation)
                taus.setdefault(method, []).append(t)
                rhos.setdefault(method, []).append(r)
                tau, rho = f"{t:.4f}", f"{r:.4f}"
            record(
                entry.circuit_id,
                method,
                bdd.node_count(mgr, roots),
                synth.quantum_cost(circuit),
                order_secs,
                synth_secs,
                tau,
                rho,
            )

        run("natural", lambda: bdd.VarOrder.identity(n))

        def sifted():
            mgr, roots = bdd.build_from_netlist(
                netlist, bdd.VarOrder.identity(n), node_cap=cfg.node_cap
            )
            return bdd.sift_reorder(mgr, roots)

        run("sifting", sifted)

        def genetic():
            mgr, roots = bdd.build_from_netlist(
                netlist, bdd.VarOrder.identity(n), node_cap=cfg.node_cap
            )
            return bdd.ga_reorder(
                mgr,
                roots,
                population=cfg.ga_population,
                generations=cfg.ga_generations,
                seed=cfg.seed,
                tournament=cfg.ga_tournament,
                mutation_prob=cfg.ga_mutation,
            )

        run("ga", genetic)
        for mode in ("efficiency", "balance", "quality"):
            run(
                f"model_{mode}",
                lambda mode=mode: predict_order(netlist, params, mode, cfg)[0],
            )

    for method in sorted(totals):
        rows.append(
            [
                "TOTAL",
                method,
                int(totals[method][0]),
                int(totals[method][1]),
                "",
                "",
                f"{totals[method][2]:.6f}",
                f"{np.mean(taus[method]):.4f}" if method in taus else "",
                f"{np.mean(rhos[method]):.4f}" if method in rhos else "",
            ]
        )
    for method in sorted(totals):
        if method.startswith("model") and totals[method][1] > 0:
            for base in ("natural", "sifting", "ga"):
                rows.append(
                    [
                        "RATIO",
                        f"{base}/{method}",
                        f"{totals[base][0] / max(totals[method][0], 1):.4f}",
                        f"{totals[base][1] / max(totals[method][1], 1):.4f}",
                        "",
                        "",
                        "",
                        "",
                        "",
                    ]
                )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "eval_report.csv", header, rows, cfg)
    print(f"evaluated {len(test_entries)} test circuits -> {out_dir / 'eval_report.csv'}")
    return 0


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bddseq",
        description="BDD variable-ordering prediction and reversible synthesis",
    )
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="decompose and negate source circuits")
    p.add_argument("input", help="directory of .blif sources")
    p.add_argument("--variants", type=int, default=3, help="variants per circuit")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_augment)

    p = sub.add_parser("label", help="generate best-known orders for a corpus")
    p.add_argument("corpus", help="corpus directory with manifest.csv")
    p.add_argument("--force", action="store_true", help="relabel existing entries")
    p.set_defaults(fn=cmd_label)

    p = sub.add_parser("train", help="train the ordering model on a labeled corpus")
    p.add_argument("corpus")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("predict", help="predict an ordering for one circuit")
    p.add_argument("circuit", help=".blif file")
    p.add_argument("--weights", required=True)
    p.add_argument(
        "--mode",
        choices=["efficiency", "balance", "quality"],
        default="balance",
    )
    p.add_argument("--trace", action="store_true", help="dump a JSONL search trace")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("synth", help="synthesize a reversible circuit from an order")
    p.add_argument("circuit", help=".blif file")
    p.add_argument("orders", help="ordering file")
    p.add_argument("--mode", help="mode tag recorded in the metrics row")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("eval", help="compare heuristics and model modes on the test split")
    p.add_argument("corpus")
    p.add_argument("--weights", required=True)
    p.add_argument("--circuits", help="comma-separated circuit ids (test split only)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_eval)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    return args.fn(args, cfg)


if __name__ == "__main__":
    sys.exit(main())
