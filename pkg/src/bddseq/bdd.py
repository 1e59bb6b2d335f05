"""Hash-consed ROBDD engine with reordering.

Levels index positions in the variable order; the variable tested at a level
is `order.permutation[level]`. Terminals live at level n. Node counts include
the terminals and count nodes shared between output roots once.

Reordering is done by the standard in-place adjacent level swap: nodes at the
upper level that depend on the lower variable are rewritten in place (their
identity, and hence all parent references, survive), independent nodes slide
down one level, and lower-level nodes that are still referenced from outside
the swapped band slide up. Reference counts track parent and root references
so dead lower-level nodes can be dropped during the swap; elsewhere dead nodes
are left to the mark-and-sweep collector.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from .blif import Netlist, simulate

FALSE = 0
TRUE = 1

_AND = "and"
_OR = "or"
_XOR = "xor"
_NOT = "not"


class NodeCapExceeded(Exception):
    """The unique table outgrew the configured node cap (ordering blow-up)."""


@dataclass(frozen=True)
class VarOrder:
    """Position -> variable index; a bijection on {0..n-1}."""

    permutation: tuple[int, ...]

    def __post_init__(self):
        n = len(self.permutation)
        if sorted(self.permutation) != list(range(n)):
            raise ValueError(f"not a permutation of 0..{n - 1}: {self.permutation}")

    def __len__(self) -> int:
        return len(self.permutation)

    def __iter__(self):
        return iter(self.permutation)

    def position_of(self, var: int) -> int:
        return self.permutation.index(var)

    def inverse(self) -> "VarOrder":
        inv = [0] * len(self.permutation)
        for pos, var in enumerate(self.permutation):
            inv[var] = pos
        return VarOrder(tuple(inv))

    @staticmethod
    def identity(n: int) -> "VarOrder":
        return VarOrder(tuple(range(n)))

    @staticmethod
    def of(seq) -> "VarOrder":
        return VarOrder(tuple(int(v) for v in seq))


class BddManager:
    """Mutable ROBDD store for one fixed set of variables."""

    def __init__(self, order: VarOrder, node_cap: int = 2_000_000):
        self.n = len(order)
        self.order = list(order.permutation)
        self.var2level = [0] * self.n
        for pos, var in enumerate(self.order):
            self.var2level[var] = pos
        self.node_cap = node_cap
        self.gc_threshold = max(node_cap // 2, 1024)
        # id -> [level, low, high, refcount]; ids 0/1 are the terminals
        self.nodes: dict[int, list[int]] = {}
        self.unique: list[dict[tuple[int, int], int]] = [dict() for _ in range(self.n)]
        self.cache: dict = {}
        self.protected: list[int] = []
        self._next_id = 2

    # -- basic structure ---------------------------------------------------

    def level_of(self, ref: int) -> int:
        if ref <= TRUE:
            return self.n
        return self.nodes[ref][0]

    def low(self, ref: int) -> int:
        return self.nodes[ref][1]

    def high(self, ref: int) -> int:
        return self.nodes[ref][2]

    def var_of(self, ref: int) -> int:
        return self.order[self.nodes[ref][0]]

    def is_terminal(self, ref: int) -> bool:
        return ref <= TRUE

    def _incref(self, ref: int) -> None:
        if ref > TRUE:
            self.nodes[ref][3] += 1

    def _decref(self, ref: int) -> None:
        if ref > TRUE:
            self.nodes[ref][3] -= 1

    def makenode(self, level: int, low: int, high: int) -> int:
        if low == high:
            return low
        hit = self.unique[level].get((low, high))
        if hit is not None:
            return hit
        if len(self.nodes) >= self.node_cap:
            raise NodeCapExceeded(f"node cap {self.node_cap} exceeded")
        nid = self._next_id
        self._next_id += 1
        self.nodes[nid] = [level, low, high, 0]
        self._incref(low)
        self._incref(high)
        self.unique[level][(low, high)] = nid
        return nid

    def var(self, v: int) -> int:
        """The single-variable function for variable index v."""
        return self.makenode(self.var2level[v], FALSE, TRUE)

    def protect(self, ref: int) -> None:
        self.protected.append(ref)
        self._incref(ref)

    def unprotect(self, ref: int) -> None:
        self.protected.remove(ref)
        self._decref(ref)

    # -- apply -------------------------------------------------------------

    def apply_not(self, f: int) -> int:
        if f == FALSE:
            return TRUE
        if f == TRUE:
            return FALSE
        key = (_NOT, f)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        rec = self.nodes[f]
        out = self.makenode(rec[0], self.apply_not(rec[1]), self.apply_not(rec[2]))
        self.cache[key] = out
        return out

    def apply(self, op: str, f: int, g: int) -> int:
        if op == _AND:
            if f == FALSE or g == FALSE:
                return FALSE
            if f == TRUE:
                return g
            if g == TRUE:
                return f
            if f == g:
                return f
        elif op == _OR:
            if f == TRUE or g == TRUE:
                return TRUE
            if f == FALSE:
                return g
            if g == FALSE:
                return f
            if f == g:
                return f
        elif op == _XOR:
            if f == FALSE:
                return g
            if g == FALSE:
                return f
            if f == TRUE:
                return self.apply_not(g)
            if g == TRUE:
                return self.apply_not(f)
            if f == g:
                return FALSE
        else:
            raise ValueError(f"unknown op {op}")
        if f > g:
            f, g = g, f  # all three ops are commutative
        key = (op, f, g)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        lf, lg = self.level_of(f), self.level_of(g)
        level = min(lf, lg)
        f0, f1 = (self.low(f), self.high(f)) if lf == level else (f, f)
        g0, g1 = (self.low(g), self.high(g)) if lg == level else (g, g)
        out = self.makenode(
            level, self.apply(op, f0, g0), self.apply(op, f1, g1)
        )
        self.cache[key] = out
        return out

    def ite_var(self, v: int, then_ref: int, else_ref: int) -> int:
        """if-then-else on a bare variable, used when transferring functions."""
        x = self.var(v)
        return self.apply(
            _OR,
            self.apply(_AND, x, then_ref),
            self.apply(_AND, self.apply_not(x), else_ref),
        )

    # -- evaluation and counting -------------------------------------------

    def eval(self, ref: int, assignment) -> int:
        """assignment maps variable index -> bit."""
        while ref > TRUE:
            level, low, high, _ = self.nodes[ref]
            ref = high if assignment[self.order[level]] else low
        return ref

    def reachable(self, roots) -> set[int]:
        seen: set[int] = set()
        stack = list(roots)
        while stack:
            ref = stack.pop()
            if ref in seen:
                continue
            seen.add(ref)
            if ref > TRUE:
                rec = self.nodes[ref]
                stack.append(rec[1])
                stack.append(rec[2])
        return seen

    def signature(self, roots) -> tuple:
        """Canonical structural fingerprint of the diagrams under the roots."""
        index: dict[int, int] = {}
        out: list[tuple] = []

        def visit(ref: int) -> int:
            if ref in index:
                return index[ref]
            if ref <= TRUE:
                index[ref] = -1 - ref  # -1 for FALSE, -2 for TRUE
                return index[ref]
            rec = self.nodes[ref]
            lo = visit(rec[1])
            hi = visit(rec[2])
            idx = len(out)
            index[ref] = idx
            out.append((rec[0], lo, hi))
            return idx

        root_ids = tuple(visit(r) for r in roots)
        return (tuple(out), root_ids)

    def check(self) -> None:
        """Assert reduction and ordering invariants over the whole store."""
        for level, table in enumerate(self.unique):
            for (low, high), nid in table.items():
                rec = self.nodes[nid]
                assert rec[0] == level and rec[1] == low and rec[2] == high
                assert low != high, "redundant node"
                assert self.level_of(low) > level and self.level_of(high) > level
        keys = [
            (rec[0], rec[1], rec[2]) for rec in self.nodes.values()
        ]
        assert len(keys) == len(set(keys)), "duplicate (level, low, high) triple"

    # -- garbage collection --------------------------------------------------

    def collect_garbage(self) -> int:
        """Mark-and-sweep from the protected set; rebuilds the unique table."""
        live = self.reachable(self.protected)
        dead = [nid for nid in self.nodes if nid not in live]
        for nid in dead:
            del self.nodes[nid]
        self.unique = [dict() for _ in range(self.n)]
        for nid, rec in self.nodes.items():
            rec[3] = 0
            self.unique[rec[0]][(rec[1], rec[2])] = nid
        for rec in self.nodes.values():
            if rec[1] > TRUE:
                self.nodes[rec[1]][3] += 1
            if rec[2] > TRUE:
                self.nodes[rec[2]][3] += 1
        for ref in self.protected:
            self._incref(ref)
        self.cache.clear()
        return len(dead)

    def maybe_collect(self) -> None:
        if len(self.nodes) >= self.gc_threshold:
            self.collect_garbage()

    # -- adjacent level swap -------------------------------------------------

    def _purge_dead(self, level: int) -> None:
        table = self.unique[level]
        dead = [(key, nid) for key, nid in table.items() if self.nodes[nid][3] <= 0]
        for key, nid in dead:
            rec = self.nodes[nid]
            self._decref(rec[1])
            self._decref(rec[2])
            del self.nodes[nid]
            del table[key]

    def _inner_node(self, level: int, low: int, high: int, table) -> int:
        if low == high:
            return low
        hit = table.get((low, high))
        if hit is not None:
            return hit
        nid = self._next_id
        self._next_id += 1
        self.nodes[nid] = [level, low, high, 0]
        self._incref(low)
        self._incref(high)
        table[(low, high)] = nid
        return nid

    def swap_adjacent_levels(self, level: int) -> "BddManager":
        """Exchange the variables at positions level and level+1 in place."""
        if not 0 <= level < self.n - 1:
            raise ValueError(f"level {level} out of range")
        self.cache.clear()
        self._purge_dead(level)
        self._purge_dead(level + 1)
        lower = level + 1
        old_up = self.unique[level]
        old_lo = self.unique[lower]
        new_up: dict[tuple[int, int], int] = {}
        new_lo: dict[tuple[int, int], int] = {}

        dependents = []
        for (low, high), nid in old_up.items():
            if self.level_of(low) == lower or self.level_of(high) == lower:
                dependents.append((nid, low, high))
            else:
                # keeps testing the same variable, which moves down one level
                self.nodes[nid][0] = lower
                new_lo[(low, high)] = nid

        for nid, low, high in dependents:
            if self.level_of(low) == lower:
                l0, l1 = self.nodes[low][1], self.nodes[low][2]
            else:
                l0, l1 = low, low
            if self.level_of(high) == lower:
                h0, h1 = self.nodes[high][1], self.nodes[high][2]
            else:
                h0, h1 = high, high
            g0 = self._inner_node(lower, l0, h0, new_lo)
            g1 = self._inner_node(lower, l1, h1, new_lo)
            rec = self.nodes[nid]
            rec[1], rec[2] = g0, g1
            self._incref(g0)
            self._incref(g1)
            self._decref(low)
            self._decref(high)
            new_up[(g0, g1)] = nid

        for (low, high), nid in old_lo.items():
            rec = self.nodes[nid]
            if rec[3] > 0:
                # still referenced from outside the band: moves up with its variable
                rec[0] = level
                new_up[(low, high)] = nid
            else:
                self._decref(low)
                self._decref(high)
                del self.nodes[nid]

        self.unique[level] = new_up
        self.unique[lower] = new_lo
        u, v = self.order[level], self.order[lower]
        self.order[level], self.order[lower] = v, u
        self.var2level[u], self.var2level[v] = lower, level
        return self

    def current_order(self) -> VarOrder:
        return VarOrder(tuple(self.order))

    def move_var_to(self, var: int, position: int) -> None:
        while self.var2level[var] < position:
            self.swap_adjacent_levels(self.var2level[var])
        while self.var2level[var] > position:
            self.swap_adjacent_levels(self.var2level[var] - 1)


def node_count(manager: BddManager, roots) -> int:
    """Distinct nodes reachable from the roots, terminals included."""
    return len(manager.reachable(roots))


def build_from_netlist(
    netlist: Netlist, order: VarOrder, node_cap: int = 2_000_000
) -> tuple[BddManager, list[int]]:
    """Apply-based construction of all primary-output functions."""
    n = len(netlist.primary_inputs)
    if len(order) != n:
        raise ValueError("order does not permute the primary inputs")
    mgr = BddManager(order, node_cap=node_cap)
    var_index = {name: i for i, name in enumerate(netlist.primary_inputs)}
    refs: dict[str, int] = {}
    for name, idx in var_index.items():
        refs[name] = mgr.var(idx)
        mgr.protect(refs[name])
    for gate in netlist.topo_gates():
        mgr.maybe_collect()
        if not gate.cover:
            result = FALSE
        else:
            acc = FALSE
            for cube in gate.cover:
                term = TRUE
                for sig, ch in zip(gate.inputs, cube.pattern):
                    if ch == "-":
                        continue
                    lit = refs[sig] if ch == "1" else mgr.apply_not(refs[sig])
                    term = mgr.apply(_AND, term, lit)
                acc = mgr.apply(_OR, acc, term)
            result = acc if gate.polarity == 1 else mgr.apply_not(acc)
        refs[gate.output] = result
        mgr.protect(result)
    roots = []
    for po in netlist.primary_outputs:
        roots.append(refs[po])
        mgr.protect(refs[po])
    for ref in list(refs.values()):
        mgr.unprotect(ref)
    return mgr, roots


def swap_adjacent_levels(manager: BddManager, level: int) -> BddManager:
    return manager.swap_adjacent_levels(level)


def sift_reorder(manager: BddManager, roots) -> VarOrder:
    """Rudell-style sifting: park each variable at its best position.

    Ties go to the smallest position. If the node cap is hit while exploring,
    the pass for that variable stops and it is parked at the best position
    seen so far; the final count never exceeds the initial count.
    """
    n = manager.n
    for var in range(n):
        counts = {manager.var2level[var]: node_count(manager, roots)}
        overflow = False
        while manager.var2level[var] < n - 1:
            manager.swap_adjacent_levels(manager.var2level[var])
            c = node_count(manager, roots)
            counts[manager.var2level[var]] = c
            if len(manager.nodes) > manager.node_cap:
                overflow = True
                break
        if not overflow:
            while manager.var2level[var] > 0:
                manager.swap_adjacent_levels(manager.var2level[var] - 1)
                c = node_count(manager, roots)
                pos = manager.var2level[var]
                if pos not in counts or c < counts[pos]:
                    counts[pos] = c
                if len(manager.nodes) > manager.node_cap:
                    break
        best_pos = min(counts, key=lambda p: (counts[p], p))
        manager.move_var_to(var, best_pos)
    return manager.current_order()


def transfer(manager: BddManager, roots, order: VarOrder, node_cap=None):
    """Rebuild the root functions in a fresh manager under another order."""
    cap = node_cap if node_cap is not None else manager.node_cap
    dst = BddManager(order, node_cap=cap)
    memo: dict[int, int] = {FALSE: FALSE, TRUE: TRUE}

    def walk(ref: int) -> int:
        hit = memo.get(ref)
        if hit is not None:
            return hit
        rec = manager.nodes[ref]
        lo = walk(rec[1])
        hi = walk(rec[2])
        out = dst.ite_var(manager.order[rec[0]], hi, lo)
        memo[ref] = out
        return out

    new_roots = [walk(r) for r in roots]
    for r in new_roots:
        dst.protect(r)
    return dst, new_roots


def ga_reorder(
    manager: BddManager,
    roots,
    population: int = 32,
    generations: int = 50,
    seed: int = 0,
    tournament: int = 3,
    mutation_prob: float = 0.2,
) -> VarOrder:
    """Genetic search over variable orders with node-count fitness.

    Order crossover plus swap mutation, tournament selection, and elitism,
    so the result is never worse than the best seeded individual. The search
    is deterministic for a fixed seed.
    """
    if population < 2:
        raise ValueError("population must be at least 2")
    n = manager.n
    rng = random.Random(seed)
    fitness_cache: dict[tuple[int, ...], int] = {}

    def fitness(perm: tuple[int, ...]) -> int:
        hit = fitness_cache.get(perm)
        if hit is not None:
            return hit
        try:
            dst, new_roots = transfer(manager, roots, VarOrder(perm))
            cost = node_count(dst, new_roots)
        except NodeCapExceeded:
            cost = manager.node_cap + 1
        fitness_cache[perm] = cost
        return cost

    def order_crossover(p1, p2):
        a, b = sorted(rng.sample(range(n), 2))
        child = [None] * n
        child[a : b + 1] = p1[a : b + 1]
        held = set(p1[a : b + 1])
        fill = [v for v in p2 if v not in held]
        it = iter(fill)
        for i in range(n):
            if child[i] is None:
                child[i] = next(it)
        return tuple(child)

    def mutate(perm):
        if rng.random() < mutation_prob and n >= 2:
            i, j = rng.sample(range(n), 2)
            lst = list(perm)
            lst[i], lst[j] = lst[j], lst[i]
            return tuple(lst)
        return perm

    pop = [tuple(manager.order)]
    while len(pop) < population:
        perm = list(range(n))
        rng.shuffle(perm)
        pop.append(tuple(perm))

    def best_of(candidates):
        return min(candidates, key=lambda p: (fitness(p), p))

    elite = best_of(pop)
    for _ in range(generations):
        nxt = [elite]
        while len(nxt) < population:
            p1 = best_of([pop[rng.randrange(population)] for _ in range(tournament)])
            p2 = best_of([pop[rng.randrange(population)] for _ in range(tournament)])
            nxt.append(mutate(order_crossover(p1, p2)))
        pop = nxt
        elite = best_of([elite, best_of(pop)])
    return VarOrder(elite)


# -- brute-force oracle ------------------------------------------------------


def output_truth_tables(netlist: Netlist) -> tuple[int, list[int]]:
    """Per-output truth tables as bitmasks.

    Bit i of a table is the output under the assignment whose bit for
    variable j is (i >> (n-1-j)) & 1, i.e. variable 0 is most significant.
    """
    n = len(netlist.primary_inputs)
    tables = [0] * len(netlist.primary_outputs)
    for i in range(1 << n):
        assignment = [(i >> (n - 1 - j)) & 1 for j in range(n)]
        outs = simulate(netlist, assignment)
        for k, bit in enumerate(outs):
            if bit:
                tables[k] |= 1 << i
    return n, tables


class TruthTableBdd:
    """Shannon-expansion construction from explicit truth tables.

    Independent of the apply-based engine; used as a structural oracle and to
    drive the brute-force optimal-order search.
    """

    def __init__(self, n: int):
        self.n = n
        self.unique: dict[tuple[int, int, int], int] = {}
        self.children: dict[int, tuple[int, int, int]] = {}
        self._next = 2

    def build(self, table: int, level: int = 0) -> int:
        width = 1 << (self.n - level)
        if level == self.n:
            return TRUE if table & 1 else FALSE
        if table == 0:
            return FALSE
        if table == (1 << width) - 1:
            return TRUE
        half = width >> 1
        hi_part = table >> half
        lo_part = table & ((1 << half) - 1)
        lo = self.build(lo_part, level + 1)
        hi = self.build(hi_part, level + 1)
        if lo == hi:
            return lo
        key = (level, lo, hi)
        hit = self.unique.get(key)
        if hit is not None:
            return hit
        nid = self._next
        self._next += 1
        self.unique[key] = nid
        self.children[nid] = key
        return nid

    def reachable(self, roots) -> set[int]:
        seen: set[int] = set()
        stack = list(roots)
        while stack:
            ref = stack.pop()
            if ref in seen:
                continue
            seen.add(ref)
            if ref > TRUE:
                _, lo, hi = self.children[ref]
                stack.extend((lo, hi))
        return seen

    def signature(self, roots) -> tuple:
        index: dict[int, int] = {}
        out: list[tuple] = []

        def visit(ref: int) -> int:
            if ref in index:
                return index[ref]
            if ref <= TRUE:
                index[ref] = -1 - ref
                return index[ref]
            level, lo, hi = self.children[ref]
            a = visit(lo)
            b = visit(hi)
            idx = len(out)
            index[ref] = idx
            out.append((level, a, b))
            return idx

        root_ids = tuple(visit(r) for r in roots)
        return (tuple(out), root_ids)


def permute_table(table: int, n: int, perm) -> int:
    """Reindex a truth table so position k of perm becomes bit weight n-1-k."""
    out = 0
    for i in range(1 << n):
        j = 0
        for k, v in enumerate(perm):
            if (i >> (n - 1 - k)) & 1:
                j |= 1 << (n - 1 - v)
        if (table >> j) & 1:
            out |= 1 << i
    return out


def shannon_build(netlist: Netlist, order: VarOrder):
    """Truth-table construction oracle under the given order."""
    n, tables = output_truth_tables(netlist)
    bdd = TruthTableBdd(n)
    roots = [bdd.build(permute_table(t, n, order.permutation)) for t in tables]
    return bdd, roots


def shannon_count(n: int, tables, perm) -> int:
    bdd = TruthTableBdd(n)
    roots = [bdd.build(permute_table(t, n, perm)) for t in tables]
    return len(bdd.reachable(roots))


def brute_force_optimal_order(netlist: Netlist) -> tuple[VarOrder, int]:
    """Exhaustive minimum over all orderings; enforced to at most 9 inputs."""
    n = len(netlist.primary_inputs)
    if n > 9:
        raise ValueError(f"too many inputs for brute force: {n} > 9")
    _, tables = output_truth_tables(netlist)
    best_perm = None
    best_count = None
    for perm in itertools.permutations(range(n)):
        c = shannon_count(n, tables, perm)
        if best_count is None or c < best_count:
            best_perm, best_count = perm, c
    return VarOrder(best_perm), best_count


# -- label generation ----------------------------------------------------------


@dataclass
class LabelReport:
    order: VarOrder
    winner: str
    counts: dict[str, int]


def generate_label_report(
    netlist: Netlist,
    seed: int = 0,
    node_cap: int = 2_000_000,
    ga_population: int = 32,
    ga_generations: int = 50,
    ga_tournament: int = 3,
    ga_mutation: float = 0.2,
) -> LabelReport:
    """Run the heuristic set {natural, sifting, GA} and keep the best order."""
    n = len(netlist.primary_inputs)
    candidates: list[tuple[str, VarOrder, int]] = []

    def try_candidate(name, fn):
        try:
            order, count = fn()
            candidates.append((name, order, count))
        except NodeCapExceeded:
            pass

    def natural():
        order = VarOrder.identity(n)
        mgr, roots = build_from_netlist(netlist, order, node_cap)
        return order, node_count(mgr, roots)

    def sifted():
        mgr, roots = build_from_netlist(netlist, VarOrder.identity(n), node_cap)
        order = sift_reorder(mgr, roots)
        return order, node_count(mgr, roots)

    def genetic():
        mgr, roots = build_from_netlist(netlist, VarOrder.identity(n), node_cap)
        order = ga_reorder(
            mgr,
            roots,
            population=ga_population,
            generations=ga_generations,
            seed=seed,
            tournament=ga_tournament,
            mutation_prob=ga_mutation,
        )
        dst, new_roots = transfer(mgr, roots, order)
        return order, node_count(dst, new_roots)

    try_candidate("natural", natural)
    try_candidate("sifting", sifted)
    try_candidate("ga", genetic)
    if not candidates:
        raise NodeCapExceeded("all labeling heuristics exceeded the node cap")
    winner, order, _ = min(candidates, key=lambda t: t[2])
    return LabelReport(
        order=order, winner=winner, counts={name: c for name, _, c in candidates}
    )


def generate_label(netlist: Netlist, seed: int = 0, node_cap: int = 2_000_000) -> VarOrder:
    return generate_label_report(netlist, seed=seed, node_cap=node_cap).order
