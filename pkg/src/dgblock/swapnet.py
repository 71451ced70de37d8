"""Acquaintance schedules on a line of qubits.

A schedule is a list of layers. Each layer holds permutation gates
(``FSWAP`` on two adjacent positions, ``PSWAP`` exchanging two adjacent
contiguous ranges) and acquaintance placeholders (``ACQ`` on a contiguous
range). Within a layer the acquaintances see the mapping from before the
layer, so an acquaintance and the swap on the same qubits fuse into one
fermionic-simulation step. Permutation gates in a layer are pairwise
disjoint, as are acquaintance gates.

Layer cost is the fswap depth of its widest gate: 1 for FSWAP and ACQ,
s1 + s2 - 1 for a PSWAP of ranges of sizes s1 and s2.
"""

from __future__ import annotations

import json
import numbers
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations
from typing import NamedTuple

UP, DOWN = 0, 1


class ScheduleError(ValueError):
    pass


class OrbitalLabel(NamedTuple):
    block: int
    index: int
    spin: int

    def __str__(self) -> str:
        return f"{self.block}:{self.index}:{'ud'[self.spin]}"


def parse_label(text: str):
    if ":" not in text:
        return int(text)
    k, j, s = text.split(":")
    if s not in ("u", "d"):
        raise ScheduleError(f"bad spin in label {text!r}")
    return OrbitalLabel(int(k), int(j), UP if s == "u" else DOWN)


def spin_of(label) -> int:
    return label.spin if isinstance(label, OrbitalLabel) else 0


@dataclass(frozen=True)
class Gate:
    kind: str  # "FSWAP" | "PSWAP" | "ACQ"
    a: int
    b: int
    c: int = -1
    d: int = -1

    @property
    def span(self) -> tuple[int, int]:
        return (self.a, self.d if self.kind == "PSWAP" else self.b)

    @property
    def permutes(self) -> bool:
        return self.kind != "ACQ"

    @property
    def cost(self) -> int:
        if self.kind == "PSWAP":
            return (self.b - self.a + 1) + (self.d - self.c + 1) - 1
        return 1

    def shift(self, off: int) -> "Gate":
        if self.kind == "PSWAP":
            return Gate(self.kind, self.a + off, self.b + off, self.c + off, self.d + off)
        return Gate(self.kind, self.a + off, self.b + off)

    def apply(self, mapping: list) -> None:
        if self.kind == "FSWAP":
            mapping[self.a], mapping[self.b] = mapping[self.b], mapping[self.a]
        elif self.kind == "PSWAP":
            mapping[self.a:self.d + 1] = mapping[self.c:self.d + 1] + mapping[self.a:self.b + 1]

    def to_text(self, mapping=None) -> str:
        if self.kind == "FSWAP":
            return f"FSWAP {self.a} {self.b}"
        if self.kind == "PSWAP":
            return f"PSWAP {self.a}..{self.b} {self.c}..{self.d}"
        labels = ""
        if mapping is not None:
            labels = " {" + ",".join(str(x) for x in mapping[self.a:self.b + 1]) + "}"
        return f"ACQ {self.a}..{self.b}{labels}"


def fswap(p: int) -> Gate:
    return Gate("FSWAP", p, p + 1)


def pswap(a: int, b: int, c: int, d: int) -> Gate:
    return Gate("PSWAP", a, b, c, d)


def acq(a: int, b: int) -> Gate:
    return Gate("ACQ", a, b)


def check_layer(layer, width: int) -> None:
    for group in (True, False):
        used = set()
        for g in layer:
            if g.permutes != group:
                continue
            lo, hi = g.span
            if lo < 0 or hi >= width or lo > hi:
                raise ScheduleError(f"gate {g.to_text()} outside width {width}")
            if g.kind == "FSWAP" and g.b != g.a + 1:
                raise ScheduleError(f"FSWAP on non-adjacent positions {g.a}, {g.b}")
            if g.kind == "PSWAP" and (g.c != g.b + 1 or g.a > g.b or g.c > g.d):
                raise ScheduleError(f"PSWAP ranges not adjacent: {g.to_text()}")
            span = set(range(lo, hi + 1))
            if used & span:
                raise ScheduleError(f"overlapping gates in layer at {sorted(used & span)}")
            used |= span


def layer_cost(layer) -> int:
    return max((g.cost for g in layer), default=0)


@dataclass
class SwapSchedule:
    width: int
    initial_mapping: tuple
    layers: list
    name: str = ""
    stage_depths: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return sum(layer_cost(l) for l in self.layers)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def simulate(self):
        """Yield (layer index, mapping before the layer, list of acquainted sets)."""
        mapping = list(self.initial_mapping)
        for i, layer in enumerate(self.layers):
            check_layer(layer, self.width)
            sets = [frozenset(mapping[g.a:g.b + 1]) for g in layer if g.kind == "ACQ"]
            yield i, list(mapping), sets
            for g in layer:
                g.apply(mapping)
        self._final = mapping

    @property
    def final_mapping(self) -> tuple:
        for _ in self.simulate():
            pass
        return tuple(self._final)

    def acquainted_sets(self) -> list:
        out = []
        for _, _, sets in self.simulate():
            out.extend(sets)
        return out

    # -- serialization ---------------------------------------------------

    def to_text(self) -> str:
        lines = ["# swap schedule v1", f"name {self.name or '-'}", f"width {self.width}",
                 "initial " + " ".join(str(x) for x in self.initial_mapping)]
        for i, mapping, _ in self.simulate():
            gates = self.layers[i]
            lines.append("layer " + " ; ".join(g.to_text(mapping) for g in gates))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SwapSchedule":
        width, initial, layers, name = None, None, [], ""
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, rest = line.partition(" ")
            if key == "name":
                name = "" if rest.strip() == "-" else rest.strip()
            elif key == "width":
                width = int(rest)
            elif key == "initial":
                initial = tuple(parse_label(t) for t in rest.split())
            elif key == "layer":
                layers.append([_parse_gate(t, lineno) for t in rest.split(";") if t.strip()])
            else:
                raise ScheduleError(f"line {lineno}: unknown record {key!r}")
        if width is None or initial is None:
            raise ScheduleError("missing width or initial mapping")
        if len(initial) != width:
            raise ScheduleError("initial mapping length differs from width")
        for layer in layers:
            check_layer(layer, width)
        return cls(width, initial, layers, name)

    def to_json(self) -> str:
        trace = []
        for i, mapping, sets in self.simulate():
            trace.append({"layer": i, "gates": [g.to_text() for g in self.layers[i]],
                          "mapping": [str(x) for x in mapping],
                          "acquainted": [sorted(str(x) for x in s) for s in sets]})
        doc = {"schema": "dgblock.swap_schedule/1", "name": self.name, "width": self.width,
               "depth": self.depth, "stage_depths": self.stage_depths,
               "initial": [str(x) for x in self.initial_mapping],
               "final": [str(x) for x in self.final_mapping], "layers": trace}
        return json.dumps(doc, indent=1, sort_keys=True)


def _parse_range(tok: str) -> tuple[int, int]:
    lo, _, hi = tok.partition("..")
    return int(lo), int(hi)


def _parse_gate(text: str, lineno: int) -> Gate:
    parts = text.split("{", 1)[0].split()
    try:
        if parts[0] == "FSWAP":
            return Gate("FSWAP", int(parts[1]), int(parts[2]))
        if parts[0] == "PSWAP":
            a, b = _parse_range(parts[1])
            c, d = _parse_range(parts[2])
            return pswap(a, b, c, d)
        if parts[0] == "ACQ":
            a, b = _parse_range(parts[1])
            return acq(a, b)
    except (IndexError, ValueError) as exc:
        raise ScheduleError(f"line {lineno}: malformed gate {text.strip()!r}") from exc
    raise ScheduleError(f"line {lineno}: unknown gate {text.strip()!r}")


# -- construction helpers ------------------------------------------------------


class _Builder:
    """Mutable layer list over a local mapping."""

    def __init__(self, labels):
        self.mapping = list(labels)
        self.layers = []

    @property
    def width(self) -> int:
        return len(self.mapping)

    def add(self, layer) -> None:
        if not layer:
            return
        check_layer(layer, self.width)
        for g in layer:
            g.apply(self.mapping)
        self.layers.append(list(layer))

    def add_parallel(self, subs) -> None:
        """Merge layer lists of sub-builders placed at the given offsets."""
        depth = max((len(b.layers) for _, b in subs), default=0)
        for i in range(depth):
            layer = []
            for off, b in subs:
                if i < len(b.layers):
                    layer.extend(g.shift(off) for g in b.layers[i])
            self.add(layer)

    def route(self, target, lo: int = 0) -> None:
        """Odd-even transposition routing of positions lo.. to ``target``."""
        n = len(target)
        rank = {lab: i for i, lab in enumerate(target)}
        keys = [rank[x] for x in self.mapping[lo:lo + n]]
        r = 0
        while keys != sorted(keys):
            layer = []
            for i in range(r % 2, n - 1, 2):
                if keys[i] > keys[i + 1]:
                    keys[i], keys[i + 1] = keys[i + 1], keys[i]
                    layer.append(fswap(lo + i))
            self.add(layer)
            r += 1

    def part_network(self, sizes, lo: int = 0, tags=None, accept=None) -> None:
        """Swap network over contiguous parts starting at ``lo``.

        Without ``tags`` every adjacent part pair is swapped in odd-even
        rounds until the part order is reversed (the partition swap
        network). With ``tags`` ('L'/'R') only L-R neighbours swap, until all
        R parts precede all L parts. Each swap acquaints the union of the
        two parts when ``accept(union_labels)`` allows it.
        """
        parts = [[s, (tags[i] if tags else i)] for i, s in enumerate(sizes)]
        m = len(parts)
        r = 0
        while True:
            if tags is None and r >= m:
                break
            if tags is not None and not any(
                    parts[i][1] == "L" and parts[i + 1][1] == "R" for i in range(m - 1)):
                break
            starts = [lo]
            for s, _ in parts[:-1]:
                starts.append(starts[-1] + s)
            layer = []
            for i in range(r % 2, m - 1, 2):
                if tags is not None and not (parts[i][1] == "L" and parts[i + 1][1] == "R"):
                    continue
                a = starts[i]
                b = a + parts[i][0] - 1
                d = b + parts[i + 1][0]
                union = frozenset(self.mapping[a:d + 1])
                if accept is None or accept(union):
                    layer.append(acq(a, d))
                if b == a and d == b + 1:
                    layer.append(fswap(a))
                else:
                    layer.append(pswap(a, b, b + 1, d))
                parts[i], parts[i + 1] = parts[i + 1], parts[i]
            self.add(layer)
            r += 1


def _finish(builder: _Builder, initial, name: str, stage_depths=None) -> SwapSchedule:
    return SwapSchedule(len(initial), tuple(initial), builder.layers, name, stage_depths or {})


# -- networks ------------------------------------------------------------------


def linear_swap_network(n: int, labels=None) -> SwapSchedule:
    """Odd-even transposition network acquainting every pair."""
    if n < 2:
        raise ValueError("linear swap network needs n >= 2")
    labels = list(range(n)) if labels is None else list(labels)
    b = _Builder(labels)
    b.part_network([1] * n)
    return _finish(b, labels, f"linear({n})")


def p_swap_network(sizes, labels=None) -> SwapSchedule:
    """Acquaints the union of every pair of parts; reverses the part order."""
    sizes = list(sizes)
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError("parts must be non-empty")
    n = sum(sizes)
    labels = list(range(n)) if labels is None else list(labels)
    b = _Builder(labels)
    b.part_network(sizes)
    return _finish(b, labels, "pswap(" + ",".join(map(str, sizes)) + ")")


def _odd_prime_at_least(m: int) -> int:
    p = max(3, m)
    while p % 2 == 0 or any(p % d == 0 for d in range(3, int(p**0.5) + 1, 2)):
        p += 1
    return p


def pgl2_matchings(n: int) -> list:
    """Matchings on n points from the involutions of PGL(2, p), p + 1 >= n.

    Points are 0..p-1 and infinity (index p); the first n are used. Any two
    disjoint pairs {a, b}, {c, d} of points are exchanged by some involution,
    so every 4-set contains two edges of one matching.
    """
    p = _odd_prime_at_least(n - 1)
    inf = p
    pts = list(range(min(n, p))) + ([inf] if n == p + 1 else [])
    index = {x: i for i, x in enumerate(pts)}

    def act(a, b, c, z):
        # z -> (a z + b) / (c z - a)
        if z == inf:
            return inf if c == 0 else (a * pow(c, -1, p)) % p
        num = (a * z + b) % p
        den = (c * z - a) % p
        if den == 0:
            return inf
        return (num * pow(den, -1, p)) % p

    seen, out = set(), []
    for a in range(p):
        for b in range(p):
            for c in range(p):
                first = next((x for x in (a, b, c) if x), 0)
                if first != 1 or (-a * a - b * c) % p == 0:
                    continue
                edges = []
                for z in pts:
                    w = act(a, b, c, z)
                    if w != z and w in index and index[z] < index[w]:
                        edges.append((index[z], index[w]))
                key = tuple(sorted(edges))
                if len(key) >= 2 and key not in seen:
                    seen.add(key)
                    out.append(key)
    return out


@lru_cache(maxsize=None)
def k4_matchings(n: int) -> tuple:
    return tuple(_greedy_cover(n, pgl2_matchings(n)))


def _greedy_cover(n: int, matchings) -> list:
    def quads(m):
        return {frozenset(e1 + e2) for e1, e2 in combinations(m, 2)}

    need = {frozenset(q) for q in combinations(range(n), 4)}
    cover = [quads(m) for m in matchings]
    chosen = []
    while need:
        gains = [len(c & need) for c in cover]
        best = max(range(len(cover)), key=lambda i: (gains[i], -i))
        if gains[best] == 0:
            raise ScheduleError("matching family does not cover all 4-sets")
        chosen.append(matchings[best])
        need -= cover[best]
    return chosen


def _arrangement(mapping_idx, matching, n):
    """Target order placing each matched pair adjacent, near its current place."""
    pos = {x: i for i, x in enumerate(mapping_idx)}
    matched = {x for e in matching for x in e}
    parts = [tuple(sorted(e, key=pos.get)) for e in matching]
    parts += [(x,) for x in range(n) if x not in matched]
    parts.sort(key=lambda part: (sum(pos[x] for x in part) / len(part), pos[part[0]]))
    return parts


def _k4_into(b: _Builder, lo: int, n: int) -> None:
    labels = b.mapping[lo:lo + n]
    ident = {lab: i for i, lab in enumerate(labels)}
    for matching in k4_matchings(n):
        current = [ident[x] for x in b.mapping[lo:lo + n]]
        parts = _arrangement(current, matching, n)
        b.route([labels[i] for part in parts for i in part], lo)
        b.part_network([len(p) for p in parts], lo, accept=lambda u: len(u) == 4)


def k4_complete_network(n: int, labels=None) -> SwapSchedule:
    """Acquaints all C(n, 4) 4-sets: one partition swap network per matching
    of a greedy cover drawn from the PGL(2, p) involutions."""
    if n < 4:
        raise ValueError("K4 network needs n >= 4")
    labels = list(range(n)) if labels is None else list(labels)
    b = _Builder(labels)
    _k4_into(b, 0, n)
    return _finish(b, labels, f"k4({n})")


def _round_parts(n: int, r: int) -> list[int]:
    """Part sizes of a region of n qubits whose pairs at parity r are grouped."""
    sizes = [1] if r % 2 else []
    i = r % 2
    while i + 1 < n:
        sizes.append(2)
        i += 2
    if i < n:
        sizes.append(1)
    return sizes


def _pair_rounds(n: int) -> list[int]:
    return [r for r in range(n) if any(s == 2 for s in _round_parts(n, r))]


def _bipartite_into(b: _Builder, lo: int, n_top: int, n_bottom: int, balanced: bool) -> None:
    top = set(b.mapping[lo:lo + n_top])

    def accept(union):
        if len(union) != 4 or len(union & top) != 2:
            return False
        return not balanced or sum(spin_of(x) for x in union) % 2 == 0

    top_left = True
    for r_t in _pair_rounds(n_top):
        for r_b in _pair_rounds(n_bottom):
            t_parts = _round_parts(n_top, r_t)
            b_parts = _round_parts(n_bottom, r_b)
            if top_left:
                sizes, tags = t_parts + b_parts, ["L"] * len(t_parts) + ["R"] * len(b_parts)
            else:
                sizes, tags = b_parts + t_parts, ["L"] * len(b_parts) + ["R"] * len(t_parts)
            b.part_network(sizes, lo, tags, accept)
            top_left = not top_left
            b_lo = lo + n_top if top_left else lo
            b.add([fswap(b_lo + i) for i in range(r_b % 2, n_bottom - 1, 2)])
        t_lo = lo if top_left else lo + n_bottom
        b.add([fswap(t_lo + i) for i in range(r_t % 2, n_top - 1, 2)])
    if top_left:
        # final shift so the two parts always end exchanged
        b.add([pswap(lo, lo + n_top - 1, lo + n_top, lo + n_top + n_bottom - 1)])


def double_bipartite_network(n_top: int, n_bottom: int, labels=None) -> SwapSchedule:
    """Acquaints every (pair from top) + (pair from bottom) 4-set and ends with
    the two parts exchanged."""
    if n_top < 2 or n_bottom < 2:
        raise ValueError("double bipartite network needs both parts of size >= 2")
    n = n_top + n_bottom
    labels = list(range(n)) if labels is None else list(labels)
    b = _Builder(labels)
    _bipartite_into(b, 0, n_top, n_bottom, balanced=False)
    return _finish(b, labels, f"double-bipartite({n_top},{n_bottom})")


def block_labels(block: int, n_kappa: int) -> list:
    return [OrbitalLabel(block, j, s) for j in range(n_kappa) for s in (UP, DOWN)]


def balanced_double_bipartite_network(n_a: int, n_b: int | None = None,
                                      labels=None) -> SwapSchedule:
    """Two blocks of n_a and n_b spatial orbitals (two spins each): acquaints
    every 4-set with two orbitals per block and even spin parity, and
    exchanges the blocks."""
    n_b = n_a if n_b is None else n_b
    if n_a < 1 or n_b < 1:
        raise ValueError("blocks need at least one spatial orbital")
    labels = block_labels(0, n_a) + block_labels(1, n_b) if labels is None else list(labels)
    b = _Builder(labels)
    _bipartite_into(b, 0, 2 * n_a, 2 * n_b, balanced=True)
    return _finish(b, labels, f"balanced-double-bipartite({n_a},{n_b})")


# -- requirements and the block-diagonal strategy ------------------------------


def _sizes(n_blocks: int, n_kappa) -> list[int]:
    if isinstance(n_kappa, numbers.Integral):
        return [int(n_kappa)] * n_blocks
    sizes = list(n_kappa)
    if len(sizes) != n_blocks:
        raise ValueError("need one n_kappa per block")
    return sizes


def required_quadruples(n_blocks: int, n_kappa) -> frozenset:
    """4-sets of spin orbitals with two per block (or four in one block) and
    even spin parity."""
    sizes = _sizes(n_blocks, n_kappa)
    if any(s < 1 for s in sizes):
        raise ValueError("n_kappa must be >= 1")
    blocks = [block_labels(k, s) for k, s in enumerate(sizes)]
    out = set()
    for orbs in blocks:
        for q in combinations(orbs, 4):
            if sum(x.spin for x in q) % 2 == 0:
                out.add(frozenset(q))
    for ka, kb in combinations(range(n_blocks), 2):
        for pa in combinations(blocks[ka], 2):
            sa = pa[0].spin + pa[1].spin
            for pb in combinations(blocks[kb], 2):
                if (sa + pb[0].spin + pb[1].spin) % 2 == 0:
                    out.add(frozenset(pa + pb))
    return frozenset(out)


def block_diagonal_strategy(n_blocks: int, n_kappa) -> SwapSchedule:
    """Four stages: K4 on same-spin half-blocks, double bipartite across the
    spins of each block, re-interleave spins, then N_b alternating layers of
    balanced double bipartite networks over adjacent block pairs. A single
    block needs only the first two."""
    if n_blocks < 1:
        raise ValueError("need at least one block")
    sizes = _sizes(n_blocks, n_kappa)
    if any(s < 1 for s in sizes):
        raise ValueError("n_kappa must be >= 1")
    labels = [x for k, s in enumerate(sizes) for x in block_labels(k, s)]
    b = _Builder(labels)
    offsets = [0]
    for s in sizes:
        offsets.append(offsets[-1] + 2 * s)
    stages = {}

    def run_stage(name, fn):
        start = len(b.layers)
        fn()
        stages[name] = sum(layer_cost(l) for l in b.layers[start:])

    def per_block(build):
        subs = []
        for k, s in enumerate(sizes):
            sub = _Builder(b.mapping[offsets[k]:offsets[k + 1]])
            build(sub, k, s)
            subs.append((offsets[k], sub))
        b.add_parallel(subs)

    def stage1():
        def split(sub, k, s):
            sub.route([OrbitalLabel(k, j, sp) for sp in (UP, DOWN) for j in range(s)])
        per_block(split)

        def k4(sub, k, s):
            if s >= 4:
                halves = []
                for h in (0, 1):
                    hb = _Builder(sub.mapping[h * s:(h + 1) * s])
                    _k4_into(hb, 0, s)
                    halves.append((h * s, hb))
                sub.add_parallel(halves)
        per_block(k4)

    def stage2():
        per_block(lambda sub, k, s: _bipartite_into(sub, 0, s, s, False) if s >= 2 else None)

    def stage3():
        per_block(lambda sub, k, s: sub.route(block_labels(k, s)))

    def stage4():
        slots = list(range(n_blocks))  # block currently in each slot
        for layer in range(n_blocks):
            subs = []
            starts = [0]
            for k in slots:
                starts.append(starts[-1] + 2 * sizes[k])
            for s in range(layer % 2, n_blocks - 1, 2):
                ka, kb = slots[s], slots[s + 1]
                sub = _Builder(b.mapping[starts[s]:starts[s + 2]])
                _bipartite_into(sub, 0, 2 * sizes[ka], 2 * sizes[kb], balanced=True)
                subs.append((starts[s], sub))
                slots[s], slots[s + 1] = kb, ka
            b.add_parallel(subs)

    run_stage("intra-same-spin", stage1)
    run_stage("intra-mixed-spin", stage2)
    if n_blocks > 1:
        run_stage("interleave", stage3)
        run_stage("inter-block", stage4)
    name = f"block-diagonal({n_blocks}x{','.join(map(str, sizes))})"
    return _finish(b, labels, name, stages)


# -- verification ----------------------------------------------------------------


@dataclass
class VerifyReport:
    covered: int
    total: int
    missing: list
    duplicates: int
    depth: int
    n_layers: int
    final_mapping: tuple
    multiplicity: dict = field(repr=False, default_factory=dict)

    @property
    def complete(self) -> bool:
        return not self.missing


def all_pairs(labels) -> frozenset:
    return frozenset(frozenset(p) for p in combinations(labels, 2))


def verify_schedule(schedule: SwapSchedule, requirements) -> VerifyReport:
    """Simulate the mapping and count how often each requirement is met."""
    reqs = set(requirements)
    if len(set(schedule.initial_mapping)) != len(schedule.initial_mapping):
        raise ScheduleError("initial mapping repeats a label")
    sizes = {len(r) for r in reqs}
    mult = dict.fromkeys(reqs, 0)
    for _, _, sets in schedule.simulate():
        for s in sets:
            for k in sizes:
                if k > len(s):
                    continue
                for sub in combinations(sorted(s, key=str), k):
                    f = frozenset(sub)
                    if f in mult:
                        mult[f] += 1
    final = tuple(schedule._final)
    missing = sorted((sorted(map(str, r)) for r, c in mult.items() if c == 0))
    covered = sum(1 for c in mult.values() if c > 0)
    dups = sum(1 for c in mult.values() if c > 1)
    return VerifyReport(covered, len(reqs), missing, dups, schedule.depth, schedule.n_layers,
                        final, mult)


def count_acquainted(schedule: SwapSchedule, k: int = 4) -> int:
    """Distinct k-sets contained in some acquaintance."""
    seen = set()
    for s in schedule.acquainted_sets():
        if len(s) >= k:
            seen.update(frozenset(c) for c in combinations(sorted(s, key=str), k))
    return len(seen)
