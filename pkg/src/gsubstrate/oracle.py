"""Exact solvers for the graph-algorithm reasoning tasks.

Four query kinds: connectivity, cycle detection, shortest path, and maximum
bipartite matching. The main solvers run on the undirected simple view
(cycle detection can also use the predicate-collapsed directed view).
``brute_force_reference`` answers the same queries by independent
closure/enumeration methods and is meant for graphs of at most 12 nodes.

Witnesses are canonical: among optimal answers the solver returns the
lexicographically smallest node sequence (shortest path) or sorted edge list
(matching), so repeated runs give identical outputs.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from enum import Enum
from fractions import Fraction
from functools import lru_cache

from .errors import (
    InconsistentPartLabelsError,
    MissingWeightError,
    NegativeWeightError,
    NotBipartiteError,
    PreconditionError,
    TooLargeError,
    UnknownNodeError,
)
from .graph import (
    GraphState,
    directed_simple_edges,
    parse_weight,
    require_valid,
    undirected_simple_view,
)

BRUTE_FORCE_MAX_NODES = 12
# above this many edges the matching witness is Hopcroft-Karp's, not the lexicographic minimum
LEXMIN_MATCHING_MAX_EDGES = 5000


class GarKind(str, Enum):
    CONNECTIVITY = "connectivity"
    CYCLE = "cycle"
    SHORTEST_PATH = "shortest-path"
    MATCHING = "matching"

    def __str__(self) -> str:
        return self.value


DIRECTIONS = ("undirected", "directed")


@dataclass(frozen=True)
class GarQuery:
    kind: GarKind
    source: str | None = None
    target: str | None = None
    weighted: bool | None = None
    direction: str = "undirected"

    def __post_init__(self):
        object.__setattr__(self, "kind", GarKind(self.kind))
        if self.kind in (GarKind.CONNECTIVITY, GarKind.SHORTEST_PATH):
            if self.source is None or self.target is None:
                raise PreconditionError(f"{self.kind} query needs source and target")
            if self.source == self.target:
                raise PreconditionError("source and target must differ")
        if self.direction not in DIRECTIONS:
            raise PreconditionError(f"direction must be one of {DIRECTIONS}")

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind.value}
        if self.source is not None:
            out["source"] = self.source
            out["target"] = self.target
        if self.kind is GarKind.SHORTEST_PATH:
            out["weighted"] = self.weighted
        if self.kind is GarKind.CYCLE:
            out["direction"] = self.direction
        return out


@dataclass(frozen=True)
class GarAnswer:
    kind: GarKind
    answer: bool | None = None
    length: Fraction | None = None
    path: tuple[str, ...] | None = None
    weighted: bool | None = None
    size: int | None = None
    matching: tuple[tuple[str, str], ...] | None = None

    @property
    def reachable(self) -> bool:
        return self.length is not None

    def payload(self):
        """The part of the answer that must agree across solvers (witnesses excluded)."""
        if self.kind is GarKind.SHORTEST_PATH:
            return self.length
        if self.kind is GarKind.MATCHING:
            return self.size
        return self.answer

    def to_json(self) -> dict:
        if self.kind is GarKind.SHORTEST_PATH:
            return {
                "kind": self.kind.value,
                "weighted": self.weighted,
                "reachable": self.reachable,
                "length": None if self.length is None else json_number(self.length),
                "path": None if self.path is None else list(self.path),
            }
        if self.kind is GarKind.MATCHING:
            return {"kind": self.kind.value, "size": self.size,
                    "matching": [list(p) for p in self.matching]}
        return {"kind": self.kind.value, "answer": self.answer}

    @classmethod
    def from_json(cls, data: dict) -> GarAnswer:
        kind = GarKind(data["kind"])
        if kind is GarKind.SHORTEST_PATH:
            length = data.get("length")
            return cls(kind, length=None if length is None else Fraction(str(length)),
                       path=None if data.get("path") is None else tuple(data["path"]),
                       weighted=data.get("weighted"))
        if kind is GarKind.MATCHING:
            return cls(kind, size=int(data["size"]),
                       matching=tuple(tuple(p) for p in data.get("matching", [])))
        return cls(kind, answer=bool(data["answer"]))

    def answer_text(self) -> str:
        """Short textual answer as a model would be expected to produce it."""
        if self.kind is GarKind.SHORTEST_PATH:
            return "unreachable" if self.length is None else format_decimal(self.length)
        if self.kind is GarKind.MATCHING:
            return str(self.size)
        return "yes" if self.answer else "no"


def format_decimal(value, places: int = 6) -> str:
    """Render with at most ``places`` fractional digits and no trailing zeros."""
    if isinstance(value, Fraction):
        d = Decimal(value.numerator) / Decimal(value.denominator)
    else:
        d = Decimal(str(value))
    d = d.quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_EVEN)
    text = format(d, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def json_number(value) -> int | float:
    text = format_decimal(value)
    return int(text) if "." not in text else float(text)


# shared helpers -----------------------------------------------------------


def _check_node(g: GraphState, node: str):
    if not g.has_entity(node):
        raise UnknownNodeError(f"unknown node {node}")


def all_weighted(g: GraphState) -> bool:
    rels = [r for r in g.relations if r.subject != r.object]
    return bool(rels) and all(r.attr("weight") is not None for r in rels)


def resolve_weighted(g: GraphState, weighted: bool | None) -> bool:
    """Explicit flag wins; otherwise weighted iff every non-loop relation carries a weight."""
    return all_weighted(g) if weighted is None else bool(weighted)


def pair_weights(g: GraphState) -> dict[frozenset, Fraction]:
    """Minimum weight per undirected node pair; raises on missing or negative weights."""
    out: dict[frozenset, Fraction] = {}
    for i, r in enumerate(g.relations):
        if r.subject == r.object:
            continue
        raw = r.attr("weight")
        if raw is None:
            raise MissingWeightError(f"relation {i} ({r.subject}, {r.predicate}, {r.object}) has no weight")
        try:
            value = Fraction(raw.strip())
        except (ValueError, ZeroDivisionError):
            value = None
        if value is not None and value < 0:
            raise NegativeWeightError(f"relation {i} has negative weight {raw}")
        try:
            w = Fraction(0) if value == 0 else parse_weight(raw)
        except ValueError:
            require_valid(g)
            raise
        key = frozenset((r.subject, r.object))
        if key not in out or w < out[key]:
            out[key] = w
    return out


def scaled_pair_weights(g: GraphState) -> tuple[dict[frozenset, int], int]:
    """Pair weights as integers over a common denominator (exact, cheaper than Fraction sums)."""
    weights = pair_weights(g)
    denom = 1
    for w in weights.values():
        denom = denom * w.denominator // math.gcd(denom, w.denominator)
    return {k: int(w * denom) for k, w in weights.items()}, denom


# connectivity ---------------------------------------------------------------


def _component(adjacency, start: str) -> set[str]:
    seen = {start}
    queue = deque([start])
    while queue:
        x = queue.popleft()
        for y in adjacency[x]:
            if y not in seen:
                seen.add(y)
                queue.append(y)
    return seen


def is_connected(g: GraphState, u: str, v: str) -> bool:
    view = undirected_simple_view(g)
    _check_node(g, u)
    _check_node(g, v)
    if u == v:
        raise PreconditionError("source and target must differ")
    return v in _component(view.adjacency, u)


def components(g: GraphState) -> list[list[str]]:
    """Connected components of the undirected view, each sorted, ordered by smallest id."""
    view = undirected_simple_view(g)
    seen: set[str] = set()
    out = []
    for node in sorted(view.nodes):
        if node not in seen:
            comp = _component(view.adjacency, node)
            seen |= comp
            out.append(sorted(comp))
    return out


# cycles -------------------------------------------------------------------


def has_cycle(g: GraphState, direction: str = "undirected") -> bool:
    if direction == "undirected":
        view = undirected_simple_view(g)
        return len(view.edges) > len(view.nodes) - len(components(g))
    if direction != "directed":
        raise PreconditionError(f"direction must be one of {DIRECTIONS}")
    require_valid(g)
    succ: dict[str, list[str]] = {e.id: [] for e in g.entities}
    for a, b in directed_simple_edges(g):
        succ[a].append(b)
    color = dict.fromkeys(succ, 0)  # 0 new, 1 on stack, 2 done
    for root in sorted(succ):
        if color[root]:
            continue
        color[root] = 1
        stack = [(root, iter(sorted(succ[root])))]
        while stack:
            node, it = stack[-1]
            for nxt in it:
                if color[nxt] == 1:
                    return True
                if color[nxt] == 0:
                    color[nxt] = 1
                    stack.append((nxt, iter(sorted(succ[nxt]))))
                    break
            else:
                color[node] = 2
                stack.pop()
    return False


# shortest path --------------------------------------------------------------


def shortest_path(g: GraphState, u: str, v: str, weighted: bool | None = None) -> GarAnswer:
    """Minimum-cost path on the undirected view.

    Unweighted mode counts hops. Weighted mode sums exact decimal weights,
    using the cheapest relation between each node pair. The witness is the
    lexicographically smallest node sequence among minimum-cost paths with the
    fewest hops.
    """
    weighted = resolve_weighted(g, weighted)
    weights, denom = scaled_pair_weights(g) if weighted else (None, 1)
    view = undirected_simple_view(g)
    _check_node(g, u)
    _check_node(g, v)
    if u == v:
        raise PreconditionError("source and target must differ")

    def w(a: str, b: str) -> int:
        return weights[frozenset((a, b))] if weights is not None else 1

    # Dijkstra from the target on (cost, hops)
    best: dict[str, tuple[int, int]] = {v: (0, 0)}
    heap = [(0, 0, v)]
    done: set[str] = set()
    while heap:
        cost, hops, x = heapq.heappop(heap)
        if x in done:
            continue
        done.add(x)
        for y in view.adjacency[x]:
            cand = (cost + w(x, y), hops + 1)
            if y not in best or cand < best[y]:
                best[y] = cand
                heapq.heappush(heap, (cand[0], cand[1], y))
    if u not in best:
        return GarAnswer(GarKind.SHORTEST_PATH, weighted=weighted)
    path = [u]
    x = u
    while x != v:
        cost, hops = best[x]
        x = next(
            y for y in view.adjacency[x]
            if y in best and (best[y][0] + w(x, y), best[y][1] + 1) == (cost, hops)
        )
        path.append(x)
    return GarAnswer(GarKind.SHORTEST_PATH, length=Fraction(best[u][0], denom), path=tuple(path),
                     weighted=weighted)


# bipartite matching ---------------------------------------------------------


def bipartition(g: GraphState) -> dict[str, int]:
    """2-color the undirected view (0/1 per node).

    Raises ``NotBipartiteError`` with an odd cycle, or
    ``InconsistentPartLabelsError`` when ``part`` attributes disagree with every
    valid coloring.
    """
    view = undirected_simple_view(g)
    color: dict[str, int] = {}
    parent: dict[str, str | None] = {}
    comp_of: dict[str, str] = {}
    for root in sorted(view.nodes):
        if root in color:
            continue
        color[root] = 0
        parent[root] = None
        comp_of[root] = root
        queue = deque([root])
        while queue:
            x = queue.popleft()
            for y in view.adjacency[x]:
                if y not in color:
                    color[y] = 1 - color[x]
                    parent[y] = x
                    comp_of[y] = root
                    queue.append(y)
                elif color[y] == color[x]:
                    raise NotBipartiteError(_odd_cycle(parent, x, y))

    flips: dict[str, int] = {}
    for e in g.entities:
        part = e.attr("part")
        if part is None:
            continue
        if part not in ("L", "R"):
            raise InconsistentPartLabelsError(f"entity {e.id} has part {part!r}; expected L or R")
        flip = color[e.id] ^ (0 if part == "L" else 1)
        root = comp_of[e.id]
        if flips.setdefault(root, flip) != flip:
            raise InconsistentPartLabelsError(
                f"part labels in the component of {root} do not match any 2-coloring"
            )
    return color


def _odd_cycle(parent, x: str, y: str) -> list[str]:
    anc_x = [x]
    while parent[anc_x[-1]] is not None:
        anc_x.append(parent[anc_x[-1]])
    on_x = {n: i for i, n in enumerate(anc_x)}
    path_y = [y]
    while path_y[-1] not in on_x:
        path_y.append(parent[path_y[-1]])
    lca = path_y[-1]
    return anc_x[:on_x[lca] + 1] + path_y[-2::-1]


def _hopcroft_karp(left: list[str], adj: dict[str, tuple[str, ...]]) -> dict[str, str]:
    """Maximum matching; returns a symmetric mate map."""
    mate: dict[str, str] = {}
    inf = float("inf")
    while True:
        dist: dict[str, float] = {}
        queue = deque()
        for a in left:
            if a not in mate:
                dist[a] = 0
                queue.append(a)
        found = False
        while queue:
            a = queue.popleft()
            for b in adj[a]:
                m = mate.get(b)
                if m is None:
                    found = True
                elif m not in dist:
                    dist[m] = dist[a] + 1
                    queue.append(m)
        if not found:
            return mate

        def dfs(a: str) -> bool:
            for b in adj[a]:
                m = mate.get(b)
                if m is None or (dist.get(m, inf) == dist[a] + 1 and dfs(m)):
                    mate[a] = b
                    mate[b] = a
                    return True
            dist[a] = inf
            return False

        for a in left:
            if a not in mate:
                dfs(a)


def _augment_once(left: list[str], adj, mate: dict[str, str], removed: set[str]) -> bool:
    """Find one augmenting path avoiding ``removed``; updates ``mate`` in place."""
    back: dict[str, str] = {}
    seen_left = set()
    queue = deque()
    for a in left:
        if a not in removed and a not in mate:
            queue.append(a)
            seen_left.add(a)
    while queue:
        a = queue.popleft()
        for b in adj[a]:
            if b in removed or b in back:
                continue
            back[b] = a
            m = mate.get(b)
            if m is None:
                # flip the alternating path ending at b
                while True:
                    a = back[b]
                    prev = mate.get(a)
                    mate[a] = b
                    mate[b] = a
                    if prev is None:
                        return True
                    b = prev
            if m not in seen_left:
                seen_left.add(m)
                queue.append(m)
    return False


def _lexmin_matching(left, adj, mate: dict[str, str], size: int) -> list[tuple[str, str]]:
    edges = sorted({tuple(sorted((a, b))) for a in left for b in adj[a]})
    mate = dict(mate)
    removed: set[str] = set()
    chosen = []
    need = size
    for a, b in edges:
        if need == 0:
            break
        if a in removed or b in removed:
            continue
        ma, mb = mate.get(a), mate.get(b)
        trial = dict(mate)
        for x, m in ((a, ma), (b, mb)):
            if m is not None:
                trial.pop(x, None)
                trial.pop(m, None)
        if ma == b:
            ok = True
        elif ma is None or mb is None:
            ok = True
        else:
            ok = _augment_once(left, adj, trial, removed | {a, b})
        if ok:
            chosen.append((a, b))
            removed |= {a, b}
            mate = trial
            need -= 1
    return chosen


def max_bipartite_matching(g: GraphState) -> GarAnswer:
    color = bipartition(g)
    view = undirected_simple_view(g)
    left = sorted(n for n, c in color.items() if c == 0)
    mate = _hopcroft_karp(left, view.adjacency)
    size = sum(1 for a in left if a in mate)
    if len(view.edges) <= LEXMIN_MATCHING_MAX_EDGES:
        pairs = _lexmin_matching(left, view.adjacency, mate, size)
    else:
        pairs = sorted({tuple(sorted((a, mate[a]))) for a in left if a in mate})
    return GarAnswer(GarKind.MATCHING, size=size, matching=tuple(pairs))


# dispatch -------------------------------------------------------------------


def solve(g: GraphState, query: GarQuery) -> GarAnswer:
    if query.kind is GarKind.CONNECTIVITY:
        return GarAnswer(query.kind, answer=is_connected(g, query.source, query.target))
    if query.kind is GarKind.CYCLE:
        return GarAnswer(query.kind, answer=has_cycle(g, query.direction))
    if query.kind is GarKind.SHORTEST_PATH:
        return shortest_path(g, query.source, query.target, query.weighted)
    return max_bipartite_matching(g)


def verify_witness(g: GraphState, query: GarQuery, answer: GarAnswer) -> list[str]:
    """Independent checks of an answer's witness; returns a list of problems."""
    problems = []
    view = undirected_simple_view(g)
    if query.kind is GarKind.SHORTEST_PATH:
        if answer.length is None:
            if answer.path is not None:
                problems.append("unreachable answer carries a path")
            return problems
        path = answer.path or ()
        if not path or path[0] != query.source or path[-1] != query.target:
            problems.append("path endpoints do not match the query")
            return problems
        weighted = answer.weighted if answer.weighted is not None else resolve_weighted(g, query.weighted)
        weights = pair_weights(g) if weighted else None
        total = Fraction(0)
        for a, b in zip(path, path[1:]):
            key = frozenset((a, b))
            if key not in view.edges:
                problems.append(f"path step {a}-{b} is not an edge")
                return problems
            total += weights[key] if weights is not None else 1
        if total != answer.length:
            problems.append(f"path cost {total} differs from length {answer.length}")
    elif query.kind is GarKind.MATCHING:
        used: set[str] = set()
        for a, b in answer.matching or ():
            if frozenset((a, b)) not in view.edges:
                problems.append(f"matched pair {a}-{b} is not an edge")
            if a in used or b in used:
                problems.append(f"matched pair {a}-{b} reuses a vertex")
            used |= {a, b}
        if len(answer.matching or ()) != answer.size:
            problems.append("witness size differs from reported size")
    return problems


# brute-force reference --------------------------------------------------------


def brute_force_reference(g: GraphState, query: GarQuery) -> GarAnswer:
    """Answer ``query`` by exhaustive methods independent of the main solvers.

    Reachability comes from a bitmask transitive closure, undirected cycles
    from edge-removal reachability, shortest paths from Floyd-Warshall over
    exact (cost, hops) pairs, and matchings from enumeration over vertex
    subsets.
    """
    require_valid(g)
    if len(g.entities) > BRUTE_FORCE_MAX_NODES:
        raise TooLargeError(f"{len(g.entities)} entities; reference handles at most {BRUTE_FORCE_MAX_NODES}")
    ids = sorted(e.id for e in g.entities)
    index = {n: i for i, n in enumerate(ids)}
    n = len(ids)
    for node in (query.source, query.target):
        if node is not None and node not in index:
            raise UnknownNodeError(f"unknown node {node}")
    und = [0] * n
    pairs = set()
    for r in g.relations:
        a, b = index[r.subject], index[r.object]
        if a != b:
            und[a] |= 1 << b
            und[b] |= 1 << a
            pairs.add((min(a, b), max(a, b)))

    if query.kind is GarKind.CONNECTIVITY:
        reach = _closure(und)
        return GarAnswer(query.kind, answer=bool(reach[index[query.source]] >> index[query.target] & 1))

    if query.kind is GarKind.CYCLE:
        if query.direction == "directed":
            succ = [0] * n
            for r in g.relations:
                succ[index[r.subject]] |= 1 << index[r.object]
            reach = _closure(succ)
            return GarAnswer(query.kind, answer=any(reach[i] >> i & 1 for i in range(n)))
        for a, b in sorted(pairs):
            trimmed = list(und)
            trimmed[a] &= ~(1 << b)
            trimmed[b] &= ~(1 << a)
            if _reaches(trimmed, a, b):
                return GarAnswer(query.kind, answer=True)
        return GarAnswer(query.kind, answer=False)

    if query.kind is GarKind.SHORTEST_PATH:
        weighted = resolve_weighted(g, query.weighted)
        weights, denom = {}, 1
        if weighted:
            scaled, denom = scaled_pair_weights(g)
            weights = {tuple(sorted(index[x] for x in k)): w for k, w in scaled.items()}
        inf = None
        dist = [[inf] * n for _ in range(n)]
        nxt = [[None] * n for _ in range(n)]
        for i in range(n):
            dist[i][i] = (0, 0)
            nxt[i][i] = i
        for a, b in pairs:
            w = weights[(a, b)] if weighted else 1
            dist[a][b] = dist[b][a] = (w, 1)
            nxt[a][b], nxt[b][a] = b, a
        for k in range(n):
            dk = dist[k]
            for i in range(n):
                dik = dist[i][k]
                if dik is None:
                    continue
                di = dist[i]
                for j in range(n):
                    if dk[j] is None:
                        continue
                    cand = (dik[0] + dk[j][0], dik[1] + dk[j][1])
                    if di[j] is None or cand < di[j]:
                        di[j] = cand
                        nxt[i][j] = nxt[i][k]
        s, t = index[query.source], index[query.target]
        if dist[s][t] is None:
            return GarAnswer(query.kind, weighted=weighted)
        path = [s]
        while path[-1] != t:
            path.append(nxt[path[-1]][t])
        return GarAnswer(query.kind, length=Fraction(dist[s][t][0], denom), path=tuple(ids[i] for i in path),
                         weighted=weighted)

    # matching: bipartite test by parity closure on the doubled graph
    doubled = [0] * (2 * n)
    for a, b in pairs:
        for x, y in ((a, b), (b, a)):
            doubled[x] |= 1 << (n + y)
            doubled[n + x] |= 1 << y
    reach = _closure(doubled)
    for i in range(n):
        if reach[i] >> (n + i) & 1:
            raise NotBipartiteError([ids[i]])
    labelled = [(index[e.id], e.attr("part")) for e in g.entities if e.attr("part") is not None]
    for i, pi in labelled:
        if pi not in ("L", "R"):
            raise InconsistentPartLabelsError(f"entity {ids[i]} has part {pi!r}")
        for j, pj in labelled:
            even = i == j or bool(reach[i] >> j & 1)
            odd = bool(reach[i] >> (n + j) & 1)
            if (even and pi != pj) or (odd and pi == pj):
                raise InconsistentPartLabelsError(f"part labels of {ids[i]} and {ids[j]} conflict")

    @lru_cache(maxsize=None)
    def best(free: int) -> tuple[int, tuple]:
        if free == 0:
            return 0, ()
        x = (free & -free).bit_length() - 1
        rest = free & ~(1 << x)
        top = best(rest)
        cand = und[x] & rest
        while cand:
            y = (cand & -cand).bit_length() - 1
            cand &= cand - 1
            size, edges = best(rest & ~(1 << y))
            if size + 1 > top[0]:
                top = (size + 1, ((x, y),) + edges)
        return top

    size, edges = best((1 << n) - 1)
    return GarAnswer(query.kind, size=size, matching=tuple((ids[a], ids[b]) for a, b in edges))


def _closure(adj: list[int]) -> list[int]:
    """Warshall closure on bitmask rows: bit j of row i set iff a walk of length >= 1 reaches j."""
    reach = list(adj)
    for k in range(len(reach)):
        bit = 1 << k
        rk = reach[k]
        for i in range(len(reach)):
            if reach[i] & bit:
                reach[i] |= rk
    return reach


def _reaches(adj: list[int], a: int, b: int) -> bool:
    seen = 1 << a
    frontier = seen
    while frontier:
        nxt = 0
        m = frontier
        while m:
            x = (m & -m).bit_length() - 1
            m &= m - 1
            nxt |= adj[x]
        frontier = nxt & ~seen
        seen |= frontier
    return bool(seen >> b & 1)
