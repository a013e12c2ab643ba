"""Fat-tree construction, equal-cost path enumeration, and ECMP routing.

Nodes are integers.  Links are directed; each carries (capacity in
packets/sec, propagation delay in seconds, buffer in packets).  Routing
is hop-by-hop: at every switch the eligible next hops are the neighbors
that lie on some shortest path to the destination host, and one of them
is picked by hashing the flow five-tuple with a per-switch salt.  The
same tuple therefore always takes the same path, and tuples spread
uniformly across the equal-cost choices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

HOST, EDGE, AGG, CORE = "host", "edge", "agg", "core"


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class FiveTuple:
    src_host: int
    dst_host: int
    src_port: int
    dst_port: int
    protocol: int = 6

    def reversed(self) -> "FiveTuple":
        return FiveTuple(self.dst_host, self.src_host, self.dst_port,
                         self.src_port, self.protocol)


@dataclass(frozen=True)
class LinkParams:
    capacity_pps: float = 8333.0   # 100 Mbps of 1500-byte packets
    delay_s: float = 10e-6
    buffer_pkts: int = 100


@dataclass(frozen=True)
class Link:
    id: int
    src: int
    dst: int
    capacity_pps: float
    delay_s: float
    buffer_pkts: int


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


def tuple_hash(tup: FiveTuple, salt: int) -> int:
    """Well-mixed 64-bit hash of a five-tuple plus a salt."""
    h = salt & 0xFFFFFFFFFFFFFFFF
    for v in (tup.src_host, tup.dst_host, tup.src_port, tup.dst_port, tup.protocol):
        h = _splitmix64(h ^ (v & 0xFFFFFFFFFFFFFFFF))
    return h


@dataclass
class Topology:
    """A directed-link network with deterministic ECMP routing."""

    name: str
    kinds: list[str]                       # node id -> layer kind
    links: list[Link]
    hosts: list[int] = field(init=False)
    _out: list[list[Link]] = field(init=False)
    _salts: list[int] = field(init=False)
    seed: int = 0

    def __post_init__(self):
        n = len(self.kinds)
        self.hosts = [i for i in range(n) if self.kinds[i] == HOST]
        self._out = [[] for _ in range(n)]
        for link in self.links:
            self._out[link.src].append(link)
        for out in self._out:
            out.sort(key=lambda l: l.dst)
        self._salts = [_splitmix64(self.seed ^ (0xA5A5 + node)) for node in range(n)]
        self._dist_cache: dict[int, list[int]] = {}

    # -- shortest-path machinery -------------------------------------------

    def _dist_to(self, dst: int) -> list[int]:
        """Hop distance from every node to dst (BFS on reversed links)."""
        cached = self._dist_cache.get(dst)
        if cached is not None:
            return cached
        n = len(self.kinds)
        rev: list[list[int]] = [[] for _ in range(n)]
        for link in self.links:
            rev[link.dst].append(link.src)
        inf = n + 1
        dist = [inf] * n
        dist[dst] = 0
        frontier = [dst]
        while frontier:
            nxt = []
            for u in frontier:
                for v in rev[u]:
                    if dist[v] > dist[u] + 1:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        self._dist_cache[dst] = dist
        return dist

    def next_hops(self, node: int, dst: int) -> list[Link]:
        """Links out of `node` that lie on a shortest path to dst."""
        dist = self._dist_to(dst)
        d = dist[node]
        return [l for l in self._out[node] if dist[l.dst] == d - 1]

    def equal_cost_paths(self, src: int, dst: int) -> list[list[Link]]:
        """Every shortest path from host src to host dst."""
        self._check_host_pair(src, dst)
        paths: list[list[Link]] = []

        def walk(node: int, acc: list[Link]):
            if node == dst:
                paths.append(list(acc))
                return
            for link in self.next_hops(node, dst):
                acc.append(link)
                walk(link.dst, acc)
                acc.pop()

        walk(src, [])
        return paths

    def ecmp_route(self, tup: FiveTuple) -> list[Link]:
        """Deterministic path for a tuple: per-hop hash mod eligible ports."""
        self._check_host_pair(tup.src_host, tup.dst_host)
        node, dst = tup.src_host, tup.dst_host
        path: list[Link] = []
        while node != dst:
            options = self.next_hops(node, dst)
            if not options:
                raise TopologyError(f"no route from {node} to {dst}")
            if len(options) == 1:
                link = options[0]
            else:
                link = options[tuple_hash(tup, self._salts[node]) % len(options)]
            path.append(link)
            node = link.dst
        return path

    def _check_host_pair(self, src: int, dst: int) -> None:
        n = len(self.kinds)
        if not (0 <= src < n and 0 <= dst < n) or \
                self.kinds[src] != HOST or self.kinds[dst] != HOST:
            raise TopologyError(f"unknown host pair ({src}, {dst})")
        if src == dst:
            raise TopologyError("src and dst must differ")


def build_fat_tree(pods: int, link_params: LinkParams = LinkParams(),
                   seed: int = 0) -> Topology:
    """Standard p-pod fat-tree: p^3/4 hosts, p/2 edge and p/2 aggregation
    switches per pod, p^2/4 core switches, all links identical."""
    if pods < 2 or pods % 2:
        raise TopologyError(f"pod count must be even and >= 2, got {pods}")
    half = pods // 2
    n_hosts = pods * half * half
    kinds: list[str] = [HOST] * n_hosts

    def add_node(kind: str) -> int:
        kinds.append(kind)
        return len(kinds) - 1

    edge = [[add_node(EDGE) for _ in range(half)] for _ in range(pods)]
    agg = [[add_node(AGG) for _ in range(half)] for _ in range(pods)]
    # core switch (a, j): the j-th core attached to aggregation index a
    core = [[add_node(CORE) for _ in range(half)] for _ in range(half)]

    links: list[Link] = []

    def connect(a: int, b: int):
        for s, d in ((a, b), (b, a)):
            links.append(Link(len(links), s, d, link_params.capacity_pps,
                              link_params.delay_s, link_params.buffer_pkts))

    host = 0
    for p in range(pods):
        for e in range(half):
            for _ in range(half):
                connect(host, edge[p][e])
                host += 1
            for a in range(half):
                connect(edge[p][e], agg[p][a])
        for a in range(half):
            for j in range(half):
                connect(agg[p][a], core[a][j])

    topo = Topology(name=f"fat-tree-{pods}pod", kinds=kinds, links=links, seed=seed)
    return topo


def build_toy_pod(link_params: LinkParams = LinkParams(capacity_pps=4166.0,
                                                      delay_s=100e-6,
                                                      buffer_pkts=25),
                  host_params: LinkParams | None = None,
                  seed: int = 0) -> Topology:
    """One pod of a 4-pod fat-tree: hosts 0,1 under one edge switch, hosts
    2,3 under the other, two upper switches giving 2 equal-cost paths.

    Host links may be faster than fabric links (as with NIC vs fabric
    rates) so that a lone window-limited flow queues at the shared fabric
    link rather than at its private uplink."""
    if host_params is None:
        host_params = link_params
    kinds = [HOST, HOST, HOST, HOST, EDGE, EDGE, AGG, AGG]
    s1, s2, s3, s4 = 4, 5, 6, 7
    links: list[Link] = []

    def connect(a: int, b: int, p: LinkParams):
        for s, d in ((a, b), (b, a)):
            links.append(Link(len(links), s, d, p.capacity_pps,
                              p.delay_s, p.buffer_pkts))

    connect(0, s1, host_params)
    connect(1, s1, host_params)
    connect(2, s2, host_params)
    connect(3, s2, host_params)
    connect(s1, s3, link_params)
    connect(s1, s4, link_params)
    connect(s2, s3, link_params)
    connect(s2, s4, link_params)
    return Topology(name="toy-pod", kinds=kinds, links=links, seed=seed)


def host_counts(pods: int) -> dict[str, int]:
    """Closed-form node counts of a p-pod fat-tree."""
    half = pods // 2
    return {
        "hosts": pods * half * half,
        "edge": pods * half,
        "agg": pods * half,
        "core": half * half,
        "switches": pods * pods + half * half,
    }
