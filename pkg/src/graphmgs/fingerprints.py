"""Molecular bit-vector fingerprints: path-based topological and circular (Morgan).

All hashing is fixed 64-bit FNV-1a over canonical integer sequences, with
splitmix64 expanding a feature hash into bit indices, so fingerprints are
deterministic across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .graphs import LabeledGraph

TOPOLOGICAL = "topological"
MORGAN = "morgan"

MAX_PATHS_PER_GRAPH = 10 ** 6

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF


def fnv1a64(ints) -> int:
    """FNV-1a over the 8-byte little-endian encoding of each integer."""
    h = _FNV_OFFSET
    for value in ints:
        v = value & _MASK64
        for _ in range(8):
            h ^= v & 0xFF
            h = (h * _FNV_PRIME) & _MASK64
            v >>= 8
    return h


def splitmix64(state: int):
    """One splitmix64 draw; returns (value, next_state)."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31), state


@dataclass(frozen=True)
class BitFingerprint:
    bits: np.ndarray  # bool vector, length a power of two
    scheme: str
    params: tuple[tuple[str, int], ...]

    def __post_init__(self):
        n = len(self.bits)
        if n == 0 or (n & (n - 1)) != 0:
            raise DataError(f"fingerprint length {n} is not a power of two")

    @property
    def nbits(self) -> int:
        return len(self.bits)

    def popcount(self) -> int:
        return int(np.count_nonzero(self.bits))

    def to_hex(self) -> str:
        return bytes(np.packbits(self.bits.astype(np.uint8))).hex()

    @classmethod
    def from_hex(cls, hex_bits: str, nbits: int, scheme: str, params) -> "BitFingerprint":
        raw = np.frombuffer(bytes.fromhex(hex_bits), dtype=np.uint8)
        bits = np.unpackbits(raw)[:nbits].astype(bool)
        return cls(bits=bits, scheme=scheme, params=tuple(params))


def _edge_code(attrs: tuple[int, ...]) -> int:
    return fnv1a64((len(attrs), *attrs))


def atom_invariants(g: LabeledGraph) -> list[int]:
    """Per-node 64-bit hash of (node attrs, degree, multiset of incident edge codes)."""
    deg = g.degrees()
    incident: list[list[int]] = [[] for _ in range(g.node_count)]
    for (u, v), eattr in zip(g.edges, g.edge_attrs):
        code = _edge_code(eattr)
        incident[u].append(code)
        incident[v].append(code)
    out = []
    for v in range(g.node_count):
        attrs = g.node_attrs[v]
        out.append(fnv1a64((len(attrs), *attrs, int(deg[v]), *sorted(incident[v]))))
    return out


def _bond_codes(g: LabeledGraph) -> dict[tuple[int, int], int]:
    codes = {}
    for (u, v), eattr in zip(g.edges, g.edge_attrs):
        code = _edge_code(eattr)
        codes[(u, v)] = code
        codes[(v, u)] = code
    return codes


def _path_node_codes(g: LabeledGraph) -> list[int]:
    """Per-node hash of the node attributes alone.  Path features must not
    depend on degrees, otherwise adding an edge elsewhere would rewrite the
    encodings of untouched paths (bits could be cleared instead of OR-ed)."""
    return [fnv1a64((len(attrs), *attrs)) for attrs in g.node_attrs]


def topological_fingerprint(g: LabeledGraph, max_path_len: int = 7,
                            nbits: int = 2048,
                            bits_per_feature: int = 2) -> BitFingerprint:
    """Hash every simple path of 1..max_path_len edges into the bit vector.

    A path is canonicalized as the lexicographically smaller of its two
    directional encodings (alternating attribute-only node codes and bond
    codes); the canonical hash seeds splitmix64, which picks
    ``bits_per_feature`` indices.
    """
    if max_path_len < 1 or bits_per_feature < 1:
        raise DataError("topological fingerprint: max_path_len and bits_per_feature must be >= 1")
    bits = np.zeros(nbits, dtype=bool)
    inv = _path_node_codes(g)
    bonds = _bond_codes(g)
    adj = g.neighbors()
    for nbrs in adj:
        nbrs.sort()

    emitted = 0

    def set_feature(path: list[int]) -> None:
        forward = []
        for i, v in enumerate(path):
            if i:
                forward.append(bonds[(path[i - 1], v)])
            forward.append(inv[v])
        backward = []
        rev = path[::-1]
        for i, v in enumerate(rev):
            if i:
                backward.append(bonds[(rev[i - 1], v)])
            backward.append(inv[v])
        canonical = forward if tuple(forward) <= tuple(backward) else backward
        state = fnv1a64(canonical)
        for _ in range(bits_per_feature):
            draw, state = splitmix64(state)
            bits[draw % nbits] = True

    # DFS from every start; emitting only start < end visits each undirected
    # path exactly once.
    path = []
    on_path = np.zeros(g.node_count, dtype=bool)

    def dfs(v: int) -> None:
        nonlocal emitted
        path.append(v)
        on_path[v] = True
        if len(path) >= 2 and path[0] < v:
            emitted += 1
            if emitted > MAX_PATHS_PER_GRAPH:
                raise DataError(
                    f"graph {g.id!r}: more than {MAX_PATHS_PER_GRAPH} simple paths")
            set_feature(path)
        if len(path) <= max_path_len:
            for u in adj[v]:
                if not on_path[u]:
                    dfs(u)
        on_path[v] = False
        path.pop()

    for start in range(g.node_count):
        dfs(start)
    return BitFingerprint(bits=bits, scheme=TOPOLOGICAL,
                          params=(("max_path_len", max_path_len),
                                  ("nbits", nbits),
                                  ("bits_per_feature", bits_per_feature)))


def morgan_fingerprint(g: LabeledGraph, radius: int = 2,
                       nbits: int = 2048) -> BitFingerprint:
    """Circular fingerprint: iteratively hash each atom's neighborhood out to
    ``radius`` bonds; duplicate environments (same atom set) keep the earliest
    round's identifier, ties the smallest; one bit per surviving identifier."""
    if radius < 0:
        raise DataError("morgan fingerprint: radius must be >= 0")
    bits = np.zeros(nbits, dtype=bool)
    ids = atom_invariants(g)
    bonds = _bond_codes(g)
    adj = g.neighbors()
    envs = [frozenset((v,)) for v in range(g.node_count)]

    # environment atom set -> (round, identifier); earliest round wins,
    # smallest identifier breaks same-round ties (order-free, so the result
    # is invariant under node relabeling)
    chosen: dict[frozenset, tuple[int, int]] = {}

    def offer(env: frozenset, rnd: int, ident: int) -> None:
        prev = chosen.get(env)
        if prev is None or (rnd, ident) < prev:
            chosen[env] = (rnd, ident)

    for v in range(g.node_count):
        offer(envs[v], 0, ids[v])
    for rnd in range(1, radius + 1):
        new_ids = []
        new_envs = []
        for v in range(g.node_count):
            pairs = sorted((bonds[(v, u)], ids[u]) for u in adj[v])
            flat = [rnd, ids[v]]
            for bond, nid in pairs:
                flat.extend((bond, nid))
            ident = fnv1a64(flat)
            env = envs[v].union(*(envs[u] for u in adj[v])) if adj[v] else envs[v]
            new_ids.append(ident)
            new_envs.append(env)
            offer(env, rnd, ident)
        ids = new_ids
        envs = new_envs
    for _, ident in chosen.values():
        bits[ident % nbits] = True
    return BitFingerprint(bits=bits, scheme=MORGAN,
                          params=(("radius", radius), ("nbits", nbits)))


def make_fingerprints(corpus, scheme: str, **params) -> dict[str, BitFingerprint]:
    """Fingerprint every graph in a corpus with one bit scheme."""
    if scheme == TOPOLOGICAL:
        return {g.id: topological_fingerprint(g, **params) for g in corpus}
    if scheme == MORGAN:
        return {g.id: morgan_fingerprint(g, **params) for g in corpus}
    raise DataError(f"unknown bit-fingerprint scheme {scheme!r}")
