"""Quasi-cyclic LDPC code with staircase parity structure and sum-product
belief-propagation decoding."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources

import numpy as np

DEFAULT_BASE_RESOURCE = "qc_base_rate56.txt"
BP_MAX_ITERS = 50
_ATANH_CAP = 0.9999999999999998  # keep arctanh finite


def parse_base_matrix(text: str) -> tuple[np.ndarray, int]:
    """Parse the plain-text base matrix format.

    First data line: block_rows block_cols lifting_size; then block_rows
    rows of integers, -1 for an all-zero block, s >= 0 for the circulant
    with ones at (z, (z + s) mod Z).
    """
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    mb, nb, z = map(int, lines[0].split())
    rows = [list(map(int, ln.split())) for ln in lines[1:1 + mb]]
    base = np.asarray(rows, dtype=np.int64)
    if base.shape != (mb, nb):
        raise ValueError(f"base matrix shape {base.shape} != ({mb}, {nb})")
    if np.any(base >= z):
        raise ValueError("circulant shift exceeds lifting size")
    return base, z


def load_base_matrix(name: str = DEFAULT_BASE_RESOURCE) -> tuple[np.ndarray, int]:
    text = resources.files("gnndsim.codec").joinpath("data", name).read_text()
    return parse_base_matrix(text)


@dataclass(frozen=True)
class ParityGraph:
    """Edge-list view of a parity-check matrix for message passing."""

    n: int
    n_checks: int
    check_of_edge: np.ndarray
    var_of_edge: np.ndarray
    check_starts: np.ndarray = field(repr=False, default=None)
    var_perm: np.ndarray = field(repr=False, default=None)
    var_starts: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        ce = np.asarray(self.check_of_edge, dtype=np.int64)
        ve = np.asarray(self.var_of_edge, dtype=np.int64)
        order = np.lexsort((ve, ce))
        ce, ve = ce[order], ve[order]
        counts_c = np.bincount(ce, minlength=self.n_checks)
        counts_v = np.bincount(ve, minlength=self.n)
        if counts_c.min() < 1 or counts_v.min() < 1:
            raise ValueError("every check and variable must touch an edge")
        var_perm = np.lexsort((ce, ve))
        object.__setattr__(self, "check_of_edge", ce)
        object.__setattr__(self, "var_of_edge", ve)
        object.__setattr__(self, "check_starts",
                           np.searchsorted(ce, np.arange(self.n_checks)))
        object.__setattr__(self, "var_perm", var_perm)
        object.__setattr__(self, "var_starts",
                           np.searchsorted(ve[var_perm], np.arange(self.n)))

    @classmethod
    def from_dense(cls, h) -> "ParityGraph":
        h = np.asarray(h, dtype=np.uint8)
        ce, ve = np.nonzero(h)
        return cls(h.shape[1], h.shape[0], ce, ve)

    def dense(self) -> np.ndarray:
        h = np.zeros((self.n_checks, self.n), dtype=np.uint8)
        h[self.check_of_edge, self.var_of_edge] = 1
        return h


@dataclass(frozen=True)
class LdpcCode:
    base_matrix: np.ndarray
    lifting: int
    info_length: int
    rate: Fraction
    graph: ParityGraph = field(repr=False, default=None)

    def __post_init__(self):
        base, z = self.base_matrix, self.lifting
        mb, nb = base.shape
        checks, vars_ = [], []
        zz = np.arange(z)
        for rb in range(mb):
            for cb in range(nb):
                s = base[rb, cb]
                if s < 0:
                    continue
                checks.append(rb * z + zz)
                vars_.append(cb * z + (zz + s) % z)
        graph = ParityGraph(nb * z, mb * z,
                            np.concatenate(checks), np.concatenate(vars_))
        object.__setattr__(self, "graph", graph)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def n_checks(self) -> int:
        return self.graph.n_checks

    def dense_parity_check(self) -> np.ndarray:
        return self.graph.dense()


def ldpc_build(info_length: int = 440, rate: Fraction = Fraction(5, 6),
               resource: str = DEFAULT_BASE_RESOURCE) -> LdpcCode:
    """Load the pinned base matrix and check it fits the requested shape."""
    base, z = load_base_matrix(resource)
    mb, nb = base.shape
    k = (nb - mb) * z
    if k != info_length:
        raise ValueError(f"pinned construction gives info length {k}, "
                         f"requested {info_length}")
    if Fraction(k, nb * z) != rate:
        raise ValueError(f"pinned construction gives rate {Fraction(k, nb * z)}, "
                         f"requested {rate}")
    return LdpcCode(base, z, k, rate)


def encode(code: LdpcCode, bits) -> np.ndarray:
    """Systematic encoding via the staircase parity section."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size != code.info_length:
        raise ValueError(f"expected {code.info_length} information bits")
    base, z = code.base_matrix, code.lifting
    mb, nb = base.shape
    info_blocks = nb - mb
    u = bits.reshape(info_blocks, z)
    syn = np.zeros((mb, z), dtype=np.uint8)
    for rb in range(mb):
        for cb in range(info_blocks):
            s = base[rb, cb]
            if s >= 0:
                syn[rb] ^= np.roll(u[cb], -s)
    parity = np.zeros((mb, z), dtype=np.uint8)
    parity[0] = syn[0]
    for i in range(1, mb):
        parity[i] = syn[i] ^ parity[i - 1]
    return np.concatenate([bits, parity.ravel()])


def _graph_of(code) -> ParityGraph:
    return code if isinstance(code, ParityGraph) else code.graph


def syndrome(code, word) -> np.ndarray:
    g = _graph_of(code)
    word = np.asarray(word, dtype=np.uint8).ravel()
    acc = np.add.reduceat(word[g.var_of_edge], g.check_starts) & 1
    return acc.astype(np.uint8)


def bp_decode_batch(code, llrs, max_iters: int = BP_MAX_ITERS,
                    return_posteriors: bool = False, early_exit: bool = True):
    """Flooding sum-product decoding of a batch of LLR vectors.

    ``llrs`` has shape (batch, n) with the convention log p(bit=0)/p(bit=1).
    Returns (hard bits (batch, n), converged (batch,)). Convergence means
    all checks are satisfied with no undecidable (exactly zero) posterior
    LLR; decoding stops early once every batch item has converged unless
    ``early_exit`` is disabled (useful when exact posteriors are wanted).
    """
    g = _graph_of(code)
    llrs = np.atleast_2d(np.asarray(llrs, dtype=np.float64))
    b, n = llrs.shape
    if n != g.n:
        raise ValueError(f"LLR length {n} != code length {g.n}")
    ce, ve = g.check_of_edge, g.var_of_edge
    v2c = llrs[:, ve].copy()
    c2v = np.zeros_like(v2c)
    total = llrs
    hard = (llrs < 0).astype(np.uint8)
    converged = np.zeros(b, dtype=bool)
    for _ in range(max_iters):
        t = np.tanh(0.5 * np.clip(v2c, -60.0, 60.0))
        mag = np.clip(np.abs(t), 1e-300, _ATANH_CAP)
        neg = t < 0
        lt = np.log(mag)
        sum_lt = np.add.reduceat(lt, g.check_starts, axis=1)
        sum_neg = np.add.reduceat(neg.astype(np.int64), g.check_starts, axis=1)
        ext_lt = sum_lt[:, ce] - lt
        ext_sign = 1.0 - 2.0 * ((sum_neg[:, ce] - neg) & 1)
        c2v = 2.0 * np.arctanh(np.minimum(np.exp(ext_lt), _ATANH_CAP)) * ext_sign
        contrib = np.add.reduceat(c2v[:, g.var_perm], g.var_starts, axis=1)
        total = llrs + contrib
        v2c = total[:, ve] - c2v
        hard = (total < 0).astype(np.uint8)
        syn = np.add.reduceat(hard[:, ve], g.check_starts, axis=1) & 1
        converged = ~syn.any(axis=1) & ~(total == 0.0).any(axis=1)
        if early_exit and converged.all():
            break
    if return_posteriors:
        return hard, converged, total
    return hard, converged


def bp_decode(code, llr, max_iters: int = BP_MAX_ITERS):
    hard, conv = bp_decode_batch(code, np.atleast_2d(llr), max_iters)
    return hard[0], bool(conv[0])


def gf2_rank(matrix) -> int:
    """Rank over GF(2) by elimination on packed rows."""
    rows = [int("".join(map(str, r)), 2) for r in np.asarray(matrix, dtype=np.uint8)]
    rank = 0
    while rows:
        pivot = max(rows)
        rows.remove(pivot)
        if pivot == 0:
            continue
        rank += 1
        top = pivot.bit_length() - 1
        rows = [r ^ pivot if (r >> top) & 1 else r for r in rows]
    return rank
