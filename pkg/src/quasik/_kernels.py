"""Hot loops of the finite-model oracle.

Two interchangeable back ends are provided for every kernel: a numba
``@njit`` version and a vectorised numpy version.  The numba path is used
when numba imports and ``QUASIK_DISABLE_NUMBA`` is unset (or ``0``).  Both
paths must return identical results; ``tests/test_kernels.py`` and
``benchmarks/bench_kernels.py`` exercise them side by side.

Formula evaluation is bit-parallel over valuations: for ``W`` worlds and
``m`` propositions a valuation is an integer with ``m * W`` bits (bit
``j * W + u`` says proposition ``j`` holds at world ``u``).  A subformula's
extension at world ``u`` is then a bitset over *all* valuations at once,
stored as ``nwords`` uint64 words.
"""
from __future__ import annotations

import itertools
import os
from functools import lru_cache

import numpy as np

try:  # pragma: no cover - import guard
    import numba
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    _HAVE_NUMBA = False

# opcodes of the compiled formula program
OP_ATOM, OP_NEGATOM, OP_AND, OP_OR, OP_DIA, OP_BOX = range(6)

MAX_VALUATION_BITS = 22


def numba_enabled() -> bool:
    flag = os.environ.get("QUASIK_DISABLE_NUMBA", "").strip().lower()
    return _HAVE_NUMBA and flag in ("", "0", "false", "no")


# --------------------------------------------------------------------------
# frames

@lru_cache(maxsize=None)
def canonical_relation_codes(n_worlds: int) -> np.ndarray:
    """One relation code per isomorphism class of ``n_worlds``-point frames.

    Bit ``i * W + j`` of a code encodes ``R(i, j)``.  The representative is
    the numerically smallest code in its class; the result is sorted.
    """
    if n_worlds < 1 or n_worlds > 4:
        raise ValueError("frame enumeration supports 1..4 worlds")
    w = n_worlds
    nbits = w * w
    codes = np.arange(1 << nbits, dtype=np.int64)
    best = codes.copy()
    for perm in itertools.permutations(range(w)):
        permuted = np.zeros_like(codes)
        for i in range(w):
            for j in range(w):
                bit = (codes >> (i * w + j)) & 1
                permuted |= bit << (perm[i] * w + perm[j])
        np.minimum(best, permuted, out=best)
    reps = np.unique(best)
    reps.setflags(write=False)
    return reps


def codes_to_adjacency(codes: np.ndarray, n_worlds: int) -> np.ndarray:
    """Boolean adjacency tensors, shape ``(len(codes), W, W)``."""
    w = n_worlds
    shifts = np.arange(w * w, dtype=np.int64)
    bits = (codes[:, None] >> shifts[None, :]) & 1
    return bits.reshape(len(codes), w, w).astype(bool)


def codes_to_successors(codes: np.ndarray, n_worlds: int) -> np.ndarray:
    """Successor bitmask per world, shape ``(len(codes), W)`` int64."""
    adj = codes_to_adjacency(codes, n_worlds).astype(np.int64)
    weights = (1 << np.arange(n_worlds, dtype=np.int64))
    return (adj * weights[None, None, :]).sum(axis=2)


def exact_reach(adj: np.ndarray, length: int) -> np.ndarray:
    """``R^length`` for a batch of boolean adjacency matrices ``(..., W, W)``."""
    w = adj.shape[-1]
    out = np.broadcast_to(np.eye(w, dtype=bool), adj.shape).copy()
    a = adj.astype(np.int64)
    for _ in range(length):
        out = (out.astype(np.int64) @ a) > 0
    return out


def qdp_mask(codes: np.ndarray, n_worlds: int, qdps) -> np.ndarray:
    """Which frames satisfy every ``(k, k_plus)`` pair in ``qdps``."""
    keep = np.ones(len(codes), dtype=bool)
    if len(codes) == 0 or not qdps:
        return keep
    adj = codes_to_adjacency(codes, n_worlds)
    cache: dict[int, np.ndarray] = {}
    for k, k_plus in qdps:
        for length in (k, k_plus):
            if length not in cache:
                cache[length] = exact_reach(adj, length)
        rk, rn = cache[k], cache[k_plus]
        keep &= ~np.any(rk & ~rn, axis=(1, 2))
    return keep


# --------------------------------------------------------------------------
# valuations

def valuation_words(n_props: int, n_worlds: int) -> tuple[int, int]:
    nbits = n_props * n_worlds
    if nbits > MAX_VALUATION_BITS:
        raise ValueError(f"{nbits} valuation bits exceed the oracle limit")
    n_vals = 1 << nbits
    return n_vals, max(1, (n_vals + 63) // 64)


def atom_masks(n_props: int, n_worlds: int) -> tuple[np.ndarray, np.ndarray]:
    """Bitsets over valuations: ``masks[j, u]`` = valuations making prop j true at u.

    Also returns the all-valid mask (only the low ``2**nbits`` bits are used
    when that is fewer than 64).
    """
    n_vals, nwords = valuation_words(n_props, n_worlds)
    vals = np.arange(nwords * 64, dtype=np.int64)
    valid = vals < n_vals
    masks = np.zeros((max(n_props, 1), n_worlds, nwords), dtype=np.uint64)
    weights = np.uint64(1) << np.arange(64, dtype=np.uint64)
    for j in range(n_props):
        for u in range(n_worlds):
            bit = ((vals >> (j * n_worlds + u)) & 1).astype(bool) & valid
            masks[j, u] = (bit.reshape(nwords, 64) * weights).sum(axis=1, dtype=np.uint64)
    valid_mask = (valid.reshape(nwords, 64) * weights).sum(axis=1, dtype=np.uint64)
    return masks, valid_mask


# --------------------------------------------------------------------------
# formula evaluation: numpy path

def _eval_numpy(ops, arg0, arg1, succ, masks, valid):
    """Evaluate the program over a batch of frames.

    Returns ``root`` of shape ``(n_frames, W, nwords)``.
    """
    n_frames, w = succ.shape
    nwords = valid.shape[0]
    res = np.empty((len(ops), n_frames, w, nwords), dtype=np.uint64)
    full = np.broadcast_to(valid, (n_frames, nwords))
    zero = np.uint64(0)
    for i in range(len(ops)):
        op = ops[i]
        if op == OP_ATOM:
            res[i] = masks[arg0[i]][None, :, :]
        elif op == OP_NEGATOM:
            res[i] = (~masks[arg0[i]] & valid)[None, :, :]
        elif op == OP_AND:
            np.bitwise_and(res[arg0[i]], res[arg1[i]], out=res[i])
        elif op == OP_OR:
            np.bitwise_or(res[arg0[i]], res[arg1[i]], out=res[i])
        else:
            child = res[arg0[i]]
            for v in range(w):
                acc = np.zeros((n_frames, nwords), dtype=np.uint64) if op == OP_DIA else full.copy()
                for u in range(w):
                    has = ((succ[:, v] >> u) & 1).astype(bool)[:, None]
                    if op == OP_DIA:
                        acc |= np.where(has, child[:, u, :], zero)
                    else:
                        acc &= np.where(has, child[:, u, :], full)
                res[i, :, v, :] = acc
    return res[len(ops) - 1]


def _first_hit_numpy(ops, arg0, arg1, succ, masks, valid, chunk=512):
    for start in range(0, succ.shape[0], chunk):
        block = succ[start:start + chunk]
        root = _eval_numpy(ops, arg0, arg1, block, masks, valid)
        nz = root != 0
        if nz.any():
            f, v, word = np.argwhere(nz)[0]
            value = int(root[f, v, word])
            bit = (value & -value).bit_length() - 1
            return start + int(f), int(v), int(word) * 64 + bit
    return -1, -1, -1


# --------------------------------------------------------------------------
# formula evaluation: numba path

if _HAVE_NUMBA:

    @njit(cache=True)
    def _first_hit_numba(ops, arg0, arg1, succ, masks, valid):  # pragma: no cover - jitted
        n_frames, w = succ.shape
        nwords = valid.shape[0]
        n_ops = ops.shape[0]
        res = np.empty((n_ops, w, nwords), dtype=np.uint64)
        for f in range(n_frames):
            for i in range(n_ops):
                op = ops[i]
                if op == 0:
                    for v in range(w):
                        for k in range(nwords):
                            res[i, v, k] = masks[arg0[i], v, k]
                elif op == 1:
                    for v in range(w):
                        for k in range(nwords):
                            res[i, v, k] = ~masks[arg0[i], v, k] & valid[k]
                elif op == 2:
                    a = arg0[i]
                    b = arg1[i]
                    for v in range(w):
                        for k in range(nwords):
                            res[i, v, k] = res[a, v, k] & res[b, v, k]
                elif op == 3:
                    a = arg0[i]
                    b = arg1[i]
                    for v in range(w):
                        for k in range(nwords):
                            res[i, v, k] = res[a, v, k] | res[b, v, k]
                else:
                    a = arg0[i]
                    for v in range(w):
                        s = succ[f, v]
                        for k in range(nwords):
                            if op == 4:
                                acc = np.uint64(0)
                                for u in range(w):
                                    if (s >> u) & 1:
                                        acc |= res[a, u, k]
                            else:
                                acc = valid[k]
                                for u in range(w):
                                    if (s >> u) & 1:
                                        acc &= res[a, u, k]
                            res[i, v, k] = acc
            root = n_ops - 1
            for v in range(w):
                for k in range(nwords):
                    x = res[root, v, k]
                    if x != 0:
                        bit = 0
                        m = np.uint64(1)
                        while (x & m) == 0:
                            m = m << np.uint64(1)
                            bit += 1
                        return f, v, k * 64 + bit
        return -1, -1, -1


def first_satisfying(ops, arg0, arg1, succ, masks, valid, use_numba: bool | None = None):
    """First ``(frame, world, valuation)`` at which the program's root holds.

    ``(-1, -1, -1)`` when no frame in ``succ`` admits a satisfying valuation.
    Frames are scanned in order, then worlds, then valuations.
    """
    if use_numba is None:
        use_numba = numba_enabled()
    ops = np.ascontiguousarray(ops, dtype=np.int64)
    arg0 = np.ascontiguousarray(arg0, dtype=np.int64)
    arg1 = np.ascontiguousarray(arg1, dtype=np.int64)
    succ = np.ascontiguousarray(succ, dtype=np.int64)
    if succ.shape[0] == 0:
        return -1, -1, -1
    if use_numba:
        if not _HAVE_NUMBA:
            raise RuntimeError("numba is not available")
        f, v, val = _first_hit_numba(ops, arg0, arg1, succ, masks, valid)
        return int(f), int(v), int(val)
    return _first_hit_numpy(ops, arg0, arg1, succ, masks, valid)
