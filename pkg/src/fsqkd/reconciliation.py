"""Two-dimensional parity-check reconciliation.

Each pass shuffles the key with a shared seed and cuts it into rows x cols
blocks.  Alice then discloses every row and column parity.  A block whose
mismatches form exactly one bad row and one bad column has its error at the
crossing, and Bob flips that bit.  Parities disclosed in earlier passes are
rechecked after every correction, so a flip that clears one error from an
old two-error block exposes the other error for free.  A block left with
two bad rows and two bad columns is settled by trying both diagonals
against all disclosed parities.

A final round compares ``final_checks`` random-subset parities over the
whole key.  One key bit is then discarded per disclosed parity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classical import ClassicalChannel, ClassicalMessage
from .streams import check_seed, make_rng

MAX_SETTLE_SWEEPS = 64


@dataclass(frozen=True)
class ParityBlockConfig:
    rows: int = 8
    cols: int = 8
    passes: int = 3
    shuffle_seed: int = 0
    final_checks: int = 50

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be >= 1")
        if self.passes < 1:
            raise ValueError("passes must be >= 1")
        if self.final_checks < 0:
            raise ValueError("final_checks must be >= 0")
        check_seed(self.shuffle_seed)

    @property
    def block_size(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class ReconciliationResult:
    corrected_key: np.ndarray  # Bob's key after correction and discarding
    retained_indices: np.ndarray  # positions of corrected_key in the input
    reconciled_key: np.ndarray  # Bob's full-length key after correction
    corrections: int  # positions where reconciled_key differs from Bob's input
    disclosed_bit_equivalents: int
    residual_error_estimate: float
    converged: bool


def parity(bits) -> int:
    bits = np.asarray(bits)
    if bits.size == 0:
        raise ValueError("parity of an empty sequence is undefined")
    return int(np.bitwise_xor.reduce(bits.astype(np.uint8).ravel()))


def as_bits(seq) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.uint8)
    if arr.ndim != 1:
        raise ValueError("bit sequences must be one-dimensional")
    if np.any(arr > 1):
        raise ValueError("bit sequences may hold only 0 and 1")
    return arr


@dataclass
class _Layout:
    idx: np.ndarray  # (blocks, rows, cols) key positions
    row_par: np.ndarray  # Alice's disclosed parities
    col_par: np.ndarray


def _block_parities(key: np.ndarray, idx: np.ndarray):
    cells = key[idx]
    return np.bitwise_xor.reduce(cells, axis=2), np.bitwise_xor.reduce(cells, axis=1)


def _correct_singletons(bob: np.ndarray, layout: _Layout) -> int:
    rows, cols = _block_parities(bob, layout.idx)
    bad_r = rows != layout.row_par
    bad_c = cols != layout.col_par
    single = np.flatnonzero((bad_r.sum(axis=1) == 1) & (bad_c.sum(axis=1) == 1))
    if single.size:
        r = bad_r[single].argmax(axis=1)
        c = bad_c[single].argmax(axis=1)
        bob[layout.idx[single, r, c]] ^= 1
    return int(single.size)


def _mismatch(bob: np.ndarray, layouts: list[_Layout]) -> int:
    total = 0
    for lay in layouts:
        rows, cols = _block_parities(bob, lay.idx)
        total += int(np.count_nonzero(rows != lay.row_par) + np.count_nonzero(cols != lay.col_par))
    return total


def _resolve_pairs(bob: np.ndarray, layouts: list[_Layout]) -> bool:
    """Settle one block with two bad rows and two bad columns.

    The errors sit on one of the two diagonals of the 2x2 crossing.  Each
    diagonal is tried against every disclosed parity and kept only if it
    lowers the total mismatch.  Returns True if a pair was flipped.
    """
    base = _mismatch(bob, layouts)
    for lay in reversed(layouts):
        rows, cols = _block_parities(bob, lay.idx)
        bad_r = rows != lay.row_par
        bad_c = cols != lay.col_par
        for b in np.flatnonzero((bad_r.sum(axis=1) == 2) & (bad_c.sum(axis=1) == 2)):
            (r0, r1), (c0, c1) = np.flatnonzero(bad_r[b]), np.flatnonzero(bad_c[b])
            best, best_score = None, base
            for pair in ((lay.idx[b, r0, c0], lay.idx[b, r1, c1]), (lay.idx[b, r0, c1], lay.idx[b, r1, c0])):
                pos = np.array(pair)
                bob[pos] ^= 1
                score = _mismatch(bob, layouts)
                bob[pos] ^= 1
                if score < best_score:
                    best, best_score = pos, score
            if best is not None:
                bob[best] ^= 1
                return True
    return False


def _settle(bob: np.ndarray, layouts: list[_Layout]) -> None:
    # Sweep newest to oldest until no block reports a singleton, then try
    # the ambiguous two-error blocks.  A rare decoy pattern can make two
    # layouts undo each other, hence the cap.
    for _ in range(MAX_SETTLE_SWEEPS):
        if sum(_correct_singletons(bob, lay) for lay in reversed(layouts)):
            continue
        if not _resolve_pairs(bob, layouts):
            return


def _discard_mask(n: int, supports: list[np.ndarray]) -> np.ndarray:
    """One removed position per disclosed parity, taken from its support when possible."""
    removed = np.zeros(n, dtype=bool)
    left = n
    for sup in supports:
        if left == 0:
            break
        free = sup[~removed[sup]]
        if free.size:
            removed[free[-1]] = True
        else:
            removed[np.flatnonzero(~removed)[-1]] = True
        left -= 1
    return removed


def reconcile_2d(alice_key, bob_key, config: ParityBlockConfig | None = None,
                 channel: ClassicalChannel | None = None) -> ReconciliationResult:
    """Correct Bob's key towards Alice's with row/column parities.

    Alice's key is only read to compute her parity replies.  Non-convergence
    is reported through ``converged`` and a residual estimate of 1.
    """
    config = config or ParityBlockConfig()
    channel = channel if channel is not None else ClassicalChannel()
    alice = as_bits(alice_key)
    bob_in = as_bits(bob_key)
    n = alice.size
    if bob_in.size != n:
        raise ValueError(f"key length mismatch: {n} vs {bob_in.size}")
    if config.block_size > n:
        raise ValueError(f"block {config.rows}x{config.cols} exceeds key length {n}")

    bob = bob_in.copy()
    rng = make_rng(config.shuffle_seed)
    channel.exchange(ClassicalMessage.session_control(
        "bob", scheme="parity-2d", rows=config.rows, cols=config.cols,
        passes=config.passes, shuffle_seed=config.shuffle_seed, final_checks=config.final_checks))

    blocks = n // config.block_size
    disclosed = 0
    layouts: list[_Layout] = []
    supports: list[np.ndarray] = []
    for p in range(config.passes):
        perm = rng.permutation(n)
        idx = perm[: blocks * config.block_size].reshape(blocks, config.rows, config.cols)
        channel.exchange(ClassicalMessage.parity_request(stage="block", pass_index=p))
        a_rows, a_cols = _block_parities(alice, idx)
        reply = channel.exchange(ClassicalMessage.parity_reply(np.concatenate([a_rows.ravel(), a_cols.ravel()])))
        split = a_rows.size
        disclosed += reply.parities.size
        layouts.append(_Layout(
            idx,
            reply.parities[:split].reshape(a_rows.shape),
            reply.parities[split:].reshape(a_cols.shape),
        ))
        for b in range(blocks):
            supports.extend(idx[b])
            supports.extend(idx[b].T)
        _settle(bob, layouts)

    converged = True
    if config.final_checks:
        masks = rng.random((config.final_checks, n)) < 0.5
        channel.exchange(ClassicalMessage.parity_request(stage="final", count=config.final_checks))
        a_par = (masks & alice.astype(bool)).sum(axis=1) % 2
        reply = channel.exchange(ClassicalMessage.parity_reply(a_par))
        b_par = (masks & bob.astype(bool)).sum(axis=1) % 2
        converged = bool(np.array_equal(reply.parities, b_par))
        disclosed += reply.parities.size
        supports.extend(np.flatnonzero(m) for m in masks)

    removed = _discard_mask(n, supports)
    retained = np.flatnonzero(~removed)
    residual = 2.0 ** -config.final_checks if converged else 1.0
    channel.exchange(ClassicalMessage.session_control(
        "bob", converged=converged, discarded=int(removed.sum())))

    for a in (bob, retained):
        a.setflags(write=False)
    corrected = bob[retained]
    corrected.setflags(write=False)
    return ReconciliationResult(
        corrected_key=corrected,
        retained_indices=retained,
        reconciled_key=bob,
        corrections=int(np.count_nonzero(bob != bob_in)),
        disclosed_bit_equivalents=disclosed,
        residual_error_estimate=residual,
        converged=converged,
    )
