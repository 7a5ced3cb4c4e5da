"""Signature sequences, activity patterns and received-signal synthesis.

Received signals use the vectorised layout ``y = vec(Y)`` with ``Y`` the
L x K matrix of antenna snapshots, i.e. entry ``k*L + l`` holds antenna ``k``
at symbol ``l``. Under this layout ``vec(s h^T) = kron(h, s)``.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .channel import crandn, sample_channel

QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) * (np.sqrt(2) / 2)


def generate_signatures(N, L, rng):
    """L x N matrix with i.i.d. entries uniform over the unit-modulus QPSK alphabet."""
    if N < 1 or L < 1:
        raise ValueError("N and L must be >= 1")
    return QPSK[rng.integers(0, 4, size=(L, N))]


def sample_activity(N, ratio, rng, mode="fixed"):
    """Binary activity vector.

    ``mode="fixed"`` activates exactly ``round(ratio * N)`` devices chosen
    uniformly; ``mode="bernoulli"`` draws each device independently.
    """
    if not 0 <= ratio <= 1:
        raise ValueError("ratio must lie in [0, 1]")
    a = np.zeros(N, dtype=int)
    if mode == "fixed":
        a[rng.choice(N, size=int(round(ratio * N)), replace=False)] = 1
    elif mode == "bernoulli":
        a[:] = rng.uniform(size=N) < ratio
    else:
        raise ValueError(f"unknown activity mode {mode!r}")
    return a


def vec_received(Y):
    """Column-major vectorisation of an L x K snapshot matrix."""
    return np.asarray(Y).reshape(-1, order="F")


def unvec_received(y, L):
    return np.asarray(y).reshape(L, -1, order="F")


def synthesize_received(stats, S, a_true, rng, noise=True):
    """One received vector of length L*K per AP.

    ``stats`` is the per-AP list of per-device ChannelStat. Inactive devices
    do not consume random draws, so results depend only on the active set.
    """
    L, N = S.shape
    a_true = np.asarray(a_true)
    out = []
    for stats_m in stats:
        K = stats_m[0].K
        Y = np.zeros((L, K), dtype=complex)
        for n in np.flatnonzero(a_true):
            h = sample_channel(stats_m[n], rng)
            Y += a_true[n] * np.outer(S[:, n], h)
        if noise:
            Y += crandn(rng, (L, K))
        out.append(vec_received(Y))
    return out


_MAGIC = b"CFAD"


def dump_signals(path, S, a_true, ys):
    """Write (S, a_true, y_1..y_M) to a little-endian binary file.

    Layout: magic ``CFAD``, then ``<IIII`` = (L, N, M, LK); S as L*N complex
    pairs in column-major order (``<f8`` real, ``<f8`` imag); a_true as N
    ``uint8``; then the M received vectors as LK complex pairs each.
    """
    S = np.asarray(S, dtype=complex)
    L, N = S.shape
    ys = [np.asarray(y, dtype=complex) for y in ys]
    LK = ys[0].size if ys else 0
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IIII", L, N, len(ys), LK))
        fh.write(S.reshape(-1, order="F").astype("<c16").tobytes())
        fh.write(np.asarray(a_true, dtype="<u1").tobytes())
        for y in ys:
            fh.write(y.astype("<c16").tobytes())


def load_signals(path):
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise ValueError("not a signal dump")
    L, N, M, LK = struct.unpack("<IIII", raw[4:20])
    off = 20
    S = np.frombuffer(raw, "<c16", L * N, off).reshape(L, N, order="F")
    off += 16 * L * N
    a_true = np.frombuffer(raw, "<u1", N, off).astype(int)
    off += N
    ys = [np.frombuffer(raw, "<c16", LK, off + 16 * LK * m).copy() for m in range(M)]
    return S.copy(), a_true, ys
