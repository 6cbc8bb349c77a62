"""QUBO solvers: simulated annealing, steepest single-flip descent, exhaustive search.

Random numbers come from numpy's PCG64. Read ``r`` of a run with seed ``s`` uses
``PCG64(SeedSequence([s, r]))``: first ``dim`` integers in {0, 1} for the initial
state, then a ``(sweeps, dim)`` block of uniforms consumed in sweep order. Results
therefore do not depend on how reads are spread over threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numba
import numpy as np

from .qubo import QuboMatrix

DEFAULT_SEED = 20240607
BRUTE_FORCE_LIMIT = 26
_RESYNC_SWEEPS = 64
_TOP_K = 64


def thread_count(requested: Optional[int] = None) -> int:
    """Worker count: ``requested``, else ``UCPQUBO_THREADS``, else 1."""
    if requested is None:
        requested = int(os.environ.get("UCPQUBO_THREADS", "1") or 1)
    return max(1, int(requested))


@dataclass(frozen=True)
class AnnealParams:
    reads: int = 1000
    sweeps: int = 1000
    beta_start: Optional[float] = None
    beta_end: Optional[float] = None
    seed: int = DEFAULT_SEED
    descent: bool = True
    threads: Optional[int] = None

    def __post_init__(self):
        if self.reads < 1 or self.sweeps < 1:
            raise ValueError("reads and sweeps must be at least 1")
        if self.beta_start is not None and self.beta_end is not None:
            if not 0 < self.beta_start <= self.beta_end:
                raise ValueError("need 0 < beta_start <= beta_end")

    def to_dict(self) -> dict:
        return {
            "reads": self.reads,
            "sweeps": self.sweeps,
            "beta_start": self.beta_start,
            "beta_end": self.beta_end,
            "seed": self.seed,
            "descent": self.descent,
        }


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 63-bit child seed of ``seed`` for the given keys."""
    state = np.random.SeedSequence([int(seed) & (2**64 - 1), *[int(k) for k in keys]])
    return int(state.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


# -- kernels ----------------------------------------------------------------------


@numba.njit(cache=True, nogil=True)
def _fields(indptr, indices, data, x, out):
    n = x.size
    for i in range(n):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            if x[indices[p]]:
                acc += data[p]
        out[i] = acc


@numba.njit(cache=True, nogil=True)
def _flip(indptr, indices, data, x, field, i):
    sign = 1.0 if x[i] == 0 else -1.0
    x[i] = 1 - x[i]
    for p in range(indptr[i], indptr[i + 1]):
        field[indices[p]] += sign * data[p]


@numba.njit(cache=True, nogil=True)
def _anneal_kernel(indptr, indices, data, diag, x, betas, uniforms, resync):
    n = x.size
    field = np.empty(n)
    _fields(indptr, indices, data, x, field)
    for s in range(betas.size):
        if s > 0 and s % resync == 0:
            _fields(indptr, indices, data, x, field)
        beta = betas[s]
        for i in range(n):
            delta = diag[i] + field[i]
            if x[i] == 1:
                delta = -delta
            if delta <= 0.0 or uniforms[s, i] < math.exp(-beta * delta):
                _flip(indptr, indices, data, x, field, i)


@numba.njit(cache=True, nogil=True)
def _descent_kernel(indptr, indices, data, diag, x, max_flips):
    n = x.size
    field = np.empty(n)
    _fields(indptr, indices, data, x, field)
    flips = 0
    verified = False
    while flips < max_flips:
        best = 0.0
        best_i = -1
        for i in range(n):
            delta = diag[i] + field[i]
            if x[i] == 1:
                delta = -delta
            if delta < best:
                best = delta
                best_i = i
        if best_i < 0:
            if verified:
                break
            _fields(indptr, indices, data, x, field)
            verified = True
            continue
        _flip(indptr, indices, data, x, field, best_i)
        verified = False
        flips += 1
    return flips


@numba.njit(cache=True, nogil=True)
def _bit_reverse(code, n):
    out = 0
    for b in range(n):
        if (code >> b) & 1:
            out |= 1 << (n - 1 - b)
    return out


@numba.njit(cache=True, nogil=True)
def _energy_of(rows, cols, values, offset, x):
    total = 0.0
    for p in range(values.size):
        if x[rows[p]] and x[cols[p]]:
            total += values[p]
    return total + offset


@numba.njit(cache=True, nogil=True)
def _gray_kernel(indptr, indices, data, diag, rows, cols, values, offset, n, top_e, top_code, resync):
    """Visit all ``2**n`` states in reflected Gray-code order.

    Keeps the ``top_e.size`` lowest running energies; ties are broken toward the
    lexicographically smallest bit vector. Returns the number of visited states.
    """
    x = np.zeros(n, dtype=np.int8)
    field = np.zeros(n)
    energy = offset
    k = top_e.size
    for slot in range(k):
        top_e[slot] = np.inf
        top_code[slot] = -1
    top_e[0] = energy
    top_code[0] = 0
    worst = 1
    code = 0
    total = 1 << n
    for g in range(1, total):
        i = 0
        while not (g >> i) & 1:
            i += 1
        delta = diag[i] + field[i]
        if x[i] == 1:
            delta = -delta
        _flip(indptr, indices, data, x, field, i)
        code ^= 1 << i
        energy += delta
        if g % resync == 0:
            _fields(indptr, indices, data, x, field)
            energy = _energy_of(rows, cols, values, offset, x)
        # replace the worst kept entry when strictly better, or equal and lex-smaller
        we = top_e[worst]
        if energy < we or (energy == we and _bit_reverse(code, n) < _bit_reverse(top_code[worst], n)):
            top_e[worst] = energy
            top_code[worst] = code
            worst = 0
            for slot in range(1, k):
                if top_e[slot] > top_e[worst]:
                    worst = slot
    return total


# -- public API -------------------------------------------------------------------


def _csr(q: QuboMatrix):
    indptr, indices, data = q.adjacency
    return indptr, indices, data, q.diagonal


def delta_energy(q: QuboMatrix, x, i: int) -> float:
    """``energy(x with bit i flipped) - energy(x)`` in O(row degree)."""
    if not 0 <= i < q.dim:
        raise IndexError(f"bit index {i} outside [0, {q.dim})")
    x = np.asarray(x)
    indptr, indices, data, diag = _csr(q)
    nbrs = indices[indptr[i] : indptr[i + 1]]
    local = diag[i] + float(np.dot(data[indptr[i] : indptr[i + 1]], x[nbrs]))
    return -local if x[i] else local


def all_deltas(q: QuboMatrix, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.int8)
    indptr, indices, data, diag = _csr(q)
    field = np.empty(q.dim)
    _fields(indptr, indices, data, x, field)
    local = diag + field
    return np.where(x == 1, -local, local)


def default_betas(q: QuboMatrix) -> tuple[float, float]:
    """Inverse temperatures from the coefficient range.

    Hot end: the largest possible single-flip change is accepted with probability
    1/2. Cold end: ``50 / min |q_ij|``, so a change of the smallest nonzero
    coefficient is accepted with probability ``exp(-50)``.
    """
    if q.nnz == 0:
        return 0.1, 1.0
    indptr, indices, data, diag = _csr(q)
    row_ids = np.repeat(np.arange(q.dim), np.diff(indptr))
    row_abs = np.abs(diag) + np.bincount(row_ids, weights=np.abs(data), minlength=q.dim)
    max_delta = float(row_abs.max())
    min_coef = float(np.abs(q.values).min())
    beta_start = math.log(2.0) / max_delta
    beta_end = max(50.0 / min_coef, beta_start)
    return beta_start, beta_end


@dataclass(frozen=True, eq=False)
class AnnealResult:
    best: np.ndarray
    energy: float
    energies: np.ndarray
    samples: np.ndarray
    beta_range: tuple[float, float]
    params: AnnealParams = field(default_factory=AnnealParams)


def local_descent(q: QuboMatrix, x) -> np.ndarray:
    """Steepest single-bit descent to a 1-flip local minimum (ties: lowest index)."""
    x = np.array(x, dtype=np.int8)
    if x.shape != (q.dim,):
        raise ValueError("vector length differs from matrix dimension")
    indptr, indices, data, diag = _csr(q)
    _descent_kernel(indptr, indices, data, diag, x, 1000 * max(q.dim, 1))
    return x


def _one_read(q: QuboMatrix, params: AnnealParams, betas: np.ndarray, read: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(params.seed), read])))
    x = rng.integers(0, 2, size=q.dim).astype(np.int8)
    uniforms = rng.random((params.sweeps, q.dim))
    indptr, indices, data, diag = _csr(q)
    _anneal_kernel(indptr, indices, data, diag, x, betas, uniforms, _RESYNC_SWEEPS)
    if params.descent:
        _descent_kernel(indptr, indices, data, diag, x, 1000 * q.dim)
    return x


def simulated_anneal(q: QuboMatrix, params: Optional[AnnealParams] = None) -> AnnealResult:
    """Metropolis single-flip annealing on a geometric beta schedule, best of all reads."""
    params = params or AnnealParams()
    if q.dim < 1:
        raise ValueError("empty QUBO")
    auto_start, auto_end = default_betas(q)
    beta_start = params.beta_start if params.beta_start is not None else auto_start
    beta_end = params.beta_end if params.beta_end is not None else max(auto_end, beta_start)
    betas = np.geomspace(beta_start, beta_end, params.sweeps)
    _csr(q)  # build the shared adjacency before threads start
    workers = thread_count(params.threads)
    if workers > 1 and params.reads > 1:
        with ThreadPoolExecutor(workers) as pool:
            samples = list(pool.map(lambda r: _one_read(q, params, betas, r), range(params.reads)))
    else:
        samples = [_one_read(q, params, betas, r) for r in range(params.reads)]
    samples = np.stack(samples)
    energies = q.energies(samples)
    best = int(np.argmin(energies))  # first read wins ties
    return AnnealResult(samples[best].copy(), float(energies[best]), energies, samples, (beta_start, beta_end), params)


@dataclass(frozen=True, eq=False)
class BruteForceResult:
    best: np.ndarray
    energy: float
    visited: int


def brute_force(q: QuboMatrix, limit: int = BRUTE_FORCE_LIMIT) -> BruteForceResult:
    """Exact minimum by Gray-code enumeration; lexicographically smallest among ties.

    Running energies are updated by single-flip deltas and resynchronised every
    4096 steps; the lowest candidates are re-evaluated from scratch at the end.
    """
    n = q.dim
    if n > limit:
        raise ValueError(f"dimension {n} exceeds brute-force limit {limit}")
    if n == 0:
        return BruteForceResult(np.zeros(0, dtype=np.int8), q.offset, 1)
    indptr, indices, data, diag = _csr(q)
    k = min(_TOP_K, 1 << n)
    top_e = np.empty(k)
    top_code = np.empty(k, dtype=np.int64)
    visited = _gray_kernel(
        indptr, indices, data, diag, q.rows, q.cols, q.values, q.offset, n, top_e, top_code, 4096
    )
    codes = top_code[top_code >= 0]
    states = ((codes[:, None] >> np.arange(n)) & 1).astype(np.int8)
    exact = q.energies(states)
    order = sorted(range(len(codes)), key=lambda m: (exact[m], tuple(states[m])))
    m = order[0]
    return BruteForceResult(states[m].copy(), float(exact[m]), int(visited))


def all_energies(q: QuboMatrix, limit: int = BRUTE_FORCE_LIMIT) -> np.ndarray:
    """Energy of every state, indexed by ``code = sum_i x_i 2**i``.

    The bits are split into a low and a high half; the table is
    ``offset + E_low[l] + E_high[h] + X_low[l] @ C @ X_high[h]``, built as one
    matrix product.
    """
    n = q.dim
    if n > limit:
        raise ValueError(f"dimension {n} exceeds brute-force limit {limit}")
    low = n // 2
    dense = q.to_dense()
    codes_low = np.arange(1 << low)
    codes_high = np.arange(1 << (n - low))
    xl = ((codes_low[:, None] >> np.arange(low)) & 1).astype(float)
    xh = ((codes_high[:, None] >> np.arange(n - low)) & 1).astype(float)
    ql, qh, cross = dense[:low, :low], dense[low:, low:], dense[:low, low:]
    e_low = np.einsum("ai,ij,aj->a", xl, ql, xl)
    e_high = np.einsum("ai,ij,aj->a", xh, qh, xh)
    table = (xl @ cross) @ xh.T
    table += e_low[:, None]
    table += e_high[None, :]
    table += q.offset
    return table.T.ravel()  # code = h * 2**low + l


def gray_code_iter(n: int) -> Iterator[tuple[int, Optional[int]]]:
    """Yield ``(code, flipped_bit)`` over all ``2**n`` codes, starting from 0."""
    code = 0
    yield code, None
    for g in range(1, 1 << n):
        bit = (g & -g).bit_length() - 1
        code ^= 1 << bit
        yield code, bit
