"""
numba kernels behind the exponential sums.

Reductions run over fixed blocks of `BLOCK_SIZE` terms: each block is
summed with Neumaier compensation (blocks in parallel), and the block
totals are then combined sequentially in index order, so results are
bit-identical regardless of thread count.
"""

from typing import Optional, Tuple

import numpy as np
from numba import njit, prange

from moblab.constants import BLOCK_SIZE


@njit(cache=True)
def neumaier_sum(values: np.ndarray) -> float:
    total = 0.0
    correction = 0.0
    for value in values:
        t = total + value
        if abs(total) >= abs(value):
            correction += (total - t) + value
        else:
            correction += (value - t) + total
        total = t
    return total + correction


@njit(parallel=True, cache=True)
def block_sums(values: np.ndarray, block: int) -> np.ndarray:
    n_values = values.size
    n_blocks = (n_values + block - 1) // block
    sums = np.zeros(n_blocks)
    for index in prange(n_blocks):
        lo = index * block
        hi = min(lo + block, n_values)
        sums[index] = neumaier_sum(values[lo:hi])
    return sums


def compensated_sum(values: np.ndarray, block: int = BLOCK_SIZE) -> float:
    """
    Deterministic compensated sum of a float64 array.

    Parameters
    ----------
    values : np.ndarray
        1D array of float64
    block : int, optional
        Fixed block length, by default BLOCK_SIZE

    Returns
    -------
    float
        Sum of `values`
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    if values.size == 0:
        return 0.0
    return neumaier_sum(block_sums(values, block))


@njit(parallel=True, cache=True)
def unit_terms(
    phases: np.ndarray, weights_re: np.ndarray, weights_im: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """ Real and imaginary parts of w_n * e(phase_n). """
    n_terms = phases.size
    real = np.empty(n_terms)
    imag = np.empty(n_terms)
    for index in prange(n_terms):
        angle = 2.0 * np.pi * phases[index]
        c = np.cos(angle)
        s = np.sin(angle)
        real[index] = weights_re[index] * c - weights_im[index] * s
        imag[index] = weights_re[index] * s + weights_im[index] * c
    return real, imag


def weighted_unit_sum(
    phases: np.ndarray, weights: Optional[np.ndarray] = None, block: int = BLOCK_SIZE
) -> complex:
    """
    Sum of w_n * e(phase_n) with deterministic compensated
    accumulation. Unit weights are used when `weights` is None.
    """
    phases = np.ascontiguousarray(phases, dtype=np.float64)
    if weights is None:
        weights_re = np.ones_like(phases)
        weights_im = np.zeros_like(phases)
    else:
        weights = np.asarray(weights)
        weights_re = np.ascontiguousarray(weights.real, dtype=np.float64)
        weights_im = np.ascontiguousarray(
            weights.imag if np.iscomplexobj(weights) else np.zeros(weights.shape), dtype=np.float64
        )
    real, imag = unit_terms(phases, weights_re, weights_im)
    return complex(compensated_sum(real, block), compensated_sum(imag, block))


def unit_vector(phases: np.ndarray) -> np.ndarray:
    """ e(phase_n) as a complex128 array. """
    phases = np.ascontiguousarray(phases, dtype=np.float64)
    real, imag = unit_terms(phases, np.ones_like(phases), np.zeros_like(phases))
    return real + 1j * imag


def complex_sum(values: np.ndarray, block: int = BLOCK_SIZE) -> complex:
    values = np.asarray(values, dtype=np.complex128)
    return complex(compensated_sum(values.real, block), compensated_sum(values.imag, block))


@njit(parallel=True, cache=True)
def rational_residues(lo: int, count: int, k: int, a: int, q: int) -> np.ndarray:
    """
    (a * n^k) mod q for n = lo + 1, ..., lo + count; requires q < 2^31
    so every product fits in int64.
    """
    residues = np.empty(count, dtype=np.int64)
    for index in prange(count):
        n = (lo + 1 + index) % q
        r = 1 % q
        for _ in range(k):
            r = (r * n) % q
        residues[index] = (r * a) % q
    return residues
