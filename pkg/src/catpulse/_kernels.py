"""Numba kernels for the Lindblad right-hand side and the Runge-Kutta stages.

Operators are CSR triples ``(indptr, indices, data)``. Products of the form
``rho @ A^dag`` are evaluated row by row of ``rho`` so no transposed copy is
ever formed.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def csr_matvec(indptr, indices, data, x, out):
    for i in range(indptr.size - 1):
        acc = 0.0j
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        out[i] = acc


@njit(cache=True, nogil=True)
def lindblad_rhs(rho, h_ptr, h_idx, h_dat, l_ptr, l_idx, l_dat, rows, rows_ptr, n_jumps, out, x, z):
    """out = -i (Hnh rho - rho Hnh^dag) + sum_m L_m rho L_m^dag for Hermitian ``rho``.

    ``h_*`` is the non-Hermitian Hamiltonian ``H - i/2 sum L^dag L``;
    ``l_*`` stacks the ``n_jumps`` jump operators vertically and
    ``rows[rows_ptr[m]:rows_ptr[m + 1]]`` lists the sorted nonempty rows of
    jump ``m``. Only the upper triangle is computed; the result is mirrored.
    ``x`` is a ``d x d`` and ``z`` a length-``d`` scratch array.
    """
    d = rho.shape[0]
    for i in range(d):
        for k in range(d):
            x[i, k] = 0.0
        for p in range(h_ptr[i], h_ptr[i + 1]):
            a = h_dat[p]
            j = h_idx[p]
            for k in range(d):
                x[i, k] += a * rho[j, k]
    # rho Hnh^dag = (Hnh rho)^dag because rho is Hermitian
    for i in range(d):
        for k in range(i, d):
            out[i, k] = -1j * x[i, k] + 1j * np.conj(x[k, i])
    for m in range(n_jumps):
        base = m * d
        r0 = rows_ptr[m]
        r1 = rows_ptr[m + 1]
        for a_pos in range(r0, r1):
            i = rows[a_pos]
            for k in range(d):
                z[k] = 0.0
            for p in range(l_ptr[base + i], l_ptr[base + i + 1]):
                a = l_dat[p]
                j = l_idx[p]
                for k in range(d):
                    z[k] += a * rho[j, k]
            for b_pos in range(a_pos, r1):
                k = rows[b_pos]
                acc = 0.0j
                for q in range(l_ptr[base + k], l_ptr[base + k + 1]):
                    acc += z[l_idx[q]] * np.conj(l_dat[q])
                out[i, k] += acc
    for i in range(d):
        out[i, i] = out[i, i].real
        for k in range(i + 1, d):
            out[k, i] = np.conj(out[i, k])


@njit(cache=True, nogil=True)
def stage_input(y, K, coeffs, n, h, out):
    """out = y + h * sum_{j<n} coeffs[j] K[j] on flattened arrays."""
    for idx in range(y.size):
        out[idx] = y[idx]
    for j in range(n):
        c = h * coeffs[j]
        if c != 0.0:
            for idx in range(y.size):
                out[idx] += c * K[j, idx]


@njit(cache=True, nogil=True)
def dp_finish(y, K, b, e, h, rtol, atol, y_new, err):
    """Fifth-order update into ``y_new``; returns the RMS-scaled error norm.

    ``err`` is a scratch array of the same size as ``y``.
    """
    size = y.size
    n = K.shape[0]
    total = 0.0
    for idx in range(size):
        a = y[idx]
        c = a
        r = 0.0j
        for j in range(n):
            kj = K[j, idx]
            c += h * b[j] * kj
            r += h * e[j] * kj
        y_new[idx] = c
        err[idx] = r
        m2 = max(a.real * a.real + a.imag * a.imag, c.real * c.real + c.imag * c.imag)
        sc = atol + rtol * np.sqrt(m2)
        total += (r.real * r.real + r.imag * r.imag) / (sc * sc)
    return np.sqrt(total / size)


@njit(cache=True, nogil=True)
def hermitize(a):
    d = a.shape[0]
    for i in range(d):
        a[i, i] = a[i, i].real
        for k in range(i + 1, d):
            v = 0.5 * (a[i, k] + np.conj(a[k, i]))
            a[i, k] = v
            a[k, i] = np.conj(v)


@njit(cache=True, nogil=True)
def master_stages(y, K, A, h, h_ptr, h_idx, h_all, l_ptr, l_idx, l_all, rows, rows_ptr, n_jumps, stage, x, z):
    """Runge-Kutta stages 1..6 of one step; ``K[0]`` must hold f(t, y).

    ``h_all[s - 1]`` and ``l_all[s - 1]`` are the operator data at stage ``s``.
    """
    d = y.shape[0]
    for s in range(1, K.shape[0]):
        # one pass over memory per stage
        for i in range(d):
            for k in range(d):
                acc = y[i, k]
                for j in range(s):
                    acc += h * A[s, j] * K[j, i, k]
                stage[i, k] = acc
        lindblad_rhs(stage, h_ptr, h_idx, h_all[s - 1], l_ptr, l_idx, l_all[s - 1], rows, rows_ptr, n_jumps,
                     K[s], x, z)
