"""Compiled inner loops of the Lindblad integrator.

The state is stored in a basis sorted by an integer grade ``N`` that every
Hamiltonian term conserves and every jump operator lowers by a fixed amount.
The density matrix then splits into blocks ``(N, N')``, and blocks with the
same ``D = N - N'`` form a class that evolves independently of all others.
Only classes with ``D >= 0`` are integrated; the rest follow from
Hermiticity.  A single class spanning the whole matrix is the ungraded
fallback and needs no special casing.

Because classes are independent, one RK4 step can run all four stages on a
class before moving to the next, which keeps the working set in cache.

Jump operators enter as *layers*: each layer has at most one non-zero per
row, stored as ``src[i]`` (column, or -1) and ``wts[i]`` (value with the
square root of the rate folded in).
"""
import numba as nb
import numpy as np

# reassociation and FMA contraction, but keep NaN/inf semantics so that
# non-finite states are still caught
FAST = {"contract", "reassoc", "nsz", "arcp"}


@nb.njit(cache=True, fastmath=FAST)
def _block_stage(r0, r1, c0, c1, data, indptr, indices, S, src, srcp, wts, cwp, pairs,
                 rho, acc, nxt, w, a, first, last, T, Z, krow):
    dr = r1 - r0
    dc = c1 - c0
    # T = S_block^T
    for i in range(dr):
        srow = S[r0 + i, c0:c1]
        for c in range(dc):
            T[c, i] = srow[c]
    # Z = conj(H_cols) T, so that (S H^dag)[i, c] = Z[c, i]
    for c in range(dc):
        zc = Z[c]
        for q in range(dr):
            zc[q] = 0.0
        for p in range(indptr[c0 + c], indptr[c0 + c + 1]):
            v = np.conj(data[p])
            tj = T[indices[p] - c0]
            for q in range(dr):
                zc[q] += v * tj[q]
    for i in range(dr):
        row = r0 + i
        for c in range(dc):
            krow[c] = 0.0
        for p in range(indptr[row], indptr[row + 1]):
            v = data[p]
            sj = S[indices[p], c0:c1]
            for c in range(dc):
                krow[c] += v * sj[c]
        # -i (H S - S H^dag)
        for c in range(dc):
            x = krow[c]
            z = Z[c, i]
            krow[c] = complex(x.imag - z.imag, z.real - x.real)
        for q in range(pairs.shape[0]):
            r = pairs[q, 0]
            s = pairs[q, 1]
            pi = src[r, row]
            if pi < 0:
                continue
            wi = wts[r, row]
            sp_ = S[pi]
            cs = cwp[s, c0:c1]
            ix = srcp[s, c0:c1]
            for c in range(dc):
                krow[c] += wi * cs[c] * sp_[ix[c]]
        ri = rho[row, c0:c1]
        ai = acc[row, c0:c1]
        if first:
            for c in range(dc):
                ai[c] = ri[c] + w * krow[c]
        else:
            for c in range(dc):
                ai[c] += w * krow[c]
        if not last:
            ni = nxt[row, c0:c1]
            for c in range(dc):
                ni[c] = ri[c] + a * krow[c]


@nb.njit(cache=True, fastmath=FAST)
def rk4_step(rho, acc, buf0, buf1, d0, dm, d1, indptr, indices, src, srcp, wts, cwp, pairs,
             blocks, class_ptr, h, T, Z, krow):
    """One classical RK4 step over every stored block; the result lands in ``acc``."""
    for cl in range(class_ptr.shape[0] - 1):
        b_lo = class_ptr[cl]
        b_hi = class_ptr[cl + 1]
        for stage in range(4):
            if stage == 0:
                data, S, nxt, w, a = d0, rho, buf0, h / 6, h / 2
            elif stage == 1:
                data, S, nxt, w, a = dm, buf0, buf1, h / 3, h / 2
            elif stage == 2:
                data, S, nxt, w, a = dm, buf1, buf0, h / 3, h
            else:
                data, S, nxt, w, a = d1, buf0, buf1, h / 6, 0.0
            for b in range(b_lo, b_hi):
                _block_stage(blocks[b, 0], blocks[b, 1], blocks[b, 2], blocks[b, 3],
                             data, indptr, indices, S, src, srcp, wts, cwp, pairs,
                             rho, acc, nxt, w, a, stage == 0, stage == 3, T, Z, krow)


@nb.njit(cache=True)
def symmetrize_diagonal_blocks(acc, diag_blocks):
    """Replace each diagonal block by its Hermitian part.

    Returns (max |A - A^dag| before symmetrization, real trace).
    """
    worst = 0.0
    tr = 0.0
    for b in range(diag_blocks.shape[0]):
        lo = diag_blocks[b, 0]
        hi = diag_blocks[b, 1]
        for i in range(lo, hi):
            for c in range(i, hi):
                x = acc[i, c]
                y = np.conj(acc[c, i])
                d = abs(x - y)
                if d > worst:
                    worst = d
                m = 0.5 * (x + y)
                acc[i, c] = m
                acc[c, i] = np.conj(m)
            tr += acc[i, i].real
    return worst, tr


@nb.njit(cache=True)
def fill_upper(rho, blocks):
    """Complete the matrix from its stored ``D >= 0`` blocks (off-diagonal ones)."""
    for b in range(blocks.shape[0]):
        r0, r1, c0, c1 = blocks[b, 0], blocks[b, 1], blocks[b, 2], blocks[b, 3]
        if r0 == c0:
            continue
        for i in range(r0, r1):
            for c in range(c0, c1):
                rho[c, i] = np.conj(rho[i, c])


@nb.njit(cache=True)
def blocks_bounded(rho, blocks, bound):
    """False if any stored entry is non-finite or exceeds ``bound`` in modulus."""
    for b in range(blocks.shape[0]):
        for i in range(blocks[b, 0], blocks[b, 1]):
            for c in range(blocks[b, 2], blocks[b, 3]):
                v = rho[i, c]
                if not (np.isfinite(v.real) and np.isfinite(v.imag)) or abs(v) > bound:
                    return False
    return True
