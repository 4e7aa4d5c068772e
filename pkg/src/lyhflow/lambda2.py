"""Two-form algebra over the degenerate space-time metric.

The degenerate contravariant metric ``gt`` (zero time row/column) induces an
inner product and a Lie bracket on 2-forms,

    <S, T>    = gt^{ik} gt^{jl} S_ij T_kl,
    [S, T]_ij = gt^{kl} (S_ik T_lj - T_ik S_lj),

with structure constants relative to the basis dx^a ^ dx^b (a < b, ordered
lexicographically) given by

    C_ij^{ab,cd} = delta_i^a delta_j^d gt^{bc} - delta_i^c delta_j^b gt^{ad}.

The bilinear operation # on curvature-type tensors, and the square, are

    (F # G)_{ijkl} = F_{abcd} G_{pqrs} C_ij^{ab,pq} C_lk^{cd,rs}
    (F^2)_{ijkl}   = gt^{ad} gt^{bc} F_{ijab} F_{cdkl},

where all sums run unrestricted over 0..n.  ``sharp_bruteforce`` recomputes #
directly from basis brackets as an independent oracle.
"""

from __future__ import annotations

import itertools

import numpy as np


def ordered_pairs(dim):
    """Lexicographic list of index pairs (a, b) with a < b."""
    return [(a, b) for a in range(dim) for b in range(a + 1, dim)]


def degenerate_inverse(g_inv_spatial):
    """Embed a spatial inverse metric as the degenerate (n+1)-dim array."""
    n = g_inv_spatial.shape[0]
    gt = np.zeros((n + 1, n + 1))
    gt[1:, 1:] = g_inv_spatial
    return gt


def inner(S, T, gt):
    return float(np.einsum("ik,jl,ij,kl->", gt, gt, S, T))


def bracket(S, T, gt):
    return np.einsum("kl,ik,lj->ij", gt, S, T) - np.einsum("kl,ik,lj->ij", gt, T, S)


def basis_two_form(dim, a, b):
    E = np.zeros((dim, dim))
    E[a, b] = 1.0
    E[b, a] = -1.0
    return E


def structure_constants(gt):
    """C[(ij), (ab), (cd)] for ordered pairs, from the closed formula."""
    dim = gt.shape[0]
    pairs = ordered_pairs(dim)
    C = np.zeros((len(pairs), len(pairs), len(pairs)))
    for P, (i, j) in enumerate(pairs):
        for Q, (a, b) in enumerate(pairs):
            for S, (c, d) in enumerate(pairs):
                C[P, Q, S] = (
                    (1.0 if (i == a and j == d) else 0.0) * gt[b, c]
                    - (1.0 if (i == c and j == b) else 0.0) * gt[a, d]
                )
    return pairs, C


def structure_constants_bruteforce(gt):
    """Same table extracted from brackets of basis 2-forms."""
    dim = gt.shape[0]
    pairs = ordered_pairs(dim)
    C = np.zeros((len(pairs), len(pairs), len(pairs)))
    for Q, (a, b) in enumerate(pairs):
        Ea = basis_two_form(dim, a, b)
        for S, (c, d) in enumerate(pairs):
            Ec = basis_two_form(dim, c, d)
            br = bracket(Ea, Ec, gt)
            for P, (i, j) in enumerate(pairs):
                C[P, Q, S] = br[i, j]
    return pairs, C


def structure_constant_single(gt, i, j, a, b, c, d):
    """C_ij^{ab,cd} at arbitrary (not necessarily ordered) index values."""
    return (1.0 if (i == a and j == d) else 0.0) * gt[b, c] - (
        1.0 if (i == c and j == b) else 0.0
    ) * gt[a, d]


def sharp(F, G, gt):
    """(F # G)_{ijkl}, unrestricted-sum form of the structure-constant pairing."""
    t1 = np.einsum("bp,dr,ibld,pjrk->ijkl", gt, gt, F, G)
    t2 = np.einsum("bp,cs,ibck,pjls->ijkl", gt, gt, F, G)
    t3 = np.einsum("aq,dr,ajld,iqrk->ijkl", gt, gt, F, G)
    t4 = np.einsum("aq,cs,ajck,iqls->ijkl", gt, gt, F, G)
    return t1 - t2 - t3 + t4


def square(F, gt):
    """(F^2)_{ijkl} = gt^{ad} gt^{bc} F_{ijab} F_{cdkl}."""
    return np.einsum("ad,bc,ijab,cdkl->ijkl", gt, gt, F, F)


def sharp_bruteforce(F, G, gt):
    """# recomputed from pair-basis brackets (independent oracle).

    Writing F = sum_{A,C} F_AC E_A (x) E_C over ordered pairs, the paired
    contraction is sum F_AC G_BD [E_A, E_B]_ij [E_C, E_D]_lk.
    """
    dim = gt.shape[0]
    pairs = ordered_pairs(dim)
    brackets = {}
    for Q, (a, b) in enumerate(pairs):
        Ea = basis_two_form(dim, a, b)
        for S, (c, d) in enumerate(pairs):
            brackets[(Q, S)] = bracket(Ea, basis_two_form(dim, c, d), gt)
    out = np.zeros((dim,) * 4)
    for A, pa in enumerate(pairs):
        for C, pc in enumerate(pairs):
            FAC = F[pa[0], pa[1], pc[0], pc[1]]
            if FAC == 0.0:
                continue
            for B, pb in enumerate(pairs):
                for D, pd in enumerate(pairs):
                    GBD = G[pb[0], pb[1], pd[0], pd[1]]
                    if GBD == 0.0:
                        continue
                    first = brackets[(A, B)]
                    second = brackets[(C, D)]
                    # out_{ijkl} += F G [E_A,E_B]_ij [E_C,E_D]_lk
                    out += FAC * GBD * np.einsum("ij,lk->ijkl", first, second)
    return out


def split_bracket(X, V, Y, W, ginv_spatial):
    """[X + V, Y + W] = [X, Y] + (V . Y - W . X) under the splitting.

    Spatial 2-forms X, Y and spatial 1-forms V, W; interior products are
    taken with the indices raised by the spatial inverse metric.
    """
    br = bracket(X, Y, ginv_spatial)
    v_into_y = np.einsum("kl,k,lj->j", ginv_spatial, V, Y)
    w_into_x = np.einsum("kl,k,lj->j", ginv_spatial, W, X)
    return br, v_into_y - w_into_x


def embed_split(X, V):
    """Assemble the space-time 2-form with spatial block X and time row V."""
    n = X.shape[0]
    S = np.zeros((n + 1, n + 1))
    S[1:, 1:] = X
    S[0, 1:] = V
    S[1:, 0] = -V
    return S


def vee_apply(L, T):
    """Index-substitution action of a (1,1) coefficient table on a tensor.

    ``L[a, m]`` multiplies the copy of ``T`` whose slot value ``a`` has been
    replaced by ``m``; summed over every covariant slot of ``T``.
    """
    out = np.zeros_like(T)
    rank = T.ndim
    for slot in range(rank):
        out += np.tensordot(L, T, axes=(1, slot)).transpose(
            _restore_axes(rank, slot)
        )
    return out


def _restore_axes(rank, slot):
    # tensordot puts the substituted slot first; move it back
    axes = list(range(1, rank))
    axes.insert(slot, 0)
    return axes
