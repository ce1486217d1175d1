"""Structured forward/adjoint maps and second-moment expectations.

All vectorizations are column-major. With f = vec(F), g = vec(G),
h = vec(H) and y = vec(Y), the bilinear measurement decomposes three ways:

    vec(A_B G A_I^H (S o A_I F X) + A_B H X)
        = A_fg f + b_fh  (linear in f for fixed G, H)
        = A_gf g + b_gh  (linear in g for fixed F, H)
        = A_h  h + b_hfg (linear in h for fixed F, G)

where A_fg = (I_T kron A_B G A_I^H) diag(vec S)(X^T kron A_I),
A_gf = ((S^T o X^T F^T A_I^T) A_I^* kron A_B) and A_h = X^T kron A_B.
Everything here is assembled slot by slot so that no (N T)-row matrix is
ever materialized: per-slot blocks of diag(vec S)(X^T kron A_I) factor as
x_t^T kron diag(s_t) A_I, which turns the big Gram expectations into
T-batched N x N contractions (memory O(N^2 T) worst case).

The two posterior Gram expectations needed by the factor updates are

    <A_fg^H A_fg> = sum_t (x_t^* x_t^T) kron (A_I^H S_t^H W S_t A_I),
        W = A_I <G^H A_B^H A_B G> A_I^H,
    <A_gf^H A_gf> = conj(A_I^H D A_I) kron (A_B^H A_B),
        D_ij = sum_t s_t[i] [A_I E[F x_t x_t^H F^H] A_I^H]_ij s_t[j]^*,

with the inner G and F contractions taken against the full second-moment
matrices C + m m^H. Dense constructors of all operators are provided for
small-instance oracle tests and for the baseline sensing model.
"""

import numpy as np

from .util import hermitize, unvec, vec


# ---------------------------------------------------------------------------
# forward / adjoint maps (matrix-shaped arguments, slot-batched internally)


def reflected_forward(dictionary, protocol, f_mat, g_mat):
    """vec(A_B G A_I^H (S o A_I F X)) for given angular F (N_g x K), G (M_g x N_g)."""
    e = protocol.s * (dictionary.a_irs @ f_mat @ protocol.x)
    return vec(dictionary.a_bs @ g_mat @ (dictionary.a_irs.conj().T @ e))


def direct_forward(dictionary, protocol, h_mat):
    """vec(A_B H X) = A_h h."""
    return vec(dictionary.a_bs @ h_mat @ protocol.x)


def sensor_forward(dictionary, protocol, f_mat):
    """Omega o (A_I F X) as an N x T matrix; its vec is A_f f (= b_uf)."""
    return protocol.omega * (dictionary.a_irs @ f_mat @ protocol.x)


def afg_adjoint(dictionary, protocol, g_mat, r_mat):
    """<A_fg>^H vec(R) as an N_g x K matrix, for G fixed at g_mat."""
    q = dictionary.a_irs @ g_mat.conj().T @ dictionary.a_bs.conj().T @ r_mat
    return dictionary.a_irs.conj().T @ (protocol.s.conj() * q) @ protocol.x.conj().T


def agf_adjoint(dictionary, protocol, f_mat, r_mat):
    """<A_gf>^H vec(R) as an M_g x N_g matrix, for F fixed at f_mat."""
    e = protocol.s * (dictionary.a_irs @ f_mat @ protocol.x)
    return dictionary.a_bs.conj().T @ r_mat @ e.conj().T @ dictionary.a_irs


def ah_adjoint(dictionary, protocol, r_mat):
    """A_h^H vec(R) as an M_g x K matrix."""
    return dictionary.a_bs.conj().T @ r_mat @ protocol.x.conj().T


def sensor_adjoint(dictionary, protocol, r_mat):
    """A_f^H vec(R) as an N_g x K matrix."""
    return dictionary.a_irs.conj().T @ (protocol.omega * r_mat) @ protocol.x.conj().T


# ---------------------------------------------------------------------------
# constant Grams


def sensor_gram(dictionary, protocol) -> np.ndarray:
    """A_f^H A_f, size N_g K; constant across iterations."""
    a_i = dictionary.a_irs
    q = np.einsum("nt,ng,nh->tgh", protocol.omega, a_i.conj(), a_i, optimize=True)
    x = protocol.x
    j = np.einsum("at,bt,tgh->agbh", x.conj(), x, q, optimize=True)
    k, n_g = x.shape[0], a_i.shape[1]
    return hermitize(j.reshape(k * n_g, k * n_g))


def pilot_gram(dictionary, protocol) -> np.ndarray:
    """A_h^H A_h = (X^* X^T) kron (A_B^H A_B), size M_g K."""
    xc = protocol.x.conj() @ protocol.x.T
    r_b = dictionary.a_bs.conj().T @ dictionary.a_bs
    return hermitize(np.kron(xc, r_b))


# ---------------------------------------------------------------------------
# posterior Gram expectations (appendix-style contractions)


def second_moment(m, c_blocks):
    """C + m m^H with C given as a list of contiguous diagonal blocks (or None)."""
    n = m.size
    out = np.outer(m, m.conj())
    if c_blocks is not None:
        start = 0
        for blk in c_blocks:
            stop = start + blk.shape[0]
            out[start:stop, start:stop] += blk
            start = stop
        if start != n:
            raise ValueError("covariance blocks do not tile the vector")
    return out


def expect_gram_g(dictionary, m_g, c_g_blocks) -> np.ndarray:
    """<G^H A_B^H A_B G> (N_g x N_g) from the second moment of vec(G)."""
    m_gd, n_g = dictionary.m_g, dictionary.n_g
    m2 = second_moment(m_g, c_g_blocks)
    t4 = m2.reshape(m_gd, n_g, m_gd, n_g, order="F")
    r_b = dictionary.a_bs.conj().T @ dictionary.a_bs
    return np.einsum("ab,bqap->pq", r_b, t4, optimize=True)


def expect_afgh_afg(m_g, c_g_blocks, dictionary, protocol) -> np.ndarray:
    """<A_fg^H A_fg>, Hermitian PSD of size N_g K."""
    a_i = dictionary.a_irs
    w = a_i @ expect_gram_g(dictionary, m_g, c_g_blocks) @ a_i.conj().T
    # per-slot P_t = diag(s_t) A_I, batched over t
    p = a_i[None, :, :] * protocol.s.T[:, :, None]
    wp = np.einsum("nm,tmg->tng", w, p, optimize=True)
    q = np.einsum("tng,tnh->tgh", p.conj(), wp, optimize=True)
    x = protocol.x
    j = np.einsum("at,bt,tgh->agbh", x.conj(), x, q, optimize=True)
    k, n_g = x.shape[0], a_i.shape[1]
    return hermitize(j.reshape(k * n_g, k * n_g))


def expect_agfh_agf(m_f, c_f_blocks, dictionary, protocol, return_factors: bool = False):
    """<A_gf^H A_gf> = conj(A_I^H D A_I) kron (A_B^H A_B), size M_g N_g.

    With return_factors the two Kronecker factors are returned instead of
    the assembled matrix.
    """
    a_i = dictionary.a_irs
    n_g, k = dictionary.n_g, protocol.x.shape[0]
    m2 = second_moment(m_f, c_f_blocks)
    t4 = m2.reshape(n_g, k, n_g, k, order="F")
    x = protocol.x
    c_slots = np.einsum("kt,lt,nkml->tnm", x, x.conj(), t4, optimize=True)
    aw = np.einsum("in,tnm->tim", a_i, c_slots, optimize=True)
    w = np.einsum("tim,jm->tij", aw, a_i.conj(), optimize=True)
    d = np.einsum("tij,it,jt->ij", w, protocol.s, protocol.s.conj(), optimize=True)
    first = hermitize((a_i.conj().T @ d @ a_i).conj())
    r_b = hermitize(dictionary.a_bs.conj().T @ dictionary.a_bs)
    if return_factors:
        return first, r_b
    return np.kron(first, r_b)


def expect_reflected_energy(dictionary, protocol, m_f, c_f_blocks, m_g, c_g_blocks) -> float:
    """E ||A_fg f||^2 = tr(<A_fg^H A_fg> M2_f); used by the free energy."""
    j = expect_afgh_afg(m_g, c_g_blocks, dictionary, protocol)
    m2f = second_moment(m_f, c_f_blocks)
    return float(np.real(np.sum(j * m2f.T)))


# ---------------------------------------------------------------------------
# dense constructors (oracle tests and the baseline sensing model)


def dense_bf(dictionary, protocol) -> np.ndarray:
    """diag(vec S)(X^T kron A_I), size NT x N_g K."""
    full = np.kron(protocol.x.T, dictionary.a_irs)
    return vec(protocol.s)[:, None] * full


def dense_af(dictionary, protocol) -> np.ndarray:
    """diag(vec Omega)(X^T kron A_I), size NT x N_g K."""
    full = np.kron(protocol.x.T, dictionary.a_irs)
    return vec(protocol.omega)[:, None] * full


def dense_afg(dictionary, protocol, g_mat) -> np.ndarray:
    """A_fg for fixed G, size MT x N_g K."""
    t = protocol.x.shape[1]
    core = dictionary.a_bs @ g_mat @ dictionary.a_irs.conj().T
    return np.kron(np.eye(t), core) @ dense_bf(dictionary, protocol)


def dense_agf(dictionary, protocol, f_mat) -> np.ndarray:
    """A_gf for fixed F, size MT x M_g N_g."""
    e = protocol.s * (dictionary.a_irs @ f_mat @ protocol.x)
    return np.kron(e.T @ dictionary.a_irs.conj(), dictionary.a_bs)


def dense_ah(dictionary, protocol) -> np.ndarray:
    """A_h = X^T kron A_B, size MT x M_g K."""
    return np.kron(protocol.x.T, dictionary.a_bs)


def expect_gram_exhaustive(op_of_basis, m, c_blocks) -> np.ndarray:
    """Brute-force E[A(v)^H A(v)] for an operator linear in v.

    op_of_basis(i) must return the dense operator obtained by setting
    v = e_i. Exponential in nothing but still O(n^2) operator pairs, so only
    for tiny instances; serves as the independent oracle for the structured
    expectations above.
    """
    n = m.size
    m2 = second_moment(m, c_blocks)
    ops = [op_of_basis(i) for i in range(n)]
    cols = ops[0].shape[1]
    out = np.zeros((cols, cols), dtype=complex)
    for a in range(n):
        for b in range(n):
            # E[v_a^* v_b] = M2[b, a]
            out += m2[b, a] * (ops[a].conj().T @ ops[b])
    return out
