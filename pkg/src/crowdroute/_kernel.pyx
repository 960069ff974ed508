# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled expectimax kernel.

Mirrors ``_kernel_py`` operation for operation; build with floating-point
contraction disabled so the two agree bit for bit.
"""
from libc.stdlib cimport malloc, free

cdef double INF = float("inf")


cdef struct Ctx:
    int n
    double alpha
    double a_lo
    double a_hi
    double q_hh
    double q_lh
    double p_h
    double p_l
    double d_ell
    double rho
    bint perpetuity
    long long nodes
    # (horizon + 1) levels of n doubles each; level d holds children of a depth-d node
    double* ell_buf
    double* x_buf
    double* en_buf
    double* xn_buf


cdef double _node(Ctx* c, int depth, double ell0, double* ell, double* x) noexcept nogil:
    cdef int n = c.n
    cdef int j, k, a, first
    cdef double m, xj, s0, lo, best, imm, q
    cdef double* en
    cdef double* xn
    c.nodes += 1
    if depth == 0:
        if not c.perpetuity:
            return 0.0
        m = ell0
        for j in range(n):
            if ell[j] < m:
                m = ell[j]
        return m / (1.0 - c.rho)

    en = c.en_buf + depth * n
    xn = c.xn_buf + depth * n
    for j in range(n):
        xj = x[j]
        en[j] = (xj * c.a_hi + (1.0 - xj) * c.a_lo) * ell[j]
        xn[j] = xj * c.q_hh + (1.0 - xj) * c.q_lh
    s0 = c.alpha * ell0

    first = 0
    lo = ell0
    for j in range(n):
        if ell[j] < lo:
            lo = ell[j]
            first = j + 1

    best = INF
    for k in range(-1, n + 1):
        if k == -1:
            a = first
        elif k == first:
            continue
        else:
            a = k
        if a == 0:
            imm = ell0
        else:
            imm = ell[a - 1]
        if imm >= best:
            continue
        q = _q_action(c, a, depth, ell0, ell, x, en, xn, s0)
        if q < best:
            best = q
    return best


cdef double _q_action(Ctx* c, int a, int depth, double ell0, double* ell, double* x,
                      double* en, double* xn, double s0) noexcept nogil:
    cdef int n = c.n
    cdef int i, j
    cdef double xi, imm, p1, num, den, xp, v1, v0
    cdef double* ce = c.ell_buf + depth * n
    cdef double* cx = c.x_buf + depth * n
    if a == 0:
        for j in range(n):
            ce[j] = en[j]
            cx[j] = xn[j]
        return ell0 + c.rho * _node(c, depth - 1, s0 + c.d_ell, ce, cx)

    i = a - 1
    xi = x[i]
    imm = ell[i]
    p1 = xi * c.p_h + (1.0 - xi) * c.p_l
    for j in range(n):
        ce[j] = en[j]
        cx[j] = xn[j]

    v1 = 0.0
    if p1 > 0.0:
        num = xi * c.p_h
        den = num + (1.0 - xi) * c.p_l
        if den > 0.0:
            xp = num / den
        else:
            xp = xi
        ce[i] = (xp * c.a_hi + (1.0 - xp) * c.a_lo) * imm + c.d_ell
        cx[i] = xp * c.q_hh + (1.0 - xp) * c.q_lh
        v1 = _node(c, depth - 1, s0, ce, cx)
    v0 = 0.0
    if p1 < 1.0:
        # the y=1 subtree may have reused this level's buffer only below us
        num = xi * (1.0 - c.p_h)
        den = num + (1.0 - xi) * (1.0 - c.p_l)
        if den > 0.0:
            xp = num / den
        else:
            xp = xi
        ce[i] = (xp * c.a_hi + (1.0 - xp) * c.a_lo) * imm + c.d_ell
        cx[i] = xp * c.q_hh + (1.0 - xp) * c.q_lh
        v0 = _node(c, depth - 1, s0, ce, cx)
    return imm + c.rho * (p1 * v1 + (1.0 - p1) * v0)


cdef int _init(Ctx* c, int horizon, object ell, object x, tuple prm, bint perpetuity) except -1:
    cdef int n = len(ell)
    cdef int j
    cdef size_t size = <size_t>(horizon + 1) * <size_t>n
    c.n = n
    c.alpha, c.a_lo, c.a_hi, c.q_hh, c.q_lh, c.p_h, c.p_l, c.d_ell, c.rho = prm
    c.perpetuity = perpetuity
    c.nodes = 0
    c.ell_buf = <double*>malloc(size * sizeof(double))
    c.x_buf = <double*>malloc(size * sizeof(double))
    c.en_buf = <double*>malloc(size * sizeof(double))
    c.xn_buf = <double*>malloc(size * sizeof(double))
    if not (c.ell_buf and c.x_buf and c.en_buf and c.xn_buf):
        _release(c)
        raise MemoryError()
    return 0


cdef void _release(Ctx* c) noexcept:
    free(c.ell_buf)
    free(c.x_buf)
    free(c.en_buf)
    free(c.xn_buf)
    c.ell_buf = NULL
    c.x_buf = NULL
    c.en_buf = NULL
    c.xn_buf = NULL


def root_q_values(int horizon, double ell0, ell, x, tuple prm, bint perpetuity):
    """Q-value of every action at the root, plus the number of nodes visited."""
    cdef Ctx c
    cdef int n = len(ell)
    cdef int a, j
    cdef double s0, xj
    cdef double* root_ell
    cdef double* root_x
    cdef double* en
    cdef double* xn
    cdef list qs = []
    cdef double q
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    # one extra level so the root's own children have a buffer
    _init(&c, horizon + 1, ell, x, prm, perpetuity)
    try:
        root_ell = c.ell_buf + (horizon + 1) * n
        root_x = c.x_buf + (horizon + 1) * n
        en = c.en_buf + (horizon + 1) * n
        xn = c.xn_buf + (horizon + 1) * n
        for j in range(n):
            root_ell[j] = ell[j]
            root_x[j] = x[j]
        for j in range(n):
            xj = root_x[j]
            en[j] = (xj * c.a_hi + (1.0 - xj) * c.a_lo) * root_ell[j]
            xn[j] = xj * c.q_hh + (1.0 - xj) * c.q_lh
        s0 = c.alpha * ell0
        c.nodes = 1
        for a in range(n + 1):
            with nogil:
                q = _q_action(&c, a, horizon, ell0, root_ell, root_x, en, xn, s0)
            qs.append(q)
        return qs, c.nodes
    finally:
        _release(&c)


def state_value(int depth, double ell0, ell, x, tuple prm, bint perpetuity):
    """Optimal value with ``depth`` decisions left (``depth=0`` is the terminal)."""
    cdef Ctx c
    cdef int n = len(ell)
    cdef int j
    cdef double v
    cdef double* root_ell
    cdef double* root_x
    if depth < 0:
        raise ValueError("depth must be >= 0")
    _init(&c, depth + 1, ell, x, prm, perpetuity)
    try:
        root_ell = c.ell_buf + (depth + 1) * n
        root_x = c.x_buf + (depth + 1) * n
        for j in range(n):
            root_ell[j] = ell[j]
            root_x[j] = x[j]
        with nogil:
            v = _node(&c, depth, ell0, root_ell, root_x)
        return v, c.nodes
    finally:
        _release(&c)
