# cython: language_level=3
"""Compiled tree kernels; bit-identical twin of ``_tree_py``.

Operation order (branch order, accumulation order, formula shapes) matches
the pure-Python fallback exactly; see that module's docstring for the
contract.  Compiled with -ffp-contract=off so no FMA contraction changes
results relative to the interpreter.
"""

from libc.math cimport INFINITY, exp, sqrt
from libc.stdlib cimport malloc, free

NAME = "cython"


cdef inline void _branch_weights(double ed, double eu, double* psi_d,
                                 double* psi_u) nogil:
    # at eu = inf the up weight is the exact limit 0 and the down branch
    # carries all mass
    cdef double denom
    if eu == INFINITY:
        psi_d[0] = 1.0
        psi_u[0] = 0.0
    else:
        denom = eu - ed
        psi_d[0] = (eu - 1.0) / denom
        psi_u[0] = (1.0 - ed) / denom


cdef inline double _sigma_initial(int kind, const double* p) nogil:
    cdef double s, floor
    if kind == 0:
        return p[0]
    s = sqrt(p[0])
    floor = p[2] if kind == 1 else p[3]
    return floor if s < floor else s


cdef inline double _sigma_next(int kind, const double* p, double sigma_prev,
                               double eps_prev) nogil:
    cdef double s2, s, floor
    if kind == 0:
        return p[0]
    s2 = p[0] + p[1] * (sigma_prev * eps_prev) * (sigma_prev * eps_prev)
    if kind == 2:
        s2 = s2 + p[2] * sigma_prev * sigma_prev
    s = sqrt(s2)
    floor = p[2] if kind == 1 else p[3]
    return floor if s < floor else s


cdef double _pwl(double x, const double* xs, const double* ys, int k,
                 double right_slope) nogil:
    cdef int i = 0
    if x <= xs[0]:
        return ys[0]
    if x >= xs[k - 1]:
        return ys[k - 1] + right_slope * (x - xs[k - 1])
    while i + 1 < k and xs[i + 1] <= x:
        i += 1
    return ys[i] + (ys[i + 1] - ys[i]) * (x - xs[i]) / (xs[i + 1] - xs[i])


cdef double _payoff(int pkind, double pa, const double* pxs, const double* pys,
                    int n_knots, double s_n, double path_sum,
                    double n_plus_1) nogil:
    cdef double d
    if pkind == 0:
        return pa
    if pkind == 1:
        d = s_n - pa
        return d if d > 0.0 else 0.0
    if pkind == 2:
        d = pa - s_n
        return d if d > 0.0 else 0.0
    if pkind == 3:
        d = path_sum / n_plus_1 - pa
        return d if d > 0.0 else 0.0
    if pkind == 4:
        d = pa - path_sum / n_plus_1
        return d if d > 0.0 else 0.0
    return _pwl(s_n, pxs, pys, n_knots, pa)


cdef void _tree_rec(int level, int n, double price, double prob, double path_sum,
                    double sigma_prev, double eps_prev,
                    const double* a, const int* vkinds, const double* vparams,
                    const double* eps_dn, const double* eps_up,
                    int pkind, double pa, const double* pxs, const double* pys,
                    int n_knots, double n_plus_1, double* acc) nogil:
    cdef double sigma, ed, eu, psi_d, psi_u, pd, pu
    if level == n:
        acc[0] += prob * _payoff(pkind, pa, pxs, pys, n_knots, price, path_sum,
                                 n_plus_1)
        return
    if level == 0:
        sigma = _sigma_initial(vkinds[0], vparams)
    else:
        sigma = _sigma_next(vkinds[level], vparams + 4 * level, sigma_prev,
                            eps_prev)
    ed = exp(sigma * eps_dn[level])
    eu = exp(sigma * eps_up[level])
    _branch_weights(ed, eu, &psi_d, &psi_u)
    if psi_d != 0.0:
        pd = price * (1.0 + a[level] * (ed - 1.0))
        _tree_rec(level + 1, n, pd, prob * psi_d, path_sum + pd, sigma,
                  eps_dn[level], a, vkinds, vparams, eps_dn, eps_up,
                  pkind, pa, pxs, pys, n_knots, n_plus_1, acc)
    if psi_u != 0.0:
        pu = price * (1.0 + a[level] * (eu - 1.0))
        _tree_rec(level + 1, n, pu, prob * psi_u, path_sum + pu, sigma,
                  eps_up[level], a, vkinds, vparams, eps_dn, eps_up,
                  pkind, pa, pxs, pys, n_knots, n_plus_1, acc)


cdef void _cached_rec(int level, int n, double price, double prob,
                      double path_sum, const double* psi_d, const double* psi_u,
                      const double* fd, const double* fu, const int* offs,
                      const int* pairs, int pkind, double pa,
                      const double* pxs, const double* pys, int n_knots,
                      double n_plus_1, double* acc) nogil:
    cdef int p
    cdef double pd, pu
    if level == n:
        acc[0] += prob * _payoff(pkind, pa, pxs, pys, n_knots, price, path_sum,
                                 n_plus_1)
        return
    p = offs[level] + pairs[level]
    if psi_d[p] != 0.0:
        pd = price * fd[p]
        _cached_rec(level + 1, n, pd, prob * psi_d[p], path_sum + pd,
                    psi_d, psi_u, fd, fu, offs, pairs, pkind, pa, pxs, pys,
                    n_knots, n_plus_1, acc)
    if psi_u[p] != 0.0:
        pu = price * fu[p]
        _cached_rec(level + 1, n, pu, prob * psi_u[p], path_sum + pu,
                    psi_d, psi_u, fd, fu, offs, pairs, pkind, pa, pxs, pys,
                    n_knots, n_plus_1, acc)


cdef class _Buffers:
    cdef double* a
    cdef int* vkinds
    cdef double* vparams
    cdef double* pxs
    cdef double* pys
    cdef int n
    cdef int n_knots

    def __cinit__(self, a, vkinds, vparams, pxs, pys):
        cdef int i, j
        self.n = len(a)
        self.n_knots = len(pxs) if pxs is not None else 0
        self.a = <double*>malloc(self.n * sizeof(double))
        self.vkinds = <int*>malloc(self.n * sizeof(int))
        self.vparams = <double*>malloc(4 * self.n * sizeof(double))
        self.pxs = <double*>malloc(max(self.n_knots, 1) * sizeof(double))
        self.pys = <double*>malloc(max(self.n_knots, 1) * sizeof(double))
        for i in range(self.n):
            self.a[i] = a[i]
            self.vkinds[i] = vkinds[i]
            for j in range(4):
                self.vparams[4 * i + j] = vparams[i][j]
        for i in range(self.n_knots):
            self.pxs[i] = pxs[i]
            self.pys[i] = pys[i]

    def __dealloc__(self):
        free(self.a)
        free(self.vkinds)
        free(self.vparams)
        free(self.pxs)
        free(self.pys)


def tree_expectation(double s0, a, vkinds, vparams, eps_dn, eps_up,
                     int pkind, double pa, pxs, pys):
    cdef _Buffers buf = _Buffers(a, vkinds, vparams, pxs, pys)
    cdef int n = buf.n
    cdef double* edn = <double*>malloc(max(n, 1) * sizeof(double))
    cdef double* eup = <double*>malloc(max(n, 1) * sizeof(double))
    cdef double acc = 0.0
    cdef int i
    for i in range(n):
        edn[i] = eps_dn[i]
        eup[i] = eps_up[i]
    _tree_rec(0, n, s0, 1.0, s0, 0.0, 0.0, buf.a, buf.vkinds, buf.vparams,
              edn, eup, pkind, pa, buf.pxs, buf.pys, buf.n_knots,
              <double>(n + 1), &acc)
    free(edn)
    free(eup)
    return acc


def scan_selections(double s0, a, vkinds, vparams, dn_cands, up_cands,
                    int pkind, double pa, pxs, pys):
    """Return (best value, best per-step (down, up) candidate indices)."""
    cdef _Buffers buf = _Buffers(a, vkinds, vparams, pxs, pys)
    cdef int n = buf.n
    cdef int const_vol = 1
    cdef int st, i, j, p, total_pairs
    cdef double sigma, ed, eu, value, best
    cdef double n_plus_1 = <double>(n + 1)

    for st in range(n):
        if buf.vkinds[st] != 0:
            const_vol = 0

    cdef int* n_dn = <int*>malloc(n * sizeof(int))
    cdef int* n_up = <int*>malloc(n * sizeof(int))
    cdef int* n_pairs = <int*>malloc(n * sizeof(int))
    cdef int* offs = <int*>malloc(n * sizeof(int))
    cdef int* dn_offs = <int*>malloc(n * sizeof(int))
    cdef int* up_offs = <int*>malloc(n * sizeof(int))
    total_pairs = 0
    cdef int total_dn = 0, total_up = 0
    for st in range(n):
        n_dn[st] = len(dn_cands[st])
        n_up[st] = len(up_cands[st])
        n_pairs[st] = n_dn[st] * n_up[st]
        offs[st] = total_pairs
        dn_offs[st] = total_dn
        up_offs[st] = total_up
        total_pairs += n_pairs[st]
        total_dn += n_dn[st]
        total_up += n_up[st]

    cdef double* dn_flat = <double*>malloc(total_dn * sizeof(double))
    cdef double* up_flat = <double*>malloc(total_up * sizeof(double))
    for st in range(n):
        for i in range(n_dn[st]):
            dn_flat[dn_offs[st] + i] = dn_cands[st][i]
        for i in range(n_up[st]):
            up_flat[up_offs[st] + i] = up_cands[st][i]

    cdef double* psi_d = NULL
    cdef double* psi_u = NULL
    cdef double* fd = NULL
    cdef double* fu = NULL
    if const_vol:
        psi_d = <double*>malloc(total_pairs * sizeof(double))
        psi_u = <double*>malloc(total_pairs * sizeof(double))
        fd = <double*>malloc(total_pairs * sizeof(double))
        fu = <double*>malloc(total_pairs * sizeof(double))
        for st in range(n):
            sigma = buf.vparams[4 * st]
            p = offs[st]
            for i in range(n_dn[st]):
                ed = exp(sigma * dn_flat[dn_offs[st] + i])
                for j in range(n_up[st]):
                    eu = exp(sigma * up_flat[up_offs[st] + j])
                    _branch_weights(ed, eu, &psi_d[p], &psi_u[p])
                    fd[p] = 1.0 + a[st] * (ed - 1.0)
                    fu[p] = 1.0 + a[st] * (eu - 1.0)
                    p += 1

    cdef int* idx = <int*>malloc(n * sizeof(int))
    cdef int* best_idx = <int*>malloc(n * sizeof(int))
    cdef double* edn = <double*>malloc(n * sizeof(double))
    cdef double* eup = <double*>malloc(n * sizeof(double))
    for st in range(n):
        idx[st] = 0
        best_idx[st] = 0
    best = -1e308
    cdef bint running = True
    while running:
        value = 0.0
        if const_vol:
            _cached_rec(0, n, s0, 1.0, s0, psi_d, psi_u, fd, fu, offs, idx,
                        pkind, pa, buf.pxs, buf.pys, buf.n_knots, n_plus_1,
                        &value)
        else:
            for st in range(n):
                edn[st] = dn_flat[dn_offs[st] + idx[st] // n_up[st]]
                eup[st] = up_flat[up_offs[st] + idx[st] % n_up[st]]
            _tree_rec(0, n, s0, 1.0, s0, 0.0, 0.0, buf.a, buf.vkinds,
                      buf.vparams, edn, eup, pkind, pa, buf.pxs, buf.pys,
                      buf.n_knots, n_plus_1, &value)
        if value > best:
            best = value
            for st in range(n):
                best_idx[st] = idx[st]
        st = n - 1
        while st >= 0:
            idx[st] += 1
            if idx[st] < n_pairs[st]:
                break
            idx[st] = 0
            st -= 1
        if st < 0:
            running = False

    pairs = [(best_idx[st] // n_up[st], best_idx[st] % n_up[st])
             for st in range(n)]
    free(n_dn); free(n_up); free(n_pairs); free(offs)
    free(dn_offs); free(up_offs); free(dn_flat); free(up_flat)
    if const_vol:
        free(psi_d); free(psi_u); free(fd); free(fu)
    free(idx); free(best_idx); free(edn); free(eup)
    return best, pairs
