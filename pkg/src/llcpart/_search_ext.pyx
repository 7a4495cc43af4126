# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled composition search. Mirrors ``_search_py`` operation for operation."""
import numpy as np
cimport numpy as cnp

from libc.math cimport INFINITY

cnp.import_array()

cdef enum:
    FAIRNESS = 0


cdef struct State:
    int n
    int m
    int objective
    double peak
    double slack
    double thr_unf
    double thr_stp
    int found
    double best_unf
    double best_stp
    long explored
    long pruned


cdef inline void _leaf(State* st, const double[:, :, ::1] slow, const double[:, :, ::1] bw,
                       const int[::1] owner, int[::1] ways, int[::1] best_ways) noexcept nogil:
    cdef int i, c
    cdef double total, f, s, hi_s, lo_s, acc, unf
    cdef int better
    if st.peak > 0:
        total = 0.0
        for i in range(st.n):
            c = owner[i]
            total += bw[c, ways[c], i]
        f = total / st.peak
        if f < 1.0:
            f = 1.0
    else:
        f = 1.0
    hi_s = -1.0
    lo_s = INFINITY
    acc = 0.0
    for i in range(st.n):
        c = owner[i]
        s = slow[c, ways[c], i] * f
        if s > hi_s:
            hi_s = s
        if s < lo_s:
            lo_s = s
    for i in range(st.n):
        c = owner[i]
        s = slow[c, ways[c], i] * f
        acc += 1.0 / s
    unf = hi_s / lo_s
    if st.found:
        if st.objective == FAIRNESS:
            better = unf < st.best_unf or (unf == st.best_unf and acc > st.best_stp)
        else:
            better = acc > st.best_stp or (acc == st.best_stp and unf < st.best_unf)
    else:
        better = 1
    if better:
        st.found = 1
        for i in range(st.m):
            best_ways[i] = ways[i]
        st.best_unf = unf
        st.best_stp = acc
        if st.objective == FAIRNESS:
            if unf < st.thr_unf:
                st.thr_unf = unf
        elif acc > st.thr_stp:
            st.thr_stp = acc


cdef inline int _prune(State* st, int depth, int left, const double[:, :, ::1] slow,
                       const double[:, :, ::1] lo, const double[:, :, ::1] hi,
                       const int[::1] owner, int[::1] ways) noexcept nogil:
    cdef int wmax = left - (st.m - depth - 1)
    cdef int i, c
    cdef double a, b, lb_max, ub_min, ub
    if st.objective == FAIRNESS:
        lb_max = 0.0
        ub_min = INFINITY
        for i in range(st.n):
            c = owner[i]
            if c < depth:
                a = slow[c, ways[c], i]
                b = a
            else:
                a = lo[c, wmax, i]
                b = hi[c, wmax, i]
            if a > lb_max:
                lb_max = a
            if b < ub_min:
                ub_min = b
        return lb_max / ub_min > st.thr_unf * (1.0 + st.slack)
    ub = 0.0
    for i in range(st.n):
        c = owner[i]
        if c < depth:
            a = slow[c, ways[c], i]
        else:
            a = lo[c, wmax, i]
        ub += 1.0 / a
    return ub < st.thr_stp * (1.0 - st.slack)


cdef void _dfs(State* st, int depth, int left, int has_inc, const double[:, :, ::1] slow,
               const double[:, :, ::1] bw, const double[:, :, ::1] lo,
               const double[:, :, ::1] hi, const int[::1] owner, int[::1] ways,
               int[::1] best_ways) noexcept nogil:
    cdef int w
    st.explored += 1
    if depth == st.m:
        _leaf(st, slow, bw, owner, ways, best_ways)
        return
    if depth > 0 and (st.found or has_inc) and _prune(st, depth, left, slow, lo, hi, owner, ways):
        st.pruned += 1
        return
    if depth == st.m - 1:
        ways[depth] = left
        _dfs(st, depth + 1, 0, has_inc, slow, bw, lo, hi, owner, ways, best_ways)
        return
    for w in range(1, left - (st.m - depth - 1) + 1):
        ways[depth] = w
        _dfs(st, depth + 1, left - w, has_inc, slow, bw, lo, hi, owner, ways, best_ways)


def search_compositions(slow, bw, lo, hi, owner, int m, int k, int objective, double peak,
                        double inc_unf, double inc_stp, bint has_inc, double slack):
    """See ``_search_py.search_compositions``; arrays must be C-contiguous float64."""
    cdef const double[:, :, ::1] s_v = np.ascontiguousarray(slow, dtype=np.float64)
    cdef const double[:, :, ::1] b_v = np.ascontiguousarray(bw, dtype=np.float64)
    cdef const double[:, :, ::1] lo_v = np.ascontiguousarray(lo, dtype=np.float64)
    cdef const double[:, :, ::1] hi_v = np.ascontiguousarray(hi, dtype=np.float64)
    cdef const int[::1] o_v = np.ascontiguousarray(owner, dtype=np.intc)
    cdef int[::1] ways = np.zeros(m, dtype=np.intc)
    cdef int[::1] best_ways = np.zeros(m, dtype=np.intc)
    cdef State st
    st.n = o_v.shape[0]
    st.m = m
    st.objective = objective
    st.peak = peak
    st.slack = slack
    st.found = 0
    st.best_unf = 0.0
    st.best_stp = 0.0
    st.explored = 0
    st.pruned = 0
    if has_inc:
        st.thr_unf = inc_unf
        st.thr_stp = inc_stp
    else:
        st.thr_unf = INFINITY
        st.thr_stp = 0.0
    with nogil:
        if has_inc and _prune(&st, 0, k, s_v, lo_v, hi_v, o_v, ways):
            st.explored = 1
            st.pruned = 1
        else:
            _dfs(&st, 0, k, has_inc, s_v, b_v, lo_v, hi_v, o_v, ways, best_ways)
    if not st.found:
        return False, None, 0.0, 0.0, st.explored, st.pruned
    return (True, tuple(int(best_ways[i]) for i in range(m)), st.best_unf, st.best_stp,
            st.explored, st.pruned)
