# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int32_t, int64_t, uint8_t, uint64_t

cnp.import_array()

cdef enum:
    OP_ATOM = 0
    OP_NOT = 1
    OP_AND = 2
    OP_OR = 3
    OP_IMPLIES = 4
    OP_TRUE = 5
    OP_FALSE = 6
    MAX_STACK = 4096


cdef uint64_t[6] _LOW
_LOW[0] = 0xAAAAAAAAAAAAAAAAULL
_LOW[1] = 0xCCCCCCCCCCCCCCCCULL
_LOW[2] = 0xF0F0F0F0F0F0F0F0ULL
_LOW[3] = 0xFF00FF00FF00FF00ULL
_LOW[4] = 0xFFFF0000FFFF0000ULL
_LOW[5] = 0xFFFFFFFF00000000ULL


cdef inline uint64_t _eval64(const int32_t* code, int64_t lo, int64_t hi, int64_t base,
                             int n_atoms, uint64_t* stack) nogil:
    """Truth of one formula over the 64 worlds ``base .. base+63``, one bit each."""
    cdef int64_t k
    cdef int sp = 0
    cdef int op, s
    cdef uint64_t a, b
    for k in range(lo, hi):
        op = code[2 * k]
        if op == OP_ATOM:
            s = n_atoms - 1 - code[2 * k + 1]
            if s < 6:
                stack[sp] = _LOW[s]
            elif (base >> s) & 1:
                stack[sp] = ~(<uint64_t>0)
            else:
                stack[sp] = 0
            sp += 1
        elif op == OP_TRUE:
            stack[sp] = ~(<uint64_t>0)
            sp += 1
        elif op == OP_FALSE:
            stack[sp] = 0
            sp += 1
        elif op == OP_NOT:
            stack[sp - 1] = ~stack[sp - 1]
        else:
            b = stack[sp - 1]
            a = stack[sp - 2]
            sp -= 1
            if op == OP_AND:
                stack[sp - 1] = a & b
            elif op == OP_OR:
                stack[sp - 1] = a | b
            else:
                stack[sp - 1] = (~a) | b
    return stack[0]


def _check_depth(const int32_t[:, :] code, const int64_t[:] offsets):
    cdef Py_ssize_t f, k
    cdef int sp, peak
    for f in range(offsets.shape[0] - 1):
        sp = 0
        peak = 0
        for k in range(offsets[f], offsets[f + 1]):
            if code[k, 0] == OP_ATOM or code[k, 0] == OP_TRUE or code[k, 0] == OP_FALSE:
                sp += 1
            elif code[k, 0] != OP_NOT:
                sp -= 1
            if sp > peak:
                peak = sp
        if peak > MAX_STACK:
            raise ValueError("formula nesting exceeds the compiled stack")


def _prepare(code, offsets):
    c = np.ascontiguousarray(code, dtype=np.int32).reshape(-1, 2)
    off = np.ascontiguousarray(offsets, dtype=np.int64)
    _check_depth(c, off)
    return c, off


def eval_all(code, offsets, int n_atoms):
    c_arr, off_arr = _prepare(code, offsets)
    cdef const int32_t[:, ::1] c = c_arr
    cdef const int64_t[::1] off = off_arr
    cdef Py_ssize_t n_f = off.shape[0] - 1
    cdef int64_t n_worlds = (<int64_t>1) << n_atoms
    out = np.empty((n_f, n_worlds), dtype=np.uint8)
    if n_f == 0:
        return out
    cdef uint8_t[:, ::1] o = out
    cdef const int32_t* cp = &c[0, 0] if c.shape[0] else NULL
    cdef uint64_t stack[MAX_STACK]
    cdef Py_ssize_t f
    cdef int64_t base, t, width
    cdef uint64_t bits
    with nogil:
        base = 0
        while base < n_worlds:
            width = n_worlds - base if n_worlds - base < 64 else 64
            for f in range(n_f):
                bits = _eval64(cp, off[f], off[f + 1], base, n_atoms, stack)
                for t in range(width):
                    o[f, base + t] = (bits >> t) & 1
            base += 64
    return out


def world_log_weights(code, offsets, lw_sat, lw_unsat, int n_atoms):
    c_arr, off_arr = _prepare(code, offsets)
    cdef const int32_t[:, ::1] c = c_arr
    cdef const int64_t[::1] off = off_arr
    cdef const double[::1] ws = np.ascontiguousarray(lw_sat, dtype=np.float64)
    cdef const double[::1] wu = np.ascontiguousarray(lw_unsat, dtype=np.float64)
    cdef Py_ssize_t n_f = off.shape[0] - 1
    cdef int64_t n_worlds = (<int64_t>1) << n_atoms
    out = np.zeros(n_worlds, dtype=np.float64)
    if n_f == 0:
        return out
    cdef double[::1] o = out
    cdef const int32_t* cp = &c[0, 0] if c.shape[0] else NULL
    cdef uint64_t stack[MAX_STACK]
    cdef Py_ssize_t f
    cdef int64_t base, t, width
    cdef uint64_t bits
    cdef double sat, unsat
    with nogil:
        base = 0
        while base < n_worlds:
            width = n_worlds - base if n_worlds - base < 64 else 64
            for f in range(n_f):
                bits = _eval64(cp, off[f], off[f + 1], base, n_atoms, stack)
                sat = ws[f]
                unsat = wu[f]
                for t in range(width):
                    o[base + t] += sat if (bits >> t) & 1 else unsat
            base += 64
    return out


def walk(offsets, cum, targets, leaf_of, Py_ssize_t root, uniforms):
    cdef const int64_t[:] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double[:] cm = np.ascontiguousarray(cum, dtype=np.float64)
    cdef const int64_t[:] tg = np.ascontiguousarray(targets, dtype=np.int64)
    cdef const int64_t[:] lf = np.ascontiguousarray(leaf_of, dtype=np.int64)
    cdef const double[:, :] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t n = u.shape[0], depth = u.shape[1]
    cdef Py_ssize_t n_leaves = (int(np.max(leaf_of)) + 1) if len(leaf_of) else 0
    counts = np.zeros(n_leaves, dtype=np.int64)
    cdef int64_t[:] cnt = counts
    cdef Py_ssize_t i, j, v, k, end
    cdef double x
    cdef bint stuck = False
    with nogil:
        for i in range(n):
            v = root
            j = 0
            while lf[v] < 0:
                if j >= depth:
                    stuck = True
                    break
                x = u[i, j]
                k = off[v]
                end = off[v + 1]
                while k + 1 < end and cm[k] <= x:
                    k += 1
                v = tg[k]
                j += 1
            if stuck:
                break
            cnt[lf[v]] += 1
    if stuck:
        raise RuntimeError("walk did not reach a leaf within the drawn depth")
    return counts
