# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Monte Carlo kernel: debates as walks on a memoized round graph."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()


cdef inline uint64_t _next(uint64_t* state) noexcept nogil:
    state[0] += <uint64_t>0x9E3779B97F4A7C15ULL
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double _uniform(uint64_t* state) noexcept nogil:
    return (_next(state) >> 11) * (1.0 / 9007199254740992.0)


cdef inline uint64_t _trial_state(uint64_t seed, uint64_t trial) noexcept nogil:
    cdef uint64_t s = seed * <uint64_t>0x9E3779B97F4A7C15ULL + trial * <uint64_t>0xD1B54A32D192ED03ULL
    _next(&s)
    return s


def simulate(const int64_t[::1] offsets, const int64_t[::1] targets, const double[::1] cumprob,
             int64_t start, int64_t trials, uint64_t seed, int64_t max_restarts, int64_t max_steps):
    decisions_arr = np.empty(trials, dtype=np.int8)
    rounds_arr = np.empty(trials, dtype=np.int64)
    steps_arr = np.empty(trials, dtype=np.int64)
    cdef signed char[::1] decisions = decisions_arr
    cdef int64_t[::1] rounds_out = rounds_arr
    cdef int64_t[::1] steps_out = steps_arr
    cdef int64_t t, node, j, hi, tgt, rounds, steps, rs
    cdef signed char decision
    cdef uint64_t state
    cdef double u
    cdef bint budget
    with nogil:
        for t in range(trials):
            state = _trial_state(seed, <uint64_t>t)
            rounds = 0
            steps = 0
            decision = -1
            budget = False
            tgt = -3
            while rounds < max_restarts:
                rounds += 1
                node = start
                rs = 0
                while True:
                    if rs >= max_steps:
                        budget = True
                        break
                    j = offsets[node]
                    hi = offsets[node + 1]
                    if hi - j > 1:
                        u = _uniform(&state)
                        while cumprob[j] <= u:
                            j += 1
                    rs += 1
                    steps += 1
                    tgt = targets[j]
                    if tgt >= 0:
                        node = tgt
                    else:
                        break
                if budget:
                    break
                if tgt == -1:
                    decision = 1
                    break
                if tgt == -2:
                    decision = 0
                    break
            decisions[t] = decision
            rounds_out[t] = rounds
            steps_out[t] = steps
    return decisions_arr, rounds_arr, steps_arr
