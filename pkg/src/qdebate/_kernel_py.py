"""Pure-Python twin of ``_kernel.pyx``; same RNG stream, same results."""

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _next(state: int) -> tuple[int, int]:
    state = (state + _GOLDEN) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return state, z ^ (z >> 31)


def _trial_state(seed: int, trial: int) -> int:
    s = (seed * _GOLDEN + trial * 0xD1B54A32D192ED03) & _MASK
    s, _ = _next(s)
    return s


def simulate(offsets, targets, cumprob, start, trials, seed, max_restarts, max_steps):
    offsets = [int(x) for x in offsets]
    targets = [int(x) for x in targets]
    cumprob = [float(x) for x in cumprob]
    decisions = np.empty(trials, dtype=np.int8)
    rounds_out = np.empty(trials, dtype=np.int64)
    steps_out = np.empty(trials, dtype=np.int64)
    scale = 1.0 / 9007199254740992.0
    for t in range(trials):
        state = _trial_state(seed & _MASK, t)
        rounds = steps = 0
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
                if offsets[node + 1] - j > 1:
                    state, z = _next(state)
                    u = (z >> 11) * scale
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
    return decisions, rounds_out, steps_out
