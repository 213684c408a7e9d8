"""Compiled stack interpreter for block-tree programs (see Program.compile)."""

import numpy as np
from numba import njit

OP_WAIT, OP_SWAP, OP_COMPRESS, OP_CALL, OP_SORT = 0, 1, 2, 3, 4


@njit(cache=True, nogil=True)
def run_program(
    ops, starts, lengths, root, state, is_reset,
    eq, comp_decay, reset_decay, simplified, linear, mixed, max_resets,
):
    """Execute in place on ``state`` (index = spin, slot 0 unused).

    Returns (n_resets, n_instructions, peak_msb, resets_at_peak, max_abs_bias).
    """
    n = state.shape[0] - 1
    depth = starts.shape[0] + 1
    st_proc = np.empty(depth, np.int64)
    st_pc = np.empty(depth, np.int64)
    st_rep = np.empty(depth, np.int64)
    sp = 0
    st_proc[0] = root
    st_pc[0] = 0
    st_rep[0] = 1
    sp = 1

    n_resets = 0
    n_instr = 0
    peak = state[n]
    at_peak = 0
    max_abs = abs(eq)
    for i in range(1, n + 1):
        if abs(state[i]) > max_abs:
            max_abs = abs(state[i])

    while sp > 0:
        top = sp - 1
        p = st_proc[top]
        pc = st_pc[top]
        if pc >= lengths[p]:
            st_rep[top] -= 1
            if st_rep[top] > 0:
                st_pc[top] = 0
            else:
                sp -= 1
            continue
        row = starts[p] + pc
        st_pc[top] = pc + 1
        op = ops[row, 0]
        if op == OP_CALL:
            if ops[row, 2] > 0:
                st_proc[sp] = ops[row, 1]
                st_pc[sp] = 0
                st_rep[sp] = ops[row, 2]
                sp += 1
            continue

        n_instr += 1
        if op == OP_WAIT:
            for i in range(1, n + 1):
                if is_reset[i]:
                    if simplified:
                        state[i] = (1.0 - reset_decay) * eq
                    else:
                        state[i] = (state[i] - eq) * reset_decay + eq
                else:
                    state[i] = (state[i] - eq) * comp_decay + eq
            n_resets += 1
        elif op == OP_SWAP:
            a = ops[row, 1]
            b = ops[row, 2]
            tmp = state[a]
            state[a] = state[b]
            state[b] = tmp
        elif op == OP_COMPRESS:
            k = ops[row, 1]
            w = ops[row, 2]
            msb = state[k]
            if w == 2:
                delta = state[k - 1] - msb
            elif linear:
                s = 0.0
                for i in range(k - w + 1, k):
                    s += state[i]
                delta = (s - msb) / 2.0 ** (w - 2)
            else:
                # prod(1+x) -/+ prod(1-x) built up without cancellation
                tot = 2.0
                dif = 0.0
                for i in range(k - w + 1, k):
                    x = state[i]
                    tot, dif = tot + x * dif, dif + x * tot
                delta = (dif - msb * tot) / 2.0 ** (w - 1)
            state[k] = msb + delta
            if abs(state[k]) > max_abs:
                max_abs = abs(state[k])
            for i in range(k - w + 1, k):
                if mixed and w > 2:
                    state[i] = 0.0
                else:
                    state[i] -= delta
                    if abs(state[i]) > max_abs:
                        max_abs = abs(state[i])
        else:
            # SORT: caller guarantees absence
            return -1, n_instr, peak, at_peak, max_abs

        if state[n] > peak:
            peak = state[n]
            at_peak = n_resets
        if max_resets >= 0 and n_resets >= max_resets:
            break
    return n_resets, n_instr, peak, at_peak, max_abs
