"""Pure-Python interpreter for FlatProgram.

Reference implementation of the streaming schedule: one global step per
input pixel, actors swept in topological order, an actor firing exactly
when every input slot carries a token stamped with the current step.
Runs on unbounded Python integers, so it handles any accumulator width;
the compiled twin in _engine.pyx implements the identical semantics on
64-bit words.
"""

from __future__ import annotations

from convforge.errors import AccumulatorOverflowError
from convforge.simulate.lower import (
    FlatProgram,
    K_BIAS,
    K_ENG,
    K_LB,
    K_POOL,
    K_SINK,
    K_SRC,
    K_SUM,
    K_TANH,
)


def run(prog: FlatProgram, img: list) -> list:
    """Execute the program on a flat channel-major image; returns the
    collected values per observed slot, in emission order."""
    kinds, par_off = prog.kinds, prog.par_off
    in_off, in_cnt = prog.in_off, prog.in_cnt
    out_base, state_off = prog.out_base, prog.state_off
    pars, in_slots, tab = prog.pars, prog.in_slots, prog.tab

    slot_val = [0] * prog.n_slots
    slot_stamp = [-1] * prog.n_slots
    state = [0] * prog.state_len
    collected = [[] for _ in prog.obs_slots]
    obs = list(zip(prog.obs_slots, collected))

    for step in range(prog.total_steps):
        for i in range(prog.n_actors):
            kind = kinds[i]
            po = par_off[i]

            if kind == K_SRC:
                if step < pars[po + 1]:
                    s = out_base[i]
                    slot_val[s] = img[pars[po] + step]
                    slot_stamp[s] = step
                continue

            io = in_off[i]
            s0 = in_slots[io]
            if slot_stamp[s0] != step:
                continue

            if kind == K_LB:
                w, k, ringlen = pars[po], pars[po + 1], pars[po + 2]
                so = state_off[i]
                pos = state[so]
                state[so] = pos + 1
                state[so + 1 + pos % ringlen] = slot_val[s0]
                x, y = pos % w, pos // w
                if x >= k - 1 and y >= k - 1:
                    ob = out_base[i]
                    for ky in range(k):
                        drow = (k - 1 - ky) * w
                        for kx in range(k):
                            d = drow + (k - 1 - kx)
                            tap = ob + ky * k + kx
                            slot_val[tap] = state[so + 1 + (pos - d) % ringlen]
                            slot_stamp[tap] = step

            elif kind == K_ENG:
                n_in = in_cnt[i]
                fresh = True
                for j in range(1, n_in):
                    if slot_stamp[in_slots[io + j]] != step:
                        fresh = False
                        break
                if not fresh:
                    continue
                m, limit = pars[po], pars[po + 1]
                acc = 0
                cp = po + 2
                for j in range(m):
                    v = slot_val[in_slots[io + j]]
                    op, arg = pars[cp], pars[cp + 1]
                    cp += 2
                    if op == 0:
                        acc += v * arg
                    elif op == 1:
                        acc += v if arg > 0 else -v
                    elif arg > 0:
                        acc += v << arg
                    else:
                        acc -= v << -arg
                if not -limit <= acc < limit:
                    raise AccumulatorOverflowError(
                        f"engine actor {i}: {acc} exceeds tree width"
                    )
                s = out_base[i]
                slot_val[s] = acc
                slot_stamp[s] = step

            elif kind == K_SUM:
                arity, limit = pars[po], pars[po + 1]
                fresh = True
                for j in range(1, arity):
                    if slot_stamp[in_slots[io + j]] != step:
                        fresh = False
                        break
                if not fresh:
                    continue
                acc = 0
                for j in range(arity):
                    acc += slot_val[in_slots[io + j]]
                if not -limit <= acc < limit:
                    raise AccumulatorOverflowError(
                        f"channel sum actor {i}: {acc} exceeds sum width"
                    )
                if pars[po + 2]:
                    acc = _requant(acc, pars[po + 3], pars[po + 4],
                                   pars[po + 5])
                s = out_base[i]
                slot_val[s] = acc
                slot_stamp[s] = step

            elif kind == K_BIAS:
                acc = slot_val[s0] + pars[po]
                limit = pars[po + 1]
                if not -limit <= acc < limit:
                    raise AccumulatorOverflowError(
                        f"bias actor {i}: {acc} exceeds post-bias width"
                    )
                if pars[po + 2]:
                    acc = _requant(acc, pars[po + 3], pars[po + 4],
                                   pars[po + 5])
                s = out_base[i]
                slot_val[s] = acc
                slot_stamp[s] = step

            elif kind == K_POOL:
                p, in_w, cm_len = pars[po], pars[po + 1], pars[po + 2]
                so = state_off[i]
                x, y = state[so], state[so + 1]
                col = x // p
                if col < cm_len:
                    v = slot_val[s0]
                    if y % p == 0 and x % p == 0:
                        state[so + 2 + col] = v
                    elif v > state[so + 2 + col]:
                        state[so + 2 + col] = v
                    if y % p == p - 1 and x % p == p - 1:
                        out = state[so + 2 + col]
                        if pars[po + 3]:
                            out = _requant(out, pars[po + 4], pars[po + 5],
                                           pars[po + 6])
                        s = out_base[i]
                        slot_val[s] = out
                        slot_stamp[s] = step
                x += 1
                if x == in_w:
                    x, y = 0, y + 1
                state[so], state[so + 1] = x, y

            elif kind == K_TANH:
                idx = slot_val[s0] >> pars[po]
                s = out_base[i]
                slot_val[s] = tab[pars[po + 2] + idx + pars[po + 1]]
                slot_stamp[s] = step

            elif kind == K_SINK:
                pass

        for s, bucket in obs:
            if slot_stamp[s] == step:
                bucket.append(slot_val[s])

    return collected


def _requant(v: int, shift: int, lo: int, hi: int) -> int:
    if shift > 0:
        q = v >> shift
        r = v - (q << shift)
        half = 1 << (shift - 1)
        if r > half or (r == half and (q & 1)):
            q += 1
    else:
        q = v
    return lo if q < lo else hi if q > hi else q
