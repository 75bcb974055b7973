# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled FlatProgram interpreter: the 64-bit twin of engine_py.

Same schedule, same firing rules, same rounding; the only difference is
fixed-width arithmetic, which is safe because lower() refuses to hand
programs with accumulators beyond 62 bits to this engine.  Returns 0 on
success; on failure err[0] is an error code (1 overflow, 2 collection
overrun) and err[1] the offending actor id.
"""


def run(long long[::1] kinds,
        long long[::1] par_off,
        long long[::1] in_off,
        long long[::1] in_cnt,
        long long[::1] out_base,
        long long[::1] state_off,
        long long[::1] pars,
        long long[::1] in_slots,
        long long[::1] tab,
        long long[::1] img,
        long long[::1] slot_val,
        long long[::1] slot_stamp,
        long long[::1] state,
        long long[::1] obs_slots,
        long long[::1] obs_off,
        long long[::1] obs_cursor,
        long long[::1] out_buf,
        long long[::1] err,
        long long n_actors,
        long long total_steps,
        long long n_obs):
    cdef long long step, i, kind, po, io, s0, s
    cdef long long w, k, ringlen, so, pos, x, y, ky, kx, d, tap, drow
    cdef long long n_in, j, m, limit, acc, cp, op, arg, v
    cdef long long p, in_w, cm_len, col, out, cap
    cdef long long shift, q, r, half, lo, hi
    cdef bint fresh

    for step in range(total_steps):
        for i in range(n_actors):
            kind = kinds[i]
            po = par_off[i]

            if kind == 0:  # source
                if step < pars[po + 1]:
                    s = out_base[i]
                    slot_val[s] = img[pars[po] + step]
                    slot_stamp[s] = step
                continue

            io = in_off[i]
            s0 = in_slots[io]
            if slot_stamp[s0] != step:
                continue

            if kind == 1:  # line buffer
                w = pars[po]
                k = pars[po + 1]
                ringlen = pars[po + 2]
                so = state_off[i]
                pos = state[so]
                state[so] = pos + 1
                state[so + 1 + pos % ringlen] = slot_val[s0]
                x = pos % w
                y = pos / w
                if x >= k - 1 and y >= k - 1:
                    for ky in range(k):
                        drow = (k - 1 - ky) * w
                        for kx in range(k):
                            d = drow + (k - 1 - kx)
                            tap = out_base[i] + ky * k + kx
                            slot_val[tap] = state[so + 1 + (pos - d) % ringlen]
                            slot_stamp[tap] = step

            elif kind == 2:  # conv engine
                n_in = in_cnt[i]
                fresh = True
                for j in range(1, n_in):
                    if slot_stamp[in_slots[io + j]] != step:
                        fresh = False
                        break
                if not fresh:
                    continue
                m = pars[po]
                limit = pars[po + 1]
                acc = 0
                cp = po + 2
                for j in range(m):
                    v = slot_val[in_slots[io + j]]
                    op = pars[cp]
                    arg = pars[cp + 1]
                    cp += 2
                    if op == 0:
                        acc += v * arg
                    elif op == 1:
                        acc += v if arg > 0 else -v
                    elif arg > 0:
                        acc += v * ((<long long> 1) << arg)
                    else:
                        acc -= v * ((<long long> 1) << (-arg))
                if acc < -limit or acc >= limit:
                    err[0] = 1
                    err[1] = i
                    return 1
                s = out_base[i]
                slot_val[s] = acc
                slot_stamp[s] = step

            elif kind == 3:  # channel sum
                m = pars[po]
                limit = pars[po + 1]
                fresh = True
                for j in range(1, m):
                    if slot_stamp[in_slots[io + j]] != step:
                        fresh = False
                        break
                if not fresh:
                    continue
                acc = 0
                for j in range(m):
                    acc += slot_val[in_slots[io + j]]
                if acc < -limit or acc >= limit:
                    err[0] = 1
                    err[1] = i
                    return 1
                if pars[po + 2]:
                    shift = pars[po + 3]
                    lo = pars[po + 4]
                    hi = pars[po + 5]
                    acc = _requant(acc, shift, lo, hi)
                s = out_base[i]
                slot_val[s] = acc
                slot_stamp[s] = step

            elif kind == 4:  # bias add
                acc = slot_val[s0] + pars[po]
                limit = pars[po + 1]
                if acc < -limit or acc >= limit:
                    err[0] = 1
                    err[1] = i
                    return 1
                if pars[po + 2]:
                    shift = pars[po + 3]
                    lo = pars[po + 4]
                    hi = pars[po + 5]
                    acc = _requant(acc, shift, lo, hi)
                s = out_base[i]
                slot_val[s] = acc
                slot_stamp[s] = step

            elif kind == 5:  # max pool
                p = pars[po]
                in_w = pars[po + 1]
                cm_len = pars[po + 2]
                so = state_off[i]
                x = state[so]
                y = state[so + 1]
                col = x / p
                if col < cm_len:
                    v = slot_val[s0]
                    if y % p == 0 and x % p == 0:
                        state[so + 2 + col] = v
                    elif v > state[so + 2 + col]:
                        state[so + 2 + col] = v
                    if y % p == p - 1 and x % p == p - 1:
                        out = state[so + 2 + col]
                        if pars[po + 3]:
                            shift = pars[po + 4]
                            lo = pars[po + 5]
                            hi = pars[po + 6]
                            out = _requant(out, shift, lo, hi)
                        s = out_base[i]
                        slot_val[s] = out
                        slot_stamp[s] = step
                x += 1
                if x == in_w:
                    x = 0
                    y += 1
                state[so] = x
                state[so + 1] = y

            elif kind == 6:  # tanh lookup
                s = out_base[i]
                slot_val[s] = tab[pars[po + 2]
                                  + (slot_val[s0] >> pars[po])
                                  + pars[po + 1]]
                slot_stamp[s] = step

            # kind 7 (sink) consumes without effect

        for j in range(n_obs):
            s = obs_slots[j]
            if slot_stamp[s] == step:
                cap = obs_off[j + 1] - obs_off[j]
                if obs_cursor[j] >= cap:
                    err[0] = 2
                    err[1] = j
                    return 2
                out_buf[obs_off[j] + obs_cursor[j]] = slot_val[s]
                obs_cursor[j] += 1

    return 0


cdef inline long long _requant(long long v, long long shift,
                               long long lo, long long hi):
    cdef long long q, r, half
    if shift > 0:
        q = v >> shift
        r = v - q * ((<long long> 1) << shift)
        half = (<long long> 1) << (shift - 1)
        if r > half or (r == half and (q & 1)):
            q += 1
    else:
        q = v
    if q < lo:
        return lo
    if q > hi:
        return hi
    return q
