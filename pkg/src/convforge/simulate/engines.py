"""Execution backend selection: compiled extension with pure fallback.

The compiled engine (convforge.simulate._engine, built from Cython at
install time) and the pure interpreter run the same FlatProgram and must
agree bit for bit.  Selection happens here: "compiled" when the extension
imported and the program fits 64-bit words, otherwise "pure".  Setting
CONVFORGE_PURE=1 forces the fallback, which is also how the benchmark and
the parity tests pin each side.
"""

from __future__ import annotations

import os
from array import array

from convforge.errors import AccumulatorOverflowError
from convforge.simulate import engine_py
from convforge.simulate.lower import FlatProgram

try:
    from convforge.simulate import _engine as _compiled
except ImportError:  # extension not built; pure fallback covers everything
    _compiled = None

PURE_ENV = "CONVFORGE_PURE"


def compiled_available() -> bool:
    return _compiled is not None


def default_engine() -> str:
    if os.environ.get(PURE_ENV, "") not in ("", "0"):
        return "pure"
    return "compiled" if _compiled is not None else "pure"


def run_program(prog: FlatProgram, img, engine: str = None):
    """Run a lowered program on a flat channel-major pixel list."""
    name = engine if engine not in (None, "auto") else default_engine()
    if name == "compiled" and engine in (None, "auto") and prog.needs_bigint:
        name = "pure"  # accumulators too wide for 64-bit words
    if name == "pure":
        return engine_py.run(prog, img)
    if name != "compiled":
        raise ValueError(f"unknown engine {name!r}")
    if _compiled is None:
        raise RuntimeError("compiled engine requested but not built")
    if prog.needs_bigint:
        raise RuntimeError(
            "program needs accumulators beyond 62 bits; use the pure engine"
        )
    return _run_compiled(prog, img)


def _arr(values) -> array:
    a = array("q", values)
    if not a:
        a.append(0)  # typed memoryviews reject zero-length buffers
    return a


def _run_compiled(prog: FlatProgram, img):
    n_obs = len(prog.obs_slots)
    obs_off = [0] * (n_obs + 1)
    for j, want in enumerate(prog.obs_expect):
        obs_off[j + 1] = obs_off[j] + want
    out_buf = array("q", bytes(8 * max(1, obs_off[-1])))
    obs_cursor = array("q", bytes(8 * max(1, n_obs)))
    err = array("q", [0, 0])

    rc = _compiled.run(
        _arr(prog.kinds), _arr(prog.par_off), _arr(prog.in_off),
        _arr(prog.in_cnt), _arr(prog.out_base), _arr(prog.state_off),
        _arr(prog.pars), _arr(prog.in_slots), _arr(prog.tab),
        _arr(img),
        array("q", bytes(8 * max(1, prog.n_slots))),
        _arr([-1] * prog.n_slots),
        array("q", bytes(8 * max(1, prog.state_len))),
        _arr(prog.obs_slots), _arr(obs_off), obs_cursor, out_buf, err,
        prog.n_actors, prog.total_steps, n_obs,
    )
    if rc == 1:
        raise AccumulatorOverflowError(
            f"actor {err[1]} overflowed its planned width"
        )
    if rc:
        raise RuntimeError(f"engine failed with code {rc} at {err[1]}")
    return [list(out_buf[obs_off[j]:obs_off[j] + obs_cursor[j]])
            for j in range(n_obs)]
