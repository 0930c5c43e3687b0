"""Shared fixtures: a session-scoped cache of finished solves.

Several test modules interrogate the same handful of runs (the bundled
problems at a few mesh widths). Solving each once per session keeps the
suite fast without hiding any state inside the tests themselves.
"""

import pytest

from thinlab import (SolverConfig, make_problem, solve_neumann,
                     solve_penalized, solve_signorini)


@pytest.fixture(scope="session")
def solved():
    """solved(name, h, mode=..., k=..., dt=..., t_span=...) -> SolveResult.

    Results are cached by the full argument tuple; every run uses the
    explicit scheme with automatic substepping.
    """
    cache = {}

    def get(name, h, mode="signorini", k=0.0, dt=None, t_span=None):
        key = (name, float(h), mode, float(k), dt, t_span)
        if key not in cache:
            kwargs = {"h": h}
            if dt is not None:
                kwargs["dt"] = dt
            if t_span is not None:
                kwargs["t_span"] = t_span
            spec = make_problem(name, **kwargs)
            cfg = SolverConfig(substeps="auto", penalty_k=k)
            if mode == "signorini":
                cache[key] = solve_signorini(spec, cfg)
            elif mode == "penalized":
                cache[key] = solve_penalized(spec, cfg=cfg)
            elif mode == "neumann":
                cache[key] = solve_neumann(spec, cfg=cfg)
            else:
                raise ValueError("unknown mode %r" % mode)
        return cache[key]

    return get
