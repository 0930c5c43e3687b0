"""FastAPI application exposing solve, verify, sweep, oracle-compare."""

import difflib
from dataclasses import replace

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..config import CHECK_NAMES, parse_config
from ..errors import ConfigError, ThinLabError
from ..problems import problem_names
from ..runs import (RunManifest, run_oracle_compare, run_solve, run_sweep,
                    run_verify)
from .models import (CheckEntry, FileEntry, HealthModel, ManifestModel,
                     ProblemsModel, RunRequest, SweepRequest)


def _manifest_model(m: RunManifest) -> ManifestModel:
    return ManifestModel(
        command=m.command, config_text=m.config_text,
        artifact_version=m.artifact_version, wall_clock_s=m.wall_clock_s,
        overall=m.overall,
        files=[FileEntry(path=p, sha256=d, bytes=b) for p, d, b in m.files],
        summary=[CheckEntry(check=c, passed=p, detail=d)
                 for c, p, d in m.summary])


def _config_from(request: RunRequest):
    cfg = parse_config(request.config_text)
    updates = {}
    if request.out_dir is not None:
        updates["out_dir"] = request.out_dir
    if request.seed is not None:
        updates["seed"] = request.seed
    if request.checks is not None:
        for c in request.checks:
            if c not in CHECK_NAMES:
                hint = difflib.get_close_matches(c, CHECK_NAMES, n=1,
                                                 cutoff=0.5)
                suffix = " (did you mean %r?)" % hint[0] if hint else ""
                raise ConfigError("unknown check %r%s" % (c, suffix))
        updates["checks"] = tuple(request.checks)
    return replace(cfg, **updates) if updates else cfg


def _fail(exc: ThinLabError):
    raise HTTPException(status_code=422, detail={
        "error": type(exc).__name__, "message": str(exc)})


def create_app() -> FastAPI:
    app = FastAPI(title="thinlab", version=__version__)

    @app.get("/health", response_model=HealthModel)
    def health():
        return HealthModel(status="ok", version=__version__)

    @app.get("/problems", response_model=ProblemsModel)
    def problems():
        return ProblemsModel(problems=list(problem_names()))

    @app.post("/runs/solve", response_model=ManifestModel)
    def solve(request: RunRequest):
        try:
            return _manifest_model(run_solve(_config_from(request)))
        except ThinLabError as exc:
            _fail(exc)

    @app.post("/runs/verify", response_model=ManifestModel)
    def verify(request: RunRequest):
        try:
            return _manifest_model(run_verify(_config_from(request)))
        except ThinLabError as exc:
            _fail(exc)

    @app.post("/runs/sweep", response_model=ManifestModel)
    def sweep(request: SweepRequest):
        try:
            return _manifest_model(run_sweep(_config_from(request),
                                             request.axis))
        except ThinLabError as exc:
            _fail(exc)

    @app.post("/runs/oracle-compare", response_model=ManifestModel)
    def oracle_compare(request: RunRequest):
        try:
            return _manifest_model(run_oracle_compare(_config_from(request)))
        except ThinLabError as exc:
            _fail(exc)

    return app
