"""Request and response bodies for the run service."""

from typing import Optional

from pydantic import BaseModel, Field


class RunRequest(BaseModel):
    """A run described by config text plus optional overrides.

    config_text uses the same flat dotted-key grammar as config files.
    Overrides are applied after parsing, so the echoed config in the
    manifest reflects what actually ran.
    """

    config_text: str
    out_dir: Optional[str] = None
    checks: Optional[list[str]] = None
    seed: Optional[int] = Field(default=None, ge=0)


class SweepRequest(RunRequest):
    axis: str


class FileEntry(BaseModel):
    path: str
    sha256: str
    bytes: int


class CheckEntry(BaseModel):
    check: str
    passed: bool
    detail: str


class ManifestModel(BaseModel):
    command: str
    config_text: str
    artifact_version: int
    wall_clock_s: float
    overall: bool
    files: list[FileEntry]
    summary: list[CheckEntry]


class HealthModel(BaseModel):
    status: str
    version: str


class ProblemsModel(BaseModel):
    problems: list[str]
