"""Run orchestration: solve, verify, sweep, oracle-compare.

Each entry point takes a validated RunConfig, executes the work, writes
its artifacts under the output directory (plain delimited text at 17
significant digits, UTF-8 reports) and finishes with a manifest listing
every file's SHA-256 digest plus a pass/fail summary. Artifact bytes
are deterministic: the same config always produces the same digests.
"""

import hashlib
import io
import json
import math
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from .analysis import (BarrierBox, SigmaField, barrier_h_check,
                       barrier_threshold, complementarity_residual,
                       compute_sigma, decompose_contact, face_obstacle_values,
                       fit_sigma_decay, fit_u_decay, reflection_check,
                       reflection_defect, regularity_report,
                       select_free_boundary_point, semiconcavity_report,
                       check_sigma_nonpositive, even_reflection)
from .config import AUTO, RunConfig, render_config
from .errors import ConfigError, PreconditionError
from .geometry import NodeClass
from .solvers import (SolverConfig, brute_force_oracle, solve_neumann,
                      solve_penalized, solve_signorini)

ARTIFACT_VERSION = 1

_G17 = "%.17g"


@dataclass(frozen=True)
class RunManifest:
    """Inventory of one finished run.

    files holds (relative path, sha256 hex digest, byte count) triples;
    summary holds (check name, passed, detail) triples. The manifest file
    itself is written last and is not part of its own inventory.
    """

    command: str
    config_text: str
    artifact_version: int
    wall_clock_s: float
    files: tuple
    summary: tuple
    overall: bool


def render_manifest(manifest: RunManifest) -> str:
    lines = [
        "artifact_version = %d" % manifest.artifact_version,
        "command = %s" % json.dumps(manifest.command),
        "wall_clock_s = %.6f" % manifest.wall_clock_s,
        "overall = %s" % ("pass" if manifest.overall else "fail"),
        "",
        "[config]",
    ]
    for line in manifest.config_text.rstrip("\n").splitlines():
        lines.append("  " + line)
    lines.append("")
    lines.append("[files]")
    for path, digest, nbytes in manifest.files:
        lines.append("  %s = sha256:%s bytes:%d" % (path, digest, nbytes))
    lines.append("")
    lines.append("[summary]")
    for name, passed, detail in manifest.summary:
        lines.append("  %s = %s" % (name, "pass" if passed else "fail"))
        if detail:
            lines.append("  %s.detail = %s" % (name, json.dumps(detail)))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# artifact writers


class _Artifacts:
    """Collects written files and their digests under one directory."""

    def __init__(self, out_dir):
        self.out_dir = out_dir
        self.entries = []
        os.makedirs(out_dir, exist_ok=True)

    def write(self, name, text):
        data = text.encode("utf-8")
        with open(os.path.join(self.out_dir, name), "wb") as fh:
            fh.write(data)
        self.entries.append((name, hashlib.sha256(data).hexdigest(), len(data)))

    def write_table(self, name, header, rows):
        lines = ["# " + ",".join(header)]
        for row in rows:
            cells = []
            for v in row:
                if isinstance(v, (bool, np.bool_)):
                    cells.append("1" if v else "0")
                elif isinstance(v, (int, np.integer)):
                    cells.append("%d" % v)
                else:
                    cells.append(_G17 % v)
            lines.append(",".join(cells))
        self.write(name, "\n".join(lines) + "\n")

    def write_array(self, name, header, arr, fmt=_G17):
        buf = io.StringIO()
        buf.write("# " + ",".join(header) + "\n")
        np.savetxt(buf, arr, fmt=fmt, delimiter=",")
        self.write(name, buf.getvalue())


def _per_level_table(grid, coords, level_blocks):
    """Stack (coords..., t, block columns...) rows for every level."""
    blocks = []
    for level, t in enumerate(grid.t_levels):
        cols = list(coords)
        cols.append(np.full(coords[0].shape, float(t)))
        cols.extend(np.asarray(b[level], dtype=float).ravel()
                    for b in level_blocks)
        blocks.append(np.stack(cols, axis=1))
    return np.concatenate(blocks, axis=0)


def _field_table(result):
    """One row per node: tangential coordinates, y, t, u."""
    grid = result.field.grid
    coords = [xg.ravel() for xg in grid.tangential]
    coords.append(grid.normal.ravel())
    return _per_level_table(grid, coords, [result.field.values])


def _face_coords(grid):
    """Interior tangential coordinates of the open face, flattened."""
    sel = (slice(1, -1),) * grid.q
    return [xg[..., 0][sel].ravel() for xg in grid.tangential]


def _coord_header(q):
    if q == 1:
        return ["x"]
    return ["x%d" % (a + 1) for a in range(q)]


# ---------------------------------------------------------------------------
# report rendering


def _fmt_value(v):
    if v is None:
        return "none"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return "%d" % v
    if isinstance(v, (float, np.floating)):
        return _G17 % v
    if isinstance(v, tuple):
        return "[" + ", ".join(_fmt_value(x) for x in v) + "]"
    return json.dumps(str(v))


def render_report(sections) -> str:
    """Key-value document with one [section] block per diagnostics group."""
    lines = []
    for title, items in sections:
        lines.append("[%s]" % title)
        for key, value in items:
            lines.append("%s = %s" % (key, _fmt_value(value)))
        lines.append("")
    return "\n".join(lines).rstrip("\n") + "\n"


def _report_sections(report):
    """Flatten a RegularityReport into (section, items) pairs."""
    sections = [
        ("sigma", [
            ("sigma_max", report.sigma_max),
            ("sign_passed", report.sigma_check.passed),
            ("sign_worst_value", report.sigma_check.worst_value),
            ("sign_worst_node", report.sigma_check.worst_node),
            ("sign_tol", report.sigma_check.tol),
        ]),
        ("complementarity", [
            ("max_min_form", report.complementarity.max_min_form),
            ("max_product", report.complementarity.max_product),
        ]),
        ("semiconcavity", [
            ("grad_max", report.semiconcavity.grad_max),
            ("tan_curv_min", report.semiconcavity.tan_curv_min),
            ("time_diff_min", report.semiconcavity.time_diff_min),
            ("normal_curv_max", report.semiconcavity.normal_curv_max),
            ("node_count", report.semiconcavity.node_count),
            ("delta", report.semiconcavity.delta),
        ]),
        ("contact", [
            ("contact_nodes", report.contact_nodes),
            ("edge_nodes", report.edge_nodes),
        ]),
    ]
    if report.u_fit is not None:
        sections.append(("u_fit", [
            ("A0", report.u_fit.A0),
            ("B0", report.u_fit.B0),
            ("alpha_u", report.u_fit.alpha_u),
            ("r2", report.u_fit.r2),
            ("radii", report.u_fit.radii),
            ("deviations", report.u_fit.deviations),
            ("degenerate", report.u_fit.degenerate),
        ]))
    if report.sigma_fit is not None:
        sections.append(("sigma_fit", [
            ("alpha_sigma", report.sigma_fit.alpha_sigma),
            ("c_sigma", report.sigma_fit.c_sigma),
            ("r2", report.sigma_fit.r2),
            ("radii", report.sigma_fit.radii),
            ("max_values", report.sigma_fit.max_values),
            ("unconstrained", report.sigma_fit.unconstrained),
        ]))
    sections.append(("fit", [
        ("point", report.fit_point),
        ("note", report.fit_note or None),
    ]))
    sections.append(("solver", [
        ("penalty_k", report.penalty_k),
        ("iterations_max", report.iterations_max),
        ("residual_max", report.residual_max),
    ]))
    return sections


# ---------------------------------------------------------------------------
# solving


def _execute(cfg: RunConfig):
    spec = cfg.build_spec()
    scfg = cfg.solver_config()
    if cfg.mode == "signorini":
        return solve_signorini(spec, scfg)
    if cfg.mode == "penalized":
        return solve_penalized(spec, cfg=scfg)
    return solve_neumann(spec, cfg=scfg)


def _write_solution(art, cfg, result, sigma, dec):
    grid = result.field.grid
    q = grid.q
    art.write("config.txt", render_config(cfg))
    art.write_array("field.csv", _coord_header(q) + ["y", "t", "u"],
                    _field_table(result))
    face = _face_coords(grid)
    art.write_array("sigma.csv", _coord_header(q) + ["t", "sigma"],
                    _per_level_table(grid, face, [sigma.values]))
    art.write_array("contact.csv",
                    _coord_header(q) + ["t", "contact", "free", "edge"],
                    _per_level_table(grid, face,
                                     [dec.contact, dec.free, dec.edge]),
                    fmt=[_G17] * (q + 1) + ["%d"] * 3)


def _finish(art, cfg, command, summary, started) -> RunManifest:
    manifest = RunManifest(
        command=command, config_text=render_config(cfg),
        artifact_version=ARTIFACT_VERSION,
        wall_clock_s=time.perf_counter() - started,
        files=tuple(art.entries), summary=tuple(summary),
        overall=all(passed for _, passed, _ in summary))
    with open(os.path.join(art.out_dir, "manifest.txt"), "w",
              encoding="utf-8") as fh:
        fh.write(render_manifest(manifest))
    return manifest


def run_solve(cfg: RunConfig, out_dir=None) -> RunManifest:
    """Execute one solve and persist field, slope, contact sets, report."""
    started = time.perf_counter()
    art = _Artifacts(out_dir or cfg.out_dir)
    result = _execute(cfg)
    sigma = compute_sigma(result)
    dec = decompose_contact(result)
    _write_solution(art, cfg, result, sigma, dec)
    report = regularity_report(result, delta=cfg.delta)
    art.write("report.txt", render_report(_report_sections(report)))

    h = result.field.grid.spec.h
    summary = [("solve", True,
                "mode=%s levels=%d max_iterations=%d"
                % (result.mode, result.field.values.shape[0],
                   report.iterations_max))]
    if cfg.mode in ("signorini", "penalized"):
        summary.append(("sigma_nonpositive", report.sigma_check.passed,
                        "max sigma %.6g, tol %.6g"
                        % (report.sigma_check.worst_value,
                           report.sigma_check.tol)))
        comp_tol = 5.0 * h
        summary.append(("complementarity",
                        report.complementarity.max_min_form <= comp_tol,
                        "max |min(gap, -sigma)| %.6g, tol %.6g"
                        % (report.complementarity.max_min_form, comp_tol)))
    return _finish(art, cfg, "solve", summary, started)


# ---------------------------------------------------------------------------
# verification battery


def _auto_fit_geometry(result, cfg):
    """Anchor point and radii for the decay fits, or a skip reason."""
    grid = result.field.grid
    h = grid.spec.h
    dec = decompose_contact(result)
    if not dec.edge.any():
        return None, None, dec, "contact edge is empty"
    if cfg.point != AUTO:
        point = (int(cfg.point[0]), tuple(int(i) for i in cfg.point[1:]))
    else:
        probe = cfg.radii if cfg.radii != AUTO else (8 * h, 16 * h, 32 * h)
        point = select_free_boundary_point(result, probe, dec)
    if cfg.radii != AUTO:
        return point, tuple(cfg.radii), dec, None
    level, tidx = point
    t0 = float(grid.t_levels[level])
    x0 = tuple(float(grid.x_levels[i]) for i in tidx)
    r = min(32.0 * h,
            0.95 * (1.0 - max(abs(c) for c in x0)),
            0.95 * math.sqrt(max(t0 - float(grid.t_levels[0]), 0.0)))
    if r / 4.0 < 4.0 * h:
        return point, None, dec, (
            "largest admissible radius %.4g leaves no room for a 3-radius "
            "ladder above 4h = %.4g" % (r, 4 * h))
    return point, (r / 4.0, r / 2.0, r), dec, None


def _barrier_anchor(result, dec):
    """Free face node at a late level; deterministic middle pick."""
    nodes = np.argwhere(dec.free)
    if nodes.size == 0:
        return None
    late = nodes[nodes[:, 0] >= result.field.values.shape[0] // 2]
    if late.size:
        nodes = late
    row = nodes[len(nodes) // 2]
    return int(row[0]), tuple(int(i) + 1 for i in row[1:])


def _random_box(rng, grid, point):
    level, tidx = point
    m = grid.spec.m
    hw = int(rng.integers(2, 9))
    depth_hi = min(9, level)
    depth = int(rng.integers(2, depth_hi)) if depth_hi > 2 else min(2, level)
    jh = int(rng.integers(2, 9))
    lo = tuple(max(0, i - hw) for i in tidx)
    hi = tuple(min(2 * m, i + hw) for i in tidx)
    return BarrierBox(level_lo=level - depth, level_hi=level,
                      idx_lo=lo, idx_hi=hi, j_hi=min(m, jh))


def verify_battery(result, cfg: RunConfig):
    """Run the enabled checks on a finished solve.

    Returns (summary, tables): summary rows are (name, passed, detail),
    tables maps a check name to (header, rows) for its CSV artifact.
    """
    grid = result.field.grid
    h = grid.spec.h
    t_levels = grid.t_levels
    constrained = result.mode in ("signorini", "penalized")
    summary = []
    tables = {}

    sigma = compute_sigma(result)
    if cfg.negative_control:
        sigma = SigmaField(grid=sigma.grid, values=-sigma.values)

    def skip(name, reason):
        summary.append((name, True, "skipped: " + reason))

    for name in cfg.checks:
        if name == "sigma_nonpositive":
            if not constrained:
                skip(name, "solver mode %r has no contact constraint"
                     % result.mode)
                continue
            tol = None if cfg.tol_sigma == AUTO else cfg.tol_sigma
            sign = check_sigma_nonpositive(sigma, tol=tol)
            summary.append((name, sign.passed,
                            "max sigma %.6g at %r, tol %.6g"
                            % (sign.worst_value, sign.worst_node, sign.tol)))
            per_level = sigma.values.reshape(sigma.values.shape[0], -1).max(axis=1)
            tables[name] = (["level", "t", "max_sigma"],
                            [(lv, float(t_levels[lv]), float(v))
                             for lv, v in enumerate(per_level)])
        elif name == "complementarity":
            if not constrained:
                skip(name, "solver mode %r has no contact constraint"
                     % result.mode)
                continue
            comp = complementarity_residual(result, sigma)
            tol = 5.0 * h
            summary.append((name, comp.max_min_form <= tol,
                            "max |min(gap, -sigma)| %.6g, max |sigma*gap| "
                            "%.6g, tol %.6g"
                            % (comp.max_min_form, comp.max_product, tol)))
            q = grid.q
            face = result.field.values[(slice(None),) + (slice(1, -1),) * q + (0,)]
            gap = face - face_obstacle_values(result.spec, grid)
            mf = np.abs(np.minimum(gap, -sigma.values))
            pr = np.abs(sigma.values * gap)
            rows = [(lv, float(t_levels[lv]),
                     float(mf[lv].max()), float(pr[lv].max()))
                    for lv in range(1, mf.shape[0])]
            tables[name] = (["level", "t", "max_min_form", "max_product"], rows)
        elif name == "semiconcavity":
            try:
                semi = semiconcavity_report(result, cfg.delta)
            except PreconditionError as exc:
                summary.append((name, False, str(exc)))
                continue
            budget = 100.0 * max(1.0, result.spec.K) / cfg.delta ** 2
            worst = max(semi.grad_max, abs(semi.tan_curv_min),
                        abs(semi.time_diff_min), abs(semi.normal_curv_max))
            summary.append((name, worst <= budget,
                            "grad %.4g, tan curv min %.4g, time diff min "
                            "%.4g, normal curv max %.4g, budget %.4g"
                            % (semi.grad_max, semi.tan_curv_min,
                               semi.time_diff_min, semi.normal_curv_max,
                               budget)))
            tables[name] = (
                ["delta", "grad_max", "tan_curv_min", "time_diff_min",
                 "normal_curv_max", "node_count"],
                [(semi.delta, semi.grad_max, semi.tan_curv_min,
                  semi.time_diff_min, semi.normal_curv_max, semi.node_count)])
        elif name == "reflection":
            if not constrained:
                skip(name, "solver mode %r has no contact constraint"
                     % result.mode)
                continue
            tol = None if cfg.tol_reflection == AUTO else cfg.tol_reflection
            rep = reflection_check(result, tol=tol)
            summary.append((name, rep.passed,
                            "margin %.6g over truncation at level %d, tol "
                            "%.6g (raw defect %.6g)"
                            % (rep.margin, rep.worst_level, rep.tol,
                               rep.max_defect)))
            defects = reflection_defect(result.spec.operator,
                                        even_reflection(result.field.values),
                                        t_levels, h)
            rows = [(lv + 1, float(t_levels[lv + 1]),
                     float(defects[lv].max()))
                    for lv in range(defects.shape[0])]
            tables[name] = (["level", "t", "max_defect"], rows)
        elif name == "barrier":
            if not constrained:
                skip(name, "solver mode %r has no contact constraint"
                     % result.mode)
                continue
            dec = decompose_contact(result)
            point = _barrier_anchor(result, dec)
            if point is None:
                skip(name, "no free face node to anchor the barrier")
                continue
            spec = result.spec
            thresh = barrier_threshold(spec.grid.n, spec.operator.ell.lam,
                                       spec.operator.ell.Lam)
            C0 = 1.1 * thresh if cfg.barrier_c0 == AUTO else cfg.barrier_c0
            rng = np.random.default_rng(cfg.seed)
            rows = []
            all_ok = True
            worst = math.inf
            try:
                for trial in range(cfg.boxes):
                    box = _random_box(rng, grid, point)
                    rep = barrier_h_check(result, point, C0, box=box)
                    ok = (rep.supersolution_passed and rep.majorant_passed
                          and rep.boundary_passed)
                    all_ok = all_ok and ok
                    worst = min(worst, rep.boundary_margin)
                    rows.append((trial, box.level_lo, box.level_hi, box.j_hi,
                                 rep.supersolution_value, rep.majorant_margin,
                                 rep.boundary_margin, ok))
            except PreconditionError as exc:
                summary.append((name, False, str(exc)))
                continue
            summary.append((name, all_ok,
                            "C0 %.4g (threshold %.4g), %d boxes at anchor "
                            "%r, min boundary margin %.6g"
                            % (C0, thresh, cfg.boxes, point, worst)))
            tables[name] = (
                ["box", "level_lo", "level_hi", "j_hi", "sup_value",
                 "majorant_margin", "boundary_margin", "passed"], rows)
        elif name in ("u_decay", "sigma_decay"):
            if not constrained:
                skip(name, "solver mode %r has no contact constraint"
                     % result.mode)
                continue
            point, radii, dec, reason = _auto_fit_geometry(result, cfg)
            if reason is not None:
                skip(name, reason)
                continue
            try:
                if name == "u_decay":
                    fit = fit_u_decay(result, point, radii, dec)
                    if fit.degenerate:
                        summary.append((name, True,
                                        "degenerate: deviations at rounding "
                                        "scale around %r" % (point,)))
                        continue
                    passed = math.isfinite(fit.alpha_u) and fit.r2 >= 0.5
                    summary.append((name, passed,
                                    "alpha_u %.4f, r2 %.4f at %r, radii %s"
                                    % (fit.alpha_u, fit.r2, point,
                                       ["%.4g" % r for r in fit.radii])))
                    tables[name] = (["radius", "deviation"],
                                    list(zip(fit.radii, fit.deviations)))
                else:
                    fit = fit_sigma_decay(sigma, point, radii, dec)
                    if fit.unconstrained:
                        summary.append((name, True,
                                        "unconstrained: slope has no "
                                        "negative part near %r" % (point,)))
                        continue
                    passed = math.isfinite(fit.alpha_sigma) and fit.r2 >= 0.5
                    summary.append((name, passed,
                                    "alpha_sigma %.4f, r2 %.4f at %r"
                                    % (fit.alpha_sigma, fit.r2, point)))
                    tables[name] = (["radius", "max_value"],
                                    list(zip(fit.radii, fit.max_values)))
            except PreconditionError as exc:
                summary.append((name, False, str(exc)))
        elif name == "penalty_convergence":
            if cfg.sweep_penalty_k is None:
                summary.append((name, False,
                                "needs a 'sweep.penalty_k' schedule"))
                continue
            rows = _penalty_table(result.spec, cfg.solver_config(),
                                  cfg.sweep_penalty_k, reference=result
                                  if result.mode == "signorini" else None)
            sups = [r[1] for r in rows]
            monotone = all(b < a for a, b in zip(sups, sups[1:]))
            passed = monotone or len(sups) == 1
            summary.append((name, passed,
                            "sup differences %s %s"
                            % (["%.6g" % s for s in sups],
                               "strictly decreasing" if monotone
                               else "(single entry)" if len(sups) == 1
                               else "not strictly decreasing")))
            tables[name] = (["k", "sup_diff", "flux_sup"], rows)
        else:
            raise ConfigError("unknown check %r" % name)
    return summary, tables


def run_verify(cfg: RunConfig, out_dir=None) -> RunManifest:
    """Solve, run the enabled checks, persist report and per-check tables."""
    started = time.perf_counter()
    art = _Artifacts(out_dir or cfg.out_dir)
    result = _execute(cfg)
    sigma = compute_sigma(result)
    dec = decompose_contact(result)
    _write_solution(art, cfg, result, sigma, dec)

    summary, tables = verify_battery(result, cfg)
    report = regularity_report(result, delta=cfg.delta)
    sections = _report_sections(report)
    sections.append(("checks",
                     [(name, "pass" if passed else "fail")
                      for name, passed, _ in summary]
                     + [("overall",
                         "pass" if all(p for _, p, _ in summary) else "fail")]))
    art.write("report.txt", render_report(sections))
    for name, (header, rows) in tables.items():
        art.write_table("check_%s.csv" % name, header, rows)
    return _finish(art, cfg, "verify", summary, started)


# ---------------------------------------------------------------------------
# sweeps


def _sup_diff(a, b):
    return float(np.abs(a.field.values - b.field.values).max())


def _inner_scheme_error(result, ref_values):
    """Sup error over scheme-produced nodes in the inner half cylinder.

    Data nodes (lateral wall, edge ring, initial level) replicate the
    input and would report the data's own distance to the reference, not
    the scheme's, so they are excluded; |X| <= 1/2 keeps the comparison
    away from boundary-layer contamination.
    """
    grid = result.field.grid
    scheme = (grid.spatial_mask(NodeClass.INTERIOR)
              | grid.spatial_mask(NodeClass.THIN_BOUNDARY))
    r2 = sum(xg ** 2 for xg in grid.tangential) + grid.normal ** 2
    mask = scheme & (r2 <= 0.25 + 1e-12)
    err = np.abs(result.field.values - ref_values)[1:]
    return float(err[:, mask].max())


def _penalty_table(spec, scfg, ks, reference=None):
    if reference is None:
        reference = solve_signorini(spec, scfg)
    rows = []
    for k in ks:
        res = solve_penalized(spec, k=float(k), cfg=scfg)
        rows.append((float(k), _sup_diff(res, reference),
                     float(np.abs(res.flux).max())))
    return rows


def run_sweep(cfg: RunConfig, axis: str, out_dir=None) -> RunManifest:
    """Run a penalty or mesh schedule and emit its convergence table."""
    started = time.perf_counter()
    if axis == "penalty_k":
        schedule = cfg.sweep_penalty_k
        key = "sweep.penalty_k"
    elif axis == "mesh_h":
        schedule = cfg.sweep_mesh_h
        key = "sweep.mesh_h"
    else:
        raise ConfigError("sweep axis must be 'penalty_k' or 'mesh_h', got %r"
                          % (axis,))
    if schedule is None:
        raise ConfigError("sweep axis %r needs key %r in the config"
                          % (axis, key))
    art = _Artifacts(out_dir or cfg.out_dir)
    art.write("config.txt", render_config(cfg))
    summary = []

    if axis == "penalty_k":
        spec = cfg.build_spec()
        rows = _penalty_table(spec, cfg.solver_config(), schedule)
        art.write_table("sweep.csv", ["k", "sup_diff", "flux_sup"], rows)
        for k, sup, flux in rows:
            summary.append(("k=%g" % k, True,
                            "sup diff to projection %.6g, flux sup %.6g"
                            % (sup, flux)))
    else:
        results = []
        for hv in schedule:
            sub = replace(cfg, h=float(hv))
            results.append((float(hv), _execute(sub)))
        exact = results[0][1].spec.exact_solution
        rows = []
        if exact is not None:
            for hv, res in results:
                vals = _exact_on_grid(exact, res.field.grid)
                rows.append((hv, _inner_scheme_error(res, vals)))
        else:
            h_fine, fine = min(results, key=lambda kv: kv[0])
            for hv, res in results:
                if res is fine and len(results) > 1:
                    continue
                ratio = hv / h_fine
                stride = int(round(ratio))
                if abs(ratio - stride) > 1e-9:
                    raise ConfigError(
                        "mesh sweep without an exact profile needs each h to "
                        "be an integer multiple of the finest, got %g vs %g"
                        % (hv, h_fine))
                sel = (slice(None),) + (slice(None, None, stride),) * \
                    (res.field.values.ndim - 1)
                rows.append((hv, _inner_scheme_error(
                    res, fine.field.values[sel])))
        art.write_table("sweep.csv", ["h", "sup_error"], rows)
        for hv, err in rows:
            summary.append(("h=%g" % hv, True, "sup error %.6g" % err))
    return _finish(art, cfg, "sweep", summary, started)


def _exact_on_grid(exact, grid):
    xa = tuple(xg for xg in grid.tangential)
    out = np.empty((len(grid.t_levels),) + grid.tangential[0].shape)
    for lv, t in enumerate(grid.t_levels):
        out[lv] = exact(xa, grid.normal, float(t))
    return out


# ---------------------------------------------------------------------------
# oracle comparison


def run_oracle_compare(cfg: RunConfig, out_dir=None,
                       tol: float = 1e-8) -> RunManifest:
    """Projection solve against the loop-and-enumerate reference solver."""
    started = time.perf_counter()
    art = _Artifacts(out_dir or cfg.out_dir)
    spec = cfg.build_spec()
    scfg = cfg.solver_config()
    result = solve_signorini(spec, scfg)
    oracle = brute_force_oracle(spec, scfg)
    gap = float(np.abs(result.field.values - oracle.values).max())

    art.write("config.txt", render_config(cfg))
    q = result.field.grid.q
    art.write_array("field.csv", _coord_header(q) + ["y", "t", "u"],
                    _field_table(result))
    grid = oracle.grid
    coords = [xg.ravel() for xg in grid.tangential]
    coords.append(grid.normal.ravel())
    art.write_array("oracle.csv", _coord_header(q) + ["y", "t", "u"],
                    _per_level_table(grid, coords, [oracle.values]))
    art.write("report.txt", render_report(
        [("oracle", [("sup_gap", gap), ("tol", tol),
                     ("passed", gap <= tol)])]))
    summary = [("oracle", gap <= tol, "sup gap %.6g, tol %.6g" % (gap, tol))]
    return _finish(art, cfg, "oracle-compare", summary, started)
