"""Config-driven batch driver.

Usage::

    trefftz solve  run.cfg    # study CSV, one row per schedule entry
    trefftz sample run.cfg    # field CSV of the last schedule entry
    trefftz sweep  run.cfg    # conditioning CSV from the [sweep] section
    trefftz config run.cfg    # print the effective config (defaults filled in)

Exit codes: 0 success, 2 config error, 3 numerical failure.  Relative paths
in ``[output]``/``[sweep]`` and ``problem.mesh`` are resolved against the
config file's directory.
"""

from __future__ import annotations

import argparse
import configparser
import io
import math
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis as an
from .basis import BasisError, CircularWaves, PlaneWaves, WaveBased, build_spaces, circle_points, dilated_poles
from .forms import (
    AssemblyError,
    BoundaryData,
    FluxParameters,
    LSWeights,
    PRESETS,
    assemble_ls,
    assemble_mfs,
    assemble_single_element,
    assemble_tdg,
    assemble_vtcr,
    assemble_wbm,
    disc_boundary,
    mesh_boundary,
    solve_mfs,
)
from .linalg import GramError, SingularMatrixError, lu_solve, svd_cond
from .mesh import Mesh, MeshError, generate_rect_grid, load_mesh

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
METHODS = ("tdg", "uwvf", "ls", "vtcr", "wbm", "mfs", "direct", "indirect")
STUDY_HEADER = "level,h,p,dofs,err_L2,err_TDG,err_LS,cond2,assemble_ms,solve_ms"
FIELD_HEADER = "x,y,re,im,abs"


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


class NumericalFailure(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------


def _floats(n):
    def parse(s):
        vals = [float(t) for t in s.replace(",", " ").split()]
        if n is not None and len(vals) != n:
            raise ValueError(f"expected {n} numbers")
        return tuple(vals)

    return parse


def _int_list(s):
    out = []
    for tok in s.replace(",", " ").split():
        if "-" in tok[1:]:
            lo, hi = tok.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(tok))
    return tuple(out)


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError("expected true/false")


def _choice(*opts):
    def parse(s):
        v = s.strip().lower()
        if v not in opts:
            raise ValueError(f"expected one of {', '.join(opts)}")
        return v

    return parse


def _tag(s):
    v = s.strip().upper()
    if v not in ("", "D", "R"):
        raise ValueError("boundary tag must be D or R")
    return v


def _domain(s):
    toks = s.split()
    if not toks or toks[0] not in ("rect", "disc"):
        raise ValueError("domain must be 'rect x0 y0 x1 y1' or 'disc cx cy r'")
    vals = _floats(4 if toks[0] == "rect" else 3)(" ".join(toks[1:]))
    if toks[0] == "rect" and not (vals[2] > vals[0] and vals[3] > vals[1]):
        raise ValueError("rectangle needs x1 > x0 and y1 > y0")
    if toks[0] == "disc" and not vals[2] > 0:
        raise ValueError("disc radius must be positive")
    return (toks[0],) + vals


def _positive(parse):
    def p(s):
        v = parse(s)
        if not v > 0:
            raise ValueError("must be positive")
        return v

    return p


def _optional_float(s):
    return None if s.strip() == "" else float(s)


def _sweep_family(s):
    v = s.strip().upper()
    if v not in ("PW", "GHP"):
        raise ValueError("expected PW or GHP")
    return v


def _str(s):
    return s.strip()


# section -> key -> (parser, default text)
SCHEMA: dict[str, dict[str, tuple]] = {
    "problem": {
        "domain": (_domain, "rect 0 0 1 1"),
        "mesh": (_str, ""),
        "k": (_positive(float), "4"),
        "theta": (_positive(float), "1"),
        "bc": (_tag, "R"),
        "bc_left": (_tag, ""),
        "bc_right": (_tag, ""),
        "bc_bottom": (_tag, ""),
        "bc_top": (_tag, ""),
        "exact": (_choice("pw", "fourier-bessel", "fundamental"), "pw"),
        "exact_angle": (float, "0"),
        "exact_order": (int, "1"),
        "exact_center": (_floats(2), "0 0"),
        "exact_pole": (_floats(2), "3 0"),
    },
    "method": {
        "name": (_choice(*METHODS), "tdg"),
        "flux": (_choice(*PRESETS), "p-version"),
        "a": (_positive(float), "0.5"),
        "b": (_positive(float), "0.5"),
        "d": (_positive(float), "0.5"),
        "lambda": (_optional_float, ""),
        "sigma": (_positive(float), "1"),
        "jump": (_choice("full", "normal"), "full"),
        "c1": (complex, "0.5"),
        "c2": (complex, "-0.5"),
        "z_int": (complex, "1"),
        "conjugate": (_bool, "false"),
        "mfs_mode": (_choice("least-squares", "collocation"), "least-squares"),
        "mfs_points": (int, "120"),
        "mfs_radius": (_positive(float), "1.5"),
    },
    "basis": {
        "family": (_choice("pw", "ghp", "wbm"), "pw"),
        "size": (_positive(float), "7"),
    },
    "schedule": {
        "levels": (_int_list, "1"),
        "p_values": (_int_list, ""),
        "poles": (_int_list, "40"),
    },
    "output": {
        "study": (_str, "study.csv"),
        "field": (_str, "field.csv"),
        "field_nx": (int, "21"),
        "field_ny": (int, "21"),
        "timing": (_bool, "true"),
        "seed": (int, "42"),
    },
    "sweep": {
        "family": (_sweep_family, "PW"),
        "k": (_positive(float), "1"),
        "h": (_positive(float), "2"),
        "center": (_floats(2), "0 0"),
        "values": (_int_list, "1-15"),
        "output": (_str, "conditioning.csv"),
    },
}


@dataclass
class RunConfig:
    values: dict  # section -> key -> parsed value
    raw: dict  # section -> key -> text
    lines: dict  # (section, key) -> line number in the source
    base: Path

    def __getitem__(self, section: str) -> dict:
        return self.values[section]

    def line(self, section: str, key: str) -> int | None:
        return self.lines.get((section, key))

    def to_text(self) -> str:
        """Effective config with every default spelled out."""
        out = []
        for sec, keys in SCHEMA.items():
            out.append(f"[{sec}]")
            out += [f"{key} = {self.raw[sec][key]}" for key in keys]
            out.append("")
        return "\n".join(out)

    def path(self, section: str, key: str) -> Path:
        p = Path(self.values[section][key])
        return p if p.is_absolute() else self.base / p


_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def _line_map(text: str) -> dict:
    out, sec = {}, None
    for n, line in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(line)
        if m:
            sec = m.group(1).strip().lower()
            out.setdefault((sec, None), n)
            continue
        m = _KEY_RE.match(line)
        if m and sec is not None:
            out.setdefault((sec, m.group(1).strip().lower()), n)
    return out


def parse_config(text: str, base: Path | str = ".") -> RunConfig:
    """Parse and validate config text; errors carry source line numbers."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("expected a [section] header", exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line", line) from None
    except configparser.Error as exc:
        raise ConfigError(exc.message.splitlines()[0], getattr(exc, "lineno", None)) from None
    lines = _line_map(text)
    raw, values = {}, {}
    for sec in cp.sections():
        if sec.lower() not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", lines.get((sec.lower(), None)))
    for sec, keys in SCHEMA.items():
        given = {k.lower(): v for k, v in cp.items(sec)} if cp.has_section(sec) else {}
        for key in given:
            if key not in keys:
                raise ConfigError(f"unknown key '{key}' in [{sec}]", lines.get((sec, key)))
        raw[sec], values[sec] = {}, {}
        for key, (parse, default) in keys.items():
            txt = given.get(key, default).strip()
            try:
                values[sec][key] = parse(txt)
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key} = {txt!r}: {exc}", lines.get((sec, key))) from None
            raw[sec][key] = txt
    cfg = RunConfig(values, raw, lines, Path(base))
    _check_consistency(cfg)
    return cfg


def _check_consistency(cfg: RunConfig):
    prob, meth, sched = cfg["problem"], cfg["method"], cfg["schedule"]
    name = meth["name"]
    dom = prob["domain"]
    if dom[0] == "disc" and name != "mfs":
        raise ConfigError("disc domains are only supported with method = mfs", cfg.line("problem", "domain"))
    if prob["mesh"] and name == "mfs":
        raise ConfigError("method = mfs takes a rect or disc domain, not a mesh file", cfg.line("problem", "mesh"))
    if name in ("direct", "indirect") and (prob["mesh"] or sched["levels"] != (1,)):
        raise ConfigError(f"method = {name} needs a single element (levels = 1, no mesh file)", cfg.line("schedule", "levels"))
    if any(v < 1 for v in sched["levels"]) or not sched["levels"]:
        raise ConfigError("levels must be positive integers", cfg.line("schedule", "levels"))
    if any(v < 1 for v in sched["poles"]) or not sched["poles"]:
        raise ConfigError("poles must be positive integers", cfg.line("schedule", "poles"))
    if meth["mfs_radius"] <= 1.0:
        raise ConfigError("mfs_radius is a dilation factor and must exceed 1", cfg.line("method", "mfs_radius"))
    if cfg["output"]["field_nx"] < 1 or cfg["output"]["field_ny"] < 1:
        raise ConfigError("field grid needs at least one point per direction", cfg.line("output", "field_nx"))
    if prob["exact"] == "fundamental":
        pole = np.array(prob["exact_pole"])
        if _inside_domain(cfg, pole[None, :])[0]:
            raise ConfigError("exact_pole must lie outside the closed domain", cfg.line("problem", "exact_pole"))


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}") from None
    return parse_config(text, p.parent)


# ---------------------------------------------------------------------------
# problem setup
# ---------------------------------------------------------------------------


def _side_tags(cfg: RunConfig) -> dict:
    prob = cfg["problem"]
    return {s: prob[f"bc_{s}"] or prob["bc"] for s in ("left", "right", "bottom", "top")}


def _base_mesh(cfg: RunConfig, level: int) -> Mesh:
    prob = cfg["problem"]
    try:
        if prob["mesh"]:
            return load_mesh(cfg.path("problem", "mesh").read_text())
        _, x0, y0, x1, y1 = prob["domain"]
        return generate_rect_grid((x0, y0, x1, y1), level, level, _side_tags(cfg))
    except OSError as exc:
        raise ConfigError(f"cannot read mesh file: {exc.strerror}", cfg.line("problem", "mesh")) from None
    except MeshError as exc:
        raise ConfigError(f"mesh: {exc}", cfg.line("problem", "mesh") or cfg.line("problem", "domain")) from None


def _inside_domain(cfg: RunConfig, pts: np.ndarray) -> np.ndarray:
    dom = cfg["problem"]["domain"]
    if cfg["problem"]["mesh"]:
        return _base_mesh(cfg, 1).locate(pts) >= 0
    if dom[0] == "disc":
        _, cx, cy, r = dom
        return np.hypot(pts[:, 0] - cx, pts[:, 1] - cy) <= r
    _, x0, y0, x1, y1 = dom
    return (pts[:, 0] >= x0) & (pts[:, 0] <= x1) & (pts[:, 1] >= y0) & (pts[:, 1] <= y1)


def exact_solution(cfg: RunConfig) -> an.ExactSolution:
    prob = cfg["problem"]
    k = prob["k"]
    if prob["exact"] == "pw":
        t = prob["exact_angle"]
        return an.PlaneWaveSolution(k, (math.cos(t), math.sin(t)))
    if prob["exact"] == "fourier-bessel":
        return an.FourierBesselSolution(k, prob["exact_order"], prob["exact_center"])
    return an.FundamentalSolution(k, prob["exact_pole"])


def _family(cfg: RunConfig, size: float):
    fam = cfg["basis"]["family"]
    line = cfg.line("basis", "size")
    if fam == "wbm":
        return WaveBased(float(size))
    if float(size) != int(size):
        raise ConfigError(f"basis size must be an integer for family {fam}", line)
    n = int(size)
    if fam == "pw":
        if n < 1:
            raise ConfigError("plane-wave count must be at least 1", line)
        return PlaneWaves.equispaced(n)
    return CircularWaves(n, scaled=True)


def flux_of(cfg: RunConfig) -> FluxParameters:
    m = cfg["method"]
    if m["name"] == "uwvf":
        return FluxParameters.uwvf()
    return FluxParameters(m["flux"], m["a"], m["b"], m["d"])


def weights_of(cfg: RunConfig) -> LSWeights:
    m = cfg["method"]
    return LSWeights(m["lambda"], m["sigma"], m["jump"])


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------


@dataclass
class EntryResult:
    level: int
    h: float | None
    p: int
    dofs: int
    err_l2: float
    err_tdg: float | None
    err_ls: float | None
    cond2: float
    assemble_ms: float
    solve_ms: float
    solution: object = None


def _schedule(cfg: RunConfig):
    if cfg["method"]["name"] == "mfs":
        return [(i, None, n) for i, n in enumerate(cfg["schedule"]["poles"])]
    levels = cfg["schedule"]["levels"]
    sizes = cfg["schedule"]["p_values"] or (cfg["basis"]["size"],)
    if cfg["problem"]["mesh"]:
        levels = (1,)
    out, i = [], 0
    for lv in levels:
        for s in sizes:
            out.append((i, lv, s))
            i += 1
    return out


def _solve(system):
    try:
        return lu_solve(system.matrix, system.rhs).solution
    except (SingularMatrixError, np.linalg.LinAlgError) as exc:
        raise NumericalFailure(str(exc)) from None


def _run_mesh_entry(cfg: RunConfig, index: int, level: int, size) -> EntryResult:
    prob, meth = cfg["problem"], cfg["method"]
    k, theta, name = prob["k"], prob["theta"], meth["name"]
    mesh = _base_mesh(cfg, level)
    u = exact_solution(cfg)
    data = BoundaryData.from_exact(u, k, theta)
    try:
        spaces = build_spaces(mesh, k, _family(cfg, size))
    except BasisError as exc:
        raise ConfigError(f"basis: {exc}", cfg.line("basis", "family")) from None
    flux = flux_of(cfg)
    t0 = time.perf_counter()
    try:
        if name in ("tdg", "uwvf"):
            system = assemble_tdg(mesh, spaces, flux, data, k)
        elif name == "ls":
            system = assemble_ls(mesh, spaces, weights_of(cfg), data, k)
        elif name == "vtcr":
            system = assemble_vtcr(mesh, spaces, meth["c1"], meth["c2"], data, k)
        elif name == "wbm":
            system = assemble_wbm(mesh, spaces, meth["z_int"], data, k)
        else:
            system = assemble_single_element(mesh, spaces[0], data, k, name, conjugate=meth["conjugate"])
    except AssemblyError as exc:
        raise ConfigError(f"{name}: {exc}", cfg.line("method", "name")) from None
    t1 = time.perf_counter()
    coeffs = _solve(system)
    t2 = time.perf_counter()
    uh = an.DiscreteSolution(mesh, spaces, coeffs)
    norm_flux = flux if name in ("tdg", "uwvf") else FluxParameters()
    err_l2 = an.l2_domain_error(uh, u, mesh, k)
    tdg_ref = an.skeleton_norm(u, an.TDGNorm(norm_flux), mesh, k, theta)
    ls_ref = an.skeleton_norm(u, an.LSNorm(weights_of(cfg)), mesh, k, theta)
    err_tdg = an.skeleton_norm(u - uh, an.TDGNorm(norm_flux), mesh, k, theta) / tdg_ref
    err_ls = an.skeleton_norm(u - uh, an.LSNorm(weights_of(cfg)), mesh, k, theta) / ls_ref
    cond = svd_cond(system.matrix)[0]
    return EntryResult(
        index, mesh.h, spaces[0].dim, int(system.offsets[-1]), err_l2, err_tdg, err_ls, cond,
        1e3 * (t1 - t0), 1e3 * (t2 - t1), uh,
    )


def _mfs_geometry(cfg: RunConfig, n_poles: int):
    prob, meth = cfg["problem"], cfg["method"]
    dom = prob["domain"]
    m = meth["mfs_points"]
    if dom[0] == "disc":
        _, cx, cy, r = dom
        kind = prob["bc"]
        samples = disc_boundary(m, r, (cx, cy), kind)
        poles = circle_points(n_poles, meth["mfs_radius"] * r, (cx, cy))
    else:
        mesh = _base_mesh(cfg, 1)
        samples = mesh_boundary(mesh, m)
        _, x0, y0, x1, y1 = dom
        poles = dilated_poles(mesh.boundary_loop(), n_poles, meth["mfs_radius"], (0.5 * (x0 + x1), 0.5 * (y0 + y1)))
    return samples, poles


def _run_mfs_entry(cfg: RunConfig, index: int, n_poles: int) -> EntryResult:
    prob, meth = cfg["problem"], cfg["method"]
    k, theta = prob["k"], prob["theta"]
    u = exact_solution(cfg)
    data = BoundaryData.from_exact(u, k, theta)
    samples, poles = _mfs_geometry(cfg, n_poles)
    t0 = time.perf_counter()
    try:
        system = assemble_mfs(samples, poles, data, k, meth["mfs_mode"], inside=lambda y: _inside_domain(cfg, y))
    except AssemblyError as exc:
        raise ConfigError(f"mfs: {exc}", cfg.line("method", "mfs_points")) from None
    t1 = time.perf_counter()
    try:
        coeffs = solve_mfs(system)
    except (SingularMatrixError, np.linalg.LinAlgError) as exc:
        raise NumericalFailure(str(exc)) from None
    t2 = time.perf_counter()
    uh = an.MFSSolution(k, poles, coeffs)
    dom = prob["domain"]
    if dom[0] == "disc":
        err = an.disc_l2_error(uh, u, dom[3], dom[1:3])
    else:
        mesh = _base_mesh(cfg, 1)
        err = an.l2_domain_error(uh, u, mesh, k)
    cond = svd_cond(system.matrix)[0]
    return EntryResult(index, None, n_poles, n_poles, err, None, None, cond, 1e3 * (t1 - t0), 1e3 * (t2 - t1), uh)


def run_entries(cfg: RunConfig, only_last: bool = False) -> list[EntryResult]:
    entries = _schedule(cfg)
    if only_last:
        entries = entries[-1:]
    out = []
    name = cfg["method"]["name"]
    for index, level, size in entries:
        try:
            if name == "mfs":
                res = _run_mfs_entry(cfg, index, size)
            else:
                res = _run_mesh_entry(cfg, index, level, size)
        except NumericalFailure as exc:
            raise NumericalFailure(f"level {index}, method {name}: {exc}") from None
        if not math.isfinite(res.err_l2):
            raise NumericalFailure(f"level {index}, method {name}: non-finite error")
        out.append(res)
    return out


def study_csv(results, timing: bool = True) -> str:
    fmt = an.fmt
    buf = io.StringIO()
    buf.write(STUDY_HEADER + "\n")
    for r in results:
        cells = [
            str(r.level), fmt(r.h), str(r.p), str(r.dofs), fmt(r.err_l2), fmt(r.err_tdg), fmt(r.err_ls),
            fmt(r.cond2), fmt(r.assemble_ms) if timing else "", fmt(r.solve_ms) if timing else "",
        ]
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()


def run(cfg: RunConfig) -> str:
    """Run the schedule and return the study CSV text."""
    return study_csv(run_entries(cfg), cfg["output"]["timing"])


def sample_field(solution, bbox, nx: int, ny: int, inside=None) -> str:
    """Field CSV on an nx x ny grid over ``bbox``; blank value cells outside the domain.

    ``solution.value`` may return nan outside its domain; ``inside`` (a
    predicate on points) takes precedence when given.
    """
    x0, y0, x1, y1 = bbox
    xs = np.linspace(x0, x1, nx) if nx > 1 else np.array([0.5 * (x0 + x1)])
    ys = np.linspace(y0, y1, ny) if ny > 1 else np.array([0.5 * (y0 + y1)])
    pts = np.array([[x, y] for y in ys for x in xs])
    mask = np.ones(len(pts), bool) if inside is None else np.asarray(inside(pts), bool)
    vals = np.full(len(pts), np.nan + 0j)
    if mask.any():
        vals[mask] = solution.value(pts[mask])
    mask &= np.isfinite(vals)
    buf = io.StringIO()
    buf.write(FIELD_HEADER + "\n")
    for (x, y), v, ok in zip(pts, vals, mask):
        tail = f"{an.fmt(v.real)},{an.fmt(v.imag)},{an.fmt(abs(v))}" if ok else ",,"
        buf.write(f"{an.fmt(x)},{an.fmt(y)},{tail}\n")
    return buf.getvalue()


def _domain_bbox(cfg: RunConfig):
    dom = cfg["problem"]["domain"]
    if cfg["problem"]["mesh"]:
        return _base_mesh(cfg, 1).bounding_box
    if dom[0] == "disc":
        _, cx, cy, r = dom
        return (cx - r, cy - r, cx + r, cy + r)
    return dom[1:]


def run_sample(cfg: RunConfig) -> str:
    res = run_entries(cfg, only_last=True)[-1]
    out = cfg["output"]
    inside = (lambda p: _inside_domain(cfg, p)) if cfg["method"]["name"] == "mfs" else None
    text = sample_field(res.solution, _domain_bbox(cfg), out["field_nx"], out["field_ny"], inside)
    if "nan" in text:
        raise NumericalFailure("non-finite field value")
    return text


def run_conditioning(cfg: RunConfig) -> str:
    sw = cfg["sweep"]
    try:
        spec = an.ConditioningSweep(sw["family"], sw["k"], sw["h"], sw["values"], sw["center"])
    except an.AnalysisError as exc:
        raise ConfigError(f"sweep: {exc}", cfg.line("sweep", "values")) from None
    return an.conditioning_csv(an.conditioning_sweep(spec))


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from None


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="trefftz", description="Trefftz methods for the 2D Helmholtz equation")
    ap.add_argument("command", choices=("solve", "sweep", "sample", "config"))
    ap.add_argument("config", help="config file")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "config":
            sys.stdout.write(cfg.to_text())
        elif args.command == "solve":
            _write(cfg.path("output", "study"), run(cfg))
        elif args.command == "sample":
            _write(cfg.path("output", "field"), run_sample(cfg))
        else:
            _write(cfg.path("sweep", "output"), run_conditioning(cfg))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, GramError, SingularMatrixError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
