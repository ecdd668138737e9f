import math
import textwrap

import numpy as np
import pytest

from trefftz import cli
from trefftz.analysis import FundamentalSolution
from trefftz.basis import equispaced_directions
from trefftz.linalg import SingularMatrixError

ANGLE = math.atan2(*equispaced_directions(7)[2].d.real[::-1])  # direction 2 of 7


def write(tmp_path, body, name="run.cfg"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(body))
    return path


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0].split(","), [ln.split(",") for ln in lines[1:]]


def minimal(tmp_path, method="uwvf", levels="1", extra=""):
    extra = extra.replace("\n", "\n        ")
    return write(
        tmp_path,
        f"""\
        [problem]
        k = 4
        exact_angle = {ANGLE!r}
        [method]
        name = {method}
        {extra}
        [basis]
        size = 7
        [schedule]
        levels = {levels}
        [output]
        study = out/{method}.csv
        timing = false
        """,
        f"{method}.cfg",
    )


def test_minimal_run_is_exact(tmp_path):
    assert cli.main(["solve", str(minimal(tmp_path))]) == 0
    header, rows = read_csv(tmp_path / "out/uwvf.csv")
    assert ",".join(header) == cli.STUDY_HEADER
    assert len(rows) == 1
    assert float(rows[0][header.index("err_L2")]) <= 1e-8


def test_refinement_schedule_halves_h(tmp_path):
    assert cli.main(["solve", str(minimal(tmp_path, levels="1 2 4 8"))]) == 0
    header, rows = read_csv(tmp_path / "out/uwvf.csv")
    hs = [float(r[header.index("h")]) for r in rows]
    assert len(rows) == 4
    assert all(a / b == pytest.approx(2.0) for a, b in zip(hs, hs[1:]))
    assert [int(r[0]) for r in rows] == [0, 1, 2, 3]


def test_uwvf_matches_tdg_with_half_constants(tmp_path):
    cli.main(["solve", str(minimal(tmp_path, "uwvf", "1 2"))])
    cli.main(["solve", str(minimal(tmp_path, "tdg", "1 2", "a = 0.5\nb = 0.5\nd = 0.5"))])
    h1, r1 = read_csv(tmp_path / "out/uwvf.csv")
    _, r2 = read_csv(tmp_path / "out/tdg.csv")
    for col in ("err_L2", "err_TDG", "err_LS"):
        i = h1.index(col)
        for a, b in zip(r1, r2):
            assert float(a[i]) == pytest.approx(float(b[i]), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("method", ["tdg", "ls", "vtcr", "wbm", "direct", "indirect"])
def test_every_mesh_method_runs(tmp_path, method):
    assert cli.main(["solve", str(minimal(tmp_path, method))]) == 0
    header, rows = read_csv(tmp_path / f"out/{method}.csv")
    assert float(rows[0][header.index("err_L2")]) <= 1e-6
    assert all(c != "nan" for c in rows[0])


def test_p_schedule_and_ghp_family(tmp_path):
    cfg = write(
        tmp_path,
        """\
        [problem]
        k = 3
        exact = fourier-bessel
        exact_order = 2
        exact_center = 0.5 0.5
        [method]
        name = tdg
        [basis]
        family = ghp
        [schedule]
        levels = 2
        p_values = 2 3 4
        [output]
        study = ghp.csv
        """,
    )
    assert cli.main(["solve", str(cfg)]) == 0
    header, rows = read_csv(tmp_path / "ghp.csv")
    errs = [float(r[header.index("err_L2")]) for r in rows]
    assert [int(r[header.index("p")]) for r in rows] == [5, 7, 9]
    assert errs[0] > errs[1] > errs[2]
    assert all(r[header.index("assemble_ms")] for r in rows)


def test_repeated_runs_are_identical(tmp_path):
    cfg = minimal(tmp_path, levels="1 2")
    cli.main(["solve", str(cfg)])
    first = (tmp_path / "out/uwvf.csv").read_text()
    cli.main(["solve", str(cfg)])
    assert (tmp_path / "out/uwvf.csv").read_text() == first


def test_effective_config_round_trip(tmp_path, capsys):
    cfg = minimal(tmp_path, levels="1 2")
    assert cli.main(["config", str(cfg)]) == 0
    effective = capsys.readouterr().out
    assert "[sweep]" in effective and "seed = 42" in effective
    cli.main(["solve", str(cfg)])
    first = (tmp_path / "out/uwvf.csv").read_text()
    again = tmp_path / "again.cfg"
    again.write_text(effective)
    cli.main(["solve", str(again)])
    assert (tmp_path / "out/uwvf.csv").read_text() == first
    assert cli.parse_config(effective).to_text() == effective


def sweep_cfg(tmp_path, body):
    return write(tmp_path, "[sweep]\n" + textwrap.dedent(body) + "output = cond.csv\n", "sweep.cfg")


def test_sweep_single_value(tmp_path):
    assert cli.main(["sweep", str(sweep_cfg(tmp_path, "values = 1-1\n"))]) == 0
    header, rows = read_csv(tmp_path / "cond.csv")
    assert len(rows) == 1 and float(rows[0][header.index("cond2")]) == 1.0


def test_sweep_saturation_and_determinism(tmp_path):
    cfg = sweep_cfg(tmp_path, "h = 0.1\nvalues = 1-15\n")
    assert cli.main(["sweep", str(cfg)]) == 0
    text = (tmp_path / "cond.csv").read_text()
    header, rows = read_csv(tmp_path / "cond.csv")
    flags = [r[header.index("saturated")] for r in rows]
    assert flags[-1] == "true" and set(flags[:-1]) <= {"false"}
    assert len(rows) < 15
    cli.main(["sweep", str(cfg)])
    assert (tmp_path / "cond.csv").read_text() == text


def test_sweep_ghp_family(tmp_path):
    assert cli.main(["sweep", str(sweep_cfg(tmp_path, "family = ghp\nvalues = 0-3\n"))]) == 0
    header, rows = read_csv(tmp_path / "cond.csv")
    assert [r[0] for r in rows] == ["GHP"] * 4


def test_sample_unimodular_plane_wave(tmp_path):
    cfg = write(
        tmp_path,
        f"""\
        [problem]
        k = 4
        exact_angle = {ANGLE!r}
        [method]
        name = uwvf
        [output]
        field = f.csv
        field_nx = 2
        field_ny = 2
        """,
    )
    assert cli.main(["sample", str(cfg)]) == 0
    header, rows = read_csv(tmp_path / "f.csv")
    assert ",".join(header) == cli.FIELD_HEADER and len(rows) == 4
    assert all(float(r[4]) == pytest.approx(1.0, abs=1e-8) for r in rows)


def test_sample_field_blanks_outside_points():
    class Unit:
        def value(self, pts):
            return np.ones(len(pts), dtype=complex)

    text = cli.sample_field(Unit(), (-1, -1, 1, 1), 3, 3, inside=lambda p: np.hypot(*p.T) < 1.0)
    rows = [ln.split(",") for ln in text.splitlines()[1:]]
    corner, centre = rows[0], rows[4]
    assert corner[2:] == ["", "", ""]
    assert centre[2:] == ["1.0", "0.0", "1.0"]


def test_mfs_disc_study_and_field(tmp_path):
    cfg = write(
        tmp_path,
        """\
        [problem]
        domain = disc 0 0 1
        k = 2
        bc = D
        exact = fundamental
        exact_pole = 3 0
        [method]
        name = mfs
        [schedule]
        poles = 10 20 40
        [output]
        study = mfs.csv
        field = mfsfield.csv
        field_nx = 15
        field_ny = 15
        """,
    )
    assert cli.main(["solve", str(cfg)]) == 0
    header, rows = read_csv(tmp_path / "mfs.csv")
    errs = [float(r[header.index("err_L2")]) for r in rows]
    assert errs[0] > errs[1] > errs[2]
    assert rows[0][header.index("h")] == "" and rows[0][header.index("err_TDG")] == ""
    assert cli.main(["sample", str(cfg)]) == 0
    _, field = read_csv(tmp_path / "mfsfield.csv")
    u = FundamentalSolution(2.0, (3.0, 0.0))
    inside = [r for r in field if r[2]]
    assert 0 < len(inside) < len(field)
    pts = np.array([[float(r[0]), float(r[1])] for r in inside])
    vals = np.array([float(r[2]) + 1j * float(r[3]) for r in inside])
    assert np.abs(vals - u.value(pts)).max() <= 1e-6


@pytest.mark.parametrize(
    "body, line",
    [
        ("[problem]\nk = 1\njunk line\n", 3),
        ("k = 1\n", 1),
        ("[problem]\nk = -2\n", 2),
        ("[problem]\nk = 1\n[method]\nname = magic\n", 4),
        ("[problem]\nk = 1\nwavelength = 3\n", 3),
        ("[problems]\nk = 1\n", 1),
        ("[problem]\nexact = fundamental\nexact_pole = 0.5 0.5\n", 3),
        ("[problem]\ndomain = disc 0 0 1\n", 2),
        ("[schedule]\nlevels = 0\n", 2),
        ("[method]\nname = direct\n[schedule]\nlevels = 1 2\n", 4),
    ],
)
def test_config_errors_carry_line_numbers(tmp_path, capsys, body, line):
    cfg = write(tmp_path, body)
    assert cli.main(["solve", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("config error")
    assert f"line {line}" in err


def test_missing_config_file(tmp_path):
    assert cli.main(["solve", str(tmp_path / "nope.cfg")]) == 2


def test_numerical_failure_exit_code(tmp_path, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise SingularMatrixError(3)

    monkeypatch.setattr(cli, "lu_solve", boom)
    assert cli.main(["solve", str(minimal(tmp_path))]) == 3
    err = capsys.readouterr().err
    assert "level 0" in err and "uwvf" in err and "pivot at index 3" in err


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    cfg = minimal(tmp_path)
    proc = subprocess.run([sys.executable, "-m", "trefftz", "solve", str(cfg)], capture_output=True)
    assert proc.returncode == 0
    assert (tmp_path / "out/uwvf.csv").exists()
