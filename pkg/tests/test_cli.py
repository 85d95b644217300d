import numpy as np
import pytest

from cplab import fieldio
from cplab import solver as sv
from cplab.cli import main
from cplab.config import parse_config
from cplab.errors import ConfigError

TORSION_BALL = """
# minimal torsion ball
[domain]
kind = ball
a = 1.0
n = 3

[nonlinearity]
form = constant
c = 1.0

[grid]
nr = 49
nz = 99

[run]
seed = 7
"""


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_parse_minimal_config_fills_defaults(tmp_path):
    cfg = parse_config(write_config(tmp_path, TORSION_BALL))
    assert cfg.get_int("grid", "nr") == 49
    assert cfg.get_float("solver", "tol_pde") == 1e-9
    assert cfg.get_int("oracle", "N") == 48
    assert cfg.get_int("run", "seed") == 7
    d = cfg.build_domain()
    assert d.n == 3 and d.profile.kind == "ball"
    assert cfg.build_nonlinearity().form == "constant"


def test_parse_grid_aspect_default(tmp_path):
    text = TORSION_BALL.replace("nz = 99\n", "")
    cfg = parse_config(write_config(tmp_path, text))
    d = cfg.build_domain()
    nr, nz = cfg.grid_shape(d)
    assert nr == 49
    assert nz == 97  # 2 * (a0 / hr) + 1 for the unit ball


def test_gelfand_negative_lambda_range_error(tmp_path):
    text = TORSION_BALL.replace("form = constant\nc = 1.0",
                                "form = gelfand\nlambda = -1")
    with pytest.raises(ConfigError, match="positive"):
        parse_config(write_config(tmp_path, text))


def test_duplicate_key_names_both_lines(tmp_path):
    text = TORSION_BALL + "\n[grid]\nnr = 65\n"
    with pytest.raises(ConfigError, match=r"duplicate key \[grid\] nr"):
        parse_config(write_config(tmp_path, text))


def test_unknown_key_reports_line(tmp_path):
    text = TORSION_BALL + "\n[solver]\nwibble = 3\n"
    with pytest.raises(ConfigError, match=r"run.cfg:\d+: unknown key 'wibble'"):
        parse_config(write_config(tmp_path, text))


def test_missing_required_keys_listed(tmp_path):
    with pytest.raises(ConfigError, match=r"missing required keys: \[domain\] kind, \[nonlinearity\] form"):
        parse_config(write_config(tmp_path, "[grid]\nnr = 65\n"))


def test_cpfield_round_trip_byte_identical(tmp_path, torsion_ball_65):
    grid, u, _, _ = torsion_ball_65
    p1 = tmp_path / "u1.cpfield"
    p2 = tmp_path / "u2.cpfield"
    fieldio.write_field(u, p1)
    f2, comments = fieldio.read_field(p1)
    assert comments == []
    fieldio.write_field(f2, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(np.where(grid.inside, u.values, 0.0), f2.values)
    assert f2.n == 3 and f2.t == 1.0


def test_cpvox_round_trip(tmp_path):
    from cplab import domain as dm, nonlinearity as nlin, oracle3d as o3
    v = o3.solve_3d(dm.MeridianDomain(3, dm.ball(1.0)), nlin.constant(1.0), 16, tol=1e-6)
    p1 = tmp_path / "v1.cpvox"
    p2 = tmp_path / "v2.cpvox"
    fieldio.write_voxels(v, p1)
    v2 = fieldio.read_voxels(p1)
    fieldio.write_voxels(v2, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_solve_subcommand_artifacts(tmp_path):
    cfg = write_config(tmp_path, TORSION_BALL)
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    assert (out / "u.cpfield").exists()
    assert (out / "solve_report.csv").exists()
    body = (out / "solve_report.csv").read_text()
    assert "true" in body


def test_census_eigen_verify_subcommands(tmp_path):
    cfg = write_config(tmp_path, TORSION_BALL)
    out = tmp_path / "out"
    assert main(["census", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    assert main(["eigen", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    assert main(["verify", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    assert (out / "census.csv").read_text().startswith("r,z,on_axis,type,grad_residual,eig1,eig2,eig3")
    eig_head = (out / "eigenfield.cpfield").read_text().splitlines()[0]
    assert eig_head.startswith("# eigen lambda1=")
    ver = (out / "verification.csv").read_text()
    assert ver.startswith("check,margin,tolerance,pass")
    assert ver.count("\n") == 9  # header + 8 checks


def test_verify_injected_asymmetric_field_fails(tmp_path, torsion_ball_65):
    grid, u, _, _ = torsion_ball_65
    bad = sv.Field(grid, np.where(grid.inside, 0.1 + 0.05 * grid.zs[:, None], 0.0), 3)
    field_path = tmp_path / "bad.cpfield"
    fieldio.write_field(bad, field_path)
    cfg = write_config(tmp_path, TORSION_BALL)
    out = tmp_path / "out"
    status = main(["verify", "--config", str(cfg), "--out", str(out),
                   "--field", str(field_path), "--quiet"])
    assert status == 1


def test_unstable_affine_solve_exits_nonzero(tmp_path, capsys):
    text = TORSION_BALL.replace("form = constant\nc = 1.0",
                                "form = affine\nlambda = 15.0\nc = 1.0")
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    status = main(["solve", "--config", str(cfg), "--out", str(out), "--quiet"])
    assert status == 1
    assert "error" in capsys.readouterr().err.lower()


def test_verify_csv_determinism(tmp_path):
    cfg = write_config(tmp_path, TORSION_BALL)
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["verify", "--config", str(cfg), "--out", str(out1), "--quiet"]) == 0
    assert main(["verify", "--config", str(cfg), "--out", str(out2), "--quiet"]) == 0
    assert (out1 / "verification.csv").read_bytes() == (out2 / "verification.csv").read_bytes()


def test_report_aggregates_and_emits_heatmap(tmp_path):
    cfg = write_config(tmp_path, TORSION_BALL)
    out = tmp_path / "out"
    assert main(["solve", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    assert main(["report", "--out", str(out), "--quiet"]) == 0
    summary = (out / "summary.csv").read_text()
    assert summary.startswith("source,key,value")
    assert "solve_report" in summary
    heat = (out / "heatmap.csv").read_text()
    assert heat.startswith("r,z,u")


def test_continue_subcommand_with_field_dumps(tmp_path):
    text = TORSION_BALL + "\n[output]\nemit_fields = true\n[continuation]\nt_step0 = 0.05\n"
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    # ball target: the family is constant in t, so the run advances once
    assert main(["continue", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    rec = (out / "continuation.csv").read_text().splitlines()
    assert rec[0] == "t,converged,lambda1,cp_count,m_z,m_r,runtime_s"
    assert len(rec) == 3  # header + t=0 + t=1
    dumps = sorted(p.name for p in (out / "fields").glob("*.cpfield"))
    assert dumps == ["t_0.00000.cpfield", "t_1.00000.cpfield"]
    assert (out / "verification.csv").exists()


def test_oracle3d_subcommand(tmp_path):
    text = TORSION_BALL + "\n[oracle]\nN = 24\n"
    cfg = write_config(tmp_path, text)
    out = tmp_path / "out"
    assert main(["oracle3d", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    assert (out / "oracle.cpvox").exists()
    head = (out / "oracle_compare.csv").read_text().splitlines()
    assert head[0] == "linf_rel,cp_offset_cells,rotation_witness,mirror_witness,max_value"


def test_report_with_no_artifacts_errors(tmp_path, capsys):
    out = tmp_path / "empty"
    out.mkdir()
    status = main(["report", "--out", str(out), "--quiet"])
    assert status == 1
    assert "nothing to aggregate" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, "[grid]\nnr = 65\n")
    assert main(["solve", "--config", str(cfg), "--quiet"]) == 2
    assert "config error" in capsys.readouterr().err
