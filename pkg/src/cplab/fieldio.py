"""File formats: CPFIELD / CPVOX field persistence and CSV emission.

Both field formats are plain ASCII with a fixed header and one data line
per z level, values printed with 17 significant digits so that
write -> read -> write round-trips byte-identically and runs with the
same configuration produce byte-identical artifacts. Exterior nodes are
written as `nan`.
"""

from __future__ import annotations

import io

import numpy as np

from .domain import MeridianGrid, _symmetric_axis
from .errors import ConfigError
from .oracle3d import VoxelField, _symmetric_coords
from .solver import Field


def fmt(x) -> str:
    """Fixed 17-significant-digit decimal formatting (round-trip exact)."""
    return f"{float(x):.17g}"


def fmt_bool(b) -> str:
    return "true" if b else "false"


# -- CPFIELD ------------------------------------------------------------------


def write_field(f: Field, path, comments=()) -> None:
    g = f.grid
    vals = np.where(g.inside, f.values, np.nan)
    with open(path, "w") as fh:
        for line in comments:
            fh.write(line.rstrip("\n") + "\n")
        fh.write("CPFIELD 1\n")
        fh.write(f"n {f.n}\n")
        fh.write(f"grid {g.nr} {g.nz}\n")
        fh.write(f"extent {fmt(g.rmax)} {fmt(-g.zmax)} {fmt(g.zmax)}\n")
        fh.write(f"t {fmt(g.t)}\n")
        fh.write("data\n")
        for j in range(g.nz):
            fh.write(" ".join(fmt(v) for v in vals[j, :]) + "\n")


def _bare_grid(nr, nz, rmax, zmax, t, inside) -> MeridianGrid:
    """Grid reconstructed from a field file: classification only, no profile."""
    rs = np.linspace(0.0, rmax, nr)
    zs = _symmetric_axis(zmax, nz)
    ones = np.ones_like(inside, dtype=float)
    nbr_all = np.ones_like(inside)
    for arr, sl_dst, sl_src in (
            (inside, np.s_[:, :-1], np.s_[:, 1:]),
            (inside, np.s_[:, 1:], np.s_[:, :-1]),
            (inside, np.s_[:-1, :], np.s_[1:, :]),
            (inside, np.s_[1:, :], np.s_[:-1, :])):
        shifted = np.zeros_like(inside)
        shifted[sl_dst] = arr[sl_src]
        nbr_all = nbr_all & shifted
    interior = inside & nbr_all
    return MeridianGrid(
        nr=nr, nz=nz, rs=rs, zs=zs, hr=float(rs[1] - rs[0]),
        hz=float(zs[(nz + 1) // 2] - zs[(nz - 1) // 2]),
        inside=inside, interior=interior, boundary_adjacent=inside & ~interior,
        theta_e=ones, theta_w=ones.copy(), theta_n=ones.copy(), theta_s=ones.copy(),
        rmax=float(rmax), zmax=float(zmax), t=float(t), g=None,
        j_equator=(nz - 1) // 2)


def read_field(path):
    """Read a CPFIELD file; returns (Field, comments).

    The grid is reconstructed from the header and the nan pattern; it has
    no profile attached, so geometry-free checks work but re-solving needs
    the original domain description.
    """
    comments = []
    with open(path) as fh:
        lines = fh.read().splitlines()
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        comments.append(lines[k])
        k += 1
    try:
        if lines[k] != "CPFIELD 1":
            raise ConfigError(f"{path}: expected 'CPFIELD 1' header")
        n = int(lines[k + 1].split()[1])
        nr, nz = (int(tok) for tok in lines[k + 2].split()[1:3])
        rmax, zmin, zmax = (float(tok) for tok in lines[k + 3].split()[1:4])
        t = float(lines[k + 4].split()[1])
        if lines[k + 5] != "data":
            raise ConfigError(f"{path}: missing 'data' marker")
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed CPFIELD header: {exc}") from exc
    rows = lines[k + 6:k + 6 + nz]
    if len(rows) != nz:
        raise ConfigError(f"{path}: expected {nz} data lines")
    vals = np.array([[float(tok) for tok in row.split()] for row in rows])
    if vals.shape != (nz, nr):
        raise ConfigError(f"{path}: data shape {vals.shape} != ({nz}, {nr})")
    inside = ~np.isnan(vals)
    grid = _bare_grid(nr, nz, rmax, zmax, t, inside)
    return Field(grid, np.where(inside, vals, 0.0), n), comments


# -- CPVOX --------------------------------------------------------------------


def write_voxels(v: VoxelField, path, comments=()) -> None:
    vals = np.where(v.mask, v.values, np.nan)
    R = float(v.xs[-1])
    a0 = float(v.zs[-1])
    with open(path, "w") as fh:
        for line in comments:
            fh.write(line.rstrip("\n") + "\n")
        fh.write("CPVOX 1\n")
        fh.write(f"N {v.N}\n")
        fh.write(f"extent {fmt(R)} {fmt(a0)}\n")
        fh.write("data\n")
        for k in range(v.N):
            for j in range(v.N):
                fh.write(" ".join(fmt(x) for x in vals[k, j, :]) + "\n")


def read_voxels(path) -> VoxelField:
    with open(path) as fh:
        lines = fh.read().splitlines()
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        k += 1
    try:
        if lines[k] != "CPVOX 1":
            raise ConfigError(f"{path}: expected 'CPVOX 1' header")
        N = int(lines[k + 1].split()[1])
        R, a0 = (float(tok) for tok in lines[k + 2].split()[1:3])
        if lines[k + 3] != "data":
            raise ConfigError(f"{path}: missing 'data' marker")
    except (IndexError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed CPVOX header: {exc}") from exc
    rows = lines[k + 4:k + 4 + N * N]
    if len(rows) != N * N:
        raise ConfigError(f"{path}: expected {N * N} data lines")
    flat = np.array([[float(tok) for tok in row.split()] for row in rows])
    vals = flat.reshape(N, N, N)
    mask = ~np.isnan(vals)
    return VoxelField(N, _symmetric_coords(R, N), _symmetric_coords(R, N),
                      _symmetric_coords(a0, N), mask, np.where(mask, vals, 0.0))


# -- CSV emission --------------------------------------------------------------


def solve_report_csv(report) -> str:
    out = io.StringIO()
    out.write("newton_iterations,final_residual,converged,damping_events,min_value\n")
    out.write(f"{report.newton_iterations},{fmt(report.final_residual)},"
              f"{fmt_bool(report.converged)},{report.damping_events},"
              f"{fmt(report.min_value)}\n")
    return out.getvalue()


def stability_csv(report) -> str:
    out = io.StringIO()
    out.write("lambda1,residual,iterations,stable,margin,single_signed\n")
    out.write(f"{fmt(report.lambda1)},{fmt(report.residual)},{report.iterations},"
              f"{fmt_bool(report.stable)},{fmt(report.margin)},"
              f"{fmt_bool(report.single_signed)}\n")
    return out.getvalue()


def census_csv(census, n: int) -> str:
    out = io.StringIO()
    eigs = ",".join(f"eig{k + 1}" for k in range(n))
    out.write(f"r,z,on_axis,type,grad_residual,{eigs}\n")
    for p in census.points:
        ev = np.linalg.eigvalsh(0.5 * (p.hessian + p.hessian.T))
        out.write(f"{fmt(p.r)},{fmt(p.z)},{fmt_bool(p.on_axis)},{p.type},"
                  f"{fmt(p.gradient_residual)},"
                  + ",".join(fmt(e) for e in ev) + "\n")
    return out.getvalue()


def verification_csv(report) -> str:
    out = io.StringIO()
    out.write("check,margin,tolerance,pass\n")
    for r in report.rows:
        out.write(f"{r.name},{fmt(r.margin)},{fmt(r.tolerance)},{fmt_bool(r.passed)}\n")
    return out.getvalue()


def continuation_csv(record) -> str:
    out = io.StringIO()
    out.write("t,converged,lambda1,cp_count,m_z,m_r,runtime_s\n")
    for s in record.steps:
        out.write(f"{fmt(s.t)},{fmt_bool(s.converged)},{fmt(s.lambda1)},"
                  f"{s.cp_count},{fmt(s.m_z)},{fmt(s.m_r)},{fmt(s.runtime_s)}\n")
    return out.getvalue()


def oracle_csv(linf_rel, cp_offset, rot_witness, mirror_witness, max_value) -> str:
    out = io.StringIO()
    out.write("linf_rel,cp_offset_cells,rotation_witness,mirror_witness,max_value\n")
    out.write(",".join(fmt(x) for x in
                       (linf_rel, cp_offset, rot_witness, mirror_witness, max_value)) + "\n")
    return out.getvalue()


def heatmap_csv(f: Field) -> str:
    """Meridian samples as r,z,u triplets (exterior nodes as nan)."""
    g = f.grid
    out = io.StringIO()
    out.write("r,z,u\n")
    vals = np.where(g.inside, f.values, np.nan)
    for j in range(g.nz):
        for i in range(g.nr):
            out.write(f"{fmt(g.rs[i])},{fmt(g.zs[j])},{fmt(vals[j, i])}\n")
    return out.getvalue()
