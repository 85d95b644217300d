"""Run configuration: line-based `key = value` files in `[section]` blocks.

UTF-8, `#` comments, no nesting. Unknown keys or sections, duplicate keys
and out-of-range values are hard errors with line numbers; missing
required keys are reported together. Example:

    [domain]
    kind = ball
    a = 1.0
    n = 3

    [nonlinearity]
    form = gelfand
    lambda = 1.0
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from . import domain as dom
from . import nonlinearity as nlin
from .errors import ConfigError

SCHEMA = {
    "domain": {"kind", "a", "b", "coeffs", "file", "n"},
    "nonlinearity": {"form", "lambda", "c", "p", "alpha", "beta"},
    "grid": {"nr", "nz"},
    "solver": {"tol_pde", "max_newton", "tol_lin"},
    "continuation": {"t_step0", "t_step_min"},
    "oracle": {"N"},
    "output": {"directory", "emit_fields"},
    "run": {"seed", "uniqueness_seeds"},
}

DEFAULTS = {
    ("domain", "n"): 3,
    ("grid", "nr"): 129,
    ("solver", "tol_pde"): 1e-9,
    ("solver", "tol_lin"): 1e-11,
    ("solver", "max_newton"): 30,
    ("continuation", "t_step0"): 0.05,
    ("continuation", "t_step_min"): 1e-3,
    ("oracle", "N"): 48,
    ("output", "directory"): "out",
    ("output", "emit_fields"): False,
    ("run", "seed"): 0,
    ("run", "uniqueness_seeds"): 5,
}


@dataclass
class RunConfig:
    """Typed view of a parsed configuration file."""

    raw: dict = field(default_factory=dict)  # (section, key) -> (value str, line)
    path: str = ""

    def get(self, section, key, default=None):
        if (section, key) in self.raw:
            return self.raw[(section, key)][0]
        if default is not None:
            return default
        return DEFAULTS.get((section, key))

    def get_float(self, section, key, default=None):
        val = self.get(section, key, default)
        if val is None:
            return None
        try:
            return float(val)
        except (TypeError, ValueError):
            line = self.raw.get((section, key), (None, "?"))[1]
            raise ConfigError(f"{self.path}:{line}: [{section}] {key} = {val!r} "
                              "is not a number") from None

    def get_int(self, section, key, default=None):
        val = self.get(section, key, default)
        if val is None:
            return None
        try:
            return int(str(val))
        except (TypeError, ValueError):
            line = self.raw.get((section, key), (None, "?"))[1]
            raise ConfigError(f"{self.path}:{line}: [{section}] {key} = {val!r} "
                              "is not an integer") from None

    def get_bool(self, section, key, default=None):
        val = self.get(section, key, default)
        if isinstance(val, bool) or val is None:
            return val
        text = str(val).strip().lower()
        if text in ("true", "yes", "1"):
            return True
        if text in ("false", "no", "0"):
            return False
        line = self.raw.get((section, key), (None, "?"))[1]
        raise ConfigError(f"{self.path}:{line}: [{section}] {key} = {val!r} "
                          "is not a boolean")

    # -- factories ------------------------------------------------------------

    def build_domain(self) -> dom.MeridianDomain:
        kind = str(self.get("domain", "kind"))
        n = self.get_int("domain", "n")
        if n < 2:
            raise ConfigError(f"{self.path}: [domain] n must be >= 2, got {n}")
        if kind == "ball":
            prof = dom.ball(self._require_float("domain", "a"))
        elif kind == "spheroid":
            prof = dom.spheroid(self._require_float("domain", "a"),
                                self._require_float("domain", "b"))
        elif kind == "bump":
            coeffs = str(self.get("domain", "coeffs", ""))
            if not coeffs:
                raise ConfigError(f"{self.path}: [domain] kind = bump requires coeffs")
            prof = dom.polynomial_bump([float(tok) for tok in coeffs.split()])
        elif kind == "tabulated":
            fname = self.get("domain", "file")
            if not fname:
                raise ConfigError(f"{self.path}: [domain] kind = tabulated requires file")
            base = Path(self.path).parent if self.path else Path(".")
            fpath = Path(fname)
            prof = dom.tabulated_from_file(fpath if fpath.is_absolute() else base / fpath)
        else:
            raise ConfigError(f"{self.path}: unknown [domain] kind {kind!r}")
        return dom.MeridianDomain(n, prof, description=kind)

    def build_nonlinearity(self) -> nlin.Nonlinearity:
        form = str(self.get("nonlinearity", "form"))
        if form == "constant":
            return nlin.constant(self._require_float("nonlinearity", "c"))
        if form == "affine":
            return nlin.affine(self._require_float("nonlinearity", "lambda"),
                               self._require_float("nonlinearity", "c"))
        if form == "gelfand":
            lam = self._require_float("nonlinearity", "lambda")
            if lam <= 0:
                line = self.raw.get(("nonlinearity", "lambda"), (None, "?"))[1]
                raise ConfigError(f"{self.path}:{line}: gelfand lambda must be "
                                  f"positive, got {lam:g}")
            return nlin.gelfand(lam)
        if form == "power":
            lam = self._require_float("nonlinearity", "lambda")
            p = self._require_float("nonlinearity", "p")
            if lam <= 0 or p < 1:
                raise ConfigError(f"{self.path}: power form needs lambda > 0 "
                                  f"and p >= 1 (got {lam:g}, {p:g})")
            return nlin.power(lam, p)
        if form == "separable":
            alpha = self._require_float("nonlinearity", "alpha")
            beta = self._require_float("nonlinearity", "beta")
            if alpha < 0 or beta < 0:
                raise ConfigError(f"{self.path}: separable needs alpha, beta >= 0")
            lam = self._require_float("nonlinearity", "lambda")
            if self.get("nonlinearity", "p") is not None:
                phi = nlin.power(lam, self.get_float("nonlinearity", "p"))
            else:
                if lam <= 0:
                    raise ConfigError(f"{self.path}: separable exponential profile "
                                      f"needs lambda > 0, got {lam:g}")
                phi = nlin.gelfand(lam)
            return nlin.separable(alpha, beta, phi)
        raise ConfigError(f"{self.path}: unknown [nonlinearity] form {form!r}")

    def grid_shape(self, d: dom.MeridianDomain):
        """(nr, nz) with nz defaulted to the isotropic hr = hz aspect."""
        nr = self.get_int("grid", "nr")
        nz = self.get_int("grid", "nz")
        if nz is None:
            hr = d.profile.R / (nr - 1)
            half = max(4, int(round(d.profile.a0 / hr)))
            nz = 2 * half + 1
        if nr < 9 or nz < 9:
            raise ConfigError(f"{self.path}: grid must be at least 9x9, got {nr}x{nz}")
        if nz % 2 == 0:
            raise ConfigError(f"{self.path}: nz must be odd, got {nz}")
        return nr, nz

    def validate(self):
        for section, key in (("solver", "tol_pde"), ("solver", "tol_lin"),
                             ("continuation", "t_step0"), ("continuation", "t_step_min")):
            val = self.get_float(section, key)
            if val is not None and val <= 0:
                raise ConfigError(f"{self.path}: [{section}] {key} must be positive")
        if self.get_float("continuation", "t_step0") > 0.1:
            raise ConfigError(f"{self.path}: [continuation] t_step0 must be <= 0.1")
        if self.get_int("oracle", "N") > 96:
            raise ConfigError(f"{self.path}: [oracle] N must be <= 96 (desk scale)")
        self.build_domain()
        self.build_nonlinearity()

    def _require_float(self, section, key) -> float:
        val = self.get_float(section, key)
        if val is None:
            raise ConfigError(f"{self.path}: missing required key [{section}] {key}")
        return val


def parse_config(path) -> RunConfig:
    """Parse and validate a configuration file."""
    path = str(path)
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    raw = {}
    section = None
    errors = []
    for lineno, full in enumerate(lines, start=1):
        line = full.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SCHEMA:
                errors.append(f"{path}:{lineno}: unknown section [{section}]")
                section = None
            continue
        if "=" not in line:
            errors.append(f"{path}:{lineno}: expected `key = value`, got {line!r}")
            continue
        if section is None:
            errors.append(f"{path}:{lineno}: key outside of any [section]")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA[section]:
            errors.append(f"{path}:{lineno}: unknown key {key!r} in [{section}]")
            continue
        if (section, key) in raw:
            first = raw[(section, key)][1]
            errors.append(f"{path}:{lineno}: duplicate key [{section}] {key} "
                          f"(first set on line {first})")
            continue
        raw[(section, key)] = (value, lineno)

    missing = [f"[{s}] {k}" for s, k in (("domain", "kind"), ("nonlinearity", "form"))
               if (s, k) not in raw]
    if missing:
        errors.append(f"{path}: missing required keys: {', '.join(missing)}")
    if errors:
        raise ConfigError("\n".join(errors))

    cfg = RunConfig(raw=raw, path=path)
    cfg.validate()
    return cfg
