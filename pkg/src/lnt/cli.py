"""Command-line driver: writes the data files behind the LNT diagnostics.

Subcommands
-----------
diagram   zeta_gamma.csv for the built-in molecules plus an optional catalog
scan      spectrum.csv, observables.csv and avoided_crossings.csv along the path
density   density_<state>_<t>.csv on a (q1, q2) grid
poincare  poincare_<t>.csv plus a metadata sidecar, one per t value

All numbers are written with 12 significant digits.  Output files are
written through temporary names; if any step fails the files produced by
the run are removed and the exit status is nonzero.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .classical_dynamics import SectionSpec, poincare_section
from .morse_basis import MorseWell
from .observables import diagnose_scan, probability_density
from .parameterization import CO2, WATER, CatalogEntry, PathSpec, gamma, load_catalog, params_at
from .quantum_hamiltonian import build_basis, build_hamiltonian, diagonalize, find_avoided_crossings, scan

log = logging.getLogger("lnt")

SUBCOMMANDS = ("diagram", "scan", "density", "poincare")
CONVENTIONS = ("shifted", "as-is")
FORMATS = ("csv", "json")

T_LOCAL, T_NORMAL = WATER.x_g, CO2.x_g


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    out: Path
    t_min: float = T_NORMAL
    t_max: float = T_LOCAL
    t_step: float = 5e-4
    n_single: int = 9
    polyad_max: int | None = None
    symmetry: str = "symmetric"
    states: tuple[int, ...] = (26, 27, 28)
    delta_t: float | None = None
    t_values: tuple[float, ...] = ()
    grid: int = 201
    q_range: tuple[float, float] = (-2.0, 6.0)
    h: float = 0.005
    ic_grid: int = 16
    energy_convention: str = "shifted"
    fmt: str = "csv"
    catalog: Path | None = None
    pad: int = 32
    workers: int | None = None
    zero_based: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if d.get("zero_based") and "states" in d:
            # stored 1-based internally
            d = dict(d, states=tuple(s + 1 for s in d["states"]))
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        lo, hi = sorted((T_LOCAL, T_NORMAL))
        if not lo <= self.t_min < self.t_max <= hi:
            raise ConfigError(f"need {lo} <= t_min < t_max <= {hi}, got [{self.t_min}, {self.t_max}]")
        if not self.t_step > 0 or self.t_step > self.t_max - self.t_min:
            raise ConfigError(f"t_step={self.t_step} does not fit [{self.t_min}, {self.t_max}]")
        if self.n_single < 1:
            raise ConfigError("n_single must be >= 1")
        if self.polyad_max is not None and self.polyad_max < 0:
            raise ConfigError("polyad_max must be >= 0")
        if self.symmetry not in ("symmetric", "antisymmetric", "full"):
            raise ConfigError(f"unknown symmetry {self.symmetry!r}")
        if not self.states or min(self.states) < 1:
            raise ConfigError("states are 1-based and must be non-empty")
        dim = build_basis(self.n_single, self.symmetry, self.polyad_max).dim
        if max(self.states) > dim:
            raise ConfigError(f"state {max(self.states)} exceeds the basis dimension {dim}")
        if self.delta_t is not None:
            k = self.delta_t / self.t_step
            if self.delta_t <= 0 or abs(k - round(k)) > 1e-6 or round(k) < 1:
                raise ConfigError("delta_t must be a positive multiple of t_step")
        for t in self.t_values:
            if not lo <= t <= hi:
                raise ConfigError(f"t={t} outside [{lo}, {hi}]")
        if self.grid < 2:
            raise ConfigError("grid needs at least 2 points per axis")
        if not self.q_range[0] < self.q_range[1]:
            raise ConfigError("q_range must be increasing")
        if not self.h > 0 or self.ic_grid < 1:
            raise ConfigError("h must be positive and ic_grid >= 1")
        if self.energy_convention not in CONVENTIONS:
            raise ConfigError(f"energy_convention must be one of {CONVENTIONS}")
        if self.fmt not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.subcommand == "poincare" and len(self.states) != 1:
            raise ConfigError("poincare takes exactly one state (its energy sets the shell)")
        if self.pad < 4:
            raise ConfigError("pad must be >= 4")

    @property
    def path(self) -> PathSpec:
        # runs from the local (water) end towards CO2; the step is adjusted to hit both ends
        n = int(round((self.t_max - self.t_min) / self.t_step)) + 1
        return PathSpec(WATER, CO2, np.linspace(self.t_max, self.t_min, n))

    def label(self, state: int) -> int:
        """Index written to output files for 1-based ``state``."""
        return state - 1 if self.zero_based else state

    @property
    def delta_steps(self) -> int:
        if self.delta_t is None:
            return 1
        return int(round(self.delta_t / self.t_step))


# -- output -----------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    return f"{float(x):.12g}"


def _json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if x is None or isinstance(x, str):
        return x
    v = float(f"{float(x):.12g}")
    return v if math.isfinite(v) else None


class OutputSet:
    """Collects files for one run; removes them all if the run fails."""

    def __init__(self, out: Path):
        self.out = Path(out)
        self.written: list[Path] = []

    def __enter__(self):
        self.out.mkdir(parents=True, exist_ok=True)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is not None:
            for p in self.written:
                p.unlink(missing_ok=True)
        return False

    def _write(self, name: str, text: str) -> Path:
        target = self.out / name
        fd, tmp = tempfile.mkstemp(dir=self.out, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as f:
                f.write(text)
            os.replace(tmp, target)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        self.written.append(target)
        log.info("wrote %s", target)
        return target

    def table(self, stem: str, columns, rows, fmt: str) -> Path:
        if fmt == "json":
            doc = {"columns": list(columns), "rows": [[_json_value(v) for v in r] for r in rows]}
            return self._write(stem + ".json", json.dumps(doc, indent=1) + "\n")
        lines = [",".join(columns)]
        lines.extend(",".join(_fmt(v) for v in r) for r in rows)
        return self._write(stem + ".csv", "\n".join(lines) + "\n")

    def json(self, name: str, doc: dict) -> Path:
        return self._write(name, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _t_tag(t: float) -> str:
    return f"{t:.6g}"


# -- subcommands ------------------------------------------------------------

def model_fundamentals(t: float, n_single: int = 9) -> tuple[float, float]:
    """``(nu1, nu3)`` in cm^-1 from the model spectrum at path point ``t``.

    nu1 is the first excited symmetric level, nu3 the lowest antisymmetric
    one, both measured from the ground state.
    """
    path = PathSpec(WATER, CO2, np.array([T_LOCAL, T_NORMAL]))
    p = params_at(path, t)
    sym = np.linalg.eigvalsh(build_hamiltonian(build_basis(n_single, "symmetric"), p))
    anti = np.linalg.eigvalsh(build_hamiltonian(build_basis(n_single, "antisymmetric"), p))
    return float(sym[1] - sym[0]), float(anti[0] - sym[0])


def cmd_diagram(cfg: RunConfig, outputs: OutputSet) -> None:
    entries = []
    for name, p in (("H2O", WATER), ("CO2", CO2)):
        nu1, nu3 = model_fundamentals(p.x_g, cfg.n_single)
        entries.append(CatalogEntry(name, p.x_f, p.x_g, p.omega, p.kappa, nu1, nu3))
    if cfg.catalog is not None:
        entries.extend(load_catalog(cfg.catalog))
    rows = [(e.name, e.x_f, e.x_g, gamma(e.x_f, e.x_g), e.zeta) for e in entries]
    outputs.table("zeta_gamma", ("name", "x_f", "x_g", "gamma", "zeta"), rows, cfg.fmt)


def cmd_scan(cfg: RunConfig, outputs: OutputSet) -> None:
    basis = build_basis(cfg.n_single, cfg.symmetry, cfg.polyad_max)
    path = cfg.path
    log.info("scan: %d points, basis dim %d", len(path.t_grid), basis.dim)
    res = scan(path, basis, workers=cfg.workers)
    dim = basis.dim
    spec_rows = [(t, cfg.label(a + 1), res.energies[i, a]) for i, t in enumerate(res.t) for a in range(dim)]
    outputs.table("spectrum", ("t", "state_index", "energy_cm1"), spec_rows, cfg.fmt)

    diag = diagnose_scan(res, cfg.states, cfg.delta_steps, pad=cfg.pad)
    obs_rows = []
    for i in range(len(diag.fidelity)):
        for j, s in enumerate(diag.states):
            c = diag.components[i][j]
            obs_rows.append((
                res.t[i], cfg.label(s), diag.fidelity[i, j], diag.entropy[i, j],
                c.max_local[0], c.max_local[1], c.max_local_weight,
                c.max_normal[0], c.max_normal[1], c.max_normal_weight, c.complete_polyad,
            ))
    cols = ("t", "state_index", "fidelity", "entropy", "max_local_v1", "max_local_v2",
            "max_local_weight", "max_normal_nu1", "max_normal_nu3", "max_normal_weight",
            "complete_polyad_flag")
    outputs.table("observables", cols, obs_rows, cfg.fmt)

    ac_rows = []
    for s in cfg.states:
        if s < dim:
            ac_rows.extend((cfg.label(s), ts, g) for ts, g in find_avoided_crossings(res, s))
    outputs.table("avoided_crossings", ("state_index", "t_star", "gap_cm1"), ac_rows, cfg.fmt)


def _state_at(cfg: RunConfig, t: float):
    basis = build_basis(cfg.n_single, cfg.symmetry, cfg.polyad_max)
    p = params_at(PathSpec(WATER, CO2, np.array([T_LOCAL, T_NORMAL])), t)
    pt = diagonalize(build_hamiltonian(basis, p), t, p)
    return basis, p, pt


def cmd_density(cfg: RunConfig, outputs: OutputSet) -> None:
    ts = cfg.t_values or (T_LOCAL,)
    q = np.linspace(cfg.q_range[0], cfg.q_range[1], cfg.grid)
    for t in ts:
        basis, p, pt = _state_at(cfg, t)
        well = MorseWell(p.kappa, p.omega, cfg.n_single)
        for s in cfg.states:
            rho = probability_density(pt.eigenvectors[:, s - 1], basis, well, q, q)
            q1, q2 = np.meshgrid(q, q, indexing="ij")
            rows = zip(q1.ravel(), q2.ravel(), rho.ravel())
            outputs.table(f"density_{cfg.label(s)}_{_t_tag(t)}", ("q1", "q2", "rho"), rows, cfg.fmt)


def section_energy(pt, p, state: int, convention: str) -> float:
    """Classical shell energy (units of hbar*omega) for a quantum level."""
    e = pt.energies[state - 1]
    if convention == "shifted":
        e = e - pt.energies[0]
    return float(e / p.omega)


def cmd_poincare(cfg: RunConfig, outputs: OutputSet) -> None:
    ts = cfg.t_values or (T_LOCAL, -0.1, T_NORMAL)
    state = cfg.states[0]
    for t in ts:
        basis, p, pt = _state_at(cfg, t)
        energy = section_energy(pt, p, state, cfg.energy_convention)
        spec = SectionSpec(energy, h=cfg.h, ic_grid=cfg.ic_grid)
        log.info("poincare t=%g E=%.6g", t, energy)
        res = poincare_section(spec, p)
        rows = [(int(r[0]), r[1], r[2]) for r in res.points]
        tag = _t_tag(t)
        outputs.table(f"poincare_{tag}", ("trajectory_id", "q1", "p1"), rows, cfg.fmt)
        meta = {
            "t": t,
            "state_index": cfg.label(state),
            "energy_cm1": float(pt.energies[state - 1]),
            "ground_cm1": float(pt.energies[0]),
            "energy": energy,
            "energy_convention": cfg.energy_convention,
            "h": spec.h,
            "order": spec.order,
            "ic_grid": spec.ic_grid,
            "q2_star": spec.q2_star,
            "max_crossings": spec.max_crossings,
            "t_max": spec.t_max,
            "n_trajectories": int(len(res.initial)),
            "n_escaped": res.n_escaped,
            "n_points": int(len(res.points)),
            "params": asdict(p),
        }
        if len(res.points) == 0:
            meta["diagnostic"] = "empty section: no upward crossings recorded"
        meta = {k: (_json_value(v) if not isinstance(v, dict) else
                    {kk: _json_value(vv) for kk, vv in v.items()}) for k, v in meta.items()}
        outputs.json(f"poincare_{tag}.meta.json", meta)


COMMANDS = {"diagram": cmd_diagram, "scan": cmd_scan, "density": cmd_density, "poincare": cmd_poincare}


# -- argument parsing -------------------------------------------------------

def _int_list(s: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _float_list(s: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lnt", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--format", dest="fmt", choices=FORMATS, default="csv")
    common.add_argument("--n-single", type=int, default=9, help="Morse levels per oscillator")
    common.add_argument("--polyad-max", type=int, default=None,
                        help="keep only v1 + v2 <= this (e.g. 11 with --n-single 12)")
    common.add_argument("--symmetry", choices=("symmetric", "antisymmetric", "full"), default="symmetric")
    common.add_argument("--zero-based", action="store_true",
                        help="state indices on input and output start at 0")

    path_opts = argparse.ArgumentParser(add_help=False)
    path_opts.add_argument("--t-min", type=float, default=T_NORMAL)
    path_opts.add_argument("--t-max", type=float, default=T_LOCAL)
    path_opts.add_argument("--t-step", type=float, default=5e-4)

    p = sub.add_parser("diagram", parents=[common], help="gamma/zeta table")
    p.add_argument("--catalog", type=Path, default=None, help="extra molecules, key=value lines")

    p = sub.add_parser("scan", parents=[common, path_opts], help="spectra and observables along t")
    p.add_argument("--states", type=_int_list, default=None, help="comma-separated (default 26,27,28)")
    p.add_argument("--delta-t", type=float, default=None, help="fidelity offset (default: t-step)")
    p.add_argument("--pad", type=int, default=32, help="extra Fock levels for the normal map")
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("density", parents=[common], help="probability densities")
    p.add_argument("--states", type=_int_list, default=None, help="comma-separated (default 26,27,28)")
    p.add_argument("--t", dest="t_values", type=_float_list, default=())
    p.add_argument("--grid", type=int, default=201, help="points per axis")
    p.add_argument("--q-range", type=_float_list, default=(-2.0, 6.0))

    p = sub.add_parser("poincare", parents=[common], help="Poincare sections at a level's energy")
    p.add_argument("--states", type=_int_list, default=None, help="single state (default 27)")
    p.add_argument("--t", dest="t_values", type=_float_list, default=())
    p.add_argument("--h", type=float, default=0.005)
    p.add_argument("--ic-grid", type=int, default=16)
    p.add_argument("--energy-convention", choices=CONVENTIONS, default="shifted")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    d = {k: v for k, v in vars(ns).items() if k != "verbose"}
    if d.get("states") is None:
        d.pop("states", None)
        if ns.subcommand == "poincare":
            d["states"] = (26,) if ns.zero_based else (27,)
    if "q_range" in d:
        if len(d["q_range"]) != 2:
            raise ConfigError("--q-range takes two numbers")
        d["q_range"] = tuple(d["q_range"])
    return RunConfig.from_dict(d)


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(ns)
    except (ConfigError, ValueError) as exc:
        print(f"lnt: invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        with OutputSet(cfg.out) as outputs:
            COMMANDS[cfg.subcommand](cfg, outputs)
    except (OSError, ValueError, ArithmeticError, IndexError) as exc:
        print(f"lnt {cfg.subcommand}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
