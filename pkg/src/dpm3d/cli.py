"""Command-line driver: convergence studies, perturbation runs and dumps.

Examples::

    dpm3d --test d1 --meshes 31,63,127
    dpm3d --test nl1 --meshes 31,63 --order 3 --out results/
    dpm3d --test d1 --meshes 31,63 --perturb d,theta --seed 7
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mms
from .geometry import PERTURB_FIELDS, TIME_RULES, GeometryError
from .lsq import SingularSystemError
from .metrics import ErrorReport, rates
from .timeloop import DPMRun, NumericalAbort

__all__ = ["RunConfig", "ConfigError", "parse_config", "run", "format_csv", "main"]

log = logging.getLogger("dpm3d")

CSV_NORMS = (
    "E_inf_bulk", "E_l2_bulk", "E_h1_bulk",
    "E_inf_surf", "E_l2_surf", "E_h1_surf",
    "E_inf_gradx", "E_inf_grady", "E_inf_gradz",
)
CSV_HEADER = "N," + ",".join(f"{n},rate" for n in CSV_NORMS) + ",cond_normal,seconds"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    test: str = "d1"
    meshes: tuple = (31,)
    harmonics: int | None = None
    order: int = 2
    perturb: tuple = ()
    seed: int = 0
    t_final: float = 0.1
    steps: int | None = None
    time_rule: str = "h"
    out: str | None = None
    dump_bulk: bool = False
    dump_surface: bool = False
    jobs: int = 1
    verbose: bool = False
    extra: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.test not in mms.TESTS:
            raise ConfigError(f"unknown test {self.test!r}; choose from {', '.join(mms.TESTS)}")
        if not self.meshes:
            raise ConfigError("at least one mesh is required")
        if any(n < 2 for n in self.meshes):
            raise ConfigError(f"mesh sizes must be >= 2, got {list(self.meshes)}")
        if any(b <= a for a, b in zip(self.meshes, self.meshes[1:])):
            raise ConfigError(f"meshes must be strictly increasing, got {list(self.meshes)}")
        if self.order not in (2, 3):
            raise ConfigError(f"--order must be 2 or 3, got {self.order}")
        if not (self.t_final > 0):
            raise ConfigError(f"--t-final must be positive, got {self.t_final}")
        if self.steps is not None and self.steps < 1:
            raise ConfigError(f"--steps must be positive, got {self.steps}")
        if self.time_rule not in TIME_RULES:
            raise ConfigError(f"--time-rule must be one of {', '.join(TIME_RULES)}, got {self.time_rule!r}")
        if self.harmonics is not None:
            l = int(round(self.harmonics**0.5))
            if self.harmonics < 1 or l * l != self.harmonics:
                raise ConfigError(f"--harmonics must be a perfect square (L = (lmax+1)^2), got {self.harmonics}")
        bad = [p for p in self.perturb if p not in PERTURB_FIELDS]
        if bad:
            raise ConfigError(f"unknown perturbation target(s) {bad}; choose from d, theta, phi")
        if self.jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {self.jobs}")
        return self


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from None


def _targets(text: str) -> tuple:
    if text.strip().lower() in ("", "none"):
        return ()
    if text.strip().lower() == "all":
        return tuple(PERTURB_FIELDS)
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


_CONVERTERS = {
    "test": str,
    "meshes": _int_list,
    "harmonics": int,
    "order": int,
    "perturb": _targets,
    "seed": int,
    "t_final": float,
    "steps": int,
    "time_rule": str,
    "out": str,
    "dump_bulk": _bool,
    "dump_surface": _bool,
    "jobs": int,
    "verbose": _bool,
}


def read_config_file(path: str | os.PathLike) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONVERTERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from None
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dpm3d",
        description="Difference potentials solver with manufactured-solution convergence studies.",
    )
    S = argparse.SUPPRESS
    p.add_argument("--config", help="key = value file; command-line flags take precedence")
    p.add_argument("--test", default=S, help=f"test id ({', '.join(mms.TESTS)})")
    p.add_argument("--meshes", default=S, help="comma-separated cells per axis, e.g. 31,63,127")
    p.add_argument("--harmonics", type=int, default=S, help="number of spherical harmonics L per term")
    p.add_argument("--order", type=int, default=S, help="linearization order for uv coupling (2 or 3)")
    p.add_argument("--perturb", default=S, help="perturb boundary data: any of d,theta,phi or 'all'")
    p.add_argument("--seed", type=int, default=S, help="perturbation seed")
    p.add_argument("--t-final", dest="t_final", type=float, default=S, help="final time (default 0.1)")
    p.add_argument("--steps", type=int, default=S, help="fix the number of time steps on every mesh")
    p.add_argument("--time-rule", dest="time_rule", choices=TIME_RULES, default=S,
                   help="'h': dt = h with floor(t_final/h) steps (default); 'exact': land on t_final")
    p.add_argument("--out", default=S, help="output directory (default $DPM_OUT_DIR or cwd)")
    p.add_argument("--dump-bulk", dest="dump_bulk", action="store_true", default=S,
                   help="write the final bulk field on M+")
    p.add_argument("--dump-surface", dest="dump_surface", action="store_true", default=S,
                   help="write the final surface field on the sampling grid")
    p.add_argument("--jobs", type=int, default=S, help="meshes to run concurrently")
    p.add_argument("--verbose", "-v", action="store_true", default=S, help="per-step diagnostics")
    return p


def parse_config(argv=None) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    values = {}
    if args.get("config"):
        values.update(read_config_file(args.pop("config")))
    args.pop("config", None)
    for key, raw in args.items():
        values[key] = _CONVERTERS[key](raw) if isinstance(raw, str) else raw
    if "out" not in values and os.environ.get("DPM_OUT_DIR"):
        values["out"] = os.environ["DPM_OUT_DIR"]
    return RunConfig(**values).validate()


def _fmt(x) -> str:
    return "" if x is None else "%.6e" % x


def format_csv(reports: list[ErrorReport]) -> str:
    per_norm = {n: rates(reports, n) for n in CSV_NORMS}
    lines = [CSV_HEADER]
    for i, rep in enumerate(reports):
        row = [str(rep.N)]
        for n in CSV_NORMS:
            row += [_fmt(getattr(rep, n)), _fmt(per_norm[n][i])]
        row += [_fmt(rep.cond_normal), _fmt(rep.seconds)]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _atomic_write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def bulk_dump(run: DPMRun, state) -> str:
    spec = run.spec
    x = spec.coords()
    j, k, l = np.nonzero(run.disc.sets.Mplus)
    vals = state.u[j, k, l]
    body = "\n".join(
        "%.10e %.10e %.10e %.10e" % row for row in zip(x[j], x[k], x[l], vals)
    )
    return f"# N={spec.N} R={spec.R} t={state.t}\n{body}\n"


def surface_dump(run: DPMRun, state) -> str:
    theta, phi = run.disc.surface_grid.angles()
    vals = run.surface_values(state.coeffs)
    body = "\n".join(
        "%.10e %.10e %.10e" % row for row in zip(theta.ravel(), phi.ravel(), vals.ravel())
    )
    return f"# N={run.spec.N} R={run.spec.R} t={state.t}\n{body}\n"


def _stem(cfg: RunConfig) -> str:
    stem = cfg.test
    if cfg.test in ("nl1", "nl2"):
        stem += f"_order{cfg.order}"
    if cfg.perturb:
        stem += "_perturb-" + "-".join(cfg.perturb) + f"_seed{cfg.seed}"
    return stem


def _run_mesh(cfg: RunConfig, N: int):
    run_ = DPMRun(
        cfg.test, N, L=cfg.harmonics, order=cfg.order, perturb=cfg.perturb,
        seed=cfg.seed, t_final=cfg.t_final, steps=cfg.steps, time_rule=cfg.time_rule,
    )
    report, state = run_.run()
    dumps = {}
    if cfg.dump_bulk:
        dumps["bulk"] = bulk_dump(run_, state)
    if cfg.dump_surface:
        dumps["surface"] = surface_dump(run_, state)
    return report, dumps


def run(cfg: RunConfig) -> list[ErrorReport]:
    """Run every mesh, write the CSV and dumps, return the reports."""
    cfg.validate()
    if cfg.jobs > 1 and len(cfg.meshes) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.jobs, len(cfg.meshes))) as ex:
            results = list(ex.map(_run_mesh, [cfg] * len(cfg.meshes), cfg.meshes))
    else:
        results = [_run_mesh(cfg, N) for N in cfg.meshes]
    reports = [r for r, _ in results]
    out = Path(cfg.out) if cfg.out else Path.cwd()
    stem = _stem(cfg)
    _atomic_write(out / f"{stem}_convergence.csv", format_csv(reports))
    for N, (_, dumps) in zip(cfg.meshes, results):
        for kind, text in dumps.items():
            _atomic_write(out / f"{stem}_N{N}_{kind}.txt", text)
    return reports


def _print_summary(reports: list[ErrorReport], stream=None):
    stream = sys.stdout if stream is None else stream
    r_inf = rates(reports, "E_inf_bulk")
    r_surf = rates(reports, "E_inf_surf")
    print(f"{'N':>5} {'E_inf_bulk':>12} {'rate':>6} {'E_inf_surf':>12} {'rate':>6} {'cond':>11} {'sec':>8}",
          file=stream)
    for rep, a, b in zip(reports, r_inf, r_surf):
        fa = f"{a:6.2f}" if a is not None else "     -"
        fb = f"{b:6.2f}" if b is not None else "     -"
        print(f"{rep.N:5d} {rep.E_inf_bulk:12.4e} {fa} {rep.E_inf_surf:12.4e} {fb} "
              f"{rep.cond_normal:11.4e} {rep.seconds:8.2f}", file=stream)


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except (ConfigError, GeometryError, OSError) as exc:
        print(f"dpm3d: error: {exc}", file=sys.stderr)
        return 2
    logging.basicConfig(
        level=logging.DEBUG if cfg.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        reports = run(cfg)
    except (ConfigError, GeometryError) as exc:
        print(f"dpm3d: error: {exc}", file=sys.stderr)
        return 2
    except (NumericalAbort, SingularSystemError, FloatingPointError) as exc:
        print(f"dpm3d: numerical failure: {exc}", file=sys.stderr)
        return 1
    _print_summary(reports)
    return 0


if __name__ == "__main__":
    sys.exit(main())
