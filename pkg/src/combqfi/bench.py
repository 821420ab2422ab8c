"""Experiment orchestration: config files, result tables, splitting.

One structured config file describes a whole experiment (model, the
(N, d_A, seed) grid, solver and convergence overrides, output paths); the
runner drives one see-saw optimization per grid point on a bounded worker
pool and appends one CSV row per finished point.  Points already present in
the output file are skipped, keyed by (model, p, C, N, d_A, seed), so an
interrupted run resumes where it stopped and ends with the identical row
set.  When the grid completes, the table is rewritten with the
resource-splitting column filled in.

Environment variables COMBQFI_CSV_PATH and COMBQFI_PLOT_PATH override the
configured output paths (and nothing else).
"""

from __future__ import annotations

import csv
import math
import os
from concurrent import futures
from dataclasses import dataclass, replace

import yaml

from .channels import (VARIANTS, correlated_dephasing, damping_parallel,
                       damping_perp, dephasing_parallel, dephasing_perp,
                       noiseless)
from .seesaw import IssConfig, optimize

__all__ = [
    "COLUMNS",
    "ExperimentConfig",
    "ResultRow",
    "append_row",
    "apply_split",
    "best_split",
    "load_config",
    "make_model",
    "read_rows",
    "run_experiment",
    "write_rows",
]

CSV_ENV = "COMBQFI_CSV_PATH"
PLOT_ENV = "COMBQFI_PLOT_PATH"

COLUMNS = ("model", "p", "C", "N", "d_A", "seed", "qfi", "qfi_per_n",
           "split_qfi_per_n", "iterations", "wall_ms", "converged")


def make_model(variant, p=0.0, c=0.0):
    """Build a noise model from its config name."""
    if variant == "noiseless":
        return noiseless()
    if variant == "dephasing_perp":
        return dephasing_perp(p)
    if variant == "dephasing_parallel":
        return dephasing_parallel(p)
    if variant == "damping_perp":
        return damping_perp(p)
    if variant == "damping_parallel":
        return damping_parallel(p)
    if variant == "correlated_dephasing":
        return correlated_dephasing(p, c)
    raise ValueError("unknown model variant %r (have %s)"
                     % (variant, ", ".join(VARIANTS)))


# ---------------------------------------------------------------------------
# result rows


@dataclass(frozen=True)
class ResultRow:
    """One grid point.  A failed point keeps NaN information and
    converged = False; the run carries on."""

    model: str
    p: float
    c: float
    n: int
    d_a: int
    seed: int
    qfi: float
    qfi_per_n: float
    split_qfi_per_n: float
    iterations: int
    wall_ms: float
    converged: bool

    def __post_init__(self):
        if math.isfinite(self.qfi) and self.qfi < -1e-12:
            raise ValueError("qfi must be nonnegative")
        if (math.isfinite(self.split_qfi_per_n)
                and math.isfinite(self.qfi_per_n)
                and self.split_qfi_per_n < self.qfi_per_n - 1e-9):
            raise ValueError("splitting may not lose information")

    def key(self):
        return (self.model, self.p, self.c, self.n, self.d_a, self.seed)

    def to_csv(self):
        return [self.model, repr(float(self.p)), repr(float(self.c)),
                str(self.n), str(self.d_a), str(self.seed),
                repr(float(self.qfi)), repr(float(self.qfi_per_n)),
                repr(float(self.split_qfi_per_n)), str(self.iterations),
                repr(float(self.wall_ms)), str(bool(self.converged))]

    @classmethod
    def from_csv(cls, row):
        if len(row) != len(COLUMNS):
            raise ValueError("expected %d columns, got %d"
                             % (len(COLUMNS), len(row)))
        return cls(model=row[0], p=float(row[1]), c=float(row[2]),
                   n=int(row[3]), d_a=int(row[4]), seed=int(row[5]),
                   qfi=float(row[6]), qfi_per_n=float(row[7]),
                   split_qfi_per_n=float(row[8]), iterations=int(row[9]),
                   wall_ms=float(row[10]), converged=row[11] == "True")


def write_rows(path, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for row in sorted(rows, key=ResultRow.key):
            writer.writerow(row.to_csv())


def append_row(path, row):
    fresh = not os.path.exists(path)
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(COLUMNS)
        writer.writerow(row.to_csv())


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if tuple(header or ()) != COLUMNS:
            raise ValueError("unexpected results header %r" % (header,))
        return [ResultRow.from_csv(row) for row in reader if row]


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    variant: str
    p: float = 0.0
    c: float = 0.0
    n_list: tuple = (1,)
    d_a_list: tuple = (2,)
    seeds: tuple = (0,)
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    max_sweeps: int = 300
    threshold: float = 1e-4
    window: int = 5
    q0: float = 0.05
    gamma: float = 0.8
    q_converge: float = 1e-8
    restarts: int = 3
    phi: float = 0.0
    csv_path: str = "results.csv"
    plot_path: str = ""
    workers: int = 0

    def __post_init__(self):
        make_model(self.variant, self.p, self.c)
        if not self.n_list or not self.d_a_list or not self.seeds:
            raise ValueError("n, d_a and seed lists must be nonempty")
        if any(int(n) < 1 for n in self.n_list):
            raise ValueError("every N must be at least 1")
        if any(int(d) < 1 for d in self.d_a_list):
            raise ValueError("every d_A must be at least 1")
        if self.workers < 0:
            raise ValueError("workers must be nonnegative")
        object.__setattr__(self, "n_list",
                           tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "d_a_list",
                           tuple(int(d) for d in self.d_a_list))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))

    def iss_config(self, d_a, seed):
        return IssConfig(d_a=d_a, max_sweeps=self.max_sweeps,
                         threshold=self.threshold, window=self.window,
                         q0=self.q0, gamma=self.gamma,
                         q_converge=self.q_converge, seed=seed,
                         restarts=self.restarts, phi=self.phi,
                         sdp_feas_tol=self.feas_tol,
                         sdp_gap_tol=self.gap_tol)

    def resolved_csv_path(self):
        return os.environ.get(CSV_ENV) or self.csv_path

    def resolved_plot_path(self):
        return os.environ.get(PLOT_ENV) or self.plot_path


_CONFIG_KEYS = {
    "model": {"variant": "variant", "p": "p", "c": "c"},
    "grid": {"n": "n_list", "d_a": "d_a_list", "seeds": "seeds"},
    "solver": {"feas_tol": "feas_tol", "gap_tol": "gap_tol"},
    "convergence": {"max_sweeps": "max_sweeps", "threshold": "threshold",
                    "window": "window", "q0": "q0", "gamma": "gamma",
                    "q_converge": "q_converge", "restarts": "restarts",
                    "phi": "phi"},
    "output": {"csv": "csv_path", "plot": "plot_path"},
}


def load_config(path):
    """Parse one experiment config file (YAML mapping, documented keys)."""
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ValueError("config must be a mapping")
    kwargs = {}
    for section, content in doc.items():
        if section == "workers":
            kwargs["workers"] = int(content)
            continue
        if section not in _CONFIG_KEYS:
            raise ValueError("unknown config section %r" % section)
        if not isinstance(content, dict):
            raise ValueError("config section %r must be a mapping" % section)
        for key, value in content.items():
            if key not in _CONFIG_KEYS[section]:
                raise ValueError("unknown key %r in section %r"
                                 % (key, section))
            field = _CONFIG_KEYS[section][key]
            if field.endswith("_list") or field == "seeds":
                kwargs[field] = tuple(value)
            else:
                kwargs[field] = value
    if "variant" not in kwargs:
        raise ValueError("config must set model.variant")
    return ExperimentConfig(**kwargs)


# ---------------------------------------------------------------------------
# the grid runner


def _run_point(args):
    variant, p, c, n, iss = args
    try:
        res = optimize(make_model(variant, p, c), n, iss)
        return ResultRow(model=variant, p=p, c=c, n=n, d_a=iss.d_a,
                         seed=iss.seed, qfi=res.qfi, qfi_per_n=res.qfi / n,
                         split_qfi_per_n=res.qfi / n, iterations=res.sweeps,
                         wall_ms=res.wall_ms, converged=bool(res.converged))
    except Exception:
        nan = float("nan")
        return ResultRow(model=variant, p=p, c=c, n=n, d_a=iss.d_a,
                         seed=iss.seed, qfi=nan, qfi_per_n=nan,
                         split_qfi_per_n=nan, iterations=0, wall_ms=0.0,
                         converged=False)


def run_experiment(cfg):
    """Run every grid point not already on disk; return the full table.

    The split column is a placeholder while points stream in and is filled
    by the dynamic program once the grid is complete.
    """
    path = cfg.resolved_csv_path()
    done = {}
    if path and os.path.exists(path):
        done = {row.key(): row for row in read_rows(path)}
    rows, pending = [], []
    for n in cfg.n_list:
        for d_a in cfg.d_a_list:
            for seed in cfg.seeds:
                key = (cfg.variant, float(cfg.p), float(cfg.c), n, d_a, seed)
                if key in done:
                    rows.append(done[key])
                else:
                    pending.append((cfg.variant, float(cfg.p), float(cfg.c),
                                    n, cfg.iss_config(d_a, seed)))
    workers = cfg.workers or os.cpu_count() or 1
    if pending:
        if workers == 1 or len(pending) == 1:
            produced = map(_run_point, pending)
            for row in produced:
                if path:
                    append_row(path, row)
                rows.append(row)
        else:
            with futures.ProcessPoolExecutor(
                    max_workers=min(workers, len(pending))) as pool:
                for row in pool.map(_run_point, pending):
                    if path:
                        append_row(path, row)
                    rows.append(row)
    rows = apply_split(rows)
    if path:
        write_rows(path, rows)
    return sorted(rows, key=ResultRow.key)


# ---------------------------------------------------------------------------
# information splitting


def best_split(table):
    """Best Fisher information when N uses may be split into repetitions.

    Independent repetitions add their information, so
    F_split(N) = max(F(N), max_n F(n) + F_split(N - n)) over the sizes the
    table provides (missing sizes simply cannot appear in a partition).
    """
    if not table:
        return {}
    n_max = max(int(n) for n in table)
    if min(int(n) for n in table) < 1:
        raise ValueError("table sizes must be positive")
    neg = float("-inf")
    raw = [neg] * (n_max + 1)
    for n, v in table.items():
        raw[int(n)] = float(v)
    fs = [neg] * (n_max + 1)
    for m in range(1, n_max + 1):
        best = raw[m]
        for j in range(1, m):
            if raw[j] != neg and fs[m - j] != neg:
                cand = raw[j] + fs[m - j]
                if cand > best:
                    best = cand
        fs[m] = best
    return {n: fs[int(n)] for n in table}


def apply_split(rows):
    """Fill split_qfi_per_n per (model, p, C, d_A, seed) series."""
    groups = {}
    for row in rows:
        groups.setdefault((row.model, row.p, row.c, row.d_a, row.seed),
                          []).append(row)
    out = []
    for members in groups.values():
        table = {row.n: row.qfi for row in members
                 if math.isfinite(row.qfi)}
        fs = best_split(table)
        for row in members:
            if row.n in fs:
                out.append(replace(row, split_qfi_per_n=fs[row.n] / row.n))
            else:
                out.append(row)
    return sorted(out, key=ResultRow.key)
