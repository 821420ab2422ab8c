"""Command-line front end.

Subcommands: ``optimize`` runs the grid described by a config file,
``evaluate`` scores a fixed strategy container, ``bound`` prints analytic
reference values, ``decompose`` turns a comb container into tooth isometries
and reports residuals, ``split`` recomputes the resource-splitting column of
a results table, and ``plot`` renders a table to SVG.

The ``optimize`` exit code is 0 only if every grid point converged.
"""

from __future__ import annotations

import functools
import math
import sys

import click
import numpy as np

from . import __version__
from .analytic import (evaluate_fixed_strategy, parallel_dephasing_bound,
                       perp_damping_optimal, perp_dephasing_qfi2,
                       teeth_from_strategy_container)
from .bench import (apply_split, load_config, make_model, read_rows,
                    run_experiment, write_rows)
from .channels import VARIANTS
from .comb import decompose_to_isometries, load_comb, reconstruct_choi
from .plot import PlotStyle, write_plot
from .tensors import load_container

__all__ = ["main"]


def _friendly(fn):
    """Surface input validation errors as one-line messages."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValueError as exc:
            raise click.ClickException(str(exc))
    return wrapper


@click.group()
@click.version_option(version=__version__, prog_name="combqfi")
def main():
    """Optimal adaptive strategies for quantum channel estimation."""


@main.command(name="optimize")
@click.argument("config", type=click.Path(exists=True, dir_okay=False))
@_friendly
def optimize_cmd(config):
    """Run the see-saw over the grid in CONFIG (exit 0 iff all converged)."""
    cfg = load_config(config)
    rows = run_experiment(cfg)
    for row in rows:
        click.echo("%s p=%g C=%g N=%d d_A=%d seed=%d qfi=%.10g "
                   "converged=%s" % (row.model, row.p, row.c, row.n,
                                     row.d_a, row.seed, row.qfi,
                                     row.converged))
    csv_path = cfg.resolved_csv_path()
    if csv_path:
        click.echo("results: %s" % csv_path)
    plot_path = cfg.resolved_plot_path()
    if plot_path:
        write_plot(plot_path, rows, PlotStyle(title=cfg.variant))
        click.echo("plot: %s" % plot_path)
    if not all(row.converged and math.isfinite(row.qfi) for row in rows):
        sys.exit(1)


@main.command(name="evaluate")
@click.argument("strategy_file", type=click.Path(exists=True,
                                                 dir_okay=False))
@click.option("--variant", type=click.Choice(VARIANTS), required=True,
              help="Noise model to link the strategy with.")
@click.option("--p", type=float, default=0.0, help="Noise parameter.")
@click.option("--c", type=float, default=0.0,
              help="Correlation parameter (correlated models).")
@click.option("--phi", type=float, default=0.0, help="Working point.")
@_friendly
def evaluate_cmd(strategy_file, variant, p, c, phi):
    """Score a fixed strategy container against a noise model."""
    box = load_container(strategy_file)
    teeth = teeth_from_strategy_container(box)
    model = make_model(variant, p, c)
    qfi = evaluate_fixed_strategy(teeth, model, len(teeth), phi)
    click.echo("n=%d model=%s qfi=%s qfi_per_n=%s"
               % (len(teeth), variant, repr(qfi), repr(qfi / len(teeth))))


@main.command(name="bound")
@click.option("--variant", type=click.Choice(VARIANTS), required=True)
@click.option("--p", type=float, required=True)
@click.option("--n", type=int, default=1, help="Number of channel uses.")
@_friendly
def bound_cmd(variant, p, n):
    """Print the analytic reference value for a model."""
    if variant == "dephasing_parallel":
        value = parallel_dephasing_bound(n, p)
    elif variant == "dephasing_perp":
        if n != 2:
            raise click.UsageError(
                "the transversal dephasing closed form is for n=2")
        value = perp_dephasing_qfi2(p)
    elif variant == "damping_perp":
        value = perp_damping_optimal(n, p).fi
    else:
        raise click.UsageError("no analytic reference for %s" % variant)
    click.echo(repr(float(value)))


@main.command(name="decompose")
@click.argument("comb_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--cutoff", type=float, default=1e-10,
              help="Rank cutoff for the tooth eigendecompositions.")
@_friendly
def decompose_cmd(comb_file, cutoff):
    """Decompose a comb container into tooth isometries."""
    comb = load_comb(comb_file)
    seq = decompose_to_isometries(comb, cutoff=cutoff)
    click.echo("n=%d d_anc=%d bond dims=%s"
               % (seq.n, seq.d_anc, list(seq.a_dims)))
    for k, (vmat, res) in enumerate(zip(seq.isometries, seq.residuals),
                                    start=1):
        ortho = float(np.linalg.norm(
            vmat.conj().T @ vmat - np.eye(vmat.shape[1])))
        click.echo("tooth %d: shape %dx%d isometry residual=%.3e "
                   "connector residual=%.3e"
                   % (k, vmat.shape[0], vmat.shape[1], ortho, res))
    recon = float(np.linalg.norm(reconstruct_choi(seq)
                                 - comb.choi_matrix()))
    click.echo("reconstruction residual=%.3e" % recon)
    for message in seq.warnings:
        click.echo("warning: %s" % message)


@main.command(name="split")
@click.argument("results_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", type=click.Path(dir_okay=False), default="",
              help="Output table (default: rewrite in place).")
@_friendly
def split_cmd(results_csv, output):
    """Recompute the resource-splitting column of a results table."""
    rows = apply_split(read_rows(results_csv))
    target = output or results_csv
    write_rows(target, rows)
    click.echo("wrote %d rows to %s" % (len(rows), target))


@main.command(name="plot")
@click.argument("results_csv", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", type=click.Path(dir_okay=False),
              default="plot.svg", help="SVG output path.")
@click.option("--title", default="", help="Chart title.")
@_friendly
def plot_cmd(results_csv, output, title):
    """Render a results table to an SVG chart."""
    rows = read_rows(results_csv)
    write_plot(output, rows, PlotStyle(title=title))
    click.echo("plot: %s" % output)


if __name__ == "__main__":
    main()
