"""Command-line surface.

Exit codes: 0 on success, 2 for configuration or input-format problems,
3 for numerical failures raised by the library.  The environment
variable TWRC_THREADS caps the Monte Carlo worker count (0 or unset
picks the CPU count); TWRC_BACKEND selects the numba or numpy kernels.
"""

import json
import sys

import click
import numpy as np

from . import montecarlo as mc
from . import serialization as ser
from ._kernels import BACKEND
from ._version import __version__
from .errors import ParseError, TwrcError
from .linalg import gsvd, joint_decompose
from .optimize import (
    OptimizerSettings,
    WeightedObjective,
    _waterfill_cov,
    mac_covariance_optimize,
    pnc_power_allocate,
    sd_optimize,
)
from .rates import (
    PowerConfig,
    TwrcInstance,
    capacity_upper_bound,
    default_relay_covariance,
    downlink_rates,
    sd_effective_channels,
)
from .spectrum import aed, asymptotic_gap, normalized_gap, optimal_l_prime
from .validate import run_all

_EPILOG = (
    "CSV schemas: sweeps use scheme,snr_db,n_a,n_b,n_r,mean_sum_rate,"
    "stderr,trials,seed; regions use r_a,r_b,scheme; the aed table uses "
    "lambda,density,kind with kind in {density,point_mass} (point-mass "
    "rows carry the mass in the density column).  Floats are written "
    "with 17 significant digits.  TWRC_THREADS caps workers (0 = auto)."
)


@click.group(epilog=_EPILOG)
@click.version_option(__version__, message=f"twrc %(version)s ({BACKEND} kernels)")
def cli():
    """Two-way relay simulator: channel splitting, rates, Monte Carlo."""


def _load_channel(path, snr_db):
    ch = ser.load_channel(path)
    if snr_db is not None:
        P = 10.0 ** (snr_db / 10.0)
        ch = TwrcInstance(ch.H_AR, ch.H_BR, ch.H_RA, ch.H_RB,
                          PowerConfig(P, P, P, 1.0))
    return ch


def _emit_json(obj, out):
    text = json.dumps(obj, allow_nan=False, indent=1) + "\n"
    if out is None:
        click.echo(text, nl=False)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


@cli.command()
@click.option("--matrices", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Channel JSON (H_AR, H_BR as {rows,cols,re,im} objects).")
@click.option("--out", required=True, type=click.Path(dir_okay=False),
              help="Output JSON path.")
@click.option("--tol", default=1e-8, show_default=True,
              help="Eigenvalue classification tolerance.")
def decompose(matrices, out, tol):
    """Joint split of the two uplinks into shared/oblique/exclusive parts."""
    ch = ser.load_channel(matrices)
    jd = joint_decompose(ch.H_AR, ch.H_BR, tol=tol)
    ser.save_decomposition(out, jd)
    click.echo(f"k={jd.k} l={jd.l} d_A={jd.d_A} d_B={jd.d_B} -> {out}")


@cli.command()
@click.option("--matrices", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--snr-db", type=float, default=None,
              help="Override all powers with 10^(snr/10), N0 = 1.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Write JSON here instead of stdout.")
def rates(matrices, snr_db, out):
    """Per-scheme rates of one channel instance (equal weights)."""
    ch = _load_channel(matrices, snr_db)
    p = ch.power
    Q_R = default_relay_covariance(ch.n_R, p.P_R)
    ul_A, ul_B, dl_A, dl_B = capacity_upper_bound(
        ch, _waterfill_cov(ch.H_AR, p.P_A, p.N0),
        _waterfill_cov(ch.H_BR, p.P_B, p.N0), Q_R,
    )
    w = WeightedObjective(1.0, 1.0)
    s = OptimizerSettings()
    jd = joint_decompose(ch.H_AR, ch.H_BR)
    sd = sd_optimize(ch, jd, w, s)
    cd = mac_covariance_optimize(ch.H_AR, ch.H_BR, p.P_A, p.P_B, p.N0, w, s)
    blocks = sd_effective_channels(jd, jd.l)
    if jd.k + jd.l:
        alloc = pnc_power_allocate(gsvd(blocks.Ht_A, blocks.Ht_B),
                                   p.P_A, p.P_B, p.N0, w, s)
        gsvd_pair = (alloc.rates.R_A, alloc.rates.R_B)
    else:
        gsvd_pair = (0.0, 0.0)
    dl = downlink_rates(ch, Q_R)
    _emit_json({
        "blocks": {"k": jd.k, "l": jd.l, "d_A": jd.d_A, "d_B": jd.d_B},
        "upper_bound": {"ul_A": ul_A, "ul_B": ul_B, "dl_A": dl_A, "dl_B": dl_B},
        "sd": {"R_A": sd.rates.R_A, "R_B": sd.rates.R_B,
               "l_prime": sd.cfg.l_prime, "converged": sd.converged},
        "complete_decoding": {"R_A": cd.rates.R_A, "R_B": cd.rates.R_B,
                              "sum_cap": cd.pentagon.S_AB},
        "gsvd_pnc": {"R_A": gsvd_pair[0], "R_B": gsvd_pair[1]},
        "downlink": {"R_A": dl.R_A, "R_B": dl.R_B},
    }, out)


@cli.command()
@click.option("--matrices", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--snr-db", type=float, default=None)
@click.option("--schemes", default=",".join(mc.SCHEMES), show_default=True,
              help="Comma-separated subset.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def region(matrices, snr_db, schemes, out):
    """Achievable-region boundary points (CSV: r_a,r_b,scheme)."""
    ch = _load_channel(matrices, snr_db)
    wanted = tuple(s.strip() for s in schemes.split(",") if s.strip())
    pts = mc.region_points(ch, wanted)
    rows = []
    for scheme in mc.SCHEMES:
        if scheme in pts:
            rows.extend((float(ra), float(rb), scheme) for ra, rb in pts[scheme])
    ser.write_csv(out, mc.REGION_COLUMNS, rows)
    click.echo(f"{len(rows)} boundary points -> {out}")


@cli.command()
@click.option("--n-a", required=True, type=int)
@click.option("--n-b", required=True, type=int)
@click.option("--n-r", required=True, type=int)
@click.option("--snr-db", "snr_db", required=True,
              help="Comma-separated SNR list in dB.")
@click.option("--trials", default=10000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--schemes", default=",".join(mc.SCHEMES), show_default=True)
@click.option("--mode", default="uplink_sum", show_default=True,
              type=click.Choice(["uplink_sum", "min_uplink_downlink"]))
@click.option("--grid-points", default=11, show_default=True, type=int,
              help="Power-split grid size over [0, 1].")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def sweep(n_a, n_b, n_r, snr_db, trials, seed, schemes, mode, grid_points, out):
    """Monte Carlo sweep (CSV: scheme,snr_db,n_a,n_b,n_r,mean_sum_rate,...)."""
    try:
        snrs = tuple(float(s) for s in snr_db.split(","))
    except ValueError:
        raise click.UsageError(f"bad --snr-db list {snr_db!r}") from None
    if grid_points < 2:
        raise click.UsageError("--grid-points must be at least 2")
    sc = mc.Scenario(
        n_A=n_a, n_B=n_b, n_R=n_r, snr_db_list=snrs, trials=trials,
        seed=seed, schemes=tuple(s.strip() for s in schemes.split(",") if s.strip()),
        mode=mode,
        settings=OptimizerSettings(
            power_split_grid=tuple(np.linspace(0.0, 1.0, grid_points))
        ),
    )
    res = mc.run_scenario(sc)
    ser.write_csv(out, mc.SWEEP_COLUMNS, res.rows())
    click.echo(f"{sc.trials} trials, {len(sc.schemes)} schemes, "
               f"{res.resampled} resampled -> {out}")


@cli.command()
@click.option("--eta-a", type=float, default=None, help="Load factor n_A/n_R.")
@click.option("--eta-b", type=float, default=None, help="Load factor n_B/n_R.")
@click.option("--lambdas", default=None,
              help="Comma-separated pair eigenvalues in (1,2), descending.")
@click.option("--k", default=0, show_default=True, type=int,
              help="Count of fully shared directions preceding the pairs.")
@click.option("--l-prime", type=int, default=None,
              help="Forced split; defaults to the 8/5 rule.")
@click.option("--quad-tol", default=1e-8, show_default=True, type=float)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def asymptotic(eta_a, eta_b, lambdas, k, l_prime, quad_tol, out):
    """High-SNR gap: fixed eigenvalues (--lambdas) or the large-system
    per-antenna average (--eta-a/--eta-b)."""
    if quad_tol <= 0:
        raise click.UsageError("--quad-tol must be positive")
    if lambdas is not None:
        try:
            lam = tuple(float(x) for x in lambdas.split(","))
        except ValueError:
            raise click.UsageError(f"bad --lambdas list {lambdas!r}") from None
        if k < 0 or any(not 1.0 < x < 2.0 for x in lam):
            raise click.UsageError(
                "--lambdas entries must lie strictly inside (1, 2), --k >= 0"
            )
        lams = np.concatenate([np.full(k, 2.0), np.asarray(lam)])
        lp = optimal_l_prime(lams, k) if l_prime is None else l_prime
        _emit_json({
            "lambdas": list(lam), "k": k, "l_prime": lp,
            "gap_bits": asymptotic_gap(lams, k, lp),
        }, out)
        return
    if eta_a is None or eta_b is None:
        raise click.UsageError("need either --lambdas or both --eta-a/--eta-b")
    if not (0.0 < eta_a <= 1.0 and 0.0 < eta_b <= 1.0):
        raise click.UsageError("load factors must lie in (0, 1]")
    _emit_json({
        "eta_A": eta_a, "eta_B": eta_b,
        "normalized_gap_bits": normalized_gap(eta_a, eta_b, quad_tol),
    }, out)


@cli.command("aed")
@click.option("--eta-a", required=True, type=float)
@click.option("--eta-b", required=True, type=float)
@click.option("--points", default=512, show_default=True, type=int,
              help="Density sample count over (0, 2).")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def aed_cmd(eta_a, eta_b, points, out):
    """Limit eigenvalue law (CSV: lambda,density,kind)."""
    if points < 1:
        raise click.UsageError("--points must be positive")
    if not (0.0 < eta_a <= 1.0 and 0.0 < eta_b <= 1.0):
        raise click.UsageError("load factors must lie in (0, 1]")
    spec = aed(eta_a, eta_b)
    rows = [
        (0.0, spec.mass_at_0, "point_mass"),
        (1.0, spec.mass_at_1, "point_mass"),
        (2.0, spec.mass_at_2, "point_mass"),
    ]
    grid = np.linspace(0.0, 2.0, points + 2)[1:-1]
    dens = spec.density(grid)
    rows.extend((float(x), float(d), "density") for x, d in zip(grid, dens))
    ser.write_csv(out, ("lambda", "density", "kind"), rows)
    click.echo(f"{len(rows)} rows -> {out}")


@cli.command()
@click.option("--figure", required=True,
              type=click.Choice(["fig3", "fig4", "fig5", "fig6", "fig7", "fig8"]))
@click.option("--trials", default=2000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def reproduce(figure, trials, seed, out):
    """Regenerate a figure's data series as CSV."""
    table = mc.reproduce_figure(figure, trials, seed)
    ser.write_csv(out, table.columns, table.rows)
    click.echo(f"{figure}: {len(table.rows)} rows -> {out}")


@cli.command()
@click.option("--seed", default=0, show_default=True, type=int)
def validate(seed):
    """Run the randomized invariant suite and print a pass/fail report."""
    results = run_all(seed)
    failures = 0
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        failures += 0 if r.passed else 1
        click.echo(f"{mark} {r.name}: {r.detail}")
    if failures:
        raise TwrcError(f"{failures} of {len(results)} checks failed")
    click.echo(f"all {len(results)} checks passed")


def main(argv=None):
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 130
    except ParseError as e:
        click.echo(f"error: {e}", err=True)
        return 2
    except ValueError as e:
        click.echo(f"error: {e}", err=True)
        return 2
    except TwrcError as e:
        click.echo(f"error: {type(e).__name__}: {e}", err=True)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
