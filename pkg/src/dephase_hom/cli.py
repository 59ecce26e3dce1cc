"""
Command-line front end.

Subcommands
-----------
predict    visibility curves V(delta_t) or V(T) as CSV
simulate   synthetic coincidence histogram plus pattern and summary JSON
analyze    peak-area visibility from a histogram file
fit        parameter fits to visibility or fringe-contrast CSV data
mc         Monte-Carlo visibility estimate

Exit codes: 0 success, 2 configuration error, 3 data error, 4 fit did not
converge.
"""

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import BACKEND
from .analysis import (fit_exponential_contrast, fit_peak_areas,
                       fit_visibility_vs_dt, fit_visibility_vs_temperature,
                       read_contrast_csv, read_visibility_csv, visibility_estimate,
                       write_fit_result)
from .errors import DomainError, FitError, ParseError, UnsupportedConfigurationError
from .histogram import (DEFAULT_BIN_WIDTH, PeakShape, cluster_overlap_map,
                        enumerate_coincidence_pattern, read_histogram,
                        synthesize_histogram, write_histogram)
from .hom import mc_visibility
from .model import (REP_PERIOD_NS, BeamsplitterParams, EmitterParams, PhononModel,
                    PulseSequence, tpi_visibility, visibility_temperature_curve)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NOCONV = 4


class ConfigError(Exception):
    pass


# --------------------------------------------------------------------------
# argument helpers
# --------------------------------------------------------------------------

def _gamma_ph_arg(text):
    if text == "free":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'free', got {text!r}")


def _width_arg(text):
    if text == "fit":
        return text
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'fit', got {text!r}")


def _add_emitter(p):
    p.add_argument("--gamma-rad", type=float, default=0.85, help="radiative rate, 1/ns")
    p.add_argument("--gamma-sd-max", type=float, default=1.02,
                   help="saturated spectral-diffusion rate, 1/ns")
    p.add_argument("--tau-c", type=float, default=12.0, help="correlation time, ns")
    p.add_argument("--gamma-ph", type=_gamma_ph_arg, default=None,
                   help="phonon dephasing rate, 1/ns (fit: number or 'free')")
    p.add_argument("--gamma0", type=float, default=None, help="temperature-law prefactor")
    p.add_argument("--alpha", type=float, default=None, help="temperature-law energy, K")
    p.add_argument("--temp", type=float, default=None, help="temperature, K")


def _emitter(args):
    if args.gamma0 is not None or args.alpha is not None:
        if args.gamma_ph is not None:
            raise ConfigError("give either --gamma-ph or (--gamma0, --alpha), not both")
        phonon = PhononModel.thermal(args.gamma0, args.alpha)
    else:
        g = args.gamma_ph if args.gamma_ph is not None else 0.0
        if isinstance(g, str):
            raise ConfigError("--gamma-ph free is only meaningful for 'fit --kind dt'")
        phonon = PhononModel.fixed(g)
    return EmitterParams(args.gamma_rad, args.gamma_sd_max, args.tau_c, phonon)


def _config_echo(args):
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _provenance(args):
    return {"toolkit": "dephase_hom", "version": __version__, "config": _config_echo(args)}


def _write_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sibling(out, suffix):
    out = Path(out)
    return out.with_name(out.stem + suffix)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_predict(args):
    kind = args.kind or "dt"
    n = args.points
    if n < 2:
        raise ConfigError("--points must be >= 2")
    if kind == "dt":
        lo, hi = args.range if args.range else (0.1, 14.0)
        params = _emitter(args)
        if params.phonon.is_fixed is False and args.temp is None:
            raise ConfigError("a temperature law needs --temp")
        xs = np.linspace(lo, hi, n)
        vs = [tpi_visibility(float(x), args.temp, params) for x in xs]
    elif kind == "temperature":
        lo, hi = args.range if args.range else (5.0, 45.0)
        if args.gamma0 is None or args.alpha is None:
            raise ConfigError("--kind temperature needs --gamma0 and --alpha")
        xs = np.linspace(lo, hi, n)
        vs = [visibility_temperature_curve(float(t), args.gamma0, args.alpha) for t in xs]
    else:
        raise ConfigError(f"predict supports --kind dt|temperature, got {kind!r}")
    lines = [f"# {json.dumps(_provenance(args), sort_keys=True)}", "x,v"]
    lines += [f"{float(x)!r},{float(v)!r}" for x, v in zip(xs, vs)]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args):
    if args.seed is None:
        raise ConfigError("simulate needs --seed")
    if not args.out:
        raise ConfigError("simulate needs --out")
    t0 = time.perf_counter()
    params = _emitter(args)
    seq = PulseSequence(args.delta_t, args.rep_period)
    bs = BeamsplitterParams.from_refl(args.refl)
    v = tpi_visibility(seq, args.temp, params)
    n_periods = 3 + 2
    pattern = enumerate_coincidence_pattern(seq.delta_t, seq.rep_period, n_periods, v, bs)
    if args.shape == "lorentzian":
        shape = PeakShape.lorentzian(args.width if args.width else 1.6)
    else:
        shape = PeakShape.emission(params.gamma_rad)
    h = synthesize_histogram(pattern, shape, int(args.counts), bin_width=args.bin_width,
                             seed=args.seed, noise=args.noise)
    h.meta["provenance"] = _provenance(args)
    write_histogram(args.out, h)
    pattern_doc = pattern.to_dict()
    pattern_doc["provenance"] = _provenance(args)
    _write_json(_sibling(args.out, ".pattern.json"), pattern_doc)
    summary = {"provenance": _provenance(args), "visibility": v,
               "regime": cluster_overlap_map(seq.delta_t, seq.rep_period).regime,
               "counts_in_histogram": float(np.sum(h.counts)),
               "timing_s": round(time.perf_counter() - t0, 3), "backend": BACKEND}
    _write_json(_sibling(args.out, ".summary.json"), summary)
    print(f"V = {v:.6f}; histogram written to {args.out}")
    return EXIT_OK


def _meta_float(meta, key, fallback):
    val = meta.get(key, fallback)
    return None if val is None else float(val)


def _matched_shape(meta, width):
    """Peak shape recorded by ``simulate``; ``width`` overrides its width."""
    kind = meta.get("shape")
    if kind not in ("lorentzian", "two_sided_exponential"):
        raise ConfigError("--shape matched needs a histogram written by 'simulate'")
    w = float(meta["width_ns"]) if width in (None, "fit") else float(width)
    return PeakShape(kind, w, float(meta.get("irf_fwhm_ns", 0.0)))


def cmd_analyze(args):
    if not args.inp:
        raise ConfigError("analyze needs --in")
    t0 = time.perf_counter()
    h = read_histogram(args.inp)
    delta_t = args.delta_t if args.delta_t is not None else _meta_float(h.meta, "delta_t_ns", None)
    rep = args.rep_period if args.rep_period is not None else _meta_float(
        h.meta, "rep_period_ns", REP_PERIOD_NS)
    if delta_t is None:
        raise ConfigError("pulse separation unknown: pass --delta-t")
    omap = cluster_overlap_map(delta_t, rep)
    if omap.regime == "unsupported":
        raise UnsupportedConfigurationError(
            f"unsupported peak layout for delta_t={delta_t}: {omap.reason}. Valid estimators: "
            "A1 (no overlap), A2 (first-order partners overlap), A3 (delta_t = rep period)")
    reach = max(abs(h.t_min), abs(h.t_max))
    n_periods = int(math.ceil(reach / rep)) + 2
    bs = BeamsplitterParams.from_refl(_meta_float(h.meta, "refl", 0.5))
    pattern = enumerate_coincidence_pattern(delta_t, rep, n_periods, 0.0, bs)
    if args.shape == "matched":
        width = _matched_shape(h.meta, args.width)
    else:
        width = args.width if args.width is not None else "fit"
    areas = fit_peak_areas(h, pattern, width=width)
    point = visibility_estimate(areas, omap)
    print(f"V = {point.v:.4f} +/- {point.sigma:.4f} ({point.regime})"
          + (" [flagged]" if point.flagged else ""))
    if args.out:
        _write_json(args.out, {"provenance": _provenance(args), "x": point.x, "v": point.v,
                               "sigma": point.sigma, "regime": point.regime,
                               "flagged": point.flagged, "areas": areas.to_dict(),
                               "timing_s": round(time.perf_counter() - t0, 3)})
    return EXIT_OK


def cmd_fit(args):
    if not args.inp:
        raise ConfigError("fit needs --in")
    kind = args.kind or "dt"
    boot = args.bootstrap
    if kind == "dt":
        points = read_visibility_csv(args.inp)
        g = args.gamma_ph if args.gamma_ph is not None else 0.0
        res = fit_visibility_vs_dt(points, args.gamma_rad, g, bootstrap=boot, seed=args.seed or 0)
    elif kind == "temperature":
        res = fit_visibility_vs_temperature(read_visibility_csv(args.inp), bootstrap=boot,
                                            seed=args.seed or 0)
    elif kind == "michelson":
        res = fit_exponential_contrast(read_contrast_csv(args.inp), bootstrap=boot,
                                       seed=args.seed or 0)
    else:
        raise ConfigError(f"fit supports --kind dt|temperature|michelson, got {kind!r}")
    text = "  ".join(f"{k} = {res.params[k]:.6g} +/- {res.sigmas[k]:.2g}" for k in res.names)
    print(text)
    if args.out:
        write_fit_result(args.out, res, extra={"provenance": _provenance(args), "kind": kind})
    if not res.converged:
        print(f"fit did not converge: {res.message}", file=sys.stderr)
        return EXIT_NOCONV
    return EXIT_OK


def cmd_mc(args):
    if args.seed is None:
        raise ConfigError("mc needs --seed")
    params = _emitter(args)
    bs = BeamsplitterParams.from_refl(args.refl)
    est = mc_visibility(params, PulseSequence(args.delta_t, args.rep_period), args.temp, bs,
                        seed=args.seed, n=args.samples, shards=args.shards)
    exact = tpi_visibility(PulseSequence(args.delta_t, args.rep_period), args.temp, params)
    print(f"V_mc = {est.mean:.5f} +/- {est.stderr:.5f}  (analytic {exact:.5f})")
    if args.out:
        doc = est.to_dict()
        doc.update({"analytic": exact, "provenance": _provenance(args)})
        _write_json(args.out, doc)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="dephase-hom",
                                     description="Two-photon interference under dephasing.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("predict", help="visibility curves as CSV")
    _add_emitter(p)
    p.add_argument("--kind", choices=["dt", "temperature"], default="dt")
    p.add_argument("--range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--points", type=int, default=140)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="synthetic coincidence histogram")
    _add_emitter(p)
    p.add_argument("--delta-t", type=float, default=REP_PERIOD_NS)
    p.add_argument("--rep-period", type=float, default=REP_PERIOD_NS)
    p.add_argument("--refl", type=float, default=0.5)
    p.add_argument("--seed", type=int)
    p.add_argument("--counts", type=float, default=1e6)
    p.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH)
    p.add_argument("--shape", choices=["emission", "lorentzian"], default="emission")
    p.add_argument("--width", type=float, default=None, help="Lorentzian FWHM, ns")
    p.add_argument("--noise", choices=["poisson", "multinomial"], default="poisson")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="visibility from a histogram file")
    p.add_argument("--in", dest="inp")
    p.add_argument("--delta-t", type=float, default=None)
    p.add_argument("--rep-period", type=float, default=None)
    p.add_argument("--width", type=_width_arg, default=None,
                   help="Lorentzian FWHM in ns, or 'fit' (default)")
    p.add_argument("--shape", choices=["lorentzian", "matched"], default="lorentzian",
                   help="fit Lorentzians, or the shape recorded in the file header")
    p.add_argument("--out")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("fit", help="fit visibility or contrast data")
    p.add_argument("--kind", choices=["dt", "temperature", "michelson"], default="dt")
    p.add_argument("--in", dest="inp")
    p.add_argument("--gamma-rad", type=float, default=0.85)
    p.add_argument("--gamma-ph", type=_gamma_ph_arg, default=None)
    p.add_argument("--bootstrap", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("mc", help="Monte-Carlo visibility")
    _add_emitter(p)
    p.add_argument("--delta-t", type=float, default=REP_PERIOD_NS)
    p.add_argument("--rep-period", type=float, default=REP_PERIOD_NS)
    p.add_argument("--refl", type=float, default=0.5)
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--shards", type=int, default=1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_mc)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnsupportedConfigurationError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOCONV


if __name__ == "__main__":
    sys.exit(main())
