"""
Command-line interface.

Every subcommand writes CSV curves or JSON reports carrying a provenance
record (tool version, resolved parameters, seed). Exit codes: 0 success,
1 compute failure (JSON error on stderr), 2 usage error.
"""
import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence

import numpy as np

from . import io
from .config import Config, load_setup_record, resolve_setup
from .emitter import CavityFilter, EmitterParams, emission_spectrum
from .errors import QDPhononError
from .experiment import (
    SetupImperfections,
    analyze_hom,
    fit_fringe_contrast,
    synthetic_fringe_contrast,
    synthetic_hom_experiment,
)
from .phonon import PhononParams, dephasing_rate
from .tempfit import (
    ParameterPrior,
    fit_report,
    fit_visibility,
    synthetic_visibility_dataset,
    visibility_curve,
)

logger = logging.getLogger(__name__)

SPECTRUM_MODE_FLAGS = {"full": "full", "zpl": "zpl", "sideband-only": "sideband"}


#
# Argument groups
#
def _add_phonon_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("phonon model")
    g.add_argument("--preset", choices=["QD1", "QD2"], help="published (alpha, nu_c, mu) set")
    g.add_argument("--alpha", type=float, help="coupling strength alpha, ps^2")
    g.add_argument("--nu-c", type=float, help="cut-off frequency nu_c, ps^-1")
    g.add_argument("--mu", type=float, help="virtual-process probability mu, ps^2")


def _add_setup_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("emitter and filter")
    g.add_argument("--setup", type=Path, help="JSON or key=value record with gamma/T1, kappa, delta")
    g.add_argument("--t1-ps", type=float, help="radiative lifetime T1, ps (default 1100)")
    g.add_argument("--gamma-ps-inv", type=float, help="radiative rate, ps^-1")
    g.add_argument("--kappa-mev", type=float, help="cavity width, meV (default 4.5)")
    g.add_argument("--kappa-ps-inv", type=float, help="cavity width, ps^-1")
    g.add_argument("--delta-mev", type=float, help="QD-cavity detuning, meV (default 0)")
    g.add_argument("--delta-ps-inv", type=float, help="QD-cavity detuning, ps^-1")


def _add_sweep_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("temperature sweep")
    g.add_argument("--t-min", type=float, default=2.0, help="first temperature, K")
    g.add_argument("--t-max", type=float, default=30.0, help="last temperature, K")
    g.add_argument("--steps", type=int, default=29, help="number of temperatures")


def _add_output_args(p: argparse.ArgumentParser, what: str = "CSV") -> None:
    p.add_argument("-o", "--output", type=Path, help=f"{what} output path (default stdout)")


#
# Resolution helpers
#
def _phonon(args: argparse.Namespace, parser: argparse.ArgumentParser) -> PhononParams:
    values = {"alpha": args.alpha, "nu_c": args.nu_c, "mu": args.mu}
    if args.preset:
        base = PhononParams.from_preset(args.preset)
        values = {k: getattr(base, k) if v is None else v for k, v in values.items()}
    missing = [k for k, v in values.items() if v is None]
    if missing:
        parser.error("missing " + ", ".join("--" + k.replace("_", "-") for k in missing)
                     + " (or use --preset)")
    return PhononParams(**values)


def _setup(args: argparse.Namespace) -> Dict[str, float]:
    """Resolve gamma, kappa, delta: flags override the --setup record, which overrides QD1 defaults."""
    record: Dict[str, Any] = {"T1_ps": 1100.0, "kappa_meV": 4.5}
    if args.setup is not None:
        loaded = load_setup_record(args.setup)
        record = {"gamma_ps_inv": loaded["gamma"], "kappa_ps_inv": loaded["kappa"],
                  "delta_ps_inv": loaded["delta"]}
    pairs = (("gamma_ps_inv", args.gamma_ps_inv, "T1_ps", args.t1_ps),
             ("kappa_ps_inv", args.kappa_ps_inv, "kappa_meV", args.kappa_mev),
             ("delta_ps_inv", args.delta_ps_inv, "delta_meV", args.delta_mev))
    for direct, direct_value, alternate, alternate_value in pairs:
        if direct_value is not None or alternate_value is not None:
            record[direct] = direct_value
            record[alternate] = alternate_value
    return resolve_setup(record)


def _emitter_filter(args: argparse.Namespace):
    s = _setup(args)
    return EmitterParams(s["gamma"]), CavityFilter(s["kappa"], s["delta"]), s


def _temperatures(args: argparse.Namespace, parser: argparse.ArgumentParser) -> np.ndarray:
    if args.steps < 1 or args.t_min <= 0 or args.t_max < args.t_min:
        parser.error("need 0 < --t-min <= --t-max and --steps >= 1")
    return np.linspace(args.t_min, args.t_max, args.steps)


def _require_file(path: Optional[Path], flag: str, parser: argparse.ArgumentParser) -> Path:
    if path is None or not path.is_file():
        parser.error(f"{flag}: file not found: {path}")
    return path


def _phonon_dict(p: PhononParams) -> Dict[str, float]:
    return {"alpha_ps2": p.alpha, "nu_c_ps_inv": p.nu_c, "mu_ps2": p.mu}


def _seed(args: argparse.Namespace, *inputs: Path) -> Optional[int]:
    """Seed recorded by the first input carrying a provenance line, else --seed."""
    for path in inputs:
        meta = io.read_table_meta(path)
        if meta and meta.get("seed") is not None:
            return int(meta["seed"])
    return args.seed


def _prior(args: argparse.Namespace) -> Optional[ParameterPrior]:
    centers = {"alpha": args.prior_alpha, "nu_c": args.prior_nu_c, "mu": args.prior_mu}
    if all(v is None for v in centers.values()):
        return None
    return ParameterPrior(**centers, rel_width=args.prior_width)


#
# Subcommands
#
def cmd_gamma(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    p = _phonon(args, parser)
    temps = _temperatures(args, parser)
    rows = np.column_stack([temps, [dephasing_rate(p, T) for T in temps]])
    meta = io.provenance({**_phonon_dict(p), "temperatures_K": temps}, args.seed)
    io.write_table(args.output or sys.stdout, ("temperature_K", "gamma_pd_ps_inv"), rows, meta)
    return 0


def cmd_spectrum(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    p = _phonon(args, parser)
    e, f, s = _emitter_filter(args)
    if args.points < 2 or args.omega_max <= args.omega_min:
        parser.error("need --omega-max > --omega-min and --points >= 2")
    omega = np.linspace(args.omega_min, args.omega_max, args.points)
    mode = SPECTRUM_MODE_FLAGS[args.mode]
    values = emission_spectrum(omega, e, f, p, args.temperature_k, mode=mode,
                               sideband_mode=args.sideband_mode)
    meta = io.provenance({**_phonon_dict(p), **s, "temperature_K": args.temperature_k,
                          "mode": mode, "sideband_mode": args.sideband_mode}, args.seed)
    io.write_table(args.output or sys.stdout, ("omega_ps_inv", "S"),
                   np.column_stack([omega, values]), meta)
    return 0


def cmd_visibility(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    p = _phonon(args, parser)
    e, f, s = _emitter_filter(args)
    temps = _temperatures(args, parser)
    full = visibility_curve(p, e, f, temps, "full", args.weight)
    sideband = visibility_curve(p, e, f, temps, "sideband_only", args.weight)
    meta = io.provenance({**_phonon_dict(p), **s, "weight": args.weight}, args.seed)
    io.write_table(args.output or sys.stdout, ("temperature_K", "I_full", "I_sideband_only"),
                   np.column_stack([temps, full[:, 1], sideband[:, 1]]), meta)
    return 0


def cmd_fit_visibility(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    data_path = _require_file(args.data, "--data", parser)
    if args.preset is None and all(v is None for v in (args.alpha, args.nu_c, args.mu)):
        args.preset = "QD1"
    init = _phonon(args, parser)
    e, f, s = _emitter_filter(args)
    data = io.read_dataset(data_path, e, f)
    prior = _prior(args)
    seed = _seed(args, data_path)
    params, result = fit_visibility(data, init, weight=args.weight, max_starts=args.max_starts,
                                    prior=prior)
    report = fit_report(data, params, result, args.weight, prior)
    report["provenance"] = io.provenance({"init": _phonon_dict(init), **s,
                                          "data": str(data_path)}, seed)
    io.write_json(args.output, report)
    if args.curve is not None:
        temps = np.linspace(data.temperatures[0], data.temperatures[-1], args.curve_points)
        curve = visibility_curve(params, e, f, temps, "full", args.weight)
        io.write_table(args.curve, ("temperature_K", "I_full"), curve,
                       io.provenance({**_phonon_dict(params), **s}, seed))
    return 0


def cmd_fts(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    data_path = _require_file(args.data, "--data", parser)
    fit = fit_fringe_contrast(io.read_fringe(data_path))
    report = fit.to_dict()
    report["provenance"] = io.provenance({"data": str(data_path)}, _seed(args, data_path))
    io.write_json(args.output, report)
    return 0


def cmd_hom(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    hbt_path = _require_file(args.hbt, "--hbt", parser)
    hom_path = _require_file(args.hom, "--hom", parser)
    setup = SetupImperfections(args.reflectance, args.transmittance, args.contrast_squared)
    report = analyze_hom(io.read_histogram(hbt_path), io.read_histogram(hom_path), setup,
                         t1_ns=args.t1_ns).to_dict()
    report["provenance"] = io.provenance({
        "hbt": str(hbt_path), "hom": str(hom_path), "R": setup.R, "T": setup.T,
        "C2": setup.C2, "t1_ns": args.t1_ns}, _seed(args, hbt_path, hom_path))
    io.write_json(args.output, report)
    return 0


def cmd_synth(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    rng = np.random.default_rng(args.seed)
    out: Path = args.output
    if out is None:
        parser.error("synth needs --output")
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.kind == "fringe":
        data = synthetic_fringe_contrast(args.t2_ps, args.eta, rng, noise=args.noise)
        meta = io.provenance({"T2_ps": args.t2_ps, "eta": args.eta, "noise": args.noise},
                             args.seed)
        io.write_fringe(out, data, meta)
    elif args.kind == "hom":
        setup = SetupImperfections.from_preset()
        hbt, hom, truth = synthetic_hom_experiment(args.v_tpi, rng, setup,
                                                   background_fraction=args.background_fraction)
        meta = io.provenance(truth, args.seed)
        io.write_histogram(out.with_name(out.stem + "_hbt.csv"), hbt, meta)
        io.write_histogram(out.with_name(out.stem + "_hom.csv"), hom, meta)
    else:
        p = _phonon(args, parser)
        e, f, s = _emitter_filter(args)
        temps = _temperatures(args, parser)
        data = synthetic_visibility_dataset(p, e, f, temps, rng if args.noise > 0 else None,
                                            relative_noise=args.noise or 0.03)
        io.write_dataset(out, data, io.provenance({**_phonon_dict(p), **s,
                                                   "noise": args.noise}, args.seed))
    return 0


#
# Parser
#
def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qdphonon",
        description="Phonon dephasing and two-photon interference of quantum-dot sources",
    )
    parser.add_argument("--log-level", default=None,
                        help="logging level (default: QDPHONON_LOG_LEVEL or WARNING)")
    parser.add_argument("--seed", type=int, default=Config.get_default_seed(),
                        help="seed recorded in outputs and used by synth")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gamma", help="pure-dephasing rate against temperature")
    _add_phonon_args(p)
    _add_sweep_args(p)
    _add_output_args(p)
    p.set_defaults(func=cmd_gamma, parser=p)

    p = sub.add_parser("spectrum", help="emission spectrum at one temperature")
    _add_phonon_args(p)
    _add_setup_args(p)
    p.add_argument("--temperature-k", type=float, default=4.0, help="temperature, K")
    p.add_argument("--omega-min", type=float, default=-30.0, help="first frequency, ps^-1")
    p.add_argument("--omega-max", type=float, default=30.0, help="last frequency, ps^-1")
    p.add_argument("--points", type=int, default=601, help="number of frequencies")
    p.add_argument("--mode", choices=sorted(SPECTRUM_MODE_FLAGS), default="full")
    p.add_argument("--sideband-mode", choices=["exact", "weak_coupling"], default="exact")
    _add_output_args(p)
    p.set_defaults(func=cmd_spectrum, parser=p)

    p = sub.add_parser("visibility", help="indistinguishability against temperature")
    _add_phonon_args(p)
    _add_setup_args(p)
    _add_sweep_args(p)
    p.add_argument("--weight", choices=["printed", "emission", "amplitude_cutoff"],
                   default="printed", help="sideband weight of the filtered fraction")
    _add_output_args(p)
    p.set_defaults(func=cmd_visibility, parser=p)

    p = sub.add_parser("fit-visibility", help="fit (alpha, nu_c, mu) to visibility data")
    p.add_argument("--data", type=Path, required=True,
                   help="CSV temperature_K,visibility,sigma")
    _add_phonon_args(p)
    _add_setup_args(p)
    p.add_argument("--weight", choices=["printed", "emission", "amplitude_cutoff"],
                   default="printed")
    p.add_argument("--max-starts", type=int, default=None, help="limit multi-start count")
    g = p.add_argument_group("prior")
    g.add_argument("--prior-alpha", type=float, help="independent estimate of alpha, ps^2")
    g.add_argument("--prior-nu-c", type=float, help="independent estimate of nu_c, ps^-1")
    g.add_argument("--prior-mu", type=float, help="independent estimate of mu, ps^2")
    g.add_argument("--prior-width", type=float, default=0.1,
                   help="relative standard deviation of the estimates")
    p.add_argument("--curve", type=Path, help="CSV path for the fitted curve")
    p.add_argument("--curve-points", type=int, default=57)
    _add_output_args(p, "JSON")
    p.set_defaults(func=cmd_fit_visibility, parser=p)

    p = sub.add_parser("fts", help="fit T2 and eta to a fringe-contrast trace")
    p.add_argument("--data", type=Path, required=True, help="CSV delay_ps,contrast,sigma")
    _add_output_args(p, "JSON")
    p.set_defaults(func=cmd_fts, parser=p)

    p = sub.add_parser("hom", help="HBT/HOM histogram analysis and TPI visibility")
    p.add_argument("--hbt", type=Path, required=True, help="HBT CSV delay_ns,counts (+ .json)")
    p.add_argument("--hom", type=Path, required=True, help="HOM CSV delay_ns,counts (+ .json)")
    p.add_argument("--reflectance", type=float, default=0.430, help="beam-splitter R")
    p.add_argument("--transmittance", type=float, default=0.570, help="beam-splitter T")
    p.add_argument("--contrast-squared", type=float, default=0.98,
                   help="interferometer contrast squared C^2")
    p.add_argument("--t1-ns", type=float, default=None,
                   help="fix the peak decay time, ns (fitted when omitted)")
    _add_output_args(p, "JSON")
    p.set_defaults(func=cmd_hom, parser=p)

    p = sub.add_parser("synth", help="write seeded synthetic inputs")
    p.add_argument("kind", choices=["fringe", "hom", "dataset"])
    p.add_argument("--t2-ps", type=float, default=770.0, help="fringe: T2, ps")
    p.add_argument("--eta", type=float, default=0.45, help="fringe: Gaussian fraction")
    p.add_argument("--v-tpi", type=float, default=0.79, help="hom: planted visibility")
    p.add_argument("--background-fraction", type=float, default=0.1,
                   help="hom: laser share of the central bunch")
    p.add_argument("--noise", type=float, default=0.02,
                   help="fringe: absolute noise; dataset: relative noise (0 = noiseless)")
    _add_phonon_args(p)
    _add_setup_args(p)
    _add_sweep_args(p)
    _add_output_args(p, "CSV")
    p.set_defaults(func=cmd_synth, parser=p)
    return parser


def _configure_logging(level: Optional[str]) -> None:
    name = (level or Config.get_env("QDPHONON_LOG_LEVEL", "WARNING")).upper()
    logging.basicConfig(level=getattr(logging, name, logging.WARNING), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _report_error(command: str, error: Exception, unexpected: bool = False) -> None:
    record: Dict[str, Any] = {"error": type(error).__name__, "message": str(error),
                              "command": command}
    if unexpected:
        record["unexpected"] = True
    sys.stderr.write(json.dumps(record) + "\n")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    _configure_logging(args.log_level)
    handler: Callable[[argparse.Namespace, argparse.ArgumentParser], int] = args.func
    try:
        return handler(args, args.parser)
    except SystemExit as e:
        return int(e.code or 0)
    except (QDPhononError, OSError) as e:
        logger.debug("%s failed", args.command, exc_info=True)
        _report_error(args.command, e)
        return 1
    except Exception as e:
        logger.debug("%s failed unexpectedly", args.command, exc_info=True)
        _report_error(args.command, e, unexpected=True)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
