# Command-line surface: python -m app.cli <command> ...
"""
Exit codes: 0 on success, 1 when a reproduction misses its published target,
2 when the toolkit refuses the input (SpotRingsError).
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from .core.config import LOG_FORMAT, settings
from .core.errors import SpotRingsError
from .core.outputs import write_json
from .models.kernel import find_zeros, kernel_hash, save_kernel
from .models.profile import PdeParams, save_profile
from .models.schemas import OdeSimulationRequest, PdeSimulationRequest, RingFindRequest, StabilityRequest
from .services.pde_service import PdeService
from .services.profile_service import ProfileService, compare_zeros
from .services.reproduction_service import K3, ReproductionService, radius_mismatches
from .services.ring_service import RingService
from .services.simulation_service import SimulationService

logger = logging.getLogger("spotrings")

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_REFUSED = 2


def _emit(data) -> None:
    print(json.dumps(data, indent=2, default=str))


def _ring_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--N", type=int, required=True, help="number of spots")
    p.add_argument("--branch", type=int, default=1, help="binding radius index")
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--k3", type=float, default=0.3)
    p.add_argument("--Q", type=float, default=None, help="single-spot coefficient (default: fig1 value)")
    p.add_argument("--kind", choices=["stationary", "traveling", "rotating"], default="stationary")
    p.add_argument("--angle", type=float, default=0.0)


def _reduced_fields(args) -> dict:
    out = {"N": args.N, "branch": args.branch, "tau": args.tau, "k3": args.k3, "kernel": args.kernel,
           "kind": args.kind, "angle": args.angle}
    if args.Q is not None:
        out["Q"] = args.Q
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spotrings", description=__doc__)
    parser.add_argument("--out-dir", type=Path, default=settings.output_dir)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=settings.threads)
    parser.add_argument("--kernel", default=settings.kernel_source, help="'builtin:fig1' or a kernel JSON path")
    parser.add_argument("--log-level", default=settings.log_level)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("profile", help="solve the radial single-spot profile")
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--R", type=float, default=0.6)
    p.add_argument("--n", type=int, default=2048)
    p.add_argument("--with-interaction", action="store_true")

    p = sub.add_parser("kernel", help="interaction kernel tools")
    ks = p.add_subparsers(dest="action", required=True)
    k = ks.add_parser("fit", help="fit the closed form to the profile-derived interaction")
    k.add_argument("--d-b", type=float, default=0.12)
    k = ks.add_parser("zeros", help="classified zeros of the kernel")
    k.add_argument("--d-hi", type=float, default=0.5)

    p = sub.add_parser("rings", help="ring solutions")
    rs = p.add_subparsers(dest="action", required=True)
    _ring_args(rs.add_parser("find"))

    p = sub.add_parser("stability", help="linear stability of a ring, or a whole table")
    p.add_argument("target", nargs="?", choices=["ring", "table"], default="ring")
    p.add_argument("--N", type=int, default=None)
    p.add_argument("--branch", type=int, default=1)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--k3", type=float, default=0.3)
    p.add_argument("--Q", type=float, default=None)
    p.add_argument("--kind", choices=["stationary", "traveling", "rotating"], default="stationary")
    p.add_argument("--angle", type=float, default=0.0)
    p.add_argument("--full-range", action="store_true")
    p.add_argument("--which", type=int, choices=[1, 2, 3], default=1)

    p = sub.add_parser("odesim", help="reduced-model simulations")
    os_ = p.add_subparsers(dest="action", required=True)
    o = os_.add_parser("run")
    _ring_args(o)
    o.add_argument("--model", choices=["first", "second"], default=None)
    o.add_argument("--mode", type=int, default=None, help="Fourier mode of the perturbation")
    o.add_argument("--amplitude", type=float, default=1e-4)
    o.add_argument("--t-end", type=float, default=1000.0)
    o.add_argument("--n-samples", type=int, default=1001)

    p = sub.add_parser("pdesim", help="pseudo-spectral PDE simulations")
    ps = p.add_subparsers(dest="action", required=True)
    q = ps.add_parser("run")
    q.add_argument("--N", type=int, default=3)
    q.add_argument("--branch", type=int, default=2)
    q.add_argument("--r0", type=float, default=None)
    q.add_argument("--tau", type=float, default=0.1)
    q.add_argument("--nx", type=int, default=128)
    q.add_argument("--dt", type=float, default=0.05)
    q.add_argument("--t-end", type=float, default=50.0)
    q.add_argument("--record-every", type=float, default=1.0)
    q.add_argument("--kick", type=float, nargs=2, default=None)

    p = sub.add_parser("reproduce", help="regenerate published tables and curves")
    rp = p.add_subparsers(dest="action", required=True)
    r = rp.add_parser("table")
    r.add_argument("--which", choices=["1", "2", "3", "all"], default="all")
    r = rp.add_parser("radius-curve")
    r.add_argument("--N", type=int, nargs="+", default=[2, 3, 4, 5])
    r.add_argument("--dtau-max", type=float, default=0.05, help="largest tau - tau_c on the grid")
    r.add_argument("--n-tau", type=int, default=200)
    r = rp.add_parser("radius-vs-n")
    r.add_argument("--n-min", type=int, default=2)
    r.add_argument("--n-max", type=int, default=12)
    r.add_argument("--max-branch", type=int, default=2)
    r = rp.add_parser("cross-validate")
    _ring_args(r)
    r.add_argument("--with-profile", action="store_true")
    r.add_argument("--with-pde", action="store_true")
    r.add_argument("--t-end", type=float, default=4e4)
    return parser


def cmd_profile(args) -> int:
    service = ProfileService(args.R, args.n)
    params = PdeParams.fig1(tau=args.tau)
    summary = service.summary(params, with_interaction=args.with_interaction)
    save_profile(service.profile(params), args.out_dir / "profile.csv")
    write_json(summary, args.out_dir / "profile_summary.json")
    _emit(summary)
    return EXIT_OK


def cmd_kernel(args) -> int:
    ring_service = RingService(args.kernel)
    if args.action == "zeros":
        _emit(ring_service.zeros(args.kernel, args.d_hi))
        return EXIT_OK
    result = ProfileService().derived_kernel(d_b=args.d_b)
    path = save_kernel(result.params, args.out_dir / "kernel_fit.json")
    reference = ring_service.kernel("builtin:fig1")
    tabulated = find_zeros(result.params, args.d_b, 0.35)
    gap = compare_zeros(tabulated, reference, args.d_b, 0.35)
    _emit({"params": result.params.to_dict(), "rms": result.rms, "converged": result.converged,
           "kernel_sha1": kernel_hash(result.params), "path": str(path), "zero_gap_vs_fig1": gap})
    return EXIT_OK if gap < 5e-3 else EXIT_MISMATCH


def cmd_rings(args) -> int:
    _emit(RingService(args.kernel).find_ring(RingFindRequest(**_reduced_fields(args))))
    return EXIT_OK


def cmd_stability(args) -> int:
    if args.target == "table":
        result = ReproductionService(args.kernel, args.threads).reproduce_table(args.which, out_dir=args.out_dir)
        grid = result.frame.pivot(index="branch", columns="N", values="verdict")
        print(grid.to_string())
        return EXIT_OK
    if args.N is None:
        raise SpotRingsError("stability needs --N (or the 'table' target)")
    request = StabilityRequest(**_reduced_fields(args), full_range=args.full_range)
    _emit(RingService(args.kernel).stability(request))
    return EXIT_OK


def cmd_odesim(args) -> int:
    request = OdeSimulationRequest(**_reduced_fields(args), model=args.model, perturb_mode=args.mode,
                                   perturb_amplitude=args.amplitude, t_end=args.t_end,
                                   n_samples=args.n_samples, seed=args.seed)
    _emit(SimulationService().run_ode(request, out_dir=args.out_dir))
    return EXIT_OK


def cmd_pdesim(args) -> int:
    request = PdeSimulationRequest(N=args.N, branch=args.branch, r0=args.r0, tau=args.tau, nx=args.nx, ny=args.nx,
                                   dt=args.dt, t_end=args.t_end, record_every=args.record_every,
                                   kick=list(args.kick) if args.kick else None)
    result = PdeService().run_pde(request, out_dir=args.out_dir)
    _emit({k: v for k, v in result.items() if k != "tracks"})
    return EXIT_OK


def cmd_reproduce(args) -> int:
    kwargs = {"Q": args.Q} if getattr(args, "Q", None) is not None else {}
    service = ReproductionService(args.kernel, args.threads, **kwargs)
    if args.action == "table":
        tables = [1, 2, 3] if args.which == "all" else [int(args.which)]
        ok = True
        for which in tables:
            result = service.reproduce_table(which, out_dir=args.out_dir)
            print(f"Table {which}:")
            print(result.frame.pivot(index="branch", columns="N", values="verdict").to_string())
            for _, cell in result.mismatches.iterrows():
                print(f"  mismatch N={cell['N']} branch={cell['branch']}: {cell['verdict']} "
                      f"(published {cell['published_ode']})")
            ok = ok and result.matches
        return EXIT_OK if ok else EXIT_MISMATCH
    if args.action == "radius-curve":
        info = []
        for N in args.N:
            tau_c = 1.0 / K3
            grid = tau_c + np.linspace(args.dtau_max / args.n_tau, args.dtau_max, args.n_tau)
            _, meta = service.radius_curve(N, grid, out_dir=args.out_dir)
            info.append(meta)
        _emit(info)
        return EXIT_OK
    if args.action == "radius-vs-n":
        frame = service.radius_vs_N(range(args.n_min, args.n_max + 1), args.max_branch, out_dir=args.out_dir)
        print(frame.to_string(index=False))
        problems = radius_mismatches(frame, service.kernel)
        for problem in problems:
            print(f"  mismatch {problem}")
        return EXIT_MISMATCH if problems else EXIT_OK
    report = service.cross_validate(args.N, args.branch, args.tau, args.kind, with_profile=args.with_profile,
                                    with_pde=args.with_pde, seed=args.seed, ode_t_end=args.t_end,
                                    out_dir=args.out_dir)
    _emit(report.to_dict())
    if report.published_ode is not None and report.analytic != report.published_ode:
        return EXIT_MISMATCH
    return EXIT_OK


COMMANDS = {
    "profile": cmd_profile,
    "kernel": cmd_kernel,
    "rings": cmd_rings,
    "stability": cmd_stability,
    "odesim": cmd_odesim,
    "pdesim": cmd_pdesim,
    "reproduce": cmd_reproduce,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format=LOG_FORMAT)
    args.out_dir = Path(args.out_dir)
    try:
        return COMMANDS[args.command](args)
    except SpotRingsError as e:
        logger.error(f"{args.command} refused: {str(e)}")
        return EXIT_REFUSED
    except ValidationError as e:
        logger.error(f"{args.command}: invalid arguments: {str(e)}")
        return EXIT_REFUSED


if __name__ == "__main__":
    sys.exit(main())
