"""Command-line interface for pkgeo."""

import argparse
import asyncio
import logging
import sys
from pathlib import Path

from rich.logging import RichHandler

from pkgeo import __version__
from pkgeo.basegeo import Rect
from pkgeo.congruence import AmbientSurface
from pkgeo.display import (
    console,
    print_constancy,
    print_error,
    print_report,
    print_success,
    print_warning,
)
from pkgeo.errors import SceneError
from pkgeo.expr import ScalarField
from pkgeo.flatlab import MinimalFamilySpec, build_minimal
from pkgeo.lagrangian import SWEEP_QUANTITIES, TBImmersion, sweep
from pkgeo.models import (
    EXIT_CHECK_FAILED,
    EXIT_DOMAIN_ERROR,
    EXIT_INTERRUPTED,
    EXIT_OK,
    EXIT_SCENE_ERROR,
    Report,
    Settings,
)
from pkgeo.scene import CongruenceRequest, build_objects, load_scene, packaged_scene
from pkgeo.suites import (
    CHARTS,
    DOMAIN_ERRORS,
    SCENE_ERRORS,
    THEOREM_SUITES,
    congruence_surfaces,
    flat_export,
    format_grid_csv,
    gather_jobs,
    merge_tolerances,
    request_job,
    run_scene,
    run_suites,
)

logger = logging.getLogger("pkgeo")


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, help="Write the report (or CSV grid) here instead of stdout")
    common.add_argument("--seed", type=int, help="Random seed (default: $PKGEO_SEED or 0)")
    common.add_argument("--samples", type=int, help="Random samples per structure check (default: 100)")
    common.add_argument("--grid", type=int, help="Grid resolution N of sweeps and congruence checks (default: 16)")
    common.add_argument("--tol-null", type=float, help="Null threshold on |EG - F^2| (default: 1e-10)")
    common.add_argument("--quad-order", type=int, help="Gauss-Legendre order per axis (default: 32)")
    common.add_argument("--verbose", action="store_true", help="Debug logging and tracebacks")
    return common


def parse_args(argv: list[str] | None = None) -> argparse.Namespace:
    """Parse command-line arguments.

    Args:
        argv: Arguments without the program name (default: sys.argv[1:])

    Returns:
        Parsed arguments
    """
    common = _common_flags()
    parser = argparse.ArgumentParser(
        prog="pkgeo",
        description="pkgeo: pseudo-Kähler geometry of tangent bundles of surfaces",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  # Run a packaged golden scene
  pkgeo run scenes/affine_normal_bundle.json

  # Structure suite on the sphere chart
  pkgeo verify-structure --chart sphere --samples 100 --seed 7

  # Rank-one, rank-two and flat-case suites
  pkgeo verify-theorems --chart all

  # Congruence identities for a scene or a named test surface
  pkgeo congruence --scene scenes/cylinder.json
  pkgeo congruence --surface ellipsoid

  # Lagrangian angle grid of a flat gradient graph
  pkgeo flatlab --u "sin(s)+cos(t)" --grid 32 --out beta.csv
  pkgeo flatlab --beta0 0.5 --f1 "x^3" --f2 "sin(x)"

  # Export one immersion of a scene as a CSV grid
  pkgeo grid-export scenes/doubly_periodic.json --target graph --quantities defect H
        """,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="Run every request of a scene file")
    run.add_argument("scene", help="Scene file, or the name of a packaged scene")

    structure = sub.add_parser("verify-structure", parents=[common], help="Invariants of (J, G, Omega) and D")
    structure.add_argument("--chart", choices=(*CHARTS, "all"), default="all", help="Catalog chart (default: all)")

    theorems = sub.add_parser("verify-theorems", parents=[common], help="Rank-one, rank-two and flat-case suites")
    theorems.add_argument("--chart", choices=(*CHARTS, "all"), default="all", help="Catalog chart (default: all)")
    theorems.add_argument(
        "--suite", nargs="+", choices=THEOREM_SUITES, default=list(THEOREM_SUITES), help="Suites to run (default: all)"
    )

    congruence = sub.add_parser("congruence", parents=[common], help="Normal congruence identities")
    source = congruence.add_mutually_exclusive_group()
    source.add_argument("--scene", help="Scene file with congruence, variation or rank_profile requests")
    source.add_argument("--surface", choices=sorted(congruence_surfaces()), help="Named test surface")

    flatlab = sub.add_parser("flatlab", parents=[common], help="Lagrangian angle grids in the flat case")
    flatlab.add_argument("--u", help="Potential u(s, t) of the gradient graph")
    flatlab.add_argument("--beta0", type=float, help="Constant angle of the minimal family")
    flatlab.add_argument("--f1", help="First profile f1(x) of the minimal family")
    flatlab.add_argument("--f2", help="Second profile f2(x) of the minimal family")
    flatlab.add_argument(
        "--domain", type=float, nargs=4, metavar=("S0", "S1", "T0", "T1"), default=[-1.0, 1.0, -1.0, 1.0],
        help="Parameter rectangle (default: -1 1 -1 1)",
    )

    export = sub.add_parser("grid-export", parents=[common], help="CSV grid of one immersion of a scene")
    export.add_argument("scene", help="Scene file, or the name of a packaged scene")
    export.add_argument("--target", required=True, help="Name of the immersion object")
    export.add_argument(
        "--quantities", nargs="+", choices=SWEEP_QUANTITIES, default=["defect", "rank", "E", "F", "G", "H"],
        help="Quantities per cell (default: defect rank E F G H)",
    )

    return parser.parse_args(argv)


def _configure_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


def _settings(args: argparse.Namespace) -> Settings:
    return Settings.from_env().with_overrides(
        seed=args.seed,
        samples=args.samples,
        grid=args.grid,
        tol_null=args.tol_null,
        quad_order=args.quad_order,
    )


def _scene_path(text: str) -> Path:
    """A scene file on disk, else the packaged scene of the same name."""
    path = Path(text)
    if path.is_file():
        return path
    return packaged_scene(path.stem)


def _emit(text: str, out: Path | None, what: str) -> None:
    if out is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    print_success(f"Wrote {what} to {out}")


def _finish(report: Report, args: argparse.Namespace, title: str) -> int:
    _emit(report.to_json(), args.out, "report")
    print_report(report, title)
    return report.exit_code


def _charts(choice: str) -> tuple[str, ...]:
    return CHARTS if choice == "all" else (choice,)


async def _run(args: argparse.Namespace, settings: Settings) -> int:
    scene = load_scene(_scene_path(args.scene))
    out_dir = args.out.parent if args.out else Path.cwd()
    report = await run_scene(scene, settings, out_dir)
    return _finish(report, args, f"SCENE {args.scene}")


async def _verify_structure(args: argparse.Namespace, settings: Settings) -> int:
    report = await run_suites(("structure",), settings, _charts(args.chart))
    return _finish(report, args, "STRUCTURE SUITE")


async def _verify_theorems(args: argparse.Namespace, settings: Settings) -> int:
    report = await run_suites(tuple(args.suite), settings, _charts(args.chart))
    return _finish(report, args, "THEOREM SUITES")


async def _congruence(args: argparse.Namespace, settings: Settings) -> int:
    if args.scene:
        return await _run(args, settings)
    if args.surface:
        surface: AmbientSurface = congruence_surfaces()[args.surface]
        request = CongruenceRequest(op="congruence", target=args.surface)
        tolerances = merge_tolerances(None)
        job = request_job(request, {args.surface: surface}, None, settings, tolerances, Path.cwd())
        results = await gather_jobs([("congruence", args.surface, job)])
        report = Report(version=__version__, seed=settings.seed, tolerances=tolerances, results=results)
        return _finish(report, args, f"CONGRUENCE {args.surface}")
    report = await run_suites(("congruence",), settings)
    return _finish(report, args, "CONGRUENCE SUITE")


def _flat_potential(args: argparse.Namespace, domain: Rect) -> ScalarField:
    if args.u is not None:
        if args.beta0 is not None or args.f1 or args.f2:
            raise SceneError("give either --u or --beta0/--f1/--f2, not both")
        return ScalarField.parse(args.u)
    if args.beta0 is None or not args.f1 or not args.f2:
        raise SceneError("flatlab needs --u, or all of --beta0, --f1 and --f2")
    spec = MinimalFamilySpec.parse(args.beta0, args.f1, args.f2)
    console.print(f"beta0 = {spec.beta0:+.9f}, V = ({spec.direction[0]:+.9f}, {spec.direction[1]:+.9f})")
    return build_minimal(spec, domain).u


async def _flatlab(args: argparse.Namespace, settings: Settings) -> int:
    domain = Rect(*args.domain)
    u = _flat_potential(args, domain)
    names, rows, constancy = await asyncio.to_thread(flat_export, u, domain, settings.grid, settings.tol_null)
    _emit(format_grid_csv(names, rows), args.out, "angle grid")
    print_constancy(constancy)
    return EXIT_OK


async def _grid_export(args: argparse.Namespace, settings: Settings) -> int:
    scene = load_scene(_scene_path(args.scene))
    objects = build_objects(scene)
    target = objects.get(args.target)
    if target is None:
        raise SceneError(f"scene has no object named '{args.target}'")
    if not isinstance(target, TBImmersion):
        raise SceneError(f"'{args.target}' is not an immersion into the tangent bundle")
    report = await asyncio.to_thread(sweep, target, settings.grid, tuple(args.quantities), settings.tol_null)
    _emit(format_grid_csv(list(report.values), report.rows()), args.out, "grid")
    skipped = sum(report.skipped.values())
    if skipped:
        print_warning(f"{skipped} cell evaluations skipped (null locus or stencil faults)")
    return EXIT_OK


COMMANDS = {
    "run": _run,
    "verify-structure": _verify_structure,
    "verify-theorems": _verify_theorems,
    "congruence": _congruence,
    "flatlab": _flatlab,
    "grid-export": _grid_export,
}


async def main_async(argv: list[str] | None = None) -> int:
    """Main async entry point.

    Returns:
        Exit code: 0 all checks passed, 1 a check failed, 2 scene or
        parse error, 3 domain error, 130 interrupted
    """
    args = parse_args(argv)
    _configure_logging(args.verbose)

    try:
        settings = _settings(args)
        logger.debug("settings: %s", settings)
        return await COMMANDS[args.command](args, settings)

    except KeyboardInterrupt:
        console.print("\n[yellow]Interrupted by user[/yellow]")
        return EXIT_INTERRUPTED
    except SCENE_ERRORS as e:
        print_error(str(e))
        return EXIT_SCENE_ERROR
    except DOMAIN_ERRORS as e:
        print_error(str(e))
        return EXIT_DOMAIN_ERROR
    except Exception as e:
        print_error(str(e))
        if args.verbose:
            import traceback

            console.print("\n[dim]" + traceback.format_exc() + "[/dim]")
        # remaining ValueErrors are bad input (flags, environment, rectangles)
        return EXIT_SCENE_ERROR if isinstance(e, ValueError) else EXIT_CHECK_FAILED


def main(argv: list[str] | None = None) -> int:
    """Main entry point (synchronous wrapper).

    Returns:
        Exit code
    """
    try:
        return asyncio.run(main_async(argv))
    except KeyboardInterrupt:
        console.print("\n[yellow]Interrupted by user[/yellow]")
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    sys.exit(main())
