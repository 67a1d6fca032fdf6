"""Terminal display functions for pkgeo.

Human-facing output goes to stderr so stdout carries only JSON reports and
CSV grids.
"""

from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table

from pkgeo.flatlab import AngleConstancy
from pkgeo.models import Report, RequestResult


console = Console(stderr=True)


def _status(result: RequestResult) -> str:
    if result.error is not None:
        return f"💥 {result.error_kind.upper() if result.error_kind else 'ERROR'}"
    return "✅ PASS" if result.success else "❌ FAIL"


def print_report(report: Report, title: str = "REPORT") -> None:
    """Display one row per request and the list of failing checks.

    Args:
        report: The report to display
        title: Banner text
    """
    console.print("\n" + "=" * 80)
    console.print(f"[bold cyan]{title}[/bold cyan]", justify="center")
    console.print("=" * 80 + "\n")

    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("#", justify="right", style="cyan", width=4)
    table.add_column("Op", style="white", width=14)
    table.add_column("Target", style="white", width=24)
    table.add_column("Status", justify="center", width=12)
    table.add_column("Checks", justify="center", width=8)
    table.add_column("Failed", justify="center", width=8)

    for result in report.results:
        style = "" if result.success else "red"
        table.add_row(
            str(result.index),
            result.op,
            result.target,
            _status(result),
            str(len(result.checks)),
            str(len(result.failures)),
            style=style,
        )

    console.print(table)
    console.print()

    failures = report.failures
    crashed = [r for r in report.results if r.error is not None]
    if not failures and not crashed:
        console.print(f"[bold green]All {sum(len(r.checks) for r in report.results)} checks passed[/bold green]")
        console.print(f"[dim]pkgeo {report.version}, seed {report.seed}[/dim]\n")
        return

    lines = []
    for result in crashed:
        lines.append(f"[bold]{result.op} {result.target}[/bold]: {result.error}")
    for result, check in failures:
        op = ">=" if check.lower_bound else "<="
        source = f" [dim]{escape(f'[{check.reference}]')}[/dim]" if check.reference else ""
        lines.append(
            f"[bold]{check.module}.{check.operation}[/bold] ({result.target}): {check.claim}{source}\n"
            f"    observed {check.observed:.3e}, required {op} {check.tolerance:.3e}"
        )
    console.print(Panel("\n".join(lines), title="Failures", border_style="red", expand=False))
    console.print()


def print_constancy(constancy: AngleConstancy) -> None:
    """Display per-component mean angle and spread of a beta grid.

    Args:
        constancy: Result of angle_constancy
    """
    table = Table(show_header=True, header_style="bold magenta")
    table.add_column("Component", justify="center", style="cyan", width=10)
    table.add_column("Mean beta", justify="right", width=14)
    table.add_column("Spread", justify="right", style="green", width=12)
    for i, (mean, spread) in enumerate(zip(constancy.mean_angles, constancy.spreads), 1):
        table.add_row(str(i), f"{mean:+.9f}", f"{spread:.2e}")
    console.print(table)
    console.print(f"[dim]{constancy.null_cells} null cells[/dim]\n")


def print_error(message: str) -> None:
    """Print an error message.

    Args:
        message: Error message
    """
    console.print(f"[bold red]Error:[/bold red] {message}")


def print_success(message: str) -> None:
    """Print a success message.

    Args:
        message: Success message
    """
    console.print(f"[bold green]✓[/bold green] {message}")


def print_warning(message: str) -> None:
    """Print a warning message.

    Args:
        message: Warning message
    """
    console.print(f"[bold yellow]⚠[/bold yellow] {message}")
