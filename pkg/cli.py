"""
Command-line frontend.

Exit codes: 0 on success, related or pass; 1 on distinguished or fail;
2 on usage errors and on errors raised by the workbench (parse errors,
ill-typed terms, unknown languages, bounds exceeded). Results go to stdout;
messages and logs go to stderr.
"""

import functools
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import click

from core.behavior import BranchingEffect
from core.bisim_service import bisim_service
from core.config import DEFAULT_DEPTH, FUEL, PROBE_SIZE, SEED
from core.data_models import (
    convert_bisim_to_model,
    convert_partition_to_model,
    convert_trace_to_model,
    to_dot,
    to_json,
)
from core.gitrees import truncate, unravel
from core.gsos_service import Trace, check_flatness, gsos_service
from core.harness import MUTATIONS, SUITES, run_suite, suite_parameters
from core.kernel import WorkbenchError
from core.languages import LANGUAGE_NAMES, get_language
from core.logger import get_logger
from core.rules import format_law
from core.stage_service import stage_service

logger = get_logger(__name__)

LANGUAGE = click.Choice(LANGUAGE_NAMES, case_sensitive=False)


def workbench_errors(command):
    """Report workbench errors as one line on stderr with exit code 2."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except WorkbenchError as e:
            click.echo(f"error: {type(e).__name__}: {e}", err=True)
            sys.exit(2)

    return wrapper


def render_trace(trace: Trace, show) -> List[str]:
    """The first configuration, then one line per step; weighted and set-valued steps show their branch."""
    lines: List[str] = []
    previous = None
    for entry in trace.entries:
        text = show(entry.term)
        if previous is None:
            line = text
        else:
            arrow = "→"
            _, weight = previous.branches[previous.chosen]
            if len(previous.branches) > 1 and weight is not None:
                arrow = f"→[{weight}]"
            elif len(previous.branches) > 1:
                arrow = f"→{{{previous.chosen + 1} of {len(previous.branches)}}}"
            line = f"{arrow} {text}"
        if entry.kind == "terminal":
            line += " ✓"
        elif entry.kind == "function":
            line += " →t"
        lines.append(line)
        previous = entry
    return lines


@click.group()
def cli():
    """Higher-order GSOS workbench."""


@cli.command()
@click.argument("language", type=LANGUAGE)
@click.argument("term")
@click.option("--fuel", default=FUEL, show_default=True, type=click.IntRange(min=0), help="Maximum number of steps.")
@click.option("--stage", default=None, type=click.IntRange(min=0), help="Stage budget for guarded languages.")
@click.option("--branch", default="first", show_default=True, type=click.Choice(["first", "sample"]))
@click.option("--seed", default=SEED, show_default=True, type=int)
@click.option("--format", "fmt", default="text", show_default=True, type=click.Choice(["text", "json"]))
@workbench_errors
def trace(language: str, term: str, fuel: int, stage: Optional[int], branch: str, seed: int, fmt: str):
    """Run TERM on the operational model."""
    lang = get_language(language)
    t = lang.parse(term)
    result = gsos_service.run_trace(lang, t, fuel, stage, branch, seed)
    if fmt == "json":
        click.echo(convert_trace_to_model(result, lang.name, lang.show).model_dump_json())
    else:
        for line in render_trace(result, lang.show):
            click.echo(line)
    last = result.entries[-1]
    if last.kind == "fuel":
        click.echo(f"fuel exhausted after {fuel} step(s)", err=True)
    elif last.kind == "later":
        click.echo("stage budget exhausted", err=True)
    elif last.kind == "reduct":
        click.echo("no reducts", err=True)


@cli.command()
@click.argument("language", type=LANGUAGE)
@click.argument("term")
@click.option("--depth", default=DEFAULT_DEPTH, show_default=True, type=click.IntRange(min=0))
@click.option("--probe-size", default=PROBE_SIZE, show_default=True, type=click.IntRange(min=1))
@click.option("--format", "fmt", default="json", show_default=True, type=click.Choice(["json", "dot", "unravel"]))
@click.option("--fuel", default=FUEL, show_default=True, type=click.IntRange(min=0), help="Steps followed by --format unravel.")
@click.option("-o", "--output", type=click.Path(dir_okay=False, path_type=Path), help="Write to a file instead of stdout.")
@workbench_errors
def denote(language: str, term: str, depth: int, probe_size: int, fmt: str, fuel: int, output: Optional[Path]):
    """Print the depth-truncated denotation of TERM."""
    lang = get_language(language)
    d = gsos_service.denote(lang, lang.parse(term))
    if fmt == "unravel":
        if lang.effect is not BranchingEffect.DETERMINISTIC:
            raise click.UsageError(f"{lang.name} is not deterministic; use --format json or dot")
        text = str(unravel(d, fuel)) + "\n"
    else:
        tree = truncate(d, depth, lang.denotational_probes(probe_size))
        text = to_json(tree) + "\n" if fmt == "json" else to_dot(tree)
    if output is not None:
        output.write_text(text, encoding="utf-8")
        logger.info(f"Wrote {fmt} output to {output}")
    else:
        click.echo(text, nl=False)


@cli.command()
@click.argument("language", type=LANGUAGE)
@click.argument("left")
@click.argument("right")
@click.option("--depth", default=DEFAULT_DEPTH, show_default=True, type=click.IntRange(min=0))
@click.option("--probe-size", default=PROBE_SIZE, show_default=True, type=click.IntRange(min=1))
@click.option("--format", "fmt", default="text", show_default=True, type=click.Choice(["text", "json"]))
@workbench_errors
def bisim(language: str, left: str, right: str, depth: int, probe_size: int, fmt: str):
    """Compare LEFT and RIGHT; exit 0 when related, 1 when distinguished."""
    lang = get_language(language)
    p, q = lang.parse(left), lang.parse(right)
    report = bisim_service.bisim(lang, p, q, depth, lang.probes(probe_size))
    if fmt == "json":
        click.echo(convert_bisim_to_model(report, lang.name, lang.show(p), lang.show(q)).model_dump_json())
    elif report.related:
        click.echo(f"related at depth {depth}")
    else:
        click.echo(f"distinguished: {report.witness.describe()}")
    sys.exit(0 if report.related else 1)


@cli.command()
@click.argument("language", type=LANGUAGE)
@click.argument("terms", nargs=-1, required=True)
@click.option("--depth", default=DEFAULT_DEPTH, show_default=True, type=click.IntRange(min=0))
@click.option("--probe-size", default=PROBE_SIZE, show_default=True, type=click.IntRange(min=1))
@workbench_errors
def partition(language: str, terms: Tuple[str, ...], depth: int, probe_size: int):
    """Split TERMS into bisimilarity classes by partition refinement."""
    lang = get_language(language)
    universe = [lang.parse(text) for text in terms]
    result = bisim_service.partition(lang, universe, depth, lang.probes(probe_size))
    click.echo(convert_partition_to_model(result, lang.name, lang.show).model_dump_json())


def _parse_params(values: Tuple[str, ...]) -> dict:
    params = {}
    for item in values:
        key, sep, raw = item.partition("=")
        if not sep:
            raise click.BadParameter(f"expected KEY=VALUE, got {item!r}", param_hint="--param")
        try:
            params[key.strip().replace("-", "_")] = int(raw)
        except ValueError:
            raise click.BadParameter(f"{key} must be an integer, got {raw!r}", param_hint="--param")
    return params


@cli.command()
@click.argument("name", type=click.Choice(sorted(SUITES)))
@click.option("--lang", "languages", multiple=True, type=LANGUAGE, help="Repeatable; all languages by default.")
@click.option("--seed", default=SEED, show_default=True, type=int)
@click.option("--mutation", default=None, type=click.Choice(sorted(MUTATIONS)))
@click.option("--param", "params", multiple=True, help="KEY=VALUE integer parameter, repeatable.")
@workbench_errors
def suite(name: str, languages: Tuple[str, ...], seed: int, mutation: Optional[str], params: Tuple[str, ...]):
    """Run a property suite; one JSON record per language, exit 1 if any fails."""
    records = run_suite(name, list(languages) or None, seed, mutation, _parse_params(params))
    for record in records:
        click.echo(record.model_dump_json())
    sys.exit(1 if any(r.verdict == "fail" for r in records) else 0)


@cli.command("suites")
def list_suites():
    """List the suites with their parameters, and the documented mutations."""
    for name in SUITES:
        click.echo(f"{name}: {', '.join(suite_parameters(name))}")
    click.echo()
    for name, mutation in MUTATIONS.items():
        click.echo(f"{name} ({', '.join(mutation.languages)}): {mutation.description}")


@cli.command()
@click.argument("language", type=LANGUAGE)
@click.argument("n", type=click.IntRange(min=0))
@click.option("--unfiltered", is_flag=True, help="Keep restriction-incompatible function tuples.")
@workbench_errors
def stage(language: str, n: int, unfiltered: bool):
    """Enumerate stage N of a guarded untyped language."""
    lang = get_language(language)
    elements = stage_service.enumerate_stage(lang, n, filter_restrictions=not unfiltered)
    click.echo(f"{len(elements)} elements")
    for element in elements:
        click.echo(element.key)


@cli.command()
@click.argument("language", type=LANGUAGE)
@workbench_errors
def rules(language: str):
    """Print a language's law in canonical form and its flatness report."""
    lang = get_language(language)
    click.echo(format_law(lang.law), nl=False)
    report = check_flatness(lang.law)
    click.echo()
    if report.flat:
        click.echo("# relatively flat")
    else:
        for violation in report.violations:
            click.echo(f"# not flat: {violation}")


if __name__ == "__main__":
    cli()
