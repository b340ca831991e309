"""
Command-line entry point: check, run, explore, fwdelim, bisim and stats over `.def` files.

Exit codes: 0 for success or an affirmative verdict, 1 for a negative verdict (type
errors, not bisimilar, a failed property, a deadlock under --expect-terminate), 2 for
usage, IO and parse errors, 3 when a bound truncated the work under --strict-bounds.
"""
import json
import logging
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from .bisim import LabelMode, compare_programs, replay, verdict_to_json
from .explore import (
    DepthExceeded,
    ExploreBounds,
    RoundRobin,
    SeededRandom,
    check_preservation,
    check_progress,
    explore,
    lts_to_json,
    rule_counts,
    run,
    tau_cycles,
    trace_to_jsonl,
)
from .parser import load_program
from .relation import check_r_is_bisimulation
from .runtime import Deadlocked, Rule, Terminated, classify
from .syntax import MAIN, Dialect, Program, pretty, pretty_atom
from .transform import fwd_elim
from .typecheck import ForwardMode, check_program
from .utils import BisimulationError, DefcalError, ParseFailure, TranslationError, TypeCheckFailure, load_settings

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_USAGE = 2
EXIT_TRUNCATED = 3

app = typer.Typer(
    help="Workbench for the DeF and DeF+F future calculi.",
    no_args_is_help=True,
    add_completion=False,
)
console = Console()
err_console = Console(stderr=True)


class OutputFormat(Enum):
    TEXT = "text"
    JSON = "json"


class Policy(Enum):
    ROUND_ROBIN = "round-robin"
    RANDOM = "random"


@dataclass(frozen=True)
class CliConfig:
    """Global flags, resolved against the environment and the defaults."""

    dialect: Optional[Dialect]
    mode: ForwardMode
    labels: LabelMode
    output_format: OutputFormat
    seed: Optional[int]
    max_steps: int
    bounds: ExploreBounds
    max_blocks: int
    output: Optional[Path]
    strict_bounds: bool


def _configure_logging(verbose: int) -> None:
    level = logging.WARNING
    if verbose == 1:
        level = logging.INFO
    elif verbose > 1:
        level = logging.DEBUG
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=err_console, rich_tracebacks=True)],
        force=True,
    )
    logging.captureWarnings(True)


@app.callback()
def main(
    ctx: typer.Context,
    dialect: Optional[Dialect] = typer.Option(None, "--dialect", help="Force the dialect instead of inferring it."),
    mode: ForwardMode = typer.Option(ForwardMode.STRICT, "--mode", help="Typing and semantics of forward*."),
    labels: LabelMode = typer.Option(LabelMode.FINE, "--labels", help="Observable label granularity."),
    output_format: OutputFormat = typer.Option(OutputFormat.TEXT, "--format", help="Output format."),
    seed: Optional[int] = typer.Option(None, "--seed", min=0, max=2**64 - 1, help="Seed of the random scheduler."),
    max_steps: Optional[int] = typer.Option(None, "--max-steps", min=1, help="Step budget of a run."),
    max_states: Optional[int] = typer.Option(None, "--max-states", min=1, help="State budget of an exploration."),
    max_depth: Optional[int] = typer.Option(None, "--max-depth", min=1, help="Depth budget of an exploration."),
    output: Optional[Path] = typer.Option(None, "-o", "--output", dir_okay=False, help="Write machine output here."),
    strict_bounds: bool = typer.Option(False, "--strict-bounds", help="Exit with 3 when a bound truncated the work."),
    verbose: int = typer.Option(0, "-v", "--verbose", count=True, help="-v for progress, -vv for every step."),
):
    _configure_logging(verbose)
    try:
        settings = load_settings()
    except ValueError as exc:
        raise typer.BadParameter(str(exc))
    ctx.obj = CliConfig(
        dialect=dialect,
        mode=mode,
        labels=labels,
        output_format=output_format,
        seed=seed,
        max_steps=max_steps or settings.max_steps,
        bounds=ExploreBounds(max_states or settings.max_states, max_depth or settings.max_depth),
        max_blocks=settings.max_blocks,
        output=output,
        strict_bounds=strict_bounds,
    )


def _fail(message: str, code: int) -> typer.Exit:
    err_console.print(message, markup=False, highlight=False, soft_wrap=True)
    return typer.Exit(code=code)


def _read_program(cfg: CliConfig, path: Path, mode: Optional[ForwardMode] = None) -> Program:
    """Parse, normalize and type check a file, turning failures into exit codes."""
    try:
        source = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise _fail(f"{path}: {exc}", EXIT_USAGE)
    try:
        p = load_program(source, cfg.dialect)
    except ParseFailure as exc:
        raise _fail("\n".join(f"{path}:{error}" for error in exc.errors), EXIT_USAGE)
    try:
        check_program(p, mode or cfg.mode)
    except TypeCheckFailure as exc:
        raise _fail("\n".join(f"{path}:{error}" for error in exc.errors), EXIT_NEGATIVE)
    return p


def _emit(cfg: CliConfig, text: str) -> None:
    """Write machine output to -o, or stdout."""
    if cfg.output is not None:
        try:
            cfg.output.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise _fail(f"{cfg.output}: {exc}", EXIT_USAGE)
        logger.info(f"Wrote {cfg.output}")
    else:
        typer.echo(text, nl=not text.endswith("\n"))


def _emit_json(cfg: CliConfig, data) -> None:
    _emit(cfg, json.dumps(data, indent=2, sort_keys=True) + "\n")


@app.command()
def check(ctx: typer.Context, file: Path = typer.Argument(..., exists=True, dir_okay=False, readable=True)):
    """Parse and type check a program."""
    cfg: CliConfig = ctx.obj
    p = _read_program(cfg, file)
    signatures = {f.name: f"({', '.join(str(t) for _, t in f.params)}) -> {f.return_type}" for f in p.functions}
    globals_ = {name: str(t) for name, t in p.globals}

    if cfg.output_format is OutputFormat.JSON:
        _emit_json(cfg, {"status": "ok", "dialect": p.dialect.value, "globals": globals_, "functions": signatures})
        return
    console.print("ok", highlight=False)
    console.print(f"dialect: {p.dialect.value}", highlight=False)
    for name, t in globals_.items():
        console.print(f"  {t} {name}", markup=False, highlight=False)
    for name, signature in signatures.items():
        console.print(f"  fun {name}: {signature}", markup=False, highlight=False)


def _describe_outcome(outcome) -> str:
    if isinstance(outcome, Terminated):
        result = pretty_atom(outcome.result) if outcome.result is not None else "unresolved"
        return f"terminated: {result}"
    if isinstance(outcome, Deadlocked):
        edges = outcome.cycle or outcome.blocked
        return "deadlocked: " + ", ".join(f"f{u} waits on f{v}" for u, v in edges)
    return f"step limit reached after {outcome.steps} steps"


@app.command("run")
def run_command(
    ctx: typer.Context,
    file: Path = typer.Argument(..., exists=True, dir_okay=False, readable=True),
    policy: Optional[Policy] = typer.Option(None, "--policy", help="Scheduler; random when --seed is given."),
    trace: bool = typer.Option(False, "--trace", help="Emit the trace as JSON lines."),
    expect_terminate: bool = typer.Option(False, "--expect-terminate", help="Exit with 1 when the run deadlocks."),
):
    """Execute one scheduled trace and report how it ended."""
    cfg: CliConfig = ctx.obj
    if policy is Policy.ROUND_ROBIN and cfg.seed is not None:
        raise typer.BadParameter("--seed cannot be combined with --policy round-robin")
    p = _read_program(cfg, file)

    if policy is Policy.RANDOM or cfg.seed is not None:
        seed = cfg.seed if cfg.seed is not None else random.getrandbits(64)
        scheduler = SeededRandom(seed)
    else:
        scheduler = RoundRobin()
    result = run(p, scheduler, cfg.mode, cfg.max_steps)
    outcome = result.outcome

    if trace:
        _emit(cfg, trace_to_jsonl(result))
    summary = f"{_describe_outcome(outcome)} ({len(result.steps)} steps, {scheduler})"
    if cfg.output_format is OutputFormat.JSON and not trace:
        data = {"outcome": type(outcome).__name__.lower(), "steps": len(result.steps), "policy": str(scheduler)}
        if isinstance(scheduler, SeededRandom):
            data["seed"] = scheduler.seed
        if isinstance(outcome, Terminated) and outcome.result is not None:
            data["result"] = pretty_atom(outcome.result)
        if isinstance(outcome, Deadlocked):
            data["cycle"] = [[u, v] for u, v in outcome.cycle]
        _emit_json(cfg, data)
    elif trace and cfg.output is None:
        err_console.print(summary, markup=False, highlight=False)
    else:
        console.print(summary, markup=False, highlight=False)

    if isinstance(outcome, DepthExceeded) and cfg.strict_bounds:
        raise typer.Exit(code=EXIT_TRUNCATED)
    if isinstance(outcome, Deadlocked) and expect_terminate:
        raise typer.Exit(code=EXIT_NEGATIVE)


@app.command("explore")
def explore_command(
    ctx: typer.Context,
    file: Path = typer.Argument(..., exists=True, dir_okay=False, readable=True),
    preservation: bool = typer.Option(False, "--check-preservation", help="Type check every explored state."),
):
    """Explore every interleaving and check progress on the result."""
    cfg: CliConfig = ctx.obj
    p = _read_program(cfg, file)
    lts = explore(p, cfg.bounds, cfg.mode)

    leaves = lts.leaves()
    deadlocks = [i for i in leaves if isinstance(classify(lts.states[i]), Deadlocked)]
    cycles = tau_cycles(lts)
    progress = check_progress(lts)
    failed = progress is not None
    lines = [
        f"states: {len(lts.states)}",
        f"edges: {len(lts.edges)}",
        f"truncated: {'yes' if lts.truncated else 'no'}",
        f"deadlocked leaves: {len(deadlocks)}",
        f"tau-cycles: {'present' if cycles else 'none'}",
        f"progress: {'ok' if progress is None else progress}",
    ]
    if preservation:
        counterexample = check_preservation(p, lts, cfg.mode)
        failed = failed or counterexample is not None
        lines.append(f"preservation: {'ok' if counterexample is None else counterexample}")

    if cfg.output is not None or cfg.output_format is OutputFormat.JSON:
        _emit_json(cfg, lts_to_json(lts))
    if cfg.output_format is OutputFormat.TEXT:
        for line in lines:
            console.print(line, markup=False, highlight=False)

    if lts.truncated and cfg.strict_bounds:
        raise typer.Exit(code=EXIT_TRUNCATED)
    if failed:
        raise typer.Exit(code=EXIT_NEGATIVE)


@app.command()
def fwdelim(ctx: typer.Context, file: Path = typer.Argument(..., exists=True, dir_okay=False, readable=True)):
    """Translate a DeF+F program into DeF and print the result."""
    cfg: CliConfig = ctx.obj
    p = _read_program(cfg, file)
    try:
        translated = fwd_elim(p)
    except TranslationError as exc:
        raise _fail(f"{file}: {exc}", EXIT_NEGATIVE)
    _emit(cfg, pretty(translated))


@app.command()
def bisim(
    ctx: typer.Context,
    file: Path = typer.Argument(..., exists=True, dir_okay=False, readable=True),
    against: Optional[Path] = typer.Option(None, "--against", exists=True, dir_okay=False, help="Compare with this program."),
    check_r: bool = typer.Option(False, "--check-r", help="Also check the relation and its correspondence properties pair by pair."),
):
    """Check that a program and its translation (or --against) are branching bisimilar."""
    cfg: CliConfig = ctx.obj
    p_f = _read_program(cfg, file, ForwardMode.STRICT)
    p_d = _read_program(cfg, against, ForwardMode.STRICT) if against is not None else None
    try:
        verdict, lts_f, lts_d = compare_programs(p_f, p_d, cfg.bounds, cfg.labels, cfg.max_blocks)
    except TranslationError as exc:
        raise _fail(f"{file}: {exc}", EXIT_NEGATIVE)
    except BisimulationError as exc:
        raise _fail(f"{file}: {exc}", EXIT_USAGE)

    relation = check_r_is_bisimulation(lts_f, lts_d) if check_r else None
    if cfg.output_format is OutputFormat.JSON:
        data = verdict_to_json(verdict)
        if check_r:
            data["relation"] = "ok" if relation is None else str(relation)
        _emit_json(cfg, data)
    else:
        console.print("bisimilar" if verdict.bisimilar else "not bisimilar", highlight=False)
        if not verdict.bisimilar:
            console.print(f"witness ({verdict.kind}): {' '.join(str(a) for a in verdict.witness)}", markup=False)
            console.print(f"pair: {verdict.pair}", markup=False, highlight=False)
            if verdict.kind == "trace":
                logger.info(f"Witness replays on {file}: {replay(lts_f, verdict.witness)}")
        if verdict.advisory:
            console.print("advisory: an exploration was truncated", highlight=False)
        if check_r:
            console.print(f"relation: {'ok' if relation is None else relation}", markup=False, highlight=False)

    if verdict.advisory and cfg.strict_bounds:
        raise typer.Exit(code=EXIT_TRUNCATED)
    if not verdict.bisimilar or relation is not None:
        raise typer.Exit(code=EXIT_NEGATIVE)


def _profile(p: Program, cfg: CliConfig):
    trace = run(p, RoundRobin(), cfg.mode, cfg.max_steps)
    counts = rule_counts(trace)
    reader = rule_counts(trace, actor=0)
    return {
        "rules": dict(counts),
        "reader_get_future": reader.get(Rule.GET_FUTURE.value, 0),
        "reader_get_data": reader.get(Rule.GET_DATA.value, 0),
        "chain_updates": counts.get(Rule.CHAIN_UPDATE.value, 0),
        "steps": len(trace.steps),
        "outcome": _describe_outcome(trace.outcome),
    }


@app.command()
def stats(ctx: typer.Context, file: Path = typer.Argument(..., exists=True, dir_okay=False, readable=True)):
    """Compare step counts of a program and its translation under the round-robin scheduler."""
    cfg: CliConfig = ctx.obj
    p = _read_program(cfg, file)
    try:
        translated = fwd_elim(p)
    except TranslationError as exc:
        raise _fail(f"{file}: {exc}", EXIT_NEGATIVE)
    profiles = {"forward": _profile(p, cfg), "fwd_elim": _profile(translated, cfg)}

    if cfg.output_format is OutputFormat.JSON:
        _emit_json(cfg, profiles)
        return
    table = Table(title=f"Step counts for {file.name} (reader is {MAIN})")
    table.add_column("count")
    for version in profiles:
        table.add_column(version, justify="right")
    rows = ["reader_get_future", "reader_get_data", "chain_updates", "steps"]
    for row in rows:
        table.add_row(row, *(str(profiles[version][row]) for version in profiles))
    rules = sorted(set(profiles["forward"]["rules"]) | set(profiles["fwd_elim"]["rules"]), key=lambda name: Rule(name).order)
    for name in rules:
        table.add_row(name, *(str(profiles[version]["rules"].get(name, 0)) for version in profiles))
    table.add_row("outcome", *(profiles[version]["outcome"] for version in profiles))
    console.print(table)


def run_cli() -> None:
    try:
        app()
    except DefcalError as exc:
        err_console.print(f"error: {exc}", markup=False)
        raise SystemExit(EXIT_USAGE)
