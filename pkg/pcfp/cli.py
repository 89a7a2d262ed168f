"""
The `pcfp` command line.

```
pcfp parse    MODEL [-o OUT]
pcfp analyze  MODEL [--ig DOT] [--json]
pcfp reduce   MODEL [--pass P] [--rvo-mode M] [--exclude a,b] [--reset x=1,y=0] [-o OUT] [--json]
pcfp stats    MODEL [--pass P] [--dot DOT]
pcfp verify   MODEL [--pass P] [--k 1,2,5] [--label EXPR] [--no-bisim]
pcfp fuzz     [--seeds 0..99] [--passes rvo,rao] [--k 1,2,5] [--out REPORT] [--table TSV]
```

`analyze --json` prints the live variables per command as `{commandId: [vars...]}`. `reduce -o OUT`
also writes the reduction statistics to `OUT.json`; `reduce --json` prints them instead of the
program.

Exit codes: 0 on success, 1 on errors (with one `error:` line on stderr), 2 when a verification
or campaign finds a mismatch.
"""

import argparse
import logging
import sys
from dataclasses import replace
from enum import Enum
from enum import unique
from pathlib import Path
from typing import Any
from typing import Sequence

from pydantic import BaseModel
from pydantic import ConfigDict
from pydantic import Field
from pydantic import TypeAdapter
from pydantic import ValidationError
from pydantic import field_validator
from pydantic import model_validator

from pcfp._lib.errors import ParseError
from pcfp._lib.errors import PcfpError
from pcfp._lib.file import read_model_text
from pcfp._lib.file import write_text
from pcfp._lib.rationals import format_rational
from pcfp._lib.records import Record
from pcfp.dtmc import PreservationReport
from pcfp.dtmc import build_dtmc
from pcfp.dtmc import check_bisimilar
from pcfp.dtmc import check_preservation
from pcfp.dtmc import default_max_states
from pcfp.dtmc import make_labeling
from pcfp.dtmc import reduction_stats
from pcfp.dtmc import stats
from pcfp.dtmc import to_dot as dtmc_to_dot
from pcfp.frontend import parse
from pcfp.frontend import parse_expr
from pcfp.frontend import print_program
from pcfp.frontend import program_size
from pcfp.harness import CaseResult
from pcfp.harness import GenParams
from pcfp.harness import campaign
from pcfp.interference import build_ig
from pcfp.interference import to_dot as ig_to_dot
from pcfp.interference import welsh_powell
from pcfp.liveness import lra
from pcfp.program import DEFAULT_CF_VAR
from pcfp.program import Label
from pcfp.program import Program
from pcfp.reduce import Reduction
from pcfp.reduce import RvoMode
from pcfp.reduce import default_exclude
from pcfp.reduce import reduce
from pcfp.table import RecordWriter

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISMATCH = 2

CLI_LABEL = "label"
"""The name under which a `--label` expression is added to the program."""

_LIVENESS_JSON = TypeAdapter(dict[str, list[str]])
"""`analyze --json`: the live variables per command, `{commandId: [vars...]}`."""


@unique
class Subcommand(Enum):
    PARSE = "parse"
    ANALYZE = "analyze"
    REDUCE = "reduce"
    STATS = "stats"
    VERIFY = "verify"
    FUZZ = "fuzz"


_ONLY_FOR: dict[str, set[Subcommand]] = {
    "input": set(Subcommand) - {Subcommand.FUZZ},
    "reduction": {Subcommand.REDUCE, Subcommand.STATS, Subcommand.VERIFY},
    "reset": {Subcommand.REDUCE, Subcommand.STATS, Subcommand.VERIFY},
    "ks": {Subcommand.VERIFY, Subcommand.FUZZ},
    "ig": {Subcommand.ANALYZE},
    "dot": {Subcommand.STATS},
    "label": {Subcommand.VERIFY},
    "bisim": {Subcommand.VERIFY},
    "seeds": {Subcommand.FUZZ},
    "passes": {Subcommand.FUZZ},
    "table": {Subcommand.FUZZ},
    "jobs": {Subcommand.FUZZ},
    "generator": {Subcommand.FUZZ},
}


_FLAGS = {"reduction": "pass", "ks": "k", "bisim": "no-bisim"}


def _split(value: Any) -> Any:
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return value


def _integers(value: Any) -> Any:
    """`"1,2,5"` -> `[1, 2, 5]`; `"0..3"` -> `[0, 1, 2, 3]`."""
    if not isinstance(value, str):
        return value
    result: list[int] = []
    for part in _split(value):
        lo, sep, hi = part.partition("..")
        result.extend(range(int(lo), int(hi) + 1) if sep else [int(part)])
    return result


class CliConfig(BaseModel):
    """
    The validated configuration of one `pcfp` invocation.

    List-valued options are accepted as comma-separated strings; integer lists also accept ranges
    `lo..hi`. Options are validated against the subcommand: e.g. `--reset` needs a pass with RVO
    and `--ig` is only accepted by `analyze`.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    subcommand: Subcommand
    input: Path | None = None
    output: Path | None = None
    cf_var: str = DEFAULT_CF_VAR
    exclude: list[str] = Field(default_factory=list)
    reset: dict[str, int] = Field(default_factory=dict)
    rvo_mode: RvoMode = RvoMode.AGGRESSIVE
    reduction: str = "rvo+rao"
    ks: list[int] = Field(default_factory=lambda: [1, 2, 5])
    max_states: int = Field(default_factory=default_max_states, ge=1)
    json_output: bool = False
    auto_exclude: bool = True
    label: str | None = None
    bisim: bool = True
    ig: Path | None = None
    dot: Path | None = None
    seeds: list[int] = Field(default_factory=lambda: list(range(100)))
    passes: list[str] = Field(
        default_factory=lambda: ["rvo-as-written", "rvo-aggressive", "rao", "rvo+rao"]
    )
    table: Path | None = None
    jobs: int = Field(default=1, ge=1)
    generator: GenParams = Field(default_factory=lambda: GenParams(seed=0))

    @field_validator("exclude", "passes", mode="before")
    @classmethod
    def _split_names(cls, value: Any) -> Any:
        return _split(value)

    @field_validator("ks", "seeds", mode="before")
    @classmethod
    def _split_integers(cls, value: Any) -> Any:
        try:
            return _integers(value)
        except ValueError:
            raise ValueError(f"expected integers or ranges lo..hi: {value}") from None

    @field_validator("ks")
    @classmethod
    def _non_negative(cls, value: list[int]) -> list[int]:
        if not value or any(k < 0 for k in value):
            raise ValueError("round bounds must be a non-empty list of non-negative integers")
        return sorted(set(value))

    @field_validator("reset", mode="before")
    @classmethod
    def _parse_reset(cls, value: Any) -> Any:
        if not isinstance(value, str):
            return value
        reset: dict[str, str] = {}
        for part in _split(value):
            name, sep, number = part.partition("=")
            if not sep or not name.strip():
                raise ValueError(f"expected name=value: {part}")
            reset[name.strip()] = number.strip()
        return reset

    @model_validator(mode="after")
    def _consistent(self) -> "CliConfig":
        for name, allowed in _ONLY_FOR.items():
            given = getattr(self, name) is not None if name == "input" else (
                name in self.model_fields_set
            )
            if given and self.subcommand not in allowed:
                flag = _FLAGS.get(name, name.replace("_", "-"))
                raise ValueError(f"{self.subcommand.value} does not accept --{flag}")
        if self.subcommand is not Subcommand.FUZZ and self.input is None:
            raise ValueError(f"{self.subcommand.value} needs a model file")

        pipeline = Reduction.of(self.reduction, self.rvo_mode)
        for name in self.passes:
            Reduction.of(name, self.rvo_mode)
        if self.reset and pipeline.rvo_mode is None:
            raise ValueError(f"--reset needs a pass with RVO, not {self.reduction}")
        return self

    @property
    def pipeline(self) -> Reduction:
        return Reduction.of(self.reduction, self.rvo_mode)

    @property
    def fuzz_pipelines(self) -> list[Reduction]:
        return list(dict.fromkeys(Reduction.of(name, self.rvo_mode) for name in self.passes))


class ProgramSummary(Record):
    name: str
    variables: list[str]
    locations: int
    commands: int
    labels: list[str]
    size: int


class VerifyReport(Record):
    reduction: str
    properties: list[PreservationReport]
    bisimilar: bool | None = None

    @property
    def passed(self) -> bool:
        return all(p.passed for p in self.properties) and self.bisimilar is not False


def _emit(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load(config: CliConfig) -> Program:
    assert config.input is not None
    program = parse(read_model_text(config.input), cf_var=config.cf_var)
    if config.label is not None:
        expr = parse_expr(config.label, program)
        program = replace(program, labels=(*program.labels, Label(name=CLI_LABEL, expr=expr)))
    return program


def _exclude(config: CliConfig, program: Program) -> frozenset[str]:
    if config.auto_exclude:
        return default_exclude(program, frozenset(config.exclude))
    logger.warning("Labels are not excluded from reduction: their probabilities may change")
    return frozenset(config.exclude)


def _reduce(config: CliConfig, program: Program) -> Program:
    reset = {**program.initial_eval, **config.reset} if config.reset else None
    return reduce(program, config.pipeline, exclude=_exclude(config, program), reset=reset)


def _parse(config: CliConfig, program: Program) -> int:
    if config.output is not None:
        write_text(config.output, print_program(program))
    if config.json_output:
        summary = ProgramSummary(
            name=program.name,
            variables=list(program.variables),
            locations=program.cf_max + 1,
            commands=len(program.commands),
            labels=[lab.name for lab in program.labels],
            size=program_size(program),
        )
        _emit(summary.to_json())
    elif config.output is None:
        _emit(print_program(program))
    return EXIT_OK


def _analyze(config: CliConfig, program: Program) -> int:
    live = lra(program)
    graph = build_ig(program, live)
    coloring = welsh_powell(graph)
    if config.ig is not None:
        write_text(config.ig, ig_to_dot(graph, coloring))

    if config.json_output:
        _emit(_LIVENESS_JSON.dump_json(live.to_json(program), indent=2).decode())
        return EXIT_OK

    for command in program.commands:
        names = live.to_json(program)[str(command.id)]
        _emit(f"command {command.id} ({program.cf_var}={command.location}): {', '.join(names)}")
    for color, members in coloring.classes().items():
        _emit(f"color {color}: {', '.join(members)}")
    return EXIT_OK


def _reduce_command(config: CliConfig, program: Program) -> int:
    reduced = _reduce(config, program)
    text = print_program(reduced)
    if config.output is None and not config.json_output:
        _emit(text)
        return EXIT_OK

    sidecar = reduction_stats(
        config.pipeline.value,
        build_dtmc(program, config.max_states),
        build_dtmc(reduced, config.max_states),
    )
    if config.output is not None:
        write_text(config.output, text)
        write_text(config.output.with_name(config.output.name + ".json"), sidecar.to_json() + "\n")
    if config.json_output:
        _emit(sidecar.to_json())
    else:
        r = sidecar.reduction
        _emit(
            f"{r.reduction_pass}: {len(program.decls)} -> {len(reduced.decls)} variables, "
            f"{r.original_states} -> {r.reduced_states} states"
        )
    return EXIT_OK


def _stats(config: CliConfig, program: Program) -> int:
    if "reduction" in config.model_fields_set:
        reduced = _reduce(config, program)
        dtmc = build_dtmc(reduced, config.max_states)
        report: Record = reduction_stats(
            config.pipeline.value, build_dtmc(program, config.max_states), dtmc
        ).model_copy(update={"program_size": program_size(reduced)})
    else:
        dtmc = build_dtmc(program, config.max_states)
        report = stats(dtmc).model_copy(update={"program_size": program_size(program)})

    if config.dot is not None:
        write_text(config.dot, dtmc_to_dot(dtmc))
    if config.json_output:
        _emit(report.to_json())
    else:
        for name, value in report.model_dump(exclude_none=True).items():
            if isinstance(value, dict):
                value = ", ".join(f"{k}={v}" for k, v in value.items())
            _emit(f"{name}: {value}")
    return EXIT_OK


def _verify(config: CliConfig, program: Program) -> int:
    reduced = _reduce(config, program)
    properties = [
        check_preservation(
            program,
            reduced,
            lab.expr,
            config.ks,
            reduced_label=reduced.label(lab.name),
            max_states=config.max_states,
        ).model_copy(update={"label": lab.name})
        for lab in program.labels
    ]

    bisimilar = None
    if config.bisim:
        labels = {lab.name: lab.expr for lab in program.labels}
        reduced_labels = {lab.name: lab.expr for lab in reduced.labels}
        bisimilar = check_bisimilar(
            build_dtmc(program, config.max_states),
            build_dtmc(reduced, config.max_states),
            make_labeling(labels, program.cf_var),
            make_labeling(reduced_labels, reduced.cf_var),
        )

    report = VerifyReport(
        reduction=config.pipeline.value, properties=properties, bisimilar=bisimilar
    )
    if config.json_output:
        _emit(report.to_json())
    else:
        for prop in report.properties:
            for r in prop.results:
                verdict = "==" if r.equal else "!="
                _emit(
                    f"{prop.label}, k={r.k}: "
                    f"{format_rational(r.original)} {verdict} {format_rational(r.reduced)}"
                )
        if bisimilar is not None:
            _emit(f"bisimilar: {'yes' if bisimilar else 'no'}")
        _emit("preserved" if report.passed else "MISMATCH")
    return EXIT_OK if report.passed else EXIT_MISMATCH


def _fuzz(config: CliConfig) -> int:
    batch = [config.generator.model_copy(update={"seed": seed}) for seed in config.seeds]
    report = campaign(
        batch, config.fuzz_pipelines, config.ks, jobs=config.jobs, max_states=config.max_states
    )
    if config.output is not None:
        write_text(config.output, report.to_json() + "\n")
    if config.table is not None:
        with RecordWriter.open(config.table, CaseResult, exclude_fields=["program"]) as writer:
            writer.writeall(report.cases)

    if config.json_output and config.output is None:
        _emit(report.to_json())
    else:
        for name, s in report.summary.items():
            _emit(
                f"{name}: {s.cases} cases, {s.preservation_failures} preservation failures, "
                f"{s.bisimulation_failures} bisimulation failures, {s.errors} errors, "
                f"mean factor {s.mean_factor:.3f}"
            )
    return EXIT_OK if report.passed else EXIT_MISMATCH


_HANDLERS = {
    Subcommand.PARSE: _parse,
    Subcommand.ANALYZE: _analyze,
    Subcommand.REDUCE: _reduce_command,
    Subcommand.STATS: _stats,
    Subcommand.VERIFY: _verify,
}


def run(config: CliConfig) -> int:
    """
    Execute one validated invocation.

    Returns:
        The exit code: 0 on success, 1 on errors, 2 on a verification or campaign mismatch.
    """
    try:
        if config.subcommand is Subcommand.FUZZ:
            return _fuzz(config)
        return _HANDLERS[config.subcommand](config, _load(config))
    except ParseError as error:
        location = f"{config.input}:{error.span}" if error.span is not None else f"{config.input}"
        print(f"error: {location}: {error.message}", file=sys.stderr)
    except (PcfpError, OSError) as error:
        print(f"error: {error}", file=sys.stderr)
    return EXIT_ERROR


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pcfp",
        description="Reduce probabilistic control-flow programs and check the reductions exactly.",
    )
    commands = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--cf-var", dest="cf_var")
    common.add_argument("--json", dest="json_output", action="store_true", default=None)
    common.add_argument("--max-states", dest="max_states", type=int)
    common.add_argument("-v", "--verbose", action="count", default=0)
    common.add_argument("-q", "--quiet", action="store_true")

    model = argparse.ArgumentParser(add_help=False, parents=[common])
    model.add_argument("input", type=Path)

    reducing = argparse.ArgumentParser(add_help=False)
    reducing.add_argument("--pass", dest="reduction")
    reducing.add_argument("--rvo-mode", dest="rvo_mode", choices=[m.value for m in RvoMode])
    reducing.add_argument("--exclude")
    reducing.add_argument("--reset")
    reducing.add_argument(
        "--unsafe-no-auto-exclude", dest="auto_exclude", action="store_false", default=None
    )

    sub = commands.add_parser("parse", parents=[model], help="check and normalise a model")
    sub.add_argument("-o", "--output", type=Path)

    sub = commands.add_parser("analyze", parents=[model], help="liveness and interference")
    sub.add_argument("--ig", type=Path, help="write the interference graph as DOT")

    sub = commands.add_parser("reduce", parents=[model, reducing], help="apply a reduction")
    sub.add_argument("-o", "--output", type=Path)

    sub = commands.add_parser("stats", parents=[model, reducing], help="DTMC statistics")
    sub.add_argument("--dot", type=Path, help="write the DTMC as DOT")

    sub = commands.add_parser(
        "verify", parents=[model, reducing], help="check a reduction preserves the labels"
    )
    sub.add_argument("--k", dest="ks")
    sub.add_argument("--label", help="an additional label expression to check")
    sub.add_argument("--no-bisim", dest="bisim", action="store_false", default=None)

    sub = commands.add_parser("fuzz", parents=[common], help="random reduction campaign")
    sub.add_argument("--seeds")
    sub.add_argument("--passes")
    sub.add_argument("--rvo-mode", dest="rvo_mode", choices=[m.value for m in RvoMode])
    sub.add_argument("--k", dest="ks")
    sub.add_argument("--out", "-o", dest="output", type=Path)
    sub.add_argument("--table", type=Path, help="write one TSV row per case")
    sub.add_argument("--jobs", type=int)
    sub.add_argument("--locations", dest="num_locations", type=int)
    sub.add_argument("--vars", dest="num_vars", type=int)
    sub.add_argument("--commands-per-location", dest="commands_per_location", type=int)
    sub.add_argument("--max-branching", dest="max_branching", type=int)
    sub.add_argument("--granularity", type=int)

    return parser


_GENERATOR_FLAGS = (
    "num_locations",
    "num_vars",
    "commands_per_location",
    "max_branching",
    "granularity",
)


def _configure_logging(verbose: int, quiet: bool) -> None:
    level = logging.ERROR if quiet else max(logging.DEBUG, logging.WARNING - 10 * verbose)
    logging.basicConfig(
        level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )


def main(argv: Sequence[str] | None = None) -> int:
    args = vars(_parser().parse_args(argv))
    _configure_logging(args.pop("verbose"), args.pop("quiet"))

    generator = {k: args.pop(k) for k in _GENERATOR_FLAGS if args.get(k) is not None}
    for k in _GENERATOR_FLAGS:
        args.pop(k, None)
    options = {k: v for k, v in args.items() if v is not None}
    if generator:
        options["generator"] = {"seed": 0, **generator}

    try:
        config = CliConfig(**options)
    except (ValidationError, ValueError) as error:
        if isinstance(error, ValidationError):
            messages = [e["msg"].removeprefix("Value error, ") for e in error.errors()]
        else:
            messages = [str(error)]
        for message in messages:
            print(f"error: {message}", file=sys.stderr)
        return EXIT_ERROR

    return run(config)


if __name__ == "__main__":
    sys.exit(main())
