import json
from pathlib import Path
from typing import Any

import pytest
from pydantic import ValidationError
from pytest_mock import MockerFixture

from pcfp.cli import EXIT_ERROR
from pcfp.cli import EXIT_MISMATCH
from pcfp.cli import EXIT_OK
from pcfp.cli import CliConfig
from pcfp.cli import Subcommand
from pcfp.cli import main
from pcfp.dtmc import MAX_STATES_ENV
from pcfp.harness import campaign
from pcfp.models import BSP_RAO_SOURCE
from pcfp.models import BSP_SOURCE
from pcfp.reduce import Reduction

BSP_RAO_M1 = BSP_RAO_SOURCE.replace("xy", "m1")


def test_parse(bsp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["parse", str(bsp_path)]) == EXIT_OK
    assert capsys.readouterr().out == BSP_SOURCE


def test_parse_json(bsp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["parse", "--json", str(bsp_path)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out) == {
        "name": "bsp",
        "variables": ["x", "y"],
        "locations": 4,
        "commands": 4,
        "labels": [],
        "size": len(BSP_SOURCE),
    }


def test_parse_writes_output(
    tmp_path: Path,
    bsp_path: Path,
    capsys: pytest.CaptureFixture[str],
) -> None:
    out = tmp_path / "out.pm"
    bsp_path.write_bytes(BSP_SOURCE.replace("\n", "\r\n").encode())

    assert main(["parse", str(bsp_path), "-o", str(out)]) == EXIT_OK
    assert out.read_text() == BSP_SOURCE
    assert capsys.readouterr().out == ""


def test_parse_error(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    path = tmp_path / "bad.pm"
    path.write_text(
        "dtmc\nmodule m\n\tcf : [0..1] init 0;\n\tx : [0..1] init 0;\n"
        "\t[] x=0 -> 1:(cf'=0);\nendmodule\n"
    )

    assert main(["parse", str(path)]) == EXIT_ERROR
    assert capsys.readouterr().err == (
        f"error: {path}:5:5: non-control-flow command: guard lacks a top-level conjunct cf=<int>\n"
    )


def test_missing_model_file(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    path = tmp_path / "missing.pm"

    assert main(["stats", str(path)]) == EXIT_ERROR
    assert capsys.readouterr().err == f"error: The model file does not exist: {path}\n"


def test_analyze(bsp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["analyze", str(bsp_path)]) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == [
        "command 0 (cf=0): x",
        "command 1 (cf=1): x",
        "command 2 (cf=2): ",
        "command 3 (cf=3): ",
        "color 1: x, y",
    ]


def test_analyze_json(
    tmp_path: Path,
    bsp_path: Path,
    capsys: pytest.CaptureFixture[str],
) -> None:
    dot = tmp_path / "ig.dot"

    assert main(["analyze", "--json", "--ig", str(dot), str(bsp_path)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out) == {"0": ["x"], "1": ["x"], "2": [], "3": []}
    assert dot.read_text().startswith("graph interference {")


def test_reduce(bsp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["reduce", "--pass", "rao", str(bsp_path)]) == EXIT_OK

    out = capsys.readouterr().out
    assert out == BSP_RAO_M1
    assert "\tm1 : [0..1] init 1;\n" in out


def test_reduce_writes_output_and_stats(
    tmp_path: Path,
    bsp_path: Path,
    capsys: pytest.CaptureFixture[str],
) -> None:
    out = tmp_path / "out.pm"

    assert main(["reduce", "--pass", "rao", str(bsp_path), "-o", str(out)]) == EXIT_OK
    assert capsys.readouterr().out == "rao: 2 -> 1 variables, 7 -> 5 states\n"
    assert out.read_text() == BSP_RAO_M1

    sidecar = json.loads((tmp_path / "out.pm.json").read_text())
    assert sidecar["states"] == 5
    assert sidecar["reduction"] == {
        "pass": "rao",
        "originalStates": 7,
        "reducedStates": 5,
        "factor": 1.4,
    }


def test_reduce_json_without_output(bsp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["reduce", "--pass", "rao", "--json", str(bsp_path)]) == EXIT_OK

    report = json.loads(capsys.readouterr().out)
    assert report["states"] == 5
    assert report["reduction"] == {
        "pass": "rao",
        "originalStates": 7,
        "reducedStates": 5,
        "factor": 1.4,
    }
    assert sorted(p.name for p in bsp_path.parent.iterdir()) == ["bsp.pm"]


def test_reduce_rejects_undeclared_excluded_variable(
    bsp_path: Path,
    capsys: pytest.CaptureFixture[str],
) -> None:
    assert main(["reduce", "--exclude", "zz", str(bsp_path)]) == EXIT_ERROR
    assert capsys.readouterr().err == (
        "error: One or more of the excluded variables are not declared in module bsp: zz\n"
    )


def test_parse_rejects_invalid_utf8(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    path = tmp_path / "bad.pm"
    path.write_bytes(b"dtmc\xff\n")

    assert main(["parse", str(path)]) == EXIT_ERROR
    assert capsys.readouterr().err == f"error: {path}:1:5: invalid UTF-8 byte 0xff\n"


def test_reduce_rejects_reset_without_rvo(
    bsp_path: Path,
    capsys: pytest.CaptureFixture[str],
) -> None:
    assert main(["reduce", "--pass", "rao", "--reset", "x=0,y=0", str(bsp_path)]) == EXIT_ERROR
    assert capsys.readouterr().err == "error: --reset needs a pass with RVO, not rao\n"


def test_reduce_with_reset(bsp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    args = ["reduce", "--pass", "rvo", "--rvo-mode", "as-written", "--reset", "x=0,y=0"]

    assert main([*args, str(bsp_path)]) == EXIT_OK
    assert "0.5:(cf'=2)&(y'=0)&(x'=0)" in capsys.readouterr().out


def test_stats(bsp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["stats", str(bsp_path)]) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == [
        "states: 7",
        "transitions: 9",
        "deadlocks: 1",
        f"program_size: {len(BSP_SOURCE)}",
    ]


def test_stats_json(
    tmp_path: Path,
    bsp_path: Path,
    capsys: pytest.CaptureFixture[str],
) -> None:
    dot = tmp_path / "dtmc.dot"

    assert main(["stats", "--json", "--dot", str(dot), str(bsp_path)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out) == {
        "states": 7,
        "transitions": 9,
        "deadlocks": 1,
        "programSize": len(BSP_SOURCE),
    }
    assert dot.read_text().count("->") == 9


def test_stats_of_a_reduction(bsp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["stats", "--pass", "rao", "--json", str(bsp_path)]) == EXIT_OK

    report = json.loads(capsys.readouterr().out)
    assert report["states"] == 5
    assert report["programSize"] == len(BSP_RAO_M1)
    assert report["reduction"]["factor"] == 1.4


def test_stats_respects_state_cap(
    bsp_path: Path,
    monkeypatch: pytest.MonkeyPatch,
    capsys: pytest.CaptureFixture[str],
) -> None:
    monkeypatch.setenv(MAX_STATES_ENV, "3")

    assert main(["stats", str(bsp_path)]) == EXIT_ERROR
    assert capsys.readouterr().err == "error: More than 3 reachable states\n"

    assert main(["stats", "--max-states", "7", str(bsp_path)]) == EXIT_OK


def test_verify(bsp_labelled_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["verify", "--k", "1,2", str(bsp_labelled_path)]) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == [
        "fail, k=1: 0 == 0",
        "fail, k=2: 3/13 == 3/13",
        "bisimilar: yes",
        "preserved",
    ]


def test_verify_with_label_expression(bsp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    args = ["verify", "--pass", "rao", "--k", "0..3", "--label", "cf=0 & x=0", "--no-bisim"]

    assert main([*args, str(bsp_path)]) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == [
        "label, k=0: 0 == 0",
        "label, k=1: 0 == 0",
        "label, k=2: 3/13 == 3/13",
        "label, k=3: 69/169 == 69/169",
        "preserved",
    ]


def test_verify_json(bsp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    assert main(["verify", "--pass", "rao", "--json", str(bsp_path)]) == EXIT_OK
    assert json.loads(capsys.readouterr().out) == {
        "reduction": "rao",
        "properties": [],
        "bisimilar": True,
    }


def test_verify_requires_excluded_labels(
    bsp_labelled_path: Path,
    capsys: pytest.CaptureFixture[str],
) -> None:
    args = ["verify", "--pass", "rao", "--unsafe-no-auto-exclude", str(bsp_labelled_path)]

    assert main(args) == EXIT_ERROR
    assert capsys.readouterr().err.endswith(
        "error: label variable must be excluded: label 'fail' refers to x\n"
    )


def test_fuzz(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    out = tmp_path / "report.json"
    table = tmp_path / "cases.tsv"
    args = ["fuzz", "--seeds", "0..4", "--k", "1,2", "--vars", "2", "--locations", "3"]

    assert main([*args, "--out", str(out), "--table", str(table)]) == EXIT_OK

    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 4
    assert lines[0].startswith("rvo-as-written: 5 cases, 0 preservation failures")

    report = json.loads(out.read_text())
    assert report["ks"] == [1, 2]
    assert len(report["cases"]) == 5 * 4
    assert [p["numVars"] for p in report["params"]] == [2] * 5

    with table.open("r") as f:
        assert next(f) == (
            "seed\treduction\tpreserved\tbisimilar\toriginalStates\treducedStates\tfactor\terror\n"
        )
        assert sum(1 for _ in f) == 5 * 4


def test_fuzz_forwards_options(mocker: MockerFixture, capsys: pytest.CaptureFixture[str]) -> None:
    spy = mocker.patch("pcfp.cli.campaign", wraps=campaign)
    args = ["fuzz", "--seeds", "3,1", "--passes", "rvo,rvo", "--rvo-mode", "as-written"]

    assert main([*args, "--k", "2", "--jobs", "2", "--granularity", "10", "--json"]) == EXIT_OK

    spy.assert_called_once()
    (batch, reductions, ks), kwds = spy.call_args
    assert [(p.seed, p.granularity) for p in batch] == [(3, 10), (1, 10)]
    assert reductions == [Reduction.RVO_AS_WRITTEN]
    assert ks == [2]
    assert kwds["jobs"] == 2

    report = json.loads(capsys.readouterr().out)
    assert [c["seed"] for c in report["cases"]] == [1, 3]


def test_fuzz_reports_failures(capsys: pytest.CaptureFixture[str]) -> None:
    args = ["fuzz", "--seeds", "0..2", "--passes", "rao", "--k", "1", "--max-states", "1"]

    assert main(args) == EXIT_MISMATCH
    assert "rao: 3 cases" in capsys.readouterr().out


def test_config_defaults(bsp_path: Path) -> None:
    config = CliConfig(subcommand=Subcommand.VERIFY, input=bsp_path)

    assert config.pipeline is Reduction.RVO_RAO
    assert config.ks == [1, 2, 5]
    assert config.fuzz_pipelines == [
        Reduction.RVO_AS_WRITTEN,
        Reduction.RVO_AGGRESSIVE,
        Reduction.RAO,
        Reduction.RVO_RAO,
    ]


def test_config_parses_lists(bsp_path: Path) -> None:
    config = CliConfig.model_validate(
        {
            "subcommand": "verify",
            "input": bsp_path,
            "ks": "5, 0..2, 1",
            "exclude": "x,",
            "reset": "x=0, y=1",
        }
    )

    assert config.ks == [0, 1, 2, 5]
    assert config.exclude == ["x"]
    assert config.reset == {"x": 0, "y": 1}


@pytest.mark.parametrize(
    "options,message",
    [
        ({"subcommand": "analyze", "reduction": "rao"}, "analyze does not accept --pass"),
        ({"subcommand": "stats", "ks": "1"}, "stats does not accept --k"),
        ({"subcommand": "reduce", "bisim": False}, "reduce does not accept --no-bisim"),
        ({"subcommand": "fuzz"}, "fuzz does not accept --input"),
        ({"subcommand": "verify", "reduction": "bogus"}, "Unknown pass 'bogus'"),
        ({"subcommand": "verify", "ks": "1,-2"}, "non-negative integers"),
        ({"subcommand": "verify", "ks": "a..b"}, "expected integers or ranges"),
        ({"subcommand": "verify", "reset": "x"}, "expected name=value: x"),
    ],
)
def test_config_validation(bsp_path: Path, options: dict[str, Any], message: str) -> None:
    with pytest.raises(ValidationError, match=message):
        CliConfig.model_validate({"input": bsp_path, **options})


def test_config_requires_a_model_file() -> None:
    with pytest.raises(ValidationError, match="stats needs a model file"):
        CliConfig.model_validate({"subcommand": "stats"})
