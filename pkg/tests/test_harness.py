import json

import pytest
from pydantic import ValidationError

from pcfp.dtmc import build_dtmc
from pcfp.frontend import parse
from pcfp.frontend import print_program
from pcfp.harness import FLAG_VAR
from pcfp.harness import JUNK_VAR
from pcfp.harness import TMP_VAR
from pcfp.harness import CampaignReport
from pcfp.harness import CaseResult
from pcfp.harness import GenParams
from pcfp.harness import campaign
from pcfp.harness import generate
from pcfp.harness import run_case
from pcfp.liveness import reads
from pcfp.liveness import writes
from pcfp.models import BSP_SOURCE
from pcfp.program import IntLit
from pcfp.program import well_formed
from pcfp.reduce import Reduction

PIPELINES = [
    Reduction.RVO_AS_WRITTEN,
    Reduction.RVO_AGGRESSIVE,
    Reduction.RAO,
    Reduction.RVO_RAO,
]


def _params(seed: int) -> GenParams:
    return GenParams(seed=seed, num_vars=1 + seed % 4, num_locations=1 + seed % 5)


def test_generate_is_deterministic() -> None:
    assert generate(GenParams(seed=7)) == generate(GenParams(seed=7))
    assert generate(GenParams(seed=7)) != generate(GenParams(seed=8))
    assert generate(GenParams(seed=-3)).name == "genm3"


@pytest.mark.parametrize("seed", range(100))
def test_generated_programs_are_explorable(seed: int) -> None:
    program = generate(_params(seed))

    assert well_formed(program) == []
    assert program.cf_max == seed % 5
    assert program.variables[-3:] == (JUNK_VAR, TMP_VAR, FLAG_VAR)
    assert len(program.variables) == 1 + seed % 4 + 3
    assert {c.location for c in program.commands} == set(range(1 + seed % 5))

    # exploration checks exact distributions and domains
    dtmc = build_dtmc(program)
    assert len(dtmc) >= 1


@pytest.mark.parametrize("seed", range(50))
def test_generated_helper_variables(seed: int) -> None:
    program = generate(_params(seed))

    for c in program.commands:
        assert JUNK_VAR not in reads(c)
        assert FLAG_VAR not in reads(c)
        assert TMP_VAR in writes(c)
        assert len(c.updates) <= 2
        for u in c.updates:
            # `flag` is only ever set
            assert all(a.expr == IntLit(1) for a in u.assigns if a.target == FLAG_VAR)

    assert program.label("fail") is not None


def test_gen_params_validation() -> None:
    with pytest.raises(ValidationError, match="cannot exceed granularity"):
        GenParams(seed=0, max_branching=5, granularity=4)

    with pytest.raises(ValidationError):
        GenParams(seed=0, num_locations=0)

    params = GenParams(seed=1)
    assert json.loads(params.to_json()) == {
        "seed": 1,
        "numLocations": 4,
        "numVars": 3,
        "commandsPerLocation": 2,
        "maxBranching": 2,
        "granularity": 4,
    }
    assert GenParams.model_validate({"seed": 1, "numVars": 2}).num_vars == 2


def test_run_case_on_bsp() -> None:
    program = parse(BSP_SOURCE + '\nlabel "fail" = cf=0;\n')
    result = run_case(program, build_dtmc(program), Reduction.RAO, [1, 2, 3], seed=0)

    assert result.passed
    assert result.preserved
    assert result.bisimilar
    assert (result.original_states, result.reduced_states) == (7, 5)
    assert result.factor == pytest.approx(1.4)
    assert result.program is None


def test_run_case_records_errors() -> None:
    program = parse(BSP_SOURCE + '\nlabel "fail" = cf=0;\n')
    result = run_case(program, build_dtmc(program), Reduction.RAO, [1], seed=4, max_states=2)

    assert not result.passed
    assert result.error == "More than 2 reachable states"
    assert result.program == print_program(program)


def test_campaign_preserves_all_pipelines() -> None:
    report = campaign([_params(seed) for seed in range(100)], PIPELINES, ks=[1, 2, 3])

    assert isinstance(report, CampaignReport)
    assert len(report.cases) == 100 * len(PIPELINES)
    failed = [(c.seed, c.reduction, c.error) for c in report.cases if not c.passed]
    assert failed == []
    assert report.passed
    assert report.failures == 0

    for reduction in PIPELINES:
        summary = report.summary[reduction.value]
        assert summary.cases == 100
        assert summary.preservation_failures == 0
        assert summary.bisimulation_failures == 0
        assert summary.errors == 0
        assert summary.mean_factor > 0


def test_campaign_identity_has_factor_one() -> None:
    report = campaign([_params(seed) for seed in range(10)], [Reduction.IDENTITY], ks=[2])

    assert report.passed
    assert all(c.factor == 1.0 for c in report.cases)
    assert report.summary["identity"].mean_factor == 1.0


def test_campaign_orders_cases_independently_of_input_order() -> None:
    forwards = campaign([_params(s) for s in range(6)], PIPELINES[:2], ks=[3, 1])
    backwards = campaign([_params(s) for s in reversed(range(6))], PIPELINES[:2], ks=[1, 3])

    assert forwards == backwards
    assert forwards.ks == [1, 3]
    assert [(c.seed, c.reduction) for c in forwards.cases[:3]] == [
        (0, "rvo-as-written"),
        (0, "rvo-aggressive"),
        (1, "rvo-as-written"),
    ]


def test_campaign_with_worker_processes() -> None:
    batch = [_params(s) for s in range(8)]

    assert campaign(batch, PIPELINES, ks=[2], jobs=2) == campaign(batch, PIPELINES, ks=[2])


def test_campaign_records_capacity_errors_per_program() -> None:
    report = campaign([_params(s) for s in range(5)], PIPELINES[:2], ks=[1], max_states=1)
    errors = [c for c in report.cases if c.error is not None]

    assert errors
    assert not report.passed
    for c in errors:
        assert c.error == "More than 1 reachable states"
        assert c.program == print_program(generate(_params(c.seed)))
    assert sum(s.errors for s in report.summary.values()) == len(errors)


def test_case_result_json() -> None:
    result = CaseResult(
        seed=3,
        reduction="rao",
        preserved=True,
        bisimilar=True,
        original_states=7,
        reduced_states=5,
        factor=1.4,
    )

    assert json.loads(result.to_json()) == {
        "seed": 3,
        "reduction": "rao",
        "preserved": True,
        "bisimilar": True,
        "originalStates": 7,
        "reducedStates": 5,
        "factor": 1.4,
    }
