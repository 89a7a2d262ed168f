from pathlib import Path

import pytest

from pcfp import models
from pcfp.frontend import parse_expr
from pcfp.models import BSP_FAIL
from pcfp.models import BSP_LABELLED_SOURCE
from pcfp.models import BSP_SOURCE
from pcfp.program import Expr
from pcfp.program import Program


@pytest.fixture
def bsp() -> Program:
    return models.bsp()


@pytest.fixture
def bsp_labelled() -> Program:
    return models.bsp_labelled()


@pytest.fixture
def fail(bsp: Program) -> Expr:
    """`cf=0 & x=0`: the deadlock state of `bsp`."""
    return parse_expr(BSP_FAIL, bsp)


@pytest.fixture
def bsp_path(tmp_path: Path) -> Path:
    path = tmp_path / "bsp.pm"
    path.write_text(BSP_SOURCE)
    return path


@pytest.fixture
def bsp_labelled_path(tmp_path: Path) -> Path:
    path = tmp_path / "bsp_labelled.pm"
    path.write_text(BSP_LABELLED_SOURCE)
    return path
