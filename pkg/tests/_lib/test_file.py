from pathlib import Path

import pytest

from pcfp._lib.errors import ParseError
from pcfp._lib.file import read_model_text
from pcfp._lib.file import write_text


def test_read_model_text(tmp_path: Path) -> None:
    fpath = tmp_path / "model.pm"
    fpath.write_bytes("dtmc\r\n// café\n".encode("utf-8"))

    assert read_model_text(fpath) == "dtmc\r\n// café\n"


def test_read_model_text_raises_on_invalid_utf8(tmp_path: Path) -> None:
    fpath = tmp_path / "model.pm"
    fpath.write_bytes(b"dtmc\nmodule \xff\n")

    with pytest.raises(ParseError) as excinfo:
        read_model_text(fpath)

    assert excinfo.value.message == "invalid UTF-8 byte 0xff"
    assert str(excinfo.value.span) == "2:8"
    assert excinfo.value.span.offset == 12


def test_read_model_text_raises_if_missing(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError, match="The model file does not exist"):
        read_model_text(tmp_path / "missing.pm")


def test_write_text_emits_lf(tmp_path: Path) -> None:
    fpath = tmp_path / "out.pm"
    write_text(fpath, "dtmc\nmodule m\n")

    assert fpath.read_bytes() == b"dtmc\nmodule m\n"

    with pytest.raises(FileExistsError):
        write_text(fpath, "dtmc\n", overwrite=False)
