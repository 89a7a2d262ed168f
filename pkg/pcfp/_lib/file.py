from pathlib import Path

from pcfp._lib.assertions import assert_file_is_readable
from pcfp._lib.assertions import assert_file_is_writable
from pcfp._lib.errors import ParseError
from pcfp._lib.errors import SourceSpan


def read_model_text(path: Path) -> str:
    """
    Read a model file as UTF-8 text.

    Raises:
        FileNotFoundError: If the file does not exist.
        IsADirectoryError: If the path is a directory.
        PermissionError: If the file is not readable.
        ParseError: If the file is not valid UTF-8. The error points at the first undecodable byte.
    """
    assert_file_is_readable(path)
    data = path.read_bytes()
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as error:
        prefix = data[: error.start].decode("utf-8")
        span = SourceSpan(
            line=prefix.count("\n") + 1,
            column=len(prefix) - prefix.rfind("\n"),
            offset=len(prefix),
        )
        raise ParseError(f"invalid UTF-8 byte 0x{data[error.start]:02x}", span) from None


def write_text(path: Path, text: str, overwrite: bool = True) -> None:
    """
    Write UTF-8 text with LF line endings.

    Raises:
        FileExistsError: If the file exists and `overwrite` is `False`.
        FileNotFoundError: If the parent directory does not exist.
        IsADirectoryError: If the path is a directory.
        PermissionError: If the file or its directory is not writable.
    """
    assert_file_is_writable(path, overwrite=overwrite)
    with path.open("w", encoding="utf-8", newline="\n") as fout:
        fout.write(text)
