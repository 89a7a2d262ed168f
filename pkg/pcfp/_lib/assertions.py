from os import R_OK
from os import W_OK
from os import access
from pathlib import Path
from typing import AbstractSet
from typing import Mapping

from pydantic import BaseModel

from pcfp._lib.errors import LabelNotExcludedError
from pcfp._lib.errors import ResetValueError
from pcfp._lib.errors import UndeclaredVariableError
from pcfp.program import Program
from pcfp.program import variables_of


def assert_file_is_readable(path: Path) -> None:
    """
    Check that a model file exists and is readable.

    Raises:
        FileNotFoundError: If the provided file path does not exist.
        IsADirectoryError: If the provided file path is a directory.
        PermissionError: If the provided file path is not readable.
    """

    if not path.exists():
        raise FileNotFoundError(f"The model file does not exist: {path}")

    if not path.is_file():
        raise IsADirectoryError(f"The model file path is a directory: {path}")

    if not access(path, R_OK):
        raise PermissionError(f"The model file is not readable: {path}")


def assert_file_is_writable(path: Path, overwrite: bool = True) -> None:
    """
    Check that the output file path is writable.

    Optionally, ensure the output file does not exist.

    Raises:
        FileExistsError: If the provided file path exists when `overwrite` is set to `False`.
        FileNotFoundError: If the provided file path's parent directory does not exist.
        IsADirectoryError: If the provided file path is a directory.
        PermissionError: If the provided file path is not writable.
    """

    if path.exists():
        if not overwrite:
            raise FileExistsError(
                f"The output file already exists: {path}\n"
                "Specify `overwrite=True` to overwrite the existing file."
            )

        if not path.is_file():
            raise IsADirectoryError(f"The output file path is a directory: {path}")

        if not access(path, W_OK):
            raise PermissionError(f"The output file is not writable: {path}")

    else:
        if not path.parent.exists():
            raise FileNotFoundError(
                f"The specified directory for the output file path does not exist: {path.parent}"
            )

        if not access(path.parent, W_OK):
            raise PermissionError(
                f"The specified directory for the output file path is not writable: {path.parent}"
            )


def assert_fieldnames_are_record_fields(
    specified_fieldnames: list[str],
    record_type: type[BaseModel],
) -> None:
    """
    Check that all of the specified fields are fields of the given record type.

    Raises:
        ValueError: if any of the specified fieldnames are not a field of the given record type.
    """

    invalid_fieldnames = [f for f in specified_fieldnames if f not in record_type.model_fields]

    if len(invalid_fieldnames) > 0:
        raise ValueError(
            "One or more of the specified fields are not fields of the record "
            + f"{record_type.__name__}: "
            + ", ".join(invalid_fieldnames)
        )


def assert_variables_are_declared(
    program: Program,
    names: AbstractSet[str],
    what: str = "specified",
) -> None:
    """
    Check that every name refers to a declared (non control-flow) variable of the program.

    Raises:
        UndeclaredVariableError: If any of the names is not declared.
    """

    unknown = sorted(set(names) - set(program.variables))

    if len(unknown) > 0:
        raise UndeclaredVariableError(
            f"One or more of the {what} variables are not declared in module {program.name}: "
            + ", ".join(unknown)
        )


def assert_reset_is_valid(program: Program, reset: Mapping[str, int]) -> None:
    """
    Check that a reset evaluation is total and within the declared domains.

    Raises:
        ResetValueError: If a variable has no reset value, a reset value names an undeclared
            variable, or a reset value lies outside its variable's domain.
    """

    unknown = sorted(set(reset) - set(program.variables))
    if unknown:
        raise ResetValueError("Reset values given for undeclared variables: " + ", ".join(unknown))

    missing = [name for name in program.variables if name not in reset]
    if missing:
        raise ResetValueError("No reset value for: " + ", ".join(missing))

    for decl in program.decls:
        if not decl.contains(reset[decl.name]):
            raise ResetValueError(
                f"Reset value {reset[decl.name]} of {decl.name} outside [{decl.lo}..{decl.hi}]"
            )


def assert_labels_are_excluded(program: Program, exclude: AbstractSet[str]) -> None:
    """
    Check that every label ranges over excluded variables (and the control-flow variable) only.

    Raises:
        LabelNotExcludedError: If a label refers to a variable outside of `exclude`.
    """
    for label in program.labels:
        offending = sorted(variables_of(label.expr) - set(exclude) - {program.cf_var})
        if offending:
            raise LabelNotExcludedError(
                f"label variable must be excluded: label {label.name!r} refers to "
                + ", ".join(offending)
            )
