from contextlib import contextmanager
from csv import DictWriter
from pathlib import Path
from typing import IO
from typing import Any
from typing import Iterable
from typing import Iterator

from pcfp._lib.assertions import assert_fieldnames_are_record_fields
from pcfp._lib.assertions import assert_file_is_writable
from pcfp._lib.records import Record


class RecordWriter:
    """Writes report records as the rows of a delimited table, one column per field."""

    _record_type: type[Record]
    _fieldnames: list[str]
    _fout: IO[str]
    _writer: DictWriter

    def __init__(
        self,
        fout: IO[str],
        record_type: type[Record],
        delimiter: str = "\t",
        include_fields: list[str] | None = None,
        exclude_fields: list[str] | None = None,
        write_header: bool = True,
    ) -> None:
        """
        Args:
            fout: Open file handle for writing.
            record_type: The record type.
            delimiter: The output file delimiter.
            include_fields: If specified, only the listed fields will be written, in the order
                provided. May not be used together with `exclude_fields`.
            exclude_fields: If specified, any listed fields will be omitted.
                May not be used together with `include_fields`.
            write_header: If True, a header row with the serialised (camelCase) name of every
                written field precedes the records.

        Raises:
            ValueError: If both `include_fields` and `exclude_fields` are specified, or either
                names a field the record type does not have.
        """
        self._record_type = record_type
        self._fieldnames = _validate_output_fieldnames(
            record_type=record_type,
            include_fields=include_fields,
            exclude_fields=exclude_fields,
        )
        self._fout = fout
        self._writer = DictWriter(
            f=self._fout,
            fieldnames=[_column(record_type, f) for f in self._fieldnames],
            delimiter=delimiter,
            lineterminator="\n",
        )

        if write_header:
            self._writer.writeheader()

    def write(self, record: Record) -> None:
        """
        Write a single record.

        Raises:
            ValueError: If the provided record is not an instance of the writer's record type.
        """
        if not isinstance(record, self._record_type):
            raise ValueError(f"Must provide instances of {self._record_type.__name__}")

        # keyed by column name; `DictWriter` restores the column order
        row = record.model_dump(mode="json", by_alias=True, include=set(self._fieldnames))
        self._writer.writerow(row)

    def writeall(self, records: Iterable[Record]) -> None:
        for record in records:
            self.write(record)

    @classmethod
    @contextmanager
    def open(
        cls,
        filename: str | Path,
        record_type: type[Record],
        overwrite: bool = True,
        **kwds: Any,
    ) -> Iterator["RecordWriter"]:
        """
        Open a new `RecordWriter` from a file path.

        Args:
            filename: The path of the table.
            record_type: The record type to write.
            overwrite: If `False`, the file must not exist yet.
            **kwds: Additional keyword arguments to be passed to the `RecordWriter` constructor.

        Raises:
            FileExistsError: If the file exists and `overwrite` is `False`.
            FileNotFoundError: If the parent directory does not exist.
            IsADirectoryError: If the output file path is a directory.
            PermissionError: If the output file is not writable.
        """
        filepath = Path(filename)
        assert_file_is_writable(filepath, overwrite=overwrite)

        fout = filepath.open("w", encoding="utf-8", newline="")
        try:
            yield cls(fout=fout, record_type=record_type, **kwds)
        finally:
            fout.close()


def _column(record_type: type[Record], fieldname: str) -> str:
    info = record_type.model_fields[fieldname]
    alias = info.serialization_alias or info.alias
    return alias if alias is not None else fieldname


def _validate_output_fieldnames(
    record_type: type[Record],
    include_fields: list[str] | None = None,
    exclude_fields: list[str] | None = None,
) -> list[str]:
    """
    Subset and/or re-order the record's fields based on the specified include/exclude lists.

    Raises:
        ValueError: If both `include_fields` and `exclude_fields` are specified.
    """

    if include_fields is not None and exclude_fields is not None:
        raise ValueError(
            "Only one of `include_fields` and `exclude_fields` may be specified, not both."
        )
    elif exclude_fields is not None:
        assert_fieldnames_are_record_fields(exclude_fields, record_type)
        output_fieldnames = [f for f in record_type.model_fields if f not in exclude_fields]
    elif include_fields is not None:
        assert_fieldnames_are_record_fields(include_fields, record_type)
        output_fieldnames = include_fields
    else:
        output_fieldnames = list(record_type.model_fields)

    return output_fieldnames
