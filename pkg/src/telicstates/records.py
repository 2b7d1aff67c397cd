"""
Output files of a run. Tables are multi-CSV files with a ``[provenance]``
section (tool version, command, seed and configuration) followed by a
``[data]`` section; every file is written to a temporary sibling first and
moved into place.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Sequence, Tuple, \
    Union
import csv
import io
import json
import logging
import os

import multicsv

from .version import __version__


logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
Cell = Union[str, int, float, None]

PROVENANCE = "provenance"
DATA = "data"


def format_cell(value: Cell) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[Cell]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_cell(value) for value in row])
    return buffer.getvalue()


def _temporary(path: Path) -> Path:
    return path.with_name(f".{path.name}.tmp")


def write_text(path: PathLike, text: str) -> Path:
    path = Path(path)
    temporary = _temporary(path)
    with open(temporary, "w", encoding="utf-8", newline="") as stream:
        stream.write(text)
    os.replace(temporary, path)
    return path


def write_json(path: PathLike, payload: Any) -> Path:
    return write_text(path, json.dumps(payload, indent=2, sort_keys=True)
                      + "\n")


def write_table(path: PathLike, header: Sequence[str],
                rows: Iterable[Sequence[Cell]],
                provenance: Mapping[str, Cell]) -> Path:
    path = Path(path)
    temporary = _temporary(path)
    with multicsv.open(temporary, mode="w+") as table:
        table[PROVENANCE] = io.StringIO(_csv_text(
            ("key", "value"), sorted(provenance.items())))
        table[DATA] = io.StringIO(_csv_text(header, rows))
    os.replace(temporary, path)
    logger.info("Wrote %s.", path)
    return path


def read_table(path: PathLike) \
        -> Tuple[Dict[str, str], List[str], List[List[str]]]:
    """Provenance, header and data rows of a table written by
    `write_table`."""

    with multicsv.open(path, mode="r") as table:
        provenance = {row[0]: row[1]
                      for row in list(csv.reader(table[PROVENANCE]))[1:]}
        data = list(csv.reader(table[DATA]))
    return provenance, data[0], data[1:]


@dataclass
class RunManifest:
    """
    Every file a command writes, with enough context to repeat the run.
    Wall time is the only field that differs between identical runs.
    """

    command: str
    config_hash: str
    seed: int
    version: str = __version__
    wall_time: float = 0.0
    files: List[str] = field(default_factory=list)

    def add(self, path: Path) -> Path:
        self.files.append(path.name)
        return path

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "version": self.version,
            "wall_time_seconds": self.wall_time,
            "files": sorted(self.files),
        }

    def write(self, directory: PathLike) -> Path:
        return write_json(Path(directory) / "manifest.json", self.to_dict())


class Recorder:
    """Writes a command's outputs into one directory and lists them in its
    manifest."""

    def __init__(self, directory: PathLike, manifest: RunManifest,
                 provenance: Mapping[str, Cell]):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.manifest = manifest
        self.provenance = dict(provenance)

    def table(self, name: str, header: Sequence[str],
              rows: Iterable[Sequence[Cell]]) -> Path:
        return self.manifest.add(write_table(self.directory / name, header,
                                             rows, self.provenance))

    def json(self, name: str, payload: Any) -> Path:
        document = {"provenance": self.provenance, "result": payload}
        return self.manifest.add(write_json(self.directory / name, document))

    def svg(self, name: str, text: str) -> Path:
        return self.manifest.add(write_text(self.directory / name, text))

    def close(self, wall_time: float) -> Path:
        self.manifest.wall_time = wall_time
        return self.manifest.write(self.directory)
