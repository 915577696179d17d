import logging
from pathlib import Path
from typing import Any, List, Union

import orjson
import pandas as pd
from pydantic import BaseModel

from beliefnet.topology import Network, format_edge_list

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


class OutputManager:
    """Writes every artifact of a command into one directory and remembers what it wrote."""

    def __init__(self, output_dir: Union[str, Path]):
        self.output_dir = Path(output_dir)
        self.written: List[Path] = []
        self._ensure_output_directory()

    def _ensure_output_directory(self) -> None:
        """Ensures the output directory exists."""
        self.output_dir.mkdir(parents=True, exist_ok=True)

    def _record(self, path: Path) -> Path:
        if path not in self.written:
            self.written.append(path)
        logger.info(f"Wrote {path}")
        return path

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        """
        Writes a frame as comma-separated UTF-8 with a header row and LF endings.

        Floats use 17 significant digits so values survive a round trip.

        Args:
            name (str): file name inside the output directory
            frame (pd.DataFrame): the table to write

        Returns:
            Path: the written file.
        """
        path = self.output_dir / name
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", encoding="utf-8")
        return self._record(path)

    def write_json(self, name: str, payload: Any) -> Path:
        """
        Writes a JSON document with sorted keys and two-space indentation.

        Args:
            name (str): file name inside the output directory
            payload: a pydantic model, or anything orjson serializes

        Returns:
            Path: the written file.
        """
        if isinstance(payload, BaseModel):
            payload = payload.model_dump(mode="json")
        path = self.output_dir / name
        path.write_bytes(
            orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY) + b"\n"
        )
        return self._record(path)

    def write_edge_list(self, name: str, network: Network) -> Path:
        path = self.output_dir / name
        path.write_text(format_edge_list(network), encoding="ascii", newline="\n")
        return self._record(path)
