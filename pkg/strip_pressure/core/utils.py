"""Utilities.
"""
import argparse
import hashlib
import inspect
import itertools
import json
import logging
import math
import os
import tempfile
from typing import Any, Dict, Iterator, List, Optional, Type

from colorama import Fore
from dotenv import load_dotenv

DEFAULT_PC_BOUND = 0.556
SIMULATED_PC = 0.5927
DEFAULT_MAX_COLUMNS = 2_000_000
DEFAULT_MAX_ITERATIONS = 1_000_000
DEFAULT_REL_TOL = 1e-12

_log_level = logging.INFO


def load_env(env_file_path: str = "") -> None:
    if env_file_path:
        load_dotenv(env_file_path)
    else:
        load_dotenv()


def env_float(name: str, default: float) -> float:
    """Read a float setting from the environment.

    Args:
        name (str): The environment key.
        default (float): The value used when the key is unset or empty.

    Returns:
        float: The parsed value.
    """
    raw = os.getenv(name, "")
    if not raw.strip():
        return default
    try:
        return float(raw)
    except ValueError:
        raise ValueError(f"Environment key {name} is not a number: {raw}.")


def env_int(name: str, default: int) -> int:
    raw = os.getenv(name, "")
    if not raw.strip():
        return default
    try:
        return int(float(raw))
    except ValueError:
        raise ValueError(f"Environment key {name} is not an integer: {raw}.")


def set_log_level(level: Any) -> None:
    """Set the level used by every Logger built afterwards."""
    global _log_level
    _log_level = level


# Logger that prefixes the caller and line of code and colors the message by level.
class Logger:
    def __init__(self, logger_name: str, verbose: bool = True, level: Optional[Any] = None):
        self.logger = logging.getLogger(logger_name)
        self.verbose = verbose
        self.logger.setLevel(level=level if level is not None else _log_level)
        self.formatter = logging.Formatter(
            "%(asctime)s %(levelname)s %(name)s %(message)s (%(filename)s:%(lineno)d)"
        )
        # One handler per logger name, however many times the wrapper is built.
        # The handler passes everything; the logger level filters.
        if not self.logger.handlers:
            self.console_handler = logging.StreamHandler()
            self.console_handler.setFormatter(self.formatter)
            self.logger.addHandler(self.console_handler)

    def _decorate(self, color: str, message: str) -> str:
        caller_frame = inspect.stack()[2]
        caller_name = caller_frame[3]
        caller_line = caller_frame[2]
        return color + f"({caller_name} L{caller_line}): {message}" + Fore.RESET

    def debug(self, message: str) -> None:
        if not self.verbose or not self.logger.isEnabledFor(logging.DEBUG):
            return
        self.logger.debug(self._decorate(Fore.WHITE, message))

    def info(self, message: str) -> None:
        if not self.verbose:
            return
        self.logger.info(self._decorate(Fore.CYAN, message))

    def warning(self, message: str) -> None:
        if not self.verbose:
            return
        self.logger.warning(self._decorate(Fore.YELLOW, message))

    def error(self, message: str) -> None:
        if not self.verbose:
            return
        self.logger.error(self._decorate(Fore.RED, message))


def chunk_list(lst: Any, chunk_size: int) -> Iterator[Any]:
    """Chunk a sequence into smaller tuples.

    Args:
        lst (Any): The sequence to be chunked.
        chunk_size (int): The size of each chunk.

    Returns:
        Iterator: The chunked sequence.
    """
    it = iter(lst)
    return iter(lambda: tuple(itertools.islice(it, chunk_size)), ())


def atomic_write_text(path: str, content: str) -> None:
    """Write a file through a temporary sibling and a rename, so an interrupted
    write leaves either the old or the new content on disk.

    Args:
        path (str): The destination path.
        content (str): The text to write.
    """
    directory = os.path.dirname(os.path.abspath(path))
    if not os.path.exists(directory):
        os.makedirs(directory)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(content)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def fingerprint(payload: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON encoding of a payload."""
    encoded = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(encoded.encode("utf-8")).hexdigest()


def format_number(value: float) -> str:
    """Format a number with 15 significant digits."""
    return f"{value:.15g}"


def init_parsers(command_mapping: Dict[str, Type[Any]]) -> argparse.ArgumentParser:
    """Construct the argument parser with one subcommand per command class.

    Args:
        command_mapping (Dict[str, Type[Any]]): The mapping between the subcommand name
            and the command type.

    Returns:
        argparse.ArgumentParser: The constructed argument parser.
    """
    parser = argparse.ArgumentParser(
        description="Approximate the pressure of a nearest-neighbor Z^2 SFT with strip transfer matrices."
    )
    subparsers = parser.add_subparsers(help="command", dest="command", required=True)

    for name, command in command_mapping.items():
        subparser = subparsers.add_parser(name)
        command.add_arguments_to_parser(subparser)

    return parser


def parse_key_values(text: str) -> Dict[str, str]:
    """Parse `key=value,key=value` into a dictionary.

    Args:
        text (str): The text to parse. Empty text gives an empty dictionary.

    Returns:
        Dict[str, str]: The parsed pairs.
    """
    result: Dict[str, str] = {}
    if not text.strip():
        return result
    for item in text.split(","):
        if "=" not in item:
            raise ValueError(f"Expected key=value, got [{item}].")
        key, value = item.split("=", 1)
        result[key.strip()] = value.strip()
    return result


def lcm_all(values: List[int]) -> int:
    return math.lcm(*values) if values else 1
