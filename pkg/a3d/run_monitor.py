#!/usr/bin/env python3
"""
Run Monitor for the A3D toolkit
Sets up logging, times pipeline stages, tracks errors and writes run manifests
"""

import json
import logging
import os
import sys
import time
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional

from . import __version__
from .errors import DataFormatError

LOG_FORMAT = '%(asctime)s - %(levelname)s - %(message)s'

logger = logging.getLogger(__name__)


def setup_logging(level: str = "INFO", log_file: Optional[str] = None):
    """Setup logging configuration"""
    handlers: List[logging.Handler] = [logging.StreamHandler(sys.stderr)]
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding='utf-8'))

    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )


def manifest_path_for(output_path: str) -> str:
    """Manifest location for an output file or directory"""
    if os.path.isdir(output_path):
        return os.path.join(output_path, "manifest.json")
    return f"{output_path}.manifest.json"


class RunMonitor:
    """Tracks one CLI command: its configuration, stage timings and errors"""

    def __init__(self, command: str, config: Dict[str, Any], seed: Optional[int] = None):
        """Initialize run monitor"""
        self.command = command
        self.config = dict(config)
        self.seed = seed
        self.inputs: Dict[str, str] = {}
        self.outputs: Dict[str, str] = {}
        self.stage_times: Dict[str, float] = {}
        self.error_log: List[Dict[str, str]] = []

    def add_input(self, name: str, path: str):
        self.inputs[name] = str(path)

    def add_output(self, name: str, path: str):
        self.outputs[name] = str(path)

    @contextmanager
    def stage(self, name: str) -> Iterator[None]:
        """Time a pipeline stage and log its duration"""
        start = time.perf_counter()
        logger.info(f"{self.command}: {name} started")
        try:
            yield
        except Exception as e:
            self.log_error(name, e)
            raise
        finally:
            elapsed = time.perf_counter() - start
            self.stage_times[name] = elapsed
            logger.info(f"{self.command}: {name} finished in {elapsed:.2f}s")

    def log_error(self, component: str, error: Exception):
        """Log a stage error"""
        self.error_log.append({"component": component, "error": str(error)})
        logger.error(f"{component} error: {error}")

    def manifest(self) -> Dict[str, Any]:
        """Build the run manifest; contains nothing time-dependent"""
        return {
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "seed": self.seed,
            "tool_version": __version__,
        }

    def write_manifest(self, path: str) -> str:
        """Save manifest next to the command's outputs"""
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(self.manifest(), f, indent=2, sort_keys=True)
            f.write("\n")
        logger.info(f"Manifest written: {path}")
        return path


def load_manifest(path: str) -> Dict[str, Any]:
    """Load a manifest written by RunMonitor"""
    with open(path, 'r', encoding='utf-8') as f:
        manifest = json.load(f)
    for key in ("command", "config"):
        if key not in manifest:
            raise DataFormatError(path, None, f"manifest missing '{key}'")
    return manifest
