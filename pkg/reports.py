"""
Run-directory writers: versioned CSV tables, JSON reports and the run manifest with its
configuration hash.
"""

import hashlib
import json
import math
import os
from typing import Any, Dict

import numpy as np
import pandas as pd

SCHEMA_VERSION = 1


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become strings so the file stays valid JSON"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return value
    if hasattr(value, 'value') and isinstance(getattr(value, 'value'), str):
        return value.value
    return value


def dumps(payload: Dict[str, Any]) -> str:
    return json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + '\n'


def config_hash(config_dict: Dict[str, Any]) -> str:
    """Stable key for a resolved configuration"""
    data_str = json.dumps(to_jsonable(config_dict), sort_keys=True)
    return hashlib.md5(data_str.encode()).hexdigest()


class ReportStore:
    """Writes the files of one run under its run directory"""

    def __init__(self, run_dir: str):
        self.run_dir = run_dir
        self.outputs: Dict[str, str] = {}
        os.makedirs(self.run_dir, exist_ok=True)

    def _path(self, name: str) -> str:
        path = os.path.join(self.run_dir, name)
        self.outputs[name] = path
        return path

    def _write_text(self, name: str, text: str) -> str:
        path = self._path(name)
        with open(path, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
        return path

    def _write_table(self, name: str, frame: pd.DataFrame) -> str:
        path = self._path(name)
        with open(path, 'w', encoding='utf-8', newline='') as handle:
            handle.write(f"# schema_version={SCHEMA_VERSION}\n")
            frame.to_csv(handle, index=False, lineterminator='\n')
        return path

    def write_scan(self, frame: pd.DataFrame) -> str:
        return self._write_table('scan.csv', frame)

    def write_trials(self, frame: pd.DataFrame) -> str:
        return self._write_table('trials.csv', frame)

    def write_report(self, payload: Dict[str, Any]) -> str:
        return self._write_text('report.json', dumps(payload))

    def write_ledger(self, text: str) -> str:
        return self._write_text('lemmas.txt', text)

    def write_points(self, points) -> str:
        path = self._path('points.csv')
        points.to_csv(path)
        return path

    def write_manifest(self, manifest: Dict[str, Any]) -> str:
        return self._write_text('manifest.json', dumps(manifest))


def read_manifest(path: str) -> Dict[str, Any]:
    with open(path, encoding='utf-8') as handle:
        return json.load(handle)
