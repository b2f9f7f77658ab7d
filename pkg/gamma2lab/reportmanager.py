"""
Report output backends: one JSON document per run and CSV trajectory tables,
fanned out by ReportManager.
"""
import csv
import json
from math import isfinite
from abc import ABC, abstractmethod
from dataclasses import dataclass
from datetime import datetime, timezone
from logging import getLogger
from os.path import dirname, abspath, isdir
from typing import List, Dict, Any

import numpy as np

from gamma2lab.helpers import hashit, mkdir_p
from gamma2lab.structures import FlowRecord, ConfigurationError

SCHEMA_VERSION = 1


def normalize_payload(item: Any) -> Any:
    """
    Convert records to plain JSON values:
    - NamedTuples become ordered dicts, tuples and arrays become lists
    - numpy scalars become python scalars
    - NaN and infinities become None
    """
    if hasattr(item, '_asdict'):
        return {key: normalize_payload(value) for key, value in item._asdict().items()}
    if isinstance(item, dict):
        return {str(key): normalize_payload(value) for key, value in item.items()}
    if isinstance(item, (list, tuple)):
        return [normalize_payload(value) for value in item]
    if isinstance(item, np.ndarray):
        return [normalize_payload(value) for value in item.tolist()]
    if isinstance(item, (bool, np.bool_)):
        return bool(item)
    if isinstance(item, (int, np.integer)):
        return int(item)
    if isinstance(item, (float, np.floating)):
        value = float(item)
        return value if isfinite(value) else None
    return item


def serialize_payload(payload: Dict[str, Any]) -> str:
    return json.dumps(payload, indent=2, allow_nan=False)


def payload_sha256(payload: Dict[str, Any]) -> str:
    return hashit(serialize_payload(payload))


@dataclass
class BackendConfig:
    """Configuration for a report backend"""
    backend_type: str  # 'json' or 'csv'
    path: str
    timestamp: bool = True
    enabled: bool = True


class ReportBackend(ABC):
    """Abstract base class for report backends"""
    kind: str = None

    def __init__(self, config: BackendConfig):
        self.config = config
        self.logger = getLogger()

    def __repr__(self):
        return f"<{type(self).__name__} {self.config.path}>"

    def connect(self) -> bool:
        folder = dirname(abspath(self.config.path))
        mkdir_p(folder)
        return self.test_connection()

    def test_connection(self) -> bool:
        folder = dirname(abspath(self.config.path))
        if not isdir(folder):
            self.logger.error('Report folder %s does not exist and could not be created', folder)
            return False
        return True

    @abstractmethod
    def write(self, item) -> bool:
        """Write one item to the backend"""
        pass

    def close(self):
        pass


class JsonReportBackend(ReportBackend):
    """Single JSON document per run; the timestamp sits outside the hashed payload"""
    kind = 'report'

    def document(self, payload: Dict[str, Any]) -> Dict[str, Any]:
        document = {'schema_version': SCHEMA_VERSION}
        if self.config.timestamp:
            document['generated_at'] = datetime.now(timezone.utc).isoformat(timespec='seconds')
        document['payload_sha256'] = payload_sha256(payload)
        document['payload'] = payload
        return document

    def write(self, payload: Dict[str, Any]) -> bool:
        try:
            with open(self.config.path, 'w', encoding='utf-8') as handle:
                handle.write(json.dumps(self.document(payload), indent=2, allow_nan=False))
                handle.write('\n')
            self.logger.info('Report written to %s', self.config.path)
            return True
        except (OSError, ValueError) as e:
            self.logger.error('Could not write report %s: %s', self.config.path, e)
            return False


class CsvTrajectoryBackend(ReportBackend):
    """One row per time sample, header row, comma separated, '.' decimals"""
    kind = 'trajectory'
    columns = FlowRecord._fields

    @staticmethod
    def format_value(value):
        return f'{float(value):.17g}'

    def write(self, trajectory) -> bool:
        try:
            with open(self.config.path, 'w', newline='', encoding='utf-8') as handle:
                writer = csv.writer(handle)
                writer.writerow(self.columns)
                for record in trajectory.records:
                    writer.writerow([self.format_value(getattr(record, column)) for column in self.columns])
            self.logger.info('Trajectory with %s samples written to %s', len(trajectory.records), self.config.path)
            return True
        except OSError as e:
            self.logger.error('Could not write trajectory %s: %s', self.config.path, e)
            return False


class ReportManager(object):
    """Fans report items out to every backend of the matching kind"""

    backend_map = {
        'json': JsonReportBackend,
        'csv': CsvTrajectoryBackend,
    }

    def __init__(self, configs: List[BackendConfig]):
        self.logger = getLogger()
        self.backends: List[ReportBackend] = []

        for config in configs:
            if not config.enabled:
                continue
            backend = self._create_backend(config)
            if backend.connect():
                self.backends.append(backend)
            else:
                self.logger.error('Failed to open %s backend at %s', config.backend_type, config.path)

    def _create_backend(self, config: BackendConfig) -> ReportBackend:
        backend_class = self.backend_map.get(config.backend_type.lower())
        if not backend_class:
            raise ConfigurationError(f'Unknown report backend type: {config.backend_type}')
        return backend_class(config)

    def _fan_out(self, kind, item) -> Dict[str, bool]:
        results = {}
        for backend in self.backends:
            if backend.kind == kind:
                results[backend.config.path] = backend.write(item)
        return results

    def write_report(self, payload: Dict[str, Any]) -> Dict[str, bool]:
        return self._fan_out('report', normalize_payload(payload))

    def write_trajectory(self, trajectory) -> Dict[str, bool]:
        return self._fan_out('trajectory', trajectory)

    def close(self):
        for backend in self.backends:
            backend.close()
