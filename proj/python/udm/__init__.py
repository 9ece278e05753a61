"""Dysfluency analysis engine: Python bindings.

Reports, thresholds and gold annotations cross the boundary as JSON; this
wrapper turns them into plain dicts.
"""

import json

from . import _udm
from ._udm import Error, alignment_error_rate, cohens_kappa, real_time_factor, temporal_iou

__all__ = [
    "Analyzer",
    "Error",
    "alignment_error_rate",
    "cohens_kappa",
    "evaluate",
    "features",
    "real_time_factor",
    "render_svg",
    "rescore",
    "synthesize",
    "temporal_iou",
]


def _dump(obj):
    if obj is None:
        return ""
    return obj if isinstance(obj, str) else json.dumps(obj)


def _report_text(report):
    return report if isinstance(report, str) else json.dumps(report)


class Analyzer:
    """Pipeline bound to one inventory, threshold set and encoder."""

    def __init__(self, inventory=None, thresholds=None, templates=None, attribution=True):
        self._impl = _udm.Analyzer(_dump(inventory), _dump(thresholds), _dump(templates), attribution)

    def analyze(self, samples, sample_rate, transcript):
        return json.loads(self._impl.analyze(samples, sample_rate, transcript))

    def analyze_file(self, path, transcript):
        return json.loads(self._impl.analyze_file(str(path), transcript))

    @property
    def inventory(self):
        return json.loads(self._impl.inventory())


def features(samples, sample_rate):
    """(frames x channels array, channel labels)."""
    return _udm.features(samples, sample_rate)


def synthesize(seed, spec=None, inventory=None):
    """Returns (samples, sample_rate, transcript, gold)."""
    samples, sr, transcript, gold = _udm.synthesize(seed, _dump(spec), _dump(inventory))
    return samples, sr, transcript, json.loads(gold)


def rescore(report, thresholds):
    return json.loads(_udm.rescore(_report_text(report), _dump(thresholds)))


def render_svg(report, px_per_s=100.0):
    return _udm.render_svg(_report_text(report), px_per_s)


def evaluate(report, gold):
    return json.loads(_udm.evaluate(_report_text(report), _dump(gold)))
