"""Screen parsing, GUI exploration and grounding evaluation."""

import json
import os

from . import _uiscout
from ._uiscout import (
    EnvLoadError,
    EnvValidationError,
    IntegrityError,
    ParseError,
    PredictionParseError,
    grounding_correct,
    iou,
)

STRATEGIES = ("random_walk_ocr", "random_walk_parser", "frontier_auto", "llm_selector")
QUERY_TYPES = ("name", "shape", "function", "refexpr")

__all__ = [
    "EnvLoadError",
    "EnvValidationError",
    "IntegrityError",
    "ParseError",
    "PredictionParseError",
    "QUERY_TYPES",
    "STRATEGIES",
    "bench",
    "evaluate_grounding",
    "explore",
    "gen_instructions",
    "grounding_correct",
    "iou",
    "oracle",
    "parse",
    "state_fingerprint",
]


def _element(e):
    # Accept (x, y, w, h) tuples for bbox as well as dicts.
    e = dict(e)
    b = e["bbox"]
    if not isinstance(b, dict):
        x, y, w, h = b
        e["bbox"] = {"x": x, "y": y, "w": w, "h": h}
    return e


def state_fingerprint(elements):
    """Hex fingerprint of a list of {name, kind, bbox} elements."""
    return _uiscout.state_fingerprint_json(json.dumps([_element(e) for e in elements]))


def parse(image, templates, text_elements=(), tau=0.95, nms=0.5, multiscale=False):
    """Parse a PNG screenshot with the icon templates in `templates`.

    `text_elements` are pre-recognized text boxes ({name, bbox}).
    """
    texts = [dict(_element(t), kind="text", source="ocr") for t in text_elements]
    return json.loads(
        _uiscout.parse_json(os.fspath(image), os.fspath(templates), json.dumps(texts), tau, nms, multiscale)
    )


def explore(env, strategy="frontier_auto", budget=500, seed=0, out=None, llm_endpoint=""):
    """Run one exploration; with `out`, also record a dataset there."""
    return json.loads(
        _uiscout.explore_json(os.fspath(env), strategy, budget, seed, os.fspath(out) if out else "", llm_endpoint)
    )


def bench(envs, strategies=STRATEGIES, seeds=range(10), budget=500, jobs=1, llm_endpoint=""):
    return json.loads(
        _uiscout.bench_json([os.fspath(e) for e in envs], list(strategies), list(seeds), budget, jobs, llm_endpoint)
    )


def gen_instructions(dataset, types=QUERY_TYPES, seed=0, eval_fraction=0.0):
    return json.loads(_uiscout.gen_instructions_json(os.fspath(dataset), list(types), seed, eval_fraction))


def evaluate_grounding(predictions, instructions):
    return json.loads(_uiscout.evaluate_grounding_json(os.fspath(predictions), os.fspath(instructions)))


def oracle(env):
    return json.loads(_uiscout.oracle_json(os.fspath(env)))
