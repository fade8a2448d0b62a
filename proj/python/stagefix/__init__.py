"""Python access to the stagefix core."""

import json

from . import _core
from ._core import (
    CorpusError,
    EvalError,
    LlmError,
    PipelineError,
    RetrievalError,
    classify_bug_type,
    exact_match,
    fix_at_k,
    format_percent,
    levenshtein_tokens,
    normalize_whitespace,
    paired_t_test,
    tokenize,
)

__all__ = [
    "CorpusError", "EvalError", "LlmError", "PipelineError", "RetrievalError",
    "classify_bug_type", "exact_match", "fix_at_k", "format_percent", "levenshtein_tokens",
    "normalize_whitespace", "paired_t_test", "tokenize",
    "load_corpus", "instance_bug_type", "retrieve", "bm25_scores", "extract_context",
    "run_pipeline", "evaluate", "render_report", "run_cli",
]


def _records(instances):
    return [json.dumps(i) for i in instances]


def load_corpus(path):
    with open(path, encoding="utf-8") as f:
        text = _core.parse_corpus(f.read())
    return [json.loads(line) for line in text.splitlines()]


def instance_bug_type(instance):
    return _core.instance_bug_type(json.dumps(instance))


def retrieve(train, target):
    return json.loads(_core.retrieve(_records(train), json.dumps(target)))


def bm25_scores(train, facet, query):
    return _core.bm25_scores(_records(train), facet, query)


def extract_context(source_root, buggy_method):
    text = _core.extract_context(str(source_root), buggy_method)
    return None if text is None else json.loads(text)


def run_pipeline(instance, complete, demonstrations=(), max_iter=3, temperature=0.0, sample_index=0):
    """complete(role, system, user, temperature, max_tokens, sample_index) -> str"""
    out = _core.run_pipeline(json.dumps(instance), json.dumps(list(demonstrations)), complete,
                             max_iter, temperature, sample_index)
    return json.loads(out)


def evaluate(corpus, models, k_values=(1, 3, 5)):
    return json.loads(_core.evaluate(_records(corpus), models, list(k_values)))


def render_report(report, fmt="markdown"):
    return _core.render_report(json.dumps(report), fmt)


def run_cli(*args):
    return _core.run_cli([str(a) for a in args])
