from sentidrop.actions import common, data, evaluate, model, pipeline, report, sentiment

__all__ = [
    "common",
    "data",
    "evaluate",
    "model",
    "pipeline",
    "report",
    "sentiment",
]
