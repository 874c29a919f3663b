"""Python access to the newsvec pipeline and its numerical building blocks."""

from ._newsvec import (
    Config,
    Graph,
    NewsvecError,
    accuracy,
    binomial_interval,
    fit_swarch,
    hamilton_filter,
    label_crises,
    mcc,
    onset_metrics,
    prune,
    run_stage,
    sample_walks,
    select_elements,
    simulate_swarch,
    stage_names,
    tfidf,
    tokenize,
    transition_distribution,
)


def run_pipeline(config, force=False):
    """Run every stage in order, synthetic data first. Returns the stage reports."""
    reports = [run_stage("synth", config, force)]
    reports += [run_stage(s, config, force) for s in stage_names() if s != "synth"]
    return reports


__all__ = [
    "Config",
    "Graph",
    "NewsvecError",
    "accuracy",
    "binomial_interval",
    "fit_swarch",
    "hamilton_filter",
    "label_crises",
    "mcc",
    "onset_metrics",
    "prune",
    "run_pipeline",
    "run_stage",
    "sample_walks",
    "select_elements",
    "simulate_swarch",
    "stage_names",
    "tfidf",
    "tokenize",
    "transition_distribution",
]
