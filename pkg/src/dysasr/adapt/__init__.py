"""
Dysasr Adapt Module

Speaker transforms, speaker adaptive training, test-time adaptation and
Bayesian variational adaptation.
"""

from dysasr.adapt.bayes import ElboResult, bayes_adapt, elbo_loss, posterior_mean_inference
from dysasr.adapt.sat import TransformBank, sat_train
from dysasr.adapt.test_time import (
    adapt_speakers,
    select_adaptation_subset,
    test_time_adapt,
    write_adaptation_log,
)
from dysasr.adapt.transforms import (
    SpeakerTransform,
    VariationalPosterior,
    apply_transform,
    load_transform_store,
    monte_carlo_kl,
    save_transform_store,
)

__all__ = [
    "ElboResult",
    "SpeakerTransform",
    "TransformBank",
    "VariationalPosterior",
    "adapt_speakers",
    "apply_transform",
    "bayes_adapt",
    "elbo_loss",
    "load_transform_store",
    "monte_carlo_kl",
    "posterior_mean_inference",
    "sat_train",
    "save_transform_store",
    "select_adaptation_subset",
    "test_time_adapt",
    "write_adaptation_log",
]
