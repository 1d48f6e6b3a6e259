"""Evaluation metrics: FGD, diversity, beat constancy, face errors."""

from .clips import JointPositions, body_diversity, diversity, lvd, vertex_mse
from .extractor import ExtractorConfig, FeatureExtractor, UntrainedExtractorError, fgd_features
from .frechet import GaussianStats, fgd, fit_gaussian, frechet_distance
from .rhythm import (DEFAULT_SIGMA, audio_beats, beat_constancy, motion_beats, onset_envelope,
                     speed_minima, upper_body_speed)

__all__ = [
    "DEFAULT_SIGMA", "ExtractorConfig", "FeatureExtractor", "GaussianStats", "JointPositions",
    "UntrainedExtractorError", "audio_beats", "beat_constancy", "body_diversity", "diversity",
    "fgd", "fgd_features", "fit_gaussian", "frechet_distance", "lvd", "motion_beats",
    "onset_envelope", "speed_minima", "upper_body_speed", "vertex_mse",
]
