"""Discrete motion priors: per-part VQ-VAEs over Rot6D / face / contact channels."""

from .io import load_vqvae, parameter_digest, save_vqvae
from .layout import BODY_PARTS, DEFAULT_LAYOUT, PART_NAMES, BodyLayout, PartLayout
from .losses import temporal_diff, vq_loss
from .model import (
    FULL_SCALE,
    Codebook,
    MotionVQVAE,
    VQConfig,
    nearest_codes,
    quantize,
    straight_through,
)
from .rotation import (
    DegenerateRotationError,
    axis_angle_to_matrix,
    geodesic_angle,
    geodesic_loss,
    matrix_to_rot6d,
    rot6d_to_matrix,
    rot6d_to_matrix_diff,
)
from .train import VQTrainConfig, eval_windows, evaluate, mean_abs_acceleration, reconstruct, train_vqvae
