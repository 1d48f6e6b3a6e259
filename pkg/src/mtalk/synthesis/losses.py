"""Stage-2 objective: weighted latent regression plus code classification."""

from __future__ import annotations

import numpy as np

from .. import ndiff as nd
from ..motion_vq.layout import PART_NAMES
from .config import GeneratorConfig


def generator_loss(pred_latents: dict, pred_logits: dict, target_latents: dict,
                   target_idx: dict, cfg: GeneratorConfig):
    """sum over parts of alpha_o * L_cls,o + beta_o * L_reclatent,o.

    Returns (total, terms) with terms[f"{part}_rec"] and terms[f"{part}_cls"]
    already multiplied by their weights, so the floats sum to the total.
    Parts with alpha = 0 contribute no classification term at all.
    """
    total = None
    terms: dict[str, float] = {}
    for o in PART_NAMES:
        if o not in pred_latents:
            continue
        rec = nd.mse(pred_latents[o], np.asarray(target_latents[o]))
        part_terms = {"rec": rec * cfg.beta[o]}
        if cfg.alpha[o] != 0.0:
            log_probs = nd.log_softmax(pred_logits[o], axis=-1)
            part_terms["cls"] = nd.nll(log_probs, np.asarray(target_idx[o])) * cfg.alpha[o]
        for name, value in part_terms.items():
            terms[f"{o}_{name}"] = float(value.data)
            total = value if total is None else total + value
    if total is None:
        raise ValueError("generator_loss got no parts")
    return total, terms
