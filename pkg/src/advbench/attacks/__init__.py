"""Image-domain attacks behind one contract: ``attack(model, x, y, ...) -> AttackResult``."""

from .base import (
    Attack,
    AttackError,
    AttackGoal,
    AttackResult,
    Budget,
    clip_box,
    loss_gradient,
    perturbation_norms,
    predict,
    project_l2,
    project_linf,
    success_flags,
)
from .blackbox import NAttack, OnePixel, margin_loss, nattack, one_pixel
from .deepfool import DeepFool, UniversalPerturbation, deepfool, universal_perturbation
from .gradient import BPDA, FGSM, PGD, bpda, fgsm, fgsm_step, pgd
from .optimization import CarliniWagnerL2, LBFGSAttack, cw_hinge, cw_l2, lbfgs_attack

ATTACKS = {
    "fgsm": fgsm,
    "pgd": pgd,
    "bpda": bpda,
    "lbfgs": lbfgs_attack,
    "cw": cw_l2,
    "deepfool": deepfool,
    "universal": universal_perturbation,
    "one_pixel": one_pixel,
    "nattack": nattack,
}

__all__ = [
    "ATTACKS",
    "Attack",
    "AttackError",
    "AttackGoal",
    "AttackResult",
    "BPDA",
    "Budget",
    "CarliniWagnerL2",
    "DeepFool",
    "FGSM",
    "LBFGSAttack",
    "NAttack",
    "OnePixel",
    "PGD",
    "UniversalPerturbation",
    "bpda",
    "clip_box",
    "cw_hinge",
    "cw_l2",
    "deepfool",
    "fgsm",
    "fgsm_step",
    "lbfgs_attack",
    "loss_gradient",
    "margin_loss",
    "nattack",
    "one_pixel",
    "perturbation_norms",
    "pgd",
    "predict",
    "project_l2",
    "project_linf",
    "success_flags",
    "universal_perturbation",
]
