"""Attack and defense taxonomy as enums, plus per-algorithm metadata."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Domain(str, Enum):
    IMAGE = "image"
    GRAPH = "graph"


class Knowledge(str, Enum):
    WHITE_BOX = "white_box"
    GREY_BOX = "grey_box"
    BLACK_BOX = "black_box"


class Stage(str, Enum):
    EVASION = "evasion"
    POISONING = "poisoning"


class Goal(str, Enum):
    TARGETED = "targeted"
    UNTARGETED = "untargeted"


class Norm(str, Enum):
    L0 = "l0"
    L2 = "l2"
    LINF = "linf"
    EDGE_FLIPS = "edge_flips"


class DefenseKind(str, Enum):
    NONE = "none"
    ADVERSARIAL_TRAINING = "adversarial_training"
    GRADIENT_MASKING = "gradient_masking"
    DETECTION = "detection"
    PREPROCESSING = "preprocessing"


@dataclass(frozen=True)
class AttackInfo:
    domain: Domain
    knowledge: Knowledge
    stage: Stage
    goals: tuple
    norm: Norm


@dataclass(frozen=True)
class DefenseInfo:
    domain: Domain
    kind: DefenseKind


_BOTH = (Goal.TARGETED, Goal.UNTARGETED)
_T = (Goal.TARGETED,)
_U = (Goal.UNTARGETED,)

ATTACK_INFO = {
    "fgsm": AttackInfo(Domain.IMAGE, Knowledge.WHITE_BOX, Stage.EVASION, _BOTH, Norm.LINF),
    "pgd": AttackInfo(Domain.IMAGE, Knowledge.WHITE_BOX, Stage.EVASION, _BOTH, Norm.LINF),
    "bpda": AttackInfo(Domain.IMAGE, Knowledge.WHITE_BOX, Stage.EVASION, _BOTH, Norm.LINF),
    "lbfgs": AttackInfo(Domain.IMAGE, Knowledge.WHITE_BOX, Stage.EVASION, _T, Norm.L2),
    "cw": AttackInfo(Domain.IMAGE, Knowledge.WHITE_BOX, Stage.EVASION, _BOTH, Norm.L2),
    "deepfool": AttackInfo(Domain.IMAGE, Knowledge.WHITE_BOX, Stage.EVASION, _U, Norm.L2),
    "universal": AttackInfo(Domain.IMAGE, Knowledge.WHITE_BOX, Stage.EVASION, _U, Norm.L2),
    "one_pixel": AttackInfo(Domain.IMAGE, Knowledge.BLACK_BOX, Stage.EVASION, _BOTH, Norm.L0),
    "nattack": AttackInfo(Domain.IMAGE, Knowledge.BLACK_BOX, Stage.EVASION, _U, Norm.LINF),
    "fga": AttackInfo(Domain.GRAPH, Knowledge.GREY_BOX, Stage.EVASION, _T, Norm.EDGE_FLIPS),
    "nettack": AttackInfo(Domain.GRAPH, Knowledge.GREY_BOX, Stage.POISONING, _T, Norm.EDGE_FLIPS),
    "ig_attack": AttackInfo(Domain.GRAPH, Knowledge.GREY_BOX, Stage.EVASION, _T, Norm.EDGE_FLIPS),
    "rnd": AttackInfo(Domain.GRAPH, Knowledge.BLACK_BOX, Stage.POISONING, _T, Norm.EDGE_FLIPS),
    "metattack": AttackInfo(Domain.GRAPH, Knowledge.GREY_BOX, Stage.POISONING, _U, Norm.EDGE_FLIPS),
    "pgd_topology": AttackInfo(Domain.GRAPH, Knowledge.WHITE_BOX, Stage.EVASION, _U, Norm.EDGE_FLIPS),
    "minmax_topology": AttackInfo(Domain.GRAPH, Knowledge.WHITE_BOX, Stage.POISONING, _U, Norm.EDGE_FLIPS),
    "dice": AttackInfo(Domain.GRAPH, Knowledge.BLACK_BOX, Stage.POISONING, _U, Norm.EDGE_FLIPS),
}

DEFENSE_INFO = {
    "fgsm": DefenseInfo(Domain.IMAGE, DefenseKind.ADVERSARIAL_TRAINING),
    "fast": DefenseInfo(Domain.IMAGE, DefenseKind.ADVERSARIAL_TRAINING),
    "pgd": DefenseInfo(Domain.IMAGE, DefenseKind.ADVERSARIAL_TRAINING),
    "trades": DefenseInfo(Domain.IMAGE, DefenseKind.ADVERSARIAL_TRAINING),
    "thermometer": DefenseInfo(Domain.IMAGE, DefenseKind.GRADIENT_MASKING),
    "lid": DefenseInfo(Domain.IMAGE, DefenseKind.DETECTION),
    "gcn": DefenseInfo(Domain.GRAPH, DefenseKind.NONE),
    "gcn_jaccard": DefenseInfo(Domain.GRAPH, DefenseKind.PREPROCESSING),
    "gcn_svd": DefenseInfo(Domain.GRAPH, DefenseKind.PREPROCESSING),
    "adversarial": DefenseInfo(Domain.GRAPH, DefenseKind.ADVERSARIAL_TRAINING),
}
