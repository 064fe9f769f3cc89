"""Image-domain defenses: robust training, thermometer encoding, LID detection."""

from .adversarial_training import (
    FLAVORS,
    AdversarialMLPClassifier,
    DefenseConfig,
    adversarial_train,
    perturb_batch,
    robust_accuracy,
    trades_inner,
    trades_loss,
    trades_train,
)
from .lid import (
    LidDetector,
    LidError,
    layer_activations,
    lid_detect,
    lid_detector_train,
    lid_features,
    lid_heldout_auc,
    lid_mle,
)
from .thermometer import (
    IdentityPreprocessor,
    PreprocessedClassifier,
    ThermometerEncoder,
    thermometer_decode,
    thermometer_encode,
)

__all__ = [
    "FLAVORS",
    "AdversarialMLPClassifier",
    "DefenseConfig",
    "IdentityPreprocessor",
    "LidDetector",
    "LidError",
    "PreprocessedClassifier",
    "ThermometerEncoder",
    "adversarial_train",
    "layer_activations",
    "lid_detect",
    "lid_detector_train",
    "lid_features",
    "lid_heldout_auc",
    "lid_mle",
    "perturb_batch",
    "robust_accuracy",
    "thermometer_decode",
    "thermometer_encode",
    "trades_inner",
    "trades_loss",
    "trades_train",
]
