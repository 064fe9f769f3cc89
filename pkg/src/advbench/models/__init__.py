from .checkpoint import load_network, read_checkpoint, save_network
from .estimators import CNNClassifier, MLPClassifier
from .network import Affine, Conv2d, Flatten, Network, ReLU, build_cnn, build_mlp
from .training import Adam, SGD, TrainConfig, TrainingError, TrainReport, accuracy, train

__all__ = [
    "Adam",
    "Affine",
    "CNNClassifier",
    "Conv2d",
    "Flatten",
    "MLPClassifier",
    "Network",
    "ReLU",
    "SGD",
    "TrainConfig",
    "TrainReport",
    "TrainingError",
    "accuracy",
    "build_cnn",
    "build_mlp",
    "load_network",
    "read_checkpoint",
    "save_network",
    "train",
]
