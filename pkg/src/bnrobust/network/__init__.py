from .data import Dataset, load_idx, make_blobs, read_idx, write_idx
from .layers import BatchNorm, Conv2d, Dense, Flatten, ReLU
from .model import SequentialModel, backward, forward
from .training import SgdConfig, TrainingLog, evaluate_accuracy, loss_softmax_ce, sgd_step, train
from .zoo import build_cnn, build_mlp

__all__ = [
    "BatchNorm", "Conv2d", "Dataset", "Dense", "Flatten", "ReLU", "SequentialModel",
    "SgdConfig", "TrainingLog", "backward", "build_cnn", "build_mlp", "evaluate_accuracy",
    "forward", "load_idx", "loss_softmax_ce", "make_blobs", "read_idx", "sgd_step", "train",
    "write_idx",
]
