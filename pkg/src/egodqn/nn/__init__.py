from egodqn.nn.kernels import BACKEND
from egodqn.nn.layers import Concat, Conv2D, Dense, Flatten, ReLU
from egodqn.nn.network import QNetwork, build_conv_qnet, build_integrated_qnet
from egodqn.nn.optim import AdamState, adam_step, huber_loss, polyak_update

__all__ = [
    "BACKEND",
    "AdamState",
    "Concat",
    "Conv2D",
    "Dense",
    "Flatten",
    "QNetwork",
    "ReLU",
    "adam_step",
    "build_conv_qnet",
    "build_integrated_qnet",
    "huber_loss",
    "polyak_update",
]
