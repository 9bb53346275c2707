from . import functional
from .autograd import Tape, Tensor, backward
from .gradcheck import gradcheck
from .init import xavier_uniform_init
from .losses import cross_entropy, l2_penalty, masked_l1
from .optim import Adam, AdamState, EarlyStopping, PlateauScheduler, TrainControl, adam_step

__all__ = [
    "functional", "Tape", "Tensor", "backward", "gradcheck", "xavier_uniform_init",
    "cross_entropy", "l2_penalty", "masked_l1", "Adam", "AdamState", "EarlyStopping",
    "PlateauScheduler", "TrainControl", "adam_step",
]
