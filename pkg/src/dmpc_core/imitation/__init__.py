"""Imitation learning and system identification on expert demonstrations"""

from .dataset import ImitationDataset, Record, gaussian_sampler, make_dataset, transitions
from .losses import LossResult, imitation_loss, model_loss, sysid_loss
from .optim import AdamState, Optimizer, RmspropState, adam_step, rmsprop_step
from .train import CURVE_COLUMNS, METHODS, TrainConfig, TrainResult, active_groups, train
