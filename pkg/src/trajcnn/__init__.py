"""Convolutional pedestrian trajectory prediction on a small autodiff core."""
from .baselines import LstmConfig, LstmModel, build_lstm, linear_predict, lstm_cell_step, lstm_predict
from .data import SCENES, TrajectorySample, extract_windows, leave_one_out, load_scene
from .kernels import active_backend, use_backend
from .metrics import EvalReport, ade, aggregate, fde
from .model import ModelConfig, TrajCnnModel, build, forward, forward_sequential, receptive_field
from .train import TrainConfig, TrainLog, train

__version__ = "0.1.0"
