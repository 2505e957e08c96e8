"""Multi-object tracking with a transformer motion predictor over historical trajectories."""
from ._accel import backend
from .association import COST_PROFILES, CostWeights, hungarian
from .config import PROFILES, ConfigProfile, get_profile, load_profile
from .embedding import MASK, HistoricalTrajectory
from .geometry import BBox, ImageDims, iou
from .kalman import KalmanConfig
from .metrics import EvalReport, evaluate
from .model import EncoderConfig, ModelParams, predict_batch, predict_box
from .synth import Scenario, dance_toy, generate, linear_toy
from .tracker import AssocConfig, KalmanPredictor, LifecycleConfig, Tracker, TransformerPredictor, run_sequence
from .training import TrainConfig, train

__version__ = "0.1.0"
