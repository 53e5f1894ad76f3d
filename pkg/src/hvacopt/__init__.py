"""Per-mode indoor temperature forecasting and HVAC switch-on optimisation."""
from .data_model import ModeSegment, OperationMode, SetpointBand
from .rnn import NetworkConfig, RnnPredictor, train_global
from .thermal_oracle import RoomPhysics

__version__ = "0.1.0"
__all__ = ["ModeSegment", "OperationMode", "SetpointBand", "NetworkConfig", "RnnPredictor", "train_global", "RoomPhysics"]
