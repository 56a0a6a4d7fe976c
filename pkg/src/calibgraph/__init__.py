"""Fuse pairwise extrinsic calibrations into one consistent set of sensor poses."""

from . import fileio, graph, handeye, lie, resample, synth, validate
from .errors import (
    BranchError,
    CalibError,
    ConnectivityError,
    ConvergenceError,
    DegenerateMotionError,
    EstimatorError,
    InvalidArgumentError,
    NumericalError,
    ParseError,
    UnderConstrainedError,
)
from .graph import CalibEdge, CalibGraph, SensorNode, SolveReport, SolverOptions
from .handeye import HandEyeResult, MotionPair
from .lie import Pose, Rotation
from .resample import VarianceEstimate

__version__ = "0.1.0"
