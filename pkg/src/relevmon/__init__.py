"""Monitoring of model-quality series for relevant deviations from a baseline."""
from ._accel import backend
from .errors import RelevmonError
from .kernels import KernelSpec, jackknife_kernel, kernel_norms, quartic, quartic_kernel, scaling_sequence
from .schemes import (
    Alarm,
    DetectorConfig,
    MonitorReport,
    Scheme,
    StreamingDetector,
    monitor_stream,
    run_detector,
)
from .simgen import ErrorKind, MeanKind, first_relevant_time, simulate_quality
from .smoothing import QualitySeries, SmootherConfig, cv_select_bandwidth, jackknife_estimate, local_linear_fit
from .variance import LrvEstimate, long_run_variance

__version__ = "0.1.0"

__all__ = [
    "Alarm", "DetectorConfig", "ErrorKind", "KernelSpec", "LrvEstimate", "MeanKind", "MonitorReport",
    "QualitySeries", "RelevmonError", "Scheme", "SmootherConfig", "StreamingDetector", "backend",
    "cv_select_bandwidth", "first_relevant_time", "jackknife_estimate", "jackknife_kernel", "kernel_norms",
    "local_linear_fit", "long_run_variance", "monitor_stream", "quartic", "quartic_kernel", "run_detector",
    "scaling_sequence", "simulate_quality",
]
