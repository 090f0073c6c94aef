"""Forward-collision warning from Doppler signatures of a CW vehicular link.

Modules follow the pipeline: ``scenario`` (kinematics and labels), ``synth``
(spectrogram generation), ``preprocess`` (sanitizing), ``dataset`` (windows,
split, file format), ``models`` (numpy LSTM/CNN), ``evaluate`` (metrics,
ROC, alert lead times) and ``cli``.
"""

from .errors import ConfigError, DomainError, FormatError, TrainingError
from .scenario import EventClass

__version__ = "0.1.0"

__all__ = ["ConfigError", "DomainError", "EventClass", "FormatError", "TrainingError", "__version__"]
