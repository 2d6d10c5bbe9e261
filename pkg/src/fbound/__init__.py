"""Finite feedback channels: capacity and error-exponent upper bounds,
mechanical verification of the entropy-drift lemmas behind them, and a
send-and-confirm variable-length coding simulator."""

from .channel_model import *  # noqa: F401,F403
from .info_measures import *  # noqa: F401,F403
from .bound_engine import *  # noqa: F401,F403
from .drift_verify import *  # noqa: F401,F403
from .vlc_sim import *  # noqa: F401,F403

from . import bound_engine, channel_model, drift_verify, info_measures, vlc_sim

__version__ = "0.1.0"

__all__ = (
    ["__version__"]
    + channel_model.__all__
    + info_measures.__all__
    + bound_engine.__all__
    + drift_verify.__all__
    + vlc_sim.__all__
)
