"""Achievable rates and bounds for MIMO relay channels."""

from .channel import AntennaConfig, ChannelRealization, PowerConstraints, Topology, realization
from .compress import cf_rate
from .fullduplex import (
    colocated_dest_capacity,
    colocated_source_capacity,
    cutset_rate,
    df_rate,
    direct_capacity,
)
from .halfduplex import hcs_rate, hdf_rate, twohop_rate
from .harness import ExperimentSpec, position_sweep, run

__version__ = "0.1.0"
