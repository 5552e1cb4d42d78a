"""Spiking winner-takes-all networks with resource-based plasticity.

Subpackages are deliberately flat:

- ``core`` / ``plasticity``: neuron and learning-rule reference objects
- ``network``: the array-backed network and its compiled kernel
- ``siggen``: cluster and light-spot (DVS) input generators
- ``evaluate``: receptive centres, position decoding, cluster scores
- ``optimize``: genetic hyperparameter search
- ``cli`` / ``persist``: command line and file formats
"""

from scobul.core import NeuronParams, PlasticityParams, RenormMode, resource_to_weight
from scobul.events import EventStream
from scobul.network import Network, NetworkConfig, build_wta
from scobul.plasticity import StdpBaselineParams

__version__ = "0.1.0"

__all__ = [
    "EventStream",
    "Network",
    "NetworkConfig",
    "NeuronParams",
    "PlasticityParams",
    "RenormMode",
    "StdpBaselineParams",
    "build_wta",
    "resource_to_weight",
]
