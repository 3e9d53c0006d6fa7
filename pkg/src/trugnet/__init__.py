"""Truncated-Gaussian (TruG) nonlinearities for stochastic neural networks."""
from . import ais, data, optim, rbm, tggm, trbm, trug, truncnorm
from .rbm import RbmModel
from .tggm import TggmModel
from .trbm import TrbmModel
from .trug import TrugParams

__version__ = "0.1.0"

__all__ = ["RbmModel", "TggmModel", "TrbmModel", "TrugParams", "ais", "data", "optim", "rbm",
           "tggm", "trbm", "trug", "truncnorm"]
