"""Train single-layer LSTMs on aⁿbⁿ, aⁿbⁿcⁿ, aⁿbⁿcⁿdⁿ and measure how far they generalize."""

from lstm_formal.languages import Language, Sample, generate_sample
from lstm_formal.distributions import DistributionSpec, LengthWindow
from lstm_formal.lstm import LstmParameters, init_parameters
from lstm_formal.evaluation import EvalConfig, ErrorProfile, evaluate

__all__ = [
    "Language",
    "Sample",
    "generate_sample",
    "DistributionSpec",
    "LengthWindow",
    "LstmParameters",
    "init_parameters",
    "EvalConfig",
    "ErrorProfile",
    "evaluate",
]
