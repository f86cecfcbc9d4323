from .activations import activation, activation_grad, relu, sigmoid, tanh
from .adam import AdamState, adam_update
from .gradcheck import finite_difference_gradient, max_relative_error
from .layers import Conv1DLayer, DenseLayer, FlattenLayer, LstmLayer
from .network import Network
from .weights_io import load_weights, save_weights

__all__ = [
    "activation",
    "activation_grad",
    "relu",
    "sigmoid",
    "tanh",
    "AdamState",
    "adam_update",
    "finite_difference_gradient",
    "max_relative_error",
    "Conv1DLayer",
    "DenseLayer",
    "FlattenLayer",
    "LstmLayer",
    "Network",
    "load_weights",
    "save_weights",
]
