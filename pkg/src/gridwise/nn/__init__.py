from .layers import BatchNorm2d, Conv2d, LeakyReLU, TConv2d
from .model import AeConfig, AeModel, head_to_prob, load_params, save_params
from .gradcheck import gradient_check

__all__ = [
    "AeConfig", "AeModel", "BatchNorm2d", "Conv2d", "LeakyReLU", "TConv2d",
    "gradient_check", "head_to_prob", "load_params", "save_params",
]
