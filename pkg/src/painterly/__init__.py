"""Two-pass painterly harmonization of pasted elements into paintings."""

__version__ = "0.1.0"

from .backbone import (
    ConvLayer,
    WeightBank,
    forward,
    backward,
    load_weights,
    save_weights,
)
from .color import lab_to_rgb, rgb_to_lab
from .estimator import (
    interpolate_weights,
    load_style_probs,
    load_style_table,
    median_tv,
    one_hot_probs,
    predict_weights,
    tv_sigmoid,
)
from .harmonize import (
    PassConfig,
    PassResult,
    TwoPassResult,
    pass1_config,
    pass2_config,
    resize_inputs,
    single_pass,
    two_pass,
)
from .imageio import load_image, load_mask, save_image
from .lbfgs import OptimizeReport, lbfgs_minimize
from .losses import (
    LossConfig,
    StyleTargets,
    build_style_targets,
    histmatch,
    total_loss,
    tv_loss_and_grad,
)
from .mapping import (
    MappingField,
    consistent_mapping,
    independent_mapping,
    resize_mask,
)
from .postprocess import (
    chrominance_denoise,
    full_postprocess,
    guided_filter,
    patch_synthesis,
    patchmatch_nnf,
)

__all__ = [
    "ConvLayer",
    "WeightBank",
    "forward",
    "backward",
    "load_weights",
    "save_weights",
    "lab_to_rgb",
    "rgb_to_lab",
    "interpolate_weights",
    "load_style_probs",
    "load_style_table",
    "median_tv",
    "one_hot_probs",
    "predict_weights",
    "tv_sigmoid",
    "PassConfig",
    "PassResult",
    "TwoPassResult",
    "pass1_config",
    "pass2_config",
    "resize_inputs",
    "single_pass",
    "two_pass",
    "load_image",
    "load_mask",
    "save_image",
    "OptimizeReport",
    "lbfgs_minimize",
    "LossConfig",
    "StyleTargets",
    "build_style_targets",
    "histmatch",
    "total_loss",
    "tv_loss_and_grad",
    "MappingField",
    "consistent_mapping",
    "independent_mapping",
    "resize_mask",
    "chrominance_denoise",
    "full_postprocess",
    "guided_filter",
    "patch_synthesis",
    "patchmatch_nnf",
]
