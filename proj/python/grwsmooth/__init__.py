"""Order-contrastive temporal smoothing: losses, gradients, synthetic data,
a toy trainer, and the extent-scaling study, backed by the C++ core."""

try:
    from ._grwsmooth import *  # noqa: F401,F403  (installed package layout)
    from ._grwsmooth import __doc__ as _core_doc  # noqa: F401
except ImportError:  # in-tree builds put the module next to the build dir
    from _grwsmooth import *  # noqa: F401,F403

__all__ = [
    "smooth_loss",
    "smooth_loss_grad",
    "total_loss",
    "enumerate_orderings",
    "generate_dataset",
    "save_dataset",
    "train_classifier",
    "scaling_study",
    "grad_check",
    "default_config_json",
]
