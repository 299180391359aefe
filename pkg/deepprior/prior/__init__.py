from .pca import PcaPrior, fit_pca, embed, reconstruct, reconstruction_error, init_output_layer
from .robust import fit_robust_prior

__all__ = [
    "PcaPrior", "fit_pca", "embed", "reconstruct", "reconstruction_error", "init_output_layer",
    "fit_robust_prior",
]
