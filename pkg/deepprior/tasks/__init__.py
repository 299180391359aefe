from .training_task import run_training, run_fit_prior, train_posenet, fit_prior
from .refiner_task import run_refiner_training, train_refiner
from .evaluation_task import (
    run_evaluation, evaluate_network, localize_dataset, predict_dataset, record_report, list_records,
)

__all__ = [
    "run_training", "run_fit_prior", "train_posenet", "fit_prior",
    "run_refiner_training", "train_refiner",
    "run_evaluation", "evaluate_network", "localize_dataset", "predict_dataset", "record_report", "list_records",
]
