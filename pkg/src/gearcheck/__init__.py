"""Gearbox vibration fault diagnosis toolkit.

Pipeline: energy-operator preprocessing -> 19 time/spectral condition
indicators -> one-vs-one Gaussian-kernel SVM with stratified
cross-validation, plus a deterministic synthetic gearbox signal generator.
"""

__version__ = "0.1.0"

from .classify import (BinarySvmModel, ConfusionMatrix, KernelConfig,
                       McsvmModel, Standardizer, cross_validate,
                       fit_standardizer, load_model, optimize_kernel_scale,
                       predict, predict_votes, save_model, stratified_folds,
                       train_binary_svm, train_mcsvm)
from .energy import OperatorKind, ceeo, energy_operator, preprocess
from .errors import (ConvergenceError, DataError, DegenerateSignalError,
                     GearcheckError)
from .features import (FEATURE_NAMES, FeatureSet, FeatureTable, FeatureVector,
                       extract, read_feature_csv, sinad, snr,
                       spectral_features, time_features, write_feature_csv)
from .signals import (CLASS_ORDER, HealthClass, Signal, SignalMeta, Spectrum,
                      compute_spectrum, load_signal_csv, save_signal_csv,
                      save_spectrum_csv, segment)
from .synthgear import (DerivedFrequencies, GearboxConfig, SignalModel,
                        derive_frequencies, make_dataset, synthesize)

__all__ = [name for name in dir() if not name.startswith("_")]
