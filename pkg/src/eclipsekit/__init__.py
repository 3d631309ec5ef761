"""Score-based black-box evasion attacks and their evaluation.

Attacks: ECLIPSE (saliency-masked, blurred finite-difference hill climbing),
SimBA, SimBA-DCT and the L-inf Square Attack. Evaluations: robustness of
adversarial examples to JPEG compression, and detectability by a
DCT-spectrum SVM, plus query-count statistics.
"""

from ._backend import BACKEND
from .attacks import (
    ATTACKS,
    AttackOutcome,
    EclipseConfig,
    eclipse_attack,
    simba_attack,
    simba_dct_attack,
    square_attack_linf,
)
from .eval_p1 import CompressionRecord, P1Report, compression_loss, p1_metrics
from .eval_p2 import (
    CVReport,
    DetectorModel,
    QueryStats,
    query_stats,
    roc_auc,
    spectral_features,
    train_detector,
)
from .oracle import (
    Oracle,
    QueryLedger,
    RemoteOracle,
    SyntheticOracle,
    SyntheticOracleSpec,
    load_oracle,
)
from .saliency import occlusion_saliency

__version__ = "0.1.0"

__all__ = [
    "ATTACKS",
    "AttackOutcome",
    "BACKEND",
    "CVReport",
    "CompressionRecord",
    "DetectorModel",
    "EclipseConfig",
    "Oracle",
    "P1Report",
    "QueryLedger",
    "QueryStats",
    "RemoteOracle",
    "SyntheticOracle",
    "SyntheticOracleSpec",
    "compression_loss",
    "eclipse_attack",
    "load_oracle",
    "occlusion_saliency",
    "p1_metrics",
    "query_stats",
    "roc_auc",
    "simba_attack",
    "simba_dct_attack",
    "spectral_features",
    "square_attack_linf",
    "train_detector",
]
