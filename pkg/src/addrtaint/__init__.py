"""Address-level taint analysis for tracking coins through Bitcoin mixers."""
from .case import SampleCase
from .chain import (
    DAY,
    ChainIndex,
    OutputRef,
    Transaction,
    TxInput,
    TxOutput,
    build_index,
    resolve_input_address,
    transaction_fee,
)
from .clustering import cluster_addresses, cluster_input_sharing, cluster_output_sharing
from .evaluate import CaseReport, evaluate_case, render_report
from .filters import (
    FilterCalibration,
    MixingFee,
    ShapePattern,
    apply_filters,
    criterion1_value,
    criterion2_shape,
    criterion3_chain_shape,
    criterion4_no_reuse,
    criterion5_fee,
)
from .io import load_calibration, load_chain, save_chain
from .sim import GroundTruth, MixerScenario, reference_chain_T1, simulate
from .taint import (
    M1,
    M2,
    M3,
    ClusteringOptions,
    TaintResult,
    TaintWindow,
    address_taint_backward,
    address_taint_forward,
    baseline_outputs,
    method4,
    poison_taint,
    run_method,
)

__version__ = "0.1.0"
