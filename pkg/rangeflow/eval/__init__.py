from rangeflow.eval.curvature import CurvatureProfile, curvature, TOP_K
from rangeflow.eval.bev import BevHistogram, bev_histogram, mean_histogram
from rangeflow.eval.metrics import (
    jsd, mmd, mmd_permutation_test, sliced_w2, wasserstein2_1d, bootstrap_stderr, nfe_sweep,
    median_bandwidth,
)
from rangeflow.eval.reports import write_metric_report, read_metric_report
