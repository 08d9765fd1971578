from rangeflow.core.tensor import (
    ComputationRecord, Tensor, no_record, as_tensor, add, sub, mul, div, neg, power, matmul,
    reshape, transpose, concat, take_slice, gather, reduce_sum, reduce_mean,
    exp, log, sqrt, tanh, softmax, set_default_dtype, get_default_dtype,
)
from rangeflow.core.optim import Adam, AdamState, adam_step
from rangeflow.core.checkpoint import save_checkpoint, load_checkpoint
