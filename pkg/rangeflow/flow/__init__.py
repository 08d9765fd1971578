from rangeflow.flow.stage import FlowStage
from rangeflow.flow.timesteps import TimeDist, sample_timestep
from rangeflow.flow.losses import (
    interpolate_state, cfm_loss, pseudo_huber_loss, huber_constant, velocity_loss,
)
from rangeflow.flow.pairs import PairDataset, generate_reflow_pairs, generator_digest
from rangeflow.flow.trainer import FlowTrainer
from rangeflow.flow.rectified import RectifiedFlowTrainer, train_1rf
from rangeflow.flow.reflow import ReflowTrainer, train_reflow
from rangeflow.flow.distill import DistillTrainer, distill, distillation_targets
from rangeflow.flow.store import save_model, load_model, check_lineage
