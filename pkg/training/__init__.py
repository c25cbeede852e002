from training.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from training.evaluation import evaluate, evaluate_checkpoint, generate
from training.optimizer import Adam
from training.trainer import Trainer, TrainResult, train
