from models.transformer import EVAL, TRAIN, ModelConfig, Seq2SeqTransformer
