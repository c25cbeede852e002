from corpus.batching import Batch, make_batches
from corpus.dialogue import DialoguePair, load_pairs, read_dialogues, split_dialogues
from corpus.tokenizer import detokenize, tokenize
from corpus.vocab import BOS, EOS, PAD, UNK, Vocab, build_vocab
