from metrics.bleu import BleuReport, corpus_bleu, sentence_bleu_i, sli_bleu
from metrics.distinct import DistinctReport, distinct_n, distinct_report
from metrics.similarity import sentence_embedding, sli_cosine
