APP_NAME = 'divspa'

THREADS_ENV = 'DIVSPA_THREADS'
DEBUG_LOGS_ENV = 'DIVSPA_DEBUG_LOGS'

CHECKPOINT_FORMAT_VERSION = 1
REPORT_SCHEMA_VERSION = 1

# cosine / norm floor, below it a vector counts as zero
ZERO_NORM = 1e-12
# smallest positive double; a sampled softmax loss never reaches 0
MIN_LOSS = 5e-324
# rectification floor for relevance-based weights
SCORE_FLOOR = 1e-6

DEFAULT_EVAL_KS = (50, 100, 200)
DEFAULT_DIVERSITY_DEPTHS = (100, 500, 1000)

OUTPUT_FILES = {
    'config': 'config.txt',
    'phase1': 'phase1.npz',
    'phase2': 'phase2.npz',
    'augmentations': 'augmentations.tsv',
    'report': 'report.txt',
    'report_json': 'report.json',
    'ranks': 'ranks-{}.tsv',
    'topk': 'topk-{}.tsv',
    'ablation': 'ablation.txt',
    'ablation_json': 'ablation.json',
    'compare': 'compare.txt',
    'compare_json': 'compare.json',
}

MOVIELENS_100K_URL = 'https://files.grouplens.org/datasets/movielens/ml-100k.zip'
