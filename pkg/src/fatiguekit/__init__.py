"""fatiguekit: fatigue-score prediction from ECG and actigraphy streams.

Two parallel prediction paths over per-segment feature sequences: an
interpretable one (descriptive statistics, correlation-grouped feature
selection with LASSO refinement, linear regression) and a sequence-model one
(LSTM with optional self-attention and a consistency-regularized variant),
plus a synthetic-data oracle and a cross-validation harness.
"""

__version__ = "0.1.0"
