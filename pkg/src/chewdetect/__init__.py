"""Audio chewing detection: windowed features, kernel SVM, event aggregation
and leave-one-subject-out evaluation for stereo wearable recordings."""

__version__ = "0.1.0"
