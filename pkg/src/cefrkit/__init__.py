"""cefrkit: CEFR proficiency classification over dependency-parsed learner texts."""

__version__ = "0.1.0"
