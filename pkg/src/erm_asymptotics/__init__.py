"""Exact asymptotics of ERM and Bayes-optimal classification in the teacher-student perceptron."""

__version__ = "0.1.0"
