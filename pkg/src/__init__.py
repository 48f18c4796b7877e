"""Transfer-learning LSTM forecasting of high-cycle S-N fatigue curves"""

__version__ = "1.0.0"
