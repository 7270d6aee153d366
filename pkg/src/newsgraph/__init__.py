"""News-headline company graphs feeding a GNN + LSTM movement classifier."""

from .core import (
    Bar,
    MovementLabel,
    Thresholds,
    TradingCalendar,
    compute_return,
    label_movement,
    next_trading_day,
)

__version__ = "0.1.0"

__all__ = [
    "Bar", "MovementLabel", "Thresholds", "TradingCalendar", "compute_return",
    "label_movement", "next_trading_day", "__version__",
]
