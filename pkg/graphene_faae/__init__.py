"""
Forward-secure aggregate authenticated encryption with offline-online
processing, for senders that log many small messages and verifiers that
check them a window at a time.
"""

__version__ = '0.1.0'

from .aggregator import AggregateTag, agg_final, agg_fold, agg_init
from .config import AggMode, Instantiation, InstantiationConfig
from .engine import Batch, EngineState, SealedBatch, WindowSealer, aver, precompute_window, seal, verdec
from .exceptions import GrapheneError, VerificationError
from .keychain import KeyState, advance, kg, upd
from .wire import decode_batch, encode_batch

__all__ = [
    'AggMode', 'AggregateTag', 'Batch', 'EngineState', 'GrapheneError', 'Instantiation',
    'InstantiationConfig', 'KeyState', 'SealedBatch', 'VerificationError', 'WindowSealer',
    'advance', 'agg_final', 'agg_fold', 'agg_init', 'aver', 'decode_batch', 'encode_batch',
    'kg', 'precompute_window', 'seal', 'upd', 'verdec',
]
