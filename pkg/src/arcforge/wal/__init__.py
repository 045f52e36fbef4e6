from .log import DURABILITY_MODES, GROUP, SYNC, WriteAheadLog
from .records import OPS, WalRecord

__all__ = ["DURABILITY_MODES", "GROUP", "SYNC", "OPS", "WalRecord", "WriteAheadLog"]
